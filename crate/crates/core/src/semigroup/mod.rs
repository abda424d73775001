//! Finite-dimensional semigroups, evolution families and integrated
//! semigroups.

mod evolution;
mod howland;
mod integrated;
mod matrix;
mod profile;

pub use evolution::{build_evolution_family, AgeCoefficients, EvolutionFamily, SUBSTEPS};
pub use howland::{howland_apply, howland_resolvent, howland_step, Transported};
pub use integrated::{
    integrated_from_semigroup, laplace_resolvent, IntegratedPath, IntegratedSemigroupPath,
    LaplaceValue,
};
pub use matrix::{matrix_semigroup, semigroup_law_residual, ExpBound, SemigroupPath};
pub use profile::{AgeProfile, ComplexProfile, Profile};
pub(crate) use profile::lp_norm_flat;
