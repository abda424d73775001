//! The diamond convolution `S_A ⋄ f`, Dyson-Phillips terms and the perturbed
//! semigroup built from them.

mod bounds;
mod kernel;
mod series;

pub use bounds::{
    convolution_ratio, mr_delta_estimate, probe_paths, quasi_hy_check, DeltaEstimate, QuasiHyReport,
    DEFAULT_PROBES,
};
pub(crate) use kernel::functional_bound as kernel_functional_bound;
pub use kernel::{diamond, howland_step_matrix, DiamondKernel, KernelForm, TimePath};
pub use series::{dyson_term, dyson_terms, perturbed_semigroup, Perturbed, SeriesTerm};
