//! The linear age-structured model on `L^p((0,c), R^n)`.

mod flux;
mod renewal;
mod resolvent;
mod spec;
mod stability;
mod upwind;

pub use flux::{flux_kernel, FluxKernel};
pub use renewal::{discontinuity_ages, field_gap, solve_renewal, BirthPath, SimulationResult, SolverKind};
pub use resolvent::{resolvent_power, AgeResolvent};
pub use spec::{AgeModelSpec, BirthRate, BoundaryKernel, InitialData, MaxAge, ModelInputs};
pub use stability::{stability_report, CONSISTENCY_TOL};
pub use upwind::upwind_oracle;
