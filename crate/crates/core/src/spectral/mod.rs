//! Resolvents and resolvent scans, characteristic roots, growth fitting,
//! subconvolutive certificates and growth-bound transfer.

mod growth;
mod lotka;
mod report;
mod resolvent;
mod scan;

pub use growth::{growth_fit, subconvolutive_bound, GrowthFit, SubconvolutiveCertificate};
pub use lotka::{characteristic, characteristic_matrix, lotka_roots, ROOT_SAMPLES};
pub use report::{
    classify, transfer_report, Classification, ConsistencyWarning, GrowthData, Hypotheses, SpectralReport,
    TransferMode, TransferReport,
};
pub use resolvent::{perturbed_resolvent, MatrixResolvent, PerturbedResolvent, ResolventOperator, PROXIMITY_CONDITION};
pub use scan::{resolvent_decay_scan, DecayClass, ResolventScan, ScanPath};
