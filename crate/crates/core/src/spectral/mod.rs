//! Closed-form eigensystem, expansion coefficients, magic sums and the
//! spectral representations of the purity deviation.

pub mod coefficients;
pub mod cyclotomic;
pub mod eigen;
pub mod magic;
pub mod series;
pub mod structure;

pub use coefficients::{
    coefficients, finite_size_term, Coefficient, CoefficientMethod, CoefficientSet,
};
pub use eigen::{
    eigen_pair, eigenvalue, normalization, steady_state_vectors, EigenPair, SteadyVectors,
};
pub use magic::{magic_sum_exact, magic_sum_f, MagicSumTable};
pub use series::{
    diverging_term_estimate, finite_size_correction, spectral_delta_direct, spectral_delta_series,
    DirectEvaluator, DirectResult, SeriesEvaluator, SeriesOptions, SeriesResult,
};
