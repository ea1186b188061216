//! Measurement-device-independent entanglement witnesses under imperfect
//! detection.
//!
//! The crate builds standard witnesses, expands them over local state bases,
//! simulates the Bell-projector protocol that turns them into
//! measurement-device-independent tests, and computes the thresholds a
//! measured value must beat when detectors lose events or register dark
//! counts.
//!
//! Matrix code is generic over [`Real`] (`f32`/`f64`); closed-form efficiency
//! maps and bounds are generic over [`Field`], so they can be evaluated exactly
//! with [`Exact`] rationals. The aliases below fix the common `f64` case.

pub mod detector;
pub mod error;
pub mod linalg;
pub mod mdi;
pub mod scalar;
pub mod states;
pub mod witness;

pub use detector::{
    certifies_mdi, critical_xi_plus, estimate_mdi, mdi_bound, mdi_bound_dark, mdi_bound_lossy,
    measured_mdi_from_true, measured_prob, run_mdi, run_seeds, simulate_counts, sweep_surface,
    sweep_surface_from, true_mdi_from_measured, CountMode, CountsRecord, EfficiencyParams,
    MdiRunResult, SurfaceFlag, SurfaceRow,
};
pub use error::{Error, Result};
pub use linalg::{
    dagger, hermitian_eigen, hermitian_to_real_vector, kron, partial_trace, partial_transpose,
    solve_real_linear, trace, ComplexMatrix, RealVector, SolveMethod,
};
pub use mdi::{
    decompose_witness, joint_prob_full, joint_prob_reduced, mdi_value, mdi_value_arbitrary_povm,
    probability_table, reconstruct_witness, ProbabilityTable, WitnessDecomposition,
};
pub use scalar::{Field, Real};
pub use states::{
    max_entangled, noisy_ghz, random_density, random_separable, tetrahedral_basis,
    validate_density, werner, DensityMatrix, StateBasis,
};
pub use witness::{
    ew_bound, ew_certifies, ew_measured_from_true, ew_true_from_measured, expectation, ghz_witness,
    pauli_decompose, werner_witness, PauliDecomposition, StandardEwEfficiencies, Witness,
};

/// Exact rational scalar for the closed-form bounds.
pub type Exact = num_rational::Ratio<i64>;

pub type Matrix = ComplexMatrix<f64>;
pub type Vector = RealVector<f64>;
pub type State = DensityMatrix<f64>;
pub type Basis = StateBasis<f64>;
pub type Observable = Witness<f64>;
pub type Decomposition = WitnessDecomposition<f64>;
pub type Efficiencies = EfficiencyParams<f64>;
pub type StandardEfficiencies = StandardEwEfficiencies<f64>;
pub type ExactEfficiencies = EfficiencyParams<Exact>;
