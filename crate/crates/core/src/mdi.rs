//! Measurement-device-independent witness evaluation.
//!
//! A witness is expanded as `W = sum beta_{r s ..} tau_r^T ⊗ omega_s^T ⊗ ..`
//! over one complete state basis per party. Each party feeds its basis state
//! (the "input") and its share of the tested state into a two-outcome
//! measurement whose "1" effect is the maximally entangled projector on
//! (input, share). The MDI value is `sum beta P(1, 1, ..|inputs)` and equals
//! `tr(W rho) / prod(d_k)`.
//!
//! Register layout for the full simulation is `(input_0, share_0, input_1,
//! share_1, ..)`, so every party's effect acts on two adjacent factors.
//! Outcome bins are bitmasks with party 0 in the most significant bit; the
//! all-ones bin is `2^n - 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_coordinates, hermitian_eigen, kron, kron_all, permute_subsystems,
    solve_real_linear_with, ComplexMatrix, SolveMethod,
};
use crate::scalar::Real;
use crate::states::{max_entangled, DensityMatrix, StateBasis};
use crate::witness::Witness;

/// Reconstruction tolerance for decompositions.
pub const DECOMPOSITION_TOL: f64 = 1e-8;
/// Slack allowed on effect eigenvalues outside `[0, 1]`.
pub const EFFECT_TOL: f64 = 1e-9;

/// All index tuples over `shape`, first index most significant.
pub fn settings(shape: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut idx = vec![0; shape.len()];
            for k in (0..shape.len()).rev() {
                idx[k] = flat % shape[k];
                flat /= shape[k];
            }
            idx
        })
        .collect()
}

/// Real coefficient tensor over per-party state bases.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessDecomposition<T> {
    /// Flattened over [`settings`] of `shape`.
    pub beta: Vec<T>,
    pub shape: Vec<usize>,
    pub bases: Vec<StateBasis<T>>,
    /// Max-entry deviation of the reconstruction from the witness.
    pub residual: T,
}

impl<T: Real> WitnessDecomposition<T> {
    pub fn n_parties(&self) -> usize {
        self.shape.len()
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.bases.iter().map(StateBasis::local_dim).collect()
    }

    pub fn beta_sum(&self) -> T {
        self.beta.iter().copied().sum()
    }

    pub fn beta_abs_sum(&self) -> T {
        self.beta.iter().map(|b| b.abs()).sum()
    }

    /// Coefficient at one index tuple.
    pub fn beta_at(&self, idx: &[usize]) -> T {
        let flat = idx
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i);
        self.beta[flat]
    }

    /// Input states for setting `flat`.
    pub fn inputs(&self, flat: usize) -> Vec<&DensityMatrix<T>> {
        let mut rest = flat;
        let mut idx = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            idx[k] = rest % self.shape[k];
            rest /= self.shape[k];
        }
        idx.iter()
            .zip(&self.bases)
            .map(|(&i, b)| &b.states()[i])
            .collect()
    }
}

fn transposed_product<T: Real>(states: &[&DensityMatrix<T>]) -> ComplexMatrix<T> {
    let factors: Vec<_> = states.iter().map(|s| s.matrix().transpose()).collect();
    kron_all(&factors)
}

pub fn decompose_witness<T: Real>(
    w: &Witness<T>,
    bases: &[StateBasis<T>],
) -> Result<WitnessDecomposition<T>> {
    decompose_witness_with(w, bases, SolveMethod::Auto)
}

/// Solve for `beta` with a chosen linear-solver path.
pub fn decompose_witness_with<T: Real>(
    w: &Witness<T>,
    bases: &[StateBasis<T>],
    method: SolveMethod,
) -> Result<WitnessDecomposition<T>> {
    let local: Vec<usize> = bases.iter().map(StateBasis::local_dim).collect();
    if local != w.dims() {
        return Err(Error::DimensionMismatch(format!(
            "basis local dims {local:?} vs witness dims {:?}",
            w.dims()
        )));
    }
    let shape: Vec<usize> = bases.iter().map(StateBasis::len).collect();
    let columns: Vec<_> = settings(&shape)
        .iter()
        .map(|idx| {
            let states: Vec<_> = idx
                .iter()
                .zip(bases)
                .map(|(&i, b)| &b.states()[i])
                .collect();
            hermitian_coordinates(&transposed_product(&states))
        })
        .collect();
    let target = hermitian_coordinates(w.matrix());
    let solution = solve_real_linear_with(&columns, &target, method)?;
    let mut dec = WitnessDecomposition {
        beta: solution.coefficients.into_vec(),
        shape,
        bases: bases.to_vec(),
        residual: T::zero(),
    };
    let residual = reconstruct_matrix(&dec).max_abs_diff(w.matrix());
    if residual > T::tol(DECOMPOSITION_TOL) {
        return Err(Error::InconsistentSystem {
            residual: residual.to_f64_lossy(),
        });
    }
    dec.residual = residual;
    Ok(dec)
}

fn reconstruct_matrix<T: Real>(d: &WitnessDecomposition<T>) -> ComplexMatrix<T> {
    let total: usize = d.local_dims().iter().product();
    let mut acc = ComplexMatrix::zeros(total);
    for (flat, &b) in d.beta.iter().enumerate() {
        if b == T::zero() {
            continue;
        }
        acc = &acc + &transposed_product(&d.inputs(flat)).scale(b);
    }
    acc
}

/// `sum beta (⊗ state^T)`.
pub fn reconstruct_witness<T: Real>(d: &WitnessDecomposition<T>) -> Result<Witness<T>> {
    Witness::new(reconstruct_matrix(d), d.local_dims())
}

fn check_inputs<T: Real>(rho: &DensityMatrix<T>, inputs: &[&DensityMatrix<T>]) -> Result<()> {
    let input_dims: Vec<usize> = inputs.iter().map(|s| s.dim()).collect();
    if input_dims != rho.dims() {
        return Err(Error::DimensionMismatch(format!(
            "input dims {input_dims:?} vs shared-state dims {:?}",
            rho.dims()
        )));
    }
    Ok(())
}

/// Global operator `inputs ⊗ rho` reordered to `(in_0, sh_0, in_1, sh_1, ..)`.
pub fn register_state<T: Real>(
    rho: &DensityMatrix<T>,
    inputs: &[&DensityMatrix<T>],
) -> Result<ComplexMatrix<T>> {
    check_inputs(rho, inputs)?;
    let n = inputs.len();
    let factors: Vec<_> = inputs.iter().map(|s| s.matrix()).collect();
    let global = kron(&kron_all(factors), rho.matrix());
    let dims: Vec<usize> = rho.dims().iter().chain(rho.dims()).copied().collect();
    let order: Vec<usize> = (0..n).flat_map(|k| [k, n + k]).collect();
    permute_subsystems(&global, &dims, &order)
}

/// `tr((⊗_k E_k) G)` for one effect per party on its (input, share) pair.
fn product_effect_prob<T: Real>(register: &ComplexMatrix<T>, effects: &[&ComplexMatrix<T>]) -> T {
    register
        .trace_product(&kron_all(effects.iter().copied()))
        .re
}

/// `P(1, .., 1 | inputs)` by explicit simulation of the Bell-projector
/// measurement on the full register.
pub fn joint_prob_full<T: Real>(rho: &DensityMatrix<T>, inputs: &[&DensityMatrix<T>]) -> Result<T> {
    let register = register_state(rho, inputs)?;
    let projectors = bell_effects(rho.dims());
    let refs: Vec<_> = projectors.iter().collect();
    Ok(product_effect_prob(&register, &refs))
}

fn bell_effects<T: Real>(dims: &[usize]) -> Vec<ComplexMatrix<T>> {
    dims.iter()
        .map(|&d| {
            max_entangled::<T>(d)
                .expect("local dims >= 2")
                .into_matrix()
        })
        .collect()
}

/// Closed form `tr((⊗ input^T) rho) / prod(d_k)`.
pub fn joint_prob_reduced<T: Real>(
    rho: &DensityMatrix<T>,
    inputs: &[&DensityMatrix<T>],
) -> Result<T> {
    check_inputs(rho, inputs)?;
    let d: usize = rho.dims().iter().product();
    Ok(transposed_product(inputs).trace_product(rho.matrix()).re / T::lit(d as f64))
}

/// Full outcome distribution of one setting, all `2^n` bins, by explicit
/// simulation with effects `{I - E_k, E_k}` per party.
pub fn outcome_distribution_full<T: Real>(
    rho: &DensityMatrix<T>,
    inputs: &[&DensityMatrix<T>],
    click_effects: &[ComplexMatrix<T>],
) -> Result<Vec<T>> {
    let register = register_state(rho, inputs)?;
    let n = inputs.len();
    let complements: Vec<_> = click_effects
        .iter()
        .map(|e| &ComplexMatrix::identity(e.dim()) - e)
        .collect();
    Ok((0..1usize << n)
        .map(|bin| {
            let effects: Vec<&ComplexMatrix<T>> = (0..n)
                .map(|k| {
                    if (bin >> (n - 1 - k)) & 1 == 1 {
                        &click_effects[k]
                    } else {
                        &complements[k]
                    }
                })
                .collect();
            product_effect_prob(&register, &effects)
        })
        .collect())
}

/// Joint click probabilities for every setting of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityTable<T> {
    pub n_parties: usize,
    pub shape: Vec<usize>,
    /// One row of `2^n_parties` bin probabilities per setting.
    pub outcomes: Vec<Vec<T>>,
    pub counts_per_setting: Option<u64>,
}

impl<T: Real> ProbabilityTable<T> {
    pub fn n_bins(&self) -> usize {
        1 << self.n_parties
    }

    pub fn all_ones(&self, setting: usize) -> T {
        self.outcomes[setting][self.n_bins() - 1]
    }

    pub fn n_settings(&self) -> usize {
        self.outcomes.len()
    }
}

/// Probability table of `rho` under the Bell-projector protocol for every
/// input tuple of `d`.
pub fn probability_table<T: Real>(
    rho: &DensityMatrix<T>,
    d: &WitnessDecomposition<T>,
) -> Result<ProbabilityTable<T>> {
    check_parties(rho, d)?;
    let effects = bell_effects::<T>(rho.dims());
    let total = d.beta.len();
    let outcomes = (0..total)
        .into_par_iter()
        .map(|flat| outcome_distribution_full(rho, &d.inputs(flat), &effects))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityTable {
        n_parties: d.n_parties(),
        shape: d.shape.clone(),
        outcomes,
        counts_per_setting: None,
    })
}

fn check_parties<T: Real>(rho: &DensityMatrix<T>, d: &WitnessDecomposition<T>) -> Result<()> {
    if d.local_dims() != rho.dims() {
        return Err(Error::DimensionMismatch(format!(
            "decomposition dims {:?} vs state dims {:?}",
            d.local_dims(),
            rho.dims()
        )));
    }
    Ok(())
}

/// `sum beta P(1, .., 1 | inputs)` with Bell-projector measurements.
pub fn mdi_value<T: Real>(rho: &DensityMatrix<T>, d: &WitnessDecomposition<T>) -> Result<T> {
    check_parties(rho, d)?;
    let effects = bell_effects::<T>(rho.dims());
    let refs: Vec<_> = effects.iter().collect();
    weighted_clicks(rho, d, &refs)
}

fn weighted_clicks<T: Real>(
    rho: &DensityMatrix<T>,
    d: &WitnessDecomposition<T>,
    effects: &[&ComplexMatrix<T>],
) -> Result<T> {
    let terms = (0..d.beta.len())
        .into_par_iter()
        .map(|flat| {
            let register = register_state(rho, &d.inputs(flat))?;
            Ok(d.beta[flat] * product_effect_prob(&register, effects))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(terms.into_iter().sum())
}

/// Check `0 <= E <= I` on each party's (input, share) space.
pub fn validate_effect<T: Real>(effect: &ComplexMatrix<T>) -> Result<()> {
    let e = hermitian_eigen(effect)?;
    let tol = T::tol(EFFECT_TOL);
    for &lambda in [e.min(), e.max()].iter() {
        if lambda < -tol || lambda > T::one() + tol {
            return Err(Error::InvalidEffect {
                eigenvalue: lambda.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// MDI value when each party applies an arbitrary click effect instead of
/// the Bell projector.
pub fn mdi_value_arbitrary_povm<T: Real>(
    rho: &DensityMatrix<T>,
    d: &WitnessDecomposition<T>,
    effects: &[ComplexMatrix<T>],
) -> Result<T> {
    check_parties(rho, d)?;
    if effects.len() != rho.dims().len()
        || effects
            .iter()
            .zip(rho.dims())
            .any(|(e, &dk)| e.dim() != dk * dk)
    {
        return Err(Error::DimensionMismatch(format!(
            "need one effect of dimension d_k^2 per party for dims {:?}",
            rho.dims()
        )));
    }
    for e in effects {
        validate_effect(e)?;
    }
    let refs: Vec<_> = effects.iter().collect();
    weighted_clicks(rho, d, &refs)
}
