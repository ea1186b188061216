//! Standard entanglement witnesses and their detection-loophole thresholds.
//!
//! With `C0` the identity coefficient of the witness and the lost/additional
//! event efficiencies `eta-`, `eta+`, equal per-eigenvalue count shifts give
//! `<S>_m = <S>_t / D` for every traceless term, where
//! `D = eta- + 1/eta+ - 1`. Hence
//!
//! ```text
//! <W>_m = (<W>_t + C0 (D - 1)) / D
//! ```
//!
//! and `<W>_t < 0` exactly when `<W>_m < C0 (1 - 1/D)`.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::partial_transpose;
use crate::linalg::{kron_all, pauli, ComplexMatrix, HERMITIAN_TOL};
use crate::scalar::{Field, Real};
use crate::states::{ghz, max_entangled, DensityMatrix};

/// Certification margin for strict inequalities.
pub const CERTIFY_TOL: f64 = 1e-12;

/// Hermitian observable with non-negative trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness<T> {
    matrix: ComplexMatrix<T>,
    dims: Vec<usize>,
}

impl<T: Real> Witness<T> {
    pub fn new(matrix: ComplexMatrix<T>, dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().product::<usize>() != matrix.dim() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} do not multiply to witness dimension {}",
                matrix.dim()
            )));
        }
        matrix.ensure_hermitian()?;
        let tr = matrix.trace().re;
        if tr < -T::tol(HERMITIAN_TOL) {
            return Err(Error::ParameterOutOfRange {
                name: "tr(W)",
                value: tr.to_f64_lossy(),
                domain: "tr(W) >= 0",
            });
        }
        Ok(Self { matrix, dims })
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn total_dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// `|phi+><phi+|^{T_B}`, detecting Werner states with `p > 1/3`.
pub fn werner_witness<T: Real>() -> Witness<T> {
    let phi = max_entangled::<T>(2).expect("d = 2");
    let w = partial_transpose(phi.matrix(), &[2, 2], 1).expect("2x2 dims");
    Witness::new(w, vec![2, 2]).expect("partial transpose of a projector is Hermitian")
}

/// `I/2 - |GHZ><GHZ|`, detecting genuine tripartite entanglement of noisy
/// GHZ states with `q > 3/7`.
pub fn ghz_witness<T: Real>() -> Witness<T> {
    let w = &ComplexMatrix::identity(8).scale(T::lit(0.5)) - ghz::<T>().matrix();
    Witness::new(w, vec![2, 2, 2]).expect("Hermitian by construction")
}

/// `tr(W rho)`; the imaginary part is rounding only.
pub fn expectation<T: Real>(w: &Witness<T>, rho: &DensityMatrix<T>) -> Result<T> {
    if w.dims != rho.dims() {
        return Err(Error::DimensionMismatch(format!(
            "witness dims {:?} vs state dims {:?}",
            w.dims,
            rho.dims()
        )));
    }
    Ok(w.matrix.trace_product(rho.matrix()).re)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauliTerm<T> {
    pub coefficient: T,
    /// One Pauli index (0..=3) per qubit; never all zero.
    pub indices: Vec<usize>,
}

/// `W = c0 I + sum_alpha C_alpha S_alpha` with traceless Pauli strings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauliDecomposition<T> {
    pub c0: T,
    pub terms: Vec<PauliTerm<T>>,
}

impl<T: Real> PauliDecomposition<T> {
    pub fn n_qubits(&self) -> Option<usize> {
        self.terms.first().map(|t| t.indices.len())
    }

    pub fn recombine(&self, n_qubits: usize) -> ComplexMatrix<T> {
        let mut acc = ComplexMatrix::identity(1 << n_qubits).scale(self.c0);
        for term in &self.terms {
            acc = &acc + &pauli_string::<T>(&term.indices).scale(term.coefficient);
        }
        acc
    }
}

fn pauli_string<T: Real>(indices: &[usize]) -> ComplexMatrix<T> {
    let factors: Vec<_> = indices.iter().map(|&k| pauli::<T>(k)).collect();
    kron_all(&factors)
}

/// Expand a qubit witness in Pauli strings; terms below `1e-14` are dropped.
pub fn pauli_decompose<T: Real>(w: &Witness<T>) -> Result<PauliDecomposition<T>> {
    if w.dims.iter().any(|&d| d != 2) {
        return Err(Error::NotQubit(w.dims.clone()));
    }
    let n = w.dims.len();
    let d = T::lit(w.total_dim() as f64);
    let c0 = w.trace() / d;
    let mut terms = Vec::new();
    let mut indices = vec![0usize; n];
    for code in 1..4usize.pow(n as u32) {
        let mut rest = code;
        for slot in indices.iter_mut().rev() {
            *slot = rest % 4;
            rest /= 4;
        }
        let coefficient = w.matrix.trace_product(&pauli_string(&indices)).re / d;
        if coefficient.abs() > T::lit(1e-14) {
            terms.push(PauliTerm {
                coefficient,
                indices: indices.clone(),
            });
        }
    }
    let dec = PauliDecomposition { c0, terms };
    let residual = dec.recombine(n).max_abs_diff(&w.matrix);
    if residual > T::tol(HERMITIAN_TOL) {
        return Err(Error::InconsistentSystem {
            residual: residual.to_f64_lossy(),
        });
    }
    Ok(dec)
}

/// Lost (`eta_minus`) and additional (`eta_plus`) event efficiencies for a
/// standard witness measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardEwEfficiencies<T> {
    pub eta_minus: T,
    pub eta_plus: T,
}

impl<T: Field> StandardEwEfficiencies<T> {
    pub fn new(eta_minus: T, eta_plus: T) -> Result<Self> {
        for (name, v) in [("eta_minus", &eta_minus), ("eta_plus", &eta_plus)] {
            if !(v > &T::zero() && v <= &T::one()) {
                return Err(Error::ParameterOutOfRange {
                    name,
                    value: v.to_f64_lossy(),
                    domain: "(0, 1]",
                });
            }
        }
        Ok(Self {
            eta_minus,
            eta_plus,
        })
    }

    pub fn ideal() -> Self {
        Self {
            eta_minus: T::one(),
            eta_plus: T::one(),
        }
    }

    /// `eta- + 1/eta+ - 1`, checked positive.
    pub fn denominator(&self) -> Result<T> {
        effective_denominator(&self.eta_minus, &self.eta_plus)
    }
}

pub(crate) fn effective_denominator<T: Field>(eta_minus: &T, eta_plus: &T) -> Result<T> {
    if eta_plus.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
        return Err(Error::Unphysical {
            denominator: f64::NAN,
        });
    }
    let d = eta_minus.clone() + T::one() / eta_plus.clone() - T::one();
    if d <= T::zero() {
        return Err(Error::Unphysical {
            denominator: d.to_f64_lossy(),
        });
    }
    Ok(d)
}

/// Measured witness value produced by a true value under the efficiencies.
pub fn ew_measured_from_true<T: Field>(
    true_val: T,
    c0: T,
    eff: &StandardEwEfficiencies<T>,
) -> Result<T> {
    let d = eff.denominator()?;
    let shift = d.clone() - T::one();
    Ok((true_val + c0 * shift) / d)
}

/// Inverse of [`ew_measured_from_true`].
pub fn ew_true_from_measured<T: Field>(
    measured: T,
    c0: T,
    eff: &StandardEwEfficiencies<T>,
) -> Result<T> {
    let d = eff.denominator()?;
    let shift = d.clone() - T::one();
    Ok(measured * d - c0 * shift)
}

/// Threshold `c0 (1 - 1/(eta- + 1/eta+ - 1))`; measured values strictly
/// below it certify entanglement.
pub fn ew_bound<T: Field>(c0: T, eff: &StandardEwEfficiencies<T>) -> Result<T> {
    let d = eff.denominator()?;
    Ok(c0 * (T::one() - T::one() / d))
}

pub fn ew_certifies<T: Real>(measured: T, c0: T, eff: &StandardEwEfficiencies<T>) -> Result<bool> {
    Ok(measured < ew_bound(c0, eff)? - T::lit(CERTIFY_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{noisy_ghz, random_separable, singlet, werner};
    use num_complex::Complex;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    fn eff(m: f64, p: f64) -> StandardEwEfficiencies<f64> {
        StandardEwEfficiencies::new(m, p).unwrap()
    }

    #[test]
    fn werner_witness_values() {
        let w = werner_witness::<f64>();
        assert!((w.trace() - 1.0).abs() < 1e-15);
        assert!((expectation(&w, &singlet()).unwrap() + 0.5).abs() < 1e-15);
        assert!((expectation(&w, &werner(0.0).unwrap()).unwrap() - 0.25).abs() < 1e-15);
        assert!((expectation(&w, &werner(1.0).unwrap()).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn werner_witness_nonnegative_on_separable_states() {
        let w = werner_witness::<f64>();
        for seed in 0..500 {
            let sigma = random_separable(&[2, 2], 3, seed).unwrap();
            assert!(expectation(&w, &sigma).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn ghz_witness_values() {
        let w = ghz_witness::<f64>();
        assert!((w.trace() - 3.0).abs() < 1e-15);
        for k in 0..=14 {
            let qv = k as f64 / 14.0;
            let val = expectation(&w, &noisy_ghz(qv).unwrap()).unwrap();
            assert!((val - (3.0 - 7.0 * qv) / 8.0).abs() < 1e-14);
        }
        assert!(
            expectation(&w, &noisy_ghz(3.0 / 7.0).unwrap())
                .unwrap()
                .abs()
                < 1e-15
        );
        assert!((expectation(&w, &noisy_ghz(1.0).unwrap()).unwrap() + 0.5).abs() < 1e-15);
        let mut zero = ComplexMatrix::<f64>::zeros(8);
        zero[(0, 0)] = Complex::new(1.0, 0.0);
        let ket000 = DensityMatrix::new_unchecked(zero, vec![2, 2, 2]);
        assert!(expectation(&w, &ket000).unwrap().abs() < 1e-15);
    }

    #[test]
    fn expectation_rejects_mismatched_dims() {
        let w = werner_witness::<f64>();
        assert!(matches!(
            expectation(&w, &noisy_ghz(0.5).unwrap()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pauli_identity_coefficients() {
        let dw = pauli_decompose(&werner_witness::<f64>()).unwrap();
        assert!((dw.c0 - 0.25).abs() < 1e-15);
        // SWAP/2 = (II + XX + YY + ZZ)/4
        assert_eq!(dw.terms.len(), 3);
        assert!(dw
            .terms
            .iter()
            .all(|t| (t.coefficient - 0.25).abs() < 1e-15));

        let dg = pauli_decompose(&ghz_witness::<f64>()).unwrap();
        assert!((dg.c0 - 0.375).abs() < 1e-15);
        assert!(dg.recombine(3).max_abs_diff(ghz_witness::<f64>().matrix()) < 1e-10);

        let id = Witness::new(ComplexMatrix::<f64>::identity(4).scale(0.25), vec![2, 2]).unwrap();
        let di = pauli_decompose(&id).unwrap();
        assert!((di.c0 - 0.25).abs() < 1e-15 && di.terms.is_empty());
    }

    #[test]
    fn pauli_rejects_qutrits() {
        let w = Witness::new(ComplexMatrix::<f64>::identity(9), vec![3, 3]).unwrap();
        assert!(matches!(pauli_decompose(&w), Err(Error::NotQubit(_))));
    }

    #[test]
    fn witness_rejects_negative_trace() {
        assert!(Witness::new(ComplexMatrix::<f64>::identity(4).scale(-1.0), vec![2, 2]).is_err());
    }

    #[test]
    fn measured_map_examples() {
        assert_eq!(
            ew_measured_from_true(-0.3, 0.25, &eff(1.0, 1.0)).unwrap(),
            -0.3
        );
        assert_eq!(
            ew_measured_from_true(
                q(0, 1),
                q(1, 4),
                &StandardEwEfficiencies::new(q(1, 1), q(1, 2)).unwrap()
            )
            .unwrap(),
            q(1, 8)
        );
        assert_eq!(
            ew_measured_from_true(
                q(-1, 2),
                q(1, 4),
                &StandardEwEfficiencies::new(q(1, 2), q(1, 1)).unwrap()
            )
            .unwrap(),
            q(-5, 4)
        );
    }

    #[test]
    fn bound_examples() {
        assert_eq!(ew_bound(0.25, &eff(0.5, 1.0)).unwrap(), -0.25);
        assert_eq!(ew_bound(0.375, &eff(0.5, 1.0)).unwrap(), -0.375);
        assert_eq!(ew_bound(0.7, &eff(1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn certify_examples() {
        assert!(ew_certifies(-0.3, 0.25, &eff(0.5, 1.0)).unwrap());
        assert!(!ew_certifies(-0.2, 0.25, &eff(0.5, 1.0)).unwrap());
        assert!(!ew_certifies(-0.25, 0.25, &eff(0.5, 1.0)).unwrap());
        assert!(ew_certifies(-0.01, 0.25, &eff(1.0, 1.0)).unwrap());
    }

    #[test]
    fn efficiencies_domain() {
        assert!(StandardEwEfficiencies::new(0.0, 1.0).is_err());
        assert!(StandardEwEfficiencies::new(1.0, 1.5).is_err());
        assert!(StandardEwEfficiencies::new(0.1, 0.1).is_ok());
        let bad = StandardEwEfficiencies {
            eta_minus: -3.0,
            eta_plus: 1.0,
        };
        assert!(matches!(
            ew_bound(0.25, &bad),
            Err(Error::Unphysical { .. })
        ));
    }

    // Independent route: build eigenvalue-bin counts for each traceless term,
    // shift every bin by the same lost/added amount, and recombine. Exact in
    // rationals, so it must reproduce the closed-form map and threshold.
    fn counts_model_measured(
        c0: Q,
        terms: &[(Q, Vec<Q>, Vec<Q>)],
        n_ideal: Q,
        lost_per_bin: Q,
        added_per_bin: Q,
    ) -> Q {
        let mut total = c0;
        for (coef, eigenvalues, probs) in terms {
            let bins = Q::from_integer(eigenvalues.len() as i64);
            let counts: Vec<Q> = probs
                .iter()
                .map(|p| n_ideal * p - lost_per_bin + added_per_bin)
                .collect();
            let n_meas: Q = counts.iter().copied().sum();
            assert_eq!(n_meas, n_ideal - lost_per_bin * bins + added_per_bin * bins);
            let mean: Q = counts
                .iter()
                .zip(eigenvalues)
                .map(|(n, l)| n * l)
                .sum::<Q>()
                / n_meas;
            total += coef * mean;
        }
        total
    }

    #[test]
    fn counts_model_recovers_closed_form() {
        // W = c0 I + a Z + b X (single-qubit toy, eigenvalues +-1 per term)
        let c0 = q(1, 4);
        let n_ideal = Q::from_integer(1200);
        for (em, ep) in [
            (q(1, 2), q(1, 1)),
            (q(1, 1), q(1, 2)),
            (q(3, 4), q(4, 5)),
            (q(9, 10), q(2, 3)),
        ] {
            let lost = n_ideal * (Q::from_integer(1) - em) / 2;
            let added = n_ideal * (Q::from_integer(1) / ep - 1) / 2;
            for (pz, px) in [(q(1, 2), q(1, 2)), (q(7, 8), q(1, 3)), (q(3, 5), q(9, 10))] {
                let (a, b) = (q(-1, 3), q(1, 5));
                let terms = vec![
                    (a, vec![q(1, 1), q(-1, 1)], vec![pz, q(1, 1) - pz]),
                    (b, vec![q(1, 1), q(-1, 1)], vec![px, q(1, 1) - px]),
                ];
                let true_val = c0 + a * (q(2, 1) * pz - 1) + b * (q(2, 1) * px - 1);
                let measured = counts_model_measured(c0, &terms, n_ideal, lost, added);
                let effs = StandardEwEfficiencies::new(em, ep).unwrap();
                assert_eq!(
                    measured,
                    ew_measured_from_true(true_val, c0, &effs).unwrap()
                );
                // zero true value maps onto the threshold
                let at_zero = ew_measured_from_true(Q::from_integer(0), c0, &effs).unwrap();
                assert_eq!(at_zero, ew_bound(c0, &effs).unwrap());
            }
        }
    }

    #[test]
    fn reductions_are_exact() {
        for i in 1..=20 {
            for j in 1..=20 {
                let (em, ep) = (q(i, 20), q(j, 20));
                let c0 = q(3, 8);
                let case1 =
                    ew_bound(c0, &StandardEwEfficiencies::new(em, q(1, 1)).unwrap()).unwrap();
                assert_eq!(case1, c0 * (q(1, 1) - em.recip()));
                let case2 =
                    ew_bound(c0, &StandardEwEfficiencies::new(q(1, 1), ep).unwrap()).unwrap();
                assert_eq!(case2, c0 * (q(1, 1) - ep));
                let case2_map = ew_measured_from_true(
                    q(-1, 7),
                    c0,
                    &StandardEwEfficiencies::new(q(1, 1), ep).unwrap(),
                )
                .unwrap();
                assert_eq!(case2_map, c0 * (q(1, 1) - ep) + ep * q(-1, 7));
            }
        }
    }
}
