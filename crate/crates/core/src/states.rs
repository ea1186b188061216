//! Validated quantum states and the state families used by the witnesses.
//!
//! Computational basis `|0> = (1, 0)`; multi-qubit states order qubits
//! left to right in Kronecker factor order.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_coordinates, hermitian_eigen, kron, kron_all, pauli, solve_real_linear_with,
    ComplexMatrix, SolveMethod, HERMITIAN_TOL,
};
use crate::scalar::Real;

pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive semidefinite matrix with its subsystem
/// dimensions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityMatrix<T> {
    matrix: ComplexMatrix<T>,
    dims: Vec<usize>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    /// Product state `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            matrix: kron(&self.matrix, &other.matrix),
            dims,
        }
    }

    /// Skip validation; used for constructions that are PSD by design.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix<T>, dims: Vec<usize>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), matrix.dim());
        Self { matrix, dims }
    }
}

/// Check every density-matrix invariant and report the first that fails.
pub fn validate_density<T: Real>(m: ComplexMatrix<T>, dims: &[usize]) -> Result<DensityMatrix<T>> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || total != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not multiply to matrix dimension {}",
            m.dim()
        )));
    }
    m.ensure_hermitian()?;
    let tr = m.trace().re;
    if (tr - T::one()).abs() > T::tol(TRACE_TOL) {
        return Err(Error::TraceViolation {
            trace: tr.to_f64_lossy(),
        });
    }
    let min = hermitian_eigen(&m)?.min();
    if min < -T::tol(PSD_TOL) {
        return Err(Error::PositivityViolation {
            min_eigenvalue: min.to_f64_lossy(),
        });
    }
    Ok(DensityMatrix {
        matrix: m,
        dims: dims.to_vec(),
    })
}

fn check_unit_interval(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name,
            value: x,
            domain: "[0, 1]",
        })
    }
}

fn ket<T: Real>(amps: &[f64]) -> Vec<Complex<T>> {
    amps.iter()
        .map(|&a| Complex::new(T::lit(a), T::zero()))
        .collect()
}

pub fn singlet<T: Real>() -> DensityMatrix<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DensityMatrix::new_unchecked(ComplexMatrix::outer(&ket(&[0.0, s, -s, 0.0])), vec![2, 2])
}

pub fn ghz<T: Real>() -> DensityMatrix<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = [0.0; 8];
    amps[0] = s;
    amps[7] = s;
    DensityMatrix::new_unchecked(ComplexMatrix::outer(&ket(&amps)), vec![2, 2, 2])
}

pub fn maximally_mixed<T: Real>(dims: &[usize]) -> DensityMatrix<T> {
    let d: usize = dims.iter().product();
    DensityMatrix::new_unchecked(
        ComplexMatrix::identity(d).scale(T::one() / T::lit(d as f64)),
        dims.to_vec(),
    )
}

/// `p |psi-><psi-| + (1 - p) I/4`.
pub fn werner<T: Real>(p: f64) -> Result<DensityMatrix<T>> {
    check_unit_interval("p", p)?;
    let mixed = maximally_mixed::<T>(&[2, 2]);
    let m = &singlet::<T>().matrix.scale(T::lit(p)) + &mixed.matrix.scale(T::lit(1.0 - p));
    Ok(DensityMatrix::new_unchecked(m, vec![2, 2]))
}

/// `q |GHZ><GHZ| + (1 - q) I/8`.
pub fn noisy_ghz<T: Real>(q: f64) -> Result<DensityMatrix<T>> {
    check_unit_interval("q", q)?;
    let mixed = maximally_mixed::<T>(&[2, 2, 2]);
    let m = &ghz::<T>().matrix.scale(T::lit(q)) + &mixed.matrix.scale(T::lit(1.0 - q));
    Ok(DensityMatrix::new_unchecked(m, vec![2, 2, 2]))
}

/// `|Phi+><Phi+|` with `|Phi+> = sum_i |ii> / sqrt(d)`.
pub fn max_entangled<T: Real>(d: usize) -> Result<DensityMatrix<T>> {
    if d < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "d",
            value: d as f64,
            domain: "d >= 2",
        });
    }
    let amp = T::one() / T::lit(d as f64).sqrt();
    let mut v = vec![Complex::new(T::zero(), T::zero()); d * d];
    for i in 0..d {
        v[i * d + i] = Complex::new(amp, T::zero());
    }
    Ok(DensityMatrix::new_unchecked(
        ComplexMatrix::outer(&v),
        vec![d, d],
    ))
}

/// `d^2` density matrices of one dimension whose real span is every
/// Hermitian matrix on that space.
#[derive(Debug, Clone, Serialize)]
pub struct StateBasis<T> {
    states: Vec<DensityMatrix<T>>,
}

impl<T: Real> StateBasis<T> {
    pub fn new(states: Vec<DensityMatrix<T>>) -> Result<Self> {
        let d = states
            .first()
            .map(DensityMatrix::dim)
            .ok_or_else(|| Error::DimensionMismatch("state basis must not be empty".into()))?;
        if states.iter().any(|s| s.dim() != d) || states.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "basis of local dimension {d} needs {} states of equal dimension, got {}",
                d * d,
                states.len()
            )));
        }
        let columns: Vec<_> = states
            .iter()
            .map(|s| hermitian_coordinates(&s.matrix))
            .collect();
        // consistent target, so only the rank test can fail
        solve_real_linear_with(&columns, &columns[0], SolveMethod::PivotedElimination)?;
        Ok(Self { states })
    }

    pub fn states(&self) -> &[DensityMatrix<T>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn local_dim(&self) -> usize {
        self.states[0].dim()
    }
}

/// Tetrahedron Bloch direction `(1, 1, 1)/sqrt(3)`.
pub fn tetrahedral_direction() -> [f64; 3] {
    let n = 1.0 / 3f64.sqrt();
    [n, n, n]
}

/// `tau_r = sigma_r (I + n.sigma)/2 sigma_r` for `r = 0..4`, `sigma_0 = I`.
pub fn tetrahedral_basis<T: Real>() -> StateBasis<T> {
    let n = tetrahedral_direction();
    let mut seed = ComplexMatrix::<T>::identity(2);
    for (k, &nk) in n.iter().enumerate() {
        seed = &seed + &pauli::<T>(k + 1).scale(T::lit(nk));
    }
    let seed = seed.scale(T::lit(0.5));
    let states = (0..4)
        .map(|r| {
            let s = pauli::<T>(r);
            DensityMatrix::new_unchecked(&(&s * &seed) * &s, vec![2])
        })
        .collect();
    StateBasis::new(states).expect("tetrahedral states are complete")
}

/// Haar-random pure state vector.
pub fn haar_ket<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex<T>> {
    let raw: Vec<(f64, f64)> = (0..dim)
        .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = raw.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
    raw.into_iter()
        .map(|(a, b)| Complex::new(T::lit(a / norm), T::lit(b / norm)))
        .collect()
}

/// Convex mixture of `n_terms` Haar-random product states with random
/// weights.
pub fn random_separable<T: Real>(
    dims: &[usize],
    n_terms: usize,
    seed: u64,
) -> Result<DensityMatrix<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_separable_with(dims, n_terms, &mut rng)
}

pub fn random_separable_with<T: Real, R: Rng + ?Sized>(
    dims: &[usize],
    n_terms: usize,
    rng: &mut R,
) -> Result<DensityMatrix<T>> {
    if n_terms == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "n_terms",
            value: 0.0,
            domain: "n_terms >= 1",
        });
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!("invalid dims {dims:?}")));
    }
    let weights: Vec<f64> = (0..n_terms).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let d: usize = dims.iter().product();
    let mut acc = ComplexMatrix::<T>::zeros(d);
    for w in weights {
        let factors: Vec<ComplexMatrix<T>> = dims
            .iter()
            .map(|&dk| ComplexMatrix::outer(&haar_ket::<T, _>(dk, rng)))
            .collect();
        acc = &acc + &kron_all(&factors).scale(T::lit(w / total));
    }
    Ok(DensityMatrix::new_unchecked(acc, dims.to_vec()))
}

/// Random mixed state `G G^dagger / tr(G G^dagger)` from a complex Ginibre
/// matrix; generally entangled.
pub fn random_density<T: Real>(dims: &[usize], seed: u64) -> DensityMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: usize = dims.iter().product();
    let mut g = ComplexMatrix::<T>::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            g[(i, j)] = Complex::new(T::lit(a), T::lit(b));
        }
    }
    let m = &g * &g.dagger();
    let tr = m.trace().re;
    let mut m = m.scale(T::one() / tr);
    // clear rounding asymmetry in the product
    for i in 0..d {
        m[(i, i)] = Complex::new(m[(i, i)].re, T::zero());
        for j in i + 1..d {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    debug_assert!(m.hermiticity_deviation() <= T::tol(HERMITIAN_TOL));
    DensityMatrix::new_unchecked(m, dims.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::partial_trace;
    use crate::linalg::partial_transpose;

    fn pt_min(rho: &DensityMatrix<f64>) -> f64 {
        hermitian_eigen(&partial_transpose(rho.matrix(), rho.dims(), 1).unwrap())
            .unwrap()
            .min()
    }

    #[test]
    fn werner_endpoints() {
        let w0 = werner::<f64>(0.0).unwrap();
        assert!(
            w0.matrix()
                .max_abs_diff(&ComplexMatrix::identity(4).scale(0.25))
                < 1e-15
        );
        let w1 = werner::<f64>(1.0).unwrap();
        assert!(w1.matrix().max_abs_diff(singlet::<f64>().matrix()) < 1e-15);
        assert!(pt_min(&werner(1.0 / 3.0).unwrap()).abs() < 1e-12);
        assert!(werner::<f64>(1.2).is_err());
        assert!(werner::<f64>(-0.1).is_err());
    }

    #[test]
    fn werner_partial_transpose_spectrum_on_grid() {
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let e = hermitian_eigen(
                &partial_transpose(werner::<f64>(p).unwrap().matrix(), &[2, 2], 1).unwrap(),
            )
            .unwrap();
            let v = e.values.as_slice();
            assert!((v[0] - (1.0 - 3.0 * p) / 4.0).abs() < 1e-10, "p={p}");
            for &x in &v[1..] {
                assert!((x - (1.0 + p) / 4.0).abs() < 1e-10, "p={p}");
            }
        }
    }

    #[test]
    fn werner_pt_at_half() {
        // characteristic polynomial of the 4x4 block: (x - 3/8)^3 (x + 1/8)
        let e = hermitian_eigen(
            &partial_transpose(werner::<f64>(0.5).unwrap().matrix(), &[2, 2], 1).unwrap(),
        )
        .unwrap();
        let expected = [-0.125, 0.375, 0.375, 0.375];
        for (a, b) in e.values.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_ghz_endpoints() {
        let g0 = noisy_ghz::<f64>(0.0).unwrap();
        assert!(
            g0.matrix()
                .max_abs_diff(&ComplexMatrix::identity(8).scale(0.125))
                < 1e-15
        );
        let g1 = noisy_ghz::<f64>(1.0).unwrap();
        assert!(g1.matrix().max_abs_diff(ghz::<f64>().matrix()) < 1e-15);
        assert!(noisy_ghz::<f64>(2.0).is_err());
    }

    #[test]
    fn max_entangled_layout() {
        let phi = max_entangled::<f64>(2).unwrap();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((phi.matrix()[(i, j)].re - 0.5).abs() < 1e-15);
        }
        let reduced = partial_trace(phi.matrix(), &[2, 2], &[1]).unwrap();
        assert!(reduced.max_abs_diff(&ComplexMatrix::identity(2).scale(0.5)) < 1e-15);

        let phi3 = max_entangled::<f64>(3).unwrap();
        for i in 0..9 {
            let expected = if [0, 4, 8].contains(&i) {
                1.0 / 3.0
            } else {
                0.0
            };
            assert!((phi3.matrix()[(i, i)].re - expected).abs() < 1e-15);
        }
        assert!(max_entangled::<f64>(1).is_err());
    }

    #[test]
    fn tetrahedral_states() {
        let basis = tetrahedral_basis::<f64>();
        assert_eq!(basis.len(), 4);
        let s = 1.0 / 3f64.sqrt();
        let mut tau0 = ComplexMatrix::identity(2);
        for k in 1..4 {
            tau0 = &tau0 + &pauli(k).scale(s);
        }
        assert!(basis.states()[0].matrix().max_abs_diff(&tau0.scale(0.5)) < 1e-15);

        // Bloch vectors are the tetrahedron vertices; tr(tau_r tau_s) = (1 + a_r.a_s)/2
        let vertices = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        let mut sum = ComplexMatrix::zeros(2);
        for (r, tr) in basis.states().iter().enumerate() {
            assert!((tr.matrix().trace().re - 1.0).abs() < 1e-15);
            sum = &sum + tr.matrix();
            for (s_idx, ts) in basis.states().iter().enumerate() {
                let dot: f64 = (0..3)
                    .map(|k| vertices[r][k] * vertices[s_idx][k])
                    .sum::<f64>()
                    / 3.0;
                let overlap = tr.matrix().trace_product(ts.matrix()).re;
                assert!((overlap - (1.0 + dot) / 2.0).abs() < 1e-12);
                if r != s_idx {
                    assert!((overlap - 1.0 / 3.0).abs() < 1e-12);
                }
            }
        }
        assert!(sum.max_abs_diff(&ComplexMatrix::identity(2).scale(2.0)) < 1e-12);
    }

    #[test]
    fn validate_reports_each_violation() {
        assert!(validate_density(ComplexMatrix::<f64>::identity(4).scale(0.25), &[2, 2]).is_ok());
        assert!(matches!(
            validate_density(pauli::<f64>(3), &[2]),
            Err(Error::TraceViolation { .. })
        ));
        assert!(matches!(
            validate_density(ComplexMatrix::<f64>::from_diag(&[1.5, -0.5]), &[2]),
            Err(Error::PositivityViolation { min_eigenvalue }) if (min_eigenvalue + 0.5).abs() < 1e-12
        ));
        assert!(matches!(
            validate_density(
                ComplexMatrix::<f64>::from_real_rows(&[&[0.5, 1.0], &[0.0, 0.5]]),
                &[2]
            ),
            Err(Error::NotHermitian { .. })
        ));
        assert!(matches!(
            validate_density(ComplexMatrix::<f64>::identity(4).scale(0.25), &[2, 3]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn basis_rejects_incomplete_sets() {
        let zero =
            DensityMatrix::new_unchecked(ComplexMatrix::<f64>::from_diag(&[1.0, 0.0]), vec![2]);
        let dup = vec![zero.clone(), zero.clone(), zero.clone(), zero];
        assert!(matches!(
            StateBasis::new(dup),
            Err(Error::RankDeficient { .. })
        ));
        assert!(StateBasis::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn random_separable_single_term_is_pure_product() {
        let rho = random_separable::<f64>(&[2, 2], 1, 11).unwrap();
        let purity = rho.matrix().trace_product(rho.matrix()).re;
        assert!((purity - 1.0).abs() < 1e-12);
        assert!(pt_min(&rho) >= -1e-9);
        assert!(random_separable::<f64>(&[2, 2], 0, 1).is_err());
    }

    #[test]
    fn random_separable_is_valid_ppt_and_reproducible() {
        for seed in 0..500 {
            let rho = random_separable::<f64>(&[2, 2], 1 + (seed as usize % 4), seed).unwrap();
            let checked = validate_density(rho.matrix().clone(), &[2, 2]).unwrap();
            assert!(pt_min(&checked) >= -1e-9, "seed {seed}");
        }
        let a = random_separable::<f64>(&[2, 2, 2], 3, 99).unwrap();
        let b = random_separable::<f64>(&[2, 2, 2], 3, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_density_is_valid() {
        for seed in 0..20 {
            let rho = random_density::<f64>(&[2, 2, 2], seed);
            validate_density(rho.matrix().clone(), &[2, 2, 2]).unwrap();
        }
    }
}
