//! Dense complex linear algebra for small operators (dimension <= 64).
//!
//! Multi-index convention: for subsystem dimensions `[d_0, .., d_{n-1}]`, the
//! flat index of `(i_0, .., i_{n-1})` is row-major with `i_0` most significant,
//! matching the factor order of [`kron`].

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Max-entry deviation from Hermiticity accepted anywhere in the crate.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative pivot below which a column set is treated as rank deficient.
pub const PIVOT_TOL: f64 = 1e-12;
/// Residual norm above which a linear solve is reported inconsistent.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Square dense complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Panics if `rows` is not square.
    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Self {
        let dim = rows.len();
        assert!(
            dim >= 1 && rows.iter().all(|r| r.len() == dim),
            "rows must form a square matrix"
        );
        Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|&x| Complex::new(T::lit(x), T::zero()))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    /// `|v><v|`.
    pub fn outer(v: &[Complex<T>]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn dagger(&self) -> Self {
        dagger(self)
    }

    pub fn trace(&self) -> Complex<T> {
        trace(self)
    }

    pub fn kron(&self, other: &Self) -> Self {
        kron(self, other)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Max-entry deviation `|a - a^dagger|`.
    pub fn hermiticity_deviation(&self) -> T {
        let n = self.dim;
        let mut dev = T::zero();
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let dev = self.hermiticity_deviation();
        if dev > T::tol(HERMITIAN_TOL) {
            Err(Error::NotHermitian {
                deviation: dev.to_f64_lossy(),
            })
        } else {
            Ok(())
        }
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..n {
            for k in 0..n {
                acc = acc + self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        assert!(
            i < self.dim && j < self.dim,
            "index ({i}, {j}) out of bounds"
        );
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        assert!(
            i < self.dim && j < self.dim,
            "index ({i}, {j}) out of bounds"
        );
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Real> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = &self.data[i * self.dim + j];
                    format!("{:?}{:+?}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Real vector with at least one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealVector<T>(Vec<T>);

impl<T: Real> RealVector<T> {
    pub fn new(entries: Vec<T>) -> Self {
        assert!(!entries.is_empty(), "RealVector must have length >= 1");
        Self(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn norm(&self) -> T {
        self.0.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

impl<T> Index<usize> for RealVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// The identity and the three Pauli matrices, indexed 0..=3.
pub fn pauli<T: Real>(k: usize) -> ComplexMatrix<T> {
    let z = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    match k {
        0 => ComplexMatrix::identity(2),
        1 => ComplexMatrix::from_rows(vec![vec![z, one], vec![one, z]]),
        2 => ComplexMatrix::from_rows(vec![vec![z, -i], vec![i, z]]),
        3 => ComplexMatrix::from_rows(vec![vec![one, z], vec![z, -one]]),
        _ => panic!("Pauli index {k} out of range 0..=3"),
    }
}

/// Kronecker product, `a` as the most significant factor.
pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let (da, db) = (a.dim, b.dim);
    let n = da * db;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            for k in 0..db {
                for l in 0..db {
                    out.data[(i * db + k) * n + (j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a non-empty sequence of factors.
pub fn kron_all<'a, T: Real>(
    factors: impl IntoIterator<Item = &'a ComplexMatrix<T>>,
) -> ComplexMatrix<T> {
    let mut it = factors.into_iter();
    let first = it
        .next()
        .expect("kron_all needs at least one factor")
        .clone();
    it.fold(first, |acc, f| kron(&acc, f))
}

pub fn dagger<T: Real>(a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let n = a.dim;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

pub fn trace<T: Real>(a: &ComplexMatrix<T>) -> Complex<T> {
    (0..a.dim).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + a[(i, i)])
}

fn check_dims<T: Real>(m: &ComplexMatrix<T>, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!(
            "subsystem dimensions {dims:?} must be non-empty and positive"
        )));
    }
    let total: usize = dims.iter().product();
    if total != m.dim {
        return Err(Error::DimensionMismatch(format!(
            "product of dims {dims:?} is {total}, matrix dimension is {}",
            m.dim
        )));
    }
    Ok(())
}

fn split_index(mut idx: usize, dims: &[usize], digits: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        digits[k] = idx % dims[k];
        idx /= dims[k];
    }
}

fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Transpose the indices of one subsystem, leaving the others untouched.
pub fn partial_transpose<T: Real>(
    rho: &ComplexMatrix<T>,
    dims: &[usize],
    subsystem: usize,
) -> Result<ComplexMatrix<T>> {
    check_dims(rho, dims)?;
    if subsystem >= dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem {subsystem} out of range for {} subsystems",
            dims.len()
        )));
    }
    let n = rho.dim;
    let mut out = ComplexMatrix::zeros(n);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    for i in 0..n {
        split_index(i, dims, &mut ri);
        for j in 0..n {
            split_index(j, dims, &mut ci);
            std::mem::swap(&mut ri[subsystem], &mut ci[subsystem]);
            out[(join_index(&ri, dims), join_index(&ci, dims))] = rho[(i, j)];
            std::mem::swap(&mut ri[subsystem], &mut ci[subsystem]);
        }
    }
    Ok(out)
}

/// Trace out every subsystem not listed in `keep`. Kept subsystems retain
/// their original relative order.
pub fn partial_trace<T: Real>(
    rho: &ComplexMatrix<T>,
    dims: &[usize],
    keep: &[usize],
) -> Result<ComplexMatrix<T>> {
    check_dims(rho, dims)?;
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!(
            "keep index {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let out_dim: usize = kept_dims.iter().product();

    let n = rho.dim;
    let mut out = ComplexMatrix::zeros(out_dim);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    let mut rk = vec![0; kept.len()];
    let mut ck = vec![0; kept.len()];
    for i in 0..n {
        split_index(i, dims, &mut ri);
        for j in 0..n {
            split_index(j, dims, &mut ci);
            if traced.iter().any(|&t| ri[t] != ci[t]) {
                continue;
            }
            for (slot, &k) in kept.iter().enumerate() {
                rk[slot] = ri[k];
                ck[slot] = ci[k];
            }
            let (oi, oj) = (join_index(&rk, &kept_dims), join_index(&ck, &kept_dims));
            out[(oi, oj)] = out[(oi, oj)] + rho[(i, j)];
        }
    }
    Ok(out)
}

/// Reorder tensor factors: subsystem `k` of the result is subsystem
/// `order[k]` of the input.
pub fn permute_subsystems<T: Real>(
    m: &ComplexMatrix<T>,
    dims: &[usize],
    order: &[usize],
) -> Result<ComplexMatrix<T>> {
    check_dims(m, dims)?;
    let mut seen = vec![false; dims.len()];
    if order.len() != dims.len()
        || order
            .iter()
            .any(|&k| k >= dims.len() || std::mem::replace(&mut seen[k], true))
    {
        return Err(Error::DimensionMismatch(format!(
            "{order:?} is not a permutation of {} subsystems",
            dims.len()
        )));
    }
    let new_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let n = m.dim;
    let mut out = ComplexMatrix::zeros(n);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    let mut rn = vec![0; dims.len()];
    let mut cn = vec![0; dims.len()];
    for i in 0..n {
        split_index(i, dims, &mut ri);
        for (slot, &k) in order.iter().enumerate() {
            rn[slot] = ri[k];
        }
        let oi = join_index(&rn, &new_dims);
        for j in 0..n {
            split_index(j, dims, &mut ci);
            for (slot, &k) in order.iter().enumerate() {
                cn[slot] = ci[k];
            }
            out[(oi, join_index(&cn, &new_dims))] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigen<T> {
    /// Ascending.
    pub values: RealVector<T>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix<T>,
}

impl<T: Real> Eigen<T> {
    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.values.len() - 1]
    }

    pub fn vector(&self, k: usize) -> Vec<Complex<T>> {
        (0..self.vectors.dim)
            .map(|i| self.vectors[(i, k)])
            .collect()
    }
}

/// Cyclic complex Jacobi eigensolver.
pub fn hermitian_eigen<T: Real>(a: &ComplexMatrix<T>) -> Result<Eigen<T>> {
    a.ensure_hermitian()?;
    let n = a.dim;
    let mut m = a.clone();
    // symmetrise so rounding in the input does not bias the rotations
    for i in 0..n {
        m[(i, i)] = Complex::new(m[(i, i)].re, T::zero());
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()).scale(T::lit(0.5));
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);
    let threshold = T::tol(JACOBI_TOL) * T::one().max(m.frobenius_norm());

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off < threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        m[(x, x)]
            .re
            .partial_cmp(&m[(y, y)].re)
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&k| m[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, col)] = v[(i, k)];
        }
    }
    Ok(Eigen {
        values: RealVector::new(values),
        vectors,
    })
}

// Annihilate m[p][q] with J = diag(1, e^{-i phi}) * R(theta) on the (p, q) plane.
fn jacobi_rotate<T: Real>(m: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = m[(p, q)];
    let mag = apq.norm();
    if mag <= T::min_positive_value() {
        return;
    }
    let n = m.dim;
    let phase = apq / mag; // e^{i phi}
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (mag + mag);
    let t = {
        let t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
        if theta < T::zero() {
            -t
        } else {
            t
        }
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;
    let pc = phase.conj();

    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp.scale(c) - akq * pc.scale(s);
        m[(k, q)] = akp.scale(s) + akq * pc.scale(c);
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk.scale(c) - aqk * phase.scale(s);
        m[(q, k)] = apk.scale(s) + aqk * phase.scale(c);
    }
    m[(p, q)] = Complex::new(T::zero(), T::zero());
    m[(q, p)] = Complex::new(T::zero(), T::zero());
    m[(p, p)] = Complex::new(m[(p, p)].re, T::zero());
    m[(q, q)] = Complex::new(m[(q, q)].re, T::zero());

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp.scale(c) - vkq * pc.scale(s);
        v[(k, q)] = vkp.scale(s) + vkq * pc.scale(c);
    }
}

/// Real coordinates of a Hermitian matrix: the diagonal, then `Re a[i][j]`
/// for `i < j` in row-major order, then `Im a[j][i]` for `i < j` in the same
/// order (so `sigma_y` maps to `+1`).
pub fn hermitian_to_real_vector<T: Real>(a: &ComplexMatrix<T>) -> Result<RealVector<T>> {
    a.ensure_hermitian()?;
    Ok(hermitian_coordinates(a))
}

// Unchecked variant; callers guarantee Hermiticity.
pub(crate) fn hermitian_coordinates<T: Real>(a: &ComplexMatrix<T>) -> RealVector<T> {
    let n = a.dim;
    let mut out = Vec::with_capacity(n * n);
    out.extend((0..n).map(|i| a[(i, i)].re));
    for i in 0..n {
        for j in i + 1..n {
            out.push(a[(i, j)].re);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(a[(j, i)].im);
        }
    }
    RealVector::new(out)
}

/// Inverse of [`hermitian_to_real_vector`].
pub fn real_vector_to_hermitian<T: Real>(v: &RealVector<T>) -> Result<ComplexMatrix<T>> {
    let len = v.len();
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::DimensionMismatch(format!(
            "vector length {len} is not a perfect square"
        )));
    }
    let mut m = ComplexMatrix::zeros(n);
    for i in 0..n {
        m[(i, i)] = Complex::new(v[i], T::zero());
    }
    let upper = n * (n - 1) / 2;
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex::new(v[n + k], -v[n + upper + k]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 1;
        }
    }
    Ok(m)
}

/// Which factorisation [`solve_real_linear_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Normal equations, falling back to pivoted elimination when a
    /// Cholesky pivot is tiny.
    Auto,
    NormalEquations,
    PivotedElimination,
}

#[derive(Debug, Clone)]
pub struct LinearSolution<T> {
    pub coefficients: RealVector<T>,
    /// Euclidean norm of `A x - b`.
    pub residual: T,
}

/// Least-squares coefficients expressing `target` in the span of `columns`.
pub fn solve_real_linear<T: Real>(
    columns: &[RealVector<T>],
    target: &RealVector<T>,
) -> Result<RealVector<T>> {
    solve_real_linear_with(columns, target, SolveMethod::Auto).map(|s| s.coefficients)
}

pub fn solve_real_linear_with<T: Real>(
    columns: &[RealVector<T>],
    target: &RealVector<T>,
    method: SolveMethod,
) -> Result<LinearSolution<T>> {
    let m = target.len();
    let k = columns.len();
    if k == 0 || k > m || columns.iter().any(|c| c.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "{k} columns of lengths {:?} against target of length {m}",
            columns.iter().map(RealVector::len).collect::<Vec<_>>()
        )));
    }
    let x = match method {
        SolveMethod::NormalEquations => normal_equations(columns, target)?,
        SolveMethod::PivotedElimination => pivoted_elimination(columns, target)?,
        SolveMethod::Auto => match normal_equations(columns, target) {
            Ok(x) => x,
            Err(Error::RankDeficient { .. }) => pivoted_elimination(columns, target)?,
            Err(e) => return Err(e),
        },
    };
    let residual = (0..m)
        .map(|i| {
            let r = columns.iter().zip(&x).map(|(c, &xj)| c[i] * xj).sum::<T>() - target[i];
            r * r
        })
        .sum::<T>()
        .sqrt();
    if residual > T::tol(RESIDUAL_TOL) {
        return Err(Error::InconsistentSystem {
            residual: residual.to_f64_lossy(),
        });
    }
    Ok(LinearSolution {
        coefficients: RealVector::new(x),
        residual,
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

// Cholesky of the Gram matrix; a pivot below PIVOT_TOL * max diag counts as
// rank deficiency.
fn normal_equations<T: Real>(columns: &[RealVector<T>], target: &RealVector<T>) -> Result<Vec<T>> {
    let k = columns.len();
    let mut gram = vec![vec![T::zero(); k]; k];
    for i in 0..k {
        for j in 0..=i {
            let g = dot(columns[i].as_slice(), columns[j].as_slice());
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    let rhs: Vec<T> = columns
        .iter()
        .map(|c| dot(c.as_slice(), target.as_slice()))
        .collect();
    let scale = (0..k).map(|i| gram[i][i]).fold(T::zero(), T::max);
    let floor = T::tol(PIVOT_TOL) * scale.max(T::min_positive_value());

    let mut l = vec![vec![T::zero(); k]; k];
    for j in 0..k {
        let d = gram[j][j] - (0..j).map(|p| l[j][p] * l[j][p]).sum::<T>();
        if d <= floor {
            return Err(Error::RankDeficient {
                rank: j,
                columns: k,
            });
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..k {
            l[i][j] = (gram[i][j] - (0..j).map(|p| l[i][p] * l[j][p]).sum::<T>()) / d;
        }
    }
    let mut y = vec![T::zero(); k];
    for i in 0..k {
        y[i] = (rhs[i] - (0..i).map(|p| l[i][p] * y[p]).sum::<T>()) / l[i][i];
    }
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        x[i] = (y[i] - (i + 1..k).map(|p| l[p][i] * x[p]).sum::<T>()) / l[i][i];
    }
    Ok(x)
}

// Gaussian elimination with complete pivoting on the m x k system. Exact for
// consistent systems; inconsistency shows up in the residual check.
fn pivoted_elimination<T: Real>(
    columns: &[RealVector<T>],
    target: &RealVector<T>,
) -> Result<Vec<T>> {
    let m = target.len();
    let k = columns.len();
    let mut a: Vec<Vec<T>> = (0..m)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let mut b: Vec<T> = target.as_slice().to_vec();
    let mut col_perm: Vec<usize> = (0..k).collect();
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |acc, x| acc.max(x.abs()));
    let floor = T::tol(PIVOT_TOL) * scale.max(T::min_positive_value());

    for s in 0..k {
        let (mut pr, mut pc, mut best) = (s, s, T::zero());
        for (r, row) in a.iter().enumerate().skip(s) {
            for (c, x) in row.iter().enumerate().skip(s) {
                if x.abs() > best {
                    (pr, pc, best) = (r, c, x.abs());
                }
            }
        }
        if best <= floor {
            return Err(Error::RankDeficient {
                rank: s,
                columns: k,
            });
        }
        a.swap(s, pr);
        b.swap(s, pr);
        if pc != s {
            for row in a.iter_mut() {
                row.swap(s, pc);
            }
            col_perm.swap(s, pc);
        }
        let (done, rest) = a.split_at_mut(s + 1);
        let pivot_row = &done[s];
        for (r, row) in rest.iter_mut().enumerate() {
            let f = row[s] / pivot_row[s];
            if f == T::zero() {
                continue;
            }
            for (x, &p) in row[s..k].iter_mut().zip(&pivot_row[s..k]) {
                *x = *x - f * p;
            }
            b[s + 1 + r] = b[s + 1 + r] - f * b[s];
        }
    }
    let mut z = vec![T::zero(); k];
    for i in (0..k).rev() {
        z[i] = (b[i] - (i + 1..k).map(|c| a[i][c] * z[c]).sum::<T>()) / a[i][i];
    }
    let mut x = vec![T::zero(); k];
    for (slot, &orig) in col_perm.iter().enumerate() {
        x[orig] = z[slot];
    }
    Ok(x)
}
