//! Detector inefficiency in the MDI protocol.
//!
//! Every setting of an `n`-party protocol has `B = 2^n` outcome bins. With
//! `N` ideal events per setting, losses remove `N (1 - xi-)/B` and dark counts
//! add `N (1/xi+ - 1)/B` events to each bin. Writing
//! `D = xi- + 1/xi+ - 1`, a true bin probability `p` is measured as
//!
//! ```text
//! p_m = (p - (1 - xi-)/B + (1/xi+ - 1)/B) / D
//! ```
//!
//! and since `sum beta = tr(W)`, the MDI value transforms as
//! `I_m = (I_t + tr(W) (D - 1)/B) / D`. The true value is negative exactly
//! when `I_m < tr(W)/B (1 - 1/D)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdi::{mdi_value, probability_table, ProbabilityTable, WitnessDecomposition};
use crate::scalar::{Field, Real};
use crate::states::DensityMatrix;
use crate::witness::{effective_denominator, CERTIFY_TOL};

/// Lower edge of the default efficiency grid.
pub const DEFAULT_GRID_LOWER: f64 = 0.02;
/// Distance from the zero-bound surface inside which grid rows are flagged
/// as boundary points.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Lost-event (`xi_minus`) and additional-event (`xi_plus`) efficiencies of
/// an `n_parties` protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyParams<T> {
    pub xi_minus: T,
    pub xi_plus: T,
    pub n_parties: usize,
}

impl<T: Field> EfficiencyParams<T> {
    pub fn new(xi_minus: T, xi_plus: T, n_parties: usize) -> Result<Self> {
        for (name, v) in [("xi_minus", &xi_minus), ("xi_plus", &xi_plus)] {
            if !(v > &T::zero() && v <= &T::one()) {
                return Err(Error::ParameterOutOfRange {
                    name,
                    value: v.to_f64_lossy(),
                    domain: "(0, 1]",
                });
            }
        }
        if n_parties < 2 {
            return Err(Error::ParameterOutOfRange {
                name: "n_parties",
                value: n_parties as f64,
                domain: "n >= 2",
            });
        }
        Ok(Self {
            xi_minus,
            xi_plus,
            n_parties,
        })
    }

    pub fn ideal(n_parties: usize) -> Self {
        Self {
            xi_minus: T::one(),
            xi_plus: T::one(),
            n_parties,
        }
    }

    pub fn n_bins(&self) -> usize {
        1 << self.n_parties
    }

    /// `xi- + 1/xi+ - 1`.
    pub fn denominator(&self) -> Result<T> {
        effective_denominator(&self.xi_minus, &self.xi_plus)
    }

    fn bins(&self) -> T {
        T::pow2(self.n_parties)
    }

    /// Fraction of `N` removed per bin.
    pub fn loss_share(&self) -> T {
        (T::one() - self.xi_minus.clone()) / self.bins()
    }

    /// Fraction of `N` added per bin.
    pub fn dark_share(&self) -> T {
        (T::one() / self.xi_plus.clone() - T::one()) / self.bins()
    }
}

/// Measured probability, flagged when the equal-per-bin model drives it
/// outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredProbability<T> {
    pub value: T,
    pub in_range: bool,
}

pub fn measured_prob<T: Field>(
    true_p: T,
    eff: &EfficiencyParams<T>,
) -> Result<MeasuredProbability<T>> {
    if !(true_p >= T::zero() && true_p <= T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "true_p",
            value: true_p.to_f64_lossy(),
            domain: "[0, 1]",
        });
    }
    let d = eff.denominator()?;
    let value = (true_p - eff.loss_share() + eff.dark_share()) / d;
    let in_range = value >= T::zero() && value <= T::one();
    Ok(MeasuredProbability { value, in_range })
}

pub fn measured_mdi_from_true<T: Field>(
    i_true: T,
    trace_w: T,
    eff: &EfficiencyParams<T>,
) -> Result<T> {
    let d = eff.denominator()?;
    let shift = (d.clone() - T::one()) / eff.bins();
    Ok((i_true + trace_w * shift) / d)
}

/// Inverse of [`measured_mdi_from_true`].
pub fn true_mdi_from_measured<T: Field>(
    i_measured: T,
    trace_w: T,
    eff: &EfficiencyParams<T>,
) -> Result<T> {
    let d = eff.denominator()?;
    let shift = (d.clone() - T::one()) / eff.bins();
    Ok(i_measured * d - trace_w * shift)
}

/// `tr(W)/2^n (1 - 1/(xi- + 1/xi+ - 1))`.
pub fn mdi_bound<T: Field>(trace_w: T, eff: &EfficiencyParams<T>) -> Result<T> {
    if trace_w < T::zero() {
        return Err(Error::ParameterOutOfRange {
            name: "trace_w",
            value: trace_w.to_f64_lossy(),
            domain: "tr(W) >= 0",
        });
    }
    let d = eff.denominator()?;
    Ok(trace_w / eff.bins() * (T::one() - T::one() / d))
}

/// Losses only: `tr(W)/2^n (1 - 1/xi-)`.
pub fn mdi_bound_lossy<T: Field>(trace_w: T, xi_minus: T, n_parties: usize) -> Result<T> {
    mdi_bound(
        trace_w,
        &EfficiencyParams::new(xi_minus, T::one(), n_parties)?,
    )
}

/// Dark counts only: `tr(W)/2^n (1 - xi+)`.
pub fn mdi_bound_dark<T: Field>(trace_w: T, xi_plus: T, n_parties: usize) -> Result<T> {
    mdi_bound(
        trace_w,
        &EfficiencyParams::new(T::one(), xi_plus, n_parties)?,
    )
}

/// `xi+` on the zero-bound surface `xi- + 1/xi+ = 2`.
pub fn critical_xi_plus<T: Field>(xi_minus: T) -> Result<T> {
    if !(xi_minus > T::zero() && xi_minus <= T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "xi_minus",
            value: xi_minus.to_f64_lossy(),
            domain: "(0, 1]",
        });
    }
    Ok(T::one() / (T::one() + T::one() - xi_minus))
}

pub fn certifies_mdi<T: Real>(
    i_measured: T,
    trace_w: T,
    eff: &EfficiencyParams<T>,
) -> Result<bool> {
    Ok(i_measured < mdi_bound(trace_w, eff)? - T::lit(CERTIFY_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    /// Expected counts, shifted by exactly the same loss and dark-count
    /// amount in every bin.
    PaperExact,
    /// Multinomial ideal counts, binomial losses and Poisson dark counts,
    /// each matching the paper-exact shift in expectation.
    Stochastic,
}

/// Outcome counts per setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub n_parties: usize,
    pub shape: Vec<usize>,
    /// `counts[setting][bin]`, bins as in [`ProbabilityTable`].
    pub counts: Vec<Vec<u64>>,
    /// Ideal events per setting.
    pub n_per_setting: u64,
    pub params: EfficiencyParams<f64>,
    pub mode: CountMode,
    pub seed: u64,
}

impl CountsRecord {
    pub fn total(&self, setting: usize) -> u64 {
        self.counts[setting].iter().sum()
    }

    pub fn n_bins(&self) -> usize {
        1 << self.n_parties
    }
}

/// Largest-remainder rounding of `n * probs` to integers summing to `n`.
pub fn apportion(probs: &[f64], n: u64) -> Vec<u64> {
    let clipped: Vec<f64> = probs.iter().map(|&p| p.max(0.0)).collect();
    let norm: f64 = clipped.iter().sum();
    let exact: Vec<f64> = clipped.iter().map(|p| p / norm * n as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    // stable: ties go to the lower bin index
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, probs: &[f64], n: u64) -> Vec<u64> {
    let (_, head) = probs.split_last().expect("at least one bin");
    let mut remaining_n = n;
    let mut remaining_p = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in head {
        let p = p.max(0.0);
        let cond = if remaining_p > 0.0 {
            (p / remaining_p).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let k = if remaining_n == 0 {
            0
        } else {
            Binomial::new(remaining_n, cond)
                .expect("valid binomial")
                .sample(rng)
        };
        out.push(k);
        remaining_n -= k;
        remaining_p -= p;
    }
    out.push(remaining_n);
    out
}

/// Turn a probability table into outcome counts under the efficiency model.
pub fn simulate_counts(
    probs: &ProbabilityTable<f64>,
    n_per_setting: u64,
    eff: &EfficiencyParams<f64>,
    mode: CountMode,
    seed: u64,
) -> Result<CountsRecord> {
    if n_per_setting == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "n_per_setting",
            value: 0.0,
            domain: "N >= 1",
        });
    }
    if eff.n_parties != probs.n_parties {
        return Err(Error::DimensionMismatch(format!(
            "efficiency model for {} parties, table for {}",
            eff.n_parties, probs.n_parties
        )));
    }
    eff.denominator()?;
    let n = n_per_setting as f64;
    let loss = n * eff.loss_share();
    let dark = n * eff.dark_share();

    let counts = probs
        .outcomes
        .par_iter()
        .enumerate()
        .map(|(setting, row)| match mode {
            CountMode::PaperExact => {
                let ideal = apportion(row, n_per_setting);
                let (loss, dark) = (loss.round() as u64, dark.round() as u64);
                ideal
                    .iter()
                    .enumerate()
                    .map(|(bin, &c)| {
                        if loss > c {
                            Err(Error::BinUnderflow {
                                setting,
                                bin,
                                ideal: c as f64,
                                loss: loss as f64,
                            })
                        } else {
                            Ok(c - loss + dark)
                        }
                    })
                    .collect::<Result<Vec<u64>>>()
            }
            CountMode::Stochastic => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(setting as u64);
                let ideal = sample_multinomial(&mut rng, row, n_per_setting);
                ideal
                    .iter()
                    .zip(row)
                    .enumerate()
                    .map(|(bin, (&c, &p))| {
                        let expected = n * p.max(0.0);
                        if loss > expected {
                            return Err(Error::BinUnderflow {
                                setting,
                                bin,
                                ideal: expected,
                                loss,
                            });
                        }
                        let q = if loss > 0.0 {
                            (loss / expected).min(1.0)
                        } else {
                            0.0
                        };
                        let lost = Binomial::new(c, q)
                            .expect("valid binomial")
                            .sample(&mut rng);
                        let added = if dark > 0.0 {
                            Poisson::new(dark).expect("positive mean").sample(&mut rng) as u64
                        } else {
                            0
                        };
                        Ok(c - lost + added)
                    })
                    .collect()
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CountsRecord {
        n_parties: probs.n_parties,
        shape: probs.shape.clone(),
        counts,
        n_per_setting,
        params: eff.clone(),
        mode,
        seed,
    })
}

/// Outcome of one simulated or estimated MDI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdiRunResult {
    pub i_measured: f64,
    /// Known only when the tested state is known.
    pub i_true: Option<f64>,
    pub bound: f64,
    pub certified: bool,
    pub params: EfficiencyParams<f64>,
    /// Propagated multinomial standard error (stochastic mode only).
    pub statistical_error: Option<f64>,
}

/// `I_m = sum beta n_{1..1} / N_setting` from recorded counts.
pub fn estimate_mdi(counts: &CountsRecord, d: &WitnessDecomposition<f64>) -> Result<MdiRunResult> {
    if counts.shape != d.shape || counts.counts.len() != d.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "counts shape {:?} vs decomposition shape {:?}",
            counts.shape, d.shape
        )));
    }
    let ones = counts.n_bins() - 1;
    let mut i_measured = 0.0;
    let mut variance = 0.0;
    for (setting, (row, &beta)) in counts.counts.iter().zip(&d.beta).enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::ZeroTotal { setting });
        }
        let p = row[ones] as f64 / total as f64;
        i_measured += beta * p;
        variance += beta * beta * p * (1.0 - p) / total as f64;
    }
    let trace_w = d.beta_sum();
    let bound = mdi_bound(trace_w, &counts.params)?;
    Ok(MdiRunResult {
        i_measured,
        i_true: None,
        bound,
        certified: certifies_mdi(i_measured, trace_w, &counts.params)?,
        params: counts.params.clone(),
        statistical_error: match counts.mode {
            CountMode::Stochastic => Some(variance.sqrt()),
            CountMode::PaperExact => None,
        },
    })
}

/// State → probabilities → counts → estimate, with the true value attached.
pub fn run_mdi(
    rho: &DensityMatrix<f64>,
    d: &WitnessDecomposition<f64>,
    n_per_setting: u64,
    eff: &EfficiencyParams<f64>,
    mode: CountMode,
    seed: u64,
) -> Result<MdiRunResult> {
    let table = probability_table(rho, d)?;
    let counts = simulate_counts(&table, n_per_setting, eff, mode, seed)?;
    let mut result = estimate_mdi(&counts, d)?;
    result.i_true = Some(mdi_value(rho, d)?);
    Ok(result)
}

/// Independent stochastic runs for seeds `base_seed .. base_seed + runs`,
/// returned in seed order.
pub fn run_seeds(
    table: &ProbabilityTable<f64>,
    d: &WitnessDecomposition<f64>,
    n_per_setting: u64,
    eff: &EfficiencyParams<f64>,
    base_seed: u64,
    runs: u64,
) -> Result<Vec<MdiRunResult>> {
    (0..runs)
        .into_par_iter()
        .map(|k| {
            let counts = simulate_counts(
                table,
                n_per_setting,
                eff,
                CountMode::Stochastic,
                base_seed + k,
            )?;
            estimate_mdi(&counts, d)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceFlag {
    /// `xi- + 1/xi+ < 2`: bound below zero.
    Negative,
    /// Within [`BOUNDARY_TOL`] of `xi- + 1/xi+ = 2`.
    Boundary,
    Positive,
    /// Denominator not positive; bound undefined.
    Unphysical,
}

impl SurfaceFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceFlag::Negative => "negative",
            SurfaceFlag::Boundary => "boundary",
            SurfaceFlag::Positive => "positive",
            SurfaceFlag::Unphysical => "unphysical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub xi_minus: f64,
    pub xi_plus: f64,
    /// NaN for unphysical rows.
    pub bound: f64,
    pub flag: SurfaceFlag,
}

/// Bound surface on a `grid_points x grid_points` grid over
/// `[DEFAULT_GRID_LOWER, 1]^2`.
pub fn sweep_surface(
    trace_w: f64,
    n_parties: usize,
    grid_points: usize,
) -> Result<Vec<SurfaceRow>> {
    sweep_surface_from(trace_w, n_parties, grid_points, DEFAULT_GRID_LOWER)
}

/// Uniform grid `lower, .., 1` on both axes; rows ordered by `xi_minus`
/// then `xi_plus`.
pub fn sweep_surface_from(
    trace_w: f64,
    n_parties: usize,
    grid_points: usize,
    lower: f64,
) -> Result<Vec<SurfaceRow>> {
    if grid_points < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "grid_points",
            value: grid_points as f64,
            domain: "grid >= 2",
        });
    }
    if !(lower > 0.0 && lower < 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "lower",
            value: lower,
            domain: "(0, 1)",
        });
    }
    if trace_w < 0.0 || n_parties < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "trace_w",
            value: trace_w,
            domain: "tr(W) >= 0 with n >= 2",
        });
    }
    let axis: Vec<f64> = (0..grid_points)
        .map(|k| lower + (1.0 - lower) * k as f64 / (grid_points - 1) as f64)
        .collect();
    let rows = axis
        .par_iter()
        .flat_map_iter(|&xm| {
            axis.iter().map(move |&xp| {
                let eff = EfficiencyParams {
                    xi_minus: xm,
                    xi_plus: xp,
                    n_parties,
                };
                match mdi_bound(trace_w, &eff) {
                    Ok(bound) => {
                        let s = xm + 1.0 / xp - 2.0;
                        let flag = if s.abs() <= BOUNDARY_TOL {
                            SurfaceFlag::Boundary
                        } else if s < 0.0 {
                            SurfaceFlag::Negative
                        } else {
                            SurfaceFlag::Positive
                        };
                        SurfaceRow {
                            xi_minus: xm,
                            xi_plus: xp,
                            bound,
                            flag,
                        }
                    }
                    Err(_) => SurfaceRow {
                        xi_minus: xm,
                        xi_plus: xp,
                        bound: f64::NAN,
                        flag: SurfaceFlag::Unphysical,
                    },
                }
            })
        })
        .collect();
    Ok(rows)
}
