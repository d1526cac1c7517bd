//! Upper bounds on the bits per unit energy.
//!
//! With a single receiver the cut-set bound separates a transmitter subset
//! from the rest, charging the remaining transmitters' caches to the
//! receiver. Its input-covariance maximisation reduces to the one-parameter
//! symmetric family `Q = P((1 - rho) I + rho 1 1^T)`, for which the optimum
//! has a closed form `Psi(t)`. With a single transmitter holding the library
//! the broadcast bound follows from sequentially decoding `s` receivers.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::subsets;
use crate::rate::RateValue;
use crate::system::{SystemConfig, INTEGRALITY_TOL, MEMORY_TOL};

/// Ridge added to a singular conditioning block.
pub const SCHUR_RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConverseError {
    #[error("conditioning block is singular even after regularisation")]
    SingularBlock,
    #[error("rho is undefined for L = {0}; need L >= 2")]
    DimensionTooSmall(usize),
    #[error("no t in 1..=L satisfies (L - t) M_t + M_r < N")]
    NoAdmissibleT,
    #[error("bound requires {0}")]
    WrongRegime(&'static str),
    #[error("t = {t} is outside 1..={num_tx}")]
    BadCutSize { t: usize, num_tx: usize },
    #[error("index set must be sorted, distinct and below {0}")]
    BadSubset(usize),
    #[error("covariance must be square and symmetric")]
    NotSymmetric,
    #[error("covariance has eigenvalue {0} < -1e-9")]
    NotPsd(f64),
    #[error("diagonal entry {value} exceeds the power {power}")]
    DiagonalExceedsPower { value: f64, power: f64 },
    #[error("kappa must be integral")]
    NonIntegralCorner,
}

/// Real symmetric positive semidefinite input covariance with per-antenna
/// power constraint `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    entries: DMatrix<f64>,
    power: f64,
}

impl CovMatrix {
    pub fn new(entries: DMatrix<f64>, power: f64) -> Result<Self, ConverseError> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(ConverseError::NotSymmetric);
        }
        let scale = entries.amax().max(1.0);
        if (&entries - entries.transpose()).amax() > 1e-12 * scale {
            return Err(ConverseError::NotSymmetric);
        }
        if let Some(&value) = entries.diagonal().iter().find(|&&d| d > power + 1e-12) {
            return Err(ConverseError::DiagonalExceedsPower { value, power });
        }
        let min_eig = entries.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-9 {
            return Err(ConverseError::NotPsd(min_eig));
        }
        Ok(Self { entries, power })
    }

    /// `P ((1 - rho) I + rho 1 1^T)`.
    pub fn symmetric(dim: usize, power: f64, rho: f64) -> Result<Self, ConverseError> {
        let entries = DMatrix::from_fn(dim, dim, |i, j| if i == j { power } else { rho * power });
        Self::new(entries, power)
    }

    /// `A A^T` with i.i.d. standard normal `A`, rescaled to diagonal `P`.
    pub fn random<R: rand::Rng + ?Sized>(dim: usize, power: f64, rng: &mut R) -> Self {
        let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
        let g: DMatrix<f64> = &a * a.transpose();
        let d: Vec<f64> = g.diagonal().iter().map(|x| x.sqrt()).collect();
        let mut entries = DMatrix::from_fn(dim, dim, |i, j| power * g[(i, j)] / (d[i] * d[j]));
        for i in 0..dim {
            entries[(i, i)] = power;
        }
        entries = (&entries + entries.transpose()) * 0.5;
        Self { entries, power }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `Q_{S|S^c} = Q_SS - Q_{S,S^c} Q_{S^c,S^c}^{-1} Q_{S^c,S}`.
pub fn schur_complement(q: &CovMatrix, subset: &[usize]) -> Result<DMatrix<f64>, ConverseError> {
    let dim = q.dim();
    if subset.is_empty() || !crate::combinatorics::is_canonical_subset(subset, dim) {
        return Err(ConverseError::BadSubset(dim));
    }
    let comp: Vec<usize> = (0..dim).filter(|i| !subset.contains(i)).collect();
    let qss = submatrix(&q.entries, subset, subset);
    if comp.is_empty() {
        return Ok(qss);
    }
    let qsc = submatrix(&q.entries, subset, &comp);
    let qcc = submatrix(&q.entries, &comp, &comp);
    let chol = qcc
        .clone()
        .cholesky()
        .or_else(|| (qcc + DMatrix::identity(comp.len(), comp.len()) * SCHUR_RIDGE).cholesky())
        .ok_or(ConverseError::SingularBlock)?;
    let x = chol.solve(&qsc.transpose());
    let s = qss - qsc * x;
    Ok((&s + s.transpose()) * 0.5)
}

/// `1^T Q_{S|S^c} 1`.
fn conditional_sum(q: &CovMatrix, subset: &[usize]) -> Result<f64, ConverseError> {
    Ok(schur_complement(q, subset)?.sum())
}

/// `min_{|S| = t} log2(1 + 1^T Q_{S|S^c} 1)`.
pub fn phi_t(q: &CovMatrix, t: usize) -> Result<f64, ConverseError> {
    Ok((1.0 + min_conditional_sum(q, t)?).log2())
}

fn min_conditional_sum(q: &CovMatrix, t: usize) -> Result<f64, ConverseError> {
    if t == 0 || t > q.dim() {
        return Err(ConverseError::BadCutSize { t, num_tx: q.dim() });
    }
    let mut best = f64::INFINITY;
    for s in subsets(q.dim(), t) {
        best = best.min(conditional_sum(q, &s)?);
    }
    Ok(best)
}

/// `1^T Q_{S|S^c} 1 / P` for the symmetric family with `|S| = t`:
/// `t (1 + (t - 1) rho - t (L - t) rho^2 / (1 + (L - t - 1) rho))`.
pub fn symmetric_objective(t: usize, num_tx: usize, rho: f64) -> f64 {
    let (t_f, l_f) = (t as f64, num_tx as f64);
    let coupling = if t == num_tx {
        0.0
    } else {
        t_f * (l_f - t_f) * rho * rho / (1.0 + (l_f - t_f - 1.0) * rho)
    };
    t_f * (1.0 + (t_f - 1.0) * rho - coupling)
}

/// Maximiser of [`symmetric_objective`] over `rho in [-1/(L-1), 1]`.
pub fn rho_star(t: usize, num_tx: usize) -> Result<f64, ConverseError> {
    if num_tx < 2 {
        return Err(ConverseError::DimensionTooSmall(num_tx));
    }
    if t == 0 || t > num_tx {
        return Err(ConverseError::BadCutSize { t, num_tx });
    }
    let (t_f, l_f) = (t as f64, num_tx as f64);
    Ok(if t == num_tx {
        1.0
    } else if t + 1 == num_tx {
        (l_f - 2.0) / (2.0 * (l_f - 1.0))
    } else {
        (-1.0 + (t_f * (l_f - t_f) / (l_f - 1.0)).sqrt()) / (l_f - t_f - 1.0)
    })
}

/// `Psi(t) = max_rho` of the symmetric objective.
pub fn psi_closed_form(t: usize, num_tx: usize) -> f64 {
    let (t_f, l_f) = (t as f64, num_tx as f64);
    if num_tx == 1 {
        1.0
    } else if t == num_tx {
        l_f * l_f
    } else if t + 1 == num_tx {
        l_f * l_f / 4.0
    } else {
        let r = ((t_f * (l_f - t_f)).sqrt() - (l_f - 1.0).sqrt()) / (l_f - t_f - 1.0);
        t_f * (1.0 + r * r)
    }
}

/// Grid search of the symmetric objective over `[-1/(L-1), 1]`; returns the
/// maximum and its argmax.
pub fn psi_grid(t: usize, num_tx: usize, step: f64) -> (f64, f64) {
    if num_tx == 1 {
        return (1.0, 0.0);
    }
    let lo = -1.0 / (num_tx as f64 - 1.0);
    let n = ((1.0 - lo) / step).ceil() as usize;
    (0..=n)
        .map(|i| {
            let rho = (lo + i as f64 * step).min(1.0);
            (symmetric_objective(t, num_tx, rho), rho)
        })
        .fold((f64::NEG_INFINITY, lo), |a, b| if b.0 > a.0 { b } else { a })
}

/// Single-receiver cut-set bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacBound {
    pub value_per_unit_energy: f64,
    pub minimizing_t: usize,
    /// Optimal correlation for the minimising cut; absent when `L = 1`.
    pub maximizing_rho: Option<f64>,
}

/// `1 - (M_r + (L - t) M_t)/N`, the fraction of the demanded file the
/// receiver still misses after a cut of size `t`; `None` if not positive.
fn residual_fraction(cfg: &SystemConfig, t: usize) -> Option<f64> {
    let n = cfg.num_files as f64;
    let known = cfg.rx_mem + (cfg.num_tx - t) as f64 * cfg.tx_mem;
    let r = 1.0 - known / n;
    (r > MEMORY_TOL).then_some(r)
}

/// Cut sizes with `(L - t) M_t + M_r < N`.
pub fn admissible_cuts(cfg: &SystemConfig) -> Vec<(usize, f64)> {
    (1..=cfg.num_tx)
        .filter_map(|t| residual_fraction(cfg, t).map(|r| (t, r)))
        .collect()
}

fn require_single_receiver(cfg: &SystemConfig) -> Result<(), ConverseError> {
    if cfg.num_rx != 1 {
        return Err(ConverseError::WrongRegime("K = 1"));
    }
    Ok(())
}

/// `min_t Psi(t) / ((1 - (M_r + (L - t) M_t)/N) ln 2)` over admissible `t`.
pub fn mac_upper_bound(cfg: &SystemConfig) -> Result<MacBound, ConverseError> {
    require_single_receiver(cfg)?;
    let l = cfg.num_tx;
    admissible_cuts(cfg)
        .into_iter()
        .map(|(t, r)| (psi_closed_form(t, l) / (r * LN_2), t))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(value, t)| MacBound {
            value_per_unit_energy: value,
            minimizing_t: t,
            maximizing_rho: rho_star(t, l).ok(),
        })
        .ok_or(ConverseError::NoAdmissibleT)
}

/// The same bound at finite power `P`: `min_t log2(1 + P Psi(t)) / (P r_t)`.
pub fn mac_upper_bound_finite_power(cfg: &SystemConfig) -> Result<f64, ConverseError> {
    require_single_receiver(cfg)?;
    let p = cfg.power;
    admissible_cuts(cfg)
        .into_iter()
        .map(|(t, r)| (1.0 + p * psi_closed_form(t, cfg.num_tx)).log2() / (p * r))
        .min_by(f64::total_cmp)
        .ok_or(ConverseError::NoAdmissibleT)
}

/// Independent evaluation of the cut-set bound by direct search over
/// covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacOracle {
    /// Best value over the symmetric `rho` grid.
    pub symmetric: f64,
    pub symmetric_rho: f64,
    /// Best value over random covariances; `None` when not sampled.
    pub random: Option<f64>,
    pub value: f64,
}

/// `max_Q min_t min_{|S|=t} 1^T Q_{S|S^c} 1 / (P r_t ln 2)`, searched over
/// the symmetric `rho` grid and, for `L <= 4`, over `psd_samples` random
/// covariances.
pub fn mac_upper_bound_oracle(
    cfg: &SystemConfig,
    rho_step: f64,
    psd_samples: u64,
    seed: u64,
) -> Result<MacOracle, ConverseError> {
    require_single_receiver(cfg)?;
    let cuts = admissible_cuts(cfg);
    if cuts.is_empty() {
        return Err(ConverseError::NoAdmissibleT);
    }
    let l = cfg.num_tx;
    let (symmetric, symmetric_rho) = if l == 1 {
        (1.0 / (cuts[0].1 * LN_2), 0.0)
    } else {
        let lo = -1.0 / (l as f64 - 1.0);
        let n = ((1.0 - lo) / rho_step).ceil() as usize;
        (0..=n)
            .into_par_iter()
            .map(|i| {
                let rho = (lo + i as f64 * rho_step).min(1.0);
                let v = cuts
                    .iter()
                    .map(|&(t, r)| symmetric_objective(t, l, rho) / (r * LN_2))
                    .fold(f64::INFINITY, f64::min);
                (v, rho)
            })
            .reduce(|| (f64::NEG_INFINITY, lo), |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            })
    };
    let random = (l <= 4 && psd_samples > 0).then(|| {
        (0..psd_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                let q = CovMatrix::random(l, 1.0, &mut rng);
                cuts.iter()
                    .map(|&(t, r)| {
                        min_conditional_sum(&q, t).map_or(f64::INFINITY, |s| s / (r * LN_2))
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    });
    Ok(MacOracle {
        symmetric,
        symmetric_rho,
        random,
        value: random.map_or(symmetric, |r| r.max(symmetric)),
    })
}

/// Largest `phi_t` over random covariances with diagonal `P`, compared
/// against the symmetric optimum `log2(1 + P Psi(t))`. Returns
/// `(random_max, symmetric_max)`.
pub fn random_phi_search(num_tx: usize, t: usize, power: f64, samples: u64, seed: u64) -> (f64, f64) {
    let random = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let q = CovMatrix::random(num_tx, power, &mut rng);
            phi_t(&q, t).unwrap_or(f64::NEG_INFINITY)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    (random, (1.0 + power * psi_closed_form(t, num_tx)).log2())
}

/// Broadcast bound from one full-library transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BcBound {
    pub value: RateValue,
    /// Minimising number of receivers; absent when no `s` binds.
    pub minimizing_s: Option<usize>,
}

fn require_broadcast(cfg: &SystemConfig) -> Result<(), ConverseError> {
    if cfg.num_tx != 1 || (cfg.tx_mem - cfg.num_files as f64).abs() > MEMORY_TOL {
        return Err(ConverseError::WrongRegime("L = 1 and M_t = N"));
    }
    Ok(())
}

/// `min_s 1/(s (1 - M_r / floor(N/s)) ln 2)` over `s in 1..=K` with
/// `M_r < floor(N/s)`; infinite when no `s` qualifies.
pub fn bc_upper_bound(cfg: &SystemConfig) -> Result<BcBound, ConverseError> {
    require_broadcast(cfg)?;
    let best = (1..=cfg.num_rx)
        .filter_map(|s| {
            let files = (cfg.num_files / s) as f64;
            (cfg.rx_mem < files - MEMORY_TOL)
                .then(|| (1.0 / (s as f64 * (1.0 - cfg.rx_mem / files) * LN_2), s))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0));
    Ok(match best {
        Some((v, s)) => BcBound {
            value: RateValue::Finite(v),
            minimizing_s: Some(s),
        },
        None => BcBound {
            value: RateValue::Infinite,
            minimizing_s: None,
        },
    })
}

/// `max{kappa + 1, K/N} / ((K - kappa) ln 2)`, the better of the two schemes
/// at an integral `kappa` with one full-library transmitter.
pub fn bc_achievable_bound(cfg: &SystemConfig) -> Result<RateValue, ConverseError> {
    require_broadcast(cfg)?;
    let kappa = cfg.num_rx as f64 * cfg.rx_fraction();
    let rounded = kappa.round();
    if (kappa - rounded).abs() > INTEGRALITY_TOL {
        return Err(ConverseError::NonIntegralCorner);
    }
    let k = cfg.num_rx as f64;
    if rounded >= k {
        return Ok(RateValue::Infinite);
    }
    let gain = (rounded + 1.0).max(k / cfg.num_files as f64);
    Ok(RateValue::Finite(gain / ((k - rounded) * LN_2)))
}
