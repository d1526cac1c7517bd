//! Closed-form bits per unit energy of the multicasting and beamforming
//! schemes, their gain decompositions, and inverse-rate memory sharing.
//!
//! All rates are per user, in bits per channel use per unit power in the
//! low-SNR limit. The `1/ln 2` factor is kept explicit.

use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::combinatorics::binomial_f64;
use crate::network::{network_load, NetworkError, Scheme};
use crate::system::{NonIntegralCorner, SystemConfig, INTEGRALITY_TOL, MEMORY_TOL};

/// A rate per unit energy; infinite only when receivers cache the whole
/// library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    pub fn from_f64(x: f64) -> Self {
        if x.is_infinite() {
            RateValue::Infinite
        } else {
            RateValue::Finite(x)
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            RateValue::Finite(x) => x,
            RateValue::Infinite => f64::INFINITY,
        }
    }

    /// `1/R`, zero for an infinite rate.
    pub fn inverse(self) -> f64 {
        match self {
            RateValue::Finite(x) => 1.0 / x,
            RateValue::Infinite => 0.0,
        }
    }

    pub fn from_inverse(inv: f64) -> Self {
        if inv <= 0.0 {
            RateValue::Infinite
        } else {
            RateValue::Finite(1.0 / inv)
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RateValue::Infinite)
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for RateValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl fmt::Display for RateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateValue::Finite(x) => write!(f, "{x}"),
            RateValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Finite rates serialise as numbers, the infinite marker as `"inf"`.
impl Serialize for RateValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RateValue::Finite(x) => s.serialize_f64(*x),
            RateValue::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error(transparent)]
    NonIntegralCorner(#[from] NonIntegralCorner),
    #[error("no scheme applicable at this memory point")]
    NoSchemeApplicable,
    #[error("query point (M_r={rx_mem}, M_t={tx_mem}) is outside the hull of the corners")]
    OutsideHull { rx_mem: f64, tx_mem: f64 },
    #[error("message load v_pq must be positive")]
    ZeroLoad,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Multicasting scheme at an integral `(kappa, lambda)` corner:
/// `(kappa + 1)/(K - kappa) * lambda * L / ln 2`.
pub fn rate_mc(cfg: &SystemConfig) -> Result<RateValue, RateError> {
    let c = cfg.corner_params().multicast(cfg)?;
    Ok(mc_corner_rate(cfg.num_rx, cfg.num_tx, c.kappa, c.lambda))
}

fn mc_corner_rate(k: usize, l: usize, kappa: usize, lambda: usize) -> RateValue {
    if kappa >= k {
        return RateValue::Infinite;
    }
    RateValue::Finite((kappa + 1) as f64 / (k - kappa) as f64 * (lambda * l) as f64 / LN_2)
}

/// Beamforming scheme at an integral `lambda_tilde`:
/// `lambda_tilde * L / (min{N, K} (1 - M_r/N) ln 2)`.
pub fn rate_bf(cfg: &SystemConfig) -> Result<RateValue, RateError> {
    let c = cfg.corner_params().beamform(cfg)?;
    Ok(bf_corner_rate(cfg, c.lambda_tilde as f64))
}

fn bf_corner_rate(cfg: &SystemConfig, lambda_tilde: f64) -> RateValue {
    if cfg.rx_holds_library() {
        return RateValue::Infinite;
    }
    let residual = cfg.distinct_demands() as f64 * (1.0 - cfg.rx_fraction());
    RateValue::Finite(lambda_tilde * cfg.num_tx as f64 / (residual * LN_2))
}

/// A memory point with the rate achieved there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryCorner {
    pub rx_mem: f64,
    pub tx_mem: f64,
    pub rate: RateValue,
}

/// Inverse-rate memory sharing: `1/R = sum_i alpha_i / R_i` for the convex
/// weights expressing the query over a corner or a pair of corners. Among all
/// pairs whose segment contains the query, the smallest `1/R` is returned.
pub fn rate_memory_shared(
    rx_mem: f64,
    tx_mem: f64,
    corners: &[MemoryCorner],
) -> Result<RateValue, RateError> {
    let on_point = |c: &MemoryCorner| {
        (c.rx_mem - rx_mem).abs() <= MEMORY_TOL && (c.tx_mem - tx_mem).abs() <= MEMORY_TOL
    };
    let mut best: Option<f64> = None;
    let mut offer = |inv: f64| {
        best = Some(best.map_or(inv, |b: f64| b.min(inv)));
    };
    for c in corners.iter().filter(|c| on_point(c)) {
        offer(c.rate.inverse());
    }
    for (i, a) in corners.iter().enumerate() {
        for b in &corners[i + 1..] {
            let (dr, dt) = (b.rx_mem - a.rx_mem, b.tx_mem - a.tx_mem);
            let w = if dr.abs() >= dt.abs() {
                if dr.abs() <= MEMORY_TOL {
                    continue;
                }
                (rx_mem - a.rx_mem) / dr
            } else {
                (tx_mem - a.tx_mem) / dt
            };
            if !(-MEMORY_TOL..=1.0 + MEMORY_TOL).contains(&w) {
                continue;
            }
            let w = w.clamp(0.0, 1.0);
            let on_segment = (a.rx_mem + w * dr - rx_mem).abs() <= MEMORY_TOL
                && (a.tx_mem + w * dt - tx_mem).abs() <= MEMORY_TOL;
            if on_segment {
                offer((1.0 - w) * a.rate.inverse() + w * b.rate.inverse());
            }
        }
    }
    best.map(RateValue::from_inverse)
        .ok_or(RateError::OutsideHull { rx_mem, tx_mem })
}

/// Multicasting corners along the `kappa` axis at this configuration's `M_t`.
pub fn mc_corners(cfg: &SystemConfig) -> Result<Vec<MemoryCorner>, RateError> {
    let lambda = cfg.corner_params().multicast_lambda(cfg)?;
    let n = cfg.num_files as f64;
    Ok((0..=cfg.num_rx)
        .map(|kappa| MemoryCorner {
            rx_mem: kappa as f64 * n / cfg.num_rx as f64,
            tx_mem: cfg.tx_mem,
            rate: mc_corner_rate(cfg.num_rx, cfg.num_tx, kappa, lambda),
        })
        .collect())
}

/// Beamforming corners along the `lambda_tilde` axis at this configuration's
/// `M_r`.
pub fn bf_corners(cfg: &SystemConfig) -> Vec<MemoryCorner> {
    let n = cfg.num_files as f64;
    let l = cfg.num_tx as f64;
    (1..=cfg.num_tx)
        .map(|j| MemoryCorner {
            rx_mem: cfg.rx_mem,
            tx_mem: j as f64 * (n - cfg.rx_mem) / l,
            rate: bf_corner_rate(cfg, j as f64),
        })
        .collect()
}

/// Linear interpolation of `1/R` between the integer neighbours of `x`.
fn interpolate_inverse(x: f64, rate_at: impl Fn(usize) -> RateValue) -> RateValue {
    let lo = x.floor();
    let frac = x - lo;
    if frac <= INTEGRALITY_TOL {
        return rate_at(lo as usize);
    }
    if 1.0 - frac <= INTEGRALITY_TOL {
        return rate_at(lo as usize + 1);
    }
    let lo = lo as usize;
    RateValue::from_inverse((1.0 - frac) * rate_at(lo).inverse() + frac * rate_at(lo + 1).inverse())
}

/// Multicasting rate at any `M_r`, sharing memory between adjacent `kappa`
/// corners. Requires an integral `lambda`.
pub fn rate_mc_shared(cfg: &SystemConfig) -> Result<RateValue, RateError> {
    let lambda = cfg.corner_params().multicast_lambda(cfg)?;
    let kappa = (cfg.num_rx as f64 * cfg.rx_fraction()).clamp(0.0, cfg.num_rx as f64);
    Ok(interpolate_inverse(kappa, |j| {
        mc_corner_rate(cfg.num_rx, cfg.num_tx, j, lambda)
    }))
}

/// Beamforming rate at any `M_t`, sharing memory between adjacent
/// `lambda_tilde` corners at fixed `M_r`.
pub fn rate_bf_shared(cfg: &SystemConfig) -> Result<RateValue, RateError> {
    if cfg.rx_holds_library() {
        return Ok(RateValue::Infinite);
    }
    let lt = cfg.corner_params().lambda_tilde.value();
    if lt < 1.0 - INTEGRALITY_TOL {
        return Err(RateError::NoSchemeApplicable);
    }
    Ok(interpolate_inverse(lt.max(1.0), |j| bf_corner_rate(cfg, j as f64)))
}

/// Rates of both schemes at a memory point, with memory sharing where needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeRates {
    pub mc: Option<RateValue>,
    pub bf: Option<RateValue>,
    pub combined: RateValue,
    /// Whether the point is off every applicable corner.
    pub interpolated: bool,
}

pub fn scheme_rates(cfg: &SystemConfig) -> Result<SchemeRates, RateError> {
    let cp = cfg.corner_params();
    let mc = rate_mc_shared(cfg).ok();
    let bf = rate_bf_shared(cfg).ok();
    let combined = match (mc, bf) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Err(RateError::NoSchemeApplicable),
    };
    let mc_exact = cp.multicast(cfg).is_ok();
    let bf_exact = cp.beamform(cfg).is_ok();
    let interpolated = (mc.is_some() && !mc_exact) || (bf.is_some() && !bf_exact);
    Ok(SchemeRates {
        mc,
        bf,
        combined,
        interpolated,
    })
}

/// The better of the two schemes at the configuration's memory point.
pub fn rate_combined(cfg: &SystemConfig) -> Result<RateValue, RateError> {
    scheme_rates(cfg).map(|r| r.combined)
}

/// Factorisation of a scheme's sum rate into local caching, multicasting and
/// beamforming gains. `product() * L` equals `K R_MC ln 2` for multicasting
/// and `min{N, K} R_BF ln 2` for beamforming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainDecomposition {
    pub local_caching: f64,
    pub multicasting: f64,
    pub beamforming: f64,
}

impl GainDecomposition {
    pub fn product(&self) -> f64 {
        self.local_caching * self.multicasting * self.beamforming
    }
}

pub fn gain_decomposition(
    cfg: &SystemConfig,
    scheme: Scheme,
) -> Result<GainDecomposition, RateError> {
    let cp = cfg.corner_params();
    let m_r = cfg.rx_fraction();
    let local_caching = 1.0 / (1.0 - m_r);
    let l = cfg.num_tx as f64;
    match scheme {
        Scheme::Multicast => {
            let c = cp.multicast(cfg)?;
            Ok(GainDecomposition {
                local_caching,
                multicasting: c.kappa as f64 + 1.0,
                beamforming: c.lambda as f64,
            })
        }
        Scheme::Beamform => {
            cp.beamform(cfg)?;
            let lambda = l * cfg.tx_mem / cfg.num_files as f64;
            Ok(GainDecomposition {
                local_caching,
                multicasting: 1.0,
                beamforming: (lambda / (1.0 - m_r)).min(l),
            })
        }
    }
}

/// `R = R'_pq / v_pq`.
pub fn rate_from_separation(phy_rate_per_msg: RateValue, v_pq: f64) -> Result<RateValue, RateError> {
    if v_pq.is_nan() || v_pq <= 0.0 {
        return Err(RateError::ZeroLoad);
    }
    Ok(match phy_rate_per_msg {
        RateValue::Finite(r) => RateValue::Finite(r / v_pq),
        RateValue::Infinite => RateValue::Infinite,
    })
}

/// Symmetric per-message share of the physical-layer sum rate,
/// `L q / (ln 2 C(L, q) C(groups, p))`, where `groups` receivers (or receiver
/// groups) are being served.
pub fn per_message_phy_rate(num_tx: usize, rx_groups: usize, p: usize, q: usize) -> RateValue {
    let messages = binomial_f64(num_tx, q) * binomial_f64(rx_groups, p);
    if messages == 0.0 {
        return RateValue::Infinite;
    }
    RateValue::Finite((num_tx * q) as f64 / (LN_2 * messages))
}

/// End-to-end rate through the separation interface: network-layer load
/// combined with the per-message physical-layer rate.
pub fn separation_rate(cfg: &SystemConfig, scheme: Scheme) -> Result<RateValue, RateError> {
    let load = network_load(scheme, cfg, &cfg.corner_params())?;
    if load.v_pq == 0.0 {
        return Ok(RateValue::Infinite);
    }
    let phy = per_message_phy_rate(cfg.num_tx, load.rx_groups, load.p, load.q);
    rate_from_separation(phy, load.v_pq)
}

impl crate::system::CornerParams {
    /// Integral `lambda` in `{1..L}`, ignoring `kappa`.
    pub fn multicast_lambda(&self, cfg: &SystemConfig) -> Result<usize, NonIntegralCorner> {
        self.lambda
            .integral()
            .filter(|&l| (1..=cfg.num_tx).contains(&l))
            .ok_or(NonIntegralCorner { param: "lambda" })
    }
}
