//! Problem instance: library and cache sizes, corner points, demands and the
//! phase-only fading channel.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::is_canonical_subset;

/// Absolute tolerance used to decide whether a corner parameter is integral.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// Slack allowed on memory constraints.
pub const MEMORY_TOL: f64 = 1e-9;

/// One instance `(N, K, L, M_r, M_t, P)` of the cache-aided interference network.
///
/// Serialised with the single-letter keys `N, K, L, M_r, M_t, P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "N")]
    pub num_files: usize,
    #[serde(rename = "K")]
    pub num_rx: usize,
    #[serde(rename = "L")]
    pub num_tx: usize,
    /// Receiver cache size, in files.
    #[serde(rename = "M_r")]
    pub rx_mem: f64,
    /// Transmitter cache size, in files.
    #[serde(rename = "M_t")]
    pub tx_mem: f64,
    /// Per-transmitter power constraint (noise normalised); defaults to 1
    /// when absent, since the low-SNR quantities do not depend on it.
    #[serde(rename = "P", default = "unit_power")]
    pub power: f64,
}

fn unit_power() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigViolation {
    #[error("{field} must be a positive integer")]
    NonPositiveDimension { field: &'static str },
    #[error("{field} = {value} is outside [0, N = {num_files}]")]
    MemOutOfRange {
        field: &'static str,
        value: f64,
        num_files: usize,
    },
    #[error("library not storable: L*M_t + M_r = {stored} < N = {num_files}")]
    LibraryNotStorable { stored: f64, num_files: usize },
    #[error("power P = {0} must be positive and finite")]
    NonPositivePower(f64),
}

impl SystemConfig {
    pub fn new(
        num_files: usize,
        num_rx: usize,
        num_tx: usize,
        rx_mem: f64,
        tx_mem: f64,
        power: f64,
    ) -> Self {
        Self {
            num_files,
            num_rx,
            num_tx,
            rx_mem,
            tx_mem,
            power,
        }
    }

    /// Every violated constraint, empty when the instance is valid.
    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        for (field, v) in [
            ("N", self.num_files),
            ("K", self.num_rx),
            ("L", self.num_tx),
        ] {
            if v == 0 {
                out.push(ConfigViolation::NonPositiveDimension { field });
            }
        }
        let n = self.num_files as f64;
        let mut mem_ok = true;
        for (field, value) in [("M_r", self.rx_mem), ("M_t", self.tx_mem)] {
            if !(value.is_finite() && value >= 0.0 && value <= n) {
                mem_ok = false;
                out.push(ConfigViolation::MemOutOfRange {
                    field,
                    value,
                    num_files: self.num_files,
                });
            }
        }
        if mem_ok && self.num_files > 0 {
            let stored = self.num_tx as f64 * self.tx_mem + self.rx_mem;
            if stored < n - MEMORY_TOL {
                out.push(ConfigViolation::LibraryNotStorable {
                    stored,
                    num_files: self.num_files,
                });
            }
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            out.push(ConfigViolation::NonPositivePower(self.power));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    /// `M_r / N`, the fraction of every file available locally.
    pub fn rx_fraction(&self) -> f64 {
        self.rx_mem / self.num_files as f64
    }

    /// Receivers can store the whole library (`M_r = N`).
    pub fn rx_holds_library(&self) -> bool {
        (self.rx_mem - self.num_files as f64).abs() <= INTEGRALITY_TOL
    }

    /// `min{N, K}`: the worst-case number of distinct requests.
    pub fn distinct_demands(&self) -> usize {
        self.num_files.min(self.num_rx)
    }

    pub fn corner_params(&self) -> CornerParams {
        corner_params(self)
    }
}

/// Returns the configuration if it satisfies every invariant, or the list of
/// violated constraints otherwise.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig, Vec<ConfigViolation>> {
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(v)
    }
}

/// A corner parameter, flagged integral or not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CornerValue {
    Integral(usize),
    Fractional(f64),
    /// `L*M_t/(N - M_r)` with `M_r = N`.
    Infinite,
}

impl CornerValue {
    fn classify(x: f64) -> Self {
        if x.is_infinite() {
            return CornerValue::Infinite;
        }
        let r = x.round();
        if (x - r).abs() <= INTEGRALITY_TOL && r >= 0.0 {
            CornerValue::Integral(r as usize)
        } else {
            CornerValue::Fractional(x)
        }
    }

    pub fn integral(self) -> Option<usize> {
        match self {
            CornerValue::Integral(v) => Some(v),
            _ => None,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            CornerValue::Integral(v) => v as f64,
            CornerValue::Fractional(v) => v,
            CornerValue::Infinite => f64::INFINITY,
        }
    }
}

/// `kappa = K M_r / N`, `lambda = L M_t / N` and
/// `lambda_tilde = min{L M_t / (N - M_r), L}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerParams {
    pub kappa: CornerValue,
    pub lambda: CornerValue,
    /// Clamped to `L`; when `M_r = N` the unclamped ratio is infinite and
    /// `rx_holds_library` is set.
    pub lambda_tilde: CornerValue,
    pub rx_holds_library: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("corner parameter {param} is not an admissible integer")]
pub struct NonIntegralCorner {
    pub param: &'static str,
}

/// Integral `(kappa, lambda)` at which the multicasting construction applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McCorner {
    pub kappa: usize,
    pub lambda: usize,
}

/// Integral `lambda_tilde` at which the beamforming construction applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BfCorner {
    pub lambda_tilde: usize,
}

impl CornerParams {
    /// `kappa` in `{0..K}` and `lambda` in `{1..L}`.
    pub fn multicast(&self, cfg: &SystemConfig) -> Result<McCorner, NonIntegralCorner> {
        let kappa = self
            .kappa
            .integral()
            .filter(|&k| k <= cfg.num_rx)
            .ok_or(NonIntegralCorner { param: "kappa" })?;
        let lambda = self
            .lambda
            .integral()
            .filter(|&l| (1..=cfg.num_tx).contains(&l))
            .ok_or(NonIntegralCorner { param: "lambda" })?;
        Ok(McCorner { kappa, lambda })
    }

    /// `lambda_tilde` in `{1..L}`.
    pub fn beamform(&self, cfg: &SystemConfig) -> Result<BfCorner, NonIntegralCorner> {
        let lambda_tilde = self
            .lambda_tilde
            .integral()
            .filter(|&l| (1..=cfg.num_tx).contains(&l))
            .ok_or(NonIntegralCorner {
                param: "lambda_tilde",
            })?;
        Ok(BfCorner { lambda_tilde })
    }
}

/// Computes `kappa`, `lambda` and `lambda_tilde`, each flagged integral or not.
pub fn corner_params(cfg: &SystemConfig) -> CornerParams {
    let n = cfg.num_files as f64;
    let k = cfg.num_rx as f64;
    let l = cfg.num_tx as f64;
    let kappa = CornerValue::classify(k * cfg.rx_mem / n);
    let lambda = CornerValue::classify(l * cfg.tx_mem / n);
    let rx_holds_library = cfg.rx_holds_library();
    let lambda_tilde = if rx_holds_library {
        CornerValue::Integral(cfg.num_tx)
    } else {
        CornerValue::classify((l * cfg.tx_mem / (n - cfg.rx_mem)).min(l))
    };
    CornerParams {
        kappa,
        lambda,
        lambda_tilde,
        rx_holds_library,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DemandError {
    #[error("demand has {got} entries, expected K = {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("receiver {rx} requests file {file}, library has N = {num_files} files")]
    FileOutOfRange {
        rx: usize,
        file: usize,
        num_files: usize,
    },
}

/// The files `(d_1, .., d_K)` requested by the receivers, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub requests: Vec<usize>,
}

impl Demand {
    pub fn new(requests: Vec<usize>, cfg: &SystemConfig) -> Result<Self, DemandError> {
        let d = Demand { requests };
        d.check(cfg)?;
        Ok(d)
    }

    /// Receiver `k` requests file `k mod N`: `min{N, K}` distinct files, lowest
    /// indices first.
    pub fn worst_case(cfg: &SystemConfig) -> Self {
        Demand {
            requests: (0..cfg.num_rx).map(|k| k % cfg.num_files).collect(),
        }
    }

    pub fn check(&self, cfg: &SystemConfig) -> Result<(), DemandError> {
        if self.requests.len() != cfg.num_rx {
            return Err(DemandError::WrongLength {
                got: self.requests.len(),
                expected: cfg.num_rx,
            });
        }
        if let Some((rx, &file)) = self
            .requests
            .iter()
            .enumerate()
            .find(|(_, &f)| f >= cfg.num_files)
        {
            return Err(DemandError::FileOutOfRange {
                rx,
                file,
                num_files: cfg.num_files,
            });
        }
        Ok(())
    }

    /// Distinct requested files, in order of first request.
    pub fn distinct_files(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for &f in &self.requests {
            if !seen.contains(&f) {
                seen.push(f);
            }
        }
        seen
    }

    /// Every demand vector in `{0..N}^K`, lexicographically.
    pub fn all(cfg: &SystemConfig) -> impl Iterator<Item = Demand> {
        let n = cfg.num_files;
        let k = cfg.num_rx;
        let total = n.pow(k as u32);
        (0..total).map(move |mut idx| {
            let mut requests = vec![0; k];
            for slot in requests.iter_mut().rev() {
                *slot = idx % n;
                idx /= n;
            }
            Demand { requests }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("phase matrix must be K x L with K, L > 0")]
    BadShape,
    #[error("phase theta[{rx}][{tx}] = {value} is outside [0, 2pi)")]
    PhaseOutOfRange { rx: usize, tx: usize, value: f64 },
}

/// Phases `theta[k][l]` of the unit-magnitude gains `g_kl = exp(j theta_kl)`
/// for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    num_rx: usize,
    num_tx: usize,
    phases: Vec<f64>,
}

impl ChannelState {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        let num_rx = rows.len();
        let num_tx = rows.first().map_or(0, Vec::len);
        if num_rx == 0 || num_tx == 0 || rows.iter().any(|r| r.len() != num_tx) {
            return Err(ChannelError::BadShape);
        }
        for (rx, row) in rows.iter().enumerate() {
            for (tx, &value) in row.iter().enumerate() {
                if !(0.0..TAU).contains(&value) {
                    return Err(ChannelError::PhaseOutOfRange { rx, tx, value });
                }
            }
        }
        Ok(Self {
            num_rx,
            num_tx,
            phases: rows.into_iter().flatten().collect(),
        })
    }

    /// I.i.d. uniform phases on `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(num_rx: usize, num_tx: usize, rng: &mut R) -> Self {
        let phases = (0..num_rx * num_tx)
            .map(|_| wrap_phase(rng.random::<f64>() * TAU))
            .collect();
        Self {
            num_rx,
            num_tx,
            phases,
        }
    }

    /// Redraws every phase in place.
    pub fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for p in &mut self.phases {
            *p = wrap_phase(rng.random::<f64>() * TAU);
        }
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn phase(&self, rx: usize, tx: usize) -> f64 {
        self.phases[rx * self.num_tx + tx]
    }

    pub fn gain(&self, rx: usize, tx: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.phase(rx, tx))
    }
}

/// Reduces an angle to `[0, 2pi)`, guarding against `rem_euclid` rounding up
/// to exactly `2pi`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageSpecError {
    #[error("receiver subset must be a non-empty sorted subset of 0..{num_rx}")]
    BadRxSubset { num_rx: usize },
    #[error("transmitter subset must be a non-empty sorted subset of 0..{num_tx}")]
    BadTxSubset { num_tx: usize },
}

/// The bit pipe `V_{K,L}` from a transmitter subset to a receiver subset.
/// Both subsets are sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MessageSpec {
    pub rx_subset: Vec<usize>,
    pub tx_subset: Vec<usize>,
}

impl MessageSpec {
    pub fn new(
        mut rx_subset: Vec<usize>,
        mut tx_subset: Vec<usize>,
        num_rx: usize,
        num_tx: usize,
    ) -> Result<Self, MessageSpecError> {
        rx_subset.sort_unstable();
        tx_subset.sort_unstable();
        if rx_subset.is_empty() || !is_canonical_subset(&rx_subset, num_rx) {
            return Err(MessageSpecError::BadRxSubset { num_rx });
        }
        if tx_subset.is_empty() || !is_canonical_subset(&tx_subset, num_tx) {
            return Err(MessageSpecError::BadTxSubset { num_tx });
        }
        Ok(Self {
            rx_subset,
            tx_subset,
        })
    }

    /// `p = |K|`.
    pub fn p(&self) -> usize {
        self.rx_subset.len()
    }

    /// `q = |L|`.
    pub fn q(&self) -> usize {
        self.tx_subset.len()
    }
}

impl fmt::Display for MessageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V[rx={:?}, tx={:?}]", self.rx_subset, self.tx_subset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, k: usize, l: usize, mr: f64, mt: f64) -> SystemConfig {
        SystemConfig::new(n, k, l, mr, mt, 0.01)
    }

    #[test]
    fn figure_configuration_is_valid() {
        assert!(validate_config(cfg(3, 3, 3, 1.0, 2.0)).is_ok());
    }

    #[test]
    fn library_not_storable_is_rejected() {
        let err = validate_config(cfg(4, 2, 2, 0.0, 1.0)).unwrap_err();
        assert!(matches!(
            err.as_slice(),
            [ConfigViolation::LibraryNotStorable { .. }]
        ));
    }

    #[test]
    fn full_receiver_cache_needs_no_transmitter_memory() {
        assert!(validate_config(cfg(3, 1, 2, 3.0, 0.0)).is_ok());
    }

    #[test]
    fn all_violations_are_reported() {
        let bad = SystemConfig::new(0, 0, 2, -1.0, 0.5, 0.0);
        let v = bad.violations();
        assert!(v.contains(&ConfigViolation::NonPositiveDimension { field: "N" }));
        assert!(v.contains(&ConfigViolation::NonPositiveDimension { field: "K" }));
        assert!(v
            .iter()
            .any(|e| matches!(e, ConfigViolation::MemOutOfRange { field: "M_r", .. })));
        assert!(v
            .iter()
            .any(|e| matches!(e, ConfigViolation::MemOutOfRange { field: "M_t", .. })));
        assert!(v.contains(&ConfigViolation::NonPositivePower(0.0)));
    }

    #[test]
    fn corner_params_examples() {
        let cp = corner_params(&cfg(3, 3, 3, 1.0, 2.0));
        assert_eq!(cp.kappa, CornerValue::Integral(1));
        assert_eq!(cp.lambda, CornerValue::Integral(2));
        assert_eq!(cp.lambda_tilde, CornerValue::Integral(3));

        let cp = corner_params(&cfg(4, 2, 2, 0.0, 4.0));
        assert_eq!(cp.kappa, CornerValue::Integral(0));
        assert_eq!(cp.lambda, CornerValue::Integral(2));
        assert_eq!(cp.lambda_tilde, CornerValue::Integral(2));

        let cp = corner_params(&cfg(3, 3, 3, 0.5, 2.0));
        match cp.kappa {
            CornerValue::Fractional(v) => assert!((v - 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(cp.lambda, CornerValue::Integral(2));
        match cp.lambda_tilde {
            CornerValue::Fractional(v) => assert!((v - 2.4).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_receiver_memory_is_flagged() {
        let c = cfg(3, 2, 2, 3.0, 0.0);
        let cp = corner_params(&c);
        assert!(cp.rx_holds_library);
        assert_eq!(cp.kappa, CornerValue::Integral(2));
        assert_eq!(cp.lambda_tilde, CornerValue::Integral(2));
        // lambda = 0 is not a multicasting corner
        assert!(cp.multicast(&c).is_err());
        assert_eq!(cp.beamform(&c).unwrap().lambda_tilde, 2);
    }

    #[test]
    fn worst_case_demand_has_min_n_k_distinct_files() {
        for n in 1..6 {
            for k in 1..8 {
                let c = cfg(n, k, 1, 0.0, n as f64);
                let d = Demand::worst_case(&c);
                assert_eq!(d.requests.len(), k);
                assert_eq!(d.distinct_files().len(), n.min(k));
                d.check(&c).unwrap();
            }
        }
    }

    #[test]
    fn demand_enumeration_is_exhaustive() {
        let c = cfg(3, 2, 1, 0.0, 3.0);
        let all: Vec<_> = Demand::all(&c).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0].requests, vec![0, 0]);
        assert_eq!(all[5].requests, vec![1, 2]);
        assert!(Demand::new(vec![0, 3], &c).is_err());
        assert!(Demand::new(vec![0], &c).is_err());
    }

    #[test]
    fn channel_phases_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = ChannelState::random(3, 4, &mut rng);
        for k in 0..3 {
            for l in 0..4 {
                let t = ch.phase(k, l);
                assert!((0.0..TAU).contains(&t));
                assert!((ch.gain(k, l).norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(ChannelState::from_rows(vec![vec![0.0, TAU]]).is_err());
        assert!(ChannelState::from_rows(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn wrap_phase_never_returns_tau() {
        assert_eq!(wrap_phase(-1e-20), 0.0);
        assert!((wrap_phase(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert!((wrap_phase(TAU + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn message_spec_validation() {
        let s = MessageSpec::new(vec![2, 0], vec![1], 3, 2).unwrap();
        assert_eq!(s.rx_subset, vec![0, 2]);
        assert_eq!((s.p(), s.q()), (2, 1));
        assert!(MessageSpec::new(vec![], vec![0], 3, 2).is_err());
        assert!(MessageSpec::new(vec![0, 0], vec![0], 3, 2).is_err());
        assert!(MessageSpec::new(vec![0], vec![2], 3, 2).is_err());
    }

    #[test]
    fn config_json_uses_single_letter_keys() {
        let c: SystemConfig =
            serde_json::from_str(r#"{"N":3,"K":3,"L":3,"M_r":1,"M_t":2,"P":0.01}"#).unwrap();
        assert_eq!(c, cfg(3, 3, 3, 1.0, 2.0));
    }

    proptest! {
        #[test]
        fn lambda_tilde_never_below_lambda(
            n in 1usize..12, k in 1usize..6, l in 1usize..8,
            mr_frac in 0.0f64..0.999, mt_frac in 0.0f64..=1.0,
        ) {
            let n_f = n as f64;
            let mr = mr_frac * n_f;
            let mt = (mt_frac * n_f).max((n_f - mr) / l as f64);
            let c = cfg(n, k, l, mr, mt.min(n_f));
            prop_assume!(c.is_valid());
            let cp = corner_params(&c);
            prop_assert!(cp.lambda_tilde.value() >= cp.lambda.value() - 1e-12);
            prop_assert_eq!(cp, corner_params(&c));
        }
    }
}
