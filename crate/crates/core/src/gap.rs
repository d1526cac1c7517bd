//! Parameter sweeps comparing achievable rates with the converse bounds in
//! the two regimes where both are available: one full-library transmitter
//! (`L = 1, M_t = N`) and one receiver (`K = 1`).

use std::cmp::Ordering;
use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::converse::{bc_upper_bound, mac_upper_bound, psi_closed_form, ConverseError};
use crate::rate::{rate_bf_shared, rate_combined, RateError, RateValue};
use crate::system::SystemConfig;

/// Constant of the broadcast gap theorem.
pub const BC_GAP_CONSTANT: f64 = 12.0;
/// Constant of the single-receiver gap theorem.
pub const MAC_GAP_CONSTANT: f64 = 64.0;
/// Case-1 bound of the single-receiver proof.
pub const CASE1_CONSTANT: f64 = 8.0;
/// Case-2 bound of the single-receiver proof.
pub const CASE2_CONSTANT: f64 = 64.0;

/// Slack on `ratio >= 1`.
pub const SANDWICH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error(transparent)]
    Converse(#[from] ConverseError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("sweep limits must be positive")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bc,
    Mac,
}

impl Side {
    pub fn constant(self) -> f64 {
        match self {
            Side::Bc => BC_GAP_CONSTANT,
            Side::Mac => MAC_GAP_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    /// `M_t >= (N - M_r)/4`.
    One,
    /// `M_t < (N - M_r)/4`.
    Two,
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub config: SystemConfig,
    pub achievable: f64,
    pub converse: f64,
    pub ratio: f64,
    /// Proof case for single-receiver rows.
    pub case: Option<Case>,
}

impl GapRow {
    fn key(&self) -> (usize, usize, usize, f64, f64) {
        let c = &self.config;
        (c.num_files, c.num_rx, c.num_tx, c.rx_mem, c.tx_mem)
    }

    fn precedes(&self, other: &GapRow) -> bool {
        self.key().partial_cmp(&other.key()) == Some(Ordering::Less)
    }
}

/// Running maximum of the ratio, with the first (in config order) argmax.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub side: Side,
    pub rows: u64,
    pub max_ratio: f64,
    pub argmax: Option<SystemConfig>,
    pub min_ratio: f64,
    /// Rows with `ratio < 1 - 1e-9`.
    pub sandwich_violations: u64,
    /// Rows above the theorem's constant.
    pub constant_violations: u64,
    pub case1_rows: u64,
    pub case1_max: f64,
    pub case2_rows: u64,
    pub case2_max: f64,
    #[serde(skip)]
    argmax_row: Option<GapRow>,
}

impl GapSummary {
    pub fn new(side: Side) -> Self {
        Self {
            side,
            rows: 0,
            max_ratio: f64::NEG_INFINITY,
            argmax: None,
            min_ratio: f64::INFINITY,
            sandwich_violations: 0,
            constant_violations: 0,
            case1_rows: 0,
            case1_max: f64::NEG_INFINITY,
            case2_rows: 0,
            case2_max: f64::NEG_INFINITY,
            argmax_row: None,
        }
    }

    fn consider_max(&mut self, row: &GapRow) {
        let better = match &self.argmax_row {
            None => true,
            Some(cur) => row.ratio > cur.ratio || (row.ratio == cur.ratio && row.precedes(cur)),
        };
        if better {
            self.max_ratio = row.ratio;
            self.argmax = Some(row.config);
            self.argmax_row = Some(*row);
        }
    }

    pub fn add(&mut self, row: &GapRow) {
        self.rows += 1;
        self.consider_max(row);
        self.min_ratio = self.min_ratio.min(row.ratio);
        self.sandwich_violations += (row.ratio < 1.0 - SANDWICH_TOL) as u64;
        self.constant_violations += (row.ratio > self.side.constant()) as u64;
        match row.case {
            Some(Case::One) => {
                self.case1_rows += 1;
                self.case1_max = self.case1_max.max(row.ratio);
            }
            Some(Case::Two) => {
                self.case2_rows += 1;
                self.case2_max = self.case2_max.max(row.ratio);
            }
            None => {}
        }
    }

    pub fn merge(mut self, other: GapSummary) -> GapSummary {
        self.rows += other.rows;
        if let Some(row) = other.argmax_row {
            self.consider_max(&row);
        }
        self.min_ratio = self.min_ratio.min(other.min_ratio);
        self.sandwich_violations += other.sandwich_violations;
        self.constant_violations += other.constant_violations;
        self.case1_rows += other.case1_rows;
        self.case1_max = self.case1_max.max(other.case1_max);
        self.case2_rows += other.case2_rows;
        self.case2_max = self.case2_max.max(other.case2_max);
        self
    }
}

/// Summary together with every row, for sweeps small enough to keep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub summary: GapSummary,
    pub rows: Vec<GapRow>,
}

fn sweep<G>(side: Side, n_max: usize, generate: G, visit: Option<&mut dyn FnMut(&GapRow)>) -> GapSummary
where
    G: Fn(usize, &mut dyn FnMut(GapRow)) + Sync,
{
    let ns: Vec<usize> = (1..=n_max).collect();
    match visit {
        None => ns
            .par_iter()
            .map(|&n| {
                let mut s = GapSummary::new(side);
                generate(n, &mut |r| s.add(&r));
                s
            })
            .reduce(|| GapSummary::new(side), GapSummary::merge),
        Some(visit) => {
            let mut summary = GapSummary::new(side);
            let batch = rayon::current_num_threads().max(1);
            for group in ns.chunks(batch) {
                let rows: Vec<Vec<GapRow>> = group
                    .par_iter()
                    .map(|&n| {
                        let mut rows = Vec::new();
                        generate(n, &mut |r| rows.push(r));
                        rows
                    })
                    .collect();
                for r in rows.iter().flatten() {
                    summary.add(r);
                    visit(r);
                }
            }
            summary
        }
    }
}

/// Sweep limits. `grid` is the number of subintervals per corner interval,
/// so `grid - 1` interior points are added between adjacent corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepLimits {
    pub n_max: usize,
    /// `K_max` for the broadcast side, `L_max` for the single-receiver side.
    pub other_max: usize,
    pub grid: usize,
}

impl SweepLimits {
    fn check(&self) -> Result<(), GapError> {
        if self.n_max == 0 || self.other_max == 0 || self.grid == 0 {
            return Err(GapError::EmptyGrid);
        }
        Ok(())
    }
}

/// Ratio of an upper bound to an achievable rate, both finite.
fn ratio(converse: f64, achievable: f64) -> f64 {
    converse / achievable
}

/// One full-library transmitter: every `N <= n_max`, `K <= k_max` and
/// `M_r = N kappa / K` with `kappa` on the corners `0..K` refined by `grid`.
/// `M_r = N` is excluded (both sides infinite).
pub fn bc_rows(n: usize, k_max: usize, grid: usize, visit: &mut dyn FnMut(GapRow)) {
    let n_f = n as f64;
    for k in 1..=k_max {
        for i in 0..k * grid {
            let kappa = i as f64 / grid as f64;
            let cfg = SystemConfig::new(n, k, 1, kappa * n_f / k as f64, n_f, 1.0);
            let achievable = rate_combined(&cfg).expect("broadcast grid point is valid").as_f64();
            let converse = bc_upper_bound(&cfg)
                .expect("broadcast regime")
                .value
                .as_f64();
            visit(GapRow {
                config: cfg,
                achievable,
                converse,
                ratio: ratio(converse, achievable),
                case: None,
            });
        }
    }
}

pub fn gap_bc_sweep_with(
    limits: SweepLimits,
    visit: Option<&mut dyn FnMut(&GapRow)>,
) -> Result<GapSummary, GapError> {
    limits.check()?;
    Ok(sweep(
        Side::Bc,
        limits.n_max,
        |n, v| bc_rows(n, limits.other_max, limits.grid, v),
        visit,
    ))
}

pub fn gap_bc_sweep(n_max: usize, k_max: usize, grid: usize) -> Result<GapReport, GapError> {
    let mut rows = Vec::new();
    let summary = gap_bc_sweep_with(
        SweepLimits {
            n_max,
            other_max: k_max,
            grid,
        },
        Some(&mut |r: &GapRow| rows.push(*r)),
    )?;
    Ok(GapReport { summary, rows })
}

fn classify(cfg: &SystemConfig) -> Case {
    if cfg.tx_mem >= (cfg.num_files as f64 - cfg.rx_mem) / 4.0 {
        Case::One
    } else {
        Case::Two
    }
}

/// Transmitter memories for one `(N, L, M_r)`: the `lambda_tilde` corners
/// `1..L` refined by `grid`, then `grid` steps from `N - M_r` up to `N`.
pub fn mac_tx_grid(n: usize, l: usize, rx_mem: f64, grid: usize) -> Vec<f64> {
    let n_f = n as f64;
    let free = n_f - rx_mem;
    let mut out: Vec<f64> = (0..=(l - 1) * grid)
        .map(|i| (1.0 + i as f64 / grid as f64) * free / l as f64)
        .collect();
    if rx_mem > 0.0 {
        out.extend((1..=grid).map(|j| free + rx_mem * j as f64 / grid as f64));
    }
    out
}

/// One receiver: every `N <= n_max`, `L <= l_max`, `M_r = j N / grid` for
/// `j < grid`, and `M_t` from [`mac_tx_grid`].
pub fn mac_rows(n: usize, l_max: usize, grid: usize, visit: &mut dyn FnMut(GapRow)) {
    let n_f = n as f64;
    for l in 1..=l_max {
        for j in 0..grid {
            let rx_mem = j as f64 * n_f / grid as f64;
            for tx_mem in mac_tx_grid(n, l, rx_mem, grid) {
                let cfg = SystemConfig::new(n, 1, l, rx_mem, tx_mem.min(n_f), 1.0);
                let achievable = rate_bf_shared(&cfg).expect("regime point is valid").as_f64();
                let converse = mac_upper_bound(&cfg)
                    .expect("t = L is admissible below M_r = N")
                    .value_per_unit_energy;
                visit(GapRow {
                    config: cfg,
                    achievable,
                    converse,
                    ratio: ratio(converse, achievable),
                    case: Some(classify(&cfg)),
                });
            }
        }
    }
}

pub fn gap_mac_sweep_with(
    limits: SweepLimits,
    visit: Option<&mut dyn FnMut(&GapRow)>,
) -> Result<GapSummary, GapError> {
    limits.check()?;
    Ok(sweep(
        Side::Mac,
        limits.n_max,
        |n, v| mac_rows(n, limits.other_max, limits.grid, v),
        visit,
    ))
}

pub fn gap_mac_sweep(n_max: usize, l_max: usize, grid: usize) -> Result<GapReport, GapError> {
    let mut rows = Vec::new();
    let summary = gap_mac_sweep_with(
        SweepLimits {
            n_max,
            other_max: l_max,
            grid,
        },
        Some(&mut |r: &GapRow| rows.push(*r)),
    )?;
    Ok(GapReport { summary, rows })
}

/// One branch of the two-case argument evaluated with the proof's cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseBranch {
    pub t: usize,
    pub admissible: bool,
    /// `Psi(t) / (r_t ln 2)` divided by the achievable rate.
    pub proof_ratio: Option<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: Case,
    pub on_boundary: bool,
    /// Optimised converse over achievable.
    pub numeric_ratio: f64,
    pub case1: CaseBranch,
    /// Absent when `t = L - floor((N - M_r)/(2 M_t))` falls below one.
    pub case2: Option<CaseBranch>,
    /// The numeric ratio respects the bound of every branch that applies.
    pub holds: bool,
}

fn branch(cfg: &SystemConfig, t: usize, bound: f64, achievable: f64) -> CaseBranch {
    let n = cfg.num_files as f64;
    let r = 1.0 - (cfg.rx_mem + (cfg.num_tx - t) as f64 * cfg.tx_mem) / n;
    let admissible = r > 0.0;
    CaseBranch {
        t,
        admissible,
        proof_ratio: admissible.then(|| psi_closed_form(t, cfg.num_tx) / (r * LN_2) / achievable),
        bound,
    }
}

/// Classifies a single-receiver configuration into the two proof cases and
/// evaluates both the proof's cut choice and the optimised ratio.
pub fn verify_case_split(cfg: &SystemConfig) -> Result<CaseReport, GapError> {
    let numeric = mac_upper_bound(cfg)?;
    let achievable = match rate_bf_shared(cfg)? {
        RateValue::Finite(a) => a,
        RateValue::Infinite => return Err(ConverseError::NoAdmissibleT.into()),
    };
    let numeric_ratio = numeric.value_per_unit_energy / achievable;
    let free = cfg.num_files as f64 - cfg.rx_mem;
    let l = cfg.num_tx;
    let case1 = branch(cfg, l, CASE1_CONSTANT, achievable);
    let case2 = (cfg.tx_mem > 0.0)
        .then(|| (free / (2.0 * cfg.tx_mem)).floor() as usize)
        .filter(|&d| d < l)
        .map(|d| branch(cfg, l - d, CASE2_CONSTANT, achievable));
    let case = classify(cfg);
    let on_boundary = (cfg.tx_mem - free / 4.0).abs() <= 1e-12 * cfg.num_files as f64;
    // the boundary belongs to case 1, whose bound is the tighter one
    let holds = match case {
        Case::One => numeric_ratio <= CASE1_CONSTANT,
        Case::Two => numeric_ratio <= CASE2_CONSTANT,
    };
    Ok(CaseReport {
        case,
        on_boundary,
        numeric_ratio,
        case1,
        case2,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, k: usize, l: usize, mr: f64, mt: f64) -> SystemConfig {
        SystemConfig::new(n, k, l, mr, mt, 1.0)
    }

    #[test]
    fn bc_zero_memory_ratio_is_one() {
        let report = gap_bc_sweep(8, 8, 4).unwrap();
        for r in report.rows.iter().filter(|r| r.config.rx_mem == 0.0) {
            assert!((r.ratio - 1.0).abs() < 1e-12, "{r:?}");
        }
        assert_eq!(report.summary.sandwich_violations, 0);
        assert_eq!(report.summary.constant_violations, 0);
        assert_eq!(report.rows.len() as u64, report.summary.rows);
    }

    #[test]
    fn mac_full_memory_ratio_is_one() {
        for l in 1..12 {
            let c = cfg(7, 1, l, 0.0, 7.0);
            let mut seen = false;
            mac_rows(7, l, 10, &mut |r| {
                if r.config.num_tx == l && r.config.rx_mem == 0.0 && r.config.tx_mem == 7.0 {
                    assert!((r.ratio - 1.0).abs() < 1e-12);
                    seen = true;
                }
            });
            assert!(seen);
            let ratio = mac_upper_bound(&c).unwrap().value_per_unit_energy
                / rate_bf_shared(&c).unwrap().as_f64();
            assert!((ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn summaries_are_order_independent() {
        let limits = SweepLimits {
            n_max: 12,
            other_max: 12,
            grid: 5,
        };
        let a = gap_mac_sweep_with(limits, None).unwrap();
        let mut count = 0;
        let b = gap_mac_sweep_with(limits, Some(&mut |_: &GapRow| count += 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(count, a.rows);
        assert!(a.max_ratio <= MAC_GAP_CONSTANT);
        assert_eq!(a.sandwich_violations, 0);
        assert_eq!(a.case1_rows + a.case2_rows, a.rows);
        assert!(a.case1_max <= CASE1_CONSTANT);
    }

    #[test]
    fn rows_stream_in_config_order() {
        let report = gap_bc_sweep(5, 4, 3).unwrap();
        assert!(report.rows.windows(2).all(|w| w[0].config.num_files <= w[1].config.num_files));
        let first_max = report
            .rows
            .iter()
            .find(|r| r.ratio == report.summary.max_ratio)
            .unwrap();
        assert_eq!(report.summary.argmax, Some(first_max.config));
    }

    #[test]
    fn tx_grid_covers_regime() {
        let g = mac_tx_grid(10, 4, 2.0, 10);
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!(g.iter().any(|&m| (m - 8.0).abs() < 1e-12));
        assert!((g.last().unwrap() - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(mac_tx_grid(10, 1, 0.0, 10), vec![10.0]);
    }

    #[test]
    fn case_split_examples() {
        // case 1
        let r = verify_case_split(&cfg(8, 1, 4, 0.0, 4.0)).unwrap();
        assert_eq!(r.case, Case::One);
        assert!(r.holds && r.numeric_ratio <= 8.0);
        assert!(r.case1.admissible);

        // case 2 with the proof's cut admissible
        let c = cfg(100, 1, 50, 0.0, 3.0);
        let r = verify_case_split(&c).unwrap();
        assert_eq!(r.case, Case::Two);
        let b = r.case2.unwrap();
        assert_eq!(b.t, 50 - 16);
        assert!(b.admissible);
        assert!(r.holds);
        assert!(b.proof_ratio.unwrap() >= r.numeric_ratio * (1.0 - 1e-12));

        // boundary: both branches
        let r = verify_case_split(&cfg(8, 1, 8, 0.0, 2.0)).unwrap();
        assert!(r.on_boundary);
        assert_eq!(r.case, Case::One);
        assert_eq!(r.case2.unwrap().t, 6);
        assert!(r.holds);

        assert!(verify_case_split(&cfg(8, 2, 8, 0.0, 2.0)).is_err());
    }

    #[test]
    fn proof_cut_is_admissible_on_grid() {
        for n in [3, 10, 37] {
            for l in 1..30 {
                for j in 0..10 {
                    let mr = j as f64 * n as f64 / 10.0;
                    for mt in mac_tx_grid(n, l, mr, 10) {
                        let r = verify_case_split(&cfg(n, 1, l, mr, mt.min(n as f64))).unwrap();
                        if r.case == Case::Two {
                            assert!(r.case2.unwrap().admissible);
                        }
                        assert!(r.holds);
                    }
                }
            }
        }
    }
}
