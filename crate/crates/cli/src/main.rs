//! `cachebeam` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when a
//! verification finds a violated invariant.

mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use cachebeam::converse::{
    bc_upper_bound, mac_upper_bound, mac_upper_bound_oracle, ConverseError,
};
use cachebeam::gap::{gap_bc_sweep_with, gap_mac_sweep_with, GapError, GapRow, Side, SweepLimits};
use cachebeam::network::{
    build, network_load, payloads_available, verify_decodability, NetworkError, Scheme,
};
use cachebeam::phy::{
    phy_sum_rate_per_unit_energy, trace_slots, BinConfig, BinningMode, PhyError, PhyScenario,
};
use cachebeam::rate::{
    gain_decomposition, rate_bf, rate_bf_shared, rate_combined, rate_mc, rate_mc_shared,
    separation_rate, RateError, RateValue,
};
use cachebeam::{validate_config, Demand, SystemConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use output::{csv_with_manifest, emit_json, fmt_num, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "cachebeam", version, about = "Cache-aided interference networks at low SNR")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Achievable rates, gains and loads of both schemes.
    Rate(ConfigArgs),
    /// Converse bound in the single-receiver or single-transmitter regime.
    Bounds(BoundsArgs),
    /// Achievable-versus-converse ratio over a parameter grid.
    GapSweep(SweepArgs),
    /// Monte Carlo of the phase-binning beamforming physical layer.
    SimulatePhy(PhyArgs),
    /// Builds placements and deliveries and checks decodability.
    VerifyNetwork(VerifyArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON file with keys N, K, L, M_r, M_t and optionally P.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long = "M_r", alias = "mr")]
    mr: Option<f64>,
    #[arg(long = "M_t", alias = "mt")]
    mt: Option<f64>,
    #[arg(long = "P")]
    p: Option<f64>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Bc,
    Mac,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Bc => Side::Bc,
            SideArg::Mac => Side::Mac,
        }
    }
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Regime; inferred from the configuration when omitted.
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    /// Also run the covariance-search oracle (single-receiver side only).
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 1e-5)]
    rho_step: f64,
    #[arg(long, default_value_t = 10_000)]
    psd_samples: u64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    side: SideArg,
    #[arg(long, default_value_t = 100)]
    n_max: usize,
    #[arg(long, default_value_t = 100)]
    k_max: usize,
    #[arg(long, default_value_t = 100)]
    l_max: usize,
    /// Subintervals between adjacent memory corners.
    #[arg(long, default_value_t = 10)]
    mr_grid: usize,
    /// Per-row CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON output; stdout when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Raw,
    Aligned,
}

#[derive(Debug, Args)]
struct PhyArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    #[arg(long, default_value_t = 64)]
    beta: usize,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Transmit power; the critical power when omitted.
    #[arg(long = "P")]
    power: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Aligned)]
    mode: ModeArg,
    /// Per-slot CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Mc,
    Bf,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DemandArg {
    All,
    Worst,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = SchemeArg::Both)]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = DemandArg::All)]
    demands: DemandArg,
}

/// Largest demand set enumerated by `verify-network --demands all`.
const MAX_DEMANDS: f64 = 1e6;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Converse(#[from] ConverseError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("verification failed: {0}")]
    Assertion(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Assertion(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

impl ConfigArgs {
    fn resolve(&self) -> Result<SystemConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<SystemConfig>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => {
                let missing = |name: &str| CliError::Usage(format!("--{name} is required without --config"));
                SystemConfig::new(
                    self.n.ok_or_else(|| missing("N"))?,
                    self.k.ok_or_else(|| missing("K"))?,
                    self.l.ok_or_else(|| missing("L"))?,
                    self.mr.ok_or_else(|| missing("M_r"))?,
                    self.mt.ok_or_else(|| missing("M_t"))?,
                    1.0,
                )
            }
        };
        if self.config.is_some() {
            cfg.num_files = self.n.unwrap_or(cfg.num_files);
            cfg.num_rx = self.k.unwrap_or(cfg.num_rx);
            cfg.num_tx = self.l.unwrap_or(cfg.num_tx);
            cfg.rx_mem = self.mr.unwrap_or(cfg.rx_mem);
            cfg.tx_mem = self.mt.unwrap_or(cfg.tx_mem);
        }
        cfg.power = self.p.unwrap_or(cfg.power);
        validate_config(cfg).map_err(|v| {
            CliError::Config(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        })
    }
}

fn cmd_rate(args: &ConfigArgs, seed: u64) -> Result<()> {
    let cfg = args.resolve()?;
    let cp = cfg.corner_params();
    let manifest = RunManifest::new("rate", cfg, seed);
    let body = json!({
        "corner_params": cp,
        "R_mc": rate_mc(&cfg).ok(),
        "R_bf": rate_bf(&cfg).ok(),
        "R_mc_shared": rate_mc_shared(&cfg).ok(),
        "R_bf_shared": rate_bf_shared(&cfg).ok(),
        "R_combined": rate_combined(&cfg).ok(),
        "gains": {
            "mc": gain_decomposition(&cfg, Scheme::Multicast).ok(),
            "bf": gain_decomposition(&cfg, Scheme::Beamform).ok(),
        },
        "loads": {
            "mc": network_load(Scheme::Multicast, &cfg, &cp).ok(),
            "bf": network_load(Scheme::Beamform, &cfg, &cp).ok(),
        },
    });
    emit_json(&manifest, body, args.out.as_deref())?;
    Ok(())
}

fn infer_side(cfg: &SystemConfig) -> Result<Side> {
    if cfg.num_rx == 1 {
        Ok(Side::Mac)
    } else if cfg.num_tx == 1 && cfg.tx_mem == cfg.num_files as f64 {
        Ok(Side::Bc)
    } else {
        Err(CliError::Config(
            "bounds need K = 1, or L = 1 with M_t = N".into(),
        ))
    }
}

fn ratio(upper: RateValue, achievable: RateValue) -> Option<f64> {
    match (upper, achievable) {
        (RateValue::Finite(u), RateValue::Finite(a)) if a > 0.0 => Some(u / a),
        _ => None,
    }
}

fn cmd_bounds(args: &BoundsArgs, seed: u64) -> Result<()> {
    let cfg = args.config.resolve()?;
    let side = match args.side {
        Some(s) => s.into(),
        None => infer_side(&cfg)?,
    };
    let manifest = RunManifest::new("bounds", cfg, seed);
    let body = match side {
        Side::Mac => {
            let b = mac_upper_bound(&cfg)?;
            let achievable = rate_bf_shared(&cfg)?;
            let upper = RateValue::Finite(b.value_per_unit_energy);
            let oracle = if args.oracle {
                Some(mac_upper_bound_oracle(&cfg, args.rho_step, args.psd_samples, seed)?)
            } else {
                None
            };
            json!({
                "side": "mac",
                "upper_bound": upper,
                "minimizing_t": b.minimizing_t,
                "rho_star": b.maximizing_rho,
                "oracle_value": oracle.map(|o| o.value),
                "oracle": oracle,
                "achievable": achievable,
                "ratio": ratio(upper, achievable),
            })
        }
        Side::Bc => {
            let b = bc_upper_bound(&cfg)?;
            let achievable = rate_combined(&cfg)?;
            json!({
                "side": "bc",
                "upper_bound": b.value,
                "minimizing_s": b.minimizing_s,
                "achievable": achievable,
                "ratio": ratio(b.value, achievable),
            })
        }
    };
    emit_json(&manifest, body, args.config.out.as_deref())?;
    Ok(())
}

fn cmd_gap_sweep(args: &SweepArgs, seed: u64) -> Result<()> {
    let side: Side = args.side.into();
    let limits = SweepLimits {
        n_max: args.n_max,
        other_max: match side {
            Side::Bc => args.k_max,
            Side::Mac => args.l_max,
        },
        grid: args.mr_grid,
    };
    let manifest = RunManifest::new("gap-sweep", json!({ "side": side, "limits": limits }), seed);
    let run = |visit: Option<&mut dyn FnMut(&GapRow)>| match side {
        Side::Bc => gap_bc_sweep_with(limits, visit),
        Side::Mac => gap_mac_sweep_with(limits, visit),
    };
    let summary = match &args.out {
        Some(path) => {
            let mut w = csv_with_manifest(path, &manifest)?;
            w.write_record(["N", "K", "L", "M_r", "M_t", "achievable", "converse", "ratio"])?;
            let mut err = None;
            let summary = run(Some(&mut |r: &GapRow| {
                if err.is_some() {
                    return;
                }
                let c = &r.config;
                let rec = [
                    c.num_files.to_string(),
                    c.num_rx.to_string(),
                    c.num_tx.to_string(),
                    fmt_num(c.rx_mem),
                    fmt_num(c.tx_mem),
                    fmt_num(r.achievable),
                    fmt_num(r.converse),
                    fmt_num(r.ratio),
                ];
                if let Err(e) = w.write_record(&rec) {
                    err = Some(e);
                }
            }))?;
            if let Some(e) = err {
                return Err(e.into());
            }
            w.flush()?;
            summary
        }
        None => run(None)?,
    };
    emit_json(&manifest, &summary, args.summary.as_deref())?;
    Ok(())
}

fn subset_text(s: &[usize]) -> String {
    s.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct PhyChecks {
    gain_bound_respected: bool,
    duty_cycle_bound: bool,
    lemma1_floor_met: bool,
}

fn cmd_simulate_phy(args: &PhyArgs, seed: u64) -> Result<()> {
    let bins = BinConfig::new(args.beta, args.sigma)?;
    let mode = match args.mode {
        ModeArg::Raw => BinningMode::Raw,
        ModeArg::Aligned => BinningMode::ReferenceAligned,
    };
    let scn = PhyScenario::new(args.k, args.l, args.p, args.q, args.beta)?.with_mode(mode);
    let power = args.power.unwrap_or_else(|| scn.critical_power(bins.sigma));
    let manifest = RunManifest::new(
        "simulate-phy",
        json!({
            "K": args.k, "L": args.l, "p": args.p, "q": args.q, "beta": args.beta,
            "sigma": args.sigma, "P": power, "samples": args.samples, "mode": mode,
        }),
        seed,
    );
    let report = phy_sum_rate_per_unit_energy(&scn, &bins, power, args.samples, seed)?;
    if let Some(path) = &args.trace {
        let mut w = csv_with_manifest(path, &manifest)?;
        w.write_record(["slot", "favorable", "reference_favorable", "rx_subset", "tx_subset", "gain"])?;
        let mut err = None;
        trace_slots(&scn, args.samples, seed, |r| {
            if err.is_some() {
                return;
            }
            let (rx, tx) = r
                .scheduled
                .as_ref()
                .map_or((String::new(), String::new()), |s| (subset_text(&s.rx_subset), subset_text(&s.tx_subset)));
            let rec = [
                r.slot.to_string(),
                r.favorable.to_string(),
                r.reference_favorable.to_string(),
                rx,
                tx,
                r.gain.map(fmt_num).unwrap_or_default(),
            ];
            if let Err(e) = w.write_record(&rec) {
                err = Some(e);
            }
        });
        if let Some(e) = err {
            return Err(e.into());
        }
        w.flush()?;
    }
    let checks = PhyChecks {
        gain_bound_respected: report.gain_violations == 0,
        duty_cycle_bound: mode == BinningMode::Raw
            || report.eta_hat + 3.0 * report.stderr >= report.analytic_lower,
        lemma1_floor_met: report.sum_rate_per_unit_energy >= report.lemma1_floor * (1.0 - 1e-12),
    };
    let ok = checks.gain_bound_respected && checks.duty_cycle_bound && checks.lemma1_floor_met;
    let spec_counts: BTreeMap<String, u64> = report
        .spec_counts
        .iter()
        .map(|(s, c)| (s.to_string(), *c))
        .collect();
    let body = json!({
        "eta_hat": report.eta_hat,
        "stderr": report.stderr,
        "analytic_lower": report.analytic_lower,
        "min_gain": report.min_gain,
        "gain_bound": report.gain_bound,
        "sum_rate_per_unit_energy": report.sum_rate_per_unit_energy,
        "lemma1_floor": report.lemma1_floor,
        "epsilon_achieved": report.epsilon_achieved,
        "target": report.target,
        "power": report.power,
        "critical_power": report.critical_power,
        "samples": report.samples,
        "tx_activity": report.tx_activity,
        "tx_activity_expected": report.tx_activity_expected,
        "spec_counts": spec_counts,
        "checks": checks,
    });
    emit_json(&manifest, body, args.out.as_deref())?;
    if !ok {
        return Err(CliError::Assertion("physical-layer invariant violated".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct SchemeCheck {
    scheme: Scheme,
    applicable: bool,
    reason: Option<String>,
    demands: u64,
    receivers_decoded: u64,
    receivers_failed: u64,
    budget_ok: bool,
    payloads_ok: bool,
    separation_rate: Option<RateValue>,
    formula_rate: Option<RateValue>,
    separation_matches: bool,
}

fn same_rate(a: RateValue, b: RateValue) -> bool {
    match (a, b) {
        (RateValue::Finite(x), RateValue::Finite(y)) => (x - y).abs() <= 1e-9 * y.abs().max(1.0),
        (RateValue::Infinite, RateValue::Infinite) => true,
        _ => false,
    }
}

fn check_scheme(scheme: Scheme, cfg: &SystemConfig, demands: &DemandArg) -> Result<SchemeCheck> {
    let mut check = SchemeCheck {
        scheme,
        applicable: true,
        reason: None,
        demands: 0,
        receivers_decoded: 0,
        receivers_failed: 0,
        budget_ok: true,
        payloads_ok: true,
        separation_rate: None,
        formula_rate: None,
        separation_matches: true,
    };
    let formula = match scheme {
        Scheme::Multicast => rate_mc(cfg),
        Scheme::Beamform => rate_bf(cfg),
    };
    let formula = match formula {
        Ok(r) => r,
        Err(e) => {
            check.applicable = false;
            check.reason = Some(e.to_string());
            return Ok(check);
        }
    };
    let sep = separation_rate(cfg, scheme)?;
    check.formula_rate = Some(formula);
    check.separation_rate = Some(sep);
    check.separation_matches = same_rate(sep, formula);

    let list: Box<dyn Iterator<Item = Demand>> = match demands {
        DemandArg::Worst => Box::new(std::iter::once(Demand::worst_case(cfg))),
        DemandArg::All => {
            let count = (cfg.num_files as f64).powi(cfg.num_rx as i32);
            if count > MAX_DEMANDS {
                return Err(CliError::Usage(format!(
                    "N^K = {count} demand vectors; use --demands worst"
                )));
            }
            Box::new(Demand::all(cfg))
        }
    };
    for dem in list {
        let (pl, msgs) = build(scheme, cfg, &dem)?;
        check.budget_ok &= pl.check_budgets(cfg).is_ok();
        check.payloads_ok &= payloads_available(&pl, &msgs);
        for ok in verify_decodability(&pl, &msgs, &dem) {
            if ok {
                check.receivers_decoded += 1;
            } else {
                check.receivers_failed += 1;
            }
        }
        check.demands += 1;
    }
    Ok(check)
}

fn cmd_verify_network(args: &VerifyArgs, seed: u64) -> Result<()> {
    let cfg = args.config.resolve()?;
    let schemes: &[Scheme] = match args.scheme {
        SchemeArg::Mc => &[Scheme::Multicast],
        SchemeArg::Bf => &[Scheme::Beamform],
        SchemeArg::Both => &[Scheme::Multicast, Scheme::Beamform],
    };
    let checks = schemes
        .iter()
        .map(|&s| check_scheme(s, &cfg, &args.demands))
        .collect::<Result<Vec<_>>>()?;
    if checks.iter().all(|c| !c.applicable) {
        return Err(CliError::Config(
            "configuration is not an integral corner of the requested scheme(s)".into(),
        ));
    }
    let passed = checks.iter().all(|c| {
        !c.applicable || (c.receivers_failed == 0 && c.budget_ok && c.payloads_ok && c.separation_matches)
    });
    let manifest = RunManifest::new("verify-network", cfg, seed);
    emit_json(&manifest, json!({ "passed": passed, "schemes": checks }), args.config.out.as_deref())?;
    if !passed {
        return Err(CliError::Assertion("a receiver failed to decode or a budget was exceeded".into()));
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("CACHEBEAM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CACHEBEAM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let seed = cli.seed;
    match &cli.command {
        Command::Rate(a) => cmd_rate(a, seed),
        Command::Bounds(a) => cmd_bounds(a, seed),
        Command::GapSweep(a) => cmd_gap_sweep(a, seed),
        Command::SimulatePhy(a) => cmd_simulate_phy(a, seed),
        Command::VerifyNetwork(a) => cmd_verify_network(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Assertion("x".into()).exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
    }

    #[test]
    fn side_inference() {
        let mac = SystemConfig::new(4, 1, 3, 0.0, 2.0, 1.0);
        assert_eq!(infer_side(&mac).unwrap(), Side::Mac);
        let bc = SystemConfig::new(4, 3, 1, 0.0, 4.0, 1.0);
        assert_eq!(infer_side(&bc).unwrap(), Side::Bc);
        assert!(infer_side(&SystemConfig::new(4, 3, 2, 0.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
