//! Phase-binning beamforming over the fast-fading phase channel.
//!
//! Each slot draws i.i.d. uniform phases, quantises them into `beta` bins,
//! finds every favorable `(receiver subset, transmitter subset)` pair and
//! schedules one uniformly. Slots are split into fixed chunks, each driven by
//! its own ChaCha stream, so estimates depend only on `(seed, samples)`.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI, TAU};

use itertools::Itertools;
use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::{binomial_f64, subsets};
use crate::system::{wrap_phase, ChannelState, MessageSpec};

/// Slots per RNG stream.
pub const CHUNK_SLOTS: u64 = 1 << 14;

/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("beta = {0} bins; at least 8 are required")]
    TooFewBins(usize),
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("phase {0} is outside [0, 2pi)")]
    OutOfRangePhase(f64),
    #[error("bin {bin} is outside 0..{beta}")]
    BinOutOfRange { bin: usize, beta: usize },
    #[error("{spec} is not favorable under this channel")]
    NotFavorable { spec: MessageSpec },
    #[error("need 1 <= p <= K and 1 <= q <= L, got p={p}, q={q}, K={num_rx}, L={num_tx}")]
    BadSubsetSize {
        p: usize,
        q: usize,
        num_rx: usize,
        num_tx: usize,
    },
    #[error("{got} samples requested; at least {min} are required")]
    TooFewSamples { got: u64, min: u64 },
    #[error("power {power} exceeds the critical power {critical}")]
    PowerAboveCritical { power: f64, critical: f64 },
    #[error("power must be positive, got {0}")]
    NonPositivePower(f64),
}

/// Phase quantiser resolution and the critical-power slack `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinConfig {
    pub beta: usize,
    pub sigma: f64,
}

impl BinConfig {
    pub fn new(beta: usize, sigma: f64) -> Result<Self, PhyError> {
        if beta < 8 {
            return Err(PhyError::TooFewBins(beta));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(PhyError::NonPositiveSigma(sigma));
        }
        Ok(Self { beta, sigma })
    }

    /// `gamma = 1 - cos(2pi/beta)`.
    pub fn gamma(&self) -> f64 {
        1.0 - (TAU / self.beta as f64).cos()
    }
}

/// `B(theta) = floor(theta beta / 2pi)`.
pub fn bin_index(theta: f64, beta: usize) -> Result<usize, PhyError> {
    if !(0.0..TAU).contains(&theta) {
        return Err(PhyError::OutOfRangePhase(theta));
    }
    Ok(bin_unchecked(theta, beta))
}

fn bin_unchecked(theta: f64, beta: usize) -> usize {
    ((theta * beta as f64 / TAU) as usize).min(beta - 1)
}

/// `Phi(b) = 2pi b / beta + pi / beta`, the centre of bin `b`.
pub fn representative_phase(bin: usize, beta: usize) -> Result<f64, PhyError> {
    if bin >= beta {
        return Err(PhyError::BinOutOfRange { bin, beta });
    }
    Ok(rep_unchecked(bin, beta))
}

fn rep_unchecked(bin: usize, beta: usize) -> f64 {
    (2 * bin + 1) as f64 * PI / beta as f64
}

/// How phases are referenced before binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningMode {
    /// Bin the raw phases.
    Raw,
    /// For each transmitter subset, rotate every receiver's phases so that
    /// its gain from the first transmitter of the subset sits at phase zero.
    /// A common rotation per receiver leaves beamforming magnitudes unchanged
    /// and makes one pair favorable with probability `beta^-(p-1)(q-1)`.
    #[default]
    ReferenceAligned,
}

fn effective_phase(ch: &ChannelState, rx: usize, tx: usize, txs: &[usize], mode: BinningMode) -> f64 {
    match mode {
        BinningMode::Raw => ch.phase(rx, tx),
        BinningMode::ReferenceAligned => wrap_phase(ch.phase(rx, tx) - ch.phase(rx, txs[0])),
    }
}

/// Bin pattern of every receiver over `txs`, row-major `K x |txs|`.
fn bin_patterns(ch: &ChannelState, txs: &[usize], beta: usize, mode: BinningMode) -> Vec<usize> {
    let mut out = Vec::with_capacity(ch.num_rx() * txs.len());
    for k in 0..ch.num_rx() {
        for &l in txs {
            out.push(bin_unchecked(effective_phase(ch, k, l, txs, mode), beta));
        }
    }
    out
}

/// Receivers grouped by identical bin pattern over `txs`; only groups of at
/// least `p` receivers are returned, each sorted.
fn aligned_groups(ch: &ChannelState, txs: &[usize], p: usize, beta: usize, mode: BinningMode) -> Vec<Vec<usize>> {
    let q = txs.len();
    let pat = bin_patterns(ch, txs, beta, mode);
    let row = |k: usize| &pat[k * q..(k + 1) * q];
    let mut order: Vec<usize> = (0..ch.num_rx()).collect();
    order.sort_by(|&a, &b| row(a).cmp(row(b)).then(a.cmp(&b)));
    order
        .chunk_by(|&a, &b| row(a) == row(b))
        .filter(|g| g.len() >= p)
        .map(|g| {
            let mut g = g.to_vec();
            g.sort_unstable();
            g
        })
        .collect()
}

/// Whether every receiver in `spec` sees the same bin pattern from every
/// transmitter in `spec`.
pub fn is_favorable(ch: &ChannelState, spec: &MessageSpec, beta: usize, mode: BinningMode) -> bool {
    let txs = &spec.tx_subset;
    let first = spec.rx_subset[0];
    spec.rx_subset[1..].iter().all(|&k| {
        txs.iter().all(|&l| {
            bin_unchecked(effective_phase(ch, k, l, txs, mode), beta)
                == bin_unchecked(effective_phase(ch, first, l, txs, mode), beta)
        })
    })
}

/// The set of favorable pairs with `|K| = p`, `|L| = q`, ordered by
/// transmitter subset then receiver subset.
pub fn favorable_pairs(
    ch: &ChannelState,
    p: usize,
    q: usize,
    beta: usize,
    mode: BinningMode,
) -> Vec<MessageSpec> {
    let mut out = Vec::new();
    for txs in (0..ch.num_tx()).combinations(q) {
        let mut specs: Vec<MessageSpec> = aligned_groups(ch, &txs, p, beta, mode)
            .into_iter()
            .flat_map(|g| g.into_iter().combinations(p))
            .map(|rxs| MessageSpec {
                rx_subset: rxs,
                tx_subset: txs.clone(),
            })
            .collect();
        specs.sort();
        out.extend(specs);
    }
    out
}

/// Whether at least one `(p, q)` pair is favorable.
fn any_favorable(ch: &ChannelState, p: usize, q: usize, beta: usize, mode: BinningMode) -> bool {
    if p == 1 {
        return true;
    }
    (0..ch.num_tx())
        .combinations(q)
        .any(|txs| !aligned_groups(ch, &txs, p, beta, mode).is_empty())
}

/// Uniform choice among the favorable pairs.
pub fn schedule<R: Rng + ?Sized>(pairs: &[MessageSpec], rng: &mut R) -> Option<MessageSpec> {
    pairs.choose(rng).cloned()
}

/// `min_k |sum_l exp(j delta_kl)|^2` with `delta = theta - Phi(B(theta))`,
/// the coherent gain when each transmitter pre-rotates by its
/// representative phase.
pub fn beamform_gain(
    ch: &ChannelState,
    spec: &MessageSpec,
    beta: usize,
    mode: BinningMode,
) -> Result<f64, PhyError> {
    if !is_favorable(ch, spec, beta, mode) {
        return Err(PhyError::NotFavorable { spec: spec.clone() });
    }
    let txs = &spec.tx_subset;
    let gain = spec
        .rx_subset
        .iter()
        .map(|&k| {
            txs.iter()
                .map(|&l| {
                    let theta = effective_phase(ch, k, l, txs, mode);
                    Complex64::from_polar(1.0, theta - rep_unchecked(bin_unchecked(theta, beta), beta))
                })
                .sum::<Complex64>()
                .norm_sqr()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(gain)
}

/// Network size and pair shape of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhyScenario {
    pub num_rx: usize,
    pub num_tx: usize,
    pub p: usize,
    pub q: usize,
    pub beta: usize,
    pub mode: BinningMode,
}

impl PhyScenario {
    pub fn new(num_rx: usize, num_tx: usize, p: usize, q: usize, beta: usize) -> Result<Self, PhyError> {
        if beta < 8 {
            return Err(PhyError::TooFewBins(beta));
        }
        if p == 0 || q == 0 || p > num_rx || q > num_tx {
            return Err(PhyError::BadSubsetSize { p, q, num_rx, num_tx });
        }
        Ok(Self {
            num_rx,
            num_tx,
            p,
            q,
            beta,
            mode: BinningMode::ReferenceAligned,
        })
    }

    pub fn with_mode(mut self, mode: BinningMode) -> Self {
        self.mode = mode;
        self
    }

    /// `beta^-(p-1)(q-1)` for aligned binning, `beta^-(p-1)q` for raw.
    pub fn single_pair_probability(&self) -> f64 {
        let cols = match self.mode {
            BinningMode::Raw => self.q,
            BinningMode::ReferenceAligned => self.q - 1,
        };
        (self.beta as f64).powi(-(((self.p - 1) * cols) as i32))
    }

    /// `beta^-(p-1)(q-1)`, the duty-cycle lower bound.
    pub fn analytic_lower(&self) -> f64 {
        (self.beta as f64).powi(-(((self.p - 1) * (self.q - 1)) as i32))
    }

    pub fn num_specs(&self) -> f64 {
        binomial_f64(self.num_tx, self.q) * binomial_f64(self.num_rx, self.p)
    }

    /// `beta^-(p-1)(q-1) sigma / ((1 - gamma) L q)`.
    pub fn critical_power(&self, sigma: f64) -> f64 {
        let one_minus_gamma = (TAU / self.beta as f64).cos();
        self.analytic_lower() * sigma / (one_minus_gamma * (self.num_tx * self.q) as f64)
    }

    fn reference_pair(&self) -> MessageSpec {
        MessageSpec {
            rx_subset: (0..self.p).collect(),
            tx_subset: (0..self.q).collect(),
        }
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub favorable: usize,
    pub reference_favorable: bool,
    pub scheduled: Option<MessageSpec>,
    pub gain: Option<f64>,
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn num_chunks(samples: u64) -> u64 {
    samples.div_ceil(CHUNK_SLOTS)
}

/// Runs one chunk of slots, feeding each outcome to `visit`. With
/// `scheduling` off only the favorable indicator and reference pair are
/// evaluated.
fn run_chunk(
    scn: &PhyScenario,
    seed: u64,
    chunk: u64,
    samples: u64,
    scheduling: bool,
    mut visit: impl FnMut(SlotRecord),
) {
    let start = chunk * CHUNK_SLOTS;
    let end = (start + CHUNK_SLOTS).min(samples);
    let mut rng = chunk_rng(seed, chunk);
    let mut ch = ChannelState::random(scn.num_rx, scn.num_tx, &mut rng);
    let reference = scn.reference_pair();
    for slot in start..end {
        if slot > start {
            ch.redraw(&mut rng);
        }
        let reference_favorable = is_favorable(&ch, &reference, scn.beta, scn.mode);
        let record = if scheduling {
            let pairs = favorable_pairs(&ch, scn.p, scn.q, scn.beta, scn.mode);
            let scheduled = schedule(&pairs, &mut rng);
            let gain = scheduled
                .as_ref()
                .map(|s| beamform_gain(&ch, s, scn.beta, scn.mode).expect("scheduled pair is favorable"));
            SlotRecord {
                slot,
                favorable: pairs.len(),
                reference_favorable,
                scheduled,
                gain,
            }
        } else {
            SlotRecord {
                slot,
                favorable: any_favorable(&ch, scn.p, scn.q, scn.beta, scn.mode) as usize,
                reference_favorable,
                scheduled: None,
                gain: None,
            }
        };
        visit(record);
    }
}

/// Visits every slot in order; the same slots the estimators aggregate.
pub fn trace_slots(scn: &PhyScenario, samples: u64, seed: u64, mut visit: impl FnMut(SlotRecord)) {
    for chunk in 0..num_chunks(samples) {
        run_chunk(scn, seed, chunk, samples, true, &mut visit);
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    slots: u64,
    busy: u64,
    reference: u64,
    min_gain: Option<f64>,
    gain_violations: u64,
    tx_active: Vec<u64>,
    spec_counts: BTreeMap<MessageSpec, u64>,
}

impl Tally {
    fn add(&mut self, r: SlotRecord, gain_bound: f64, num_tx: usize) {
        self.slots += 1;
        self.busy += (r.favorable > 0) as u64;
        self.reference += r.reference_favorable as u64;
        if let (Some(spec), Some(g)) = (r.scheduled, r.gain) {
            self.min_gain = Some(self.min_gain.map_or(g, |m| m.min(g)));
            self.gain_violations += (g < gain_bound - 1e-12) as u64;
            if self.tx_active.is_empty() {
                self.tx_active = vec![0; num_tx];
            }
            for &l in &spec.tx_subset {
                self.tx_active[l] += 1;
            }
            *self.spec_counts.entry(spec).or_insert(0) += 1;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.slots += other.slots;
        self.busy += other.busy;
        self.reference += other.reference;
        self.min_gain = match (self.min_gain, other.min_gain) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.gain_violations += other.gain_violations;
        if self.tx_active.is_empty() {
            self.tx_active = other.tx_active;
        } else {
            for (a, b) in self.tx_active.iter_mut().zip(other.tx_active) {
                *a += b;
            }
        }
        for (k, v) in other.spec_counts {
            *self.spec_counts.entry(k).or_insert(0) += v;
        }
        self
    }
}

fn simulate(scn: &PhyScenario, samples: u64, seed: u64, scheduling: bool) -> Tally {
    let gain_bound = (TAU / scn.beta as f64).cos() * (scn.q * scn.q) as f64;
    (0..num_chunks(samples))
        .into_par_iter()
        .map(|chunk| {
            let mut t = Tally::default();
            run_chunk(scn, seed, chunk, samples, scheduling, |r| t.add(r, gain_bound, scn.num_tx));
            t
        })
        .reduce(Tally::default, Tally::merge)
}

fn binomial_stderr(freq: f64, n: u64) -> f64 {
    (freq * (1.0 - freq) / n as f64).sqrt()
}

fn check_samples(samples: u64) -> Result<(), PhyError> {
    if samples < MIN_SAMPLES {
        return Err(PhyError::TooFewSamples {
            got: samples,
            min: MIN_SAMPLES,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DutyCycleEstimate {
    /// Fraction of slots with at least one favorable pair.
    pub eta_hat: f64,
    pub stderr: f64,
    pub samples: u64,
    /// `beta^-(p-1)(q-1)`.
    pub analytic_lower: f64,
    /// Favorable frequency of the fixed pair `({0..p-1}, {0..q-1})`.
    pub single_pair_freq: f64,
    pub single_pair_stderr: f64,
    /// Exact probability of the fixed pair being favorable.
    pub single_pair_expected: f64,
    pub mode: BinningMode,
}

pub fn estimate_duty_cycle(scn: &PhyScenario, samples: u64, seed: u64) -> Result<DutyCycleEstimate, PhyError> {
    check_samples(samples)?;
    let t = simulate(scn, samples, seed, false);
    let n = t.slots;
    let eta_hat = t.busy as f64 / n as f64;
    let single = t.reference as f64 / n as f64;
    Ok(DutyCycleEstimate {
        eta_hat,
        stderr: binomial_stderr(eta_hat, n),
        samples: n,
        analytic_lower: scn.analytic_lower(),
        single_pair_freq: single,
        single_pair_stderr: binomial_stderr(single, n),
        single_pair_expected: scn.single_pair_probability(),
        mode: scn.mode,
    })
}

/// Empirical sum rate per unit energy of the scheduled beamforming scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhyRateReport {
    pub eta_hat: f64,
    pub stderr: f64,
    pub analytic_lower: f64,
    pub samples: u64,
    pub power: f64,
    pub critical_power: f64,
    /// Smallest beamforming gain over all scheduled slots.
    pub min_gain: Option<f64>,
    /// `cos(2pi/beta) q^2`.
    pub gain_bound: f64,
    pub gain_violations: u64,
    /// `eta log2(1 + g_min L P / (eta q)) / P`.
    pub sum_rate_per_unit_energy: f64,
    /// `L q / ln 2`.
    pub target: f64,
    /// `(1 - gamma) L q log2(1 + sigma) / sigma`, guaranteed below critical power.
    pub lemma1_floor: f64,
    /// `1 - sum_rate / target`.
    pub epsilon_achieved: f64,
    /// Fraction of slots each transmitter is active.
    pub tx_activity: Vec<f64>,
    /// `eta_hat q / L`.
    pub tx_activity_expected: f64,
    /// Selection count of every pair that was scheduled at least once.
    pub spec_counts: Vec<(MessageSpec, u64)>,
    /// `C(L, q) C(K, p)`.
    pub num_specs: f64,
}

pub fn phy_sum_rate_per_unit_energy(
    scn: &PhyScenario,
    bins: &BinConfig,
    power: f64,
    samples: u64,
    seed: u64,
) -> Result<PhyRateReport, PhyError> {
    check_samples(samples)?;
    if power.is_nan() || power <= 0.0 {
        return Err(PhyError::NonPositivePower(power));
    }
    let critical = scn.critical_power(bins.sigma);
    if power > critical * (1.0 + 1e-12) {
        return Err(PhyError::PowerAboveCritical { power, critical });
    }
    let t = simulate(scn, samples, seed, true);
    let n = t.slots;
    let eta_hat = t.busy as f64 / n as f64;
    let l = scn.num_tx as f64;
    let q = scn.q as f64;
    let sum_rate = match t.min_gain {
        Some(g) if eta_hat > 0.0 => eta_hat * (1.0 + g * l * power / (eta_hat * q)).log2() / power,
        _ => 0.0,
    };
    let target = l * q / LN_2;
    let one_minus_gamma = 1.0 - bins.gamma();
    let mut tx_active = t.tx_active;
    tx_active.resize(scn.num_tx, 0);
    Ok(PhyRateReport {
        eta_hat,
        stderr: binomial_stderr(eta_hat, n),
        analytic_lower: scn.analytic_lower(),
        samples: n,
        power,
        critical_power: critical,
        min_gain: t.min_gain,
        gain_bound: one_minus_gamma * q * q,
        gain_violations: t.gain_violations,
        sum_rate_per_unit_energy: sum_rate,
        target,
        lemma1_floor: one_minus_gamma * l * q * (1.0 + bins.sigma).log2() / bins.sigma,
        epsilon_achieved: 1.0 - sum_rate / target,
        tx_activity: tx_active.iter().map(|&c| c as f64 / n as f64).collect(),
        tx_activity_expected: eta_hat * q / l,
        spec_counts: t.spec_counts.into_iter().collect(),
        num_specs: scn.num_specs(),
    })
}

/// All `C(n, k)` subsets, re-exported for callers enumerating pairs.
pub fn pair_universe(num_rx: usize, num_tx: usize, p: usize, q: usize) -> Vec<MessageSpec> {
    subsets(num_tx, q)
        .into_iter()
        .flat_map(|txs| {
            subsets(num_rx, p).into_iter().map(move |rxs| MessageSpec {
                rx_subset: rxs,
                tx_subset: txs.clone(),
            })
        })
        .collect()
}
