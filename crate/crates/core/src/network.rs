//! Network-layer placement and delivery over symbolic file chunks.
//!
//! Two constructions are provided:
//!
//! - **Multicasting**: every file is split into `C(L, lambda)` sublibrary
//!   subfiles, one per transmitter subset of size `lambda`, and each subfile is
//!   further split into `C(K, kappa)` parts indexed by receiver subsets of size
//!   `kappa`. Delivery sends one coded message per (transmitter subset,
//!   receiver subset of size `kappa + 1`) pair.
//! - **Beamforming**: every receiver caches the same common part `W_{n,0}` of
//!   size `M_r/N` of each file; the rest is split over transmitter subsets of
//!   size `lambda_tilde`. Delivery is uncoded, one message per distinct
//!   requested file and transmitter subset.
//!
//! XOR payloads are kept symbolic (a list of chunk ids), so decodability is
//! checked by set algebra rather than on bit arrays.
//!
//! Beamforming part sizes are `(1 - M_r/N) / C(L, lambda_tilde)`; the
//! unnormalised `(N - M_r) / C(L, lambda_tilde)` would not sum to one file.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{binomial_f64, subsets};
use crate::system::{
    BfCorner, CornerParams, Demand, DemandError, McCorner, MessageSpec, NonIntegralCorner,
    SystemConfig, MEMORY_TOL,
};

/// Which placement/delivery construction is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[serde(rename = "mc")]
    Multicast,
    #[serde(rename = "bf")]
    Beamform,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Multicast => "mc",
            Scheme::Beamform => "bf",
        }
    }
}

/// Structured tag of a file piece. Subsets are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ChunkLabel {
    /// Part of sublibrary `tx` cached by the receivers in `rx`.
    Multicast { tx: Vec<usize>, rx: Vec<usize> },
    /// `W_{n,0}`, cached by every receiver.
    Common,
    /// `W_{n,L}`, shared by the transmitters in `tx`.
    Beamform { tx: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ChunkId {
    pub file: usize,
    pub label: ChunkLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chunk {
    pub id: ChunkId,
    /// Fraction of one file.
    pub size: f64,
}

/// Cache contents of every transmitter and receiver after placement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementMap {
    pub scheme: Scheme,
    pub num_files: usize,
    pub num_rx: usize,
    pub num_tx: usize,
    /// Size of every non-empty chunk of every file.
    pub catalog: BTreeMap<ChunkId, f64>,
    pub tx_caches: Vec<BTreeSet<ChunkId>>,
    pub rx_caches: Vec<BTreeSet<ChunkId>>,
}

/// A bit pipe together with its symbolic payload.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message {
    pub spec: MessageSpec,
    /// Chunks XOR-ed together.
    pub payload: Vec<ChunkId>,
    /// `v_pq`: bits carried, as a fraction of a file.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error(transparent)]
    NonIntegralCorner(#[from] NonIntegralCorner),
    #[error("placement does not match the configuration or scheme: {0}")]
    PlacementMismatch(String),
    #[error(transparent)]
    Demand(#[from] DemandError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetViolation {
    #[error("transmitter {node} stores {used} files, budget M_t = {budget}")]
    Transmitter { node: usize, used: f64, budget: f64 },
    #[error("receiver {node} stores {used} files, budget M_r = {budget}")]
    Receiver { node: usize, used: f64, budget: f64 },
}

impl PlacementMap {
    fn empty(scheme: Scheme, cfg: &SystemConfig) -> Self {
        Self {
            scheme,
            num_files: cfg.num_files,
            num_rx: cfg.num_rx,
            num_tx: cfg.num_tx,
            catalog: BTreeMap::new(),
            tx_caches: vec![BTreeSet::new(); cfg.num_tx],
            rx_caches: vec![BTreeSet::new(); cfg.num_rx],
        }
    }

    fn usage(&self, cache: &BTreeSet<ChunkId>) -> f64 {
        cache.iter().map(|c| self.catalog[c]).sum()
    }

    pub fn tx_usage(&self, tx: usize) -> f64 {
        self.usage(&self.tx_caches[tx])
    }

    pub fn rx_usage(&self, rx: usize) -> f64 {
        self.usage(&self.rx_caches[rx])
    }

    pub fn chunk_size(&self, id: &ChunkId) -> Option<f64> {
        self.catalog.get(id).copied()
    }

    /// All non-empty chunks of file `n`.
    pub fn file_chunks(&self, n: usize) -> impl Iterator<Item = Chunk> + '_ {
        self.catalog
            .iter()
            .filter(move |(id, _)| id.file == n)
            .map(|(id, &size)| Chunk {
                id: id.clone(),
                size,
            })
    }

    /// Total size of the chunks of file `n`; one for a complete partition.
    pub fn file_size(&self, n: usize) -> f64 {
        self.file_chunks(n).map(|c| c.size).sum()
    }

    pub fn check_budgets(&self, cfg: &SystemConfig) -> Result<(), BudgetViolation> {
        for node in 0..self.num_tx {
            let used = self.tx_usage(node);
            if used > cfg.tx_mem + MEMORY_TOL {
                return Err(BudgetViolation::Transmitter {
                    node,
                    used,
                    budget: cfg.tx_mem,
                });
            }
        }
        for node in 0..self.num_rx {
            let used = self.rx_usage(node);
            if used > cfg.rx_mem + MEMORY_TOL {
                return Err(BudgetViolation::Receiver {
                    node,
                    used,
                    budget: cfg.rx_mem,
                });
            }
        }
        Ok(())
    }

    fn check_matches(&self, scheme: Scheme, cfg: &SystemConfig) -> Result<(), NetworkError> {
        if self.scheme != scheme {
            return Err(NetworkError::PlacementMismatch(format!(
                "placement built for {:?}, delivery for {:?}",
                self.scheme, scheme
            )));
        }
        if (self.num_files, self.num_rx, self.num_tx)
            != (cfg.num_files, cfg.num_rx, cfg.num_tx)
        {
            return Err(NetworkError::PlacementMismatch(format!(
                "placement dimensions (N={}, K={}, L={}) differ from configuration (N={}, K={}, L={})",
                self.num_files, self.num_rx, self.num_tx, cfg.num_files, cfg.num_rx, cfg.num_tx
            )));
        }
        Ok(())
    }
}

/// Multicasting placement at an integral `(kappa, lambda)` corner.
pub fn mc_placement(cfg: &SystemConfig, cp: &CornerParams) -> Result<PlacementMap, NetworkError> {
    let McCorner { kappa, lambda } = cp.multicast(cfg)?;
    let tx_sets = subsets(cfg.num_tx, lambda);
    let rx_sets = subsets(cfg.num_rx, kappa);
    let size = 1.0 / (tx_sets.len() as f64 * rx_sets.len() as f64);

    let mut pl = PlacementMap::empty(Scheme::Multicast, cfg);
    for file in 0..cfg.num_files {
        for tx in &tx_sets {
            for rx in &rx_sets {
                let id = ChunkId {
                    file,
                    label: ChunkLabel::Multicast {
                        tx: tx.clone(),
                        rx: rx.clone(),
                    },
                };
                for &l in tx {
                    pl.tx_caches[l].insert(id.clone());
                }
                for &k in rx {
                    pl.rx_caches[k].insert(id.clone());
                }
                pl.catalog.insert(id, size);
            }
        }
    }
    Ok(pl)
}

/// Coded multicasting delivery: for every transmitter subset `T` of size
/// `lambda` and receiver subset `S` of size `kappa + 1`, the XOR over `k` in
/// `S` of the part of `W_{d_k}` in sublibrary `T` indexed by `S \ {k}`.
pub fn mc_delivery(
    pl: &PlacementMap,
    dem: &Demand,
    cfg: &SystemConfig,
    cp: &CornerParams,
) -> Result<Vec<Message>, NetworkError> {
    pl.check_matches(Scheme::Multicast, cfg)?;
    dem.check(cfg)?;
    let McCorner { kappa, lambda } = cp.multicast(cfg)?;
    if kappa == cfg.num_rx {
        return Ok(Vec::new());
    }
    let load = mc_message_load(cfg.num_rx, cfg.num_tx, kappa, lambda);

    let mut msgs = Vec::new();
    for tx in subsets(cfg.num_tx, lambda) {
        for rx in subsets(cfg.num_rx, kappa + 1) {
            let payload = rx
                .iter()
                .map(|&k| ChunkId {
                    file: dem.requests[k],
                    label: ChunkLabel::Multicast {
                        tx: tx.clone(),
                        rx: rx.iter().copied().filter(|&j| j != k).collect(),
                    },
                })
                .collect::<Vec<_>>();
            if let Some(missing) = payload.iter().find(|c| !pl.catalog.contains_key(c)) {
                return Err(NetworkError::PlacementMismatch(format!(
                    "chunk {missing:?} not in placement"
                )));
            }
            msgs.push(Message {
                spec: MessageSpec {
                    rx_subset: rx,
                    tx_subset: tx.clone(),
                },
                payload,
                load,
            });
        }
    }
    Ok(msgs)
}

/// `v_pq = (K - kappa)/(kappa + 1) / (C(L, lambda) C(K, kappa + 1))`.
fn mc_message_load(k: usize, l: usize, kappa: usize, lambda: usize) -> f64 {
    if kappa >= k {
        return 0.0;
    }
    (k - kappa) as f64 / (kappa + 1) as f64 / (binomial_f64(l, lambda) * binomial_f64(k, kappa + 1))
}

/// Beamforming placement at an integral `lambda_tilde`.
pub fn bf_placement(cfg: &SystemConfig, cp: &CornerParams) -> Result<PlacementMap, NetworkError> {
    let BfCorner { lambda_tilde } = cp.beamform(cfg)?;
    let common = cfg.rx_fraction();
    let tx_sets = subsets(cfg.num_tx, lambda_tilde);
    let part = bf_part_size(cfg, lambda_tilde);

    let mut pl = PlacementMap::empty(Scheme::Beamform, cfg);
    for file in 0..cfg.num_files {
        if common > 0.0 {
            let id = ChunkId {
                file,
                label: ChunkLabel::Common,
            };
            for cache in &mut pl.rx_caches {
                cache.insert(id.clone());
            }
            pl.catalog.insert(id, common);
        }
        if part > 0.0 {
            for tx in &tx_sets {
                let id = ChunkId {
                    file,
                    label: ChunkLabel::Beamform { tx: tx.clone() },
                };
                for &l in tx {
                    pl.tx_caches[l].insert(id.clone());
                }
                pl.catalog.insert(id, part);
            }
        }
    }
    Ok(pl)
}

/// `(1 - M_r/N) / C(L, lambda_tilde)`.
fn bf_part_size(cfg: &SystemConfig, lambda_tilde: usize) -> f64 {
    let rest = 1.0 - cfg.rx_fraction();
    if cfg.rx_holds_library() || rest <= 0.0 {
        0.0
    } else {
        rest / binomial_f64(cfg.num_tx, lambda_tilde)
    }
}

/// Uncoded beamforming delivery: for every distinct requested file and every
/// transmitter subset of size `lambda_tilde`, the part `W_{d,L}`. The message
/// is addressed to every receiver requesting that file, so duplicate demands
/// share one message.
pub fn bf_delivery(
    pl: &PlacementMap,
    dem: &Demand,
    cfg: &SystemConfig,
    cp: &CornerParams,
) -> Result<Vec<Message>, NetworkError> {
    pl.check_matches(Scheme::Beamform, cfg)?;
    dem.check(cfg)?;
    let BfCorner { lambda_tilde } = cp.beamform(cfg)?;
    let load = bf_part_size(cfg, lambda_tilde);
    if load == 0.0 {
        return Ok(Vec::new());
    }

    let tx_sets = subsets(cfg.num_tx, lambda_tilde);
    let mut msgs = Vec::new();
    for file in dem.distinct_files() {
        let receivers: Vec<usize> = (0..cfg.num_rx)
            .filter(|&k| dem.requests[k] == file)
            .collect();
        for tx in &tx_sets {
            let id = ChunkId {
                file,
                label: ChunkLabel::Beamform { tx: tx.clone() },
            };
            if !pl.catalog.contains_key(&id) {
                return Err(NetworkError::PlacementMismatch(format!(
                    "chunk {id:?} not in placement"
                )));
            }
            msgs.push(Message {
                spec: MessageSpec {
                    rx_subset: receivers.clone(),
                    tx_subset: tx.clone(),
                },
                payload: vec![id],
                load,
            });
        }
    }
    Ok(msgs)
}

/// Per-receiver decodability: receiver `k` succeeds iff every chunk of
/// `W_{d_k}` is cached or can be peeled from messages addressed to `k`, by
/// cancelling already known chunks from each XOR.
pub fn verify_decodability(pl: &PlacementMap, msgs: &[Message], dem: &Demand) -> Vec<bool> {
    (0..pl.num_rx)
        .map(|k| {
            let Some(&want) = dem.requests.get(k) else {
                return false;
            };
            let mut known: HashSet<&ChunkId> = pl.rx_caches[k].iter().collect();
            let mut pending: Vec<&Message> = msgs
                .iter()
                .filter(|m| m.spec.rx_subset.contains(&k))
                .collect();
            loop {
                let before = pending.len();
                pending.retain(|m| {
                    let mut unknown = m.payload.iter().filter(|c| !known.contains(c));
                    match (unknown.next(), unknown.next()) {
                        (None, _) => false,
                        (Some(c), None) => {
                            known.insert(c);
                            false
                        }
                        _ => true,
                    }
                });
                if pending.len() == before {
                    break;
                }
            }
            pl.catalog
                .keys()
                .filter(|id| id.file == want)
                .all(|id| known.contains(id))
        })
        .collect()
}

/// Every payload chunk is cached at every sender of its message.
pub fn payloads_available(pl: &PlacementMap, msgs: &[Message]) -> bool {
    msgs.iter().all(|m| {
        m.spec
            .tx_subset
            .iter()
            .all(|&l| m.payload.iter().all(|c| pl.tx_caches[l].contains(c)))
    })
}

/// Message-set parameters and per-message load of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkLoad {
    pub scheme: Scheme,
    pub p: usize,
    pub q: usize,
    pub v_pq: f64,
    /// Receiver groups the physical layer serves: `K` for multicasting,
    /// `min{N, K}` distinct requests for beamforming.
    pub rx_groups: usize,
}

/// `(p, q, v_pq)` for a scheme at an integral corner. At `M_r = N` the load is
/// zero.
pub fn network_load(
    scheme: Scheme,
    cfg: &SystemConfig,
    cp: &CornerParams,
) -> Result<NetworkLoad, NetworkError> {
    match scheme {
        Scheme::Multicast => {
            let McCorner { kappa, lambda } = cp.multicast(cfg)?;
            Ok(NetworkLoad {
                scheme,
                p: kappa + 1,
                q: lambda,
                v_pq: mc_message_load(cfg.num_rx, cfg.num_tx, kappa, lambda),
                rx_groups: cfg.num_rx,
            })
        }
        Scheme::Beamform => {
            let BfCorner { lambda_tilde } = cp.beamform(cfg)?;
            Ok(NetworkLoad {
                scheme,
                p: 1,
                q: lambda_tilde,
                v_pq: bf_part_size(cfg, lambda_tilde),
                rx_groups: cfg.distinct_demands(),
            })
        }
    }
}

/// Placement followed by delivery for the given demand.
pub fn build(
    scheme: Scheme,
    cfg: &SystemConfig,
    dem: &Demand,
) -> Result<(PlacementMap, Vec<Message>), NetworkError> {
    let cp = cfg.corner_params();
    let (pl, msgs) = match scheme {
        Scheme::Multicast => {
            let pl = mc_placement(cfg, &cp)?;
            let m = mc_delivery(&pl, dem, cfg, &cp)?;
            (pl, m)
        }
        Scheme::Beamform => {
            let pl = bf_placement(cfg, &cp)?;
            let m = bf_delivery(&pl, dem, cfg, &cp)?;
            (pl, m)
        }
    };
    Ok((pl, msgs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, k: usize, l: usize, mr: f64, mt: f64) -> SystemConfig {
        SystemConfig::new(n, k, l, mr, mt, 0.01)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn mc_figure_placement() {
        let c = cfg(3, 3, 3, 1.0, 2.0);
        let pl = mc_placement(&c, &c.corner_params()).unwrap();
        // 3 sublibraries x 3 receiver parts per file
        for n in 0..3 {
            assert_eq!(pl.file_chunks(n).count(), 9);
            assert!(close(pl.file_size(n), 1.0));
        }
        // each transmitter holds 2 of the 3 sublibraries of every file
        for l in 0..3 {
            let subfiles: BTreeSet<_> = pl.tx_caches[l]
                .iter()
                .filter(|c| c.file == 0)
                .map(|c| match &c.label {
                    ChunkLabel::Multicast { tx, .. } => tx.clone(),
                    _ => unreachable!(),
                })
                .collect();
            assert_eq!(subfiles.len(), 2);
            assert!(close(pl.tx_usage(l), 2.0));
            assert!(close(pl.rx_usage(l), 1.0));
        }
    }

    #[test]
    fn mc_zero_receiver_memory_leaves_receivers_empty() {
        let c = cfg(2, 2, 2, 0.0, 2.0);
        let pl = mc_placement(&c, &c.corner_params()).unwrap();
        assert!(pl.rx_caches.iter().all(BTreeSet::is_empty));
    }

    #[test]
    fn mc_budget_is_met_exactly() {
        let c = cfg(2, 2, 2, 1.0, 1.0);
        let pl = mc_placement(&c, &c.corner_params()).unwrap();
        for l in 0..2 {
            assert!(close(pl.tx_usage(l), 1.0));
        }
        for k in 0..2 {
            assert!(close(pl.rx_usage(k), 1.0));
        }
    }

    #[test]
    fn mc_figure_delivery() {
        let c = cfg(3, 3, 3, 1.0, 2.0);
        let cp = c.corner_params();
        let pl = mc_placement(&c, &cp).unwrap();
        let d = Demand::worst_case(&c);
        let msgs = mc_delivery(&pl, &d, &c, &cp).unwrap();
        assert_eq!(msgs.len(), 9);
        assert!(msgs.iter().all(|m| close(m.load, 1.0 / 9.0)));
        assert!(msgs.iter().all(|m| m.spec.p() == 2 && m.spec.q() == 2));
        assert!(payloads_available(&pl, &msgs));
        assert!(verify_decodability(&pl, &msgs, &d).iter().all(|&ok| ok));
    }

    #[test]
    fn mc_two_by_two_delivery() {
        let c = cfg(2, 2, 2, 1.0, 1.0);
        let cp = c.corner_params();
        let pl = mc_placement(&c, &cp).unwrap();
        let d = Demand::new(vec![0, 1], &c).unwrap();
        let msgs = mc_delivery(&pl, &d, &c, &cp).unwrap();
        assert_eq!(msgs.len(), 2);
        for (i, m) in msgs.iter().enumerate() {
            assert!(close(m.load, 0.25));
            assert_eq!(m.spec.tx_subset, vec![i]);
            assert_eq!(
                m.payload,
                vec![
                    ChunkId {
                        file: 0,
                        label: ChunkLabel::Multicast { tx: vec![i], rx: vec![1] }
                    },
                    ChunkId {
                        file: 1,
                        label: ChunkLabel::Multicast { tx: vec![i], rx: vec![0] }
                    },
                ]
            );
        }
        assert_eq!(verify_decodability(&pl, &msgs, &d), vec![true, true]);
    }

    #[test]
    fn mc_full_receiver_cache_needs_no_messages() {
        let c = cfg(2, 2, 2, 2.0, 1.0);
        let cp = c.corner_params();
        let pl = mc_placement(&c, &cp).unwrap();
        let d = Demand::worst_case(&c);
        let msgs = mc_delivery(&pl, &d, &c, &cp).unwrap();
        assert!(msgs.is_empty());
        assert!(verify_decodability(&pl, &msgs, &d).iter().all(|&ok| ok));
    }

    #[test]
    fn bf_figure_placement_and_delivery() {
        let c = cfg(3, 3, 3, 1.0, 2.0);
        let cp = c.corner_params();
        let pl = bf_placement(&c, &cp).unwrap();
        for l in 0..3 {
            assert!(close(pl.tx_usage(l), 2.0));
        }
        for n in 0..3 {
            assert!(close(pl.file_size(n), 1.0));
        }
        let d = Demand::worst_case(&c);
        let msgs = bf_delivery(&pl, &d, &c, &cp).unwrap();
        assert_eq!(msgs.len(), 3);
        assert!(msgs.iter().all(|m| close(m.load, 2.0 / 3.0)));
        assert!(verify_decodability(&pl, &msgs, &d).iter().all(|&ok| ok));
    }

    #[test]
    fn bf_full_transmitter_caches_replicate_library() {
        let c = cfg(3, 2, 4, 0.0, 3.0);
        let cp = c.corner_params();
        assert_eq!(cp.beamform(&c).unwrap().lambda_tilde, 4);
        let pl = bf_placement(&c, &cp).unwrap();
        for l in 0..4 {
            assert!(close(pl.tx_usage(l), 3.0));
        }
        assert!(pl.rx_caches.iter().all(BTreeSet::is_empty));
    }

    #[test]
    fn bf_partial_sharing_example() {
        let c = cfg(4, 1, 4, 2.0, 1.0);
        let cp = c.corner_params();
        assert_eq!(cp.beamform(&c).unwrap().lambda_tilde, 2);
        let pl = bf_placement(&c, &cp).unwrap();
        for l in 0..4 {
            assert!(close(pl.tx_usage(l), 1.0));
        }
        let d = Demand::worst_case(&c);
        let msgs = bf_delivery(&pl, &d, &c, &cp).unwrap();
        assert_eq!(msgs.len(), 6);
        assert!(msgs.iter().all(|m| close(m.load, 1.0 / 12.0)));
        let total: f64 = msgs.iter().map(|m| m.load).sum();
        assert!(close(total, 0.5));
    }

    #[test]
    fn bf_full_receiver_memory_needs_no_messages() {
        let c = cfg(3, 2, 2, 3.0, 0.0);
        let cp = c.corner_params();
        let pl = bf_placement(&c, &cp).unwrap();
        let d = Demand::worst_case(&c);
        let msgs = bf_delivery(&pl, &d, &c, &cp).unwrap();
        assert!(msgs.is_empty());
        assert!(verify_decodability(&pl, &msgs, &d).iter().all(|&ok| ok));
    }

    #[test]
    fn deleting_a_bf_message_breaks_its_receiver() {
        let c = cfg(3, 3, 3, 1.0, 2.0);
        let d = Demand::worst_case(&c);
        let (pl, mut msgs) = build(Scheme::Beamform, &c, &d).unwrap();
        let removed = msgs.remove(1);
        let ok = verify_decodability(&pl, &msgs, &d);
        for (k, &decoded) in ok.iter().enumerate() {
            assert_eq!(decoded, !removed.spec.rx_subset.contains(&k));
        }
    }

    #[test]
    fn duplicate_demands_share_bf_messages() {
        let c = cfg(2, 3, 2, 1.0, 1.0);
        let d = Demand::new(vec![1, 1, 0], &c).unwrap();
        let (pl, msgs) = build(Scheme::Beamform, &c, &d).unwrap();
        // lambda_tilde = 2: one transmitter subset, two distinct files
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].spec.rx_subset, vec![0, 1]);
        assert!(verify_decodability(&pl, &msgs, &d).iter().all(|&ok| ok));
    }

    #[test]
    fn delivery_rejects_wrong_placement() {
        let c = cfg(3, 3, 3, 1.0, 2.0);
        let cp = c.corner_params();
        let pl = bf_placement(&c, &cp).unwrap();
        let d = Demand::worst_case(&c);
        assert!(matches!(
            mc_delivery(&pl, &d, &c, &cp),
            Err(NetworkError::PlacementMismatch(_))
        ));
        let other = cfg(3, 2, 3, 1.0, 2.0);
        let pl = mc_placement(&c, &cp).unwrap();
        assert!(matches!(
            mc_delivery(&pl, &Demand::worst_case(&other), &other, &other.corner_params()),
            Err(NetworkError::PlacementMismatch(_))
        ));
    }

    #[test]
    fn non_integral_corner_is_rejected() {
        let c = cfg(3, 3, 3, 0.5, 2.0);
        let cp = c.corner_params();
        assert!(matches!(
            mc_placement(&c, &cp),
            Err(NetworkError::NonIntegralCorner(_))
        ));
        assert!(matches!(
            bf_placement(&c, &cp),
            Err(NetworkError::NonIntegralCorner(_))
        ));
        assert!(network_load(Scheme::Multicast, &c, &cp).is_err());
    }

    #[test]
    fn network_load_examples() {
        let c = cfg(3, 3, 3, 1.0, 2.0);
        let cp = c.corner_params();
        let mc = network_load(Scheme::Multicast, &c, &cp).unwrap();
        assert_eq!((mc.p, mc.q), (2, 2));
        assert!(close(mc.v_pq, 1.0 / 9.0));
        let bf = network_load(Scheme::Beamform, &c, &cp).unwrap();
        assert_eq!((bf.p, bf.q), (1, 3));
        assert!(close(bf.v_pq, 2.0 / 3.0));

        for l in 1..5 {
            for k in 1..5 {
                let c = cfg(2, k, l, 0.0, 2.0);
                let mc = network_load(Scheme::Multicast, &c, &c.corner_params()).unwrap();
                assert_eq!((mc.p, mc.q), (1, l));
                assert!(close(mc.v_pq, 1.0));
            }
        }
    }

    #[test]
    fn load_totals_match_accounting() {
        let c = cfg(4, 4, 3, 2.0, 4.0);
        let d = Demand::worst_case(&c);
        let (_, msgs) = build(Scheme::Multicast, &c, &d).unwrap();
        let total: f64 = msgs.iter().map(|m| m.load).sum();
        // (K - kappa)/(kappa + 1) with kappa = 2
        assert!(close(total, 2.0 / 3.0));
        let (_, msgs) = build(Scheme::Beamform, &c, &d).unwrap();
        let total: f64 = msgs.iter().map(|m| m.load).sum();
        assert!(close(total, 4.0 * 0.5));
    }

    proptest::proptest! {
        #[test]
        fn random_corners_decode(
            n in 1usize..5, k in 1usize..5, l in 1usize..5,
            kappa in 0usize..5, j in 1usize..5, bf in proptest::bool::ANY,
            seed in proptest::collection::vec(0usize..5, 4),
        ) {
            let kappa = kappa.min(k);
            let j = j.min(l);
            let n_f = n as f64;
            let mr = kappa as f64 * n_f / k as f64;
            let (scheme, mt) = if bf {
                (Scheme::Beamform, j as f64 * (n_f - mr) / l as f64)
            } else {
                (Scheme::Multicast, j as f64 * n_f / l as f64)
            };
            let c = cfg(n, k, l, mr, mt);
            if scheme == Scheme::Beamform && c.rx_holds_library() {
                return Ok(());
            }
            let dem = Demand::new(seed[..k].iter().map(|&f| f % n).collect(), &c).unwrap();
            let (pl, msgs) = build(scheme, &c, &dem).unwrap();
            proptest::prop_assert!(pl.check_budgets(&c).is_ok());
            proptest::prop_assert!(payloads_available(&pl, &msgs));
            proptest::prop_assert!(verify_decodability(&pl, &msgs, &dem).into_iter().all(|b| b));
            for f in 0..n {
                proptest::prop_assert!((pl.file_size(f) - 1.0).abs() < 1e-9);
            }
            let load = network_load(scheme, &c, &c.corner_params()).unwrap();
            for m in &msgs {
                proptest::prop_assert_eq!(m.spec.q(), load.q);
                proptest::prop_assert!((m.load - load.v_pq).abs() < 1e-12);
            }
        }
    }
}
