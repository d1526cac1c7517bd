//! End-to-end checks across the layers: symbolic network construction,
//! simulated physical layer, separation and the converse bounds.

use std::f64::consts::LN_2;

use cachebeam::converse::{bc_upper_bound, mac_upper_bound};
use cachebeam::gap::{gap_bc_sweep, gap_mac_sweep, verify_case_split};
use cachebeam::network::{build, network_load, verify_decodability, Scheme};
use cachebeam::phy::{phy_sum_rate_per_unit_energy, BinConfig, PhyScenario};
use cachebeam::rate::{
    per_message_phy_rate, rate_bf, rate_combined, rate_from_separation, rate_mc, RateValue,
};
use cachebeam::{Demand, SystemConfig};

fn cfg(n: usize, k: usize, l: usize, mr: f64, mt: f64) -> SystemConfig {
    SystemConfig::new(n, k, l, mr, mt, 1.0)
}

#[test]
fn simulated_phy_through_separation_reaches_scheme_rates() {
    let c = cfg(3, 3, 3, 1.0, 2.0);
    let bins = BinConfig::new(64, 0.01).unwrap();
    for (scheme, formula) in [
        (Scheme::Multicast, rate_mc(&c).unwrap()),
        (Scheme::Beamform, rate_bf(&c).unwrap()),
    ] {
        let load = network_load(scheme, &c, &c.corner_params()).unwrap();
        let scn = PhyScenario::new(load.rx_groups, c.num_tx, load.p, load.q, 64).unwrap();
        let sim = phy_sum_rate_per_unit_energy(&scn, &bins, scn.critical_power(bins.sigma), 100_000, 3)
            .unwrap();
        let per_message = RateValue::Finite(sim.sum_rate_per_unit_energy / scn.num_specs());
        let achieved = rate_from_separation(per_message, load.v_pq).unwrap().as_f64();
        let target = formula.as_f64();
        assert!(achieved >= 0.95 * target, "{scheme:?}: {achieved} vs {target}");
        assert!(achieved <= target * 1.0001);

        let ideal = per_message_phy_rate(c.num_tx, load.rx_groups, load.p, load.q);
        let exact = rate_from_separation(ideal, load.v_pq).unwrap().as_f64();
        assert!((exact - target).abs() < 1e-9 * target);
    }
}

#[test]
fn constructions_decode_every_demand_at_figure_configuration() {
    let c = cfg(3, 3, 3, 1.0, 2.0);
    for scheme in [Scheme::Multicast, Scheme::Beamform] {
        for dem in Demand::all(&c) {
            let (pl, msgs) = build(scheme, &c, &dem).unwrap();
            assert!(pl.check_budgets(&c).is_ok());
            assert!(verify_decodability(&pl, &msgs, &dem).iter().all(|&b| b));
        }
    }
}

#[test]
fn small_sweeps_respect_theorem_constants() {
    let bc = gap_bc_sweep(20, 20, 10).unwrap();
    assert!(bc.summary.max_ratio <= 12.0);
    assert_eq!(bc.summary.sandwich_violations, 0);
    for r in &bc.rows {
        let ub = bc_upper_bound(&r.config).unwrap().value.as_f64();
        assert_eq!(ub, r.converse);
        assert_eq!(rate_combined(&r.config).unwrap().as_f64(), r.achievable);
    }

    let mac = gap_mac_sweep(15, 15, 10).unwrap();
    assert!(mac.summary.max_ratio <= 64.0);
    assert!(mac.summary.case1_max <= 8.0);
    for r in mac.rows.iter().step_by(97) {
        assert_eq!(mac_upper_bound(&r.config).unwrap().value_per_unit_energy, r.converse);
        assert!(verify_case_split(&r.config).unwrap().holds);
    }
}

#[test]
fn point_to_point_limits_agree() {
    let c = cfg(5, 1, 1, 0.0, 5.0);
    let one = 1.0 / LN_2;
    assert!((rate_combined(&c).unwrap().as_f64() - one).abs() < 1e-12);
    assert!((mac_upper_bound(&c).unwrap().value_per_unit_energy - one).abs() < 1e-12);
    assert!((bc_upper_bound(&c).unwrap().value.as_f64() - one).abs() < 1e-12);
}
