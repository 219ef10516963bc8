mod common;

use common::*;
use proptest::prelude::*;
use tfeq_core::assign::{
    assign_dynamic_queue, assign_static_ue, shortest_path_skim, DtaParams, StaMethod, StaParams,
};
use tfeq_core::scenario::{generate, GeneratorParams};
use tfeq_core::*;

/// Equal-time split of `q` over two BPR links, found by bisection.
fn oracle_split(t0: [f64; 2], c: [f64; 2], q: f64) -> [f64; 2] {
    let t = |i: usize, x: f64| t0[i] * (1.0 + 0.15 * (x / c[i]).powi(4));
    if t(0, q) <= t(1, 0.0) {
        return [q, 0.0];
    }
    if t(1, q) <= t(0, 0.0) {
        return [0.0, q];
    }
    let (mut lo, mut hi) = (0.0, q);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t(0, mid) < t(1, q - mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    [x, q - x]
}

fn single_od(net: &Network, q: f64) -> OdMatrix {
    OdMatrix::new(net.zones().clone(), vec![0.0, q, 0.0, 0.0], "AM").unwrap()
}

fn grid(zones: usize, seed: u64) -> Network {
    Network::new(generate(&GeneratorParams::new(zones, seed)).unwrap().network).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_link_flows_match_bisection(
        t0 in (1.0f64..30.0, 1.0f64..30.0),
        c in (200.0f64..3000.0, 200.0f64..3000.0),
        q in 10.0f64..5000.0,
    ) {
        let net = parallel_links(&[(t0.0, c.0), (t0.1, c.1)]);
        let r = assign_static_ue(&single_od(&net, q), &net, &StaParams::default()).unwrap();
        let want = oracle_split([t0.0, t0.1], [c.0, c.1], q);
        for (state, w) in r.link_states.iter().zip(want) {
            prop_assert!((state.flow - w).abs() <= 0.005 * q);
        }
        prop_assert!(r.gap.unwrap() < 1e-4);
    }

    #[test]
    fn dta_conserves_vehicles(seed in 0u64..1000, scale in 0.0f64..3.0) {
        let net = grid(9, seed);
        let z = net.zones().len();
        let values: Vec<f64> = (0..z * z)
            .map(|c| if c / z == c % z { 0.0 } else { ((c * 37 + seed as usize) % 400) as f64 * scale })
            .collect();
        let n = OdMatrix::new(net.zones().clone(), values, "AM").unwrap();
        let r = assign_dynamic_queue(&n, &net, &DtaParams::default()).unwrap();
        let mut queued = 0.0;
        for s in &r.link_states {
            prop_assert!(s.queue >= 0.0 && s.exited >= 0.0);
            prop_assert!((s.flow - s.exited - s.queue).abs() <= 1e-6 * (1.0 + s.flow));
            queued += s.queue;
        }
        prop_assert!((queued - r.spillover).abs() <= 1e-6 * (1.0 + queued));
        for o in 0..z {
            for d in 0..z {
                prop_assert!(r.skim.get(o, d).is_finite() && r.skim.get(o, d) >= 0.0);
            }
        }
    }

    #[test]
    fn sta_skims_never_beat_free_flow(seed in 0u64..1000, scale in 0.0f64..400.0) {
        let net = grid(6, seed);
        let z = net.zones().len();
        let n = OdMatrix::new(net.zones().clone(), vec![scale; z * z], "AM").unwrap();
        let free = shortest_path_skim(&net, &net.free_flow_times(), "AM").unwrap();
        for engine in [EngineKind::Sta, EngineKind::Dta] {
            let r = assign(&n, &net, engine, &EngineParams::default()).unwrap();
            for c in 0..z * z {
                prop_assert!(r.skim.values()[c] >= free.values()[c] - 1e-9);
            }
        }
    }
}

#[test]
fn criterion_instance_within_half_a_percent() {
    let net = parallel_links(&[(10.0, 1000.0), (15.0, 1000.0)]);
    let r = assign_static_ue(&single_od(&net, 1500.0), &net, &StaParams::default()).unwrap();
    let want = oracle_split([10.0, 15.0], [1000.0, 1000.0], 1500.0);
    for (state, w) in r.link_states.iter().zip(want) {
        assert!((state.flow - w).abs() <= 0.005 * w);
    }
    assert!(r.gap.unwrap() < 1e-4);
    assert!(r.converged);
}

#[test]
fn msa_heads_to_the_same_split() {
    let net = parallel_links(&[(10.0, 1000.0), (15.0, 1000.0)]);
    let params = StaParams {
        method: StaMethod::Msa,
        tol: 1e-3,
        max_iters: 5000,
    };
    let r = assign_static_ue(&single_od(&net, 1500.0), &net, &params).unwrap();
    let want = oracle_split([10.0, 15.0], [1000.0, 1000.0], 1500.0);
    assert!((r.link_states[0].flow - want[0]).abs() <= 0.02 * want[0]);
}

#[test]
fn uncongested_dta_reproduces_free_flow() {
    let mut file = generate(&GeneratorParams::new(9, 4)).unwrap().network;
    for l in &mut file.links {
        l.capacity = 1e9;
    }
    let net = Network::new(file).unwrap();
    let z = net.zones().len();
    let n = OdMatrix::new(net.zones().clone(), vec![100.0; z * z], "AM").unwrap();
    let r = assign(&n, &net, EngineKind::Dta, &EngineParams::default()).unwrap();
    let free = shortest_path_skim(&net, &net.free_flow_times(), "AM").unwrap();
    for c in 0..z * z {
        assert!((r.skim.values()[c] - free.values()[c]).abs() < 1e-6);
    }
    assert!(r.spillover < 1e-9);
}

#[test]
fn conflicting_demand_slows_the_crossing_pair() {
    let net = two_crossing(600.0);
    let run = |ns: f64| {
        let mut v = vec![0.0; 16];
        v[1] = 800.0;
        v[2 * 4 + 3] = ns;
        let n = OdMatrix::new(net.zones().clone(), v, "AM").unwrap();
        assign(&n, &net, EngineKind::Dta, &EngineParams::default()).unwrap().skim.get(0, 1)
    };
    let (quiet, busy) = (run(0.0), run(2000.0));
    assert!(busy > quiet, "{quiet} -> {busy}");
}

#[test]
fn demand_on_a_foreign_zone_system_is_rejected() {
    let net = two_crossing(600.0);
    let n = OdMatrix::new(zones(4), vec![1.0; 16], "AM").unwrap();
    assert!(assign(&n, &net, EngineKind::Sta, &EngineParams::default()).is_err());
    assert!(assign(&n, &net, EngineKind::Dta, &EngineParams::default()).is_err());
}
