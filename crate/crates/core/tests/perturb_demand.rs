mod common;

use common::*;
use proptest::prelude::*;
use tfeq_core::demand::generate_demand_seeded;
use tfeq_core::*;

fn stack_values() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (1usize..=8, 2usize..=6).prop_flat_map(|(k, z)| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..90.0, z * z), k),
            Just(z),
        )
    })
}

fn stack_of(members: &[Vec<f64>], z: usize) -> SkimStack {
    let zs = zones(z);
    SkimStack::new(members.iter().map(|v| skim(&zs, v.clone())).collect()).unwrap()
}

fn demand_cfg(k: Vec<f64>, z: usize, beta: f64, mode: DemandMode) -> DemandConfig {
    DemandConfig {
        potential: ZoneMatrix::new(zones(z), k, "AM").unwrap(),
        alpha: -1.0,
        beta,
        mode,
        seed: 7,
        scenario_tag: "AM".into(),
    }
}

proptest! {
    #[test]
    fn extreme_quantiles_are_cell_min_and_max((members, z) in stack_values()) {
        let stack = stack_of(&members, z);
        let lo = quantile_skim(&stack, Quantile::new(0.0).unwrap()).unwrap();
        let hi = quantile_skim(&stack, Quantile::new(1.0).unwrap()).unwrap();
        for c in 0..z * z {
            let cell = members.iter().map(|m| m[c]);
            prop_assert_eq!(lo.values()[c], cell.clone().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(hi.values()[c], cell.fold(f64::NEG_INFINITY, f64::max));
        }
    }

    #[test]
    fn member_order_does_not_matter((members, z) in stack_values(), qt in 0.0f64..=1.0) {
        let mut reversed = members.clone();
        reversed.reverse();
        let q = Quantile::new(qt).unwrap();
        prop_assert_eq!(
            quantile_skim(&stack_of(&members, z), q).unwrap(),
            quantile_skim(&stack_of(&reversed, z), q).unwrap()
        );
    }

    #[test]
    fn identical_members_give_that_member(values in square_values(60.0), k in 1usize..6, qt in 0.0f64..=1.0) {
        let z = (values.len() as f64).sqrt() as usize;
        let out = quantile_skim(&stack_of(&vec![values.clone(); k], z), Quantile::new(qt).unwrap()).unwrap();
        prop_assert_eq!(out.values(), &values[..]);
    }

    #[test]
    fn stochastic_demand_stays_within_potential(
        k in prop::collection::vec(0u32..400, 16),
        tt in prop::collection::vec(0.0f64..40.0, 16),
        seed in any::<u64>(),
    ) {
        let cfg = demand_cfg(k.iter().map(|&v| v as f64).collect(), 4, 0.2, DemandMode::Stochastic);
        let t = skim(&zones(4), tt);
        let n = generate_demand_seeded(&t, &cfg, seed).unwrap();
        for (trips, pool) in n.values().iter().zip(&k) {
            prop_assert!(trips.fract() == 0.0 && *trips >= 0.0 && *trips <= *pool as f64);
        }
        prop_assert_eq!(&n, &generate_demand_seeded(&t, &cfg, seed).unwrap());
    }

    #[test]
    fn expected_demand_is_the_logit_share(
        k in prop::collection::vec(0u32..400, 9),
        tt in prop::collection::vec(0.0f64..40.0, 9),
        beta in 0.01f64..1.0,
    ) {
        let cfg = demand_cfg(k.iter().map(|&v| v as f64).collect(), 3, beta, DemandMode::Expected);
        let n = generate_demand(&skim(&zones(3), tt.clone()), &cfg).unwrap();
        for c in 0..9 {
            let p = 1.0 / (1.0 + (-1.0 + beta * tt[c]).exp());
            prop_assert!((n.values()[c] - k[c] as f64 * p).abs() <= 1e-9 * (1.0 + k[c] as f64));
        }
    }

    #[test]
    fn stochastic_mean_tracks_expected(tt in 0.0f64..20.0) {
        // 400 cells with a pool of 50 each; the total is a sum of independent binomials
        let cfg = demand_cfg(vec![50.0; 400], 20, 0.2, DemandMode::Stochastic);
        let n = generate_demand(&skim(&zones(20), vec![tt; 400]), &cfg).unwrap();
        let p = cfg.probability(tt);
        let (mean, sd) = (20_000.0 * p, (20_000.0 * p * (1.0 - p)).sqrt());
        prop_assert!((n.total() - mean).abs() <= 6.0 * sd + 1.0);
    }
}

#[test]
fn bad_configs_are_rejected() {
    let t = skim(&zones(2), vec![1.0; 4]);
    for (k, beta) in [(vec![1.5, 0.0, 0.0, 0.0], 0.1), (vec![-1.0, 0.0, 0.0, 0.0], 0.1), (vec![1.0; 4], 0.0)] {
        let cfg = demand_cfg(k, 2, beta, DemandMode::Expected);
        assert!(matches!(generate_demand(&t, &cfg), Err(Error::Config(_))));
    }
    let cfg = demand_cfg(vec![1.0; 9], 3, 0.1, DemandMode::Expected);
    assert!(generate_demand(&t, &cfg).is_err());
}
