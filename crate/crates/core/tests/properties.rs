use proptest::prelude::*;

use dyncore::dynamics::families::{cyclic_splits_spec, static_spec};
use dyncore::dynamics::{
    present_value, simulate, AllocationSequence, Decision, DiscountSpec, Grid, State,
};
use dyncore::fair_core::{convexification_contains, fair_core_membership, period_partition};
use dyncore::game_core::{
    convex_combine, core_membership, least_core, Allocation, Coalition, Game, TOL_FEAS,
};
use dyncore::market::{stage_market_game, Externality, MarketSpec, Piece, Utility};
use dyncore::spec_io::GameFile;
use dyncore::stable_core::{limit, AggregateDynamic, AggregateMap};

fn game(n: usize) -> impl Strategy<Value = Game> {
    prop::collection::vec(0.0..2.0f64, (1 << n) - 1).prop_map(move |w| {
        let mut table = vec![0.0];
        table.extend(w);
        Game::from_table(Coalition::grand(n), table).unwrap()
    })
}

fn simplex_point(n: usize, total: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, n).prop_map(move |w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s * total).collect()
    })
}

fn affine_map() -> impl Strategy<Value = AggregateMap> {
    (0.05..0.95f64, 0.0..0.3f64).prop_map(|(slope, intercept)| AggregateMap::Affine {
        slope,
        intercept,
        cap: None,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn core_membership_monotone_in_eps(g in game(3), x in simplex_point(3, 1.0), e1 in 0.0..1.0f64, de in 0.0..1.0f64) {
        let g = Game::from_fn(g.grand(), |t| if t == g.grand() { 1.0 } else { g.worth(t) });
        let x = Allocation::of(&g, x, 0.0).unwrap();
        if core_membership(&g, &x, e1).unwrap() {
            prop_assert!(core_membership(&g, &x, e1 + de).unwrap());
        }
    }

    #[test]
    fn least_core_witness_is_in_its_core(g in game(4)) {
        let r = least_core(&g, 0.0).unwrap();
        prop_assert!(core_membership(&g, &r.witness, r.epsilon_star + TOL_FEAS).unwrap());
    }

    #[test]
    fn least_core_beats_simplex_grid(g in game(3)) {
        // grid-step 1/200 brute force can only do worse, and not by much
        let r = least_core(&g, 0.0).unwrap();
        let v = g.grand_worth();
        let steps = 200;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let x = [v * i as f64 / steps as f64, v * j as f64 / steps as f64, v * (steps - i - j) as f64 / steps as f64];
                let e = g.grand().proper_subsets().filter(|t| !t.is_empty())
                    .map(|t| g.worth(t) - t.members().map(|k| x[k]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                best = best.min(e);
            }
        }
        prop_assert!(r.epsilon_star <= best + 1e-9);
        prop_assert!(best - r.epsilon_star <= 2.0 * v / steps as f64 * 3.0 + 1e-9);
    }

    #[test]
    fn convex_combine_is_linear(a in game(3), b in game(3), w in 0.0..1.0f64) {
        let c = convex_combine(&[a.clone(), b.clone()], &[w, 1.0 - w]).unwrap();
        for t in a.grand().subsets() {
            prop_assert!((c.worth(t) - (w * a.worth(t) + (1.0 - w) * b.worth(t))).abs() < 1e-12);
        }
    }

    #[test]
    fn present_value_bounded_and_monotone(s in prop::collection::vec(0.0..3.0f64, 1..60), bump in 0.0..1.0f64, d in 0.05..0.99f64) {
        let ds = DiscountSpec::with_horizon(d, s.len(), 3.0).unwrap();
        let pv = present_value(&s, &ds, 1).unwrap();
        prop_assert!((-1e-12..=3.0 + 1e-12).contains(&pv));
        let up: Vec<f64> = s.iter().map(|v| v + bump).collect();
        prop_assert!(present_value(&up, &ds, 1).unwrap() >= pv - 1e-12);
    }

    #[test]
    fn simulation_never_grows_the_coalition(choices in prop::collection::vec(0..8u32, 12)) {
        let spec = static_spec(Game::majority(3, 1.0));
        let ds = DiscountSpec::with_horizon(0.9, choices.len(), 1.0).unwrap();
        let mut schedule = |t: usize, g: &Game, prev: Option<&State>| {
            let s = Coalition::from_bits(choices[t - 1]) & g.grand();
            if prev.is_some() && !s.is_empty() && s != g.grand() && prev.map(|p| p.coalition()) == Some(g.grand()) {
                Decision::Split(s)
            } else {
                let k = g.grand().len();
                Decision::Allocate(vec![g.grand_worth() / k as f64; k])
            }
        };
        let tr = simulate(&spec, &mut schedule, &ds).unwrap();
        let cs = tr.coalitions();
        for w in cs.windows(2) {
            prop_assert!(w[1].is_subset_of(w[0]));
        }
    }

    #[test]
    fn fair_membership_monotone_in_eps(g in game(3), x in simplex_point(3, 1.0), e1 in 0.0..0.5f64, de in 0.0..0.5f64) {
        let g = Game::from_fn(g.grand(), |t| if t == g.grand() { 1.0 } else { g.worth(t) });
        let spec = static_spec(g);
        let seq = AllocationSequence::constant(x);
        let ds = DiscountSpec::new(0.9, 1e-6, 2.0).unwrap();
        if fair_core_membership(&spec, &seq, &ds, e1).unwrap().member {
            prop_assert!(fair_core_membership(&spec, &seq, &ds, e1 + de).unwrap().member);
        }
    }

    #[test]
    fn trivial_split_always_contains(i in 0..=10u32, j in 0..=10u32) {
        prop_assume!(i + j <= 10);
        let spec = cyclic_splits_spec();
        let grid = Grid::new(10).unwrap();
        let x = vec![i as f64 / 10.0, j as f64 / 10.0, (10 - i - j) as f64 / 10.0];
        let alloc = Allocation::new(Coalition::grand(3), x.clone(), 0.0).unwrap();
        let (v, _) = spec.transition(&State::new(alloc, vec![])).unwrap();
        let split = convexification_contains(&spec, &x, &v, 1, grid).unwrap();
        prop_assert!(split.is_some());
    }

    #[test]
    fn period_partition_tracks_weights(w in simplex_point(3, 1.0)) {
        let delta = 0.99;
        let len = 3000;
        let classes = period_partition(&w, delta, len).unwrap();
        for (j, wj) in w.iter().enumerate() {
            let got: f64 = classes.iter().enumerate()
                .filter(|(_, c)| **c == j)
                .map(|(t, _)| (1.0 - delta) * delta.powi(t as i32))
                .sum();
            prop_assert!((got - wj).abs() <= 2.0 * (1.0 - delta) + delta.powi(len as i32), "{j}: {got} vs {wj}");
        }
    }

    #[test]
    fn limit_map_is_monotone_and_idempotent(m in affine_map(), c1 in 0.0..1.0f64, dc in 0.0..1.0f64) {
        let ad = AggregateDynamic::from_fn(2, 1.0, |_| m.clone()).unwrap();
        let t = Coalition::grand(2);
        let f1 = limit(&ad, t, c1).unwrap();
        let f2 = limit(&ad, t, c1 + dc).unwrap();
        prop_assert!(f2 >= f1 - 1e-8);
        prop_assert!((limit(&ad, t, f1).unwrap() - f1).abs() <= 1e-8);
    }

    #[test]
    fn market_worth_is_homogeneous_in_scales(
        ys in prop::collection::vec(0.0..2.0f64, 3),
        slopes in prop::collection::vec(0.1..1.5f64, 3),
        caps in prop::collection::vec(0.2..2.0f64, 3),
        s in prop::collection::vec(0.5..2.0f64, 3),
    ) {
        let ms = MarketSpec {
            endowments: ys.iter().map(|y| vec![*y]).collect(),
            utilities: (0..3).map(|i| Utility { pieces: vec![
                Piece { slope: vec![slopes[i]], intercept: 0.0 },
                Piece { slope: vec![0.0], intercept: caps[i] },
            ]}).collect(),
            externality: Externality::default(),
            gamma: 0.8,
            floor: 0.0,
            initial_scales: None,
        };
        let g = stage_market_game(&ms, &s, Coalition::grand(3)).unwrap();
        let doubled: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        let g2 = stage_market_game(&ms, &doubled, Coalition::grand(3)).unwrap();
        for t in Coalition::grand(3).subsets() {
            prop_assert!((g2.worth(t) - 2.0 * g.worth(t)).abs() < 1e-8);
        }
        prop_assert!(g.is_superadditive(1e-9));
    }

    #[test]
    fn game_file_round_trip(g in game(4)) {
        let back = GameFile::from_game(&g).to_game().unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn grid_points_are_allocations(steps in 1..15u32, k in 1..5usize, total in 0.5..3.0f64) {
        let grid = Grid::new(steps).unwrap();
        let pts = grid.points(k, total, 0.0).unwrap();
        prop_assert_eq!(pts.len(), grid.count(k));
        for p in pts {
            prop_assert!((p.iter().sum::<f64>() - total).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| *v >= -1e-12));
        }
    }
}
