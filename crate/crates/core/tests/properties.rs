mod common;

use leobeam::beamhop::{beamhop_epoch, schedule_slot, ConflictGraph, HopOrder};
use leobeam::geometry::{distance, hex_cell_layout, GroundSite, SiteKind};
use leobeam::handover::{imbalance_index, swap_matching, Assignment, Candidates, DeltaPrime};
use leobeam::linkbudget::{
    db_to_linear, linear_to_db, slot_capacity_bits, snr_db, tx_power_for_target_snr, RadioConfig,
};
use leobeam::spectrum::{
    cluster_budget, greedy_post_pass, greedy_share, solve_sharing, Evaluator, ScanOrder, SparrowConfig,
};
use leobeam::traffic::{update_data_queue, update_virtual_queue};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_sparrow() -> SparrowConfig {
    SparrowConfig { n_pop: 12, n2: 15, n3: 3, producers: 3, spectators: 3, ..SparrowConfig::default() }
}

fn edges_strategy(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..n, 0..n), 0..n * 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decibel_round_trip(db in -200.0f64..200.0) {
        prop_assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-9);
    }

    #[test]
    fn target_power_reproduces_target_snr(snr in -10.0f64..30.0, gain in 1e-22f64..1e-15, bw in 1e6f64..1e9) {
        let radio = RadioConfig::reference();
        let p = tx_power_for_target_snr(snr, gain, bw, &radio);
        prop_assert!((snr_db(p, gain, bw, &radio) - snr).abs() < 1e-9);
    }

    #[test]
    fn slot_capacity_is_monotone(bw in 1e6f64..1e9, snr in 0.0f64..100.0, extra in 0.0f64..10.0) {
        let base = slot_capacity_bits(bw, 1e-3, snr);
        prop_assert!(slot_capacity_bits(bw, 1e-3, snr + extra) >= base);
        prop_assert!((slot_capacity_bits(2.0 * bw, 1e-3, snr) - 2.0 * base).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn data_queue_stays_non_negative(q in 0.0f64..1e9, d in 0.0f64..2e9, a in 0.0f64..1e9) {
        let next = update_data_queue(q, d, a);
        prop_assert!(next >= a);
        prop_assert_eq!(next, (q - d).max(0.0) + a);
    }

    #[test]
    fn virtual_queue_stays_non_negative(m in 0.0f64..10.0, ho in 0u32..2, h_bar in 0.0f64..1.0) {
        let next = update_virtual_queue(m, ho, h_bar);
        prop_assert!(next >= 0.0);
        prop_assert!(next <= m + 1.0);
    }

    #[test]
    fn cluster_budget_within_slots(slots in 1usize..1000, load in 0.0f64..=1.0, more in 0.0f64..=1.0) {
        let b = cluster_budget(slots, load);
        prop_assert!(b <= slots);
        prop_assert!(cluster_budget(slots, (load + more).min(1.0)) <= b);
    }

    #[test]
    fn greedy_slot_is_a_maximal_independent_set(
        n in 1usize..16,
        edges in edges_strategy(16),
        queue in prop::collection::vec(0.5f64..10.0, 16),
        by_queue in any::<bool>(),
    ) {
        let edges: Vec<_> = edges.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let g = ConflictGraph::from_edges(n, &edges);
        let mut q = queue[..n].to_vec();
        let rate = vec![1.0; n];
        let order = if by_queue { HopOrder::Queue } else { HopOrder::WeightRatio };
        let set = schedule_slot(&g, &mut q, &rate, order);
        prop_assert!(g.is_independent(&set));
        for v in 0..n {
            prop_assert!(set.contains(&v) || g.neighbors(v).iter().any(|u| set.contains(u)));
        }
    }

    #[test]
    fn beam_hopping_conserves_bits(
        n in 1usize..10,
        edges in edges_strategy(10),
        queue in prop::collection::vec(0.0f64..20.0, 10),
        slots in 1usize..8,
    ) {
        let edges: Vec<_> = edges.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let g = ConflictGraph::from_edges(n, &edges);
        let rate = vec![3.0; n];
        let out = beamhop_epoch(&g, &queue[..n], &rate, slots, HopOrder::WeightRatio);
        for c in 0..n {
            prop_assert!(out.residual[c] >= 0.0);
            prop_assert!(out.served[c] >= 0.0);
            prop_assert!(out.served[c] <= slots as f64 * rate[c] + 1e-9);
            prop_assert!((out.served[c] + out.residual[c] - queue[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn sharing_solution_is_feasible_and_beats_greedy_from_zeros(seed in any::<u64>(), dim in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = common::random_sharing_problem(dim, 4, 5, &mut rng);
        let out = solve_sharing(&p, &small_sparrow(), &mut rng);
        prop_assert!(p.is_feasible(&out.z));
        prop_assert!((p.fitness(&out.z) - out.fitness).abs() <= 1e-9 * out.fitness.abs().max(1.0));
        let mut eval = Evaluator::new(&p);
        let mut zeros = vec![false; dim];
        greedy_post_pass(&mut zeros, &mut eval, ScanOrder::Index);
        prop_assert!(out.fitness >= p.fitness(&zeros) - 1e-9);
        prop_assert!(out.best_trajectory.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn greedy_share_is_feasible_and_maximal(seed in any::<u64>(), dim in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = common::random_sharing_problem(dim, 4, 5, &mut rng);
        let z = greedy_share(&p);
        prop_assert!(p.is_feasible(&z));
        for i in 0..dim {
            if !z[i] {
                let mut more = z.clone();
                more[i] = true;
                prop_assert!(!p.is_feasible(&more));
            }
        }
    }

    #[test]
    fn swap_matching_never_increases_the_objective(
        queue in prop::collection::vec(0.0f64..10.0, 6),
        virtual_queue in prop::collection::vec(0.0f64..2.0, 6),
        start in prop::collection::vec(0usize..3, 6),
        previous in prop::collection::vec(0usize..3, 6),
        v in 0.1f64..1000.0,
    ) {
        let cand = Candidates::new(vec![vec![0, 1, 2]; 6]);
        let previous: Vec<Option<usize>> = previous.into_iter().map(Some).collect();
        let objective = DeltaPrime {
            satellites: cand.satellites(),
            queue: &queue,
            virtual_queue: &virtual_queue,
            previous: &previous,
            h_bar: 0.004,
            load_weight: v,
        };
        let initial = objective.eval(&start);
        let out = swap_matching(Assignment { serving: start }, &cand, &objective, 50);
        prop_assert!(out.assignment.is_feasible(&cand));
        prop_assert!(objective.eval(&out.assignment.serving) <= initial);
        prop_assert!(out.trajectory.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn imbalance_index_is_at_least_one(loads in prop::collection::vec(1e-3f64..1e9, 1..8)) {
        prop_assert!(imbalance_index(&loads) >= 1.0);
    }

    // The grid is laid out in local east/north offsets, so it is only
    // approximately regular; cell-scale spacings stay within a few percent.
    #[test]
    fn hex_neighbors_sit_one_spacing_apart(lat in -60.0f64..60.0, lon in -180.0f64..180.0, spacing in 1e3f64..5e4) {
        let origin = GroundSite::from_degrees(lat, lon, SiteKind::BeamCell).unwrap();
        let cells = hex_cell_layout(origin, 2, 3, spacing).unwrap();
        let d = distance(cells[0].position(), cells[1].position());
        prop_assert!((d - spacing).abs() < 1e-3 * spacing);
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                prop_assert!(distance(a.position(), b.position()) > 0.97 * spacing);
            }
        }
    }
}
