use sgt_core::bc::*;
use sgt_core::env2d::{builtin_world, State2D};
use sgt_core::pg::train::held_out_pairs;
use sgt_core::pg::PredictMode;
use sgt_core::rng::rng_from_seed;

/// Densified straight segments between random pairs of the empty world.
fn straight_lines(count: usize, seed: u64) -> ExpertDataset {
    let w = builtin_world("empty").unwrap();
    let mut rng = rng_from_seed(seed);
    let trajectories = (0..count)
        .map(|_| {
            let (s, g) = w.sample_start_goal(&mut rng);
            densify(&[s, g], w.step_size)
        })
        .collect();
    ExpertDataset { trajectories }
}

fn window_means(losses: &[f64], width: usize) -> Vec<f64> {
    losses.chunks(width).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

#[test]
fn straight_demonstrations_teach_the_midpoint() {
    let data = straight_lines(500, 1);
    let cfg = BcConfig { steps: 5000, ..BcConfig::default() };
    let (model, _) = bc_train_sgt(&data, &cfg, 2).unwrap();
    let w = builtin_world("empty").unwrap();
    let mut worst: f64 = 0.0;
    for (s, g) in held_out_pairs(&w, 100, 3) {
        worst = worst.max(model.net.mean(s, g).dist(s.lerp(g, 0.5)));
    }
    assert!(worst <= 0.02, "{worst}");
}

#[test]
fn early_loss_decreases_window_by_window() {
    let data = straight_lines(500, 1);
    let cfg = BcConfig { steps: 100, ..BcConfig::default() };
    let (_, losses) = bc_train_sgt(&data, &cfg, 2).unwrap();
    let means = window_means(&losses, 10);
    assert_eq!(means.len(), 10);
    for w in means.windows(2) {
        assert!(w[1] < w[0], "{means:?}");
    }
}

#[test]
fn sequential_model_memorizes_one_demonstration() {
    let w = builtin_world("wall2d").unwrap();
    let demo = astar_path(&w, State2D::new(0.2, 0.3), State2D::new(0.8, 0.3), 100, 0.03).unwrap();
    let demo = densify(&demo, w.step_size);
    let data = ExpertDataset { trajectories: vec![demo.clone()] };
    let cfg = BcConfig::default();
    let (model, _) = bc_train_sequential(&data, &cfg, 0).unwrap();
    let g = *demo.last().unwrap();
    let r = rollout_sequential(&model, &w, demo[0], g, w.goal_threshold, 400);
    assert!(r.reached && r.collision_free, "{r:?}");
    for p in &r.states {
        let off = demo.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min);
        assert!(off <= 0.02, "{p:?} is {off} from the demonstration");
    }
}

#[test]
fn tree_prediction_shape_and_calls() {
    let data = straight_lines(50, 4);
    let (model, _) = bc_train_sgt(&data, &BcConfig { steps: 50, ..BcConfig::default() }, 0).unwrap();
    let (s, g) = (State2D::new(0.1, 0.2), State2D::new(0.7, 0.9));
    for k in 0..=6 {
        for mode in [PredictMode::Mean, PredictMode::Sample] {
            let (t, calls) = bc_predict_sgt(&model, s, g, k, mode, 9);
            assert_eq!(t.len(), (1 << k) + 1);
            assert_eq!(calls, (1 << k) - 1);
            assert_eq!((t[0], t[1 << k]), (s, g));
        }
    }
}

#[test]
fn training_is_deterministic() {
    let data = straight_lines(50, 5);
    let cfg = BcConfig { steps: 200, ..BcConfig::default() };
    assert_eq!(bc_train_sgt(&data, &cfg, 6).unwrap(), bc_train_sgt(&data, &cfg, 6).unwrap());
    assert_eq!(bc_train_sequential(&data, &cfg, 6).unwrap(), bc_train_sequential(&data, &cfg, 6).unwrap());
    assert_ne!(bc_train_sgt(&data, &cfg, 6).unwrap().0, bc_train_sgt(&data, &cfg, 7).unwrap().0);
}

#[test]
fn expert_demonstrations_are_valid() {
    let w = builtin_world("corridor_simple").unwrap();
    let data = generate_expert_dataset(&w, 30, 8);
    assert_eq!(data.trajectories.len(), 30);
    for t in &data.trajectories {
        assert!(w.is_free(t[0]) && w.is_free(*t.last().unwrap()));
        for seg in t.windows(2) {
            assert!(w.segment_free(seg[0], seg[1]));
            assert!(seg[0].dist(seg[1]) <= w.step_size + 1e-9);
        }
    }
}
