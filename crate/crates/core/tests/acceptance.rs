//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{brute_force_apsp, fd_objective, integer_graph, jittered_policy, loglog_slope, random_traj, toy, values};
use rand::Rng;
use rayon::prelude::*;
use sgt_core::approx::fitted::reachable_fraction;
use sgt_core::approx::rollout::{eval_pairs, evaluate_batch_rl, summarize, train_batch_rl, BatchMethod, BatchRlConfig, BatchRlModels};
use sgt_core::approx::{approx_fw, prediction_spread};
use sgt_core::bc::*;
use sgt_core::env2d::{builtin_world, State2D, World2D};
use sgt_core::exact::{bellman_finite_horizon, floyd_warshall, greedy_bellman_trajectory, sgtdp, BellmanTables};
use sgt_core::nn::GaussianNet;
use sgt_core::perturb::*;
use sgt_core::pg::toy::{ReturnKind, N_STATES};
use sgt_core::pg::train::{evaluate_seq, evaluate_sgt, held_out_pairs, success_rate, train_seq_sg, train_sgt_pg, PgConfig};
use sgt_core::pg::tree::log_likelihood_grad;
use sgt_core::pg::{log_likelihood_flat, log_likelihood_recursive, tree_indices};
use sgt_core::rng::{derive_seed, rng_from_seed};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// The sweep shared by the two bound checks: run `i` of 1000.
fn sweep_run(i: u64) -> (sgt_core::Graph, NoiseSpec) {
    let n = [4, 8, 16][(i % 3) as usize];
    let eps = [0.01, 0.05, 0.2][(i / 3 % 3) as usize];
    let distribution = if i.is_multiple_of(2) { NoiseDistribution::UniformPmEps } else { NoiseDistribution::Adversarial };
    (integer_graph(n, 0.5, 1000 + i), NoiseSpec { epsilon: eps, seed: i, distribution })
}

fn c1_exactness() -> Outcome {
    let t = Instant::now();
    let mismatches = (0..200u64)
        .into_par_iter()
        .filter(|&i| {
            let g = integer_graph([4, 8, 16][(i % 3) as usize], 0.5, i);
            let oracle = brute_force_apsp(&g);
            let (sgt, fw, bell) = (values(sgtdp(&g).top()), values(&floyd_warshall(&g)), values(bellman_finite_horizon(&g).top()));
            !(sgt == oracle && fw == oracle && bell == oracle)
        })
        .count();
    let el = t.elapsed();
    outcome(mismatches == 0 && el < Duration::from_secs(10), format!("{mismatches}/200 mismatches, {:.2}s", secs(el)))
}

fn c2_value_bound() -> Outcome {
    let t = Instant::now();
    let (violations, worst) = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let (g, spec) = sweep_run(i);
            let stack = perturbed_sgtdp(&g, &spec);
            let err = stack.top().max_abs_diff(&floyd_warshall(&g));
            let bound = sgt_value_bound(stack.depth(), spec.epsilon);
            (usize::from(err > bound + BOUND_SLACK), err / bound)
        })
        .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
    let el = t.elapsed();
    outcome(violations == 0 && el < Duration::from_secs(30), format!("{violations} violations, worst error/bound {worst:.3}, {:.2}s", secs(el)))
}

fn c3_trajectory_bound() -> Outcome {
    let t = Instant::now();
    let (violations, worst) = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let (g, spec) = sweep_run(i);
            let stack = perturbed_sgtdp(&g, &spec);
            let bound = sgt_trajectory_bound(stack.depth(), spec.epsilon);
            let mut v = 0;
            let mut worst: f64 = 0.0;
            for (_, _, cost, opt) in sgt_excesses(&g, &stack, &floyd_warshall(&g)) {
                v += usize::from(cost - opt > bound + BOUND_SLACK);
                worst = worst.max((cost - opt) / bound);
            }
            (v, worst)
        })
        .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
    let el = t.elapsed();
    outcome(violations == 0 && el < Duration::from_secs(60), format!("{violations} violating pairs, worst excess/bound {worst:.3}, {:.2}s", secs(el)))
}

fn c4_single_table() -> Outcome {
    let eps = 0.125;
    let mut notes = Vec::new();
    let mut pass = true;
    for n in [4usize, 8, 16] {
        let adv = adversarial_single_v(n, eps);
        let greedy = greedy_bellman_trajectory(&adv.graph, BellmanTables::Single(&adv.table), adv.start, adv.goal, adv.horizon).total_cost();
        let opt = floyd_warshall(&adv.graph).get(adv.start, adv.goal).value();
        let sgt = sgt_true_cost(&adv.graph, &sgtdp(&adv.graph), adv.start, adv.goal).value();
        let ok = greedy.is_max() && opt == n as f64 * eps && sgt == n as f64 * eps;
        pass &= ok;
        notes.push(format!("n={n}: greedy {} optimal {opt} sgt {sgt}", greedy.value()));
    }
    outcome(pass, notes.join("; "))
}

fn multi_excess(n: usize, eps: f64) -> (f64, f64) {
    let adv = adversarial_multi_v(n, eps, eps / 2.0);
    let cost = greedy_bellman_trajectory(&adv.graph, BellmanTables::PerHorizon(&adv.tables.tables), adv.start, adv.goal, adv.horizon).total_cost().value();
    let opt = floyd_warshall(&adv.graph).get(adv.start, adv.goal).value();
    (cost, cost - opt)
}

fn c5_per_horizon() -> Outcome {
    let eps = 0.125;
    let closed_form = [6usize, 10, 14].iter().all(|&n| multi_excess(n, eps).0 == adversarial_multi_cost(n, eps));
    let ns = [8usize, 16, 32, 64];
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (costs, excess): (Vec<f64>, Vec<f64>) = ns.iter().map(|&n| multi_excess(n, eps)).unzip();
    let bellman_slope = loglog_slope(&xs, &excess);
    let cost_slope = loglog_slope(&xs, &costs);
    let sgt_mean: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let g = adversarial_multi_v(n, eps, eps / 2.0).graph;
            let exact = floyd_warshall(&g);
            let (sum, count) = (0..20u64)
                .into_par_iter()
                .map(|seed| {
                    let ex = sgt_excesses(&g, &perturbed_sgtdp(&g, &NoiseSpec::uniform(eps, seed)), &exact);
                    (ex.iter().map(|&(_, _, c, o)| c - o).sum::<f64>(), ex.len())
                })
                .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            sum / count as f64
        })
        .collect();
    let sgt_slope = if sgt_mean.iter().all(|&m| m > 0.0) { loglog_slope(&xs, &sgt_mean) } else { f64::NEG_INFINITY };
    let pass = closed_form && (bellman_slope - 2.0).abs() <= 0.1 && sgt_slope <= 1.5;
    outcome(
        pass,
        format!(
            "closed form {}; bellman excess slope {bellman_slope:.3} (greedy cost slope {cost_slope:.3}); sgt excess slope {sgt_slope:.3}, mean excess {sgt_mean:.4?}",
            if closed_form { "exact" } else { "MISMATCH" }
        ),
    )
}

fn c6_batch_rl(w: &World2D, cfg: &BatchRlConfig, models: &[BatchRlModels], train_time: Duration) -> Outcome {
    let t = Instant::now();
    let mut good = 0;
    let mut notes = Vec::new();
    for (seed, m) in models.iter().enumerate() {
        let rows = evaluate_batch_rl(w, cfg, m, seed as u64);
        let (im, sf, fq) = (summarize(&rows, BatchMethod::SgtdpIm), summarize(&rows, BatchMethod::SgtdpFqi), summarize(&rows, BatchMethod::Fqi));
        let ok = im.0 < sf.0 && sf.0 < fq.0 && fq.1 < sf.1 && sf.1 < im.1;
        good += usize::from(ok);
        notes.push(format!("seed {seed}: dist {:.3}/{:.3}/{:.3} coll {:.3}/{:.3}/{:.3}", im.0, sf.0, fq.0, im.1, sf.1, fq.1));
    }
    let el = train_time + t.elapsed();
    outcome(good >= 2 && el < Duration::from_secs(15 * 60), format!("ordering in {good}/3 seeds [{}], {:.0}s", notes.join("; "), secs(el)))
}

fn c7_reach_growth(models: &[BatchRlModels]) -> Outcome {
    let goal = State2D::new(0.95, 0.95);
    let mut pass = true;
    let mut notes = Vec::new();
    for (seed, m) in models.iter().enumerate() {
        let fr: Vec<f64> = (0..=6).map(|k| reachable_fraction(&m.stack, k, goal, &m.grid)).collect();
        pass &= fr.windows(2).all(|p| p[1] >= p[0]);
        notes.push(format!("seed {seed}: {fr:.3?}"));
    }
    outcome(pass, notes.join("; "))
}

fn c8_spread(w: &World2D, cfg: &BatchRlConfig, models: &[BatchRlModels]) -> Outcome {
    let seed = 0;
    let probes = eval_pairs(w, 100, seed + 77);
    let data = w.sample_dataset(cfg.tuples, derive_seed(seed, &[0])).unwrap();
    let run = approx_fw(&data, cfg.fitted.c_max, 10, cfg.fitted.k_neighbors, seed).unwrap();
    let (fw1, fw10) = (prediction_spread(&run.models[1], &probes), prediction_spread(&run.models[10], &probes));
    let stack = &models[seed as usize].stack;
    let level_spread = |k: usize| {
        let v: Vec<f64> = probes.iter().map(|&(s, g)| stack.value(k, s, g)).collect();
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let (l0, l6) = (level_spread(0), level_spread(6));
    let fw_ok = fw10 * 10.0 <= fw1;
    let sgt_ok = l6 >= 0.5 * l0;
    outcome(fw_ok && sgt_ok, format!("approx FW spread {fw1:.3} -> {fw10:.3}; fitted level 0 {l0:.3}, level 6 {l6:.3}"))
}

fn c9_toy_estimator() -> Outcome {
    let t = Instant::now();
    let mut worst_est: f64 = 0.0;
    let mut worst_base: f64 = 0.0;
    let mut worst_swap: f64 = 0.0;
    for depth in 1..=2 {
        for seed in 0..5 {
            let (pb, policy) = toy(depth, seed);
            let mut rng = rng_from_seed(seed + 50);
            let baseline: [[f64; N_STATES]; N_STATES] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-3.0..3.0)));
            for d in 1..=depth {
                let fd = fd_objective(&pb, &policy, d);
                let total = pb.expected_estimator(&policy, d, ReturnKind::Total, Some(&baseline));
                let segment = pb.expected_estimator(&policy, d, ReturnKind::Segment, Some(&baseline));
                for k in 0..fd.len() {
                    worst_est = worst_est.max((total[k] - fd[k]).abs());
                    worst_swap = worst_swap.max((segment[k] - total[k]).abs());
                }
                for b in pb.expected_baseline_term(&policy, d, &baseline) {
                    worst_base = worst_base.max(b.abs());
                }
            }
        }
    }
    let el = t.elapsed();
    let pass = worst_est <= 1e-6 && worst_base <= 1e-12 && worst_swap <= 1e-6 && el < Duration::from_secs(5);
    outcome(pass, format!("estimator vs FD {worst_est:.2e}, baseline term {worst_base:.2e}, segment vs total {worst_swap:.2e}, {:.2}s", secs(el)))
}

fn c10_gradient_check() -> Outcome {
    let h = 1e-5;
    let worst = (1..=4usize)
        .flat_map(|depth| (0..100u64).map(move |draw| (depth, draw)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(depth, draw)| {
            let p = jittered_policy(depth, 10_000 * depth as u64 + draw);
            let t = random_traj(depth, 20_000 + 100 * depth as u64 + draw);
            let (_, grads) = log_likelihood_grad(&p, &t, depth).unwrap();
            let mut worst: f64 = 0.0;
            for d in 1..=depth {
                let (mut err, mut scale): (f64, f64) = (0.0, 0.0);
                for k in 0..GaussianNet::dim() {
                    let mut hi = p.clone();
                    hi.depth_params[d - 1].params[k] += h;
                    let mut lo = p.clone();
                    lo.depth_params[d - 1].params[k] -= h;
                    let fd = (log_likelihood_flat(&hi, &t, depth).unwrap() - log_likelihood_flat(&lo, &t, depth).unwrap()) / (2.0 * h);
                    err = err.max((fd - grads[d - 1][k]).abs());
                    scale = scale.max(fd.abs()).max(grads[d - 1][k].abs());
                }
                worst = worst.max(err / scale);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-4, format!("worst relative error {worst:.2e} over 400 draws"))
}

fn c11_likelihood_equivalence() -> Outcome {
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let depth = 1 + (i % 4) as usize;
            let p = jittered_policy(depth, 30_000 + i);
            let t = random_traj(depth, 40_000 + i);
            (log_likelihood_flat(&p, &t, depth).unwrap() - log_likelihood_recursive(&p, &t, depth).unwrap()).abs()
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-10, format!("worst gap {worst:.2e} over 1000 trajectories"))
}

fn c12_policy_gradient() -> Outcome {
    let t = Instant::now();
    let w = builtin_world("wall2d").unwrap();
    let cfg = PgConfig::default();
    let mut gap_all = true;
    let mut monotone = 0;
    let mut notes = Vec::new();
    for seed in 0..3u64 {
        let pairs = held_out_pairs(&w, 100, seed);
        let (p, _) = train_sgt_pg(&w, &cfg, seed).unwrap();
        let sgt = success_rate(&evaluate_sgt(&w, &p, 2, &pairs).unwrap());
        let seq: Vec<f64> = [1usize, 3, 7]
            .iter()
            .map(|&n| {
                let (sp, _) = train_seq_sg(&w, n, &cfg, seed).unwrap();
                success_rate(&evaluate_seq(&w, &sp, n, &pairs))
            })
            .collect();
        gap_all &= sgt >= seq[1] + 0.1;
        monotone += usize::from(seq[0] >= seq[1] && seq[1] >= seq[2]);
        notes.push(format!("seed {seed}: sgt {sgt:.2} seq {:.2}/{:.2}/{:.2}", seq[0], seq[1], seq[2]));
    }
    let el = t.elapsed();
    let pass = gap_all && monotone >= 2 && el < Duration::from_secs(30 * 60);
    outcome(pass, format!("gap in every seed: {gap_all}; non-increasing in {monotone}/3 [{}], {:.0}s", notes.join("; "), secs(el)))
}

fn c13_behaviour_cloning() -> Outcome {
    let w = builtin_world("corridor_simple").unwrap();
    let cfg = BcConfig::default();
    let depth = 4;
    let mut better = 0;
    let mut counts_ok = true;
    let mut notes = Vec::new();
    for seed in 0..3u64 {
        let data = generate_expert_dataset(&w, 5000, seed);
        let (sgt_model, _) = bc_train_sgt(&data, &cfg, seed).unwrap();
        let (seq_model, _) = bc_train_sequential(&data, &cfg, seed).unwrap();
        let pairs = held_out_pairs(&w, 200, seed);
        let sgt = evaluate_bc(&w, &sgt_model, BcMethod::Sgt, &pairs, depth, 400);
        let seq = evaluate_bc(&w, &seq_model, BcMethod::Seq, &pairs, depth, 400);
        counts_ok &= sgt.iter().all(|r| r.model_calls == (1 << depth) - 1);
        for (r, &(s, g)) in seq.iter().zip(&pairs) {
            let path = rollout_sequential(&seq_model, &w, s, g, w.goal_threshold, 400);
            counts_ok &= r.model_calls == path.states.len() - 1;
        }
        let rate = |rows: &[BcRow]| rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64;
        let seq_calls = seq.iter().map(|r| r.model_calls as f64).sum::<f64>() / seq.len() as f64;
        better += usize::from(rate(&sgt) > rate(&seq));
        notes.push(format!("seed {seed}: sgt {:.3} seq {:.3} (seq calls {seq_calls:.1})", rate(&sgt), rate(&seq)));
    }
    outcome(better >= 2 && counts_ok, format!("sgt ahead in {better}/3, call counts {}; [{}]", if counts_ok { "exact" } else { "WRONG" }, notes.join("; ")))
}

fn c14_index_table() -> Outcome {
    let expected = [
        ((1, 3), (0, 4, 8)),
        ((1, 2), (0, 2, 4)),
        ((2, 2), (4, 6, 8)),
        ((1, 1), (0, 1, 2)),
        ((2, 1), (2, 3, 4)),
        ((3, 1), (4, 5, 6)),
        ((4, 1), (6, 7, 8)),
    ];
    let matched = expected.iter().filter(|&&((i, d), idx)| tree_indices(i, d, 3) == Ok(idx)).count();
    outcome(matched == expected.len(), format!("{matched}/7 rows"))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };
    report(1, c1_exactness());
    report(2, c2_value_bound());
    report(3, c3_trajectory_bound());
    report(4, c4_single_table());
    report(5, c5_per_horizon());

    let w = builtin_world("corridor").unwrap();
    let cfg = BatchRlConfig::default();
    let t = Instant::now();
    let models: Vec<BatchRlModels> = (0..3u64).map(|seed| train_batch_rl(&w, &cfg, seed).unwrap()).collect();
    let train_time = t.elapsed();
    report(6, c6_batch_rl(&w, &cfg, &models, train_time));
    report(7, c7_reach_growth(&models));
    report(8, c8_spread(&w, &cfg, &models));
    drop(models);

    report(9, c9_toy_estimator());
    report(10, c10_gradient_check());
    report(11, c11_likelihood_equivalence());
    report(12, c12_policy_gradient());
    report(13, c13_behaviour_cloning());
    report(14, c14_index_table());

    let failed: Vec<String> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| n.to_string()).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
