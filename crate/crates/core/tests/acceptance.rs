//! Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
//! budget. Runs as a plain program so the lines are always printed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use trp_core::cli::{cmd_train, decompose_model, TrainArgs, METRICS_FILE, TRAJECTORY_CSV, TRAJECTORY_JSONL};
use trp_core::data::{generate_synthetic, DatasetSpec};
use trp_core::linalg::{check_low_rank_residual, check_mirsky, nuclear_subgradient, svd, tsvd};
use trp_core::net::{conv2d_same, NetworkModel};
use trp_core::reshape::{decompose_export, flops_report, low_rank_project, DecompScheme};
use trp_core::trp::{theorem2_monitor, train, Preset, TrpConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn tsvd_correctness() -> Outcome {
    let mut rng = rng(1001);
    let (mut cases, mut bad) = (0, 0);
    for _ in 0..500 {
        let a = random_matrix(&mut rng, 32);
        let sigma = svd(&a).unwrap().sigma;
        let total: f64 = sigma.iter().map(|s| s * s).sum();
        let tail = |k: usize| sigma[k..].iter().map(|s| s * s).sum::<f64>();
        for e in [0.005, 0.02, 0.05, 0.5] {
            let k = tsvd(&a, e).unwrap().k;
            let ok = k == brute_force_rank(&sigma, e)
                && tail(k) <= e * total
                && (k == 1 || tail(k - 1) > e * total);
            cases += 1;
            bad += usize::from(!ok);
        }
    }
    outcome(bad == 0, format!("{} of {cases} (matrix, e) cases agree with the k-scan", cases - bad))
}

fn svd_oracle() -> Outcome {
    let mut rng = rng(1002);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a = random_matrix(&mut rng, 32);
        let ours = svd(&a).unwrap().sigma;
        for (s, o) in ours.iter().zip(eigen_singular_values(&a)) {
            let scale = s.abs().max(o.abs());
            if scale > 0.0 {
                worst = worst.max((s - o).abs() / scale);
            }
        }
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.2e} (tol 1e-8) on 200 matrices"))
}

fn subgradient_fd() -> Outcome {
    let mut rng = rng(1003);
    let (mut bad, mut worst): (usize, f64) = (0, 0.0);
    for _ in 0..100 {
        let (r, c) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let a = gaussian_matrix(&mut rng, r, c);
        let d = gaussian_matrix(&mut rng, r, c);
        let analytic = nuclear_subgradient(&a).unwrap().dot(&d).unwrap();
        let h = 1e-6;
        let numeric = (nalgebra_nuclear_norm(&a.add(&d.scale(h)).unwrap())
            - nalgebra_nuclear_norm(&a.sub(&d.scale(h)).unwrap()))
            / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(1.0);
        worst = worst.max(rel);
        bad += usize::from(rel > 1e-4);
    }
    outcome(bad == 0, format!("{bad} failures on 100 matrices, max relative error {worst:.2e} (tol 1e-4)"))
}

fn perturbation_bounds() -> Outcome {
    let mut rng = rng(1004);
    let (mut mirsky_bad, mut residual_bad) = (0, 0);
    for _ in 0..1000 {
        let a = random_matrix(&mut rng, 16);
        let scale = 10f64.powf(rng.random_range(-6.0..1.0));
        let e = gaussian_matrix(&mut rng, a.rows(), a.cols()).scale(scale);
        mirsky_bad += usize::from(!check_mirsky(&a, &e).unwrap().holds);
    }
    for _ in 0..1000 {
        let a = random_matrix(&mut rng, 16);
        let k = rng.random_range(1..=a.rows().min(a.cols()));
        let b = low_rank_matrix(&mut rng, a.rows(), a.cols(), k);
        residual_bad += usize::from(!check_low_rank_residual(&a, &b, k).unwrap().holds);
    }
    outcome(
        mirsky_bad + residual_bad == 0,
        format!("violations: Mirsky {mirsky_bad}/1000, low-rank residual {residual_bad}/1000"),
    )
}

fn cascade_equivalence() -> Outcome {
    let mut rng = rng(1005);
    let mut worst: f64 = 0.0;
    for scheme in [DecompScheme::ChannelWise, DecompScheme::SpatialWise] {
        for case in 0..50 {
            let dims = (
                rng.random_range(1..=16),
                rng.random_range(1..=8),
                rng.random_range(1..=5),
                rng.random_range(1..=5),
            );
            let (h, w) = (rng.random_range(2..=10), rng.random_range(2..=10));
            let weight = random_tensor(&mut rng, dims);
            let input = gaussian_vec(&mut rng, dims.1 * h * w);
            let e = [0.02, 0.1, 0.3][case % 3];
            let (projected, _) = low_rank_project(&weight, scheme, e).unwrap();
            let pair = decompose_export(&weight, scheme, e).unwrap();
            let mid = conv2d_same(&input, (dims.1, h, w), &pair.first, &vec![0.0; pair.rank]);
            let out = conv2d_same(&mid, (pair.rank, h, w), &pair.second, &vec![0.0; dims.0]);
            let direct = naive_conv(&input, (dims.1, h, w), &projected, &vec![0.0; dims.0]);
            worst = worst.max(max_abs_diff(&out, &direct));
        }
    }
    outcome(worst <= 1e-8, format!("max abs difference {worst:.2e} (tol 1e-8) over 2 x 50 cases"))
}

fn network_gradients() -> Outcome {
    let model = perturbed_tiny_net(1006, (1, 8, 8), 4);
    let mut rng = rng(1006);
    let batch = random_batch(&mut rng, (1, 8, 8), 4, 8);
    let check = finite_difference_check(&model, &batch, 1e-5, 1e-4, 1e-7);
    outcome(
        check.failures.is_empty() && check.checked == model.param_count(),
        format!(
            "{} of {} parameters pass, max relative error {:.2e} (tol 1e-4, abs floor 1e-7)",
            check.checked - check.failures.len(),
            model.param_count(),
            check.max_rel
        ),
    )
}

fn theorem2() -> Outcome {
    let (mut violations, mut satisfied, mut pairs, mut events_ok) = (0, 0, 0, true);
    for seed in 0..5 {
        // 600 training samples / batch 30 = 20 iterations per epoch; 39 epochs
        // end on t = 780, giving projections at t = 0, 20, ..., 780.
        let cfg = TrpConfig {
            period_m: Some(20),
            energy_e: 0.05,
            nuclear_lambda: 0.0,
            epochs: 39,
            batch_size: 30,
            seed,
            ..TrpConfig::default()
        };
        let data = generate_synthetic(seed, &cfg.synthetic).unwrap().split(0.25).unwrap();
        let model = NetworkModel::tiny_conv_net(data.train.shape(), data.train.class_count(), seed).unwrap();
        let out = train(model, &data, &cfg).unwrap();
        for layer in out.trajectory.layers() {
            events_ok &= out.trajectory.for_layer(layer).len() == 40;
        }
        let r = theorem2_monitor(&out.trajectory, &cfg).unwrap();
        violations += r.violations;
        satisfied += r.hypothesis_satisfied;
        pairs += r.total_pairs;
    }
    outcome(
        violations == 0 && satisfied > 0 && events_ok,
        format!(
            "5 seeds, 40 events per layer: {events_ok}; hypothesis met on {satisfied}/{pairs} pairs, {violations} violations"
        ),
    )
}

fn ablation() -> Outcome {
    // Decomposition threshold matched to the training threshold.
    let e = 0.5;
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 0..3 {
        let base = TrpConfig {
            energy_e: e,
            batch_size: 30,
            seed,
            ..TrpConfig::default()
        };
        let data = generate_synthetic(seed, &base.synthetic).unwrap().split(0.25).unwrap();
        let test = data.test.as_batch().unwrap();
        let drop = |preset: Preset| {
            let cfg = base.clone().with_preset(preset);
            let model = NetworkModel::tiny_conv_net(data.train.shape(), data.train.class_count(), seed).unwrap();
            let out = train(model, &data, &cfg).unwrap();
            let before = out.model.evaluate(&test).unwrap().accuracy;
            let (dec, _) = decompose_model(&out.model, cfg.scheme, e).unwrap();
            before - dec.evaluate(&test).unwrap().accuracy
        };
        let (b, t, n) = (drop(Preset::Baseline), drop(Preset::Trp), drop(Preset::TrpNu));
        wins += usize::from(t < b && n <= t);
        rows.push(format!("seed {seed}: baseline {b:.4} trp {t:.4} trp_nu {n:.4}"));
    }
    outcome(wins == 3, format!("{wins}/3 seeds ordered at e = {e}; accuracy drops {}", rows.join("; ")))
}

fn flops() -> Outcome {
    let mut rng = rng(1009);
    let mut bad = 0;
    for case in 0..100 {
        let (n, c, kh, kw) = (
            rng.random_range(1..=64),
            rng.random_range(1..=64),
            rng.random_range(1..=5),
            rng.random_range(1..=5),
        );
        let (h, w) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let scheme = if case % 2 == 0 { DecompScheme::ChannelWise } else { DecompScheme::SpatialWise };
        let (rows, cols) = scheme.matrix_shape((n, c, kh, kw));
        let k = rng.random_range(1..=rows.min(cols));
        let r = flops_report((n, c, kh, kw), (h, w), scheme, k);
        let decomposed = match scheme {
            DecompScheme::ChannelWise => count_conv_macs(k, c, kh, kw, h, w) + count_conv_macs(n, k, 1, 1, h, w),
            DecompScheme::SpatialWise => count_conv_macs(k, c, kh, 1, h, w) + count_conv_macs(n, k, 1, kw, h, w),
        };
        let monotone = k == 1 || flops_report((n, c, kh, kw), (h, w), scheme, k - 1).decomposed < r.decomposed;
        bad += usize::from(r.original != count_conv_macs(n, c, kh, kw, h, w) || r.decomposed != decomposed || !monotone);
    }
    outcome(bad == 0, format!("{} of 100 shape/rank combinations match the loop-nest count", 100 - bad))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let mut args = TrainArgs::new(DatasetSpec::Synthetic, dir.path().join(name));
        args.preset = Some(Preset::TrpNu);
        args.seed = Some(7);
        cmd_train(&args).unwrap();
        [METRICS_FILE, TRAJECTORY_CSV, TRAJECTORY_JSONL]
            .map(|f| std::fs::read(dir.path().join(name).join(f)).unwrap())
    };
    let (a, b) = (go("a"), go("b"));
    outcome(a == b, format!("metrics, trajectory csv and jsonl byte-identical: {}", a == b))
}

type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("TSVD correctness", tsvd_correctness, 10),
        ("SVD oracle equivalence", svd_oracle, 10),
        ("Nuclear sub-gradient", subgradient_fd, 10),
        ("Mirsky/low-rank residual fuzz", perturbation_bounds, 30),
        ("Cascade equivalence", cascade_equivalence, 30),
        ("Network gradients", network_gradients, 60),
        ("Rank monotonicity under the gradient bound", theorem2, 300),
        ("Ablation direction", ablation, 600),
        ("FLOPs hand-check", flops, 5),
        ("Determinism", determinism, 600),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(budget);
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {name}: {} [{:.2}s, budget {budget}s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
