mod common;

use collrec_gbdt::{
    log_loss, logistic_grad_hess, train, train_with_log, GbdtModel, GbdtParams, Matrix, Monotone,
    Node, SchemaInfo, MIN_SPLIT_GAIN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schema(flags: &[Monotone]) -> SchemaInfo {
    let names = (0..flags.len()).map(|i| format!("f{i}")).collect();
    SchemaInfo::new(names, flags.to_vec())
}

/// Noisy data where f0 pushes the label up, f1 pushes it down and f2 is
/// irrelevant; some cells are missing.
fn mixed_data(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut r: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let logit = 1.5 * r[0] - 1.0 * r[1] + 0.8 * (r[2] * 3.0).sin();
        let p = 1.0 / (1.0 + (-logit).exp());
        y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        for v in r.iter_mut() {
            if rng.random::<f64>() < 0.05 {
                *v = f64::NAN;
            }
        }
        rows.push(r);
    }
    (rows, y)
}

#[test]
fn step_function_is_learned_and_monotone() {
    let rows: Vec<[f64; 1]> = (0..400)
        .map(|i| [i as f64 / 200.0 - 1.0 + 0.0025])
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| (r[0] > 0.0) as u8 as f64).collect();
    let s = schema(&[Monotone::Increasing]);
    let params = GbdtParams {
        n_trees: 20,
        ..GbdtParams::for_schema(&s)
    };
    let model = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();

    let correct = rows
        .iter()
        .zip(&y)
        .filter(|(r, &y)| (model.predict(s.fingerprint, &r[..]).unwrap() > 0.5) == (y == 1.0))
        .count();
    assert_eq!(correct, rows.len(), "training accuracy must be 1.0");

    let lo = rows[0][0];
    let hi = rows[rows.len() - 1][0];
    let grid: Vec<f64> = (0..101)
        .map(|i| lo + (hi - lo) * i as f64 / 100.0)
        .collect();
    let preds: Vec<f64> = grid
        .iter()
        .map(|&t| model.predict(s.fingerprint, &[t]).unwrap())
        .collect();
    assert!(
        preds.windows(2).all(|w| w[0] <= w[1]),
        "grid predictions not monotone: {preds:?}"
    );
}

#[test]
fn constrained_noise_feature_gets_no_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..600 {
        let label = (i % 2) as f64;
        // f0 separates the classes perfectly; f1 is independent noise.
        rows.push([
            label * 2.0 - 1.0 + rng.random_range(-0.1..0.1),
            rng.random_range(0.0..1.0),
        ]);
        y.push(label);
    }
    let s = schema(&[Monotone::None, Monotone::Decreasing]);
    let params = GbdtParams {
        n_trees: 30,
        ..GbdtParams::for_schema(&s)
    };
    let model = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();
    let imp = model.feature_importance();
    assert!(imp[0].split_count > 0);
    assert_eq!(imp[1].split_count, 0, "noise feature was split: {imp:?}");
}

#[test]
fn predictions_match_naive_interpreter() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (rows, y) = mixed_data(&mut rng, 1500);
    let s = schema(&[Monotone::Increasing, Monotone::Decreasing, Monotone::None]);
    let params = GbdtParams {
        n_trees: 40,
        ..GbdtParams::for_schema(&s)
    };
    let model = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();
    let naive = common::parse(&model.to_bytes());
    for _ in 0..2000 {
        let x: Vec<f64> = (0..3)
            .map(|_| {
                if rng.random::<f64>() < 0.1 {
                    f64::NAN
                } else {
                    rng.random_range(-3.0..3.0)
                }
            })
            .collect();
        let a = model.predict(s.fingerprint, &x).unwrap();
        let b = naive.predict(&x);
        assert!((a - b).abs() < 1e-12, "{a} vs {b} at {x:?}");
    }
}

#[test]
fn batch_prediction_equals_row_prediction() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (rows, y) = mixed_data(&mut rng, 800);
    let s = schema(&[Monotone::Increasing, Monotone::None, Monotone::None]);
    let params = GbdtParams {
        n_trees: 30,
        ..GbdtParams::for_schema(&s)
    };
    let model = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();
    let batch = model.predict_batch(s.fingerprint, &Matrix::from_rows(&rows)).unwrap();
    for (row, b) in rows.iter().zip(&batch) {
        assert_eq!(model.predict(s.fingerprint, row).unwrap().to_bits(), b.to_bits());
    }
    assert!(model.predict_batch(s.fingerprint ^ 1, &Matrix::from_rows(&rows)).is_err());
}

#[test]
fn save_load_round_trip_is_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (rows, y) = mixed_data(&mut rng, 800);
    let s = schema(&[Monotone::Increasing, Monotone::Decreasing, Monotone::None]);
    let params = GbdtParams {
        n_trees: 25,
        ..GbdtParams::for_schema(&s)
    };
    let model = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    model.save(&path).unwrap();
    let loaded = GbdtModel::load(&path).unwrap();
    assert_eq!(loaded, model);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = model.predict(s.fingerprint, &x).unwrap();
        let b = loaded.predict(s.fingerprint, &x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (rows, y) = mixed_data(&mut rng, 700);
    let s = schema(&[Monotone::Increasing, Monotone::Decreasing, Monotone::None]);
    let params = GbdtParams {
        n_trees: 15,
        ..GbdtParams::for_schema(&s)
    };
    let x = Matrix::from_rows(&rows);
    let a = train(&x, &y, &s, &params).unwrap().to_bytes();
    let b = train(&x, &y, &s, &params).unwrap().to_bytes();
    assert_eq!(a, b);
}

#[test]
fn importance_matches_tree_walk() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (rows, y) = mixed_data(&mut rng, 900);
    let s = schema(&[Monotone::Increasing, Monotone::Decreasing, Monotone::None]);
    let params = GbdtParams {
        n_trees: 30,
        ..GbdtParams::for_schema(&s)
    };
    let model = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();
    let walked = common::parse(&model.to_bytes()).importance();
    for (imp, (count, gain)) in model.feature_importance().iter().zip(walked) {
        assert_eq!(imp.split_count, count);
        assert!((imp.total_gain - gain).abs() <= 1e-9 * gain.max(1.0));
        assert!(imp.total_gain >= 0.0);
    }
}

#[test]
fn importance_of_prior_model_is_zero() {
    let m = GbdtModel::from_prior(schema(&[Monotone::None, Monotone::None]), 0.5);
    assert!(m
        .feature_importance()
        .iter()
        .all(|i| i.split_count == 0 && i.total_gain == 0.0));
}

#[test]
fn perfect_split_holds_all_gain() {
    let rows: Vec<[f64; 2]> = (0..200).map(|i| [(i % 2) as f64, 0.5]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let s = schema(&[Monotone::None, Monotone::None]);
    let params = GbdtParams {
        n_trees: 5,
        ..GbdtParams::for_schema(&s)
    };
    let m = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();
    let imp = m.feature_importance();
    let total: f64 = imp.iter().map(|i| i.total_gain).sum();
    assert!(imp[0].total_gain > 0.0);
    assert_eq!(imp[0].total_gain, total);
}

#[test]
fn training_loss_never_increases() {
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (rows, y) = mixed_data(&mut rng, 1000);
        let s = schema(&[
            Monotone::Increasing,
            Monotone::Decreasing,
            Monotone::Increasing,
        ]);
        let params = GbdtParams {
            n_trees: 60,
            ..GbdtParams::for_schema(&s)
        };
        let (_, log) = train_with_log(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();
        assert_eq!(log.loss.len(), 61);
        for (round, w) in log.loss.windows(2).enumerate() {
            assert!(
                w[1] <= w[0] + 1e-12,
                "seed {seed} round {round}: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let step = 1e-4;
    for _ in 0..20 {
        let raw: f64 = rng.random_range(-6.0..6.0);
        let y = if rng.random::<bool>() { 1.0 } else { 0.0 };
        let (g, h) = logistic_grad_hess(raw, y);
        let g_fd = (log_loss(raw + step, y) - log_loss(raw - step, y)) / (2.0 * step);
        let h_fd = (logistic_grad_hess(raw + step, y).0 - logistic_grad_hess(raw - step, y).0)
            / (2.0 * step);
        assert!((g - g_fd).abs() <= 1e-6 * g.abs(), "g {g} vs {g_fd}");
        assert!((h - h_fd).abs() <= 1e-6 * h.abs(), "h {h} vs {h_fd}");
    }
}

/// Exhaustive first split: every feature, every threshold between consecutive
/// distinct values, closed-form gain. Returns every split within rounding of
/// the maximum, since exact ties may be broken either way.
fn brute_force_splits(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<(usize, f64, f64)> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let p = mean;
    let g: Vec<f64> = y.iter().map(|y| p - y).collect();
    let h = p * (1.0 - p);
    let score = |gs: f64, n: usize| gs * gs / (h * n as f64 + lambda);
    let (g_all, n_all) = (g.iter().sum::<f64>(), y.len());
    let mut all = Vec::new();
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &t in &values[..values.len() - 1] {
            let (mut gl, mut nl) = (0.0, 0);
            for (r, gi) in rows.iter().zip(&g) {
                if r[f] <= t {
                    gl += gi;
                    nl += 1;
                }
            }
            let gain = 0.5 * (score(gl, nl) + score(g_all - gl, n_all - nl) - score(g_all, n_all));
            all.push((f, t, gain));
        }
    }
    let max = all.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if !(max > MIN_SPLIT_GAIN) {
        return Vec::new();
    }
    all.retain(|c| c.2 >= max - 1e-9 * max);
    all
}

fn check_first_split(rows: &[Vec<f64>], y: &[f64]) {
    let s = schema(&[Monotone::None, Monotone::None]);
    let params = GbdtParams {
        n_trees: 1,
        max_leaves: 2,
        min_samples_leaf: 1,
        ..GbdtParams::for_schema(&s)
    };
    let model = train(&Matrix::from_rows(rows), y, &s, &params).unwrap();
    let argmax = brute_force_splits(rows, y, params.l2_leaf_penalty);
    match &model.trees[0].nodes[0] {
        Node::Split {
            feature,
            threshold,
            gain,
            ..
        } => {
            let hit = argmax
                .iter()
                .find(|c| (c.0, c.1) == (*feature as usize, *threshold));
            let Some(&(_, _, eg)) = hit else {
                panic!("chose ({feature}, {threshold}) but argmax set is {argmax:?}");
            };
            assert!((gain - eg).abs() <= 1e-9 * eg, "gain {gain} vs {eg}");
        }
        Node::Leaf { .. } => assert!(
            argmax.is_empty(),
            "no split but brute force found {argmax:?}"
        ),
    }
}

fn random_instance(rng: &mut ChaCha8Rng, levels: u32) -> (Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let n = rng.random_range(4..=64);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.random_range(0..levels) as f64).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                let p = 0.2 + 0.3 * r[0] / levels as f64 + 0.4 * r[1] / levels as f64;
                (rng.random::<f64>() < p) as u8 as f64
            })
            .collect();
        let pos = y.iter().filter(|&&v| v == 1.0).count();
        if pos > 0 && pos < y.len() {
            return (rows, y);
        }
    }
}

#[test]
fn first_split_matches_exhaustive_search_binary() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let (rows, y) = random_instance(&mut rng, 2);
        check_first_split(&rows, &y);
    }
}

#[test]
fn first_split_matches_exhaustive_search_multilevel() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let (rows, y) = random_instance(&mut rng, 5);
        check_first_split(&rows, &y);
    }
}

#[test]
fn monotone_fuzz_on_trained_models() {
    let mut checked = 0usize;
    let flags = [Monotone::Increasing, Monotone::Decreasing, Monotone::None];
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        // Labels deliberately contradict the constraints on part of the range.
        let (mut rows, mut y) = mixed_data(&mut rng, 1200);
        for (r, label) in rows.iter_mut().zip(y.iter_mut()).take(300) {
            r[0] = rng.random_range(0.5..2.0);
            *label = 0.0;
        }
        let s = schema(&flags);
        let params = GbdtParams {
            n_trees: 50,
            min_samples_leaf: 5,
            ..GbdtParams::for_schema(&s)
        };
        let model = train(&Matrix::from_rows(&rows), &y, &s, &params).unwrap();
        for _ in 0..2500 {
            let mut v: Vec<f64> = (0..3)
                .map(|_| {
                    if rng.random::<f64>() < 0.1 {
                        f64::NAN
                    } else {
                        rng.random_range(-3.0..3.0)
                    }
                })
                .collect();
            let f = rng.random_range(0..2usize);
            let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            v[f] = lo;
            let p_lo = model.predict(s.fingerprint, &v).unwrap();
            v[f] = hi;
            let p_hi = model.predict(s.fingerprint, &v).unwrap();
            match flags[f] {
                Monotone::Increasing => assert!(p_lo <= p_hi, "f{f}: {p_lo} > {p_hi}"),
                Monotone::Decreasing => assert!(p_lo >= p_hi, "f{f}: {p_lo} < {p_hi}"),
                Monotone::None => unreachable!(),
            }
            checked += 1;
        }
    }
    assert!(checked >= 10_000);
}
