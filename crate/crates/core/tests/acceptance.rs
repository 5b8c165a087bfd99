//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any attainable criterion fails.
//!
//! Oracles here are written independently of the library: likelihoods are
//! recounted by hand, stumps are found by exhaustive search, gradients by
//! central differences.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use tabular_ssl::bench::{
    load_data, plan_folds, run_experiment, run_unit, Budget, DataSource, ExperimentConfig,
    Method, Preset, SyntheticConfig,
};
use tabular_ssl::learners::gbdt::Node;
use tabular_ssl::learners::logreg::loss_and_gradient;
use tabular_ssl::learners::{ClassifierHandle, GbdtParams, LearnerParams, LogRegParams};
use tabular_ssl::likelihood::{build_cache, fit_likelihood};
use tabular_ssl::metrics::{rank_aggregate, read_score_matrix, ScoreMatrix};
use tabular_ssl::pseudolabel::{regularized_score, Strategy};
use tabular_ssl::selftrain::{fit_supervised, run_self_training, SelfTrainConfig};
use tabular_ssl::tabdata::{
    mask_labels, stratified_holdout, Column, Dataset, Discretizer, FeatureSchema,
};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
    /// Set when the criterion cannot be met from the reference inputs; such a
    /// failure is reported but does not fail the run.
    unattainable: bool,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        name,
        passed,
        detail,
        unattainable: false,
    }
}

fn main() -> ExitCode {
    let checks: Vec<fn() -> Vec<Outcome>> = vec![
        rank_tables,
        score_properties,
        likelihood_oracle,
        cycle_conformance,
        desk_scale,
        learner_numerics,
        leakage_and_reproducibility,
    ];
    let mut failed = 0;
    for check in checks {
        let start = Instant::now();
        let results = check();
        let secs = start.elapsed().as_secs_f64();
        for o in results {
            let tag = match (o.passed, o.unattainable) {
                (true, _) => "PASS",
                (false, false) => "FAIL",
                (false, true) => "FAIL (unattainable)",
            };
            println!("[{tag}] {}: {} [{secs:.2}s]", o.name, o.detail);
            if !o.passed && !o.unattainable {
                failed += 1;
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all attainable acceptance criteria passed");
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------- ranks

const METHODS: [&str; 5] = ["None", "FPL", "R-FPL", "CPL", "R-CPL"];
const MODELS: [&str; 7] = ["XGB", "LGBM", "FTT", "TT", "TN", "ST", "MLP"];

/// Reference scores, `[dataset][method][model]`.
const SCORES: [[[f64; 7]; 5]; 3] = [
    [
        [0.5534, 0.5325, 0.4544, 0.4277, 0.4482, 0.5484, 0.4249],
        [0.5565, 0.5430, 0.4851, 0.4468, 0.4518, 0.5515, 0.4478],
        [0.5630, 0.5367, 0.4863, 0.4409, 0.4652, 0.5779, 0.4626],
        [0.5479, 0.5391, 0.4833, 0.4416, 0.4593, 0.5760, 0.4606],
        [0.5681, 0.5379, 0.4951, 0.4468, 0.4563, 0.5776, 0.4628],
    ],
    [
        [0.8184, 0.8155, 0.7447, 0.7490, 0.8168, 0.8253, 0.7467],
        [0.8166, 0.8196, 0.7453, 0.7466, 0.8170, 0.8261, 0.7525],
        [0.8187, 0.8215, 0.7570, 0.7492, 0.8171, 0.8281, 0.7514],
        [0.8212, 0.8207, 0.7559, 0.7507, 0.8175, 0.8285, 0.7526],
        [0.8219, 0.8218, 0.7555, 0.7491, 0.8172, 0.8281, 0.7555],
    ],
    [
        [0.6310, 0.6570, 0.5743, 0.6026, 0.6476, 0.6542, 0.5910],
        [0.6411, 0.6476, 0.5974, 0.6134, 0.6522, 0.6579, 0.6189],
        [0.6466, 0.6560, 0.6276, 0.6175, 0.6499, 0.6581, 0.6234],
        [0.6629, 0.6503, 0.6366, 0.6186, 0.6516, 0.6568, 0.6069],
        [0.6607, 0.6516, 0.6321, 0.6190, 0.6526, 0.6575, 0.6255],
    ],
];

/// Reference average ranks, `[method][model]`.
const AVERAGE_RANKS: [[f64; 7]; 5] = [
    [4.3, 3.7, 5.0, 4.7, 5.0, 5.0, 5.0],
    [4.0, 3.3, 4.0, 3.3, 3.3, 4.0, 3.3],
    [2.7, 2.7, 2.0, 3.0, 2.7, 2.0, 2.7],
    [2.7, 3.0, 2.0, 2.0, 2.0, 2.0, 3.0],
    [1.3, 2.3, 2.0, 1.7, 2.0, 2.0, 1.0],
];

fn model_matrix(model: usize) -> ScoreMatrix {
    ScoreMatrix::new(
        METHODS.iter().map(|s| s.to_string()).collect(),
        vec!["6MM".into(), "12MRR".into(), "Albert".into()],
        (0..5)
            .map(|m| (0..3).map(|d| SCORES[d][m][model]).collect())
            .collect(),
    )
    .unwrap()
}

fn rank_tables() -> Vec<Outcome> {
    let start = Instant::now();
    let xgb = rank_aggregate(&model_matrix(0), true).unwrap();
    let got: Vec<f64> = (0..5).map(|m| xgb.display_average(m)).collect();
    let xgb_ok = got == [4.3, 4.0, 2.7, 2.7, 1.3];

    let mut matched = 0;
    let mut misses = Vec::new();
    for (model, name) in MODELS.iter().enumerate() {
        let table = rank_aggregate(&model_matrix(model), true).unwrap();
        for m in 0..5 {
            let v = table.display_average(m);
            if v == AVERAGE_RANKS[m][model] {
                matched += 1;
            } else {
                misses.push(format!("{name}/{}={v}", METHODS[m]));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![
        outcome(
            "rank table, XGB column",
            xgb_ok && secs < 1.0,
            format!("averages {got:?}, expected [4.3, 4.0, 2.7, 2.7, 1.3]"),
        ),
        Outcome {
            name: "rank table, all seven model columns",
            passed: matched == 35,
            detail: format!(
                "{matched}/35 cells match under mean-rank ties; differing: {}",
                misses.join(" ")
            ),
            unattainable: true,
        },
    ]
}

// ---------------------------------------------------------------- scoring

fn score_properties() -> Vec<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tol = 1e-12;
    let mut violations = Vec::new();
    for _ in 0..10_000 {
        let c: f64 = rng.random();
        let g: f64 = rng.random();
        let a: f64 = rng.random::<f64>() * 4.0;
        let f = regularized_score(c, g, a).unwrap();
        if !(f >= -tol && f <= c + tol && c <= 1.0) {
            violations.push(format!("bounds c={c} g={g} a={a} f={f}"));
        }
        if regularized_score(c, g, 0.0).unwrap() != c {
            violations.push(format!("alpha=0 c={c}"));
        }
        let c2: f64 = rng.random();
        let g2: f64 = rng.random();
        let (clo, chi) = if c <= c2 { (c, c2) } else { (c2, c) };
        let (glo, ghi) = if g <= g2 { (g, g2) } else { (g2, g) };
        if regularized_score(chi, g, a).unwrap() + tol < regularized_score(clo, g, a).unwrap() {
            violations.push(format!("monotone in c at g={g} a={a}"));
        }
        if regularized_score(c, ghi, a).unwrap() + tol < regularized_score(c, glo, a).unwrap() {
            violations.push(format!("monotone in gamma at c={c} a={a}"));
        }
        if (regularized_score(c, 1.0, a).unwrap() - c).abs() > tol {
            violations.push(format!("gamma=1 fixed point c={c} a={a}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "score function properties (10,000 triples)",
        violations.is_empty() && secs < 1.0,
        format!(
            "{} violations{}",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    )]
}

// ---------------------------------------------------------------- likelihood

/// Bin of `v` among 10 equal-width bins over `[lo, hi]`.
fn oracle_bin(v: f64, lo: f64, hi: f64) -> usize {
    if hi == lo {
        return 0;
    }
    (((v - lo) / ((hi - lo) / 10.0)).floor() as usize).min(9)
}

fn likelihood_oracle() -> Vec<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut cache_mismatches = 0;
    for _ in 0..200 {
        let k = rng.random_range(2..=3);
        let m = rng.random_range(1..=4);
        let n = rng.random_range(k..=50);
        let categorical: Vec<bool> = (0..m).map(|_| rng.random_bool(0.5)).collect();
        let cards: Vec<usize> = (0..m).map(|_| rng.random_range(1..=4)).collect();
        let columns = (0..m)
            .map(|j| {
                if categorical[j] {
                    Column::categorical(format!("f{j}"))
                } else {
                    Column::continuous(format!("f{j}"))
                }
            })
            .collect();
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let schema = FeatureSchema::new(columns, "y", classes).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|j| {
                        if categorical[j] {
                            rng.random_range(0..cards[j]) as f64
                        } else {
                            rng.random::<f64>() * 20.0 - 5.0
                        }
                    })
                    .collect()
            })
            .collect();
        // Every class gets at least one row.
        let labels: Vec<Option<usize>> = (0..n)
            .map(|i| Some(if i < k { i } else { rng.random_range(0..k) }))
            .collect();
        let d = Dataset::from_rows(schema, &rows, labels.clone()).unwrap();
        let smoothing = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];
        let mut selected: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.7)).collect();
        if selected.is_empty() {
            selected.push(rng.random_range(0..m));
        }

        let model = fit_likelihood(&d, Discretizer::fit(&[&d], 10).unwrap(), smoothing, &selected)
            .unwrap();

        // Oracle: codes, then counts, then a product of probabilities.
        let codes: Vec<Vec<usize>> = (0..m)
            .map(|j| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                if categorical[j] {
                    col.iter().map(|&v| v as usize).collect()
                } else {
                    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    col.iter().map(|&v| oracle_bin(v, lo, hi)).collect()
                }
            })
            .collect();
        let card: Vec<usize> = (0..m)
            .map(|j| {
                if categorical[j] {
                    codes[j].iter().max().unwrap() + 1
                } else if codes[j].iter().all(|&c| c == 0) && rows.iter().all(|r| r[j] == rows[0][j]) {
                    1
                } else {
                    10
                }
            })
            .collect();
        let y: Vec<usize> = labels.iter().map(|l| l.unwrap()).collect();
        for i in 0..n {
            for c in 0..k {
                let n_c = y.iter().filter(|&&v| v == c).count() as f64;
                let mut prob = 1.0;
                for &j in &selected {
                    let hits = (0..n).filter(|&r| y[r] == c && codes[j][r] == codes[j][i]).count();
                    prob *= (hits as f64 + smoothing) / (n_c + smoothing * card[j] as f64);
                }
                let expect = prob.ln();
                let got = model.log_likelihood(&rows[i], c);
                let err = if expect.is_finite() || got.is_finite() {
                    (expect - got).abs()
                } else {
                    0.0
                };
                worst = worst.max(err);
                if !(err <= 1e-9) {
                    mismatches += 1;
                }
            }
        }
        let cache = build_cache(&model, &d);
        for i in 0..n {
            for c in 0..k {
                let a = cache.raw(i, c);
                let b = model.log_likelihood(&rows[i], c);
                if a != b && !(a.is_infinite() && b.is_infinite()) {
                    cache_mismatches += 1;
                }
                let g = cache.gamma(i, c);
                if !(0.0..=1.0).contains(&g) {
                    cache_mismatches += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![outcome(
        "likelihood vs counting oracle (200 datasets)",
        mismatches == 0 && cache_mismatches == 0 && secs < 10.0,
        format!("max abs error {worst:.2e}, {mismatches} mismatches, {cache_mismatches} cache mismatches"),
    )]
}

// ---------------------------------------------------------------- cycle

fn blobs(n: usize, sep: f64, seed: u64) -> Dataset {
    let schema = FeatureSchema::continuous(3, "y", &["a", "b"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % 2;
        let c = if y == 0 { -sep } else { sep };
        rows.push((0..3).map(|_| c + rng.sample::<f64, _>(StandardNormal)).collect());
        labels.push(Some(y));
    }
    Dataset::from_rows(schema, &rows, labels).unwrap()
}

fn small_gbdt() -> LearnerParams {
    LearnerParams::Gbdt(GbdtParams {
        n_trees: 30,
        max_depth: 3,
        patience: 10,
        ..GbdtParams::default()
    })
}

fn cycle_conformance() -> Vec<Outcome> {
    let mut out = Vec::new();

    // Curriculum on a 10-row pool.
    let d = blobs(50, 1.0, 11);
    let (lab, pool) = mask_labels(&d, 40, 0).unwrap();
    let mut cfg = SelfTrainConfig::new(Strategy::Cpl);
    cfg.learner = LearnerParams::LogReg(LogRegParams::default());
    let a = run_self_training(&cfg, &lab, &pool).unwrap();
    let counts = a.trace.cumulative_counts();
    let ids: HashSet<u64> = a.trace.records.iter().map(|r| r.fit_id).collect();
    let once: HashSet<u64> = a.batches.iter().flat_map(|b| b.row_ids()).collect();
    let b = run_self_training(&cfg, &lab, &pool).unwrap();
    let same = a.batches == b.batches
        && a.best.predict_proba(&d).unwrap() == b.best.predict_proba(&d).unwrap()
        && a.trace.records.iter().zip(&b.trace.records).all(|(x, y)| {
            (x.cycle, x.batch_size, x.cumulative, x.pm) == (y.cycle, y.batch_size, y.cumulative, y.pm)
        });
    out.push(outcome(
        "curriculum schedule on a 10-row pool",
        counts == [2, 4, 6, 8, 10] && once.len() == 10 && ids.len() == 5 && same,
        format!("cumulative {counts:?}, {} distinct fits, rerun identical: {same}", ids.len()),
    ));

    // Fixed threshold: find a run whose first retrained model is worse.
    let mut guard_ok = true;
    let mut witness = None;
    for seed in 0..60u64 {
        let d = blobs(240, 0.45, 100 + seed);
        let (lab, pool) = mask_labels(&d, 40, seed).unwrap();
        let mut cfg = SelfTrainConfig::new(Strategy::Fpl);
        cfg.learner = small_gbdt();
        cfg.seed = seed;
        let o = run_self_training(&cfg, &lab, &pool).unwrap();
        let pms: Vec<f64> = std::iter::once(o.initial_pm)
            .chain(o.trace.records.iter().map(|r| r.pm))
            .collect();
        let rising = pms.windows(2).take(pms.len().saturating_sub(2)).all(|w| w[1] > w[0]);
        let best = pms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let fresh: HashSet<u64> = o.trace.records.iter().map(|r| r.fit_id).collect();
        guard_ok &= rising && o.best_pm == best && fresh.len() == o.trace.len();
        if witness.is_none() && o.trace.len() == 1 && o.trace.records[0].pm < o.initial_pm {
            let (train, hold) = stratified_holdout(&lab, cfg.validation_fraction, cfg.seed).unwrap();
            let plain = fit_supervised(&cfg, &train, &hold).unwrap();
            let is_initial = o.best_cycle == 0
                && o.best.fit_id() != Some(o.trace.records[0].fit_id)
                && o.best.predict_proba(&d).unwrap() == plain.predict_proba(&d).unwrap();
            witness = Some((seed, is_initial));
        }
    }
    let (w_ok, w_text) = match witness {
        Some((s, ok)) => (ok, format!("seed {s}: stopped after cycle 1, kept the supervised model: {ok}")),
        None => (false, "no run with a worse first cycle found".into()),
    };
    out.push(outcome(
        "fixed-threshold guard and best-model tracking",
        guard_ok && w_ok,
        format!("60 runs follow the guard: {guard_ok}; {w_text}"),
    ));
    out
}

// ---------------------------------------------------------------- desk scale

fn desk_scale() -> Vec<Outcome> {
    let start = Instant::now();
    let methods = Method::all();
    let n_seeds = 20u64;
    // Per seed and method: (test macro-F1, pseudo-label macro-F1, labeling seconds, cycles).
    let per_seed: Vec<Vec<(f64, f64, f64, usize)>> = (0..n_seeds)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = ExperimentConfig::new(
                DataSource::Synthetic(SyntheticConfig {
                    n_samples: Some(2000),
                    bias: Some(0.5),
                    ..SyntheticConfig::from_preset(Preset::Overlap)
                }),
                Budget::Fraction(0.1),
            );
            cfg.seed = seed;
            let data = load_data(&cfg).unwrap();
            let folds = plan_folds(&cfg, &data).unwrap();
            methods
                .iter()
                .map(|&m| {
                    let outs: Vec<_> = folds.iter().map(|f| run_unit(&cfg, m, f).unwrap()).collect();
                    let n = outs.len() as f64;
                    let test = outs.iter().map(|o| o.score).sum::<f64>() / n;
                    let pseudo = outs
                        .iter()
                        .map(|o| o.audit.as_ref().map_or(0.0, |a| a.macro_f1))
                        .sum::<f64>()
                        / n;
                    let secs = outs
                        .iter()
                        .flat_map(|o| o.trace.records.iter().map(|r| r.seconds))
                        .sum::<f64>();
                    let cycles = outs.iter().map(|o| o.trace.len()).sum();
                    (test, pseudo, secs, cycles)
                })
                .collect()
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let idx = |name: &str| methods.iter().position(|m| m.name() == name).unwrap();
    let (none, fpl, rfpl) = (idx("none"), idx("fpl"), idx("r-fpl"));

    let wins = per_seed.iter().filter(|s| s[rfpl].1 >= s[fpl].1).count();
    let share = wins as f64 / n_seeds as f64;
    let mean = |i: usize, f: fn(&(f64, f64, f64, usize)) -> f64| {
        per_seed.iter().map(|s| f(&s[i])).sum::<f64>() / n_seeds as f64
    };
    let base = mean(none, |t| t.0);
    let summary: Vec<String> = methods
        .iter()
        .enumerate()
        .map(|(i, m)| format!("{}={:.4}", m.name(), mean(i, |t| t.0)))
        .collect();
    let ordering_ok = (0..methods.len()).all(|i| i == none || mean(i, |t| t.0) >= base - 0.01);

    let per_cycle = |i: usize| {
        let s: f64 = per_seed.iter().map(|r| r[i].2).sum();
        let c: usize = per_seed.iter().map(|r| r[i].3).sum();
        s / c.max(1) as f64
    };
    let ratio = per_cycle(rfpl) / per_cycle(fpl);

    vec![
        outcome(
            "desk scale (a): regularized pseudo-labels at least as good",
            share >= 0.6 && secs < 600.0,
            format!(
                "R-FPL pseudo-label macro-F1 >= FPL in {wins}/{n_seeds} seeds (mean {:.4} vs {:.4})",
                mean(rfpl, |t| t.1),
                mean(fpl, |t| t.1)
            ),
        ),
        outcome(
            "desk scale (b): self-training not worse than supervised - 0.01",
            ordering_ok && secs < 600.0,
            format!("mean test macro-F1 {}", summary.join(" ")),
        ),
        outcome(
            "time overhead of the regularized labeling step",
            ratio <= 5.0,
            format!(
                "per-cycle labeling time R-FPL {:.3} ms vs FPL {:.3} ms, ratio {ratio:.2}",
                per_cycle(rfpl) * 1e3,
                per_cycle(fpl) * 1e3
            ),
        ),
    ]
}

// ---------------------------------------------------------------- learners

fn learner_numerics() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(3..=20);
        let m = rng.random_range(1..=4);
        let k = rng.random_range(2..=4);
        let x: Vec<f64> = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let sw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let w: Vec<f64> = (0..k * (m + 1)).map(|_| rng.sample(StandardNormal)).collect();
        let l2 = rng.random_range(0.0..0.1);
        let (_, grad) = loss_and_gradient(&w, &x, &y, &sw, k, l2);
        let eps = 1e-6;
        let fd: Vec<f64> = (0..w.len())
            .map(|i| {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[i] += eps;
                minus[i] -= eps;
                let (lp, _) = loss_and_gradient(&plus, &x, &y, &sw, k, l2);
                let (lm, _) = loss_and_gradient(&minus, &x, &y, &sw, k, l2);
                (lp - lm) / (2.0 * eps)
            })
            .collect();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = grad
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(fd.iter().map(|a| a * a).sum::<f64>().sqrt())
            .max(1e-8);
        worst = worst.max(diff / scale);
    }

    let mut stump_fail = 0;
    for t in 0..20 {
        let n = 100;
        let m = rng.random_range(1..=4);
        let k = rng.random_range(2..=3);
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let names: Vec<&str> = classes.iter().map(String::as_str).collect();
        let schema = FeatureSchema::continuous(m, "y", &names).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| (rng.random::<f64>() * 100.0).round() / 10.0).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let d = Dataset::from_rows(schema, &rows, y.iter().map(|&v| Some(v)).collect()).unwrap();
        let params = GbdtParams {
            n_trees: 1,
            max_depth: 1,
            patience: 1,
            ..GbdtParams::default()
        };
        let h = ClassifierHandle::new(LearnerParams::Gbdt(params.clone()), t)
            .fit(&d, &d)
            .unwrap();
        let model = h.gbdt().unwrap();
        for c in 0..k {
            let prior = y.iter().filter(|&&v| v == c).count() as f64 / n as f64;
            let p0 = 1.0 / (1.0 + (-(prior / (1.0 - prior)).ln()).exp());
            let g: Vec<f64> = y.iter().map(|&v| p0 - f64::from(u8::from(v == c))).collect();
            let hs = p0 * (1.0 - p0);
            let sc = |gs: f64, cnt: usize| gs * gs / (hs * cnt as f64 + 1.0);
            let gt: f64 = g.iter().sum();
            let mut best: Option<(f64, usize, f64)> = None;
            for j in 0..m {
                let mut vals: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                for w in vals.windows(2) {
                    let thr = (w[0] + w[1]) / 2.0;
                    let left: Vec<usize> = (0..n).filter(|&i| rows[i][j] <= thr).collect();
                    let gl: f64 = left.iter().map(|&i| g[i]).sum();
                    let gain = sc(gl, left.len()) + sc(gt - gl, n - left.len()) - sc(gt, n);
                    // Exactly tied partitions can differ in the last bits
                    // depending on summation order; the earliest one wins.
                    if best.is_none_or(|b| gain > b.0 + 1e-9 * b.0.abs().max(1.0)) {
                        best = Some((gain, j, thr));
                    }
                }
            }
            let tree = &model.rounds[0][c];
            let ok = match (best, &tree.nodes[0]) {
                (Some((_, j, thr)), Node::Split { feature, threshold, .. }) => {
                    let left: Vec<usize> = (0..n).filter(|&i| rows[i][j] <= thr).collect();
                    let gl: f64 = left.iter().map(|&i| g[i]).sum();
                    let lv = -0.1 * gl / (hs * left.len() as f64 + 1.0);
                    let rv = -0.1 * (gt - gl) / (hs * (n - left.len()) as f64 + 1.0);
                    let probe_left = rows[left[0]].clone();
                    *feature == j
                        && (*threshold - thr).abs() < 1e-12
                        && (tree.predict(&probe_left) - lv).abs() < 1e-12
                        && (0..n).all(|i| {
                            let want = if rows[i][j] <= thr { lv } else { rv };
                            (tree.predict(&rows[i]) - want).abs() < 1e-12
                        })
                }
                _ => false,
            };
            if !ok {
                stump_fail += 1;
            }
        }
    }
    vec![
        outcome(
            "logistic-regression gradient vs central differences (50 problems)",
            worst <= 1e-4,
            format!("max relative error {worst:.2e}"),
        ),
        outcome(
            "GBDT stump vs exhaustive search (100-row datasets)",
            stump_fail == 0,
            format!("{stump_fail} class trees differ from the oracle stump"),
        ),
    ]
}

// ---------------------------------------------------------------- harness

fn leakage_and_reproducibility() -> Vec<Outcome> {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut cfg = ExperimentConfig::new(
        DataSource::Synthetic(SyntheticConfig {
            n_samples: Some(600),
            ..SyntheticConfig::from_preset(Preset::Overlap)
        }),
        Budget::Fraction(0.15),
    );
    cfg.selftrain.learner = small_gbdt();
    let mut bytes = Vec::new();
    let mut leaks = 0;
    let mut rank_match = true;
    for dir in &dirs {
        cfg.output = dir.path().to_path_buf();
        let report = run_experiment(&cfg).unwrap();
        let scores = std::fs::read(dir.path().join("scores.csv")).unwrap();
        let reread = read_score_matrix(scores.as_slice()).unwrap();
        rank_match &= report.ranks.as_ref() == Some(&rank_aggregate(&reread, true).unwrap());
        bytes.push(scores);
        let data = load_data(&cfg).unwrap();
        let folds = plan_folds(&cfg, &data).unwrap();
        for (_, f, res) in &report.outputs {
            let test: HashSet<_> = folds[*f].test.row_ids().iter().copied().collect();
            let fold = &folds[*f];
            leaks += fold
                .labeled
                .row_ids()
                .iter()
                .chain(fold.unlabeled.row_ids())
                .filter(|id| test.contains(id))
                .count();
            if let Ok(o) = res {
                leaks += o.model.trained_on().iter().filter(|id| test.contains(id)).count();
            }
        }
    }
    let identical = bytes[0] == bytes[1];
    vec![outcome(
        "leakage and reproducibility",
        identical && leaks == 0 && rank_match,
        format!(
            "scores.csv byte-identical: {identical}; test rows seen in training: {leaks}; \
             rank table matches emitted scores: {rank_match}"
        ),
    )]
}
