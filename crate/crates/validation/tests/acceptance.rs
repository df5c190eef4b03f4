//! Acceptance gate. Runs every criterion at its stated tolerance and time
//! budget, prints one PASS/FAIL line each, and exits non-zero on any failure.
//!
//! Built with `harness = false` so the lines appear in plain `cargo test` output.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use eegrec::autoencoder::{Activation, AutoencoderConfig, AutoencoderModel, Params};
use eegrec::boost::{self, BoostConfig};
use eegrec::data::{synth_generate, Dataset, SynthSpec};
use eegrec::metrics::{class_metrics, roc_and_auc, ConfusionMatrix};
use eegrec::normalize::NormalizationMethod;
use eegrec::pipeline::{self, DataSource, ExperimentConfig, RunSeeds, RunSettings, Sweep};
use eegrec::rng;
use eegrec::similarity::{self, pearson, similarity_stats, Axis, CorrelationMatrix};
use ndarray::Array2;
use rand::Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn criterion(id: &str, title: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let started = Instant::now();
    let v = f();
    let elapsed = started.elapsed();
    let in_time = elapsed < budget;
    let ok = v.passed && in_time;
    println!(
        "{} [{id}] {title}: {} ({:.2}s, budget {}s{})",
        if ok { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" }
    );
    ok
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

/// Five-class, three-subject, 16-channel mixture with 4-sigma class separation.
fn benchmark_spec() -> SynthSpec {
    SynthSpec {
        num_classes: 5,
        num_subjects: 3,
        dims: 16,
        samples_per_cell: 167,
        class_separation: 4.0,
        subject_jitter: 0.4,
        noise_sigma: 1.0,
        baseline: 1.0,
        seed: 2018,
    }
}

/// Exactly 2500 rows of the benchmark mixture (2000 train / 500 test at 0.8).
fn benchmark_dataset() -> Dataset {
    let full = synth_generate(&benchmark_spec()).expect("valid spec");
    let keep: Vec<usize> = (0..2500).collect();
    full.subset(&keep)
}

fn benchmark_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DataSource::Synth(benchmark_spec()));
    cfg.normalization = NormalizationMethod::ZScore;
    cfg.train_fraction = 0.8;
    cfg.autoencoder.hidden_dim = 24;
    cfg.boost.num_rounds = 100;
    cfg.seed = 7;
    cfg
}

// ---------------------------------------------------------------------------
// 1. Reference confusion-matrix metrics
// ---------------------------------------------------------------------------

fn table3() -> Verdict {
    let cm = ConfusionMatrix::from_counts(vec![
        vec![3745, 0, 300, 235, 417],
        vec![385, 7857, 515, 445, 488],
        vec![245, 174, 3929, 341, 212],
        vec![129, 125, 209, 3304, 153],
        vec![358, 367, 247, 205, 3397],
    ])
    .unwrap();
    let precision = [0.7973, 0.8108, 0.8017, 0.8429, 0.7427];
    let recall = [0.7703, 0.9219, 0.7556, 0.7294, 0.7279];
    let f1 = [0.7836, 0.8628, 0.7780, 0.7820, 0.7352];
    let mut worst = (0.0f64, String::new());
    let mut within = 0;
    for k in 0..5 {
        let m = class_metrics(&cm, k).unwrap();
        for (name, got, want) in [
            ("precision", m.precision, precision[k]),
            ("recall", m.recall, recall[k]),
            ("F1", m.f1, f1[k]),
        ] {
            let dev = (got - want).abs();
            if dev <= 5e-5 {
                within += 1;
            }
            if dev > worst.0 {
                worst = (dev, format!("class {k} {name} {got:.6} vs {want}"));
            }
        }
    }
    verdict(
        within == 15,
        format!("{within}/15 within 5e-5; worst {:.2e} at {}", worst.0, worst.1),
    )
}

// ---------------------------------------------------------------------------
// 2. Reference inter-class similarity summary
// ---------------------------------------------------------------------------

fn table1() -> Verdict {
    let m = CorrelationMatrix::from_values(
        vec![
            vec![0.4010, 0.2855, 0.4146, 0.4787, 0.3700],
            vec![0.2855, 0.5100, 0.0689, 0.0162, 0.0546],
            vec![0.4146, 0.0689, 0.4126, 0.2632, 0.3950],
            vec![0.4787, 0.0162, 0.2632, 0.3062, 0.2247],
            vec![0.3700, 0.0546, 0.3950, 0.2247, 0.3395],
        ],
        Axis::Class,
        None,
    )
    .unwrap();
    let cs = [0.3872, 0.1063, 0.2854, 0.2457, 0.3156];
    let pd = [3.44, 79.16, 30.83, 19.76, 7.04];
    let mut within = 0;
    let mut misses = Vec::new();
    for k in 0..5 {
        let row = similarity_stats(&m, k).unwrap();
        let got_cs = row.cross_similarity.unwrap();
        let got_pd = 100.0 * row.percentage_difference.unwrap();
        if (got_cs - cs[k]).abs() <= 5e-4 {
            within += 1;
        } else {
            misses.push(format!("class {k} CS {got_cs:.4} vs {}", cs[k]));
        }
        if (got_pd - pd[k]).abs() <= 0.02 {
            within += 1;
        } else {
            misses.push(format!("class {k} PD {got_pd:.2}% vs {}%", pd[k]));
        }
    }
    verdict(
        within == 10,
        format!(
            "{within}/10 within tolerance (CS 5e-4, PD 0.02 pp){}{}",
            if misses.is_empty() { "" } else { "; off: " },
            misses.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 3a. Autoencoder gradient check
// ---------------------------------------------------------------------------

fn params_mut(p: &mut Params) -> [&mut [f64]; 4] {
    [
        p.w_en.as_slice_mut().unwrap(),
        p.b_en.as_slice_mut().unwrap(),
        p.w_de.as_slice_mut().unwrap(),
        p.b_de.as_slice_mut().unwrap(),
    ]
}

/// Relative error `|a - n| / max(|a| + |n|, 1e-12)` over the whole gradient vector.
fn gradient_relative_error(model: &mut AutoencoderModel, x: &Array2<f64>) -> f64 {
    let (_, mut analytic) = model.loss_and_gradients(x).unwrap();
    let analytic: Vec<f64> = params_mut(&mut analytic)
        .iter()
        .flat_map(|s| s.to_vec())
        .collect();
    let h = 1e-5;
    let mut numeric = Vec::with_capacity(analytic.len());
    for block in 0..4 {
        let len = params_mut(&mut model.params)[block].len();
        for i in 0..len {
            let orig = params_mut(&mut model.params)[block][i];
            params_mut(&mut model.params)[block][i] = orig + h;
            let up = model.loss_and_gradients(x).unwrap().0;
            params_mut(&mut model.params)[block][i] = orig - h;
            let down = model.loss_and_gradients(x).unwrap().0;
            params_mut(&mut model.params)[block][i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    let diff: f64 = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm_a: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_n: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / (norm_a + norm_n).max(1e-12)
}

fn gradient_check() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut prng = rng::seeded(31);
    for activation in [Activation::Identity, Activation::Sigmoid] {
        for instance in 0..50u64 {
            let mut cfg = AutoencoderConfig::new(5, 3);
            cfg.activation = activation;
            cfg.seed = instance;
            let mut model = AutoencoderModel::init(cfg).unwrap();
            for block in params_mut(&mut model.params) {
                for v in block.iter_mut() {
                    *v = prng.random_range(-1.0..1.0);
                }
            }
            let x = Array2::from_shape_fn((4, 5), |_| prng.random_range(-2.0..2.0));
            worst = worst.max(gradient_relative_error(&mut model, &x));
        }
    }
    verdict(
        worst < 1e-4,
        format!("worst relative error {worst:.2e} over 100 instances (d=5, M=3, both activations; tol 1e-4)"),
    )
}

// ---------------------------------------------------------------------------
// 3b. Boosting loss monotonicity
// ---------------------------------------------------------------------------

fn monotone_loss() -> Verdict {
    let spec = SynthSpec {
        num_classes: 5,
        num_subjects: 4,
        dims: 16,
        samples_per_cell: 100,
        class_separation: 4.0,
        subject_jitter: 0.4,
        noise_sigma: 1.0,
        baseline: 1.0,
        seed: 2018,
    };
    let ds = synth_generate(&spec).unwrap();
    let mut cfg = BoostConfig::new(5);
    cfg.num_rounds = 50;
    cfg.subsample = 1.0;
    cfg.eta = 0.7;
    cfg.seed = 3;
    let model = boost::train(&ds, &cfg).unwrap();
    let worst = model
        .loss_history
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let h = &model.loss_history;
    verdict(
        ds.len() == 2000 && h.len() == 51 && worst <= 1e-9,
        format!(
            "n={}, loss {:.4} -> {:.3e}, largest per-round change {worst:.3e} (tol 1e-9)",
            ds.len(),
            h[0],
            h[h.len() - 1]
        ),
    )
}

// ---------------------------------------------------------------------------
// 3c. XOR
// ---------------------------------------------------------------------------

fn xor() -> Verdict {
    let data = [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
    let labels = [0, 1, 1, 0];
    let x = boost::FeatureMatrix::new(&data, 2).unwrap();
    let mut cfg = BoostConfig::new(2);
    cfg.max_depth = 2;
    cfg.num_rounds = 20;
    // Three of four rows per round: with all four, every first split of XOR has zero gain.
    cfg.subsample = 0.75;
    cfg.seed = 1;
    let model = boost::train_matrix(x, &labels, &cfg).unwrap();
    let correct = (0..4)
        .filter(|&i| model.predict(&data[2 * i..2 * i + 2]).unwrap().label == labels[i])
        .count();
    verdict(
        correct == 4,
        format!("{correct}/4 correct after 20 rounds (max_depth 2, subsample 0.75)"),
    )
}

// ---------------------------------------------------------------------------
// 3d. AUC oracle
// ---------------------------------------------------------------------------

fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn auc_oracle() -> Verdict {
    let mut prng = rng::seeded(77);
    let mut worst: f64 = 0.0;
    let mut fixtures = 0;
    while fixtures < 100 {
        let n = prng.random_range(2..=50);
        // Coarse grid half the time, to force ties.
        let coarse = prng.random_bool(0.5);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if coarse {
                    prng.random_range(0..5) as f64 / 4.0
                } else {
                    prng.random::<f64>()
                }
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| prng.random_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let (curve, auc) = roc_and_auc(&scores, &labels).unwrap();
        let oracle = brute_force_auc(&scores, &labels);
        worst = worst.max((auc - oracle).abs()).max((curve.area() - oracle).abs());
        fixtures += 1;
    }
    verdict(
        worst <= 1e-12,
        format!("max |AUC - pair count| {worst:.2e} over 100 fixtures, rank and trapezoid (tol 1e-12)"),
    )
}

// ---------------------------------------------------------------------------
// 3e. Pearson and exhaustive similarity oracles
// ---------------------------------------------------------------------------

fn reference_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sa * sb)
}

/// Mean correlation over all ordered pairs of distinct samples, one from each group.
fn all_pairs_mean(ds: &Dataset, a: &[usize], b: &[usize]) -> f64 {
    let (mut sum, mut count) = (0.0, 0.0);
    for &p in a {
        for &q in b {
            if p != q {
                sum += reference_pearson(&ds.samples()[p].features, &ds.samples()[q].features);
                count += 1.0;
            }
        }
    }
    sum / count
}

fn pearson_oracle() -> Verdict {
    let mut prng = rng::seeded(5);
    let mut worst_pair: f64 = 0.0;
    for _ in 0..100 {
        let n = prng.random_range(3..40);
        let a: Vec<f64> = (0..n).map(|_| prng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| 0.3 * x + prng.random_range(-5.0..5.0)).collect();
        worst_pair = worst_pair.max((pearson(&a, &b).unwrap() - reference_pearson(&a, &b)).abs());
    }

    let spec = SynthSpec {
        num_classes: 3,
        num_subjects: 2,
        dims: 8,
        samples_per_cell: 10,
        class_separation: 2.0,
        subject_jitter: 0.3,
        noise_sigma: 1.0,
        baseline: 1.0,
        seed: 12,
    };
    let ds = synth_generate(&spec).unwrap();
    let members = |class: usize, subject: usize| -> Vec<usize> {
        (0..ds.len())
            .filter(|&i| ds.samples()[i].label == class && ds.samples()[i].subject == subject)
            .collect()
    };
    let budget = 1000;
    let mut worst_matrix: f64 = 0.0;
    for s in 0..2 {
        let m = similarity::inter_class_matrix(&ds, s, budget, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let oracle = all_pairs_mean(&ds, &members(i, s), &members(j, s));
                worst_matrix = worst_matrix.max((m.values[i][j] - oracle).abs());
            }
        }
    }
    for c in 0..3 {
        let m = similarity::inter_person_matrix(&ds, c, budget, 1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let oracle = all_pairs_mean(&ds, &members(c, i), &members(c, j));
                worst_matrix = worst_matrix.max((m.values[i][j] - oracle).abs());
            }
        }
    }
    verdict(
        worst_pair <= 1e-12 && worst_matrix <= 1e-12,
        format!(
            "pearson max error {worst_pair:.2e}, exhaustive matrix max error {worst_matrix:.2e} (tol 1e-12)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3f. End-to-end benchmark, 3g. determinism
// ---------------------------------------------------------------------------

fn benchmark() -> Verdict {
    let cfg = benchmark_config();
    let ds = benchmark_dataset();
    let out = pipeline::run_on_dataset(&ds, &RunSettings::of(&cfg), RunSeeds::from_base(cfg.seed)).unwrap();
    let r = &out.report;
    let acc = r.accuracy();
    let base = r.baseline.majority_accuracy;
    verdict(
        r.data.n_train == 2000 && r.data.n_test == 500 && acc >= 0.90 && acc - base >= 0.50,
        format!(
            "{} train / {} test, accuracy {acc:.4} (>= 0.90), majority baseline {base:.4}, margin {:.4} (>= 0.50)",
            r.data.n_train,
            r.data.n_test,
            acc - base
        ),
    )
}

fn determinism() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut reports = Vec::new();
    for dir in &dirs {
        let mut cfg = benchmark_config();
        cfg.output_dir = dir.path().to_path_buf();
        pipeline::run_pipeline(&cfg).unwrap();
        reports.push(std::fs::read(dir.path().join("report.json")).unwrap());
    }
    verdict(
        reports[0] == reports[1],
        format!(
            "report.json {} bytes, identical: {}",
            reports[0].len(),
            reports[0] == reports[1]
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Hypothesis checks
// ---------------------------------------------------------------------------

fn hypotheses() -> Verdict {
    let separation = 4.0;
    let structured = SynthSpec {
        num_classes: 5,
        num_subjects: 4,
        dims: 64,
        samples_per_cell: 30,
        class_separation: separation,
        subject_jitter: 0.1 * separation,
        noise_sigma: 1.0,
        baseline: 0.0,
        seed: 404,
    };
    let ds = synth_generate(&structured).unwrap();
    let out = pipeline::similarity_on_dataset(&ds, 1000, 1).unwrap();
    let h1 = &out.hypotheses.self_above_cross;

    let noise = SynthSpec {
        class_separation: 0.0,
        subject_jitter: 0.0,
        baseline: 2.0,
        seed: 405,
        ..structured
    };
    let ds = synth_generate(&noise).unwrap();
    let noise_out = pipeline::similarity_on_dataset(&ds, 1000, 1).unwrap();
    let mut pds: Vec<f64> = noise_out
        .report
        .inter_class
        .rows
        .iter()
        .filter_map(|r| r.percentage_difference)
        .collect();
    if let Some(p) = &noise_out.report.inter_person {
        pds.extend(p.cells.iter().flatten().filter_map(|r| r.percentage_difference));
    }
    let mean_abs_pd = pds.iter().map(|p| p.abs()).sum::<f64>() / pds.len() as f64;

    verdict(
        h1.inter_class_holds && h1.inter_person_holds == Some(true) && mean_abs_pd < 0.05,
        format!(
            "structured: H1 inter-class {}, inter-person {:?} (min margin {:.4}); noise: mean |PD| {:.2}% over {} rows (< 5%)",
            h1.inter_class_holds,
            h1.inter_person_holds,
            h1.min_margin.unwrap_or(f64::NAN),
            100.0 * mean_abs_pd,
            pds.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Normalization sweep
// ---------------------------------------------------------------------------

fn normalization_sweep() -> Verdict {
    let mut cfg = benchmark_config();
    cfg.repeats = 5;
    cfg.sweep = Some(Sweep::Normalization);
    let ds = benchmark_dataset();
    let summary = pipeline::sweep_on_dataset(&ds, &cfg, &Sweep::Normalization, None).unwrap();
    let zscore = summary
        .points
        .iter()
        .position(|p| p.axis_value == "zscore")
        .unwrap();
    let mut wins = 0;
    let mut per_rep = Vec::new();
    for r in 0..5 {
        let errors: Vec<Option<f64>> = summary.points.iter().map(|p| p.runs[r].test_error).collect();
        let min = errors.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        if errors[zscore] == Some(min) {
            wins += 1;
        }
        per_rep.push(
            errors
                .iter()
                .map(|e| e.map_or("fail".to_string(), |e| format!("{e:.3}")))
                .collect::<Vec<_>>()
                .join("/"),
        );
    }
    let names: Vec<&str> = summary.points.iter().map(|p| p.axis_value.as_str()).collect();
    verdict(
        summary.points.len() == 3 && wins >= 4,
        format!(
            "{} points, z-score at minimum in {wins}/5 repetitions (>= 4); errors {} per rep: {}",
            summary.points.len(),
            names.join("/"),
            per_rep.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        criterion("1", "confusion-matrix metrics regression", secs(1), table3),
        criterion("2", "similarity convention regression", secs(1), table1),
        criterion("3a", "autoencoder gradient check", secs(10), gradient_check),
        criterion("3b", "boosting loss monotonicity", secs(30), monotone_loss),
        criterion("3c", "XOR expressiveness", secs(1), xor),
        criterion("3d", "AUC oracle equivalence", secs(5), auc_oracle),
        criterion("3e", "Pearson oracle equivalence", secs(10), pearson_oracle),
        criterion("3f", "end-to-end synthetic benchmark", secs(300), benchmark),
        criterion("3g", "end-to-end determinism", secs(600), determinism),
        criterion("4", "hypothesis-check fidelity", secs(60), hypotheses),
        criterion("5", "normalization sweep", secs(900), normalization_sweep),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
