//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values (run with `--nocapture` to see
//! them). Every tolerance is pinned in code.

use std::path::Path;
use std::process::Command;

use dptext_core::dp::{clip_gradient, noise_sigma, BudgetLedger, ClipNorm, GradientVector};
use dptext_core::features::FeatureVector;
use dptext_core::metrics::{confusion, metrics, Averaging};
use dptext_core::model::{gradient, loss, LabeledExample, ModelParams};
use dptext_core::rng::{substream, StreamKind};
use dptext_core::text::{clean_document, lemmatize, strip_markup, StopwordList};
use dptext_core::trainer::{train_baseline, train_dp, training_accuracy, ClipMode, TrainConfig};
use dptext_core::PrivacyParams;
use rand::Rng;

/// Splitmix-style generator, independent of the library's RNG streams.
struct Mix(u64);

impl Mix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn criterion_01_f1_consistency() {
    // 1000 predictions engineered so the positive class has
    // P = 748/880 = 0.85 and R = 748/850 = 0.88 exactly
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut push = |n: usize, p: usize, l: usize| {
        preds.extend(std::iter::repeat_n(p, n));
        labels.extend(std::iter::repeat_n(l, n));
    };
    push(748, 1, 1); // true positives
    push(132, 1, 0); // false positives
    push(102, 0, 1); // false negatives
    push(18, 0, 0); // true negatives
    let counts = confusion(&preds, &labels, 2).unwrap();
    let report = metrics(&counts, Averaging::BinaryPositiveClass);
    assert!((report.precision - 0.85).abs() < 1e-12);
    assert!((report.recall - 0.88).abs() < 1e-12);
    assert!(
        (report.f1 - 0.8647).abs() <= 0.0005,
        "F1 {} not within 0.8647 +/- 0.0005",
        report.f1
    );
    assert_eq!((report.f1 * 100.0).round() / 100.0, 0.86);
    println!(
        "PASS f1-consistency: P={} R={} -> F1={:.6} (0.8647 +/- 0.0005, rounds to 0.86)",
        report.precision, report.recall, report.f1
    );
}

#[test]
fn criterion_02_clipping_suite() {
    let mut rng = Mix(0xC11F);
    for trial in 0..1000 {
        let dim = 1 + rng.below(100);
        let c = 0.1 + 4.9 * rng.unit();
        let clip = ClipNorm::new(c).unwrap();
        // random direction scaled to a target norm in [0, 10c]
        let direction: Vec<f64> = (0..dim).map(|_| rng.unit() * 2.0 - 1.0).collect();
        let raw_norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        let target = 10.0 * c * rng.unit();
        let values: Vec<f64> = if raw_norm == 0.0 {
            direction
        } else {
            direction.iter().map(|v| v * target / raw_norm).collect()
        };
        let g = GradientVector::new(values);
        let clipped = clip_gradient(&g, clip).unwrap();
        assert!(
            clipped.l2_norm() <= c + 1e-12,
            "trial {trial}: norm {} exceeds clip {c}",
            clipped.l2_norm()
        );
        if g.l2_norm() <= c {
            assert_eq!(clipped, g, "trial {trial}: in-bound gradient must pass through bitwise");
        }
    }
    println!("PASS clipping-suite: 1000 random gradients bounded by C + 1e-12, identity below C");
}

#[test]
fn criterion_03_noise_calibration() {
    let params = PrivacyParams::new(1.0, 1e-5).unwrap();
    let spec = noise_sigma(&params);
    let sigma = spec.sigma();
    assert!((sigma - 4.798525912188081).abs() < 1e-12);

    let n = 100_000usize;
    let mut rng = substream(90, StreamKind::Noise);
    let sample = dptext_core::sample_noise(&spec, n, &mut rng);
    let mean = sample.as_slice().iter().sum::<f64>() / n as f64;
    let var = sample
        .as_slice()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();

    let mean_bound = 4.0 * sigma / (n as f64).sqrt();
    assert!(
        mean.abs() <= mean_bound,
        "empirical mean {mean} outside 4 sigma/sqrt(n) = {mean_bound}"
    );
    assert!(
        (std - sigma).abs() / sigma <= 0.02,
        "empirical std {std} more than 2% from sigma {sigma}"
    );
    println!(
        "PASS noise-calibration: sigma={sigma:.5}, empirical std={std:.5} (within 2%), |mean|={:.2e} (bound {mean_bound:.2e})",
        mean.abs()
    );
}

#[test]
fn criterion_04_gradient_correctness() {
    let mut rng = substream(61, StreamKind::Shuffle);
    let mut checked = 0usize;
    for trial in 0..50 {
        let k = rng.random_range(2..=3usize);
        let v = rng.random_range(1..=5usize);
        let n = rng.random_range(1..=10usize);
        let weights: Vec<f64> = (0..k * v).map(|_| rng.random_range(-1.5..1.5)).collect();
        let biases: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let theta = ModelParams::from_parts(weights, biases, k, v).unwrap();
        let batch: Vec<LabeledExample> = (0..n)
            .map(|_| {
                let nnz = rng.random_range(1..=v);
                let pairs: Vec<(usize, f64)> = (0..nnz)
                    .map(|_| (rng.random_range(0..v), rng.random_range(0.0..2.0)))
                    .collect();
                LabeledExample::new(
                    FeatureVector::from_entries(pairs, v).unwrap(),
                    rng.random_range(0..k),
                )
            })
            .collect();
        let l2 = if trial % 2 == 0 { 0.0 } else { 0.02 };
        let analytic = gradient(&theta, &batch, l2).unwrap();
        let h = 1e-5;
        let flat = theta.flatten();
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += h;
            let mut minus = flat.clone();
            minus[i] -= h;
            let lp = loss(&ModelParams::from_flat(k, v, &plus).unwrap(), &batch, l2).unwrap();
            let lm = loss(&ModelParams::from_flat(k, v, &minus).unwrap(), &batch, l2).unwrap();
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.as_slice()[i];
            let denominator = a.abs().max(1.0);
            assert!(
                (a - numeric).abs() / denominator < 1e-6,
                "trial {trial}, coordinate {i}: analytic {a} vs central difference {numeric}"
            );
            checked += 1;
        }
    }
    println!(
        "PASS gradient-correctness: {checked} coordinates across 50 random instances within 1e-6 of central differences"
    );
}

/// 500-document, two-class, linearly separable corpus: disjoint blocks of
/// four word types per class, 24 tokens per document, raw counts.
fn separable_corpus() -> Vec<LabeledExample> {
    let words_per_class = 4;
    let doc_len = 24;
    let num_features = 2 * words_per_class;
    let mut rng = Mix(2024);
    (0..500)
        .map(|i| {
            let label = i % 2;
            let base = label * words_per_class;
            let mut counts = vec![0.0f64; num_features];
            for _ in 0..doc_len {
                counts[base + rng.below(words_per_class)] += 1.0;
            }
            let entries: Vec<(usize, f64)> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0.0)
                .map(|(j, &c)| (j, c))
                .collect();
            LabeledExample::new(
                FeatureVector::from_entries(entries, num_features).unwrap(),
                label,
            )
        })
        .collect()
}

#[test]
fn criterion_05_degeneracy() {
    let data = separable_corpus();
    let config = TrainConfig {
        noise_enabled: false,
        clip: ClipNorm::new(1e9).unwrap(),
        clip_mode: ClipMode::Batch,
        epochs: 5,
        ..TrainConfig::default()
    };
    let (dp_theta, dp_report, _) = train_dp(&data, &config).unwrap();
    let (base_theta, base_report) = train_baseline(&data, &config).unwrap();
    assert_eq!(
        dp_theta.flatten(),
        base_theta.flatten(),
        "noise-free loosely-clipped DP training must equal the baseline bitwise"
    );
    assert_eq!(dp_report.epoch_losses, base_report.epoch_losses);
    println!(
        "PASS degeneracy: {} parameters bitwise-equal after {} steps",
        dp_theta.flatten().len(),
        dp_report.steps_taken
    );
}

#[test]
fn criterion_06_privacy_utility_trend() {
    let data = separable_corpus();

    let baseline_config = TrainConfig::default();
    let (baseline_theta, _) = train_baseline(&data, &baseline_config).unwrap();
    let baseline_acc = training_accuracy(&baseline_theta, &data).unwrap();
    assert!(
        baseline_acc >= 0.95,
        "baseline training accuracy {baseline_acc} below 0.95"
    );

    // default config at epsilon = 4
    let dp_config = TrainConfig {
        privacy: PrivacyParams::new(4.0, 1e-5).unwrap(),
        ..TrainConfig::default()
    };
    let (dp_theta, _, _) = train_dp(&data, &dp_config).unwrap();
    let dp_acc = training_accuracy(&dp_theta, &data).unwrap();
    assert!(dp_acc >= 0.80, "DP training accuracy {dp_acc} below 0.80");

    // mean accuracy over five seeds must be non-decreasing in epsilon
    // (0.02 tolerance per adjacent pair)
    let epsilons = [0.5, 1.0, 4.0];
    let mut means = Vec::new();
    for &epsilon in &epsilons {
        let mut total = 0.0;
        for seed in 1..=5u64 {
            let config = TrainConfig {
                privacy: PrivacyParams::new(epsilon, 1e-5).unwrap(),
                seed,
                ..TrainConfig::default()
            };
            let (theta, _, _) = train_dp(&data, &config).unwrap();
            total += training_accuracy(&theta, &data).unwrap();
        }
        means.push(total / 5.0);
    }
    for pair in means.windows(2) {
        assert!(
            pair[1] >= pair[0] - 0.02,
            "mean accuracy decreased along epsilon: {means:?}"
        );
    }
    println!(
        "PASS privacy-utility-trend: baseline={baseline_acc:.3}, dp(eps=4)={dp_acc:.3}, means over 5 seeds at eps {epsilons:?} = {means:?}"
    );
}

#[test]
fn criterion_07_metrics_oracle() {
    let mut rng = Mix(0x0E7A);
    for trial in 0..100 {
        let k = 2 + rng.below(3);
        let n = 1 + rng.below(50);
        let preds: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let averaging = Averaging::for_num_classes(k);
        let report = metrics(&confusion(&preds, &labels, k).unwrap(), averaging);

        // brute-force recount, independent of the library path
        let count = |f: &dyn Fn(usize, usize) -> bool| {
            preds
                .iter()
                .zip(&labels)
                .filter(|&(&p, &l)| f(p, l))
                .count() as f64
        };
        let acc = count(&|p, l| p == l) / n as f64;
        let prf = |class: usize| {
            let tp = count(&|p, l| p == class && l == class);
            let predicted = count(&|p, _| p == class);
            let actual = count(&|_, l| l == class);
            let precision = if predicted == 0.0 { 0.0 } else { tp / predicted };
            let recall = if actual == 0.0 { 0.0 } else { tp / actual };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            (precision, recall, f1)
        };
        let (precision, recall, f1) = match averaging {
            Averaging::BinaryPositiveClass => prf(1),
            Averaging::Macro => {
                let mut sums = (0.0, 0.0, 0.0);
                for class in 0..k {
                    let (p, r, f) = prf(class);
                    sums = (sums.0 + p, sums.1 + r, sums.2 + f);
                }
                (sums.0 / k as f64, sums.1 / k as f64, sums.2 / k as f64)
            }
        };
        assert!((report.accuracy - acc).abs() <= 1e-12, "trial {trial}: accuracy");
        assert!((report.precision - precision).abs() <= 1e-12, "trial {trial}: precision");
        assert!((report.recall - recall).abs() <= 1e-12, "trial {trial}: recall");
        assert!((report.f1 - f1).abs() <= 1e-12, "trial {trial}: f1");
    }
    println!("PASS metrics-oracle: 100 random prediction sets match the brute-force recount to 1e-12");
}

#[test]
fn criterion_08_ledger_exactness() {
    let step = PrivacyParams::new(0.1, 1e-6).unwrap();
    let mut ledger = BudgetLedger::unbounded(step);
    for _ in 0..10 {
        ledger.charge_step().unwrap();
    }
    assert_eq!(ledger.spent_epsilon(), 10.0 * 0.1);
    assert_eq!(ledger.spent_epsilon(), 1.0);

    let step = PrivacyParams::new(0.4, 1e-6).unwrap();
    let mut capped = BudgetLedger::new(step, Some(3.0 * 0.4), None).unwrap();
    assert!(capped.charge_step().is_ok());
    assert!(capped.charge_step().is_ok());
    assert!(capped.charge_step().is_ok());
    assert!(capped.charge_step().is_err(), "fourth charge must exhaust a 3-step cap");
    assert_eq!(capped.steps_taken(), 3);
    assert_eq!(capped.spent_epsilon(), 3.0 * 0.4);
    println!(
        "PASS ledger-exactness: spent epsilon is exactly steps x step-epsilon; cap of 3e admits exactly 3 steps"
    );
}

fn write_demo_corpus(path: &Path) {
    let lending = ["borrow", "book", "lend", "library"];
    let privacy = ["consent", "record", "disclosure", "retention"];
    let mut rng = Mix(7);
    let mut lines = String::new();
    for i in 0..120 {
        let (words, label) = if i % 2 == 0 {
            (&lending, "lending")
        } else {
            (&privacy, "privacy")
        };
        let body: Vec<&str> = (0..12).map(|_| words[rng.below(4)]).collect();
        lines.push_str(&format!(
            "id=doc{i:03}\tlabel={label}\ttext={}\n",
            body.join(" ")
        ));
    }
    std::fs::write(path, lines).unwrap();
}

#[test]
fn criterion_09_determinism() {
    let bin = env!("CARGO_BIN_EXE_dptext");
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("cleaned.txt");
    write_demo_corpus(&corpus);

    let vocab = dir.path().join("vocab.tsv");
    let output = Command::new(bin)
        .args(["vocab", "--corpus"])
        .arg(&corpus)
        .arg("--out")
        .arg(&vocab)
        .output()
        .unwrap();
    assert!(output.status.success());

    let mut outputs = Vec::new();
    for run in 0..2 {
        let model = dir.path().join(format!("model-{run}.ckpt"));
        let report = dir.path().join(format!("report-{run}.txt"));
        let output = Command::new(bin)
            .args(["train", "--corpus"])
            .arg(&corpus)
            .arg("--vocab")
            .arg(&vocab)
            .arg("--model")
            .arg(&model)
            .arg("--report")
            .arg(&report)
            .args(["--seed", "42", "--epochs", "5", "--epsilon", "1"])
            .output()
            .unwrap();
        assert!(output.status.success());
        outputs.push((
            std::fs::read(&model).unwrap(),
            std::fs::read(&report).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "checkpoints must be byte-identical");
    assert_eq!(outputs[0].1, outputs[1].1, "run reports must be byte-identical");
    println!(
        "PASS determinism: two train invocations produced byte-identical checkpoints ({} bytes) and reports ({} bytes)",
        outputs[0].0.len(),
        outputs[0].1.len()
    );
}

#[test]
fn criterion_10_cleaning_spot_checks() {
    assert_eq!(lemmatize("borrowing"), "borrow");
    assert_eq!(lemmatize("books"), "book");

    let snippet = "<p>LIBRARY LENDING POLICY</p> <p>(1) any reader interested in \
                   borrowing books must register;</p> <p>(2) the term \"reader\" \
                   means any person holding a card under section 12(b);</p>";
    let stripped = strip_markup(snippet);
    assert!(!stripped.contains('<') && !stripped.contains('>'), "markup must be fully stripped");
    assert!(stripped.contains("borrowing books"));

    let tokens = clean_document(snippet, &StopwordList::english());
    assert!(tokens.contains(&"borrow".to_string()));
    assert!(tokens.contains(&"book".to_string()));
    println!(
        "PASS cleaning-spot-checks: borrowing->borrow, books->book, markup stripped ({} tokens survive)",
        tokens.len()
    );
}
