//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tif_core::data::{
    chronological_split, derive_time_features, generate_drift, DriftConfig, PrepOptions, RawRecord, RecordSet,
    Timestamp,
};
use tif_core::harness::{run_experiment, ExperimentConfig, TABLE_CSV, TABLE_TEXT};
use tif_core::losses::{bce, tif_weight, LossSpec, LossVariant};
use tif_core::metrics::{auc, auc_brute_force, rela_imp};
use tif_core::models::{Interaction, Model, ModelSpec};
use tif_core::trainer::{train, Reduction, TrainConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn weight(v: LossVariant, t: u32, n: u32) -> f64 {
    tif_weight(&LossSpec::new(v, n), t).unwrap()
}

fn weight_formulas() -> Outcome {
    use LossVariant::*;
    let cases = [
        ("linear(t=N)", weight(Linear, 10, 10), 1.0),
        ("anti(t=1)", weight(Anti, 1, 10), 1.0),
        ("exponential(t=N)", weight(Exponential, 10, 10), 1.0),
        ("logarithmic(t=N)", weight(Logarithmic, 10, 10), 1.0),
        ("linear(t=1,N=10)", weight(Linear, 1, 10), 0.1),
    ];
    for (name, got, want) in cases {
        check((got - want).abs() <= 1e-12, || format!("{name} = {got}, expected {want}"))?;
    }
    let mut worst: f64 = 0.0;
    for n in 1..=20u32 {
        for t in 1..=n {
            let naive = (f64::from(t).exp() - 1.0) / (f64::from(n).exp() - 1.0);
            let rel = (weight(Exponential, t, n) - naive).abs() / naive;
            worst = worst.max(rel);
        }
    }
    check(worst <= 1e-12, || format!("overflow-safe exponential differs from naive by rel {worst:e}"))?;
    for t in 1..=10_000 {
        let w = weight(Exponential, t, 10_000);
        check(w.is_finite() && w > 0.0 && w <= 1.0, || format!("exponential(t={t}, N=10000) = {w}"))?;
    }
    Ok(format!("boundary values exact; exp vs naive max rel {worst:.1e}; N=10000 finite"))
}

/// Central differences with the given step.
fn numeric_gradient(x: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn gradient_correctness() -> Outcome {
    const CONFIGS: usize = 120;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for k in 0..CONFIGS {
        let interaction = Interaction::ALL[k % 3];
        let field_count = rng.random_range(2..=4);
        let spec = ModelSpec {
            interaction,
            embedding_dim: rng.random_range(1..=4),
            hidden_widths: (0..rng.random_range(1..=2)).map(|_| rng.random_range(1..=5)).collect(),
            cross_depth: rng.random_range(1..=3),
            field_count,
            fm_first_order: rng.random_bool(0.5),
        };
        let vocab = rng.random_range(2..=7);
        let mut model = Model::build(spec, vocab, k as u64).map_err(|e| e.to_string())?;
        let params: Vec<f64> = (0..model.parameter_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
        model.set_flat_params(&params).map_err(|e| e.to_string())?;
        let features: Vec<u32> = (0..field_count).map(|_| rng.random_range(0..vocab as u32)).collect();
        let label = rng.random_range(0..=1u8);
        let variant = LossVariant::ALL[rng.random_range(0..LossVariant::ALL.len())];
        let n = rng.random_range(1..=30);
        let loss = LossSpec::new(variant, n).with_alpha(rng.random_range(0.5..2.0));
        let t = rng.random_range(1..=n);
        let w = tif_weight(&loss, t).map_err(|e| e.to_string())?;

        let (_, grads) = model.forward_backward(&features, label, w).map_err(|e| e.to_string())?;
        let analytic = grads.flatten();
        let numeric = numeric_gradient(&params, 1e-6, |q| {
            let mut probe = model.clone();
            probe.set_flat_params(q).unwrap();
            w * bce(label, probe.predict(&features).unwrap()).unwrap()
        });
        for (i, (a, b)) in analytic.iter().zip(&numeric).enumerate() {
            // relative error, with an absolute floor for near-zero components
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(w * 1e-3);
            worst = worst.max(rel);
            check(rel <= 1e-4, || {
                format!("config {k} ({interaction}, {variant}) param {i}: analytic {a} vs numeric {b}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{CONFIGS} random models, {checked} partials, max rel err {worst:.1e}"))
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ties = 0;
    for k in 0..200 {
        let n = rng.random_range(2..=1000);
        let levels = [2u32, 5, 50, 1_000_000][k % 4];
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels))
            .collect();
        if levels < 1000 {
            ties += 1;
        }
        let fast = auc(&labels, &scores).map_err(|e| e.to_string())?;
        let brute = auc_brute_force(&labels, &scores);
        check(fast == brute, || format!("instance {k} (n={n}): rank {fast} vs brute force {brute}"))?;
    }
    Ok(format!("200 instances exact, {ties} with heavy ties"))
}

fn relaimp_table() -> Outcome {
    let rows = [
        ("DNN", 0.7462, 0.7479, 0.69),
        ("DCN", 0.7454, 0.7467, 0.53),
        ("DeepFM", 0.7459, 0.7500, 1.66),
        ("FiBiNET", 0.7401, 0.7456, 2.29),
        ("PNN", 0.7476, 0.7499, 0.93),
        ("MaskNet", 0.7428, 0.7464, 1.48),
        ("FinalMLP", 0.7480, 0.7506, 1.05),
    ];
    let mut worst: f64 = 0.0;
    for (name, base, new, printed) in rows {
        let got = rela_imp(base, new).map_err(|e| e.to_string())?;
        worst = worst.max((got - printed).abs());
        check((got - printed).abs() <= 0.02, || format!("{name}: {got:.4}% vs printed {printed}%"))?;
    }
    Ok(format!("7 rows within {worst:.4} pp"))
}

fn drift_experiment() -> ExperimentConfig {
    ExperimentConfig::default()
}

struct DriftRun {
    dir: tempfile::TempDir,
    elapsed: Duration,
}

fn run_drift() -> Result<DriftRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let outcome = run_experiment(&drift_experiment(), dir.path()).map_err(|e| e.to_string())?;
    if !outcome.failures.is_empty() {
        return Err(format!("failed cells: {:?}", outcome.failures));
    }
    Ok(DriftRun {
        dir,
        elapsed: started.elapsed(),
    })
}

fn tif_beats_plain(run: &DriftRun) -> Outcome {
    let table = tif_core::harness::report(run.dir.path(), None).map_err(|e| e.to_string())?;
    let median = |v| {
        table
            .row(Interaction::MlpOnly, v)
            .map(|r| r.auc.median)
            .ok_or_else(|| format!("missing row for {v}"))
    };
    let (plain, linear, anti) = (
        median(LossVariant::Plain)?,
        median(LossVariant::Linear)?,
        median(LossVariant::Anti)?,
    );
    let detail = format!(
        "median test AUC plain {plain:.4}, tif_linear {linear:.4}, tif_anti {anti:.4}; {:.0}s",
        run.elapsed.as_secs_f64()
    );
    check(linear >= plain + 0.002, || format!("tif_linear below plain + 0.002: {detail}"))?;
    check(plain >= anti, || format!("plain below tif_anti: {detail}"))?;
    check(run.elapsed < Duration::from_secs(300), || format!("over 5 minutes: {detail}"))?;
    Ok(detail)
}

fn variant_ordering() -> Outcome {
    use LossVariant::*;
    let mut pairs = 0u64;
    for n in 2..=1000u32 {
        for t in 1..n {
            let (e, l, g) = (weight(Exponential, t, n), weight(Linear, t, n), weight(Logarithmic, t, n));
            check(e < l && l < g, || format!("t={t}, N={n}: exp {e}, lin {l}, log {g}"))?;
            pairs += 1;
        }
        let at_n = [weight(Exponential, n, n), weight(Linear, n, n), weight(Logarithmic, n, n)];
        check(at_n == [1.0; 3], || format!("t=N={n}: {at_n:?}"))?;
    }
    Ok(format!("{pairs} (t, N) pairs strictly ordered, equal at t=N"))
}

fn degenerate_equivalence() -> Outcome {
    let small = |n_days| DriftConfig {
        n_days,
        samples_per_day: 2000,
        field_count: 4,
        cardinality: 10,
        seed: 11,
        ..DriftConfig::default()
    };
    let config = |ds: &tif_core::data::DayIndexedDataset, v| {
        let mut model = ModelSpec::new(Interaction::MlpOnly, ds.field_count());
        model.embedding_dim = 8;
        model.hidden_widths = vec![16];
        let mut c = TrainConfig::new(model, LossSpec::new(v, ds.n_days), 5);
        c.max_epochs = 3;
        c
    };
    let one_day = generate_drift(&small(1)).and_then(|d| d.dataset()).map_err(|e| e.to_string())?;
    check(one_day.n_days == 1, || format!("expected N=1, got {}", one_day.n_days))?;
    let (base_model, base_run) = train(&one_day, &config(&one_day, LossVariant::Plain)).map_err(|e| e.to_string())?;
    for v in LossVariant::ALL {
        let (m, r) = train(&one_day, &config(&one_day, v)).map_err(|e| e.to_string())?;
        check(m.flat_params() == base_model.flat_params(), || format!("{v} at N=1 differs from plain"))?;
        check(
            r.epochs == base_run.epochs && r.best_epoch == base_run.best_epoch,
            || format!("{v} at N=1 has a different training curve"),
        )?;
    }
    // plain on many days: normalising by the weight sum is the same division as the batch mean
    let many = generate_drift(&small(6)).and_then(|d| d.dataset()).map_err(|e| e.to_string())?;
    let mean = config(&many, LossVariant::Plain);
    let weight_sum = TrainConfig {
        reduction: Reduction::WeightSum,
        ..mean.clone()
    };
    let (a, _) = train(&many, &mean).map_err(|e| e.to_string())?;
    let (b, _) = train(&many, &weight_sum).map_err(|e| e.to_string())?;
    check(a.flat_params() == b.flat_params(), || "plain differs from weight-normalised plain".into())?;
    Ok(format!(
        "all {} variants bit-identical at N=1; plain bit-identical across reductions (checksum {})",
        LossVariant::ALL.len(),
        &a.checksum()[..12]
    ))
}

fn timestamp_derivation() -> Outcome {
    for (stamp, hour, weekday, weekend) in [("14102100", 0, 1, false), ("14102523", 23, 5, true)] {
        let f = derive_time_features(stamp).map_err(|e| e.to_string())?;
        check(
            (f.hour, f.weekday, f.is_weekend) == (hour, weekday, weekend),
            || format!("{stamp}: {f:?}"),
        )?;
    }
    Ok("14102100 -> (0, Tue, weekday); 14102523 -> (23, Sat, weekend)".into())
}

fn determinism(first: &DriftRun) -> Outcome {
    let second = run_drift()?;
    for file in [TABLE_TEXT, TABLE_CSV] {
        let a = std::fs::read(first.dir.path().join(file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.dir.path().join(file)).map_err(|e| e.to_string())?;
        check(a == b, || format!("{file} differs between runs"))?;
    }
    Ok(format!("text and CSV tables byte-identical; rerun {:.0}s", second.elapsed.as_secs_f64()))
}

fn random_records(rng: &mut ChaCha8Rng) -> RecordSet {
    let days = rng.random_range(1..=12u64);
    let n = rng.random_range(1..=400);
    let start = DriftConfig::start_date();
    let records = (0..n)
        .map(|_| {
            // sparse hours force many ties
            let date = start + chrono::Days::new(rng.random_range(0..days) * rng.random_range(1..=3));
            RawRecord {
                timestamp: Timestamp::new(date, rng.random_range(0..4) * 6).unwrap(),
                values: vec![format!("v{}", rng.random_range(0..5)), format!("w{}", rng.random_range(0..30))],
                label: rng.random_range(0..=1),
            }
        })
        .collect();
    RecordSet {
        fields: vec!["a".into(), "b".into()],
        records,
    }
}

fn split_invariant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for k in 0..100 {
        let set = random_records(&mut rng);
        let opts = PrepOptions {
            ratios: [rng.random_range(1..=10), rng.random_range(0..=3), rng.random_range(0..=3)],
            min_frequency: rng.random_range(1..=3),
            time_features: rng.random_bool(0.5),
            day_aligned: rng.random_bool(0.5),
        };
        let ds = chronological_split(&set, &opts).map_err(|e| format!("dataset {k}: {e}"))?;
        let ts = &ds.timestamps;
        let (tr, va) = (ds.train_end, ds.val_end);
        check(ts.windows(2).all(|w| w[0] <= w[1]), || format!("dataset {k}: not sorted"))?;
        check(tr == 0 || tr == ts.len() || ts[tr - 1] < ts[tr], || format!("dataset {k}: train/val interleave"))?;
        check(va == tr || va == ts.len() || ts[va - 1] < ts[va], || format!("dataset {k}: val/test interleave"))?;
        let mut days: Vec<u32> = ds.train().iter().map(|s| s.day).collect();
        days.dedup();
        check(days == (1..=ds.n_days).collect::<Vec<_>>(), || format!("dataset {k}: train days {days:?}"))?;
        ds.check_invariants().map_err(|e| format!("dataset {k}: {e}"))?;
        checked += 1;
    }
    Ok(format!("{checked} random datasets"))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut drift: Option<DriftRun> = None;
    let mut failed = 0;
    let criteria: [(&str, &dyn Fn(&mut Option<DriftRun>) -> Outcome); 10] = [
        ("weight formulas", &|_| weight_formulas()),
        ("gradient correctness", &|_| gradient_correctness()),
        ("AUC oracle equivalence", &|_| auc_oracle()),
        ("RelaImp reproduces published values", &|_| relaimp_table()),
        ("synthetic drift: tif_linear > plain >= tif_anti", &|d| {
            let run = run_drift()?;
            let r = tif_beats_plain(&run);
            *d = Some(run);
            r
        }),
        ("variant ordering", &|_| variant_ordering()),
        ("degenerate equivalence", &|_| degenerate_equivalence()),
        ("timestamp derivation", &|_| timestamp_derivation()),
        ("determinism of compare tables", &|d| match d {
            Some(run) => determinism(run),
            None => determinism(&run_drift()?),
        }),
        ("split invariant", &|_| split_invariant()),
    ];
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| f(&mut drift)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/10 passed in {:.0}s",
        10 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
