use tif_core::harness::{run_experiment, ComparisonTable, DatasetSource, ExperimentConfig};
use tif_core::data::DriftConfig;
use tif_core::losses::LossVariant;
use tif_core::models::Interaction;

fn experiment(drift_rate: f64, models: Vec<Interaction>) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dataset = DatasetSource::Synthetic {
        drift: DriftConfig {
            samples_per_day: 2000,
            drift_rate,
            ..DriftConfig::default()
        },
        seed_per_run: true,
    };
    c.models = models;
    c.model.hidden_widths = vec![32];
    c.model.embedding_dim = 8;
    c.seeds = vec![1, 2, 3];
    c.jobs = 2;
    c
}

fn run(c: &ExperimentConfig) -> ComparisonTable {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(c, dir.path()).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    outcome.table
}

fn median_auc(t: &ComparisonTable, m: Interaction, v: LossVariant) -> f64 {
    t.row(m, v).unwrap().auc.median
}

#[test]
fn without_drift_recency_weighting_changes_little() {
    let t = run(&experiment(0.0, vec![Interaction::MlpOnly]));
    let plain = median_auc(&t, Interaction::MlpOnly, LossVariant::Plain);
    for v in [LossVariant::Linear, LossVariant::Anti] {
        let auc = median_auc(&t, Interaction::MlpOnly, v);
        println!("no drift: plain {plain:.4}, {v} {auc:.4}");
        assert!((auc - plain).abs() < 0.01, "{v}: {auc} vs plain {plain}");
    }
}

#[test]
fn strong_drift_orders_recent_over_plain_over_old() {
    let models = vec![Interaction::FmPlusMlp, Interaction::CrossPlusMlp];
    let t = run(&experiment(0.6, models.clone()));
    for m in models {
        let (linear, plain, anti) = (
            median_auc(&t, m, LossVariant::Linear),
            median_auc(&t, m, LossVariant::Plain),
            median_auc(&t, m, LossVariant::Anti),
        );
        println!("{m}: tif_linear {linear:.4}, plain {plain:.4}, tif_anti {anti:.4}");
        assert!(linear > plain && plain > anti, "{m}: {linear} {plain} {anti}");
        assert!(t.row(m, LossVariant::Linear).unwrap().relaimp.unwrap() > 0.0);
    }
}
