//! Trains both built-in learners with early stopping and saves one to JSON.
//!
//! cargo run --example train_learners

use tabular_ssl::bench::{generate_synthetic, Preset, SyntheticConfig};
use tabular_ssl::learners::{ClassifierHandle, GbdtParams, LearnerParams, LogRegParams};
use tabular_ssl::metrics::Metric;
use tabular_ssl::tabdata::stratified_holdout;

fn main() -> tabular_ssl::Result<()> {
    let spec = SyntheticConfig {
        n_samples: Some(1200),
        ..SyntheticConfig::from_preset(Preset::Separated)
    }
    .resolve()?;
    let data = generate_synthetic(&spec, 2)?.dataset;
    let (rest, test) = stratified_holdout(&data, 0.3, 0)?;
    let (train, valid) = stratified_holdout(&rest, 0.25, 1)?;

    let learners = [
        ("gbdt", LearnerParams::Gbdt(GbdtParams { n_trees: 100, ..GbdtParams::default() })),
        ("logreg", LearnerParams::LogReg(LogRegParams::default())),
    ];
    for (name, params) in learners {
        let model = ClassifierHandle::new(params, 0).fit(&train, &valid)?;
        let truth = test.required_labels()?;
        let f1 = Metric::MacroF1.from_labels(&truth, &model.predict(&test)?, test.n_classes())?;
        println!(
            "{name:>7}: {} rounds, test macro-F1 {f1:.4}, importances {:?}",
            model.trace().len(),
            model.feature_importances()
        );
        if name == "gbdt" {
            let path = std::env::temp_dir().join("tabular_ssl_gbdt.json");
            model.save(&path)?;
            let back = ClassifierHandle::load(&path)?;
            assert_eq!(back.predict(&test)?, model.predict(&test)?);
            println!("saved and reloaded {}", path.display());
        }
    }
    Ok(())
}
