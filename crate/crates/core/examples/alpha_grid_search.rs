//! Searches the regularization weight on the internal holdout.
//!
//! cargo run --release --example alpha_grid_search

use tabular_ssl::bench::{generate_synthetic, Preset, SyntheticConfig};
use tabular_ssl::learners::{GbdtParams, LearnerParams};
use tabular_ssl::pseudolabel::Strategy;
use tabular_ssl::selftrain::{grid_search_alpha, SelfTrainConfig};
use tabular_ssl::tabdata::{mask_labels, stratified_holdout};

fn main() -> tabular_ssl::Result<()> {
    let spec = SyntheticConfig {
        n_samples: Some(1000),
        bias: Some(0.5),
        ..SyntheticConfig::from_preset(Preset::Overlap)
    }
    .resolve()?;
    let data = generate_synthetic(&spec, 4)?.dataset;
    let (labeled, pool) = mask_labels(&data, 100, 4)?;

    for strategy in [Strategy::RFpl, Strategy::RCpl] {
        let mut cfg = SelfTrainConfig::new(strategy);
        cfg.learner = LearnerParams::Gbdt(GbdtParams {
            n_trees: 60,
            patience: 15,
            ..GbdtParams::default()
        });
        cfg.alpha_grid = vec![0.0, 0.25, 0.5, 1.0, 2.0];
        let (train, holdout) = stratified_holdout(&labeled, cfg.validation_fraction, cfg.seed)?;
        let g = grid_search_alpha(&cfg, &train, &holdout, &pool)?;
        for (alpha, pm) in &g.scores {
            println!("{:>6} alpha {alpha:>4}: holdout pm {pm:.4}", strategy.name());
        }
        println!("{:>6} picks alpha {}", strategy.name(), g.best_alpha);
    }
    Ok(())
}
