//! Runs one self-training loop per strategy and prints its cycle trace.
//!
//! cargo run --release --example self_training_cycle

use tabular_ssl::bench::{generate_synthetic, Preset, SyntheticConfig};
use tabular_ssl::learners::{GbdtParams, LearnerParams};
use tabular_ssl::pseudolabel::Strategy;
use tabular_ssl::selftrain::{audit_pseudo_labels, run_self_training, SelfTrainConfig};
use tabular_ssl::tabdata::mask_labels;

fn main() -> tabular_ssl::Result<()> {
    let spec = SyntheticConfig {
        n_samples: Some(800),
        ..SyntheticConfig::from_preset(Preset::Overlap)
    }
    .resolve()?;
    let data = generate_synthetic(&spec, 3)?.dataset;
    let (labeled, pool) = mask_labels(&data, 80, 3)?;

    for strategy in Strategy::ALL {
        let mut cfg = SelfTrainConfig::new(strategy);
        cfg.learner = LearnerParams::Gbdt(GbdtParams {
            n_trees: 60,
            max_depth: 4,
            patience: 15,
            ..GbdtParams::default()
        });
        let out = run_self_training(&cfg, &labeled, &pool)?;
        let audit = audit_pseudo_labels(&out.batches, &pool)?;
        println!(
            "{:>6}: initial pm {:.4}, best pm {:.4} at cycle {}, pseudo-label accuracy {:.4}",
            strategy.name(),
            out.initial_pm,
            out.best_pm,
            out.best_cycle,
            audit.accuracy
        );
        for r in &out.trace.records {
            println!(
                "        cycle {:>2}: batch {:>4}, cumulative {:>4}, pm {:.4}",
                r.cycle, r.batch_size, r.cumulative, r.pm
            );
        }
    }
    Ok(())
}
