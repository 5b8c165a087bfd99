//! Applies each selection rule to one set of scored candidates.
//!
//! cargo run --example pseudo_labelers

use tabular_ssl::learners::Probabilities;
use tabular_ssl::likelihood::LogLikelihoodCache;
use tabular_ssl::pseudolabel::{
    score_batch, select_curriculum, select_fixed_threshold, select_naive, LabelerConfig, Strategy,
};

fn main() -> tabular_ssl::Result<()> {
    let proba = Probabilities::new(
        2,
        vec![0.95, 0.05, 0.70, 0.30, 0.55, 0.45, 0.20, 0.80, 0.35, 0.65, 0.15, 0.85],
    );
    let ids = vec![100, 101, 102, 103, 104, 105];
    // Row 105 is confident but unlikely under its predicted class.
    let raw = vec![
        -2.0, -6.0, -3.0, -4.0, -3.5, -3.6, -5.0, -2.5, -4.0, -3.0, -2.0, -9.0,
    ];
    let cache = LogLikelihoodCache::from_raw(2, ids.clone(), raw);

    let plain = score_batch(&proba, &ids, None, 0.0)?;
    let reg = score_batch(&proba, &ids, Some(&cache), 0.5)?;
    for (p, r) in plain.iter().zip(&reg) {
        println!(
            "row {} label {} confidence {:.2} gamma {:.2} score {:.3}",
            r.row_id, r.label, p.confidence, r.gamma, r.score
        );
    }

    let show = |name: &str, picked: Vec<tabular_ssl::pseudolabel::Candidate>| {
        let ids: Vec<_> = picked.iter().map(|c| c.row_id).collect();
        println!("{name:>6}: {ids:?}");
    };
    show("fpl", select_fixed_threshold(&plain, 0.6));
    show("r-fpl", select_fixed_threshold(&reg, 0.6));
    show("cpl", select_curriculum(&plain, 40.0));
    show("r-cpl", select_curriculum(&reg, 40.0));
    show("naive", select_naive(&plain));

    let cfg = LabelerConfig::new(Strategy::Cpl);
    let schedule: Vec<usize> = (1..=5).map(|t| cfg.cumulative_target(t, 6)).collect();
    println!("curriculum targets for a 6-row pool: {schedule:?}");
    Ok(())
}
