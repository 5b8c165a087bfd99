//! Fits the per-class likelihood model on a labeled sample and shows how the
//! normalized log-likelihood shifts the pseudo-label score.
//!
//! cargo run --example likelihood_scores

use tabular_ssl::bench::{generate_synthetic, Preset, SyntheticConfig};
use tabular_ssl::likelihood::{build_cache, fit_likelihood, DEFAULT_SMOOTHING};
use tabular_ssl::pseudolabel::regularized_score;
use tabular_ssl::tabdata::{mask_labels, Discretizer};

fn main() -> tabular_ssl::Result<()> {
    let spec = SyntheticConfig {
        n_samples: Some(400),
        ..SyntheticConfig::from_preset(Preset::Overlap)
    }
    .resolve()?;
    let data = generate_synthetic(&spec, 1)?.dataset;
    let (labeled, pool) = mask_labels(&data, 40, 1)?;

    let disc = Discretizer::fit(&[&labeled, &pool], 10)?;
    let features: Vec<usize> = (0..data.n_features()).collect();
    let model = fit_likelihood(&labeled, disc, DEFAULT_SMOOTHING, &features)?;
    let cache = build_cache(&model, &pool);

    println!("{:>6} {:>6} {:>10} {:>7} {:>10}", "row", "class", "log_lik", "gamma", "f(0.9)");
    for i in 0..8 {
        for c in 0..model.n_classes() {
            let g = cache.gamma(i, c);
            println!(
                "{:>6} {:>6} {:>10.3} {:>7.3} {:>10.4}",
                pool.row_ids()[i],
                c,
                cache.raw(i, c),
                g,
                regularized_score(0.9, g, 0.5)?
            );
        }
    }
    Ok(())
}
