//! Runs every method on the biased two-cluster preset over several seeds
//! and prints test macro-F1 and pseudo-label macro-F1 per method.
//!
//! cargo run --release --example biased_sampling -- [n_seeds]

use rayon::prelude::*;
use tabular_ssl::bench::{
    load_data, plan_folds, run_unit, Budget, DataSource, ExperimentConfig, Method, Preset,
    SyntheticConfig,
};

fn main() -> tabular_ssl::Result<()> {
    let n_seeds: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed count"))
        .unwrap_or(5);
    let methods = Method::all();

    let per_seed: Vec<Vec<(f64, Option<f64>)>> = (0..n_seeds)
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
            let data = load_data(&cfg)?;
            let folds = plan_folds(&cfg, &data)?;
            methods
                .iter()
                .map(|&m| {
                    let outs = folds
                        .iter()
                        .map(|f| run_unit(&cfg, m, f))
                        .collect::<tabular_ssl::Result<Vec<_>>>()?;
                    let n = outs.len() as f64;
                    let test = outs.iter().map(|o| o.score).sum::<f64>() / n;
                    let pseudo = outs
                        .iter()
                        .map(|o| o.audit.as_ref().map(|a| a.macro_f1))
                        .sum::<Option<f64>>()
                        .map(|s| s / n);
                    Ok((test, pseudo))
                })
                .collect()
        })
        .collect::<tabular_ssl::Result<_>>()?;

    println!("{:>8} {:>10} {:>12}", "method", "test_f1", "pseudo_f1");
    for (i, m) in methods.iter().enumerate() {
        let test = per_seed.iter().map(|s| s[i].0).sum::<f64>() / n_seeds as f64;
        let pseudo: Vec<f64> = per_seed.iter().filter_map(|s| s[i].1).collect();
        let pseudo = if pseudo.is_empty() {
            "-".to_string()
        } else {
            format!("{:.4}", pseudo.iter().sum::<f64>() / pseudo.len() as f64)
        };
        println!("{:>8} {:>10.4} {:>12}", m.name(), test, pseudo);
    }
    let fpl = methods.iter().position(|m| m.name() == "fpl").unwrap();
    let rfpl = methods.iter().position(|m| m.name() == "r-fpl").unwrap();
    let wins = per_seed
        .iter()
        .filter(|s| s[rfpl].1.unwrap_or(0.0) >= s[fpl].1.unwrap_or(0.0))
        .count();
    println!("r-fpl pseudo-label F1 >= fpl in {wins}/{n_seeds} seeds");
    Ok(())
}
