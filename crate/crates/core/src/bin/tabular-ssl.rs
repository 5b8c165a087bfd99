use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tabular_ssl::bench::{
    audit_csv, audit_from_pseudo_labels, generate_synthetic, read_pseudo_labels, run_experiment,
    ExperimentConfig, Method, Preset, SyntheticConfig,
};
use tabular_ssl::metrics::{rank_aggregate_with, read_score_matrix, TieRule};
use tabular_ssl::tabdata::{write_csv, FeatureSchema};
use tabular_ssl::Error;

#[derive(Parser)]
#[command(name = "tabular-ssl", version, about = "Self-training experiments on tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a cross-validated experiment from a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        folds: Option<usize>,
        /// Comma-separated subset of none,fpl,r-fpl,cpl,r-cpl,naive.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Write a synthetic dataset and its schema.
    Synth {
        #[arg(long, value_enum, default_value = "overlap")]
        preset: PresetArg,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Schema path; defaults to the output path with a .toml extension.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Rebuild pseudo-label confusion statistics from a run directory.
    Audit {
        run_dir: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rank methods from a score CSV (`method,col_1,...`).
    Rank {
        scores: PathBuf,
        #[arg(long)]
        lower_is_better: bool,
        #[arg(long, value_enum, default_value = "mean")]
        ties: TieArg,
        /// Directory for ranks.csv and ranks.txt; prints only when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Overlap,
    Separated,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Mean,
    Min,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cmd: Command) -> tabular_ssl::Result<()> {
    match cmd {
        Command::Run {
            config,
            output,
            seed,
            folds,
            methods,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = folds {
                cfg.folds = k;
            }
            if let Some(m) = methods {
                cfg.methods = m.iter().map(|s| s.parse::<Method>()).collect::<Result<_, _>>()?;
            }
            let report = run_experiment(&cfg)?;
            match &report.ranks {
                Some(r) => print!("{}", r.render_text()),
                None => println!("no method completed every fold"),
            }
            let failed = report.units.iter().filter(|u| u.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} unit(s) failed; see summary.csv");
            }
            println!("results written to {}", cfg.output.display());
            Ok(())
        }
        Command::Synth {
            preset,
            n_samples,
            seed,
            output,
            schema,
        } => {
            let preset = match preset {
                PresetArg::Overlap => Preset::Overlap,
                PresetArg::Separated => Preset::Separated,
            };
            let spec = SyntheticConfig {
                n_samples,
                ..SyntheticConfig::from_preset(preset)
            }
            .resolve()?;
            let data = generate_synthetic(&spec, seed)?;
            write_csv(&data.dataset, &output)?;
            let schema_path = schema.unwrap_or_else(|| output.with_extension("toml"));
            data.dataset.schema().save(&schema_path)?;
            println!(
                "wrote {} rows to {} (schema {})",
                data.dataset.n_rows(),
                output.display(),
                schema_path.display()
            );
            Ok(())
        }
        Command::Audit { run_dir, output } => {
            let schema = FeatureSchema::load(run_dir.join("schema.toml"))?;
            let path = run_dir.join("pseudo_labels.csv");
            let file = std::fs::File::open(&path).map_err(|e| Error::Io { path, source: e })?;
            let audits = audit_from_pseudo_labels(&read_pseudo_labels(file)?, &schema)?;
            for (m, f, a) in &audits {
                println!(
                    "{m:>6} fold {f}: {} labels, accuracy {:.4}, macro-F1 {:.4}",
                    a.n_labels(),
                    a.accuracy,
                    a.macro_f1
                );
            }
            let out = output.unwrap_or_else(|| run_dir.join("audit.csv"));
            std::fs::write(&out, audit_csv(&audits, &schema)?)
                .map_err(|e| Error::Io { path: out, source: e })
        }
        Command::Rank {
            scores,
            lower_is_better,
            ties,
            output,
        } => {
            let file = std::fs::File::open(&scores).map_err(|e| Error::Io {
                path: scores.clone(),
                source: e,
            })?;
            let matrix = read_score_matrix(file)?;
            let rule = match ties {
                TieArg::Mean => TieRule::Mean,
                TieArg::Min => TieRule::Min,
            };
            let table = rank_aggregate_with(&matrix, !lower_is_better, rule)?;
            let text = table.render_text();
            print!("{text}");
            if let Some(dir) = output {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                let mut csv = Vec::new();
                table.write_csv(&mut csv)?;
                for (name, bytes) in [("ranks.csv", csv), ("ranks.txt", text.into_bytes())] {
                    let p = dir.join(name);
                    std::fs::write(&p, bytes).map_err(|e| Error::Io { path: p, source: e })?;
                }
            }
            Ok(())
        }
    }
}
