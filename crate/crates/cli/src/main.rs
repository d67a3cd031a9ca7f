mod config;
mod pipeline;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;

/// Pathology report classification pipeline.
#[derive(Parser)]
#[command(name = "pathclass", version, about)]
struct Cli {
    /// Path to a JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize, filter, and persist the corpus; writes one token file
    /// per report plus filter statistics.
    Preprocess,
    /// Split, vectorize, train the configured classifiers, and write
    /// train/test metrics per classifier.
    TrainEval {
        /// Train only these classifiers (repeatable):
        /// svm_linear, svm_rbf, logreg, gbt.
        #[arg(long = "classifier")]
        classifiers: Vec<String>,
    },
    /// Extract, topic-group, and render a report's keywords.
    Keywords {
        /// Report id, or "random" for a seeded random pick.
        #[arg(long, default_value = "random")]
        report_id: String,
        /// Keywords per report.
        #[arg(long)]
        top_n: Option<usize>,
        /// Topic count for the topic model.
        #[arg(long = "topics")]
        topics: Option<usize>,
    },
    /// Run preprocess, train-eval, and keywords in sequence.
    RunAll {
        #[arg(long, default_value = "random")]
        report_id: String,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long = "topics")]
        topics: Option<usize>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    match cli.command {
        Command::Preprocess => pipeline::cmd_preprocess(&cfg)?,
        Command::TrainEval { classifiers } => {
            if !classifiers.is_empty() {
                cfg.classifiers = classifiers;
            }
            pipeline::cmd_train_eval(&cfg)?;
        }
        Command::Keywords {
            report_id,
            top_n,
            topics,
        } => {
            apply_keyword_flags(&mut cfg, top_n, topics);
            pipeline::cmd_keywords(&cfg, &report_id)?;
        }
        Command::RunAll {
            report_id,
            top_n,
            topics,
        } => {
            apply_keyword_flags(&mut cfg, top_n, topics);
            pipeline::cmd_preprocess(&cfg)?;
            pipeline::cmd_train_eval(&cfg)?;
            pipeline::cmd_keywords(&cfg, &report_id)?;
        }
    }
    Ok(())
}

fn apply_keyword_flags(cfg: &mut RunConfig, top_n: Option<usize>, topics: Option<usize>) {
    if let Some(n) = top_n {
        cfg.keywords.top_n = n;
    }
    if let Some(k) = topics {
        cfg.keywords.topics = k;
    }
}
