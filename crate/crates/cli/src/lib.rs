//! Command-line driver: flat config, hash-keyed artifact directory and one
//! subcommand per pipeline stage.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod config;
pub mod formats;
pub mod stages;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::Config;
use stages::Ctx;

#[derive(Debug, Parser)]
#[command(
    name = "timeds",
    version,
    about = "Time-aware distant supervision pipeline",
    after_help = "Any config key can be overridden with --key=value, e.g. --tau_c=0.3 --curriculum=0.5,0.2,0.0"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output root; artifacts land in `<out>/<config hash>/`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Print the effective config and its hash.
    Config,
    /// Generate a synthetic corpus, gazetteer, rules and oracle labels.
    Synth,
    /// Parse the corpus and annotate sentences with gazetteer mentions.
    Ingest,
    /// Match rules, score instances and split train/test.
    Knowledge,
    /// Build popularity series for every knowledge instance.
    Popularity,
    /// Align sentences, add negatives, build the test set and folds.
    Align,
    /// Keep mentions with weight >= theta (every `filter_thetas` value if omitted).
    Filter { theta: Option<f64> },
    /// Write nested, shuffled curriculum rounds.
    Curriculum,
    /// Train one-shot and/or curriculum models per `train_mode`.
    Train,
    /// Score every trained model on the test folds.
    Eval,
    /// Oracle noise ratio of each filtered manifest.
    Noise,
    /// Consolidated CSV of set sizes, scores and noise ratios.
    Report,
    /// Run every stage in order.
    Pipeline,
}

const COMMON: &[&str] = &["config", "seed", "threads", "out", "help", "version"];

/// Separates `--key=value` config overrides from the arguments clap parses.
pub fn split_overrides(args: impl IntoIterator<Item = String>) -> (Vec<String>, Vec<String>) {
    let (mut rest, mut overrides) = (Vec::new(), Vec::new());
    for a in args {
        let key = a.strip_prefix("--").and_then(|b| b.split_once('=')).map(|(k, _)| k);
        match key {
            Some(k) if !COMMON.contains(&k) => overrides.push(a),
            _ => rest.push(a),
        }
    }
    (rest, overrides)
}

/// Builds the effective config: file, then overrides, then common flags.
pub fn resolve_config(cli: &Cli, overrides: &[String]) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply_overrides(overrides)?;
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(t) = cli.threads {
        cfg.set("threads", &t.to_string())?;
    }
    if let Some(o) = &cli.out {
        cfg.set("out", &o.to_string_lossy())?;
    }
    Ok(cfg)
}

/// Entry point shared by the binary and the tests. `args` excludes the program name.
pub fn run(args: impl IntoIterator<Item = String>) -> Result<()> {
    let (rest, overrides) = split_overrides(args);
    let cli = Cli::try_parse_from(std::iter::once("timeds".to_string()).chain(rest))?;
    let cfg = resolve_config(&cli, &overrides)?;
    let threads = cfg.threads()?;
    if threads > 0 {
        // only the first call in a process can size the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if let Command::Config = cli.command {
        print!("{}", cfg.canonical());
        println!("# config_hash={}", cfg.hash());
        return Ok(());
    }
    let ctx = Ctx::new(cfg)?;
    match cli.command {
        Command::Config => unreachable!(),
        Command::Synth => stages::synth(&ctx),
        Command::Ingest => stages::ingest(&ctx),
        Command::Knowledge => stages::knowledge(&ctx),
        Command::Popularity => stages::popularity(&ctx),
        Command::Align => stages::align_stage(&ctx),
        Command::Filter { theta } => stages::filter(&ctx, theta),
        Command::Curriculum => stages::curriculum(&ctx),
        Command::Train => stages::train(&ctx),
        Command::Eval => stages::eval(&ctx),
        Command::Noise => stages::noise(&ctx),
        Command::Report => stages::report(&ctx),
        Command::Pipeline => stages::pipeline(&ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_split_from_common_flags() {
        let args = ["filter", "--seed=3", "--tau_c=0.4", "0.3", "--out", "x"].map(String::from);
        let (rest, ov) = split_overrides(args);
        assert_eq!(ov, vec!["--tau_c=0.4"]);
        assert_eq!(rest, vec!["filter", "--seed=3", "0.3", "--out", "x"]);
    }

    #[test]
    fn flags_win_over_overrides() {
        let cli = Cli::try_parse_from(["timeds", "train", "--seed", "5"]).unwrap();
        let cfg = resolve_config(&cli, &["--seed=2".into(), "--l2=0.01".into()]).unwrap();
        assert_eq!(cfg.seed().unwrap(), 5);
        assert_eq!(cfg.get("l2"), "0.01");
    }
}
