mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use patchdim::phantom::PhantomKind;

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "patchdim",
    version,
    about = "Joint-patch dimension, CCA and dictionary clustering for image pairs"
)]
struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random stage; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom pair and mask.
    Synth {
        #[arg(long, default_value = "single_spot")]
        kind: PhantomKind,
        #[arg(long, default_value_t = 64)]
        size: usize,
    },
    /// Region-by-method dimension table of one pair.
    Dim {
        #[arg(long)]
        pair: PathBuf,
    },
    /// Per-pixel local dimension map.
    Dimmap {
        #[arg(long)]
        pair: PathBuf,
    },
    /// Haar layers and the dimension-by-scale table.
    Mra {
        #[arg(long, required = true)]
        pair: Vec<PathBuf>,
        #[arg(long)]
        levels: Option<usize>,
        /// Write the layers only, skipping the dimension table.
        #[arg(long)]
        layers_only: bool,
    },
    /// Canonical correlations per region and patch size.
    Cca {
        #[arg(long)]
        pair: PathBuf,
    },
    /// One PCA dictionary per pair.
    Dict {
        #[arg(long, required = true)]
        pair: Vec<PathBuf>,
        /// Crop side around the spot.
        #[arg(long, conflicts_with = "no_crop")]
        crop: Option<usize>,
        #[arg(long)]
        no_crop: bool,
        #[arg(long)]
        atoms: Option<usize>,
        /// Learn atoms on canonical variates.
        #[arg(long)]
        cca: bool,
    },
    /// Cluster dictionaries (files or directories of `*.dict.json`).
    Cluster {
        #[arg(long = "dict", required = true)]
        dicts: Vec<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        ensemble: Option<usize>,
    },
    /// NMI/ARI between two label files and/or a trend test.
    Metrics {
        #[arg(long)]
        labels: Vec<PathBuf>,
        /// CSV of `group,value` rows, groups in hypothesized increasing order.
        #[arg(long)]
        trend: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Mra {
            levels: Some(l), ..
        } => cfg.mra.levels = *l,
        Command::Dict {
            crop,
            no_crop,
            atoms,
            cca,
            ..
        } => {
            if *no_crop {
                cfg.dictionary.crop = None;
            } else if crop.is_some() {
                cfg.dictionary.crop = *crop;
            }
            if let Some(a) = atoms {
                cfg.dictionary.atom_count = *a;
            }
            cfg.dictionary.use_cca |= *cca;
        }
        Command::Cluster { k, ensemble, .. } => {
            if k.is_some() {
                cfg.clustering.k = *k;
            }
            if ensemble.is_some() {
                cfg.clustering.ensemble_size = *ensemble;
            }
        }
        _ => {}
    }
    cfg.validate()?;

    let outputs = match &cli.command {
        Command::Synth { kind, size } => commands::synth(*kind, *size, &cfg)?,
        Command::Dim { pair } => commands::dim(pair, &cfg)?,
        Command::Dimmap { pair } => commands::dimmap(pair, &cfg)?,
        Command::Mra {
            pair, layers_only, ..
        } => commands::mra(pair, *layers_only, &cfg)?,
        Command::Cca { pair } => commands::cca(pair, &cfg)?,
        Command::Dict { pair, .. } => commands::dict(pair, &cfg)?,
        Command::Cluster { dicts, .. } => commands::cluster(dicts, &cfg)?,
        Command::Metrics { labels, trend } => commands::metrics(labels, trend.as_deref())?,
    };
    let names: Vec<PathBuf> = outputs.names().iter().map(|n| cli.out.join(n)).collect();
    outputs.commit(&cli.out)?;
    for name in names {
        println!("{}", name.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", CliError::Usage(msg.trim().to_string()).to_json());
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
