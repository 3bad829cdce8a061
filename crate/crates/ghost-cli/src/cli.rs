//! Command-line surface: `analyze`, `serve`, `evaluate` and `image`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ghost_core::clustering::{build_matrix, render_image, vat_reorder_prim, bea_reorder, Basis, PartitionConfig, Reorder};
use ghost_core::engine::{analyze, AnalyzeConfig, Strategy};
use ghost_core::evaluation::{generate_library, run_cross_validation, GeneratorConfig, NoiseConfig};
use ghost_core::trace::{load_model, parse_trace_file, save_model, TraceLibrary};

use crate::server::{Framing, Server, ServerConfig};

#[derive(Parser, Debug)]
#[command(name = "ghost", version, about = "Learn and replay service models from recorded request/response traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a service model from a trace library
    Analyze {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Trace library (JSONL)
        #[arg(long = "in")]
        input: PathBuf,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
        /// Also write the reordered response dissimilarity image (PGM)
        #[arg(long)]
        emit_image: Option<PathBuf>,
    },
    /// Replay a model over TCP
    Serve {
        /// Model file
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7070")]
        listen: String,
        /// conn | len32 | delim:<hex>
        #[arg(long, default_value = "len32")]
        framing: String,
        /// Close connections idle for this many milliseconds
        #[arg(long, default_value_t = 30_000)]
        idle_timeout_ms: u64,
        /// Largest accepted request in bytes
        #[arg(long, default_value_t = 1 << 20)]
        max_message: usize,
    },
    /// Cross-validate a strategy and print the accuracy table
    Evaluate {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Trace library (JSONL); omit to use a synthetic directory library
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Size of the synthetic library when --in is absent
        #[arg(long, default_value_t = 1000)]
        synthetic: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Fraction of each training cluster swapped with other clusters
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Response validator for the accuracy taxonomy
        #[arg(long, default_value = "directory")]
        protocol: String,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the dissimilarity image of a trace library (PGM)
    Image {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ReorderArg::Prim)]
        reorder: ReorderArg,
        /// Use request rather than response dissimilarities
        #[arg(long)]
        requests: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Whole,
    Centroid,
    Consensus,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReorderArg {
    Prim,
    Bea,
}

/// Flags shared by `analyze` and `evaluate`.
#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long, value_enum, default_value_t = StrategyArg::Consensus)]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = ReorderArg::Prim)]
    pub reorder: ReorderArg,
    /// Cut positions in the reordered sequence, e.g. 5,12
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["auto_partition", "tau"])]
    pub boundaries: Option<Vec<usize>>,
    /// Cut clusters automatically (the default when no boundaries are given)
    #[arg(long)]
    pub auto_partition: bool,
    /// Block threshold for automatic partitioning
    #[arg(long)]
    pub tau: Option<f64>,
    /// Consensus frequency threshold
    #[arg(long, default_value_t = 0.8)]
    pub f: f64,
    /// Entropy weight scale
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Entropy weight exponent
    #[arg(long, default_value_t = 10.0)]
    pub c: f64,
    /// Minimum symmetric-field length
    #[arg(long, default_value_t = 4)]
    pub minlen: usize,
}

impl PipelineArgs {
    pub fn config(&self) -> AnalyzeConfig {
        let mut cfg = AnalyzeConfig {
            strategy: match self.strategy {
                StrategyArg::Whole => Strategy::Whole,
                StrategyArg::Centroid => Strategy::Centroid,
                StrategyArg::Consensus => Strategy::Consensus,
            },
            reorder: reorder(self.reorder),
            partition: match &self.boundaries {
                Some(b) => PartitionConfig::Boundaries(b.clone()),
                None => PartitionConfig::Auto { tau: self.tau },
            },
            min_len: self.minlen,
            ..AnalyzeConfig::default()
        };
        cfg.consensus.f = self.f;
        cfg.consensus.b = self.b;
        cfg.consensus.c = self.c;
        cfg
    }
}

fn reorder(r: ReorderArg) -> Reorder {
    match r {
        ReorderArg::Prim => Reorder::Prim,
        ReorderArg::Bea => Reorder::Bea,
    }
}

fn read_library(path: &Path) -> anyhow::Result<TraceLibrary> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    parse_trace_file(BufReader::new(f)).with_context(|| format!("cannot read trace library {}", path.display()))
}

fn write_image(lib: &TraceLibrary, basis: Basis, r: ReorderArg, out: &Path) -> anyhow::Result<()> {
    let dm = build_matrix(lib, basis)?;
    let perm = match r {
        ReorderArg::Prim => vat_reorder_prim(&dm),
        ReorderArg::Bea => bea_reorder(&dm),
    };
    let f = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = BufWriter::new(f);
    render_image(&dm, &perm).write_pgm(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze { pipeline, input, out, emit_image } => {
            let lib = read_library(&input)?;
            let model = analyze(&lib, &pipeline.config())?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("cannot create {}", out.display()))?);
            save_model(&model, &mut w)?;
            w.flush()?;
            log::info!("analyzed {} interactions into {} cluster(s)", lib.len(), model.clusters.len());
            if let Some(path) = emit_image {
                write_image(&lib, Basis::Response, pipeline.reorder, &path)?;
            }
            Ok(())
        }
        Command::Serve { input, listen, framing, idle_timeout_ms, max_message } => {
            let f = File::open(&input).with_context(|| format!("cannot open {}", input.display()))?;
            let model = load_model(BufReader::new(f))?;
            let cfg = ServerConfig {
                listen,
                framing: framing.parse::<Framing>()?,
                idle_timeout: Duration::from_millis(idle_timeout_ms),
                max_message,
            };
            let server = Server::bind(Arc::new(model), cfg)?;
            println!("listening on {}", server.local_addr()?);
            let stop = server.shutdown_handle();
            ctrlc::set_handler(move || stop.shutdown()).context("cannot install signal handler")?;
            server.run()
        }
        Command::Evaluate { pipeline, input, synthetic, folds, noise, seed, protocol, out } => {
            if protocol != "directory" {
                bail!("no response validator for protocol {protocol:?}; available: directory");
            }
            let gen = GeneratorConfig::default();
            let lib = match input {
                Some(p) => read_library(&p)?,
                None => generate_library(&gen, synthetic, seed)?,
            };
            let noise = noise.map(|ratio| NoiseConfig { ratio, seed });
            let report = run_cross_validation(&lib, &pipeline.config(), &gen.spec, folds, seed, noise)?;
            println!("{report}");
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(&p, json + "\n").with_context(|| format!("cannot write {}", p.display()))?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Image { input, out, reorder, requests } => {
            let lib = read_library(&input)?;
            write_image(&lib, if requests { Basis::Request } else { Basis::Response }, reorder, &out)
        }
    }
}
