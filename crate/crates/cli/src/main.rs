use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multifuse_core::netanalysis::{distance_correlation, louvain_communities, Partition};
use multifuse_core::pipeline::{
    read_similarity_csv, render_graph, run_pipeline, write_text, ExportFormat, PipelineConfig,
    Sigma,
};
use multifuse_core::sma::WeightsMode;
use multifuse_core::{Error, FusionMethod, Result};

#[derive(Parser)]
#[command(
    name = "multifuse",
    version,
    about = "Fuse multiplex similarity networks into a single monoplex"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Fail when any fusion method does not converge.
        #[arg(long)]
        strict: bool,
    },
    /// Fuse abundance tables with a single method.
    Fuse {
        #[arg(long)]
        method: FusionMethod,
        #[arg(long, num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "auto")]
        sigma: Sigma,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        weights: Option<WeightsMode>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Distance correlation between two matrix CSVs.
    Dcor { a: PathBuf, b: PathBuf },
    /// Louvain communities of a matrix CSV, written as `node,community`.
    Cluster {
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert a matrix CSV to another graph format.
    Export {
        matrix: PathBuf,
        #[arg(long)]
        format: ExportFormat,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, strict } => {
            let mut cfg = PipelineConfig::from_json_file(&config)?;
            cfg.strict |= strict;
            let report = run_pipeline(&cfg)?;
            for m in &report.methods {
                eprintln!(
                    "{}: {} iterations, converged={}, residual={:e}",
                    m.method, m.iterations, m.converged, m.residual
                );
            }
            eprintln!("wrote {}", cfg.output_dir.display());
        }
        Command::Fuse {
            method,
            inputs,
            sigma,
            k,
            epsilon,
            max_iter,
            weights,
            out,
            strict,
        } => {
            let mut cfg = PipelineConfig::new(inputs, out);
            cfg.methods = vec![method];
            cfg.sigma = sigma;
            cfg.weights = weights;
            cfg.strict = strict;
            cfg.snf.k = k;
            if let Some(e) = epsilon {
                cfg.snf.epsilon = e;
            }
            if let Some(t) = max_iter {
                cfg.snf.max_iter = t;
                cfg.sma.max_iter = t;
            }
            let report = run_pipeline(&cfg)?;
            let m = &report.methods[0];
            eprintln!(
                "{}: {} iterations, converged={}, residual={:e}",
                m.method, m.iterations, m.converged, m.residual
            );
        }
        Command::Dcor { a, b } => {
            let a = read_similarity_csv(&a)?;
            let b = read_similarity_csv(&b)?;
            if a.labels() != b.labels() {
                return Err(Error::InvalidInput(
                    "matrices have different node labels".into(),
                ));
            }
            println!("{}", distance_correlation(&a, &b)?);
        }
        Command::Cluster {
            matrix,
            resolution,
            seed,
        } => {
            let s = read_similarity_csv(&matrix)?;
            let p = louvain_communities(&s, resolution, seed)?;
            println!("node,community");
            for (l, c) in p.labels().iter().zip(p.community()) {
                println!("{l},{c}");
            }
            eprintln!("modularity {}", p.modularity());
        }
        Command::Export {
            matrix,
            format,
            threshold,
            out,
        } => {
            let s = read_similarity_csv(&matrix)?;
            let p = match format {
                ExportFormat::Graphml => louvain_communities(&s, 1.0, 0)?,
                _ => Partition::from_assignment(&s, &(0..s.n()).collect::<Vec<_>>(), 1.0)?,
            };
            let text = render_graph(&s, &p, format, threshold)?;
            match out {
                Some(path) => write_text(&path, &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
