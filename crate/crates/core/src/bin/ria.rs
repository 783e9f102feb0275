use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use ria_core::bench::{self, CorpusSpec, RunConfig};
use ria_core::broker::{Broker, BrokerConfig, LISTEN_ENV};
use ria_core::filter::FilterCriteria;
use ria_core::selector::{SelectionStrategy, DEFAULT_K};
use ria_core::wire;

#[derive(Parser)]
#[command(name = "ria", version, about = "QoS-aware service request broker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic descriptor corpus.
    Generate {
        #[arg(long)]
        descriptors: usize,
        #[arg(long)]
        vocab: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "corpus.xml")]
        out: PathBuf,
    },
    /// Run seeded queries against a corpus and compare strategies.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: usize,
        #[arg(long, value_delimiter = ',', default_value = "normal,exited,expected")]
        strategies: Vec<SelectionStrategy>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min_relevance: f64,
        #[arg(long)]
        max_candidates: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Turn a metrics CSV into per-band counts.
    RateHistogram {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "histogram.csv")]
        out: PathBuf,
    },
    /// Serve the broker over HTTP.
    Serve {
        /// key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config file and the environment.
        #[arg(long)]
        listen: Option<String>,
        /// Descriptor corpus to preload.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
}

type Fallible = Result<(), Box<dyn std::error::Error>>;

fn write(path: &Path, contents: &str) -> Fallible {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn read(path: &Path) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Fallible {
    match command {
        Command::Generate {
            descriptors,
            vocab,
            seed,
            out,
        } => {
            let corpus = bench::generate_corpus(&CorpusSpec {
                descriptors,
                vocab,
                seed,
            })?;
            write(&out, &bench::corpus_to_string(&corpus))?;
            println!("wrote {} descriptors to {}", corpus.len(), out.display());
        }
        Command::Run {
            corpus,
            queries,
            strategies,
            seed,
            out,
            min_relevance,
            max_candidates,
            k,
            workers,
        } => {
            let index = bench::load_corpus(&read(&corpus)?)?;
            let config = RunConfig {
                queries,
                strategies,
                seed,
                criteria: FilterCriteria::new(min_relevance, max_candidates)?,
                k,
                workers,
                ..RunConfig::default()
            };
            let output = bench::run(&index, &config)?;
            fs::create_dir_all(&out)?;
            let comparison = bench::comparison_csv(&output.comparison);
            write(&out.join("metrics.csv"), &output.metrics.to_csv())?;
            write(&out.join("comparison.csv"), &comparison)?;
            write(&out.join("traces.csv"), &bench::traces_csv(&output.traces))?;
            print!("{comparison}");
        }
        Command::RateHistogram { input, out } => {
            let text = String::from_utf8(read(&input)?)?;
            write(&out, &bench::rate_histogram(&text)?)?;
        }
        Command::Serve {
            config,
            listen,
            corpus,
            k,
        } => {
            let mut cfg = match &config {
                Some(path) => BrokerConfig::parse(&String::from_utf8(read(path)?)?)?,
                None => BrokerConfig::default(),
            }
            .with_env();
            if let Some(listen) = listen {
                cfg.listen = listen;
            }
            if let Some(k) = k {
                if k == 0 {
                    return Err("k must be at least 1".into());
                }
                cfg.k = k;
            }
            let broker = Broker::new(cfg);
            if let Some(path) = corpus {
                for d in wire::parse_corpus(&read(&path)?)? {
                    broker.register(d)?;
                }
            }
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!(
                "listening on {} (override with {LISTEN_ENV})",
                broker.config().listen
            );
            runtime.block_on(ria_core::server::serve(Arc::new(broker)))?;
        }
    }
    Ok(())
}
