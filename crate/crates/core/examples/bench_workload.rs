//! Generate a seeded Zipf corpus, run the same queries through all three
//! strategies and print the comparison table.
//!
//! ```text
//! cargo run --release --example bench_workload -- 20000 500
//! ```
//! Arguments: descriptor count (default 20000) and query count (default 500).

use ria_core::bench::{self, CorpusSpec, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let descriptors: usize = args.next().map_or(Ok(20_000), |a| a.parse())?;
    let queries: usize = args.next().map_or(Ok(500), |a| a.parse())?;

    let spec = CorpusSpec {
        descriptors,
        vocab: (descriptors / 20).clamp(1, bench::MAX_VOCAB),
        seed: 1,
    };
    let corpus = bench::generate_corpus(&spec)?;
    let text = bench::corpus_to_string(&corpus);
    println!(
        "corpus: {} descriptors, {} bytes, vocab {}",
        corpus.len(),
        text.len(),
        spec.vocab
    );

    let index = bench::load_corpus(text.as_bytes())?;
    let config = RunConfig {
        queries,
        seed: 1,
        workers: 1,
        ..RunConfig::default()
    };
    let out = bench::run(&index, &config)?;
    print!("\n{}", out.metrics.to_csv());
    print!("\n{}", bench::comparison_csv(&out.comparison));
    Ok(())
}
