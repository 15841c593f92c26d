//! Write a demo corpus to JSON lines, then ingest it with the default
//! filtering policy and with a permissive one.

use catmatch::corpus::{corpus_summary, generate_demo, ingest, DemoSpec, FilterPolicy};

fn main() -> catmatch::Result<()> {
    let spec = DemoSpec {
        n_articles: 1500,
        ..Default::default()
    };
    let path = std::env::temp_dir().join("catmatch_ingest_demo.jsonl");
    generate_demo(&spec, 7)?.write_jsonl(&path)?;

    for (name, policy) in [("default", FilterPolicy::default()), ("permissive", FilterPolicy::permissive())] {
        let corpus = ingest(&path, &policy)?;
        let s = corpus_summary(&corpus)?;
        println!(
            "{name:>10}: {} articles, {:.2} categories and {:.1} tokens on average",
            s.n_articles, s.mean_categories, s.mean_tokens
        );
    }
    let _ = std::fs::remove_file(&path);
    Ok(())
}
