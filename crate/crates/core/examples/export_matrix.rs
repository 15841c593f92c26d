//! Print the sparse TF-IDF category matrix of a small synthetic corpus.

use catmatch::corpus::{generate_synthetic, SyntheticSpec};
use catmatch::vectorize::{build_idf, write_matrix};

fn main() -> catmatch::Result<()> {
    let mut spec = SyntheticSpec::confounded(40);
    spec.planted_category = None;
    let corpus = generate_synthetic(&spec, 1)?;
    let idf = build_idf(&corpus)?;
    println!("# {} articles, {} categories", corpus.len(), idf.n_categories());
    write_matrix(&corpus, &idf, &mut std::io::stdout().lock()).expect("stdout");
    Ok(())
}
