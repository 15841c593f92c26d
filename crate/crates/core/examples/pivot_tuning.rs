//! Grid-search the pivot-slope slope on a synthetic corpus.

use catmatch::corpus::{generate_synthetic, SyntheticSpec};
use catmatch::simulate::{tune_slope, TuneSpec};

fn main() -> catmatch::Result<()> {
    let corpus = generate_synthetic(&SyntheticSpec::confounded(3000), 5)?;
    let spec = TuneSpec {
        article_sample: 300,
        n_categories: 3,
        category_sample: 200,
        min_category_size: 300,
        seed: 5,
        grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        ..Default::default()
    };
    let report = tune_slope(&corpus, &spec)?;
    println!("pivot {:.3}, tuning categories {:?}", report.pivot, report.tuning_categories);
    for row in &report.grid {
        println!("slope {:.1}  objective {:.4}", row.slope, row.objective);
    }
    println!("best slope {:.1}", report.best_slope);
    Ok(())
}
