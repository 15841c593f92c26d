//! Match members of the planted category against everyone else with all six
//! methods and compare covariate balance of the kept pairs.

use catmatch::corpus::{generate_synthetic, SyntheticSpec};
use catmatch::evaluate::{evaluate_match, EvalOptions};
use catmatch::matchers::{run_match, MatchConfig, Method};

fn main() -> catmatch::Result<()> {
    let spec = SyntheticSpec::confounded(2000);
    let planted = spec.planted_category.as_ref().map(|p| p.name.clone()).unwrap_or_default();
    let corpus = generate_synthetic(&spec, 11)?;
    let targets = corpus.filtered(|a| a.categories.contains(&planted));
    let candidates = corpus.filtered(|a| !a.categories.contains(&planted));
    println!("{} targets, {} candidates", targets.len(), candidates.len());

    for method in Method::ALL {
        let mut cfg = MatchConfig::new(method);
        cfg.excluded_category_patterns = vec![planted.clone()];
        let out = run_match(&targets, &candidates, &cfg)?;
        let report = evaluate_match(&out.result, &targets, &candidates, true, &EvalOptions::default(), None)?;
        println!(
            "{:<17} kept {:>4}  discarded {:>3}  avg_smd {:.4}  cat_count_smd {:+.3}  text_len_smd {:+.3}",
            method.name(),
            out.result.kept().count(),
            out.result.n_discarded(),
            report.avg_smd,
            report.cat_count_smd,
            report.text_len_smd
        );
    }
    Ok(())
}
