//! Train the category propensity model for a planted group and show its
//! heaviest weights, then match on the score gap.

use catmatch::corpus::{generate_synthetic, SyntheticSpec};
use catmatch::matchers::{run_match, DiscardReason, MatchConfig, Method};
use catmatch::propensity::{train, FeatureKind, TrainingConfig};
use catmatch::vectorize::IdfTable;

fn main() -> catmatch::Result<()> {
    let spec = SyntheticSpec::confounded(1500);
    let planted = spec.planted_category.as_ref().map(|p| p.name.clone()).unwrap_or_default();
    let corpus = generate_synthetic(&spec, 6)?;
    let targets = corpus.filtered(|a| a.categories.contains(&planted));
    let candidates = corpus.filtered(|a| !a.categories.contains(&planted));
    let exclusions = vec![planted];

    let idf = IdfTable::fit(corpus.iter().map(|a| &a.categories))?;
    let cfg = TrainingConfig::default();
    let model = train(&targets, &candidates, FeatureKind::OneHot, &cfg, &idf, &exclusions)?;
    println!("final loss {:.4}, bias {:+.3}", model.training_meta.final_loss, model.bias);
    let mut weights: Vec<(&String, f64)> = model.feature_map.iter().map(|(c, &j)| (c, model.weights[j])).collect();
    weights.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(b.0)));
    for (cat, w) in weights.into_iter().take(8) {
        println!("  {cat:<40} {w:+.3}");
    }

    let mut mcfg = MatchConfig::new(Method::Propensity);
    mcfg.excluded_category_patterns = exclusions;
    let result = run_match(&targets, &candidates, &mcfg)?.result;
    let outliers = result
        .pairs
        .iter()
        .filter(|p| p.reason == Some(DiscardReason::PropensityOutlier))
        .count();
    println!("{} pairs kept, {outliers} dropped as score-gap outliers", result.kept().count());
    Ok(())
}
