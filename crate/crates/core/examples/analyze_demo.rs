//! Run every configured pairing on the demo corpus and print the paired
//! statistics, language availability and top words.

use catmatch::analyze::{run_analysis, AnalysisConfig};
use catmatch::corpus::{generate_demo, DemoSpec};
use catmatch::groups::GroupConfig;
use catmatch::matchers::{MatchConfig, Method};

fn main() -> catmatch::Result<()> {
    let corpus = generate_demo(&DemoSpec::default(), 12)?;
    let reports = run_analysis(
        &GroupConfig::default_rules(),
        &corpus,
        &MatchConfig::new(Method::PivotSlope),
        &AnalysisConfig::default(),
    )?;
    for r in &reports {
        println!("== {} vs {} ({} pairs, {} discarded)", r.group, r.comparison, r.n_pairs, r.n_discarded);
        for row in &r.rows {
            println!(
                "  {:<11} {:>9.2} vs {:>9.2}  q={:.2e}{}",
                row.metric,
                row.target_mean,
                row.comparison_mean,
                row.corrected_p,
                if row.significant { " *" } else { "" }
            );
        }
        for a in r.availability.iter().filter(|a| a.significant) {
            println!("  available in {}: {:.2} vs {:.2} ({:?})", a.language, a.target_rate, a.comparison_rate, a.more_available);
        }
        let words = |w: &[catmatch::evaluate::WordScore]| w.iter().take(5).map(|x| x.word.as_str()).collect::<Vec<_>>().join(" ");
        println!("  target words: {}", words(&r.word_table.target));
        println!("  comparison words: {}", words(&r.word_table.comparison));
    }
    Ok(())
}
