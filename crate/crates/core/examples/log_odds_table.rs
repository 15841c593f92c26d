//! Informative-prior log-odds between women and men in the demo corpus.

use catmatch::corpus::{generate_demo, DemoSpec};
use catmatch::evaluate::{polar_log_odds, token_counts, DEFAULT_PRIOR_SCALE};
use catmatch::groups::{group_corpus, tag_by_rules, GroupConfig};

fn main() -> catmatch::Result<()> {
    let corpus = generate_demo(&DemoSpec::default(), 2)?;
    let assignment = tag_by_rules(&corpus, &GroupConfig::default_rules().groups)?;
    let women = group_corpus(&corpus, &assignment, "women")?;
    let men = group_corpus(&corpus, &assignment, "men")?;

    let plo = polar_log_odds(
        &token_counts(women.iter()),
        &token_counts(men.iter()),
        DEFAULT_PRIOR_SCALE,
        50,
    )?;
    println!("mean |z| over top 50: {:.3} (sd {:.3})", plo.plo_mean, plo.plo_sd);
    println!("{:<16} {:>8} {:>8} {:>8}", "women", "count", "men", "z");
    for w in plo.top_target(10) {
        println!("{:<16} {:>8} {:>8} {:>8.2}", w.word, w.count_t, w.count_c, w.z);
    }
    println!("{:<16} {:>8} {:>8} {:>8}", "men", "women", "count", "z");
    for w in plo.top_comparison(10) {
        println!("{:<16} {:>8} {:>8} {:>8.2}", w.word, w.count_t, w.count_c, w.z);
    }
    Ok(())
}
