//! Evaluate one pivot-slope match with the full metric battery, including
//! topic-model KL divergence, and list the least balanced categories.

use catmatch::corpus::{generate_synthetic, SyntheticSpec};
use catmatch::evaluate::{evaluate_match, train_lda, EvalOptions, LdaConfig};
use catmatch::matchers::{run_match, MatchConfig, Method};

fn main() -> catmatch::Result<()> {
    let spec = SyntheticSpec::confounded(1500);
    let planted = spec.planted_category.as_ref().map(|p| p.name.clone()).unwrap_or_default();
    let corpus = generate_synthetic(&spec, 3)?;
    let targets = corpus.filtered(|a| a.categories.contains(&planted));
    let candidates = corpus.filtered(|a| !a.categories.contains(&planted));

    let mut cfg = MatchConfig::new(Method::PivotSlope);
    cfg.excluded_category_patterns = vec![planted];
    let result = run_match(&targets, &candidates, &cfg)?.result;
    let lda = train_lda(
        &corpus,
        &LdaConfig {
            n_topics: 20,
            iterations: 100,
            seed: 3,
            ..Default::default()
        },
    )?;
    let r = evaluate_match(&result, &targets, &candidates, true, &EvalOptions::default(), Some(&lda))?;
    println!("pairs {}", r.n_pairs);
    println!("avg_smd {:.4}, {:.1}% of categories above 0.1", r.avg_smd, r.pct_smd_gt_01);
    println!("cat_count_smd {:+.4}, text_len_smd {:+.4}", r.cat_count_smd, r.text_len_smd);
    println!("plo mean {:.3} sd {:.3}", r.plo_mean, r.plo_sd);
    println!("kl target->comparison {:?}, comparison->target {:?}", r.kl_tc, r.kl_ct);

    let mut worst: Vec<_> = r.per_category_smd.iter().filter(|(_, v)| v.is_finite()).collect();
    worst.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    for (cat, smd) in worst.into_iter().take(5) {
        println!("  {cat:<40} {smd:+.3}");
    }
    Ok(())
}
