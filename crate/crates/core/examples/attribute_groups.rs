//! Tag a demo corpus with the default group rules, build a comparison pool,
//! and check pronoun-based gender inference against the gender property.

use std::collections::{BTreeMap, BTreeSet};

use catmatch::corpus::{generate_demo, DemoSpec};
use catmatch::groups::{
    build_comparison_pool, infer_gender_by_pronouns, tag_by_rules, validate_against_reference, GroupAssignment,
    GroupConfig, PronounGender,
};

fn main() -> catmatch::Result<()> {
    let corpus = generate_demo(&DemoSpec::default(), 4)?;
    let groups = GroupConfig::default_rules();
    groups.validate()?;
    let assignment = tag_by_rules(&corpus, &groups.groups)?;
    for (group, n) in assignment.counts() {
        println!("{group:<26} {n}");
    }

    for pairing in &groups.pairings {
        for pool in &pairing.pools {
            let rules = groups.pool(pool).expect("pool defined");
            let members = build_comparison_pool(&corpus, rules, &assignment, &pairing.target)?;
            println!("{} vs {pool}: {} candidates", pairing.target, members.len());
        }
    }

    let reference: BTreeMap<String, BTreeSet<String>> = corpus
        .iter()
        .filter_map(|a| {
            let g = a.property("gender")?;
            let groups = if g.contains("female") {
                BTreeSet::from(["women".to_string()])
            } else {
                BTreeSet::new()
            };
            Some((a.id.clone(), groups))
        })
        .collect();
    let mut inferred = GroupAssignment::default();
    for a in corpus.iter() {
        if infer_gender_by_pronouns(a) == PronounGender::Woman {
            inferred
                .assignments
                .entry(a.id.clone())
                .or_default()
                .insert("women".into(), "pronouns".into());
        }
    }
    let scores = validate_against_reference(&inferred, "women", &reference)?;
    println!(
        "pronoun inference vs gender property: precision {:?} recall {:?} (n={})",
        scores.precision, scores.recall, scores.n
    );
    Ok(())
}
