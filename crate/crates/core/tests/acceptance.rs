//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::time::Instant;

use catmatch::analyze::{analyze_match, pairing_match_config, AnalysisConfig, Direction};
use catmatch::corpus::{generate_demo, generate_synthetic, ingest, DemoSpec, FilterPolicy, SyntheticSpec};
use catmatch::evaluate::{
    evaluate_groups, kl_divergence, polar_log_odds, smd_binary, token_counts, train_lda, EvalOptions, LdaConfig,
};
use catmatch::groups::{build_comparison_pool, group_corpus, tag_by_rules, GroupConfig};
use catmatch::matchers::{run_match, MatchConfig, MatchResult, Method};
use catmatch::simulate::{run_attribute_specific, run_category_sampling, Regime, SimulationSpec};
use catmatch::stats::{benjamini_hochberg, mcnemar_chi2, paired_t};
use catmatch::vectorize::{pivoted_norm, PivotSlopeParams};
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

fn check(cond: bool, what: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what)
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    check((got - want).abs() <= tol, format!("{name} = {got}, expected {want} +/- {tol}"))?;
    Ok(format!("{name}={got:.4}"))
}

fn formula_oracles() -> Outcome {
    let mut notes = Vec::new();
    notes.push(close("smd_binary(0.6,0.4)", smd_binary(0.6, 0.4), 0.4082, 1e-4)?);
    let norm = pivoted_norm(20, PivotSlopeParams { pivot: 10.0, slope: 0.3 });
    check(norm == 13.0, format!("pivoted_norm = {norm}, expected exactly 13.0"))?;
    notes.push("pivoted_norm=13".into());
    let bh = benjamini_hochberg(&[0.01, 0.02, 0.04, 0.05], 0.05).map_err(|e| e.to_string())?;
    check(bh.reject.iter().all(|&r| r), format!("BH rejections {:?}", bh.reject))?;
    notes.push("BH rejects 4/4".into());
    let m = mcnemar_chi2(5, 15);
    notes.push(close("mcnemar chi2", m.statistic, 4.05, 1e-9)?);
    notes.push(close("mcnemar p", m.p_value, 0.0441, 1e-3)?);
    let t = paired_t(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    notes.push(close("paired t", t.statistic, 3.4641, 1e-4)?);
    notes.push(close("paired p", t.p_value, 0.0742, 1e-3)?);
    notes.push(close("KL", kl_divergence(&[0.5, 0.5], &[0.9, 0.1]), 0.5108, 1e-4)?);
    Ok(notes.join(", "))
}

fn brute_force_matching() -> Outcome {
    for seed in 0..200 {
        common::check_case(seed)?;
    }
    Ok("200 corpora x 6 matchers agree with the exhaustive oracle".into())
}

fn self_match_zero() -> Outcome {
    let corpus = generate_synthetic(&SyntheticSpec::confounded(800), 21).map_err(|e| e.to_string())?;
    let targets: Vec<_> = corpus.iter().take(120).collect();
    let copy: Vec<_> = targets.clone();
    let lda = train_lda(
        &corpus,
        &LdaConfig {
            n_topics: 10,
            iterations: 50,
            seed: 21,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let r = evaluate_groups(&targets, &copy, &[], &EvalOptions::default(), Some(&lda)).map_err(|e| e.to_string())?;
    check(r.avg_smd == 0.0, format!("avg_smd {}", r.avg_smd))?;
    check(r.pct_smd_gt_01 == 0.0, format!("pct {}", r.pct_smd_gt_01))?;
    check(r.cat_count_smd == 0.0, format!("cat_count_smd {}", r.cat_count_smd))?;
    check(r.text_len_smd == 0.0, format!("text_len_smd {}", r.text_len_smd))?;
    check((r.kl_tc, r.kl_ct) == (Some(0.0), Some(0.0)), format!("KL {:?} {:?}", r.kl_tc, r.kl_ct))?;
    let counts = token_counts(targets.iter().copied());
    let plo = polar_log_odds(&counts, &counts, 1000.0, 200).map_err(|e| e.to_string())?;
    check(plo.words.iter().all(|w| w.delta == 0.0), "nonzero PLO delta".into())?;
    check(r.plo_mean == 0.0, format!("plo_mean {}", r.plo_mean))?;
    Ok(format!("{} categories, {} words, all exactly zero", r.per_category_smd.len(), plo.words.len()))
}

fn directional_replication() -> Outcome {
    let corpus = generate_synthetic(&SyntheticSpec::confounded(5000), 2024).map_err(|e| e.to_string())?;
    let spec = SimulationSpec {
        regime: Regime::CategorySampling,
        n_simulations: 20,
        seed: 2024,
        methods: [Method::Number, Method::Tfidf, Method::PivotSlope]
            .into_iter()
            .map(MatchConfig::new)
            .collect(),
        ..Default::default()
    };
    let report = run_category_sampling(&corpus, &spec).map_err(|e| e.to_string())?;
    let agg = |label: &str| {
        report
            .aggregate_for(label)
            .ok_or_else(|| format!("no aggregate for {label}; have {:?}", report.aggregate.iter().map(|a| &a.label).collect::<Vec<_>>()))
    };
    let (random, number, tfidf, pivot) = (agg("random")?, agg("number")?, agg("tfidf")?, agg("pivot_slope")?);
    let line = format!(
        "avg_smd pivot {:.4} vs random {:.4}; |len| pivot {:.4} vs random {:.4}; cat_count tfidf {:.4}, number {:.4}",
        pivot.mean.avg_smd,
        random.mean.avg_smd,
        pivot.mean.text_len_smd.abs(),
        random.mean.text_len_smd.abs(),
        tfidf.mean.cat_count_smd,
        number.mean.cat_count_smd
    );
    check(pivot.mean.avg_smd < random.mean.avg_smd, line.clone())?;
    check(pivot.mean.text_len_smd.abs() < random.mean.text_len_smd.abs(), line.clone())?;
    check(tfidf.mean.cat_count_smd < 0.0, line.clone())?;
    check(number.mean.cat_count_smd > 0.0, line.clone())?;
    Ok(line)
}

fn weak_and_reuse_contracts() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 128,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&proptest::num::u64::ANY, |seed| {
            let case = common::random_case(seed);
            for method in Method::ALL {
                let mut cfg = case.cfg.clone();
                cfg.method = method;
                cfg.min_shared_categories = 2;
                let out = run_match(&case.targets, &case.candidates, &cfg).unwrap();
                if !method.is_propensity() {
                    for p in out.result.pairs.iter().filter(|p| !p.discarded) {
                        proptest::prop_assert!(p.shared >= 2, "{method}: kept pair shares {}", p.shared);
                    }
                }
                for (&id, &n) in &out.result.reuse_counts() {
                    proptest::prop_assert!(n <= cfg.max_reuse, "{method}: {id} used {n} times");
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let corpus = generate_demo(&DemoSpec::default(), 8).map_err(|e| e.to_string())?;
    let groups = GroupConfig::default_rules();
    let assignment = tag_by_rules(&corpus, &groups.groups).map_err(|e| e.to_string())?;
    let targets = group_corpus(&corpus, &assignment, "African American").map_err(|e| e.to_string())?;
    let pool = build_comparison_pool(&corpus, groups.pool("unmarked American").unwrap(), &assignment, "African American")
        .map_err(|e| e.to_string())?;
    let exclusions = vec!["African".to_string()];
    let methods: Vec<MatchConfig> = Method::ALL
        .into_iter()
        .map(|m| {
            let mut c = MatchConfig::new(m);
            c.excluded_category_patterns = exclusions.clone();
            c
        })
        .collect();
    let report = run_attribute_specific(&targets, &pool, &methods, &exclusions).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for row in &report.rows {
        let kept = row.kept_pairs.as_ref().ok_or(format!("{}: every pair discarded", row.label))?;
        check(
            kept.avg_smd <= row.all_pairs.avg_smd,
            format!("{}: discarding raised avg_smd {} -> {}", row.label, row.all_pairs.avg_smd, kept.avg_smd),
        )?;
        notes.push(format!("{} {:.4}->{:.4}", row.label, row.all_pairs.avg_smd, kept.avg_smd));
    }
    Ok(format!("128 property cases; discarding: {}", notes.join(", ")))
}

fn gradient_check() -> Outcome {
    let g = common::gradient_check_error();
    check(g < 1e-5, format!("gradient relative error {g}"))?;
    let b = common::intercept_only_error();
    check(b < 1e-3, format!("intercept-only error {b}"))?;
    Ok(format!("gradient rel err {g:.2e}, base-rate err {b:.2e}"))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let one = common::pipeline(a.path(), 1);
    let many = common::pipeline(b.path(), 3);
    check(one.keys().eq(many.keys()), "artifact sets differ".into())?;
    for (name, bytes) in &one {
        check(bytes == &many[name], format!("{name} differs between 1 and 3 threads"))?;
    }
    Ok(format!("{} artifacts byte-identical at 1 and 3 threads", one.len()))
}

fn end_to_end_demo() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("demo.jsonl");
    generate_demo(&DemoSpec::default(), 31)
        .and_then(|c| c.write_jsonl(&path))
        .map_err(|e| e.to_string())?;
    let corpus = ingest(&path, &FilterPolicy::default()).map_err(|e| e.to_string())?;
    let groups = GroupConfig::default_rules();
    let assignment = tag_by_rules(&corpus, &groups.groups).map_err(|e| e.to_string())?;
    let pairing = groups.pairings.iter().find(|p| p.target == "African American").unwrap();
    let targets = group_corpus(&corpus, &assignment, &pairing.target).map_err(|e| e.to_string())?;
    let pool = build_comparison_pool(&corpus, groups.pool("unmarked American").unwrap(), &assignment, &pairing.target)
        .map_err(|e| e.to_string())?;
    let cfg = AnalysisConfig::default();
    let mcfg = pairing_match_config(&corpus, pairing, &MatchConfig::new(Method::PivotSlope), &cfg).map_err(|e| e.to_string())?;
    let matched = run_match(&targets, &pool, &mcfg).map_err(|e| e.to_string())?.result;
    let kept: Vec<_> = matched.pairs.iter().filter(|p| !p.discarded).take(500).cloned().collect();
    check(kept.len() == 500, format!("only {} kept pairs", kept.len()))?;
    let first500 = MatchResult {
        config: matched.config.clone(),
        pairs: kept,
    };
    let r = analyze_match(&pairing.target, "unmarked American", &first500, &targets, &pool, &cfg).map_err(|e| e.to_string())?;
    let names: Vec<&str> = r.rows.iter().map(|x| x.metric.as_str()).collect();
    check(names == ["length", "edits", "age_months", "languages"], format!("rows {names:?}"))?;
    check(!r.word_table.target.is_empty() && !r.word_table.comparison.is_empty(), "empty word table".into())?;
    let len = r.row("length").unwrap();
    check(
        len.significant && len.target_mean < len.comparison_mean,
        format!("length {:.1} vs {:.1}, q={:.3e}", len.target_mean, len.comparison_mean, len.corrected_p),
    )?;
    let de = r.availability_of("de").ok_or("no de row")?;
    check(
        de.significant && de.more_available == Direction::Comparison,
        format!("de {:.3} vs {:.3}, q={:.3e}", de.target_rate, de.comparison_rate, de.corrected_p),
    )?;
    Ok(format!(
        "n={} pivot={:.2}; length {:.1} vs {:.1} (q={:.1e}); de {:.2} vs {:.2} (q={:.1e})",
        r.n_pairs,
        mcfg.pivot_slope.pivot,
        len.target_mean,
        len.comparison_mean,
        len.corrected_p,
        de.target_rate,
        de.comparison_rate,
        de.corrected_p
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("formula oracles", formula_oracles),
        ("matching brute-force equivalence", brute_force_matching),
        ("self-match zero report", self_match_zero),
        ("directional replication under category sampling", directional_replication),
        ("weak-match and reuse contracts", weak_and_reuse_contracts),
        ("propensity gradient check", gradient_check),
        ("determinism across thread counts", determinism),
        ("end-to-end demo", end_to_end_demo),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
