//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use catmatch::cli::{execute, Command, RunConfig};
use catmatch::corpus::{Article, Corpus, DemoSpec};
use catmatch::simulate::Regime;
use catmatch::matchers::{run_match, DiscardReason, MatchConfig, MatchPair, Method};
use catmatch::propensity::PropensityScores;
use catmatch::vectorize::PivotSlopeParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random small matching problem.
pub struct Case {
    pub targets: Corpus,
    pub candidates: Corpus,
    pub cfg: MatchConfig,
}

/// At most 30 articles over at most 15 categories. Few categories and a small
/// reuse cap make ties and exhausted candidates common.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=30);
    let n_cats = rng.random_range(1..=15);
    let n_targets = rng.random_range(1..n);
    let mut targets = Vec::new();
    let mut candidates = Vec::new();
    for i in 0..n {
        let k = rng.random_range(0..=6.min(n_cats));
        let cats: BTreeSet<String> = (0..k).map(|_| format!("c{}", rng.random_range(0..n_cats))).collect();
        let a = Article::new(format!("a{i:02}")).with_categories(cats);
        if i < n_targets {
            targets.push(a);
        } else {
            candidates.push(a);
        }
    }
    let mut cfg = MatchConfig::new(Method::Number);
    cfg.max_reuse = rng.random_range(1..=10);
    cfg.min_shared_categories = rng.random_range(0..=3);
    cfg.pivot_slope = PivotSlopeParams {
        pivot: rng.random_range(1.0..8.0),
        slope: (rng.random_range(0..=10) as f64) / 10.0,
    };
    if rng.random::<f64>() < 0.3 {
        cfg.excluded_category_patterns = vec![format!("C{}", rng.random_range(0..n_cats))];
    }
    Case {
        targets: Corpus::new(targets).unwrap(),
        candidates: Corpus::new(candidates).unwrap(),
        cfg,
    }
}

fn kept_categories(a: &Article, patterns: &[String]) -> BTreeSet<String> {
    a.categories
        .iter()
        .filter(|c| !patterns.iter().any(|p| c.to_lowercase().contains(&p.to_lowercase())))
        .cloned()
        .collect()
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// ln(N / df) over targets and candidates together, on raw categories.
fn oracle_idf(case: &Case) -> BTreeMap<String, f64> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n = 0usize;
    for a in case.targets.iter().chain(case.candidates.iter()) {
        n += 1;
        for c in &a.categories {
            *df.entry(c.clone()).or_default() += 1;
        }
    }
    df.into_iter().map(|(c, d)| (c, (n as f64 / d as f64).ln())).collect()
}

fn oracle_score(method: Method, t: &BTreeSet<String>, c: &BTreeSet<String>, idf: &BTreeMap<String, f64>, p: PivotSlopeParams) -> (f64, usize) {
    let shared: Vec<&String> = t.intersection(c).collect();
    let k = shared.len();
    let sq = |cats: &mut dyn Iterator<Item = &String>| sorted_sum(cats.map(|x| idf[x].powi(2)).collect());
    let score = match method {
        Method::Number => k as f64,
        Method::Percent => {
            if c.is_empty() {
                0.0
            } else {
                k as f64 / c.len() as f64
            }
        }
        Method::Tfidf => {
            let (nt, nc) = (sq(&mut t.iter()).sqrt(), sq(&mut c.iter()).sqrt());
            if nt == 0.0 || nc == 0.0 {
                0.0
            } else {
                sq(&mut shared.iter().copied()) / (nt * nc)
            }
        }
        Method::PivotSlope => {
            let nt = sq(&mut t.iter()).sqrt();
            if nt == 0.0 || c.is_empty() {
                0.0
            } else {
                sq(&mut shared.iter().copied()) / (nt * ((1.0 - p.slope) * p.pivot + p.slope * c.len() as f64))
            }
        }
        _ => unreachable!(),
    };
    (score, k)
}

/// Exhaustive argmax over every available candidate for each target in id
/// order: score, then shared count, then lower id.
pub fn oracle_direct(case: &Case, cfg: &MatchConfig) -> Vec<MatchPair> {
    let idf = oracle_idf(case);
    let ex = &cfg.excluded_category_patterns;
    let cands: Vec<(&Article, BTreeSet<String>)> = case.candidates.iter().map(|a| (a, kept_categories(a, ex))).collect();
    let mut uses = vec![0usize; cands.len()];
    let mut out = Vec::new();
    for t in case.targets.iter() {
        let tc = kept_categories(t, ex);
        if tc.is_empty() {
            out.push(unmatched(&t.id, DiscardReason::NoCategories));
            continue;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, (_, cc)) in cands.iter().enumerate() {
            if uses[i] >= cfg.max_reuse {
                continue;
            }
            let (s, k) = oracle_score(cfg.method, &tc, cc, &idf, cfg.pivot_slope);
            let better = match best {
                None => true,
                Some((bs, bk, _)) => s > bs || (s == bs && k > bk),
            };
            if better {
                best = Some((s, k, i));
            }
        }
        match best {
            None => out.push(unmatched(&t.id, DiscardReason::ReuseExhausted)),
            Some((s, k, i)) => {
                uses[i] += 1;
                let weak = k < cfg.min_shared_categories;
                out.push(MatchPair {
                    target: t.id.clone(),
                    comparison: Some(cands[i].0.id.clone()),
                    score: s,
                    shared: k,
                    discarded: weak,
                    reason: weak.then_some(DiscardReason::WeakMatch),
                });
            }
        }
    }
    out
}

fn unmatched(id: &str, reason: DiscardReason) -> MatchPair {
    MatchPair {
        target: id.to_string(),
        comparison: None,
        score: 0.0,
        shared: 0,
        discarded: true,
        reason: Some(reason),
    }
}

/// Linear scan for the nearest available propensity score (lower id on
/// ties), then the mean + population sd gap rule.
pub fn oracle_propensity(case: &Case, cfg: &MatchConfig, scores: &PropensityScores) -> Vec<MatchPair> {
    let cands: Vec<&Article> = case.candidates.iter().collect();
    let mut uses = vec![0usize; cands.len()];
    let mut out = Vec::new();
    for t in case.targets.iter() {
        let st = scores.get(&t.id).unwrap();
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in cands.iter().enumerate() {
            if uses[i] >= cfg.max_reuse {
                continue;
            }
            let gap = (scores.get(&c.id).unwrap() - st).abs();
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, i));
            }
        }
        match best {
            None => out.push(unmatched(&t.id, DiscardReason::ReuseExhausted)),
            Some((gap, i)) => {
                uses[i] += 1;
                out.push(MatchPair {
                    target: t.id.clone(),
                    comparison: Some(cands[i].id.clone()),
                    score: gap,
                    shared: t.categories.intersection(&cands[i].categories).count(),
                    discarded: false,
                    reason: None,
                });
            }
        }
    }
    let gaps: Vec<f64> = out.iter().filter(|p| p.comparison.is_some()).map(|p| p.score).collect();
    if gaps.len() >= 2 {
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
        for p in out.iter_mut().filter(|p| p.comparison.is_some()) {
            if p.score > mean + sd {
                p.discarded = true;
                p.reason = Some(DiscardReason::PropensityOutlier);
            }
        }
    }
    out
}

fn same_pairs(got: &[MatchPair], want: &[MatchPair]) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} pairs, oracle has {}", got.len(), want.len()));
    }
    for (g, w) in got.iter().zip(want) {
        let score_ok = (g.score - w.score).abs() <= 1e-12 * w.score.abs().max(1.0);
        if g.target != w.target
            || g.comparison != w.comparison
            || g.shared != w.shared
            || g.discarded != w.discarded
            || g.reason != w.reason
            || !score_ok
        {
            return Err(format!("pair mismatch: got {g:?}, oracle {w:?}"));
        }
    }
    Ok(())
}

/// Every matcher on one random case against its oracle.
pub fn check_case(seed: u64) -> Result<(), String> {
    let case = random_case(seed);
    for method in Method::ALL {
        let mut cfg = case.cfg.clone();
        cfg.method = method;
        let outcome = run_match(&case.targets, &case.candidates, &cfg).map_err(|e| format!("seed {seed} {method}: {e}"))?;
        let want = match &outcome.model {
            Some(model) => {
                let scores = PropensityScores::compute(model, case.targets.iter().chain(case.candidates.iter()));
                oracle_propensity(&case, &cfg, &scores)
            }
            None => oracle_direct(&case, &cfg),
        };
        same_pairs(&outcome.result.pairs, &want).map_err(|e| format!("seed {seed} {method}: {e}"))?;
    }
    Ok(())
}

/// Central-difference gradient check; returns the worst relative error.
pub fn gradient_check_error() -> f64 {
    use catmatch::propensity::LogisticProblem;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n_features = 5;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let mut row = Vec::new();
        for j in 0..n_features {
            if rng.random::<f64>() < 0.6 {
                row.push((j, rng.random_range(-1.0..1.0)));
            }
        }
        rows.push(row);
        labels.push((i % 3 == 0) as u8 as f64);
    }
    let problem = LogisticProblem {
        rows,
        labels,
        n_features,
        l2: 0.05,
    };
    let params: Vec<f64> = (0..=n_features).map(|_| rng.random_range(-0.8..0.8)).collect();
    let analytic = problem.gradient(&params);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let mut up = params.clone();
        let mut down = params.clone();
        up[k] += h;
        down[k] -= h;
        let numeric = (problem.loss(&up) - problem.loss(&down)) / (2.0 * h);
        let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

/// Intercept-only training error against the base rate.
pub fn intercept_only_error() -> f64 {
    use catmatch::matchers::MatchConfig;
    use catmatch::propensity::{score, train, FeatureKind};
    use catmatch::vectorize::build_idf;
    let targets: Vec<Article> = (0..30).map(|i| Article::new(format!("t{i:03}"))).collect();
    let candidates: Vec<Article> = (0..70).map(|i| Article::new(format!("c{i:03}"))).collect();
    let t = Corpus::new(targets).unwrap();
    let c = Corpus::new(candidates).unwrap();
    let all = t.union(&c).unwrap();
    let idf = build_idf(&all).unwrap();
    let cfg = MatchConfig::new(Method::Propensity).propensity;
    let model = train(&t, &c, FeatureKind::OneHot, &cfg, &idf, &[]).unwrap();
    (score(&model, &Article::new("probe")) - 0.3).abs()
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Every subcommand on a demo corpus at the given thread count.
pub fn pipeline(out: &Path, threads: usize) -> BTreeMap<String, Vec<u8>> {
    let mut cfg = RunConfig {
        demo: Some(DemoSpec {
            n_articles: 1200,
            ..Default::default()
        }),
        target_group: Some("African American".into()),
        pool: Some("unmarked American".into()),
        out: out.to_path_buf(),
        seed: 17,
        threads: Some(threads),
        ..Default::default()
    };
    cfg.simulation.regime = Regime::AttributeSpecific;
    cfg.resolve();
    for cmd in [
        Command::Ingest,
        Command::Match,
        Command::Evaluate,
        Command::LogOdds,
        Command::Simulate,
        Command::Analyze,
        Command::ExportMatrix,
    ] {
        execute(cmd, &cfg).unwrap();
    }
    let mut sampling = cfg.clone();
    sampling.target_group = None;
    sampling.pool = None;
    sampling.simulation.regime = Regime::ArticleSampling;
    sampling.simulation.n_simulations = 2;
    sampling.simulation.sample_size = Some(200);
    execute(Command::Simulate, &sampling).unwrap();
    snapshot(out)
}
