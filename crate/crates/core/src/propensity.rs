//! Propensity scores from an L2-regularized logistic regression over category
//! features, and the two propensity matchers built on them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};
use crate::matchers::{check_pools, unmatched, DiscardReason, MatchConfig, MatchPair, MatchResult, Method};
use crate::text::any_contains_ci;
use crate::vectorize::IdfTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    OneHot,
    Tfidf,
}

/// Full-batch gradient descent settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    pub seed: u64,
    /// Weights start uniform in `[-init_scale, init_scale]`; 0 means zeros and
    /// leaves `seed` unused.
    pub init_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-4,
            seed: 0,
            init_scale: 0.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            problems.push(format!("l2 must be non-negative, got {}", self.l2));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            problems.push("init_scale must be non-negative".to_string());
        }
        problems
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainingConfig,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub feature_kind: FeatureKind,
    pub feature_map: BTreeMap<String, usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub excluded_category_patterns: Vec<String>,
    pub training_meta: TrainingMeta,
    /// IDF weights used for TF-IDF features.
    pub idf: Option<IdfTable>,
}

/// Sparse design matrix with 0/1 labels and the regularized mean log-loss
/// `mean(softplus(z) - y z) + l2/2 |w|^2`; the bias is not regularized.
#[derive(Clone, Debug)]
pub struct LogisticProblem {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<f64>,
    pub n_features: usize,
    pub l2: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    fn linear(&self, row: &[(usize, f64)], params: &[f64]) -> f64 {
        params[self.n_features] + row.iter().map(|&(j, x)| params[j] * x).sum::<f64>()
    }

    /// Loss at `params` = `[w_0 .. w_{n-1}, bias]`.
    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.rows.len() as f64;
        let data: f64 = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(row, &y)| {
                let z = self.linear(row, params);
                softplus(z) - y * z
            })
            .sum::<f64>()
            / n;
        let reg: f64 = params[..self.n_features].iter().map(|w| w * w).sum::<f64>();
        data + 0.5 * self.l2 * reg
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let n = self.rows.len() as f64;
        let mut grad = vec![0.0; self.n_features + 1];
        for (row, &y) in self.rows.iter().zip(&self.labels) {
            let r = sigmoid(self.linear(row, params)) - y;
            for &(j, x) in row {
                grad[j] += r * x;
            }
            grad[self.n_features] += r;
        }
        for g in grad.iter_mut() {
            *g /= n;
        }
        for (g, w) in grad.iter_mut().zip(&params[..self.n_features]) {
            *g += self.l2 * w;
        }
        grad
    }
}

fn features(
    a: &Article,
    kind: FeatureKind,
    map: &BTreeMap<String, usize>,
    exclusions: &[String],
    idf: Option<&IdfTable>,
) -> Vec<(usize, f64)> {
    let cats: Vec<&String> = a
        .categories
        .iter()
        .filter(|c| !any_contains_ci(c, exclusions))
        .collect();
    let tf = if cats.is_empty() { 0.0 } else { 1.0 / cats.len() as f64 };
    cats.into_iter()
        .filter_map(|c| {
            let j = *map.get(c)?;
            let x = match kind {
                FeatureKind::OneHot => 1.0,
                FeatureKind::Tfidf => tf * idf.map_or(1.0, |t| t.idf(c)),
            };
            (x != 0.0).then_some((j, x))
        })
        .collect()
}

/// Fit the model predicting target membership: label 1 for `targets`, 0 for
/// `candidates`.
pub fn train(
    targets: &Corpus,
    candidates: &Corpus,
    kind: FeatureKind,
    cfg: &TrainingConfig,
    idf: &IdfTable,
    exclusions: &[String],
) -> Result<LogRegModel> {
    if targets.is_empty() || candidates.is_empty() {
        return Err(Error::EmptyCorpus("propensity training needs targets and candidates"));
    }
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let mut feature_map = BTreeMap::new();
    for a in targets.iter().chain(candidates.iter()) {
        for c in a.categories.iter().filter(|c| !any_contains_ci(c, exclusions)) {
            let next = feature_map.len();
            feature_map.entry(c.clone()).or_insert(next);
        }
    }
    // Renumber so ids follow category order, independent of corpus order.
    for (j, v) in feature_map.values_mut().enumerate() {
        *v = j;
    }
    let idf_ref = (kind == FeatureKind::Tfidf).then_some(idf);
    let mut rows = Vec::with_capacity(targets.len() + candidates.len());
    let mut labels = Vec::with_capacity(rows.capacity());
    for (corpus, y) in [(targets, 1.0), (candidates, 0.0)] {
        for a in corpus.iter() {
            rows.push(features(a, kind, &feature_map, exclusions, idf_ref));
            labels.push(y);
        }
    }
    let problem = LogisticProblem {
        rows,
        labels,
        n_features: feature_map.len(),
        l2: cfg.l2,
    };
    let params = gradient_descent(&problem, cfg)?;
    let final_loss = problem.loss(&params);
    let bias = params[problem.n_features];
    let mut weights = params;
    weights.truncate(problem.n_features);
    Ok(LogRegModel {
        feature_kind: kind,
        feature_map,
        weights,
        bias,
        excluded_category_patterns: exclusions.to_vec(),
        training_meta: TrainingMeta {
            config: cfg.clone(),
            final_loss,
        },
        idf: idf_ref.cloned(),
    })
}

pub fn gradient_descent(problem: &LogisticProblem, cfg: &TrainingConfig) -> Result<Vec<f64>> {
    let dim = problem.n_features + 1;
    let mut params = if cfg.init_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-cfg.init_scale..=cfg.init_scale))
            .collect();
        p[problem.n_features] = 0.0;
        p
    } else {
        vec![0.0; dim]
    };
    for it in 0..cfg.iterations {
        let grad = problem.gradient(&params);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!(
                "parameters diverged at iteration {it}; lower the learning rate"
            )));
        }
    }
    let loss = problem.loss(&params);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite training loss {loss}; lower the learning rate"
        )));
    }
    Ok(params)
}

impl LogRegModel {
    pub fn linear(&self, a: &Article) -> f64 {
        let x = features(
            a,
            self.feature_kind,
            &self.feature_map,
            &self.excluded_category_patterns,
            self.idf.as_ref(),
        );
        self.bias + x.iter().map(|&(j, v)| self.weights[j] * v).sum::<f64>()
    }

    pub fn weight(&self, category: &str) -> Option<f64> {
        self.feature_map.get(category).map(|&j| self.weights[j])
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("model serializes")
    }
}

/// Sigmoid of the model's linear predictor, kept strictly inside (0, 1).
pub fn score(model: &LogRegModel, a: &Article) -> f64 {
    sigmoid(model.linear(a)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropensityScores {
    pub scores: BTreeMap<String, f64>,
}

impl PropensityScores {
    pub fn compute<'a, I>(model: &LogRegModel, articles: I) -> Self
    where
        I: IntoIterator<Item = &'a Article>,
    {
        PropensityScores {
            scores: articles
                .into_iter()
                .map(|a| (a.id.clone(), score(model, a)))
                .collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.scores.get(id).copied()
    }
}

/// Nearest-score matching with the reuse cap. Pair `score` holds the absolute
/// propensity gap; ties go to the lower candidate id.
pub fn greedy_match_propensity(
    targets: &Corpus,
    candidates: &Corpus,
    scores: &PropensityScores,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    cfg.validate().map_err(Error::Config)?;
    check_pools(targets, candidates)?;
    let lookup = |id: &str| {
        scores
            .get(id)
            .ok_or_else(|| Error::data(format!("no propensity score for `{id}`")))
    };
    let cand_scores: Vec<f64> = candidates.ids().map(lookup).collect::<Result<_>>()?;
    // (score, candidate index), ascending; index order is id order.
    let mut sorted: Vec<(f64, usize)> = cand_scores.iter().copied().zip(0..).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let cand_articles = candidates.articles();
    let mut uses = vec![0usize; candidates.len()];
    let mut pairs = Vec::with_capacity(targets.len());
    for t in targets.iter() {
        let pt = lookup(&t.id)?;
        match nearest_available(&sorted, pt, |ci| uses[ci] < cfg.max_reuse) {
            Some((ci, gap)) => {
                uses[ci] += 1;
                let c = &cand_articles[ci];
                pairs.push(MatchPair {
                    target: t.id.clone(),
                    comparison: Some(c.id.clone()),
                    score: gap,
                    shared: t.categories.intersection(&c.categories).count(),
                    discarded: false,
                    reason: None,
                });
            }
            None => pairs.push(unmatched(&t.id, DiscardReason::ReuseExhausted)),
        }
    }
    Ok(MatchResult {
        config: cfg.clone(),
        pairs,
    })
}

/// Lowest-index available entry minimizing `|score - pt|`, with its gap.
fn nearest_available<F>(sorted: &[(f64, usize)], pt: f64, available: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> bool,
{
    let pos = sorted.partition_point(|&(s, _)| s < pt);
    let gap = |i: usize| (sorted[i].0 - pt).abs();
    let left = (0..pos).rev().find(|&i| available(sorted[i].1));
    let right = (pos..sorted.len()).find(|&i| available(sorted[i].1));
    let best = match (left, right) {
        (None, None) => return None,
        (Some(l), None) => gap(l),
        (None, Some(r)) => gap(r),
        (Some(l), Some(r)) => gap(l).min(gap(r)),
    };
    // Gaps grow monotonically away from `pt`, so ties are contiguous runs.
    let mut pick: Option<usize> = None;
    let mut consider = |i: usize| {
        if available(sorted[i].1) {
            let ci = sorted[i].1;
            pick = Some(pick.map_or(ci, |p: usize| p.min(ci)));
        }
    };
    if let Some(l) = left {
        let mut i = l as isize;
        while i >= 0 && gap(i as usize) == best {
            consider(i as usize);
            i -= 1;
        }
    }
    if let Some(r) = right {
        let mut i = r;
        while i < sorted.len() && gap(i) == best {
            consider(i);
            i += 1;
        }
    }
    pick.map(|ci| (ci, best))
}

/// Mark pairs whose propensity gap exceeds mean + 1 population sd of the
/// run's gaps. Fewer than two matched pairs leaves the result unchanged.
pub fn discard_weak_propensity(result: &MatchResult, scores: &PropensityScores) -> Result<MatchResult> {
    let mut gaps = Vec::new();
    for p in &result.pairs {
        if let Some(c) = &p.comparison {
            let (pt, pc) = match (scores.get(&p.target), scores.get(c)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::data(format!("missing propensity score for pair {}", p.target))),
            };
            gaps.push((pt - pc).abs());
        }
    }
    let mut out = result.clone();
    if gaps.len() < 2 {
        log::warn!(
            "propensity weak-match rule needs at least two pairs, got {}; nothing discarded",
            gaps.len()
        );
        return Ok(out);
    }
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
    let threshold = mean + sd;
    let mut k = 0;
    for p in out.pairs.iter_mut() {
        if p.comparison.is_some() {
            if gaps[k] > threshold && !p.discarded {
                p.discarded = true;
                p.reason = Some(DiscardReason::PropensityOutlier);
            }
            k += 1;
        }
    }
    Ok(out)
}

/// Train the model for a propensity method, match, and apply the weak rule.
pub fn propensity_match(
    targets: &Corpus,
    candidates: &Corpus,
    cfg: &MatchConfig,
    idf: &IdfTable,
) -> Result<(MatchResult, LogRegModel)> {
    let kind = match cfg.method {
        Method::Propensity => FeatureKind::OneHot,
        Method::TfidfPropensity => FeatureKind::Tfidf,
        other => {
            return Err(Error::Config(vec![format!("`{other}` is not a propensity method")]))
        }
    };
    let model = train(
        targets,
        candidates,
        kind,
        &cfg.propensity,
        idf,
        &cfg.excluded_category_patterns,
    )?;
    let scores = PropensityScores::compute(&model, targets.iter().chain(candidates.iter()));
    let raw = greedy_match_propensity(targets, candidates, &scores, cfg)?;
    Ok((discard_weak_propensity(&raw, &scores)?, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorize::build_idf;

    fn art(id: &str, cats: &[&str]) -> Article {
        Article::new(id).with_categories(cats.iter().copied())
    }

    fn model_with(bias: f64, weights: &[(&str, f64)]) -> LogRegModel {
        LogRegModel {
            feature_kind: FeatureKind::OneHot,
            feature_map: weights
                .iter()
                .enumerate()
                .map(|(j, (c, _))| (c.to_string(), j))
                .collect(),
            weights: weights.iter().map(|(_, w)| *w).collect(),
            bias,
            excluded_category_patterns: Vec::new(),
            training_meta: TrainingMeta {
                config: TrainingConfig::default(),
                final_loss: 0.0,
            },
            idf: None,
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&model_with(0.0, &[("a", 0.0)]), &art("x", &["a"])), 0.5);
        assert!((score(&model_with(3f64.ln(), &[]), &art("x", &[])) - 0.75).abs() < 1e-12);
        let m = model_with(0.4, &[("a", 2.0)]);
        assert_eq!(score(&m, &art("x", &["zzz"])), sigmoid(0.4));
        assert!(score(&m, &art("x", &["a"])) > score(&m, &art("y", &[])));
        let extreme = model_with(800.0, &[]);
        let p = score(&extreme, &art("x", &[]));
        assert!(p > 0.0 && p < 1.0);
    }

    fn fixture(sets: &[(&str, &[&str], bool)]) -> (Corpus, Corpus) {
        let t = sets.iter().filter(|s| s.2).map(|s| art(s.0, s.1)).collect();
        let c = sets.iter().filter(|s| !s.2).map(|s| art(s.0, s.1)).collect();
        (Corpus::new(t).unwrap(), Corpus::new(c).unwrap())
    }

    #[test]
    fn separating_category_gets_largest_positive_weight() {
        let (t, c) = fixture(&[
            ("a1", &["sep", "x"], true),
            ("a2", &["sep", "y"], true),
            ("a3", &["sep", "x", "y"], true),
            ("b1", &["x"], false),
            ("b2", &["y"], false),
            ("b3", &["x", "y"], false),
        ]);
        let idf = build_idf(&t.union(&c).unwrap()).unwrap();
        let m = train(&t, &c, FeatureKind::OneHot, &TrainingConfig::default(), &idf, &[]).unwrap();
        let w_sep = m.weight("sep").unwrap();
        assert!(w_sep > 0.0);
        assert!(w_sep.abs() > m.weight("x").unwrap().abs());
        assert!(w_sep.abs() > m.weight("y").unwrap().abs());
    }

    #[test]
    fn no_signal_weights_stay_small() {
        // Every category appears equally often among targets and candidates.
        let mut t = Vec::new();
        let mut c = Vec::new();
        for i in 0..100 {
            let cats = [format!("k{}", i % 5), format!("m{}", i % 7)];
            t.push(Article::new(format!("t{i:03}")).with_categories(cats.clone()));
            c.push(Article::new(format!("c{i:03}")).with_categories(cats));
        }
        let (t, c) = (Corpus::new(t).unwrap(), Corpus::new(c).unwrap());
        let idf = build_idf(&t.union(&c).unwrap()).unwrap();
        let m = train(&t, &c, FeatureKind::OneHot, &TrainingConfig::default(), &idf, &[]).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() <= 1e-2), "{:?}", m.weights);
    }

    #[test]
    fn intercept_only_recovers_prevalence() {
        let t: Vec<Article> = (0..30).map(|i| art(&format!("t{i:02}"), &["shared"])).collect();
        let c: Vec<Article> = (0..70).map(|i| art(&format!("c{i:02}"), &["shared"])).collect();
        let (t, c) = (Corpus::new(t).unwrap(), Corpus::new(c).unwrap());
        let idf = build_idf(&t.union(&c).unwrap()).unwrap();
        let m = train(&t, &c, FeatureKind::OneHot, &TrainingConfig::default(), &idf, &[]).unwrap();
        let p = score(&m, t.iter().next().unwrap());
        assert!((p - 0.3).abs() < 1e-3, "{p}");
    }

    #[test]
    fn divergent_learning_rate_is_numeric_error() {
        let (t, c) = fixture(&[("a", &["x"], true), ("b", &["y"], false)]);
        let idf = build_idf(&t.union(&c).unwrap()).unwrap();
        let cfg = TrainingConfig {
            learning_rate: 1e308,
            ..Default::default()
        };
        let err = train(&t, &c, FeatureKind::OneHot, &cfg, &idf, &[]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (t, c) = fixture(&[
            ("a", &["x", "z"], true),
            ("b", &["y"], false),
            ("d", &["x", "y"], false),
        ]);
        let idf = build_idf(&t.union(&c).unwrap()).unwrap();
        let cfg = TrainingConfig {
            init_scale: 0.1,
            seed: 9,
            ..Default::default()
        };
        let a = train(&t, &c, FeatureKind::Tfidf, &cfg, &idf, &[]).unwrap();
        let b = train(&t, &c, FeatureKind::Tfidf, &cfg, &idf, &[]).unwrap();
        assert_eq!(
            a.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            b.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
    }

    fn scores(pairs: &[(&str, f64)]) -> PropensityScores {
        PropensityScores {
            scores: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn pools(t: &[&str], c: &[&str]) -> (Corpus, Corpus) {
        (
            Corpus::new(t.iter().map(|i| art(i, &["a"])).collect()).unwrap(),
            Corpus::new(c.iter().map(|i| art(i, &["a"])).collect()).unwrap(),
        )
    }

    #[test]
    fn nearest_score_selection() {
        let cfg = MatchConfig::new(Method::Propensity);
        let (t, c) = pools(&["t"], &["c1", "c2", "c3"]);
        let s = scores(&[("t", 0.4), ("c1", 0.35), ("c2", 0.5), ("c3", 0.4)]);
        let r = greedy_match_propensity(&t, &c, &s, &cfg).unwrap();
        assert_eq!(r.pairs[0].comparison.as_deref(), Some("c3"));
        assert_eq!(r.pairs[0].score, 0.0);

        let s = scores(&[("t", 0.40), ("c1", 0.35), ("c2", 0.50), ("c3", 0.9)]);
        let r = greedy_match_propensity(&t, &c, &s, &cfg).unwrap();
        assert_eq!(r.pairs[0].comparison.as_deref(), Some("c1"));

        let s = scores(&[("t", 0.5), ("c1", 0.75), ("c2", 0.25), ("c3", 0.75)]);
        let r = greedy_match_propensity(&t, &c, &s, &cfg).unwrap();
        assert_eq!(r.pairs[0].comparison.as_deref(), Some("c1"));
    }

    #[test]
    fn propensity_reuse_cap() {
        let mut cfg = MatchConfig::new(Method::Propensity);
        cfg.max_reuse = 1;
        let (t, c) = pools(&["t1", "t2", "t3"], &["c1", "c2"]);
        let s = scores(&[("t1", 0.5), ("t2", 0.5), ("t3", 0.5), ("c1", 0.5), ("c2", 0.9)]);
        let r = greedy_match_propensity(&t, &c, &s, &cfg).unwrap();
        assert_eq!(r.pairs[0].comparison.as_deref(), Some("c1"));
        assert_eq!(r.pairs[1].comparison.as_deref(), Some("c2"));
        assert_eq!(r.pairs[2].reason, Some(DiscardReason::ReuseExhausted));
    }

    fn result_with_gaps(gaps: &[f64]) -> (MatchResult, PropensityScores) {
        let mut s = BTreeMap::new();
        let mut pairs = Vec::new();
        for (i, g) in gaps.iter().enumerate() {
            let (t, c) = (format!("t{i}"), format!("c{i}"));
            s.insert(t.clone(), 0.05);
            s.insert(c.clone(), 0.05 + g);
            pairs.push(MatchPair {
                target: t,
                comparison: Some(c),
                score: *g,
                shared: 0,
                discarded: false,
                reason: None,
            });
        }
        (
            MatchResult {
                config: MatchConfig::new(Method::Propensity),
                pairs,
            },
            PropensityScores { scores: s },
        )
    }

    #[test]
    fn weak_propensity_rule() {
        let (r, s) = result_with_gaps(&[0.1, 0.1, 0.1]);
        assert_eq!(discard_weak_propensity(&r, &s).unwrap().n_discarded(), 0);

        // Gaps {0,0,0,10} scaled by 1/100 to stay inside (0, 1): mean 0.025,
        // population sd 0.0433, threshold 0.0683.
        let (r, s) = result_with_gaps(&[0.0, 0.0, 0.0, 0.1]);
        let out = discard_weak_propensity(&r, &s).unwrap();
        let flags: Vec<bool> = out.pairs.iter().map(|p| p.discarded).collect();
        assert_eq!(flags, vec![false, false, false, true]);
        assert_eq!(out.pairs[3].reason, Some(DiscardReason::PropensityOutlier));

        let (r, s) = result_with_gaps(&[0.7]);
        assert_eq!(discard_weak_propensity(&r, &s).unwrap(), r);
    }
}
