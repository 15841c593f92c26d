//! Direct category matchers and the greedy construction loop.
//!
//! Every target (in ascending id order) takes the best-scoring candidate that
//! has been used fewer than `max_reuse` times. Ranking is a total order:
//! score descending, then shared-category count descending, then candidate id
//! ascending. Candidate ranking runs in parallel per target; the reuse
//! bookkeeping commits sequentially, so the output does not depend on the
//! thread count.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};
use crate::propensity::TrainingConfig;
use crate::text::any_contains_ci;
use crate::vectorize::{pivoted_norm, IdfTable, PivotSlopeParams, SparseVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Number,
    Percent,
    Tfidf,
    PivotSlope,
    Propensity,
    TfidfPropensity,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Number,
        Method::Percent,
        Method::Tfidf,
        Method::PivotSlope,
        Method::Propensity,
        Method::TfidfPropensity,
    ];

    pub fn is_propensity(self) -> bool {
        matches!(self, Method::Propensity | Method::TfidfPropensity)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Number => "number",
            Method::Percent => "percent",
            Method::Tfidf => "tfidf",
            Method::PivotSlope => "pivot_slope",
            Method::Propensity => "propensity",
            Method::TfidfPropensity => "tfidf_propensity",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown matching method `{s}`")]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub method: Method,
    pub pivot_slope: PivotSlopeParams,
    pub max_reuse: usize,
    pub min_shared_categories: usize,
    /// Case-insensitive substrings; matching categories are ignored on both sides.
    pub excluded_category_patterns: Vec<String>,
    /// Propensity model settings, used by the two propensity methods only.
    pub propensity: TrainingConfig,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            method: Method::PivotSlope,
            pivot_slope: PivotSlopeParams::default(),
            max_reuse: 10,
            min_shared_categories: 2,
            excluded_category_patterns: Vec::new(),
            propensity: TrainingConfig::default(),
        }
    }
}

impl MatchConfig {
    pub fn new(method: Method) -> Self {
        MatchConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if self.max_reuse == 0 {
            problems.push("max_reuse must be at least 1".to_string());
        }
        if let Err(m) = self.pivot_slope.validate() {
            problems.push(m);
        }
        if self.method.is_propensity() {
            problems.extend(self.propensity.validate());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// Fewer shared categories than `min_shared_categories`.
    WeakMatch,
    /// Propensity gap above mean + 1 sd of the run's gaps.
    PropensityOutlier,
    /// Every candidate already used `max_reuse` times.
    ReuseExhausted,
    /// No categories left after exclusions.
    NoCategories,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub target: String,
    pub comparison: Option<String>,
    pub score: f64,
    pub shared: usize,
    pub discarded: bool,
    pub reason: Option<DiscardReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub config: MatchConfig,
    pub pairs: Vec<MatchPair>,
}

impl MatchResult {
    /// Pairs that have a comparison and were not discarded.
    pub fn kept(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().filter(|p| !p.discarded).filter_map(|p| {
            p.comparison
                .as_deref()
                .map(|c| (p.target.as_str(), c))
        })
    }

    /// Every pair that has a comparison, discarded or not.
    pub fn matched(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs
            .iter()
            .filter_map(|p| p.comparison.as_deref().map(|c| (p.target.as_str(), c)))
    }

    pub fn n_discarded(&self) -> usize {
        self.pairs.iter().filter(|p| p.discarded).count()
    }

    /// Use count of each comparison among non-discarded pairs.
    pub fn reuse_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for (_, c) in self.kept() {
            *counts.entry(c).or_default() += 1;
        }
        counts
    }

    /// JSON lines: a header object echoing the configuration (plus `run`
    /// metadata when given), then one object per pair.
    pub fn write_jsonl<W: Write>(&self, out: &mut W, run: Option<&serde_json::Value>) -> std::io::Result<()> {
        let mut header = serde_json::json!({ "config": self.config });
        if let Some(run) = run {
            header["run"] = run.clone();
        }
        writeln!(out, "{header}")?;
        for p in &self.pairs {
            writeln!(out, "{}", serde_json::to_string(p).expect("pair serializes"))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, run: Option<&serde_json::Value>) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_jsonl(&mut out, run)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<MatchResult> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or(Error::MalformedRecord {
                line: 1,
                message: "missing header".into(),
            })?
            .map_err(|e| Error::io(path, e))?;
        #[derive(Deserialize)]
        struct Header {
            config: MatchConfig,
        }
        let header: Header = serde_json::from_str(&header).map_err(|e| Error::MalformedRecord {
            line: 1,
            message: e.to_string(),
        })?;
        let mut pairs = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            pairs.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: i + 2,
                message: e.to_string(),
            })?);
        }
        Ok(MatchResult {
            config: header.config,
            pairs,
        })
    }
}

/// Categories of `a` that match none of `patterns` (case-insensitive substrings).
pub fn apply_exclusions(a: &Article, patterns: &[String]) -> BTreeSet<String> {
    a.categories
        .iter()
        .filter(|c| !any_contains_ci(c, patterns))
        .cloned()
        .collect()
}

/// Number of categories in common.
pub fn score_number(t: &Article, c: &Article) -> f64 {
    t.categories.intersection(&c.categories).count() as f64
}

/// Shared categories as a fraction of the candidate's categories.
pub fn score_percent(t: &Article, c: &Article) -> f64 {
    if c.categories.is_empty() {
        return 0.0;
    }
    score_number(t, c) / c.categories.len() as f64
}

/// A similarity that may be degenerate because one side had an all-zero vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub score: f64,
    pub zero_vector: bool,
}

impl Similarity {
    fn zero() -> Self {
        Similarity {
            score: 0.0,
            zero_vector: true,
        }
    }
}

/// Cosine similarity between the target's TF-IDF vector and the candidate's.
pub fn score_tfidf(t_vec: &SparseVector, c: &Article, idf: &IdfTable) -> Similarity {
    let c_vec = crate::vectorize::tfidf_from_categories(&c.categories, idf).unwrap_or_default();
    let (nt, nc) = (t_vec.norm(), c_vec.norm());
    if nt == 0.0 || nc == 0.0 {
        return Similarity::zero();
    }
    Similarity {
        score: t_vec.dot(&c_vec) / (nt * nc),
        zero_vector: false,
    }
}

/// Like [`score_tfidf`] but the candidate's norm is replaced by the pivoted
/// category count.
pub fn score_pivot_slope(
    t_vec: &SparseVector,
    c: &Article,
    idf: &IdfTable,
    p: PivotSlopeParams,
) -> Similarity {
    let nt = t_vec.norm();
    if nt == 0.0 || c.categories.is_empty() {
        return Similarity::zero();
    }
    // The target's TF scalar cancels between numerator and its norm.
    let dot: f64 = t_vec
        .iter()
        .filter(|(cat, _)| c.categories.contains(*cat))
        .map(|(cat, w)| w * idf.idf(cat))
        .sum();
    Similarity {
        score: dot / (nt * pivoted_norm(c.categories.len(), p)),
        zero_vector: false,
    }
}

/// Sum of values after sorting them, so equal multisets give bit-equal sums.
pub(crate) fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Articles reduced to interned, exclusion-filtered category ids.
pub(crate) struct Prepared {
    pub cats: Vec<u32>,
    /// `sqrt(sum idf^2)` over the article's categories.
    pub idf_norm: f64,
}

pub(crate) struct Interner {
    ids: HashMap<String, u32>,
    pub idf: Vec<f64>,
}

impl Interner {
    pub fn new() -> Self {
        Interner {
            ids: HashMap::new(),
            idf: Vec::new(),
        }
    }

    fn intern(&mut self, cat: &str, idf: &IdfTable) -> u32 {
        if let Some(&id) = self.ids.get(cat) {
            return id;
        }
        let id = self.idf.len() as u32;
        self.ids.insert(cat.to_string(), id);
        self.idf.push(idf.idf(cat));
        id
    }

    pub fn prepare(&mut self, a: &Article, exclusions: &[String], idf: &IdfTable) -> Prepared {
        let mut cats: Vec<u32> = a
            .categories
            .iter()
            .filter(|c| !any_contains_ci(c, exclusions))
            .map(|c| self.intern(c, idf))
            .collect();
        cats.sort_unstable();
        let mut sq: Vec<f64> = cats.iter().map(|&c| self.idf[c as usize].powi(2)).collect();
        let idf_norm = canonical_sum(&mut sq).sqrt();
        Prepared { cats, idf_norm }
    }
}

fn shared_idf_sq(t: &[u32], c: &[u32], idf: &[f64], buf: &mut Vec<f64>) -> usize {
    buf.clear();
    let (mut i, mut j) = (0, 0);
    while i < t.len() && j < c.len() {
        match t[i].cmp(&c[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                buf.push(idf[t[i] as usize].powi(2));
                i += 1;
                j += 1;
            }
        }
    }
    buf.len()
}

/// Score and shared count of one prepared pair under a direct method.
pub(crate) fn direct_score(
    method: Method,
    t: &Prepared,
    c: &Prepared,
    idf: &[f64],
    pivot: PivotSlopeParams,
    buf: &mut Vec<f64>,
) -> (f64, usize) {
    let shared = shared_idf_sq(&t.cats, &c.cats, idf, buf);
    let score = match method {
        Method::Number => shared as f64,
        Method::Percent => {
            if c.cats.is_empty() {
                0.0
            } else {
                shared as f64 / c.cats.len() as f64
            }
        }
        Method::Tfidf => {
            if t.idf_norm == 0.0 || c.idf_norm == 0.0 {
                0.0
            } else {
                canonical_sum(buf) / (t.idf_norm * c.idf_norm)
            }
        }
        Method::PivotSlope => {
            if t.idf_norm == 0.0 || c.cats.is_empty() {
                0.0
            } else {
                canonical_sum(buf) / (t.idf_norm * pivoted_norm(c.cats.len(), pivot))
            }
        }
        Method::Propensity | Method::TfidfPropensity => unreachable!("not a direct method"),
    };
    (score, shared)
}

#[derive(Clone, Copy, Debug)]
struct Ranked {
    score: f64,
    shared: usize,
    cand: usize,
}

fn rank_order(a: &Ranked, b: &Ranked) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.shared.cmp(&a.shared))
        .then(a.cand.cmp(&b.cand))
}

struct Candidates {
    prepared: Vec<Prepared>,
    postings: Vec<Vec<u32>>,
}

impl Candidates {
    /// Rank candidates sharing at least one category with `t`, keeping the
    /// best `limit`. Returns the list and whether it holds every such candidate.
    fn rank(
        &self,
        method: Method,
        t: &Prepared,
        idf: &[f64],
        pivot: PivotSlopeParams,
        limit: usize,
    ) -> (Vec<Ranked>, bool) {
        let mut touched: Vec<u32> = t
            .cats
            .iter()
            .filter_map(|&cat| self.postings.get(cat as usize))
            .flatten()
            .copied()
            .collect();
        touched.sort_unstable();
        touched.dedup();
        let mut buf = Vec::new();
        let mut ranked: Vec<Ranked> = touched
            .iter()
            .map(|&ci| {
                let (score, shared) =
                    direct_score(method, t, &self.prepared[ci as usize], idf, pivot, &mut buf);
                Ranked {
                    score,
                    shared,
                    cand: ci as usize,
                }
            })
            .collect();
        let complete = ranked.len() <= limit;
        if !complete {
            ranked.select_nth_unstable_by(limit, rank_order);
            ranked.truncate(limit);
        }
        ranked.sort_unstable_by(rank_order);
        (ranked, complete)
    }
}

fn check_disjoint(targets: &Corpus, candidates: &Corpus) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::data("candidate pool is empty"));
    }
    if let Some(id) = targets.ids().find(|id| candidates.contains(id)) {
        return Err(Error::data(format!(
            "article `{id}` appears among both targets and candidates"
        )));
    }
    Ok(())
}

/// Greedy matching with capped replacement for the direct methods.
pub fn greedy_match(
    targets: &Corpus,
    candidates: &Corpus,
    cfg: &MatchConfig,
    idf: &IdfTable,
) -> Result<MatchResult> {
    if cfg.method.is_propensity() {
        return Err(Error::Config(vec![format!(
            "method `{}` needs a propensity model; use greedy_match_propensity",
            cfg.method
        )]));
    }
    cfg.validate().map_err(Error::Config)?;
    check_disjoint(targets, candidates)?;

    let mut interner = Interner::new();
    let exclusions = &cfg.excluded_category_patterns;
    let cand_prepared: Vec<Prepared> = candidates
        .iter()
        .map(|a| interner.prepare(a, exclusions, idf))
        .collect();
    let target_prepared: Vec<Prepared> = targets
        .iter()
        .map(|a| interner.prepare(a, exclusions, idf))
        .collect();
    let mut postings: Vec<Vec<u32>> = vec![Vec::new(); interner.idf.len()];
    for (ci, p) in cand_prepared.iter().enumerate() {
        for &cat in &p.cats {
            postings[cat as usize].push(ci as u32);
        }
    }
    let pool = Candidates {
        prepared: cand_prepared,
        postings,
    };

    // At most targets/max_reuse candidates can be exhausted at any point, so
    // the best available candidate is always within this many ranks.
    let limit = targets.len() / cfg.max_reuse + 1;
    let idf_values = &interner.idf;
    let ranked: Vec<(Vec<Ranked>, bool)> = target_prepared
        .par_iter()
        .map(|t| pool.rank(cfg.method, t, idf_values, cfg.pivot_slope, limit))
        .collect();

    let cand_articles = candidates.articles();
    let mut uses = vec![0usize; candidates.len()];
    let mut pairs = Vec::with_capacity(targets.len());
    for ((t, tp), (list, complete)) in targets.iter().zip(&target_prepared).zip(ranked) {
        if tp.cats.is_empty() {
            pairs.push(unmatched(&t.id, DiscardReason::NoCategories));
            continue;
        }
        let mut choice = list.iter().find(|r| uses[r.cand] < cfg.max_reuse).copied();
        if choice.is_none() {
            debug_assert!(complete, "truncated ranking exhausted");
            // Every candidate sharing a category is used up: fall back to the
            // lowest-id available candidate, which shares nothing.
            choice = (0..cand_articles.len())
                .find(|&ci| uses[ci] < cfg.max_reuse)
                .map(|ci| Ranked {
                    score: 0.0,
                    shared: 0,
                    cand: ci,
                });
        }
        match choice {
            Some(r) => {
                uses[r.cand] += 1;
                let weak = r.shared < cfg.min_shared_categories;
                pairs.push(MatchPair {
                    target: t.id.clone(),
                    comparison: Some(cand_articles[r.cand].id.clone()),
                    score: r.score,
                    shared: r.shared,
                    discarded: weak,
                    reason: weak.then_some(DiscardReason::WeakMatch),
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

pub(crate) fn unmatched(target: &str, reason: DiscardReason) -> MatchPair {
    MatchPair {
        target: target.to_string(),
        comparison: None,
        score: 0.0,
        shared: 0,
        discarded: true,
        reason: Some(reason),
    }
}

pub(crate) fn check_pools(targets: &Corpus, candidates: &Corpus) -> Result<()> {
    check_disjoint(targets, candidates)
}

/// Outcome of [`run_match`]; `model` is set for the propensity methods.
#[derive(Clone, Debug)]
pub struct MatchOutcome {
    pub result: MatchResult,
    pub model: Option<crate::propensity::LogRegModel>,
}

/// Fit IDF on targets plus candidates and run `cfg.method`. Propensity
/// methods also train their model and apply the propensity weak-match rule.
pub fn run_match(targets: &Corpus, candidates: &Corpus, cfg: &MatchConfig) -> Result<MatchOutcome> {
    if targets.is_empty() || candidates.is_empty() {
        return Err(Error::EmptyCorpus("matching needs targets and candidates"));
    }
    let idf = IdfTable::fit(targets.iter().chain(candidates.iter()).map(|a| &a.categories))?;
    if cfg.method.is_propensity() {
        let (result, model) = crate::propensity::propensity_match(targets, candidates, cfg, &idf)?;
        Ok(MatchOutcome {
            result,
            model: Some(model),
        })
    } else {
        Ok(MatchOutcome {
            result: greedy_match(targets, candidates, cfg, &idf)?,
            model: None,
        })
    }
}
