//! Simulation regimes (article sampling, category sampling, attribute
//! specific) and the pivot-slope tuning grid.
//!
//! Each random draw comes from a sub-stream named by purpose and simulation
//! index, derived from the run seed. Adding or removing methods never changes
//! which articles a simulation samples.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};
use crate::evaluate::{
    csv_field, evaluate_groups, matched_groups, smd_report, train_lda, EvalOptions, EvaluationReport, LdaConfig,
    LdaModel, SmdReport,
};
use crate::matchers::{run_match, MatchConfig, Method};
use crate::vectorize::PivotSlopeParams;

/// RNG for one named purpose of one simulation.
pub fn substream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    h.update([0u8]);
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Mean number of categories per article.
pub fn mean_category_count(corpus: &Corpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("mean category count of an empty corpus"));
    }
    Ok(corpus.iter().map(|a| a.n_categories() as f64).sum::<f64>() / corpus.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ArticleSampling,
    CategorySampling,
    AttributeSpecific,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub regime: Regime,
    pub n_simulations: usize,
    /// Targets per simulation; `None` means 1000 for article sampling and
    /// 500 for category sampling.
    pub sample_size: Option<usize>,
    pub min_category_size: usize,
    pub seed: u64,
    pub methods: Vec<MatchConfig>,
    pub include_random_baseline: bool,
    /// Replace the pivot of pivot-slope methods with the corpus mean
    /// category count.
    pub pivot_from_corpus: bool,
    pub eval: EvalOptions,
    /// Topic model for the KL metrics; KL is skipped when absent.
    pub lda: Option<LdaConfig>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            regime: Regime::CategorySampling,
            n_simulations: 100,
            sample_size: None,
            min_category_size: 500,
            seed: 0,
            methods: Method::ALL.iter().map(|&m| MatchConfig::new(m)).collect(),
            include_random_baseline: true,
            pivot_from_corpus: true,
            eval: EvalOptions::default(),
            lda: None,
        }
    }
}

impl SimulationSpec {
    pub fn sample_size(&self) -> usize {
        self.sample_size.unwrap_or(match self.regime {
            Regime::ArticleSampling => 1000,
            _ => 500,
        })
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.n_simulations == 0 {
            problems.push("n_simulations must be at least 1".to_string());
        }
        if self.sample_size() == 0 {
            problems.push("sample_size must be at least 1".to_string());
        }
        if self.methods.is_empty() && !self.include_random_baseline {
            problems.push("methods is empty and the random baseline is off".to_string());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if let Err(ps) = m.validate() {
                problems.extend(ps.into_iter().map(|p| format!("methods[{i}]: {p}")));
            }
        }
        if let Some(lda) = &self.lda {
            problems.extend(lda.validate());
        }
        problems
    }
}

/// Scalar metrics of one evaluation, without the per-category table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub avg_smd: f64,
    pub pct_smd_gt_01: f64,
    #[serde(with = "crate::evaluate::float_scalar")]
    pub cat_count_smd: f64,
    #[serde(with = "crate::evaluate::float_scalar")]
    pub text_len_smd: f64,
    pub plo_mean: f64,
    pub plo_sd: f64,
    pub kl_tc: Option<f64>,
    pub kl_ct: Option<f64>,
    pub n_pairs: f64,
}

impl From<&EvaluationReport> for MetricRow {
    fn from(r: &EvaluationReport) -> Self {
        MetricRow {
            avg_smd: r.avg_smd,
            pct_smd_gt_01: r.pct_smd_gt_01,
            cat_count_smd: r.cat_count_smd,
            text_len_smd: r.text_len_smd,
            plo_mean: r.plo_mean,
            plo_sd: r.plo_sd,
            kl_tc: r.kl_tc,
            kl_ct: r.kl_ct,
            n_pairs: r.n_pairs as f64,
        }
    }
}

const METRIC_NAMES: [&str; 9] = [
    "avg_smd",
    "pct_smd_gt_01",
    "cat_count_smd",
    "text_len_smd",
    "plo_mean",
    "plo_sd",
    "kl_tc",
    "kl_ct",
    "n_pairs",
];

impl MetricRow {
    fn values(&self) -> [Option<f64>; 9] {
        [
            Some(self.avg_smd),
            Some(self.pct_smd_gt_01),
            Some(self.cat_count_smd),
            Some(self.text_len_smd),
            Some(self.plo_mean),
            Some(self.plo_sd),
            self.kl_tc,
            self.kl_ct,
            Some(self.n_pairs),
        ]
    }

    fn from_values(v: [Option<f64>; 9]) -> Self {
        MetricRow {
            avg_smd: v[0].unwrap_or(f64::NAN),
            pct_smd_gt_01: v[1].unwrap_or(f64::NAN),
            cat_count_smd: v[2].unwrap_or(f64::NAN),
            text_len_smd: v[3].unwrap_or(f64::NAN),
            plo_mean: v[4].unwrap_or(f64::NAN),
            plo_sd: v[5].unwrap_or(f64::NAN),
            kl_tc: v[6],
            kl_ct: v[7],
            n_pairs: v[8].unwrap_or(f64::NAN),
        }
    }

    /// Column-wise arithmetic mean and sample sd (0 for a single row).
    pub fn mean_sd(rows: &[MetricRow]) -> (MetricRow, MetricRow) {
        let mut mean = [None; 9];
        let mut sd = [None; 9];
        for j in 0..9 {
            let xs: Vec<f64> = rows.iter().filter_map(|r| r.values()[j]).collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let s = if xs.len() > 1 {
                (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            mean[j] = Some(m);
            sd[j] = Some(s);
        }
        (MetricRow::from_values(mean), MetricRow::from_values(sd))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub index: usize,
    pub target_category: Option<String>,
    pub n_targets: usize,
    pub n_candidates: usize,
    /// Metrics per method label, in method order; the random baseline is
    /// labelled `random`.
    pub metrics: Vec<(String, MetricRow)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub label: String,
    pub n_simulations: usize,
    pub mean: MetricRow,
    pub sd: MetricRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub regime: Regime,
    pub seed: u64,
    pub pivot: Option<f64>,
    pub runs: Vec<SimulationRun>,
    pub aggregate: Vec<MethodAggregate>,
}

impl SimulationReport {
    pub fn aggregate_for(&self, label: &str) -> Option<&MethodAggregate> {
        self.aggregate.iter().find(|a| a.label == label)
    }

    /// One row per method: mean columns followed by `_sd` columns.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "method,n_simulations")?;
        for n in METRIC_NAMES {
            write!(out, ",{n}")?;
        }
        for n in METRIC_NAMES {
            write!(out, ",{n}_sd")?;
        }
        writeln!(out)?;
        for a in &self.aggregate {
            write!(out, "{},{}", csv_field(&a.label), a.n_simulations)?;
            for v in a.mean.values().iter().chain(a.sd.values().iter()) {
                match v {
                    Some(x) => write!(out, ",{x}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Unique display labels: method names, suffixed `#2`, `#3` on repeats.
pub fn method_labels(methods: &[MatchConfig]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    methods
        .iter()
        .map(|m| {
            let k = seen.entry(m.method.name()).or_insert(0);
            *k += 1;
            if *k == 1 {
                m.method.name().to_string()
            } else {
                format!("{}#{}", m.method.name(), k)
            }
        })
        .collect()
}

fn resolved_methods(spec: &SimulationSpec, pivot: Option<f64>) -> Vec<MatchConfig> {
    spec.methods
        .iter()
        .map(|m| {
            let mut m = m.clone();
            if let Some(p) = pivot {
                m.pivot_slope.pivot = p;
            }
            m
        })
        .collect()
}

/// Uniform sample of `k` indices from `0..n`, returned ascending.
fn sample_sorted(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Evaluate every method, plus the random baseline, on one target split.
fn evaluate_split(
    index: usize,
    targets: &Corpus,
    candidates: &Corpus,
    methods: &[MatchConfig],
    labels: &[String],
    spec: &SimulationSpec,
    exclusions: &[String],
    lda: Option<&LdaModel>,
) -> Result<Vec<(String, MetricRow)>> {
    let mut out = Vec::with_capacity(methods.len() + 1);
    for (cfg, label) in methods.iter().zip(labels) {
        let mut cfg = cfg.clone();
        cfg.excluded_category_patterns.extend(exclusions.iter().cloned());
        let outcome = run_match(targets, candidates, &cfg)?;
        let (t, c) = matched_groups(&outcome.result, targets, candidates, false)?;
        let report = evaluate_groups(&t, &c, &cfg.excluded_category_patterns, &spec.eval, lda)?;
        out.push((label.clone(), MetricRow::from(&report)));
    }
    if spec.include_random_baseline {
        let k = targets.len().min(candidates.len());
        let mut rng = substream(spec.seed, "random_baseline", index as u64);
        let picks = sample_sorted(&mut rng, candidates.len(), k);
        let c: Vec<&Article> = picks.iter().map(|&i| &*candidates.articles()[i]).collect();
        let t: Vec<&Article> = targets.iter().collect();
        let report = evaluate_groups(&t, &c, exclusions, &spec.eval, lda)?;
        out.push(("random".to_string(), MetricRow::from(&report)));
    }
    Ok(out)
}

fn aggregate(runs: &[SimulationRun]) -> Vec<MethodAggregate> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    first
        .metrics
        .iter()
        .enumerate()
        .map(|(j, (label, _))| {
            let rows: Vec<MetricRow> = runs.iter().map(|r| r.metrics[j].1.clone()).collect();
            let (mean, sd) = MetricRow::mean_sd(&rows);
            MethodAggregate {
                label: label.clone(),
                n_simulations: rows.len(),
                mean,
                sd,
            }
        })
        .collect()
}

fn prepare(corpus: &Corpus, spec: &SimulationSpec) -> Result<(Option<f64>, Option<LdaModel>)> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let pivot = if spec.pivot_from_corpus {
        Some(mean_category_count(corpus)?)
    } else {
        None
    };
    let lda = spec.lda.as_ref().map(|cfg| train_lda(corpus, cfg)).transpose()?;
    Ok((pivot, lda))
}

/// Random targets of `sample_size` articles against the rest of the corpus.
pub fn run_article_sampling(corpus: &Corpus, spec: &SimulationSpec) -> Result<SimulationReport> {
    let s = spec.sample_size();
    if corpus.len() < 2 * s {
        return Err(Error::data(format!(
            "article sampling of {s} targets needs at least {} articles, corpus has {}",
            2 * s,
            corpus.len()
        )));
    }
    let (pivot, lda) = prepare(corpus, spec)?;
    let methods = resolved_methods(spec, pivot);
    let labels = method_labels(&methods);
    let runs = (0..spec.n_simulations)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(spec.seed, "article_sampling", i as u64);
            let picked: BTreeSet<usize> = sample_sorted(&mut rng, corpus.len(), s).into_iter().collect();
            let arts = corpus.articles();
            let targets = Corpus::from_shared(picked.iter().map(|&j| arts[j].clone()).collect())?;
            let candidates = Corpus::from_shared(
                (0..arts.len()).filter(|j| !picked.contains(j)).map(|j| arts[j].clone()).collect(),
            )?;
            let metrics = evaluate_split(i, &targets, &candidates, &methods, &labels, spec, &[], lda.as_ref())?;
            Ok(SimulationRun {
                index: i,
                target_category: None,
                n_targets: targets.len(),
                n_candidates: candidates.len(),
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationReport {
        regime: Regime::ArticleSampling,
        seed: spec.seed,
        pivot,
        aggregate: aggregate(&runs),
        runs,
    })
}

/// Categories with at least `min_size` members, ascending by name.
pub fn qualifying_categories(corpus: &Corpus, min_size: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in corpus.iter() {
        for c in &a.categories {
            *counts.entry(c.as_str()).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, n)| n >= min_size)
        .map(|(c, _)| c.to_string())
        .collect()
}

/// Split for one category: sampled members as targets, non-members as
/// candidates.
fn category_split(corpus: &Corpus, category: &str, k: usize, rng: &mut ChaCha8Rng) -> Result<(Corpus, Corpus)> {
    let arts = corpus.articles();
    let members: Vec<usize> = (0..arts.len()).filter(|&j| arts[j].categories.contains(category)).collect();
    if members.len() < k {
        return Err(Error::data(format!(
            "category `{category}` has {} members, fewer than the sample size {k}",
            members.len()
        )));
    }
    let picks = sample_sorted(rng, members.len(), k);
    let targets = Corpus::from_shared(picks.iter().map(|&p| arts[members[p]].clone()).collect())?;
    let candidates = Corpus::from_shared(
        arts.iter()
            .filter(|a| !a.categories.contains(category))
            .cloned()
            .collect(),
    )?;
    Ok((targets, candidates))
}

/// One qualifying category per simulation (uniform), `sample_size` of its
/// members as targets, every non-member as a candidate. The sampled category
/// is excluded from the SMD universe.
pub fn run_category_sampling(corpus: &Corpus, spec: &SimulationSpec) -> Result<SimulationReport> {
    let qualifying = qualifying_categories(corpus, spec.min_category_size.max(spec.sample_size()));
    if qualifying.is_empty() {
        return Err(Error::data(format!(
            "no category has at least {} members",
            spec.min_category_size.max(spec.sample_size())
        )));
    }
    let (pivot, lda) = prepare(corpus, spec)?;
    let methods = resolved_methods(spec, pivot);
    let labels = method_labels(&methods);
    let runs = (0..spec.n_simulations)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(spec.seed, "category_sampling", i as u64);
            let pick = sample_sorted(&mut rng, qualifying.len(), 1)[0];
            let category = &qualifying[pick];
            let (targets, candidates) = category_split(corpus, category, spec.sample_size(), &mut rng)?;
            let exclusions = exact_category_pattern(category, &targets, &candidates);
            let metrics = evaluate_split(i, &targets, &candidates, &methods, &labels, spec, &exclusions, lda.as_ref())?;
            Ok(SimulationRun {
                index: i,
                target_category: Some(category.clone()),
                n_targets: targets.len(),
                n_candidates: candidates.len(),
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationReport {
        regime: Regime::CategorySampling,
        seed: spec.seed,
        pivot,
        aggregate: aggregate(&runs),
        runs,
    })
}

/// Exclusion pattern for the sampled category. Patterns match substrings, so
/// categories containing its name go too; that case is logged.
fn exact_category_pattern(category: &str, targets: &Corpus, candidates: &Corpus) -> Vec<String> {
    let lower = category.to_lowercase();
    let collides = targets
        .iter()
        .chain(candidates.iter())
        .flat_map(|a| a.categories.iter())
        .any(|c| c != category && c.to_lowercase().contains(&lower));
    if collides {
        log::warn!("sampled category `{category}` is a substring of other categories; they are excluded as well");
    }
    vec![category.to_string()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmdSummary {
    pub avg_smd: f64,
    /// Normal interval mean +/- 1.96 standard errors across finite
    /// per-category SMDs.
    pub ci_low: f64,
    pub ci_high: f64,
    pub pct_smd_gt_01: f64,
    pub n_infinite_smd: usize,
    pub n_categories: usize,
}

impl From<&SmdReport> for SmdSummary {
    fn from(r: &SmdReport) -> Self {
        let finite: Vec<f64> = r.per_category_smd.values().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len() as f64;
        let half = if finite.len() > 1 {
            let m = finite.iter().sum::<f64>() / n;
            let sd = (finite.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            1.96 * sd / n.sqrt()
        } else {
            0.0
        };
        SmdSummary {
            avg_smd: r.avg_smd,
            ci_low: r.avg_smd - half,
            ci_high: r.avg_smd + half,
            pct_smd_gt_01: r.pct_smd_gt_01,
            n_infinite_smd: r.n_infinite_smd,
            n_categories: r.per_category_smd.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeRow {
    pub label: String,
    pub n_pairs: usize,
    pub n_discarded: usize,
    pub all_pairs: SmdSummary,
    /// Absent when every pair was discarded.
    pub kept_pairs: Option<SmdSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub exclusions: Vec<String>,
    /// Targets against the whole candidate pool.
    pub no_matching: SmdSummary,
    pub rows: Vec<AttributeRow>,
}

impl AttributeReport {
    pub fn row(&self, label: &str) -> Option<&AttributeRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "method,variant,n_pairs,n_discarded,avg_smd,ci_low,ci_high,pct_smd_gt_01,n_infinite_smd")?;
        let line = |out: &mut W, label: &str, variant: &str, n: usize, d: usize, s: &SmdSummary| {
            writeln!(
                out,
                "{},{variant},{n},{d},{},{},{},{},{}",
                csv_field(label),
                s.avg_smd,
                s.ci_low,
                s.ci_high,
                s.pct_smd_gt_01,
                s.n_infinite_smd
            )
        };
        line(out, "no_matching", "all", 0, 0, &self.no_matching)?;
        for r in &self.rows {
            line(out, &r.label, "all", r.n_pairs, r.n_discarded, &r.all_pairs)?;
            if let Some(k) = &r.kept_pairs {
                line(out, &r.label, "kept", r.n_pairs - r.n_discarded, 0, k)?;
            }
        }
        Ok(())
    }
}

/// SMD balance per method on a fixed target/candidate split, before and
/// after weak-match discarding. `exclusions` apply to matching and SMD.
pub fn run_attribute_specific(
    targets: &Corpus,
    candidates: &Corpus,
    methods: &[MatchConfig],
    exclusions: &[String],
) -> Result<AttributeReport> {
    if targets.is_empty() || candidates.is_empty() {
        return Err(Error::EmptyCorpus("attribute-specific evaluation needs both groups"));
    }
    let t_all: Vec<&Article> = targets.iter().collect();
    let c_all: Vec<&Article> = candidates.iter().collect();
    let no_matching = SmdSummary::from(&smd_report(&t_all, &c_all, exclusions)?);
    let labels = method_labels(methods);
    let rows = methods
        .par_iter()
        .zip(labels.par_iter())
        .map(|(cfg, label)| {
            let mut cfg = cfg.clone();
            cfg.excluded_category_patterns.extend(exclusions.iter().cloned());
            let outcome = run_match(targets, candidates, &cfg)?;
            let patterns = &cfg.excluded_category_patterns;
            let (t, c) = matched_groups(&outcome.result, targets, candidates, false)?;
            let all_pairs = SmdSummary::from(&smd_report(&t, &c, patterns)?);
            let (tk, ck) = matched_groups(&outcome.result, targets, candidates, true)?;
            let kept_pairs = if tk.is_empty() {
                None
            } else {
                Some(SmdSummary::from(&smd_report(&tk, &ck, patterns)?))
            };
            Ok(AttributeRow {
                label: label.clone(),
                n_pairs: t.len(),
                n_discarded: t.len() - tk.len(),
                all_pairs,
                kept_pairs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributeReport {
        exclusions: exclusions.to_vec(),
        no_matching,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSpec {
    pub article_sample: usize,
    pub n_categories: usize,
    pub category_sample: usize,
    pub min_category_size: usize,
    pub seed: u64,
    /// `None` means the corpus mean category count.
    pub pivot: Option<f64>,
    pub grid: Vec<f64>,
    pub base: MatchConfig,
    pub eval: EvalOptions,
    pub lda: Option<LdaConfig>,
}

impl Default for TuneSpec {
    fn default() -> Self {
        TuneSpec {
            article_sample: 1000,
            n_categories: 10,
            category_sample: 500,
            min_category_size: 500,
            seed: 0,
            pivot: None,
            grid: default_grid(),
            base: MatchConfig::new(Method::PivotSlope),
            eval: EvalOptions::default(),
            lda: None,
        }
    }
}

/// 0.0, 0.1, ..., 1.0.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl TuneSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.grid.is_empty() {
            problems.push("grid must not be empty".to_string());
        }
        for s in &self.grid {
            if !(0.0..=1.0).contains(s) {
                problems.push(format!("grid slope {s} outside [0, 1]"));
            }
        }
        if let Some(p) = self.pivot {
            if !(p > 0.0 && p.is_finite()) {
                problems.push(format!("pivot must be positive, got {p}"));
            }
        }
        if self.article_sample == 0 && self.n_categories == 0 {
            problems.push("both tuning sets are empty".to_string());
        }
        if let Some(lda) = &self.lda {
            problems.extend(lda.validate());
        }
        problems
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub slope: f64,
    /// Mean metrics on the article-sampling tuning set.
    pub article_metrics: Option<MetricRow>,
    /// Mean metrics over the category tuning sets.
    pub category_metrics: Option<MetricRow>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub best_slope: f64,
    pub pivot: f64,
    pub tuning_categories: Vec<String>,
    pub grid: Vec<GridRow>,
    /// Target articles drawn for tuning; keep them out of later evaluation.
    pub tuning_ids: BTreeSet<String>,
}

impl TuneReport {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "slope,objective")?;
        for prefix in ["article", "category"] {
            for n in OBJECTIVE_METRICS {
                write!(out, ",{prefix}_{n}")?;
            }
        }
        writeln!(out)?;
        for row in &self.grid {
            write!(out, "{},{}", row.slope, row.objective)?;
            for m in [&row.article_metrics, &row.category_metrics] {
                let vals = m.as_ref().map(objective_values);
                for j in 0..OBJECTIVE_METRICS.len() {
                    match vals.as_ref().and_then(|v| v[j]) {
                        Some(x) => write!(out, ",{x}")?,
                        None => write!(out, ",")?,
                    }
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

const OBJECTIVE_METRICS: [&str; 7] = [
    "avg_smd",
    "pct_smd_gt_01",
    "abs_cat_count_smd",
    "abs_text_len_smd",
    "plo_mean",
    "kl_tc",
    "kl_ct",
];

fn objective_values(m: &MetricRow) -> [Option<f64>; 7] {
    [
        Some(m.avg_smd),
        Some(m.pct_smd_gt_01),
        Some(m.cat_count_smd.abs()),
        Some(m.text_len_smd.abs()),
        Some(m.plo_mean),
        m.kl_tc,
        m.kl_ct,
    ]
}

/// Unweighted mean over metric columns of min-max normalized values; a
/// column that is constant across the grid contributes 0.
pub fn minmax_objective(columns: &[Vec<Option<f64>>], n_rows: usize) -> Vec<f64> {
    let mut total = vec![0.0; n_rows];
    let mut n_cols = 0usize;
    for col in columns {
        if col.iter().any(|v| v.is_none_or(|x| !x.is_finite())) {
            continue;
        }
        let vals: Vec<f64> = col.iter().map(|v| v.unwrap()).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        n_cols += 1;
        if hi > lo {
            for (t, v) in total.iter_mut().zip(&vals) {
                *t += (v - lo) / (hi - lo);
            }
        }
    }
    if n_cols > 0 {
        for t in total.iter_mut() {
            *t /= n_cols as f64;
        }
    }
    total
}

/// Grid search for the pivot-slope slope on an article tuning set and
/// `n_categories` category tuning sets.
pub fn tune_slope(corpus: &Corpus, spec: &TuneSpec) -> Result<TuneReport> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let pivot = match spec.pivot {
        Some(p) => p,
        None => mean_category_count(corpus)?,
    };
    let lda = spec.lda.as_ref().map(|cfg| train_lda(corpus, cfg)).transpose()?;

    let mut splits: Vec<(bool, Corpus, Corpus, Vec<String>)> = Vec::new();
    if spec.article_sample > 0 {
        if corpus.len() < 2 * spec.article_sample {
            return Err(Error::data(format!(
                "article tuning set of {} needs at least {} articles",
                spec.article_sample,
                2 * spec.article_sample
            )));
        }
        let mut rng = substream(spec.seed, "tune_articles", 0);
        let picked: BTreeSet<usize> = sample_sorted(&mut rng, corpus.len(), spec.article_sample).into_iter().collect();
        let arts = corpus.articles();
        let t = Corpus::from_shared(picked.iter().map(|&j| arts[j].clone()).collect())?;
        let c = Corpus::from_shared((0..arts.len()).filter(|j| !picked.contains(j)).map(|j| arts[j].clone()).collect())?;
        splits.push((false, t, c, Vec::new()));
    }
    let mut tuning_categories = Vec::new();
    if spec.n_categories > 0 {
        let qualifying = qualifying_categories(corpus, spec.min_category_size.max(spec.category_sample));
        if qualifying.is_empty() {
            return Err(Error::data("no category is large enough for the category tuning sets"));
        }
        let k = spec.n_categories.min(qualifying.len());
        if k < spec.n_categories {
            log::warn!("only {k} categories qualify for tuning, wanted {}", spec.n_categories);
        }
        let mut rng = substream(spec.seed, "tune_categories", 0);
        for (n, idx) in sample_sorted(&mut rng, qualifying.len(), k).into_iter().enumerate() {
            let cat = &qualifying[idx];
            let mut rng = substream(spec.seed, "tune_category_members", n as u64);
            let (t, c) = category_split(corpus, cat, spec.category_sample, &mut rng)?;
            splits.push((true, t, c, vec![cat.clone()]));
            tuning_categories.push(cat.clone());
        }
    }

    let per_slope: Vec<(Option<MetricRow>, Option<MetricRow>)> = spec
        .grid
        .par_iter()
        .map(|&slope| {
            let mut cfg = spec.base.clone();
            cfg.method = Method::PivotSlope;
            cfg.pivot_slope = PivotSlopeParams::new(pivot, slope)?;
            let mut art_rows = Vec::new();
            let mut cat_rows = Vec::new();
            for (is_cat, t, c, excl) in &splits {
                let mut cfg = cfg.clone();
                cfg.excluded_category_patterns.extend(excl.iter().cloned());
                let outcome = run_match(t, c, &cfg)?;
                let (tg, cg) = matched_groups(&outcome.result, t, c, false)?;
                let r = evaluate_groups(&tg, &cg, &cfg.excluded_category_patterns, &spec.eval, lda.as_ref())?;
                if *is_cat {
                    cat_rows.push(MetricRow::from(&r));
                } else {
                    art_rows.push(MetricRow::from(&r));
                }
            }
            let mean = |rows: &[MetricRow]| (!rows.is_empty()).then(|| MetricRow::mean_sd(rows).0);
            Ok((mean(&art_rows), mean(&cat_rows)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
    for pick in [0usize, 1] {
        for j in 0..OBJECTIVE_METRICS.len() {
            let col: Vec<Option<f64>> = per_slope
                .iter()
                .map(|(a, c)| {
                    let m = if pick == 0 { a } else { c };
                    m.as_ref().and_then(|m| objective_values(m)[j])
                })
                .collect();
            if col.iter().any(Option::is_some) {
                columns.push(col);
            }
        }
    }
    let objective = minmax_objective(&columns, spec.grid.len());
    let mut best = 0;
    for i in 1..spec.grid.len() {
        let better = objective[i] < objective[best]
            || (objective[i] == objective[best] && spec.grid[i] < spec.grid[best]);
        if better {
            best = i;
        }
    }
    let tuning_ids = splits
        .iter()
        .flat_map(|(_, t, _, _)| t.ids().map(str::to_string))
        .collect();
    let grid = spec
        .grid
        .iter()
        .zip(per_slope)
        .zip(&objective)
        .map(|((&slope, (a, c)), &obj)| GridRow {
            slope,
            article_metrics: a,
            category_metrics: c,
            objective: obj,
        })
        .collect();
    Ok(TuneReport {
        best_slope: spec.grid[best],
        pivot,
        tuning_categories,
        grid,
        tuning_ids,
    })
}
