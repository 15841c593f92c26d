//! Controlled group comparisons over matched pairs: article statistics,
//! language availability and lengths, section proportions and log-odds word
//! tables.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};
use crate::evaluate::{csv_field, matched_groups, polar_log_odds, token_counts, WordScore, DEFAULT_PRIOR_SCALE};
use crate::groups::{build_comparison_pool, group_corpus, tag_by_rules, GroupAssignment, GroupConfig, Pairing};
use crate::matchers::{run_match, MatchConfig, MatchResult, Method};
use crate::simulate::mean_category_count;
use crate::stats::{benjamini_hochberg, mcnemar, paired_t, welch_t, TestResult};

pub const DEFAULT_LANGUAGES: [&str; 10] = ["en", "fr", "ar", "ru", "ja", "it", "es", "de", "pt", "zh"];
pub const DEFAULT_SECTIONS: [&str; 3] = ["Personal Life", "Career", "Early Life"];
pub const DEFAULT_WORD_TABLE_K: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub alpha: f64,
    /// Languages whose lengths are compared over pairs available in both.
    pub languages: Vec<String>,
    pub sections: Vec<String>,
    pub word_table_k: usize,
    pub prior_scale: f64,
    /// Replace the pivot-slope pivot with the corpus mean category count.
    pub pivot_from_corpus: bool,
    /// Also compare targets against the whole pool with unpaired tests.
    pub unmatched_baseline: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            alpha: 0.05,
            languages: DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect(),
            sections: DEFAULT_SECTIONS.iter().map(|s| s.to_string()).collect(),
            word_table_k: DEFAULT_WORD_TABLE_K,
            prior_scale: DEFAULT_PRIOR_SCALE,
            pivot_from_corpus: true,
            unmatched_baseline: true,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            problems.push(format!("analysis.alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.word_table_k == 0 {
            problems.push("analysis.word_table_k must be at least 1".into());
        }
        if !(self.prior_scale > 0.0 && self.prior_scale.is_finite()) {
            problems.push(format!("analysis.prior_scale must be positive, got {}", self.prior_scale));
        }
        problems
    }
}

pub type Pair<'a> = (&'a Article, &'a Article);

/// Non-discarded pairs of a match result.
pub fn kept_pairs<'a>(result: &MatchResult, targets: &'a Corpus, candidates: &'a Corpus) -> Result<Vec<Pair<'a>>> {
    let (t, c) = matched_groups(result, targets, candidates, true)?;
    Ok(t.into_iter().zip(c).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub metric: String,
    pub target_mean: f64,
    pub comparison_mean: f64,
    pub test: TestResult,
    pub corrected_p: f64,
    pub significant: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Target,
    Comparison,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityRow {
    pub language: String,
    pub n_pairs: usize,
    pub target_rate: f64,
    pub comparison_rate: f64,
    /// Pairs where only the target is available.
    pub target_only: u64,
    /// Pairs where only the comparison is available.
    pub comparison_only: u64,
    pub test: TestResult,
    pub corrected_p: f64,
    pub significant: bool,
    /// Side with more available articles.
    pub more_available: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub language: String,
    pub n_both: usize,
    pub target_mean: Option<f64>,
    pub comparison_mean: Option<f64>,
    pub test: Option<TestResult>,
    pub corrected_p: Option<f64>,
    pub significant: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WordTable {
    pub target: Vec<WordScore>,
    pub comparison: Vec<WordScore>,
    pub n_target_tokens: u64,
    pub n_comparison_tokens: u64,
}

fn mean(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// BH over a family of rows; fills corrected p and significance in place.
fn correct<T>(rows: &mut [T], alpha: f64, p: impl Fn(&T) -> f64, set: impl Fn(&mut T, f64, bool)) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let raw: Vec<f64> = rows.iter().map(&p).collect();
    let bh = benjamini_hochberg(&raw, alpha)?;
    for (i, row) in rows.iter_mut().enumerate() {
        set(row, bh.adjusted[i], bh.reject[i]);
    }
    Ok(())
}

fn correct_stats(rows: &mut [StatRow], alpha: f64) -> Result<()> {
    correct(
        rows,
        alpha,
        |r| r.test.p_value,
        |r, q, s| {
            r.corrected_p = q;
            r.significant = s;
        },
    )
}

fn paired_row(metric: &str, xs: &[f64], ys: &[f64]) -> Result<StatRow> {
    let test = paired_t(xs, ys)?;
    Ok(StatRow {
        metric: metric.to_string(),
        target_mean: mean(xs),
        comparison_mean: mean(ys),
        corrected_p: test.p_value,
        significant: false,
        test,
    })
}

fn welch_row(metric: &str, xs: &[f64], ys: &[f64]) -> Result<StatRow> {
    let test = welch_t(xs, ys)?;
    Ok(StatRow {
        metric: metric.to_string(),
        target_mean: mean(xs),
        comparison_mean: mean(ys),
        corrected_p: test.p_value,
        significant: false,
        test,
    })
}

type Metric = (&'static str, fn(&Article) -> f64);

const METRICS: [Metric; 4] = [
    ("length", |a| a.n_tokens() as f64),
    ("edits", |a| a.edit_count as f64),
    ("age_months", |a| a.age_months),
    ("languages", |a| a.languages.len() as f64),
];

fn check_present(metric: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::data(format!("metric `{metric}` is absent from all articles")));
    }
    Ok(())
}

fn require_pairs(pairs: &[Pair]) -> Result<()> {
    if pairs.len() < 2 {
        return Err(Error::data(format!("analysis needs at least two kept pairs, got {}", pairs.len())));
    }
    Ok(())
}

/// Length, edit count, age and language count: pair means and paired
/// t-tests, BH-corrected across the four metrics.
pub fn group_statistics(pairs: &[Pair], alpha: f64) -> Result<Vec<StatRow>> {
    require_pairs(pairs)?;
    let mut rows = Vec::new();
    for (name, f) in METRICS {
        let xs: Vec<f64> = pairs.iter().map(|(t, _)| f(t)).collect();
        let ys: Vec<f64> = pairs.iter().map(|(_, c)| f(c)).collect();
        check_present(name, &[xs.as_slice(), ys.as_slice()].concat())?;
        rows.push(paired_row(name, &xs, &ys)?);
    }
    correct_stats(&mut rows, alpha)?;
    Ok(rows)
}

/// The same metrics for targets against the whole pool, with Welch tests.
pub fn unmatched_statistics(targets: &[&Article], pool: &[&Article], alpha: f64) -> Result<Vec<StatRow>> {
    let mut rows = Vec::new();
    for (name, f) in METRICS {
        let xs: Vec<f64> = targets.iter().map(|a| f(a)).collect();
        let ys: Vec<f64> = pool.iter().map(|a| f(a)).collect();
        check_present(name, &[xs.as_slice(), ys.as_slice()].concat())?;
        rows.push(welch_row(name, &xs, &ys)?);
    }
    correct_stats(&mut rows, alpha)?;
    Ok(rows)
}

/// McNemar per language present on either side of any pair, BH-corrected
/// across all tested languages.
pub fn language_availability(pairs: &[Pair], alpha: f64) -> Result<Vec<AvailabilityRow>> {
    require_pairs(pairs)?;
    let languages: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|(t, c)| t.languages.iter().chain(&c.languages))
        .map(String::as_str)
        .collect();
    if languages.is_empty() {
        return Err(Error::data("no language availability recorded for any paired article"));
    }
    let n = pairs.len();
    let mut rows: Vec<AvailabilityRow> = languages
        .into_iter()
        .map(|lang| {
            let (mut in_t, mut in_c, mut b, mut c) = (0u64, 0u64, 0u64, 0u64);
            for (t, cmp) in pairs {
                let (ht, hc) = (t.languages.contains(lang), cmp.languages.contains(lang));
                in_t += ht as u64;
                in_c += hc as u64;
                b += (ht && !hc) as u64;
                c += (hc && !ht) as u64;
            }
            let test = mcnemar(b, c);
            AvailabilityRow {
                language: lang.to_string(),
                n_pairs: n,
                target_rate: in_t as f64 / n as f64,
                comparison_rate: in_c as f64 / n as f64,
                target_only: b,
                comparison_only: c,
                corrected_p: test.p_value,
                significant: false,
                more_available: match in_t.cmp(&in_c) {
                    std::cmp::Ordering::Greater => Direction::Target,
                    std::cmp::Ordering::Less => Direction::Comparison,
                    std::cmp::Ordering::Equal => Direction::Equal,
                },
                test,
            }
        })
        .collect();
    correct(
        &mut rows,
        alpha,
        |r| r.test.p_value,
        |r, q, s| {
            r.corrected_p = q;
            r.significant = s;
        },
    )?;
    Ok(rows)
}

/// Paired length tests restricted to pairs where both sides exist in the
/// language. Languages with fewer than two such pairs get an untested row.
pub fn per_language_lengths(pairs: &[Pair], languages: &[String], alpha: f64) -> Result<Vec<LengthRow>> {
    let mut rows = Vec::with_capacity(languages.len());
    for lang in languages {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter_map(|(t, c)| Some((t.length_in(lang)? as f64, c.length_in(lang)? as f64)))
            .unzip();
        let n_both = xs.len();
        let test = if n_both >= 2 { Some(paired_t(&xs, &ys)?) } else { None };
        rows.push(LengthRow {
            language: lang.clone(),
            n_both,
            target_mean: (n_both > 0).then(|| mean(&xs)),
            comparison_mean: (n_both > 0).then(|| mean(&ys)),
            corrected_p: test.as_ref().map(|t| t.p_value),
            test,
            significant: false,
        });
    }
    let mut tested: Vec<&mut LengthRow> = rows.iter_mut().filter(|r| r.test.is_some()).collect();
    correct(
        &mut tested,
        alpha,
        |r| r.test.as_ref().map_or(1.0, |t| t.p_value),
        |r, q, s| {
            r.corrected_p = Some(q);
            r.significant = s;
        },
    )?;
    Ok(rows)
}

/// Share of the article's tokens in the named section (trimmed,
/// case-insensitive); 0 when absent.
pub fn section_proportion(a: &Article, section: &str) -> f64 {
    let want = section.trim().to_lowercase();
    let tokens: u64 = a
        .sections
        .iter()
        .filter(|(name, _)| name.trim().to_lowercase() == want)
        .map(|(_, n)| n)
        .sum();
    let total = if a.n_tokens() > 0 {
        a.n_tokens() as u64
    } else {
        a.sections.values().sum()
    };
    if total == 0 {
        0.0
    } else {
        tokens as f64 / total as f64
    }
}

pub fn section_proportions(pairs: &[Pair], sections: &[String], alpha: f64) -> Result<Vec<StatRow>> {
    require_pairs(pairs)?;
    let mut rows = Vec::with_capacity(sections.len());
    for s in sections {
        let xs: Vec<f64> = pairs.iter().map(|(t, _)| section_proportion(t, s)).collect();
        let ys: Vec<f64> = pairs.iter().map(|(_, c)| section_proportion(c, s)).collect();
        rows.push(paired_row(s, &xs, &ys)?);
    }
    correct_stats(&mut rows, alpha)?;
    Ok(rows)
}

/// Top-k log-odds words per side between two article groups.
pub fn word_table_groups(targets: &[&Article], comparisons: &[&Article], k: usize, prior_scale: f64) -> Result<WordTable> {
    let ct = token_counts(targets.iter().copied());
    let cc = token_counts(comparisons.iter().copied());
    let plo = polar_log_odds(&ct, &cc, prior_scale, k)?;
    Ok(WordTable {
        target: plo.top_target(k).into_iter().cloned().collect(),
        comparison: plo.top_comparison(k).into_iter().cloned().collect(),
        n_target_tokens: ct.values().sum(),
        n_comparison_tokens: cc.values().sum(),
    })
}

/// Word table over paired texts; a reused comparison counts once per pair.
pub fn word_table(pairs: &[Pair], k: usize, prior_scale: f64) -> Result<WordTable> {
    let (t, c): (Vec<&Article>, Vec<&Article>) = pairs.iter().copied().unzip();
    word_table_groups(&t, &c, k, prior_scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub group: String,
    pub comparison: String,
    pub method: Method,
    pub n_targets: usize,
    pub n_pool: usize,
    pub n_pairs: usize,
    pub n_discarded: usize,
    pub rows: Vec<StatRow>,
    pub sections: Vec<StatRow>,
    pub availability: Vec<AvailabilityRow>,
    pub language_lengths: Vec<LengthRow>,
    pub word_table: WordTable,
    pub unmatched_rows: Option<Vec<StatRow>>,
    pub unmatched_word_table: Option<WordTable>,
}

impl AnalysisReport {
    pub fn row(&self, metric: &str) -> Option<&StatRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn availability_of(&self, language: &str) -> Option<&AvailabilityRow> {
        self.availability.iter().find(|r| r.language == language)
    }

    /// CSV tables named `<group>__<pool>__<table>.csv` under `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let stem = format!("{}__{}", file_slug(&self.group), file_slug(&self.comparison));
        let mut emit = |table: &str, body: Vec<u8>| -> Result<()> {
            let path = dir.join(format!("{stem}__{table}.csv"));
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        let io = |e: std::io::Error| Error::io(dir, e);
        emit("statistics", stat_csv(&self.rows).map_err(io)?)?;
        emit("sections", stat_csv(&self.sections).map_err(io)?)?;
        emit("languages", availability_csv(&self.availability).map_err(io)?)?;
        emit("language_lengths", length_csv(&self.language_lengths).map_err(io)?)?;
        emit("words", words_csv(&self.word_table).map_err(io)?)?;
        if let Some(rows) = &self.unmatched_rows {
            emit("unmatched_statistics", stat_csv(rows).map_err(io)?)?;
        }
        if let Some(w) = &self.unmatched_word_table {
            emit("unmatched_words", words_csv(w).map_err(io)?)?;
        }
        Ok(written)
    }
}

pub fn file_slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn stat_csv(rows: &[StatRow]) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "metric,target_mean,comparison_mean,statistic,df,p_value,corrected_p,significant,n")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.metric),
            r.target_mean,
            r.comparison_mean,
            r.test.statistic,
            opt(r.test.df),
            r.test.p_value,
            r.corrected_p,
            r.significant,
            r.test.n
        )?;
    }
    Ok(out)
}

fn availability_csv(rows: &[AvailabilityRow]) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(
        out,
        "language,n_pairs,target_rate,comparison_rate,target_only,comparison_only,statistic,p_value,method,corrected_p,significant,more_available"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.language),
            r.n_pairs,
            r.target_rate,
            r.comparison_rate,
            r.target_only,
            r.comparison_only,
            r.test.statistic,
            r.test.p_value,
            serde_json::to_value(r.test.method).expect("method serializes").as_str().unwrap_or(""),
            r.corrected_p,
            r.significant,
            serde_json::to_value(r.more_available).expect("direction serializes").as_str().unwrap_or("")
        )?;
    }
    Ok(out)
}

fn length_csv(rows: &[LengthRow]) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "language,n_both,target_mean,comparison_mean,statistic,p_value,corrected_p,significant")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&r.language),
            r.n_both,
            opt(r.target_mean),
            opt(r.comparison_mean),
            opt(r.test.as_ref().map(|t| t.statistic)),
            opt(r.test.as_ref().map(|t| t.p_value)),
            opt(r.corrected_p),
            r.significant
        )?;
    }
    Ok(out)
}

fn words_csv(w: &WordTable) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "side,rank,word,z,delta,count_target,count_comparison")?;
    for (side, words) in [("target", &w.target), ("comparison", &w.comparison)] {
        for (i, s) in words.iter().enumerate() {
            writeln!(
                out,
                "{side},{},{},{},{},{},{}",
                i + 1,
                csv_field(&s.word),
                s.z,
                s.delta,
                s.count_t,
                s.count_c
            )?;
        }
    }
    Ok(out)
}

/// Every analysis over the kept pairs of one match.
pub fn analyze_match(
    group: &str,
    comparison: &str,
    result: &MatchResult,
    targets: &Corpus,
    pool: &Corpus,
    cfg: &AnalysisConfig,
) -> Result<AnalysisReport> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let pairs = kept_pairs(result, targets, pool)?;
    let (unmatched_rows, unmatched_word_table) = if cfg.unmatched_baseline {
        let t: Vec<&Article> = targets.iter().collect();
        let c: Vec<&Article> = pool.iter().collect();
        (
            Some(unmatched_statistics(&t, &c, cfg.alpha)?),
            Some(word_table_groups(&t, &c, cfg.word_table_k, cfg.prior_scale)?),
        )
    } else {
        (None, None)
    };
    Ok(AnalysisReport {
        group: group.to_string(),
        comparison: comparison.to_string(),
        method: result.config.method,
        n_targets: targets.len(),
        n_pool: pool.len(),
        n_pairs: pairs.len(),
        n_discarded: result.n_discarded(),
        rows: group_statistics(&pairs, cfg.alpha)?,
        sections: section_proportions(&pairs, &cfg.sections, cfg.alpha)?,
        availability: language_availability(&pairs, cfg.alpha)?,
        language_lengths: per_language_lengths(&pairs, &cfg.languages, cfg.alpha)?,
        word_table: word_table(&pairs, cfg.word_table_k, cfg.prior_scale)?,
        unmatched_rows,
        unmatched_word_table,
    })
}

/// Match config for one pairing: pairing exclusions appended and, when
/// configured, the pivot set to the corpus mean category count.
pub fn pairing_match_config(
    corpus: &Corpus,
    pairing: &Pairing,
    match_cfg: &MatchConfig,
    cfg: &AnalysisConfig,
) -> Result<MatchConfig> {
    let mut m = match_cfg.clone();
    for e in &pairing.exclusions {
        if !m.excluded_category_patterns.contains(e) {
            m.excluded_category_patterns.push(e.clone());
        }
    }
    if cfg.pivot_from_corpus {
        m.pivot_slope.pivot = mean_category_count(corpus)?;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairingOutcome {
    pub report: AnalysisReport,
    pub matches: MatchResult,
}

/// Pool build, match, weak-match discarding and analysis for one
/// (target, pool) combination.
pub fn analyze_pairing(
    corpus: &Corpus,
    groups: &GroupConfig,
    assignment: &GroupAssignment,
    pairing: &Pairing,
    pool_name: &str,
    match_cfg: &MatchConfig,
    cfg: &AnalysisConfig,
) -> Result<PairingOutcome> {
    let rules = groups
        .pool(pool_name)
        .ok_or_else(|| Error::Config(vec![format!("unknown pool `{pool_name}`")]))?;
    let targets = group_corpus(corpus, assignment, &pairing.target)?;
    let pool = build_comparison_pool(corpus, rules, assignment, &pairing.target)?;
    let mcfg = pairing_match_config(corpus, pairing, match_cfg, cfg)?;
    let outcome = run_match(&targets, &pool, &mcfg)?;
    let report = analyze_match(&pairing.target, pool_name, &outcome.result, &targets, &pool, cfg)?;
    Ok(PairingOutcome {
        report,
        matches: outcome.result,
    })
}

/// One outcome per (pairing, pool), in configuration order.
pub fn run_analysis_tagged(
    corpus: &Corpus,
    groups: &GroupConfig,
    assignment: &GroupAssignment,
    match_cfg: &MatchConfig,
    cfg: &AnalysisConfig,
) -> Result<Vec<PairingOutcome>> {
    groups.validate()?;
    let jobs: Vec<(&Pairing, &str)> = groups
        .pairings
        .iter()
        .flat_map(|p| p.pools.iter().map(move |pool| (p, pool.as_str())))
        .collect();
    jobs.par_iter()
        .map(|(pairing, pool)| analyze_pairing(corpus, groups, assignment, pairing, pool, match_cfg, cfg))
        .collect()
}

/// Tag, then analyze every configured pairing.
pub fn run_analysis(
    groups: &GroupConfig,
    corpus: &Corpus,
    match_cfg: &MatchConfig,
    cfg: &AnalysisConfig,
) -> Result<Vec<AnalysisReport>> {
    groups.validate()?;
    let assignment = tag_by_rules(corpus, &groups.groups)?;
    Ok(run_analysis_tagged(corpus, groups, &assignment, match_cfg, cfg)?
        .into_iter()
        .map(|o| o.report)
        .collect())
}
