//! Match-quality battery: per-category SMD, category-count and text-length
//! SMD, polar log-odds, and topic-distribution KL divergence.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};
use crate::matchers::{canonical_sum, MatchResult};
use crate::text::{any_contains_ci, is_stopword};

/// Standardized difference of two proportions. Signed; a nonzero difference
/// with zero pooled sd yields a signed infinity.
pub fn smd_binary(p_t: f64, p_c: f64) -> f64 {
    let diff = p_t - p_c;
    let pooled = ((p_t * (1.0 - p_t) + p_c * (1.0 - p_c)) / 2.0).sqrt();
    if pooled == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / pooled
    }
}

fn csum(mut values: Vec<f64>) -> f64 {
    canonical_sum(&mut values)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = csum(xs.to_vec()) / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    (m, csum(sq) / (n - 1.0))
}

/// `(mean_t - mean_c) / sqrt((var_t + var_c) / 2)` with sample variances.
pub fn smd_continuous(xs_t: &[f64], xs_c: &[f64]) -> Result<f64> {
    if xs_t.len() < 2 || xs_c.len() < 2 {
        return Err(Error::data("continuous SMD needs at least two values per group"));
    }
    let (mt, vt) = mean_var(xs_t);
    let (mc, vc) = mean_var(xs_c);
    Ok(smd_from_moments(mt - mc, ((vt + vc) / 2.0).sqrt()))
}

fn smd_from_moments(diff: f64, pooled: f64) -> f64 {
    if pooled == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / pooled
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmdReport {
    pub avg_smd: f64,
    pub pct_smd_gt_01: f64,
    /// Categories whose SMD is infinite; counted in the percentage but not
    /// in the average.
    pub n_infinite_smd: usize,
    #[serde(with = "float_map")]
    pub per_category_smd: BTreeMap<String, f64>,
}

fn category_counts<'a>(group: &[&'a Article], exclusions: &[String]) -> HashMap<&'a str, usize> {
    let mut counts = HashMap::new();
    for a in group {
        for c in &a.categories {
            if !any_contains_ci(c, exclusions) {
                *counts.entry(c.as_str()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Absolute per-category SMD over the union of both groups' categories.
/// Groups are lists of articles; a comparison matched twice appears twice.
pub fn smd_report(targets: &[&Article], comparisons: &[&Article], exclusions: &[String]) -> Result<SmdReport> {
    if targets.is_empty() || comparisons.is_empty() {
        return Err(Error::EmptyCorpus("SMD needs non-empty groups"));
    }
    let ct = category_counts(targets, exclusions);
    let cc = category_counts(comparisons, exclusions);
    let mut universe: Vec<&str> = ct.keys().chain(cc.keys()).copied().collect();
    universe.sort_unstable();
    universe.dedup();
    if universe.is_empty() {
        return Err(Error::data("SMD category universe is empty after exclusions"));
    }
    let (nt, nc) = (targets.len() as f64, comparisons.len() as f64);
    let mut per_category = BTreeMap::new();
    let mut finite = Vec::with_capacity(universe.len());
    let mut n_infinite = 0;
    let mut over = 0;
    for cat in universe {
        let pt = ct.get(cat).copied().unwrap_or(0) as f64 / nt;
        let pc = cc.get(cat).copied().unwrap_or(0) as f64 / nc;
        let smd = smd_binary(pt, pc).abs();
        if smd.is_finite() {
            finite.push(smd);
        } else {
            n_infinite += 1;
        }
        if smd > 0.1 {
            over += 1;
        }
        per_category.insert(cat.to_string(), smd);
    }
    let n = per_category.len();
    let avg = if finite.is_empty() {
        0.0
    } else {
        let k = finite.len() as f64;
        csum(finite) / k
    };
    Ok(SmdReport {
        avg_smd: avg,
        pct_smd_gt_01: 100.0 * over as f64 / n as f64,
        n_infinite_smd: n_infinite,
        per_category_smd: per_category,
    })
}

/// `category,smd` rows sorted by descending SMD, then category.
pub fn write_smd_csv<W: Write>(report: &SmdReport, out: &mut W) -> std::io::Result<()> {
    let mut rows: Vec<(&String, &f64)> = report.per_category_smd.iter().collect();
    rows.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
    writeln!(out, "category,smd")?;
    for (cat, smd) in rows {
        writeln!(out, "{},{}", csv_field(cat), smd)?;
    }
    Ok(())
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Case-folded token counts over a group of articles.
pub fn token_counts<'a, I>(articles: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a Article>,
{
    let mut counts = BTreeMap::new();
    for a in articles {
        for t in &a.tokens {
            *counts.entry(t.to_lowercase()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: String,
    pub count_t: u64,
    pub count_c: u64,
    pub delta: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PloResult {
    /// Every vocabulary word, ordered by descending |z| then word.
    pub words: Vec<WordScore>,
    pub plo_mean: f64,
    pub plo_sd: f64,
}

impl PloResult {
    pub fn z(&self, word: &str) -> Option<f64> {
        self.words.iter().find(|w| w.word == word).map(|w| w.z)
    }

    /// Most target-associated words (largest positive z).
    pub fn top_target(&self, k: usize) -> Vec<&WordScore> {
        let mut v: Vec<&WordScore> = self.words.iter().filter(|w| w.z > 0.0).collect();
        v.sort_by(|a, b| b.z.total_cmp(&a.z).then(a.word.cmp(&b.word)));
        v.truncate(k);
        v
    }

    /// Most comparison-associated words (most negative z).
    pub fn top_comparison(&self, k: usize) -> Vec<&WordScore> {
        let mut v: Vec<&WordScore> = self.words.iter().filter(|w| w.z < 0.0).collect();
        v.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.word.cmp(&b.word)));
        v.truncate(k);
        v
    }
}

pub const DEFAULT_PRIOR_SCALE: f64 = 1000.0;
pub const DEFAULT_TOP_WORDS: usize = 200;

/// Log-odds with an informative Dirichlet prior proportional to combined
/// word frequency, scaled to total mass `prior_scale`. Summary statistics are
/// the mean and population sd of |z| over the `top_k` most polar words.
pub fn polar_log_odds(
    counts_t: &BTreeMap<String, u64>,
    counts_c: &BTreeMap<String, u64>,
    prior_scale: f64,
    top_k: usize,
) -> Result<PloResult> {
    let n_t: u64 = counts_t.values().sum();
    let n_c: u64 = counts_c.values().sum();
    if n_t == 0 || n_c == 0 {
        return Err(Error::EmptyCorpus("log-odds needs tokens in both corpora"));
    }
    if !(prior_scale > 0.0 && prior_scale.is_finite()) {
        return Err(Error::Config(vec![format!("prior_scale must be positive, got {prior_scale}")]));
    }
    let total = (n_t + n_c) as f64;
    let a0 = prior_scale;
    let mut vocab: Vec<&String> = counts_t.keys().chain(counts_c.keys()).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let mut words: Vec<WordScore> = vocab
        .into_iter()
        .map(|w| {
            let yt = counts_t.get(w).copied().unwrap_or(0);
            let yc = counts_c.get(w).copied().unwrap_or(0);
            let aw = prior_scale * (yt + yc) as f64 / total;
            let (ft, fc) = (yt as f64 + aw, yc as f64 + aw);
            let lt = (ft / (n_t as f64 + a0 - ft)).ln();
            let lc = (fc / (n_c as f64 + a0 - fc)).ln();
            let delta = lt - lc;
            let z = delta / (1.0 / ft + 1.0 / fc).sqrt();
            WordScore {
                word: w.clone(),
                count_t: yt,
                count_c: yc,
                delta,
                z,
            }
        })
        .collect();
    words.sort_by(|a, b| b.z.abs().total_cmp(&a.z.abs()).then(a.word.cmp(&b.word)));
    let top: Vec<f64> = words.iter().take(top_k.max(1)).map(|w| w.z.abs()).collect();
    let k = top.len() as f64;
    let mean = csum(top.clone()) / k;
    let sd = (csum(top.iter().map(|z| (z - mean).powi(2)).collect()) / k).sqrt();
    Ok(PloResult {
        words,
        plo_mean: mean,
        plo_sd: sd,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub n_topics: usize,
    /// Document-topic prior; `None` means `50 / n_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            n_topics: 100,
            alpha: None,
            beta: 0.01,
            iterations: 200,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.n_topics as f64)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.n_topics == 0 {
            problems.push("lda.n_topics must be at least 1".to_string());
        }
        if !(self.alpha() > 0.0 && self.alpha().is_finite()) {
            problems.push("lda.alpha must be positive".to_string());
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            problems.push("lda.beta must be positive".to_string());
        }
        problems
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub n_topics: usize,
    pub vocabulary: Vec<String>,
    pub topic_word: Vec<Vec<f64>>,
    pub doc_topic: BTreeMap<String, Vec<f64>>,
    pub seed: u64,
    pub iterations: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// Collapsed Gibbs sampling over lowercased, stopword-free tokens.
pub fn train_lda(corpus: &Corpus, cfg: &LdaConfig) -> Result<LdaModel> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("topic model needs documents"));
    }
    let mut vocab_index: BTreeMap<String, u32> = BTreeMap::new();
    for a in corpus.iter() {
        for t in &a.tokens {
            let w = t.to_lowercase();
            if !is_stopword(&w) {
                vocab_index.entry(w).or_insert(0);
            }
        }
    }
    if vocab_index.is_empty() {
        return Err(Error::data("topic model vocabulary is empty"));
    }
    for (i, v) in vocab_index.values_mut().enumerate() {
        *v = i as u32;
    }
    let docs: Vec<Vec<u32>> = corpus
        .iter()
        .map(|a| {
            a.tokens
                .iter()
                .filter_map(|t| vocab_index.get(&t.to_lowercase()).copied())
                .collect()
        })
        .collect();

    let k = cfg.n_topics;
    let v = vocab_index.len();
    let alpha = cfg.alpha();
    let beta = cfg.beta;
    let vbeta = v as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ndk = vec![0u32; docs.len() * k];
    let mut nwk = vec![0u32; v * k];
    let mut nk = vec![0u32; k];
    let mut z: Vec<Vec<u32>> = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let zs: Vec<u32> = doc
            .iter()
            .map(|&w| {
                let t = rng.random_range(0..k);
                ndk[d * k + t] += 1;
                nwk[w as usize * k + t] += 1;
                nk[t] += 1;
                t as u32
            })
            .collect();
        z.push(zs);
    }
    let mut weights = vec![0.0f64; k];
    for _ in 0..cfg.iterations {
        for (d, doc) in docs.iter().enumerate() {
            let nd = &mut ndk[d * k..(d + 1) * k];
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = z[d][i] as usize;
                let nw = &mut nwk[w * k..(w + 1) * k];
                nd[old] -= 1;
                nw[old] -= 1;
                nk[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (nd[t] as f64 + alpha) * (nw[t] as f64 + beta) / (nk[t] as f64 + vbeta);
                    weights[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = weights.partition_point(|&c| c <= u).min(k - 1);
                nd[new] += 1;
                nw[new] += 1;
                nk[new] += 1;
                z[d][i] = new as u32;
            }
        }
    }

    let topic_word = (0..k)
        .map(|t| {
            let denom = nk[t] as f64 + vbeta;
            (0..v).map(|w| (nwk[w * k + t] as f64 + beta) / denom).collect()
        })
        .collect();
    let doc_topic = corpus
        .iter()
        .zip(&docs)
        .enumerate()
        .map(|(d, (a, doc))| {
            let denom = doc.len() as f64 + k as f64 * alpha;
            let row = (0..k).map(|t| (ndk[d * k + t] as f64 + alpha) / denom).collect();
            (a.id.clone(), row)
        })
        .collect();
    Ok(LdaModel {
        n_topics: k,
        vocabulary: vocab_index.into_keys().collect(),
        topic_word,
        doc_topic,
        seed: cfg.seed,
        iterations: cfg.iterations,
        alpha,
        beta,
    })
}

/// `sum p ln(p / q)` in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let terms: Vec<f64> = p
        .iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .collect();
    csum(terms).max(0.0)
}

pub const TOPIC_SMOOTHING: f64 = 1e-3;

fn mean_topic_vector(model: &LdaModel, ids: &[&str]) -> Result<Vec<f64>> {
    if ids.is_empty() {
        return Err(Error::EmptyCorpus("topic KL needs non-empty groups"));
    }
    let rows = ids
        .iter()
        .map(|id| {
            model
                .doc_topic
                .get(*id)
                .ok_or_else(|| Error::data(format!("no topic distribution for `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let smoothed: Vec<f64> = (0..model.n_topics)
        .map(|t| csum(rows.iter().map(|r| r[t]).collect()) / n + TOPIC_SMOOTHING)
        .collect();
    let z = csum(smoothed.clone());
    Ok(smoothed.into_iter().map(|x| x / z).collect())
}

/// KL between smoothed mean topic vectors, in both directions.
pub fn topic_kl(model: &LdaModel, target_ids: &[&str], comparison_ids: &[&str]) -> Result<(f64, f64)> {
    let p = mean_topic_vector(model, target_ids)?;
    let q = mean_topic_vector(model, comparison_ids)?;
    Ok((kl_divergence(&p, &q), kl_divergence(&q, &p)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub prior_scale: f64,
    pub top_words: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            prior_scale: DEFAULT_PRIOR_SCALE,
            top_words: DEFAULT_TOP_WORDS,
        }
    }
}

/// Category-count and text-length SMDs are signed comparison minus target, so
/// a positive value means the comparison group has more of the quantity.
/// KL fields are absent when no topic model was supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub avg_smd: f64,
    pub pct_smd_gt_01: f64,
    pub n_infinite_smd: usize,
    #[serde(with = "float_scalar")]
    pub cat_count_smd: f64,
    #[serde(with = "float_scalar")]
    pub text_len_smd: f64,
    pub plo_mean: f64,
    pub plo_sd: f64,
    pub kl_tc: Option<f64>,
    pub kl_ct: Option<f64>,
    pub n_pairs: usize,
    #[serde(with = "float_map")]
    pub per_category_smd: BTreeMap<String, f64>,
}

/// Run the full battery on two article groups.
pub fn evaluate_groups(
    targets: &[&Article],
    comparisons: &[&Article],
    exclusions: &[String],
    opts: &EvalOptions,
    lda: Option<&LdaModel>,
) -> Result<EvaluationReport> {
    let smd = smd_report(targets, comparisons, exclusions)?;
    let n_cats = |a: &Article| {
        a.categories
            .iter()
            .filter(|c| !any_contains_ci(c, exclusions))
            .count() as f64
    };
    let cats_t: Vec<f64> = targets.iter().map(|a| n_cats(a)).collect();
    let cats_c: Vec<f64> = comparisons.iter().map(|a| n_cats(a)).collect();
    let len_t: Vec<f64> = targets.iter().map(|a| a.n_tokens() as f64).collect();
    let len_c: Vec<f64> = comparisons.iter().map(|a| a.n_tokens() as f64).collect();
    let plo = polar_log_odds(
        &token_counts(targets.iter().copied()),
        &token_counts(comparisons.iter().copied()),
        opts.prior_scale,
        opts.top_words,
    )?;
    let (kl_tc, kl_ct) = match lda {
        Some(model) => {
            let ti: Vec<&str> = targets.iter().map(|a| a.id.as_str()).collect();
            let ci: Vec<&str> = comparisons.iter().map(|a| a.id.as_str()).collect();
            let (a, b) = topic_kl(model, &ti, &ci)?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    Ok(EvaluationReport {
        avg_smd: smd.avg_smd,
        pct_smd_gt_01: smd.pct_smd_gt_01,
        n_infinite_smd: smd.n_infinite_smd,
        cat_count_smd: smd_continuous(&cats_c, &cats_t)?,
        text_len_smd: smd_continuous(&len_c, &len_t)?,
        plo_mean: plo.plo_mean,
        plo_sd: plo.plo_sd,
        kl_tc,
        kl_ct,
        n_pairs: comparisons.len(),
        per_category_smd: smd.per_category_smd,
    })
}

/// Matched groups of a result: every pair with a comparison, or only the
/// pairs that survived weak-match discarding.
pub fn matched_groups<'a>(
    result: &MatchResult,
    targets: &'a Corpus,
    candidates: &'a Corpus,
    kept_only: bool,
) -> Result<(Vec<&'a Article>, Vec<&'a Article>)> {
    let mut t = Vec::new();
    let mut c = Vec::new();
    let pairs: Box<dyn Iterator<Item = (&str, &str)>> = if kept_only {
        Box::new(result.kept())
    } else {
        Box::new(result.matched())
    };
    for (tid, cid) in pairs {
        let ta = targets
            .get(tid)
            .ok_or_else(|| Error::data(format!("target `{tid}` not in corpus")))?;
        let ca = candidates
            .get(cid)
            .ok_or_else(|| Error::data(format!("comparison `{cid}` not in corpus")))?;
        t.push(ta);
        c.push(ca);
    }
    Ok((t, c))
}

pub fn evaluate_match(
    result: &MatchResult,
    targets: &Corpus,
    candidates: &Corpus,
    kept_only: bool,
    opts: &EvalOptions,
    lda: Option<&LdaModel>,
) -> Result<EvaluationReport> {
    let (t, c) = matched_groups(result, targets, candidates, kept_only)?;
    evaluate_groups(&t, &c, &result.config.excluded_category_patterns, opts, lda)
}

pub fn save_report(report: &EvaluationReport, path: &Path, run: Option<&serde_json::Value>) -> Result<()> {
    let mut value = serde_json::to_value(report).expect("report serializes");
    if let (Some(run), Some(obj)) = (run, value.as_object_mut()) {
        obj.insert("run".into(), run.clone());
    }
    let text = serde_json::to_string_pretty(&value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Non-finite floats as the strings "inf", "-inf", "nan"; JSON numbers
/// otherwise.
pub(crate) mod float_scalar {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Repr {
        Num(f64),
        Text(String),
    }

    pub(crate) fn to_repr(x: f64) -> Repr {
        if x.is_finite() {
            Repr::Num(x)
        } else if x.is_nan() {
            Repr::Text("nan".into())
        } else if x > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    pub(crate) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("invalid number `{other}`"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

pub(crate) mod float_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::float_scalar::{from_repr, to_repr, Repr};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(m.iter().map(|(k, v)| (k, to_repr(*v))))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        BTreeMap::<String, Repr>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| from_repr(v).map(|x| (k, x)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn art(id: &str, cats: &[&str], n_tokens: usize) -> Article {
        Article::new(id)
            .with_categories(cats.iter().copied())
            .with_tokens((0..n_tokens).map(|i| format!("w{}", i % 7)))
    }

    #[test]
    fn smd_binary_examples() {
        assert_eq!(smd_binary(0.5, 0.5), 0.0);
        assert!((smd_binary(0.6, 0.4) - 0.2 / 0.24f64.sqrt()).abs() < 1e-15);
        assert!((smd_binary(0.6, 0.4) - 0.4082).abs() < 1e-4);
        assert_eq!(smd_binary(0.0, 0.0), 0.0);
        assert_eq!(smd_binary(1.0, 1.0), 0.0);
        assert_eq!(smd_binary(1.0, 0.0), f64::INFINITY);
        assert_eq!(smd_binary(0.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn smd_continuous_examples() {
        assert_eq!(smd_continuous(&[3.0, 5.0, 9.0], &[3.0, 5.0, 9.0]).unwrap(), 0.0);
        let v = smd_continuous(&[10.0, 12.0], &[8.0, 10.0]).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(smd_continuous(&[12.0, 10.0], &[10.0, 8.0]).unwrap(), v);
        assert_eq!(smd_continuous(&[2.0, 2.0], &[1.0, 1.0]).unwrap(), f64::INFINITY);
        assert!(smd_continuous(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn smd_report_cases() {
        let a = art("a", &["x", "y"], 3);
        let b = art("b", &["y", "z"], 3);
        let r = smd_report(&[&a, &b], &[&a, &b], &[]).unwrap();
        assert_eq!((r.avg_smd, r.pct_smd_gt_01), (0.0, 0.0));

        // "only" is in every target and no comparison.
        let t1 = art("t1", &["only", "x"], 3);
        let t2 = art("t2", &["only", "y"], 3);
        let c1 = art("c1", &["x"], 3);
        let c2 = art("c2", &["y"], 3);
        let r = smd_report(&[&t1, &t2], &[&c1, &c2], &[]).unwrap();
        assert_eq!(r.per_category_smd["only"], f64::INFINITY);
        assert_eq!(r.n_infinite_smd, 1);
        assert_eq!(r.avg_smd, 0.0);
        assert!((r.pct_smd_gt_01 - 100.0 / 3.0).abs() < 1e-12);
        let r = smd_report(&[&t1, &t2], &[&c1, &c2], &["ONLY".to_string()]).unwrap();
        assert_eq!(r.n_infinite_smd, 0);
        assert!(!r.per_category_smd.contains_key("only"));
    }

    #[test]
    fn pct_counts_strictly_over_threshold() {
        // 10 categories; c0..c2 at 0.6/0.4 (SMD 0.41), the rest balanced.
        let mut t = Vec::new();
        let mut c = Vec::new();
        for i in 0..10 {
            let mut tc: Vec<String> = (3..10).map(|k| format!("c{k}")).collect();
            let mut cc = tc.clone();
            for k in 0..3 {
                if i < 6 {
                    tc.push(format!("c{k}"));
                }
                if i < 4 {
                    cc.push(format!("c{k}"));
                }
            }
            t.push(Article::new(format!("t{i}")).with_categories(tc));
            c.push(Article::new(format!("k{i}")).with_categories(cc));
        }
        let tr: Vec<&Article> = t.iter().collect();
        let cr: Vec<&Article> = c.iter().collect();
        let r = smd_report(&tr, &cr, &[]).unwrap();
        assert_eq!(r.per_category_smd.len(), 10);
        assert_eq!(r.pct_smd_gt_01, 30.0);
    }

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(w, n)| (w.to_string(), *n)).collect()
    }

    #[test]
    fn plo_two_word_fixture() {
        let t = counts(&[("a", 9), ("b", 1)]);
        let c = counts(&[("a", 1), ("b", 9)]);
        let r = polar_log_odds(&t, &c, 1.0, 200).unwrap();
        // alpha_a = alpha_b = 0.5, alpha_0 = 1, n_t = n_c = 10.
        let za = {
            let (ft, fc) = (9.5f64, 1.5f64);
            let d = (ft / (11.0 - ft)).ln() - (fc / (11.0 - fc)).ln();
            d / (1.0 / ft + 1.0 / fc).sqrt()
        };
        assert!((r.z("a").unwrap() - za).abs() < 1e-6);
        assert!((r.z("b").unwrap() + za).abs() < 1e-6);
        assert!((r.plo_mean - za).abs() < 1e-6);
        assert!(r.plo_sd.abs() < 1e-12);
    }

    #[test]
    fn plo_identical_and_swapped() {
        let t = counts(&[("a", 3), ("b", 5), ("c", 1)]);
        let c = counts(&[("a", 7), ("b", 2), ("d", 4)]);
        let same = polar_log_odds(&t, &t, 1000.0, 200).unwrap();
        assert!(same.words.iter().all(|w| w.delta == 0.0));
        let fw = polar_log_odds(&t, &c, 1000.0, 200).unwrap();
        let bw = polar_log_odds(&c, &t, 1000.0, 200).unwrap();
        for w in &fw.words {
            assert!((w.z + bw.z(&w.word).unwrap()).abs() < 1e-12);
        }
        assert!(polar_log_odds(&BTreeMap::new(), &c, 1000.0, 200).is_err());
    }

    #[test]
    fn plo_balanced_word_barely_moves_scores() {
        let t = counts(&[("a", 30_000), ("b", 10_000), ("c", 5_000)]);
        let c = counts(&[("a", 12_000), ("b", 25_000), ("c", 6_000)]);
        let base = polar_log_odds(&t, &c, 1000.0, 200).unwrap();
        let mut t2 = t.clone();
        let mut c2 = c.clone();
        t2.insert("neutral".into(), 5);
        c2.insert("neutral".into(), 5);
        let more = polar_log_odds(&t2, &c2, 1000.0, 200).unwrap();
        for w in ["a", "b", "c"] {
            assert!((base.z(w).unwrap() - more.z(w).unwrap()).abs() < 1e-3 * base.z(w).unwrap().abs().max(1.0));
        }
    }

    #[test]
    fn kl_closed_form() {
        let v = kl_divergence(&[0.5, 0.5], &[0.9, 0.1]);
        let expected = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.5108).abs() < 1e-4);
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    }

    fn two_vocab_corpus() -> Corpus {
        let mut docs = Vec::new();
        for i in 0..20 {
            let words: Vec<String> = if i % 2 == 0 {
                (0..400).map(|j| format!("alpha{}", j % 5)).collect()
            } else {
                (0..400).map(|j| format!("omega{}", j % 5)).collect()
            };
            docs.push(Article::new(format!("d{i:02}")).with_tokens(words));
        }
        Corpus::new(docs).unwrap()
    }

    #[test]
    fn lda_separates_disjoint_vocabularies() {
        let corpus = two_vocab_corpus();
        let cfg = LdaConfig {
            n_topics: 2,
            seed: 3,
            ..Default::default()
        };
        let m = train_lda(&corpus, &cfg).unwrap();
        for row in m.doc_topic.values() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().cloned().fold(0.0, f64::max) >= 0.9, "{row:?}");
        }
        for row in &m.topic_word {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let again = train_lda(&corpus, &cfg).unwrap();
        assert_eq!(m.topic_word, again.topic_word);
    }

    #[test]
    fn lda_rejects_stopword_only_corpus() {
        let c = Corpus::new(vec![Article::new("a").with_tokens(["the", "and", "of"])]).unwrap();
        assert!(train_lda(&c, &LdaConfig::default()).is_err());
    }

    #[test]
    fn topic_kl_self_is_zero() {
        let corpus = two_vocab_corpus();
        let m = train_lda(&corpus, &LdaConfig { n_topics: 4, iterations: 20, ..Default::default() }).unwrap();
        let ids: Vec<&str> = corpus.ids().collect();
        assert_eq!(topic_kl(&m, &ids, &ids).unwrap(), (0.0, 0.0));
        let mut rev = ids.clone();
        rev.reverse();
        assert_eq!(topic_kl(&m, &ids, &rev).unwrap(), (0.0, 0.0));
        assert!(topic_kl(&m, &[], &ids).is_err());
        assert!(topic_kl(&m, &["missing"], &ids).is_err());
    }

    #[test]
    fn self_match_battery_is_zero() {
        let arts: Vec<Article> = (0..6)
            .map(|i| art(&format!("a{i}"), &["x", if i % 2 == 0 { "y" } else { "z" }], 5 + i))
            .collect();
        let refs: Vec<&Article> = arts.iter().collect();
        let r = evaluate_groups(&refs, &refs, &[], &EvalOptions::default(), None).unwrap();
        assert_eq!(r.avg_smd, 0.0);
        assert_eq!(r.pct_smd_gt_01, 0.0);
        assert_eq!(r.cat_count_smd, 0.0);
        assert_eq!(r.text_len_smd, 0.0);
        assert_eq!((r.plo_mean, r.plo_sd), (0.0, 0.0));
        assert_eq!(r.n_pairs, 6);
    }

    #[test]
    fn report_json_round_trip_with_infinity() {
        let t1 = art("t1", &["only", "x"], 3);
        let t2 = art("t2", &["only", "x"], 4);
        let c1 = art("c1", &["x"], 3);
        let c2 = art("c2", &["x"], 5);
        let r = evaluate_groups(&[&t1, &t2], &[&c1, &c2], &[], &EvalOptions::default(), None).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"only\":\"inf\""));
        let back: EvaluationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn smd_csv_sorted_descending() {
        let mut per = BTreeMap::new();
        per.insert("a".to_string(), 0.1);
        per.insert("b,c".to_string(), 0.5);
        per.insert("d".to_string(), f64::INFINITY);
        let r = SmdReport {
            avg_smd: 0.3,
            pct_smd_gt_01: 200.0 / 3.0,
            n_infinite_smd: 1,
            per_category_smd: per,
        };
        let mut out = Vec::new();
        write_smd_csv(&r, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "category,smd\nd,inf\n\"b,c\",0.5\na,0.1\n");
    }

    proptest! {
        #[test]
        fn smd_binary_antisymmetric(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            prop_assert_eq!(smd_binary(p, q), -smd_binary(q, p));
        }

        #[test]
        fn kl_nonnegative(raw_p in proptest::collection::vec(0.01f64..1.0, 2..10), seed in 0u64..1000) {
            let k = raw_p.len();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw_q: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
            let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
            prop_assert!(kl_divergence(&norm(&raw_p), &norm(&raw_q)) >= 0.0);
        }

        #[test]
        fn smd_report_symmetric(bits in proptest::collection::vec(0u8..16, 4..20), split in 2usize..18) {
            let arts: Vec<Article> = bits.iter().enumerate().map(|(i, b)| {
                let cats: Vec<String> = (0..4).filter(|k| b & (1 << k) != 0).map(|k| format!("c{k}")).chain(["base".to_string()]).collect();
                Article::new(format!("a{i}")).with_categories(cats)
            }).collect();
            let split = split.min(arts.len() - 1);
            let t: Vec<&Article> = arts[..split].iter().collect();
            let c: Vec<&Article> = arts[split..].iter().collect();
            let ab = smd_report(&t, &c, &[]).unwrap();
            let ba = smd_report(&c, &t, &[]).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }
}
