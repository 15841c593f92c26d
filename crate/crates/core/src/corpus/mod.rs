//! Document model, corpus ingestion and the corpus-level filtering heuristics.
//!
//! A corpus file holds one JSON object per line. Articles are kept sorted by
//! id; every greedy procedure downstream iterates in that order.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{contains_ci, tokenize};

pub use synthetic::{generate_demo, generate_synthetic, DemoSpec, PlantedCategory, SyntheticSpec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    #[serde(default)]
    pub categories: BTreeSet<String>,
    #[serde(default)]
    pub languages: BTreeSet<String>,
    #[serde(default)]
    pub lang_lengths: BTreeMap<String, u64>,
    #[serde(default)]
    pub edit_count: u64,
    #[serde(default)]
    pub age_months: f64,
    #[serde(default)]
    pub sections: BTreeMap<String, u64>,
    #[serde(default)]
    pub properties: BTreeMap<String, BTreeSet<String>>,
}

impl Article {
    pub fn new(id: impl Into<String>) -> Self {
        Article {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn with_categories<I, S>(mut self, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.categories = categories.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_tokens<I, S>(mut self, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tokens = tokens.into_iter().map(Into::into).collect();
        self
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn property(&self, key: &str) -> Option<&BTreeSet<String>> {
        self.properties.get(key)
    }

    /// Article length in the given language edition, if available there.
    pub fn length_in(&self, language: &str) -> Option<u64> {
        if !self.languages.contains(language) {
            return None;
        }
        self.lang_lengths.get(language).copied()
    }
}

/// Wire form of a corpus record. `text` is tokenized when `tokens` is absent.
#[derive(Debug, Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    categories: Vec<String>,
    #[serde(default)]
    languages: Vec<String>,
    #[serde(default)]
    lang_lengths: BTreeMap<String, u64>,
    #[serde(default)]
    edit_count: u64,
    #[serde(default)]
    age_months: f64,
    #[serde(default)]
    sections: BTreeMap<String, u64>,
    #[serde(default)]
    properties: BTreeMap<String, Vec<String>>,
}

impl Record {
    fn into_article(self) -> std::result::Result<Article, String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.categories.iter().any(|c| c.is_empty()) {
            return Err("empty category string".into());
        }
        if !(self.age_months.is_finite() && self.age_months >= 0.0) {
            return Err(format!("age_months must be non-negative, got {}", self.age_months));
        }
        let tokens = match (self.tokens, self.text) {
            (Some(tokens), _) => tokens,
            (None, Some(text)) => tokenize(&text),
            (None, None) => Vec::new(),
        };
        let languages: BTreeSet<String> = self.languages.into_iter().collect();
        if let Some(extra) = self.lang_lengths.keys().find(|k| !languages.contains(*k)) {
            return Err(format!("lang_lengths key `{extra}` not listed in languages"));
        }
        Ok(Article {
            id: self.id,
            title: self.title,
            tokens,
            categories: self.categories.into_iter().collect(),
            languages,
            lang_lengths: self.lang_lengths,
            edit_count: self.edit_count,
            age_months: self.age_months,
            sections: self.sections,
            properties: self
                .properties
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
        })
    }
}

/// An immutable collection of articles in ascending id order. Articles are
/// shared, so sub-corpora are cheap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    articles: Vec<Arc<Article>>,
    pub source_meta: BTreeMap<String, serde_json::Value>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(articles: Vec<Article>) -> Result<Self> {
        Corpus::from_shared(articles.into_iter().map(Arc::new).collect())
    }

    pub fn from_shared(mut articles: Vec<Arc<Article>>) -> Result<Self> {
        articles.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = articles.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }
        let index = articles
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();
        Ok(Corpus {
            articles,
            source_meta: BTreeMap::new(),
            index,
        })
    }

    pub fn empty() -> Self {
        Corpus::default()
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn articles(&self) -> &[Arc<Article>] {
        &self.articles
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Article> + Clone {
        self.articles.iter().map(|a| a.as_ref())
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.index.get(id).map(|&i| self.articles[i].as_ref())
    }

    pub fn get_shared(&self, id: &str) -> Option<&Arc<Article>> {
        self.index.get(id).map(|&i| &self.articles[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.articles.iter().map(|a| a.id.as_str())
    }

    pub fn to_articles(&self) -> Vec<Article> {
        self.iter().cloned().collect()
    }

    /// Sub-corpus of the articles accepted by `keep`, order preserved.
    pub fn filtered<F>(&self, mut keep: F) -> Corpus
    where
        F: FnMut(&Article) -> bool,
    {
        let articles: Vec<Arc<Article>> =
            self.articles.iter().filter(|a| keep(a)).cloned().collect();
        Corpus::from_shared(articles).expect("subset of a valid corpus")
    }

    pub fn subset<'a, I>(&self, ids: I) -> Corpus
    where
        I: IntoIterator<Item = &'a str>,
    {
        let wanted: BTreeSet<&str> = ids.into_iter().collect();
        self.filtered(|a| wanted.contains(a.id.as_str()))
    }

    /// Union of two corpora with disjoint ids.
    pub fn union(&self, other: &Corpus) -> Result<Corpus> {
        let mut articles = self.articles.clone();
        articles.extend(other.articles.iter().cloned());
        Corpus::from_shared(articles)
    }

    /// Write the corpus in the one-record-per-line format read by [`ingest`].
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for a in &self.articles {
            let line = serde_json::to_string(a.as_ref()).expect("article serializes");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterPolicy {
    pub min_categories: usize,
    pub min_tokens: usize,
    /// Case-insensitive substrings marking stub articles.
    pub stub_category_patterns: Vec<String>,
    /// Case-insensitive substrings of maintenance categories removed before counting.
    pub category_drop_patterns: Vec<String>,
    /// Language whose `lang_lengths` entry is pinned to the token count.
    pub home_language: String,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_categories: 2,
            min_tokens: 100,
            stub_category_patterns: vec!["stubs".into()],
            category_drop_patterns: vec!["Pages with".into()],
            home_language: "en".into(),
        }
    }
}

impl FilterPolicy {
    /// A policy that keeps every article unchanged.
    pub fn permissive() -> Self {
        FilterPolicy {
            min_categories: 0,
            min_tokens: 0,
            stub_category_patterns: Vec::new(),
            category_drop_patterns: Vec::new(),
            home_language: "en".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub read: usize,
    pub categories_removed: usize,
    pub dropped_min_categories: usize,
    pub dropped_min_tokens: usize,
    pub dropped_stub: usize,
    pub kept: usize,
}

/// Apply the filter in its fixed order: drop maintenance categories, then the
/// category minimum, then the token minimum, then the stub patterns.
pub fn apply_filter(articles: Vec<Article>, policy: &FilterPolicy) -> (Vec<Article>, FilterCounts) {
    let mut counts = FilterCounts {
        read: articles.len(),
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(articles.len());
    for mut a in articles {
        let before = a.categories.len();
        a.categories
            .retain(|c| !policy.category_drop_patterns.iter().any(|p| contains_ci(c, p)));
        counts.categories_removed += before - a.categories.len();

        if a.categories.len() < policy.min_categories {
            counts.dropped_min_categories += 1;
            continue;
        }
        if a.tokens.len() < policy.min_tokens {
            counts.dropped_min_tokens += 1;
            continue;
        }
        if a
            .categories
            .iter()
            .any(|c| policy.stub_category_patterns.iter().any(|p| contains_ci(c, p)))
        {
            counts.dropped_stub += 1;
            continue;
        }
        if a.languages.contains(&policy.home_language) {
            a.lang_lengths
                .insert(policy.home_language.clone(), a.tokens.len() as u64);
        }
        kept.push(a);
    }
    counts.kept = kept.len();
    (kept, counts)
}

/// Read a corpus file and apply `policy`.
pub fn ingest(path: &Path, policy: &FilterPolicy) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = ingest_reader(BufReader::new(file), policy).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    corpus
        .source_meta
        .insert("source".into(), path.display().to_string().into());
    Ok(corpus)
}

pub fn ingest_reader<R: BufRead>(reader: R, policy: &FilterPolicy) -> Result<Corpus> {
    let mut articles = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        let article = record.into_article().map_err(|message| Error::MalformedRecord {
            line: line_no,
            message,
        })?;
        if !seen.insert(article.id.clone()) {
            return Err(Error::DuplicateId(article.id));
        }
        articles.push(article);
    }
    let (kept, counts) = apply_filter(articles, policy);
    let mut corpus = Corpus::new(kept)?;
    corpus.source_meta.insert(
        "filter".into(),
        serde_json::to_value(counts).expect("counts serialize"),
    );
    Ok(corpus)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_articles: usize,
    pub mean_categories: f64,
    pub mean_tokens: f64,
}

pub fn corpus_summary(corpus: &Corpus) -> Result<CorpusSummary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("summary needs at least one article"));
    }
    let n = corpus.len() as f64;
    let cats: usize = corpus.iter().map(|a| a.categories.len()).sum();
    let toks: usize = corpus.iter().map(|a| a.tokens.len()).sum();
    Ok(CorpusSummary {
        n_articles: corpus.len(),
        mean_categories: cats as f64 / n,
        mean_tokens: toks as f64 / n,
    })
}
