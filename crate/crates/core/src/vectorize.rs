//! Category IDF tables, TF-IDF category vectors and pivoted length normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};

/// Document frequencies and natural-log inverse document frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    df: BTreeMap<String, usize>,
    n_docs: usize,
    idf: BTreeMap<String, f64>,
}

impl IdfTable {
    /// Fit on the category sets of `docs`.
    pub fn fit<'a, I>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a BTreeSet<String>>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0;
        for cats in docs {
            n_docs += 1;
            for c in cats {
                *df.entry(c.clone()).or_default() += 1;
            }
        }
        if n_docs == 0 {
            return Err(Error::EmptyCorpus("cannot fit IDF on zero documents"));
        }
        let n = n_docs as f64;
        let idf = df
            .iter()
            .map(|(c, &d)| (c.clone(), (n / d as f64).ln()))
            .collect();
        Ok(IdfTable { df, n_docs, idf })
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Number of distinct categories seen while fitting.
    pub fn n_categories(&self) -> usize {
        self.df.len()
    }

    pub fn df(&self, category: &str) -> Option<usize> {
        self.df.get(category).copied()
    }

    /// IDF of `category`; categories never seen while fitting are treated as df = 1.
    pub fn idf(&self, category: &str) -> f64 {
        match self.idf.get(category) {
            Some(&v) => v,
            None => (self.n_docs as f64).ln(),
        }
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.df.keys().map(String::as_str)
    }

    /// Copy with every IDF multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> IdfTable {
        IdfTable {
            df: self.df.clone(),
            n_docs: self.n_docs,
            idf: self.idf.iter().map(|(c, v)| (c.clone(), v * factor)).collect(),
        }
    }
}

pub fn build_idf(corpus: &Corpus) -> Result<IdfTable> {
    IdfTable::fit(corpus.iter().map(|a| &a.categories))
}

/// Sparse category-weight vector. Zero weights are never stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: BTreeMap<String, f64>,
}

impl SparseVector {
    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (String, f64)>,
    {
        SparseVector {
            entries: entries.into_iter().filter(|(_, w)| *w != 0.0).collect(),
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().map(|(k, v)| v * large.get(k)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// TF-IDF category vector: each category of `a` weighted `idf / |CAT(a)|`.
pub fn tfidf_vector(a: &Article, idf: &IdfTable) -> Result<SparseVector> {
    tfidf_from_categories(&a.categories, idf)
        .ok_or_else(|| Error::data(format!("article `{}` has no categories", a.id)))
}

pub(crate) fn tfidf_from_categories(cats: &BTreeSet<String>, idf: &IdfTable) -> Option<SparseVector> {
    if cats.is_empty() {
        return None;
    }
    let tf = 1.0 / cats.len() as f64;
    Some(SparseVector::from_entries(
        cats.iter().map(|c| (c.clone(), tf * idf.idf(c))),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivotSlopeParams {
    pub pivot: f64,
    pub slope: f64,
}

impl Default for PivotSlopeParams {
    fn default() -> Self {
        PivotSlopeParams {
            pivot: 9.3,
            slope: 0.3,
        }
    }
}

impl PivotSlopeParams {
    pub fn new(pivot: f64, slope: f64) -> Result<Self> {
        let p = PivotSlopeParams { pivot, slope };
        p.validate().map_err(|m| Error::Config(vec![m]))?;
        Ok(p)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.pivot > 0.0 && self.pivot.is_finite()) {
            return Err(format!("pivot must be positive, got {}", self.pivot));
        }
        if !(0.0..=1.0).contains(&self.slope) {
            return Err(format!("slope must be in [0, 1], got {}", self.slope));
        }
        Ok(())
    }
}

/// `(1 - slope) * pivot + slope * n_categories`.
pub fn pivoted_norm(n_categories: usize, p: PivotSlopeParams) -> f64 {
    (1.0 - p.slope) * p.pivot + p.slope * n_categories as f64
}

/// Format with six significant digits, `%g` style.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // Exponent taken after rounding, so 9.999999 lands in the next decade.
    let sci = format!("{x:.5e}");
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let exp: i32 = e.parse().expect("exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed)
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Write every article's TF-IDF vector as tab-separated triples.
///
/// Articles whose vector is empty are written as a bare id line so that every
/// row is represented.
pub fn export_matrix(corpus: &Corpus, idf: &IdfTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_matrix(corpus, idf, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix<W: Write>(corpus: &Corpus, idf: &IdfTable, out: &mut W) -> std::io::Result<()> {
    let mut columns: BTreeSet<&str> = idf.categories().collect();
    for a in corpus.iter() {
        columns.extend(a.categories.iter().map(String::as_str));
    }
    writeln!(out, "#rows={} cols={}", corpus.len(), columns.len())?;
    for a in corpus.iter() {
        let v = tfidf_from_categories(&a.categories, idf).unwrap_or_default();
        if v.is_empty() {
            writeln!(out, "{}", a.id)?;
        }
        for (cat, w) in v.iter() {
            writeln!(out, "{}\t{}\t{}", a.id, cat, format_sig6(w))?;
        }
    }
    Ok(())
}

/// Parse a file written by [`export_matrix`] back into per-article vectors.
pub fn read_matrix(path: &Path) -> Result<Vec<(String, SparseVector)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if !line.starts_with("#rows=") {
                return Err(Error::MalformedRecord {
                    line: 1,
                    message: "missing `#rows=` header".into(),
                });
            }
            continue;
        }
        let mut parts = line.split('\t');
        let id = parts.next().unwrap_or_default().to_string();
        if rows.last().map(|r| &r.0) != Some(&id) {
            rows.push((id, Vec::new()));
        }
        match (parts.next(), parts.next()) {
            (Some(cat), Some(w)) => {
                let w: f64 = w.parse().map_err(|_| Error::MalformedRecord {
                    line: i + 1,
                    message: format!("bad weight `{w}`"),
                })?;
                rows.last_mut().expect("row pushed").1.push((cat.to_string(), w));
            }
            (None, None) => {}
            _ => {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    message: "expected id, category and weight".into(),
                })
            }
        }
    }
    Ok(rows
        .into_iter()
        .map(|(id, e)| (id, SparseVector::from_entries(e)))
        .collect())
}
