//! Seeded synthetic corpora used as fixtures, demos and simulation inputs.
//!
//! Two generators live here. [`generate_synthetic`] produces anonymous
//! clustered corpora whose category counts and lengths share a latent
//! "richness" factor, with an optional planted category tied to one
//! occupation. [`generate_demo`] produces biography-like records with
//! readable category names, gender properties and a race-marked group, so the
//! tagging rules and the analysis pipeline have something to work on.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{Article, Corpus};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_articles: usize,
    pub n_categories: usize,
    pub categories_per_article: f64,
    pub tokens_per_article: f64,
    pub word_vocabulary: usize,
    /// Number of occupation clusters; categories and words are partitioned among them.
    pub occupations: usize,
    /// Probability that a category is drawn from the article's own occupation cluster.
    pub occupation_affinity: f64,
    /// Log-normal spread of the latent richness shared by category count and length.
    pub richness_sd: f64,
    /// Occupation o scales lengths by `1 + spread * (2 o / (O - 1) - 1)`.
    pub occupation_length_spread: f64,
    pub planted_category: Option<PlantedCategory>,
    /// The first entry is the home language and is present on every article.
    pub languages: Vec<String>,
    pub sections: Vec<String>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_articles: 1000,
            n_categories: 400,
            categories_per_article: 9.0,
            tokens_per_article: 200.0,
            word_vocabulary: 2000,
            occupations: 8,
            occupation_affinity: 0.8,
            richness_sd: 0.5,
            occupation_length_spread: 0.0,
            planted_category: None,
            languages: vec!["en".into(), "de".into(), "fr".into()],
            sections: vec!["Early life".into(), "Career".into(), "Personal life".into()],
        }
    }
}

/// A category assigned to `members` articles, a fraction `affinity` of them
/// drawn from occupation `occupation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedCategory {
    pub name: String,
    pub members: usize,
    pub occupation: usize,
    pub affinity: f64,
}

impl SyntheticSpec {
    /// 5,000 articles with a strong occupation/length confound and a
    /// 600-member category concentrated in the longest occupation.
    pub fn confounded(n_articles: usize) -> Self {
        SyntheticSpec {
            n_articles,
            n_categories: 600,
            categories_per_article: 9.0,
            tokens_per_article: 120.0,
            word_vocabulary: 3000,
            occupations: 10,
            occupation_affinity: 0.85,
            richness_sd: 0.6,
            occupation_length_spread: 0.6,
            planted_category: Some(PlantedCategory {
                name: "Planted target category".into(),
                members: 600,
                occupation: 9,
                affinity: 0.9,
            }),
            ..SyntheticSpec::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.categories_per_article > 0.0 && self.n_categories == 0 {
            problems.push("categories requested but category vocabulary is empty".to_string());
        }
        if !(self.categories_per_article >= 1.0) {
            problems.push(format!(
                "categories_per_article must be at least 1, got {}",
                self.categories_per_article
            ));
        }
        if self.tokens_per_article > 0.0 && self.word_vocabulary == 0 {
            problems.push("tokens requested but word vocabulary is empty".to_string());
        }
        if !(self.tokens_per_article >= 0.0) {
            problems.push("tokens_per_article must be non-negative".to_string());
        }
        if self.occupations == 0 || self.occupations > self.n_categories {
            problems.push(format!(
                "occupations must be in 1..={}, got {}",
                self.n_categories, self.occupations
            ));
        }
        if 2 * self.occupations > self.word_vocabulary.max(1) && self.tokens_per_article > 0.0 {
            problems.push("word vocabulary too small for the occupation clusters".to_string());
        }
        if !(0.0..=1.0).contains(&self.occupation_affinity) {
            problems.push("occupation_affinity must be in [0, 1]".to_string());
        }
        if !(self.richness_sd >= 0.0) {
            problems.push("richness_sd must be non-negative".to_string());
        }
        if !(0.0..1.0).contains(&self.occupation_length_spread) {
            problems.push("occupation_length_spread must be in [0, 1)".to_string());
        }
        if self.languages.is_empty() {
            problems.push("at least one (home) language is required".to_string());
        }
        if let Some(p) = &self.planted_category {
            if p.members > self.n_articles {
                problems.push(format!(
                    "planted category wants {} members but only {} articles exist",
                    p.members, self.n_articles
                ));
            }
            if p.occupation >= self.occupations {
                problems.push("planted category occupation out of range".to_string());
            }
            if !(0.0..=1.0).contains(&p.affinity) {
                problems.push("planted category affinity must be in [0, 1]".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Zipf-weighted sampler over a contiguous index range.
struct ZipfRange {
    start: usize,
    dist: WeightedIndex<f64>,
}

impl ZipfRange {
    fn new(start: usize, len: usize) -> Self {
        let weights: Vec<f64> = (0..len).map(|r| 1.0 / (r as f64 + 1.0)).collect();
        ZipfRange {
            start,
            dist: WeightedIndex::new(weights).expect("non-empty positive weights"),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.start + self.dist.sample(rng)
    }
}

fn cluster_bounds(total: usize, clusters: usize, k: usize) -> (usize, usize) {
    let start = total * k / clusters;
    let end = total * (k + 1) / clusters;
    (start, end.max(start + 1).min(total))
}

/// Deterministic for a fixed `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let occ_count = spec.occupations;
    let global_cats = ZipfRange::new(0, spec.n_categories);
    let cluster_cats: Vec<ZipfRange> = (0..occ_count)
        .map(|k| {
            let (s, e) = cluster_bounds(spec.n_categories, occ_count, k);
            ZipfRange::new(s, e - s)
        })
        .collect();
    let half_vocab = spec.word_vocabulary / 2;
    let (general_words, cluster_words) = if spec.word_vocabulary > 0 {
        let general = ZipfRange::new(0, half_vocab.max(1));
        let clusters: Vec<ZipfRange> = (0..occ_count)
            .map(|k| {
                let (s, e) = cluster_bounds(spec.word_vocabulary - half_vocab, occ_count, k);
                ZipfRange::new(half_vocab + s, e - s)
            })
            .collect();
        (Some(general), clusters)
    } else {
        (None, Vec::new())
    };

    // Normalize richness to unit mean.
    let richness_norm = (spec.richness_sd * spec.richness_sd / 2.0).exp();
    let mut articles = Vec::with_capacity(spec.n_articles);
    let mut occupation_of = Vec::with_capacity(spec.n_articles);
    for i in 0..spec.n_articles {
        let occ = rng.random_range(0..occ_count);
        let richness = (spec.richness_sd * normal.sample(&mut rng)).exp() / richness_norm;
        let length_mult = if occ_count > 1 {
            1.0 + spec.occupation_length_spread * (2.0 * occ as f64 / (occ_count - 1) as f64 - 1.0)
        } else {
            1.0
        };

        let extra_mean = (spec.categories_per_article - 1.0) * richness;
        let extra = if extra_mean > 0.0 {
            Poisson::new(extra_mean).expect("positive mean").sample(&mut rng) as usize
        } else {
            0
        };
        let n_cat = (1 + extra).min(spec.n_categories);
        let mut cats = BTreeSet::new();
        let mut attempts = 0;
        while cats.len() < n_cat && attempts < 50 * n_cat {
            attempts += 1;
            let idx = if rng.random::<f64>() < spec.occupation_affinity {
                cluster_cats[occ].sample(&mut rng)
            } else {
                global_cats.sample(&mut rng)
            };
            cats.insert(category_name(idx));
        }

        let noise = rng.random_range(0.8..1.2);
        let n_tokens = (spec.tokens_per_article * richness * length_mult * noise).round() as usize;
        let tokens: Vec<String> = match &general_words {
            Some(general) => (0..n_tokens)
                .map(|_| {
                    let w = if rng.random::<f64>() < 0.5 {
                        cluster_words[occ].sample(&mut rng)
                    } else {
                        general.sample(&mut rng)
                    };
                    format!("w{w}")
                })
                .collect(),
            None => Vec::new(),
        };

        let mut a = Article::new(format!("A{i:06}"));
        a.title = format!("Synthetic article {i}");
        a.categories = cats;
        fill_metadata(&mut a, &tokens, richness, &spec.languages, &spec.sections, &mut rng);
        a.tokens = tokens;
        a.properties
            .insert("occupation".into(), BTreeSet::from([format!("occ{occ}")]));
        articles.push(a);
        occupation_of.push(occ);
    }

    if let Some(planted) = &spec.planted_category {
        let (mut inside, mut outside): (Vec<usize>, Vec<usize>) =
            (0..spec.n_articles).partition(|&i| occupation_of[i] == planted.occupation);
        inside.shuffle(&mut rng);
        outside.shuffle(&mut rng);
        let from_inside = ((planted.members as f64 * planted.affinity).round() as usize).min(inside.len());
        let from_outside = (planted.members - from_inside).min(outside.len());
        for &i in inside[..from_inside].iter().chain(&outside[..from_outside]) {
            articles[i].categories.insert(planted.name.clone());
        }
    }

    let mut corpus = Corpus::new(articles)?;
    corpus.source_meta.insert("generator".into(), "synthetic".into());
    corpus.source_meta.insert("seed".into(), seed.into());
    Ok(corpus)
}

fn category_name(idx: usize) -> String {
    format!("Category {idx:04}")
}

/// Languages beyond the first are present with a richness-dependent rate.
fn fill_metadata<R: Rng>(
    a: &mut Article,
    tokens: &[String],
    richness: f64,
    languages: &[String],
    sections: &[String],
    rng: &mut R,
) {
    let len = tokens.len() as f64;
    for (k, lang) in languages.iter().enumerate() {
        let present = if k == 0 {
            true
        } else {
            let base = 0.7 / (1.0 + 0.3 * k as f64);
            let p = (base * (0.5 + 0.5 * richness)).clamp(0.02, 0.95);
            rng.random::<f64>() < p
        };
        if present {
            a.languages.insert(lang.clone());
            let l = if k == 0 {
                tokens.len() as u64
            } else {
                (len * rng.random_range(0.2..0.9)).round() as u64
            };
            a.lang_lengths.insert(lang.clone(), l);
        }
    }
    a.edit_count = (len * rng.random_range(0.5..1.5)).round() as u64;
    a.age_months = rng.random_range(6.0..240.0_f64).round();
    for s in sections {
        if rng.random::<f64>() < 0.7 {
            a.sections
                .insert(s.clone(), (len * rng.random_range(0.02..0.2)).round() as u64);
        }
    }
}

/// Biography-style demo corpus with a planted group effect.
///
/// Every article is about an American person. A fraction `marked_fraction`
/// carries race-marked categories ("African-American actors"); those articles
/// are `marked_length_factor` times as long and appear in `marked_language`
/// at rate `marked_language_rate` instead of `base_language_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSpec {
    pub n_articles: usize,
    pub marked_fraction: f64,
    pub female_fraction: f64,
    /// Fraction without a gender property (pronoun inference needed).
    pub unlabeled_fraction: f64,
    pub tokens_per_article: f64,
    pub marked_length_factor: f64,
    pub marked_language: String,
    pub marked_language_rate: f64,
    pub base_language_rate: f64,
}

impl Default for DemoSpec {
    fn default() -> Self {
        DemoSpec {
            n_articles: 4000,
            marked_fraction: 0.2,
            female_fraction: 0.35,
            unlabeled_fraction: 0.05,
            tokens_per_article: 400.0,
            marked_length_factor: 0.8,
            marked_language: "de".into(),
            marked_language_rate: 0.3,
            base_language_rate: 0.6,
        }
    }
}

const OCCUPATIONS: &[&str] = &[
    "actors", "novelists", "politicians", "singers", "academics", "journalists", "painters",
    "businesspeople", "lawyers", "film directors", "physicians", "football players",
];
const STATES: &[&str] = &[
    "Texas", "California", "New York", "Ohio", "Georgia", "Illinois", "Michigan", "Virginia",
    "Florida", "Oregon",
];
const SCHOOLS: &[&str] = &[
    "Harvard University", "Yale University", "Howard University", "Stanford University",
    "University of Michigan", "Ohio State University", "Spelman College", "Columbia University",
];
const DEMO_LANGUAGES: &[&str] = &["en", "fr", "ar", "ru", "ja", "it", "es", "de", "pt", "zh"];

pub fn generate_demo(spec: &DemoSpec, seed: u64) -> Result<Corpus> {
    let mut problems = Vec::new();
    for (name, v) in [
        ("marked_fraction", spec.marked_fraction),
        ("female_fraction", spec.female_fraction),
        ("unlabeled_fraction", spec.unlabeled_fraction),
        ("marked_language_rate", spec.marked_language_rate),
        ("base_language_rate", spec.base_language_rate),
    ] {
        if !(0.0..=1.0).contains(&v) {
            problems.push(format!("{name} must be in [0, 1], got {v}"));
        }
    }
    if !(spec.marked_length_factor > 0.0) {
        problems.push("marked_length_factor must be positive".into());
    }
    if !DEMO_LANGUAGES.contains(&spec.marked_language.as_str()) || spec.marked_language == "en" {
        problems.push(format!(
            "marked_language must be a non-home demo language, got `{}`",
            spec.marked_language
        ));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let words = ZipfRange::new(0, 1500);
    let occ_words: Vec<ZipfRange> = (0..OCCUPATIONS.len())
        .map(|k| ZipfRange::new(1500 + 60 * k, 60))
        .collect();

    let mut articles = Vec::with_capacity(spec.n_articles);
    for i in 0..spec.n_articles {
        let occ = rng.random_range(0..OCCUPATIONS.len());
        let occupation = OCCUPATIONS[occ];
        let marked = rng.random::<f64>() < spec.marked_fraction;
        let female = rng.random::<f64>() < spec.female_fraction;
        let labeled = rng.random::<f64>() >= spec.unlabeled_fraction;
        let richness = (0.45f64 * normal.sample(&mut rng)).exp() / (0.45f64 * 0.45 / 2.0).exp();

        let mut cats = BTreeSet::new();
        cats.insert("Living people".to_string());
        cats.insert(format!("American {occupation}"));
        let century = if rng.random::<f64>() < 0.5 { "20th" } else { "21st" };
        cats.insert(format!("{century}-century American {occupation}"));
        let state = STATES[rng.random_range(0..STATES.len())];
        cats.insert(format!("People from {state}"));
        let extra_mean = 4.0 * richness;
        let extra = Poisson::new(extra_mean).expect("positive").sample(&mut rng) as usize;
        for _ in 0..extra {
            let c = match rng.random_range(0..4) {
                0 => format!("{} alumni", SCHOOLS[rng.random_range(0..SCHOOLS.len())]),
                1 => format!("American {occupation} of genre {}", rng.random_range(0..12)),
                2 => format!("{} from {state}", capitalize(occupation)),
                _ => format!("Recipients of award {}", rng.random_range(0..30)),
            };
            cats.insert(c);
        }
        if marked {
            cats.insert(format!("African-American {occupation}"));
            if rng.random::<f64>() < 0.5 {
                cats.insert("African-American people".to_string());
            }
        } else if rng.random::<f64>() < 0.02 {
            cats.insert("American expatriates in Hong Kong".to_string());
        }
        if rng.random::<f64>() < 0.05 {
            cats.insert("Pages with broken links".to_string());
        }
        if rng.random::<f64>() < 0.01 {
            cats.insert(format!("American {occupation} stubs"));
        }

        let mut length = spec.tokens_per_article * richness * rng.random_range(0.8..1.2);
        if marked {
            length *= spec.marked_length_factor;
        }
        let n_tokens = length.round() as usize;
        let (pronouns, spouse): (&[&str], &str) = if female {
            (&["she", "her", "her", "herself"], "husband")
        } else {
            (&["he", "his", "him", "himself"], "wife")
        };
        let tokens: Vec<String> = (0..n_tokens)
            .map(|_| {
                let u = rng.random::<f64>();
                if u < 0.04 {
                    pronouns[rng.random_range(0..pronouns.len())].to_string()
                } else if u < 0.045 {
                    spouse.to_string()
                } else if u < 0.4 {
                    format!("w{}", occ_words[occ].sample(&mut rng))
                } else {
                    format!("w{}", words.sample(&mut rng))
                }
            })
            .collect();

        let mut a = Article::new(format!("P{i:06}"));
        a.title = format!("Person {i}");
        a.categories = cats;
        let len = tokens.len() as f64;
        for lang in DEMO_LANGUAGES {
            let present = if *lang == "en" {
                true
            } else if *lang == spec.marked_language {
                let rate = if marked {
                    spec.marked_language_rate
                } else {
                    spec.base_language_rate
                };
                rng.random::<f64>() < rate
            } else {
                rng.random::<f64>() < spec.base_language_rate * 0.8
            };
            if present {
                a.languages.insert(lang.to_string());
                let l = if *lang == "en" {
                    tokens.len() as u64
                } else {
                    (len * rng.random_range(0.2..0.9)).round() as u64
                };
                a.lang_lengths.insert(lang.to_string(), l);
            }
        }
        a.edit_count = (len * rng.random_range(0.5..1.5)).round() as u64;
        a.age_months = rng.random_range(12.0..240.0_f64).round();
        let mut sections = BTreeMap::new();
        sections.insert("Early life".to_string(), (len * rng.random_range(0.05..0.15)).round() as u64);
        sections.insert("Career".to_string(), (len * rng.random_range(0.3..0.6)).round() as u64);
        if rng.random::<f64>() < 0.6 {
            sections.insert("Personal life".to_string(), (len * rng.random_range(0.01..0.08)).round() as u64);
        }
        a.sections = sections;
        if labeled {
            let value = if female { "female" } else { "male" };
            a.properties
                .insert("gender".into(), BTreeSet::from([value.to_string()]));
        }
        a.tokens = tokens;
        articles.push(a);
    }
    let mut corpus = Corpus::new(articles)?;
    corpus.source_meta.insert("generator".into(), "demo".into());
    corpus.source_meta.insert("seed".into(), seed.into());
    Ok(corpus)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{apply_filter, corpus_summary, FilterPolicy};

    #[test]
    fn same_seed_same_corpus() {
        let spec = SyntheticSpec {
            n_articles: 50,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec, 7).unwrap(), generate_synthetic(&spec, 7).unwrap());
        assert_ne!(generate_synthetic(&spec, 7).unwrap(), generate_synthetic(&spec, 8).unwrap());
    }

    #[test]
    fn article_count_contract() {
        let spec = SyntheticSpec {
            n_articles: 100,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec, 1).unwrap().len(), 100);
    }

    #[test]
    fn mean_category_count_near_target() {
        let spec = SyntheticSpec {
            n_articles: 1000,
            categories_per_article: 9.0,
            ..Default::default()
        };
        let c = generate_synthetic(&spec, 11).unwrap();
        let mean = corpus_summary(&c).unwrap().mean_categories;
        assert!((mean - 9.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn infeasible_specs_rejected() {
        let spec = SyntheticSpec {
            n_categories: 0,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&spec, 1), Err(Error::Config(_))));
        let spec = SyntheticSpec {
            n_articles: 10,
            planted_category: Some(PlantedCategory {
                name: "x".into(),
                members: 11,
                occupation: 0,
                affinity: 1.0,
            }),
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&spec, 1), Err(Error::Config(_))));
    }

    #[test]
    fn planted_category_has_requested_size() {
        let spec = SyntheticSpec::confounded(2000);
        let c = generate_synthetic(&spec, 3).unwrap();
        let n = c
            .iter()
            .filter(|a| a.categories.contains("Planted target category"))
            .count();
        assert_eq!(n, 600);
    }

    #[test]
    fn generated_articles_survive_ingest_invariants() {
        let c = generate_synthetic(&SyntheticSpec::default(), 5).unwrap();
        for a in c.iter() {
            assert!(!a.categories.is_empty());
            assert!(a.categories.iter().all(|c| !c.is_empty()));
            assert!(a.lang_lengths.keys().all(|k| a.languages.contains(k)));
            assert_eq!(a.lang_lengths["en"], a.tokens.len() as u64);
        }
        // Round-trips through the filter without modification when permissive.
        let (kept, _) = apply_filter(c.to_articles(), &FilterPolicy::permissive());
        assert_eq!(kept, c.to_articles());
    }

    #[test]
    fn demo_corpus_plants_marked_group() {
        let c = generate_demo(&DemoSpec { n_articles: 500, ..Default::default() }, 2).unwrap();
        let marked = c
            .iter()
            .filter(|a| a.categories.iter().any(|c| c.starts_with("African-American")))
            .count();
        assert!(marked > 60 && marked < 140, "{marked}");
        assert_eq!(c, generate_demo(&DemoSpec { n_articles: 500, ..Default::default() }, 2).unwrap());
    }
}
