//! Attribute tagging from properties, category patterns and pronouns, plus
//! markedness-based comparison pools.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};

/// Matches when the article has any of `values` under property `key`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyRule {
    pub key: String,
    pub values: Vec<String>,
}

/// Case-insensitive regular expressions tested against one category: every
/// `all` pattern must match, and at least one `any` pattern when `any` is
/// non-empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoryPattern {
    pub all: Vec<String>,
    pub any: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PronounGender {
    Man,
    Woman,
    Undetermined,
}

/// Membership of the comparison pool: at least one category matching a
/// `must_contain` pattern (when given), no category matching a
/// `must_not_contain` pattern, membership of every `require_groups` group and
/// of no `exclude_groups` group.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolRules {
    pub name: String,
    pub must_contain: Vec<String>,
    pub must_not_contain: Vec<String>,
    pub require_groups: Vec<String>,
    pub exclude_groups: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupRuleSet {
    pub name: String,
    pub property_rules: Vec<PropertyRule>,
    pub category_include_patterns: Vec<CategoryPattern>,
    /// A category matching any of these never counts as an include match.
    pub category_exclude_patterns: Vec<String>,
    /// Members must also belong to all of these groups. A rule set with no
    /// rules of its own is the plain intersection.
    pub require_groups: Vec<String>,
    /// Articles with no value for any property-rule key are tagged by
    /// pronoun counts when the inferred class equals `pronoun_class`.
    pub pronoun_fallback: bool,
    pub pronoun_class: Option<PronounGender>,
    pub comparison_pool_rules: Option<PoolRules>,
}

impl GroupRuleSet {
    fn has_own_rules(&self) -> bool {
        !self.property_rules.is_empty() || !self.category_include_patterns.is_empty() || self.pronoun_fallback
    }
}

/// One target group compared against one or more pools.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pairing {
    pub target: String,
    pub pools: Vec<String>,
    /// Category patterns (case-insensitive substrings) left out of matching
    /// and balance checks for this pairing.
    pub exclusions: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupConfig {
    pub groups: Vec<GroupRuleSet>,
    pub pools: Vec<PoolRules>,
    pub pairings: Vec<Pairing>,
}

const DEFAULT_GROUPS: &str = include_str!("../config/default_groups.json");

impl GroupConfig {
    /// Shipped gender and race rules with their markedness pools.
    pub fn default_rules() -> GroupConfig {
        serde_json::from_str(DEFAULT_GROUPS).expect("bundled group config parses")
    }

    pub fn load(path: &Path) -> Result<GroupConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: GroupConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pool by name: the shared list first, then pools attached to groups.
    pub fn pool(&self, name: &str) -> Option<&PoolRules> {
        self.pools
            .iter()
            .chain(self.groups.iter().filter_map(|g| g.comparison_pool_rules.as_ref()))
            .find(|p| p.name == name)
    }

    pub fn group(&self, name: &str) -> Option<&GroupRuleSet> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Every problem: duplicate names, unknown references, bad patterns.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut names = BTreeSet::new();
        for g in &self.groups {
            if g.name.is_empty() {
                problems.push("a group has an empty name".to_string());
            }
            if !names.insert(g.name.as_str()) {
                problems.push(format!("duplicate group name `{}`", g.name));
            }
        }
        let derived: BTreeSet<&str> = self
            .groups
            .iter()
            .filter(|g| !g.require_groups.is_empty())
            .map(|g| g.name.as_str())
            .collect();
        for g in &self.groups {
            for r in &g.require_groups {
                if !names.contains(r.as_str()) {
                    problems.push(format!("group `{}` requires unknown group `{r}`", g.name));
                } else if derived.contains(r.as_str()) {
                    problems.push(format!("group `{}` requires `{r}`, which itself requires groups", g.name));
                }
            }
            if !g.has_own_rules() && g.require_groups.is_empty() {
                problems.push(format!("group `{}` has no rules", g.name));
            }
            if g.pronoun_fallback && g.pronoun_class.is_none() {
                problems.push(format!("group `{}` enables pronoun_fallback without pronoun_class", g.name));
            }
            if let Err(Error::Config(ps)) = CompiledGroup::new(g) {
                problems.extend(ps);
            }
        }
        let mut pool_names = BTreeSet::new();
        let pools = self
            .pools
            .iter()
            .chain(self.groups.iter().filter_map(|g| g.comparison_pool_rules.as_ref()));
        for p in pools {
            if !pool_names.insert(p.name.as_str()) {
                problems.push(format!("duplicate pool name `{}`", p.name));
            }
            for r in p.require_groups.iter().chain(&p.exclude_groups) {
                if !names.contains(r.as_str()) {
                    problems.push(format!("pool `{}` references unknown group `{r}`", p.name));
                }
            }
            if let Err(Error::Config(ps)) = CompiledPool::new(p) {
                problems.extend(ps);
            }
        }
        for pr in &self.pairings {
            if !names.contains(pr.target.as_str()) {
                problems.push(format!("pairing target `{}` is not a group", pr.target));
            }
            if pr.pools.is_empty() {
                problems.push(format!("pairing for `{}` lists no pools", pr.target));
            }
            for p in &pr.pools {
                if !pool_names.contains(p.as_str()) {
                    problems.push(format!("pairing for `{}` names unknown pool `{p}`", pr.target));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

fn compile(pattern: &str, problems: &mut Vec<String>) -> Option<Regex> {
    match RegexBuilder::new(pattern).case_insensitive(true).build() {
        Ok(r) => Some(r),
        Err(e) => {
            problems.push(format!("invalid pattern `{pattern}`: {e}"));
            None
        }
    }
}

fn compile_all(patterns: &[String], problems: &mut Vec<String>) -> Vec<Regex> {
    patterns.iter().filter_map(|p| compile(p, problems)).collect()
}

/// `any` alternatives folded into one regex.
fn compile_any(patterns: &[String], problems: &mut Vec<String>) -> Option<Regex> {
    if patterns.is_empty() {
        return None;
    }
    let before = problems.len();
    compile_all(patterns, problems);
    if problems.len() > before {
        return None;
    }
    let joined = patterns.iter().map(|p| format!("(?:{p})")).collect::<Vec<_>>().join("|");
    compile(&joined, problems)
}

struct CompiledPattern {
    all: Vec<Regex>,
    any: Option<Regex>,
}

impl CompiledPattern {
    fn matches(&self, category: &str) -> bool {
        self.all.iter().all(|r| r.is_match(category)) && self.any.as_ref().is_none_or(|r| r.is_match(category))
    }
}

struct CompiledGroup<'a> {
    rules: &'a GroupRuleSet,
    include: Vec<CompiledPattern>,
    exclude: Vec<Regex>,
}

fn pattern_error(problems: Vec<String>) -> Error {
    Error::Config(problems)
}

impl<'a> CompiledGroup<'a> {
    fn new(rules: &'a GroupRuleSet) -> Result<Self> {
        let mut problems = Vec::new();
        let include = rules
            .category_include_patterns
            .iter()
            .map(|p| CompiledPattern {
                all: compile_all(&p.all, &mut problems),
                any: compile_any(&p.any, &mut problems),
            })
            .collect();
        let exclude = compile_all(&rules.category_exclude_patterns, &mut problems);
        if problems.is_empty() {
            Ok(CompiledGroup { rules, include, exclude })
        } else {
            Err(pattern_error(
                problems.into_iter().map(|p| format!("group `{}`: {p}", rules.name)).collect(),
            ))
        }
    }

    /// Provenance of the first rule that fires, in declaration order.
    fn provenance(&self, a: &Article) -> Option<String> {
        for rule in &self.rules.property_rules {
            if let Some(vals) = a.property(&rule.key) {
                if let Some(v) = rule.values.iter().find(|v| vals.contains(*v)) {
                    return Some(format!("property {}={}", rule.key, v));
                }
            }
        }
        for c in &a.categories {
            if self.exclude.iter().any(|r| r.is_match(c)) {
                continue;
            }
            if let Some(i) = self.include.iter().position(|p| p.matches(c)) {
                return Some(format!("category `{c}` matched include pattern {i}"));
            }
        }
        if self.rules.pronoun_fallback {
            let unlabeled = self.rules.property_rules.iter().all(|r| a.property(&r.key).is_none_or(|v| v.is_empty()));
            if unlabeled {
                let g = infer_gender_by_pronouns(a);
                if Some(g) == self.rules.pronoun_class && g != PronounGender::Undetermined {
                    return Some(format!("pronouns {g:?}").to_lowercase());
                }
            }
        }
        None
    }
}

/// Majority pronoun class over he/him/his/himself and she/her/hers/herself,
/// case-insensitive. Ties and articles without pronouns are undetermined.
pub fn infer_gender_by_pronouns(a: &Article) -> PronounGender {
    let (mut m, mut f) = (0usize, 0usize);
    for t in &a.tokens {
        match t.to_lowercase().as_str() {
            "he" | "him" | "his" | "himself" => m += 1,
            "she" | "her" | "hers" | "herself" => f += 1,
            _ => {}
        }
    }
    match m.cmp(&f) {
        std::cmp::Ordering::Greater => PronounGender::Man,
        std::cmp::Ordering::Less => PronounGender::Woman,
        std::cmp::Ordering::Equal => PronounGender::Undetermined,
    }
}

/// Group memberships with the rule that produced each one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    /// article id -> group -> provenance; articles without groups are absent.
    pub assignments: BTreeMap<String, BTreeMap<String, String>>,
}

impl GroupAssignment {
    pub fn members(&self, group: &str) -> BTreeSet<&str> {
        self.assignments
            .iter()
            .filter(|(_, g)| g.contains_key(group))
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn groups_of(&self, id: &str) -> BTreeSet<&str> {
        self.assignments
            .get(id)
            .map(|g| g.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn is_member(&self, id: &str, group: &str) -> bool {
        self.assignments.get(id).is_some_and(|g| g.contains_key(group))
    }

    pub fn counts(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for g in self.assignments.values() {
            for name in g.keys() {
                *out.entry(name.as_str()).or_insert(0) += 1;
            }
        }
        out
    }

    /// One `{"id", "groups", "provenance"}` object per tagged article.
    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (id, g) in &self.assignments {
            let line = serde_json::json!({
                "id": id,
                "groups": g.keys().collect::<Vec<_>>(),
                "provenance": g,
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Tag every article. Rule sets with `require_groups` are resolved after the
/// base groups, so declaration order never matters.
pub fn tag_by_rules(corpus: &Corpus, rules: &[GroupRuleSet]) -> Result<GroupAssignment> {
    let mut names = BTreeSet::new();
    for r in rules {
        if !names.insert(r.name.as_str()) {
            return Err(Error::Config(vec![format!("duplicate group name `{}`", r.name)]));
        }
    }
    let compiled: Vec<CompiledGroup> = rules.iter().map(CompiledGroup::new).collect::<Result<_>>()?;
    let rows: Vec<(String, BTreeMap<String, String>)> = corpus
        .articles()
        .par_iter()
        .map(|a| {
            let mut groups = BTreeMap::new();
            for g in compiled.iter().filter(|g| g.rules.require_groups.is_empty()) {
                if let Some(p) = g.provenance(a) {
                    groups.insert(g.rules.name.clone(), p);
                }
            }
            for g in compiled.iter().filter(|g| !g.rules.require_groups.is_empty()) {
                if !g.rules.require_groups.iter().all(|r| groups.contains_key(r)) {
                    continue;
                }
                let req = format!("member of {}", g.rules.require_groups.join(" and "));
                let p = if g.rules.has_own_rules() {
                    g.provenance(a).map(|p| format!("{p}; {req}"))
                } else {
                    Some(req)
                };
                if let Some(p) = p {
                    groups.insert(g.rules.name.clone(), p);
                }
            }
            (a.id.clone(), groups)
        })
        .filter(|(_, g)| !g.is_empty())
        .collect();
    Ok(GroupAssignment {
        assignments: rows.into_iter().collect(),
    })
}

struct CompiledPool<'a> {
    rules: &'a PoolRules,
    must: Vec<Regex>,
    must_not: Option<Regex>,
}

impl<'a> CompiledPool<'a> {
    fn new(rules: &'a PoolRules) -> Result<Self> {
        let mut problems = Vec::new();
        let must = compile_all(&rules.must_contain, &mut problems);
        let must_not = compile_any(&rules.must_not_contain, &mut problems);
        if problems.is_empty() {
            Ok(CompiledPool { rules, must, must_not })
        } else {
            Err(pattern_error(
                problems.into_iter().map(|p| format!("pool `{}`: {p}", rules.name)).collect(),
            ))
        }
    }

    fn admits(&self, a: &Article, assignment: &GroupAssignment) -> bool {
        let has_required = self.must.is_empty() || a.categories.iter().any(|c| self.must.iter().any(|r| r.is_match(c)));
        has_required
            && self
                .must_not
                .as_ref()
                .is_none_or(|r| !a.categories.iter().any(|c| r.is_match(c)))
            && self.rules.require_groups.iter().all(|g| assignment.is_member(&a.id, g))
            && !self.rules.exclude_groups.iter().any(|g| assignment.is_member(&a.id, g))
    }
}

/// Articles admitted by the pool rules and not in `target_group`.
pub fn build_comparison_pool(
    corpus: &Corpus,
    rules: &PoolRules,
    assignment: &GroupAssignment,
    target_group: &str,
) -> Result<Corpus> {
    let pool = CompiledPool::new(rules)?;
    let picked = corpus.filtered(|a| !assignment.is_member(&a.id, target_group) && pool.admits(a, assignment));
    if picked.is_empty() {
        return Err(Error::data(format!(
            "comparison pool `{}` for `{target_group}` is empty",
            rules.name
        )));
    }
    Ok(picked)
}

/// Target group members as a corpus.
pub fn group_corpus(corpus: &Corpus, assignment: &GroupAssignment, group: &str) -> Result<Corpus> {
    let picked = corpus.filtered(|a| assignment.is_member(&a.id, group));
    if picked.is_empty() {
        return Err(Error::data(format!("group `{group}` has no members")));
    }
    Ok(picked)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationScores {
    /// `None` when the rules tag nothing in the reference.
    pub precision: Option<f64>,
    /// `None` when the reference has no positives.
    pub recall: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub n: usize,
}

/// Precision and recall of `group` tagging over the ids in `reference`.
pub fn validate_against_reference(
    assignment: &GroupAssignment,
    group: &str,
    reference: &BTreeMap<String, BTreeSet<String>>,
) -> Result<ValidationScores> {
    if reference.is_empty() {
        return Err(Error::data("reference labels are empty"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (id, labels) in reference {
        let predicted = assignment.is_member(id, group);
        let actual = labels.contains(group);
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(ValidationScores {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        n: reference.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn art(id: &str, cats: &[&str]) -> Article {
        Article::new(id).with_categories(cats.iter().copied())
    }

    fn default_group(name: &str) -> GroupRuleSet {
        GroupConfig::default_rules().group(name).unwrap().clone()
    }

    #[test]
    fn bundled_config_is_valid() {
        let cfg = GroupConfig::default_rules();
        cfg.validate().unwrap();
        assert!(cfg.pool("unmarked American").is_some());
    }

    #[test]
    fn hispanic_descent_category_tagged() {
        let corpus = Corpus::new(vec![
            art("a", &["American academics of Mexican descent", "Living people"]),
            art("b", &["American expatriates in Hong Kong", "Living people"]),
        ])
        .unwrap();
        let rules = vec![default_group("Hispanic and Latino American"), default_group("Asian American")];
        let g = tag_by_rules(&corpus, &rules).unwrap();
        assert!(g.is_member("a", "Hispanic and Latino American"));
        assert!(g.groups_of("b").is_empty());
        assert!(g.assignments["a"]["Hispanic and Latino American"].contains("American academics of Mexican descent"));
    }

    #[test]
    fn groups_are_not_exclusive() {
        let corpus = Corpus::new(vec![art(
            "a",
            &["African-American musicians", "American people of Korean descent"],
        )])
        .unwrap();
        let rules = vec![default_group("African American"), default_group("Asian American")];
        let g = tag_by_rules(&corpus, &rules).unwrap();
        assert_eq!(g.groups_of("a"), BTreeSet::from(["African American", "Asian American"]));
    }

    #[test]
    fn tagging_ignores_rule_order() {
        let corpus = Corpus::new(vec![
            art("a", &["African-American musicians"]),
            art("b", &["American people of Korean descent"]),
        ])
        .unwrap();
        let mut rules = GroupConfig::default_rules().groups;
        let fwd = tag_by_rules(&corpus, &rules).unwrap();
        rules.reverse();
        assert_eq!(tag_by_rules(&corpus, &rules).unwrap(), fwd);
    }

    #[test]
    fn pronoun_inference() {
        let a = Article::new("a").with_tokens(["She", "won", "her", "third", "title"]);
        assert_eq!(infer_gender_by_pronouns(&a), PronounGender::Woman);
        let b = Article::new("b").with_tokens(["he", "his", "him", "she", "her", "hers"]);
        assert_eq!(infer_gender_by_pronouns(&b), PronounGender::Undetermined);
        let c = Article::new("c").with_tokens(["no", "pronouns"]);
        assert_eq!(infer_gender_by_pronouns(&c), PronounGender::Undetermined);
    }

    #[test]
    fn pronoun_fallback_only_for_unlabeled() {
        let mut labeled = Article::new("a").with_tokens(["she", "her"]);
        labeled.properties.insert("gender".into(), BTreeSet::from(["male".to_string()]));
        let unlabeled = Article::new("b").with_tokens(["she", "her"]);
        let corpus = Corpus::new(vec![labeled, unlabeled]).unwrap();
        let g = tag_by_rules(&corpus, &[default_group("women"), default_group("men")]).unwrap();
        assert!(g.is_member("a", "men"));
        assert!(!g.is_member("a", "women"));
        assert!(g.is_member("b", "women"));
        assert!(g.assignments["b"]["women"].starts_with("pronouns"));
    }

    #[test]
    fn markedness_pool() {
        let corpus = Corpus::new(vec![
            art("bush", &["Governors of Texas", "American businesspeople"]),
            art("obama", &["African American United States senators", "American lawyers"]),
            art("nobody", &["Governors of Texas"]),
        ])
        .unwrap();
        let cfg = GroupConfig::default_rules();
        let g = tag_by_rules(&corpus, &cfg.groups).unwrap();
        assert!(g.is_member("obama", "African American"));
        let pool = build_comparison_pool(&corpus, cfg.pool("unmarked American").unwrap(), &g, "African American").unwrap();
        assert_eq!(pool.ids().collect::<Vec<_>>(), vec!["bush"]);
    }

    #[test]
    fn target_members_never_enter_pool() {
        let corpus = Corpus::new(vec![art("a", &["American lawyers"]), art("b", &["American lawyers"])]).unwrap();
        let rules = PoolRules {
            name: "all".into(),
            must_contain: vec!["American".into()],
            ..Default::default()
        };
        let mut g = GroupAssignment::default();
        g.assignments.insert("a".into(), BTreeMap::from([("t".to_string(), "test".to_string())]));
        let pool = build_comparison_pool(&corpus, &rules, &g, "t").unwrap();
        assert_eq!(pool.ids().collect::<Vec<_>>(), vec!["b"]);
        let only_target = corpus.filtered(|a| a.id == "a");
        assert!(build_comparison_pool(&only_target, &rules, &g, "t").is_err());
    }

    #[test]
    fn intersection_groups() {
        let mut a = art("a", &["African-American writers"]);
        a.properties.insert("gender".into(), BTreeSet::from(["female".to_string()]));
        let mut b = art("b", &["American writers"]);
        b.properties.insert("gender".into(), BTreeSet::from(["female".to_string()]));
        let corpus = Corpus::new(vec![a, b]).unwrap();
        let g = tag_by_rules(&corpus, &GroupConfig::default_rules().groups).unwrap();
        assert!(g.is_member("a", "African American women"));
        assert!(!g.is_member("b", "African American women"));
    }

    #[test]
    fn invalid_pattern_reported() {
        let bad = GroupRuleSet {
            name: "bad".into(),
            category_exclude_patterns: vec!["(unclosed".into()],
            category_include_patterns: vec![CategoryPattern {
                all: vec!["[".into()],
                any: vec![],
            }],
            ..Default::default()
        };
        let corpus = Corpus::new(vec![art("a", &["x"])]).unwrap();
        match tag_by_rules(&corpus, &[bad]) {
            Err(Error::Config(ps)) => assert_eq!(ps.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let cfg = GroupConfig {
            groups: vec![
                GroupRuleSet {
                    name: "x".into(),
                    require_groups: vec!["missing".into()],
                    ..Default::default()
                },
                GroupRuleSet {
                    name: "x".into(),
                    pronoun_fallback: true,
                    ..Default::default()
                },
            ],
            pools: vec![],
            pairings: vec![Pairing {
                target: "x".into(),
                pools: vec!["nope".into()],
                exclusions: vec![],
            }],
        };
        match cfg.validate() {
            Err(Error::Config(ps)) => assert!(ps.len() >= 4, "{ps:?}"),
            other => panic!("{other:?}"),
        }
    }

    fn reference(pairs: &[(&str, bool)]) -> BTreeMap<String, BTreeSet<String>> {
        pairs
            .iter()
            .map(|(id, pos)| {
                let labels = if *pos { BTreeSet::from(["g".to_string()]) } else { BTreeSet::new() };
                (id.to_string(), labels)
            })
            .collect()
    }

    fn assigned(ids: &[&str]) -> GroupAssignment {
        GroupAssignment {
            assignments: ids
                .iter()
                .map(|id| (id.to_string(), BTreeMap::from([("g".to_string(), "test".to_string())])))
                .collect(),
        }
    }

    #[test]
    fn precision_recall() {
        let r = reference(&[
            ("0", true),
            ("1", true),
            ("2", true),
            ("3", true),
            ("4", false),
            ("5", false),
            ("6", false),
            ("7", false),
            ("8", false),
            ("9", false),
        ]);
        let same = validate_against_reference(&assigned(&["0", "1", "2", "3"]), "g", &r).unwrap();
        assert_eq!((same.precision, same.recall), (Some(1.0), Some(1.0)));
        let half = validate_against_reference(&assigned(&["0", "1"]), "g", &r).unwrap();
        assert_eq!((half.precision, half.recall), (Some(1.0), Some(0.5)));
        let none = validate_against_reference(&GroupAssignment::default(), "g", &r).unwrap();
        assert_eq!((none.precision, none.recall), (None, Some(0.0)));
        assert!(validate_against_reference(&none_assignment(), "g", &BTreeMap::new()).is_err());
    }

    fn none_assignment() -> GroupAssignment {
        GroupAssignment::default()
    }

    #[test]
    fn assignment_jsonl() {
        let mut out = Vec::new();
        assigned(&["a"]).write_jsonl(&mut out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v["groups"], serde_json::json!(["g"]));
        assert_eq!(v["provenance"]["g"], "test");
    }

    proptest! {
        #[test]
        fn pronouns_order_free(mut words in proptest::collection::vec(
            prop::sample::select(vec!["he", "she", "her", "his", "him", "the", "hers", "himself", "x"]), 0..30),
            seed in 0u64..100)
        {
            let a = Article::new("a").with_tokens(words.clone());
            use rand::{seq::SliceRandom, SeedableRng};
            words.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = Article::new("b").with_tokens(words);
            prop_assert_eq!(infer_gender_by_pronouns(&a), infer_gender_by_pronouns(&b));
        }
    }
}
