//! `catmatch` command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analyze::{file_slug, kept_pairs, run_analysis_tagged, word_table_groups, AnalysisConfig};
use crate::corpus::{corpus_summary, generate_demo, ingest, Article, Corpus, DemoSpec, FilterPolicy};
use crate::error::{Error, Result};
use crate::evaluate::{
    evaluate_match, polar_log_odds, save_report, token_counts, train_lda, write_smd_csv, EvalOptions, LdaConfig,
    SmdReport,
};
use crate::groups::{build_comparison_pool, group_corpus, tag_by_rules, GroupAssignment, GroupConfig};
use crate::matchers::{run_match, MatchConfig, MatchResult, Method};
use crate::simulate::{run_article_sampling, run_attribute_specific, run_category_sampling, tune_slope, Regime, SimulationSpec, TuneSpec};
use crate::vectorize::{write_matrix, IdfTable};

/// Everything a subcommand may read. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    pub demo: Option<DemoSpec>,
    pub filter: FilterPolicy,
    pub targets: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub target_group: Option<String>,
    pub pool: Option<String>,
    pub groups: Option<PathBuf>,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub matches: Option<PathBuf>,
    pub eval: EvalOptions,
    pub lda: Option<LdaConfig>,
    pub simulation: SimulationSpec,
    pub tune: TuneSpec,
    pub analysis: AnalysisConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub slope: Option<f64>,
    pub pivot: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: Vec::new(),
            demo: None,
            filter: FilterPolicy::default(),
            targets: None,
            candidates: None,
            target_group: None,
            pool: None,
            groups: None,
            matching: MatchConfig::default(),
            matches: None,
            eval: EvalOptions::default(),
            lda: None,
            simulation: SimulationSpec::default(),
            tune: TuneSpec::default(),
            analysis: AnalysisConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
            slope: None,
            pivot: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Match,
    TuneSlope,
    Evaluate,
    Simulate,
    Analyze,
    LogOdds,
    ExportMatrix,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Match => "match",
            Command::TuneSlope => "tune-slope",
            Command::Evaluate => "evaluate",
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::LogOdds => "log-odds",
            Command::ExportMatrix => "export-matrix",
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
    }

    /// Push the global seed and the slope/pivot overrides into every nested
    /// setting that consumes them.
    pub fn resolve(&mut self) {
        let seed = self.seed;
        self.matching.propensity.seed = seed;
        self.simulation.seed = seed;
        self.tune.seed = seed;
        self.tune.base.propensity.seed = seed;
        for m in &mut self.simulation.methods {
            m.propensity.seed = seed;
        }
        if let Some(l) = &mut self.lda {
            l.seed = seed;
        }
        if let Some(l) = &mut self.simulation.lda {
            l.seed = seed;
        }
        if let Some(l) = &mut self.tune.lda {
            l.seed = seed;
        }
        let pivot_methods = std::iter::once(&mut self.matching)
            .chain(std::iter::once(&mut self.tune.base))
            .chain(self.simulation.methods.iter_mut().filter(|m| m.method == Method::PivotSlope));
        for m in pivot_methods {
            if let Some(s) = self.slope {
                m.pivot_slope.slope = s;
            }
            if let Some(p) = self.pivot {
                m.pivot_slope.pivot = p;
            }
        }
        if let Some(p) = self.pivot {
            self.tune.pivot = Some(p);
            self.simulation.pivot_from_corpus = false;
            self.analysis.pivot_from_corpus = false;
        }
    }

    /// SHA-256 of the canonical JSON form without `threads` and `out`,
    /// which never affect results.
    pub fn config_hash(&self) -> String {
        let mut v = self.clone();
        v.threads = None;
        v.out = PathBuf::new();
        let value = serde_json::to_value(&v).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    /// Every problem for `cmd`, not just the first.
    pub fn validate(&self, cmd: Command) -> Vec<String> {
        let mut problems = Vec::new();
        let mut need_file = |key: &str, p: &Path| {
            if !p.is_file() {
                problems.push(format!("{key}: file `{}` does not exist", p.display()));
            }
        };
        for p in &self.corpus {
            need_file("corpus", p);
        }
        if let Some(p) = &self.targets {
            need_file("targets", p);
        }
        if let Some(p) = &self.candidates {
            need_file("candidates", p);
        }
        if let Some(p) = &self.groups {
            need_file("groups", p);
        }
        if cmd == Command::Evaluate {
            if let Some(p) = &self.matches {
                need_file("matches", p);
            }
        }
        if let Some(0) = self.threads {
            problems.push("threads must be at least 1".into());
        }
        if let Some(s) = self.slope {
            if !(0.0..=1.0).contains(&s) {
                problems.push(format!("slope must be in [0, 1], got {s}"));
            }
        }
        if let Some(p) = self.pivot {
            if !(p > 0.0 && p.is_finite()) {
                problems.push(format!("pivot must be positive, got {p}"));
            }
        }
        let has_corpus = !self.corpus.is_empty() || self.demo.is_some();
        let has_split = self.targets.is_some() || self.candidates.is_some();
        let has_groups = self.target_group.is_some() || self.pool.is_some();
        if self.targets.is_some() != self.candidates.is_some() {
            problems.push("targets and candidates must be given together".into());
        }
        if self.target_group.is_some() != self.pool.is_some() {
            problems.push("target_group and pool must be given together".into());
        }
        if has_split && has_groups {
            problems.push("give either targets/candidates or target_group/pool, not both".into());
        }
        let pair_cmd = matches!(cmd, Command::Match | Command::Evaluate | Command::LogOdds)
            || (cmd == Command::Simulate && self.simulation.regime == Regime::AttributeSpecific);
        if pair_cmd && !has_split && !has_groups {
            problems.push(format!(
                "{} needs targets/candidates files or target_group/pool names",
                cmd.name()
            ));
        }
        let corpus_cmd = matches!(
            cmd,
            Command::Ingest | Command::TuneSlope | Command::Analyze | Command::ExportMatrix
        ) || (cmd == Command::Simulate && self.simulation.regime != Regime::AttributeSpecific);
        if (corpus_cmd || has_groups) && !has_corpus {
            problems.push(format!("{} needs corpus files or a demo spec", cmd.name()));
        }
        if let Err(ps) = self.matching.validate() {
            problems.extend(ps.into_iter().map(|p| format!("match: {p}")));
        }
        if cmd == Command::Simulate {
            problems.extend(self.simulation.validate().into_iter().map(|p| format!("simulation: {p}")));
        }
        if cmd == Command::TuneSlope {
            problems.extend(self.tune.validate().into_iter().map(|p| format!("tune: {p}")));
        }
        if cmd == Command::Analyze {
            problems.extend(self.analysis.validate());
        }
        if let Some(l) = &self.lda {
            problems.extend(l.validate().into_iter().map(|p| format!("lda: {p}")));
        }
        if !(self.eval.prior_scale > 0.0 && self.eval.prior_scale.is_finite()) {
            problems.push(format!("eval.prior_scale must be positive, got {}", self.eval.prior_scale));
        }
        if self.eval.top_words == 0 {
            problems.push("eval.top_words must be at least 1".into());
        }
        if self.groups.is_none() || self.groups.as_ref().is_some_and(|p| p.is_file()) {
            match self.group_config() {
                Ok(g) => {
                    if let (Some(t), Some(p)) = (&self.target_group, &self.pool) {
                        if g.group(t).is_none() {
                            problems.push(format!("target_group `{t}` is not defined"));
                        }
                        if g.pool(p).is_none() {
                            problems.push(format!("pool `{p}` is not defined"));
                        }
                    }
                }
                Err(Error::Config(ps)) => problems.extend(ps),
                Err(e) => problems.push(e.to_string()),
            }
        }
        problems
    }

    pub fn group_config(&self) -> Result<GroupConfig> {
        match &self.groups {
            Some(p) => GroupConfig::load(p),
            None => Ok(GroupConfig::default_rules()),
        }
    }

    /// Demo corpus or the union of all corpus files, filtered.
    pub fn load_corpus(&self) -> Result<Corpus> {
        let mut corpus = match &self.demo {
            Some(spec) => {
                let raw = generate_demo(spec, self.seed)?;
                let (kept, _) = crate::corpus::apply_filter(raw.to_articles(), &self.filter);
                Corpus::new(kept)?
            }
            None => Corpus::empty(),
        };
        for p in &self.corpus {
            corpus = corpus.union(&ingest(p, &self.filter)?)?;
        }
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus("no articles survived ingest"));
        }
        Ok(corpus)
    }

    /// Target and candidate corpora plus pairing exclusions.
    pub fn load_split(&self) -> Result<(Corpus, Corpus, Vec<String>)> {
        if let (Some(t), Some(c)) = (&self.targets, &self.candidates) {
            return Ok((ingest(t, &self.filter)?, ingest(c, &self.filter)?, Vec::new()));
        }
        let (Some(group), Some(pool)) = (&self.target_group, &self.pool) else {
            return Err(Error::Config(vec!["no targets/candidates or target_group/pool configured".into()]));
        };
        let corpus = self.load_corpus()?;
        let groups = self.group_config()?;
        let assignment = tag_by_rules(&corpus, &groups.groups)?;
        let rules = groups
            .pool(pool)
            .ok_or_else(|| Error::Config(vec![format!("pool `{pool}` is not defined")]))?;
        let targets = group_corpus(&corpus, &assignment, group)?;
        let candidates = build_comparison_pool(&corpus, rules, &assignment, group)?;
        let exclusions = groups
            .pairings
            .iter()
            .find(|p| &p.target == group && p.pools.contains(pool))
            .map(|p| p.exclusions.clone())
            .unwrap_or_default();
        Ok((targets, candidates, exclusions))
    }

    fn matches_path(&self) -> PathBuf {
        self.matches.clone().unwrap_or_else(|| self.out.join("matches.jsonl"))
    }
}

const CONFIG_KEYS: &str = "\
Configuration is one JSON object (--config FILE); every key is optional.
Flags override the file. Keys read by each command are listed below.

  corpus          list of JSONL corpus files, concatenated
  demo            synthetic demo corpus spec used instead of / besides files:
                  {n_articles, marked_fraction, female_fraction,
                  unlabeled_fraction, tokens_per_article, marked_length_factor,
                  marked_language, marked_language_rate, base_language_rate}
  filter          {min_categories, min_tokens, stub_category_patterns,
                  category_drop_patterns, home_language}
  targets         JSONL file of target articles (with candidates)
  candidates      JSONL file of candidate articles (with targets)
  target_group    group name from the group rules (with pool)
  pool            comparison pool name from the group rules (with target_group)
  groups          group rules JSON file; bundled rules when absent
  match           {method: number|percent|tfidf|pivot_slope|propensity|
                  tfidf_propensity, pivot_slope: {pivot, slope}, max_reuse,
                  min_shared_categories, excluded_category_patterns,
                  propensity: {learning_rate, iterations, l2, seed, init_scale}}
  matches         match file read by evaluate (default OUT/matches.jsonl)
  eval            {prior_scale, top_words}
  lda             {n_topics, alpha, beta, iterations, seed}; enables KL
  simulation      {regime: article_sampling|category_sampling|
                  attribute_specific, n_simulations, sample_size,
                  min_category_size, methods: [match...],
                  include_random_baseline, pivot_from_corpus, eval, lda}
  tune            {article_sample, n_categories, category_sample,
                  min_category_size, pivot, grid, base: match, eval, lda}
  analysis        {alpha, languages, sections, word_table_k, prior_scale,
                  pivot_from_corpus, unmatched_baseline}
  out             output directory (default `out`)
  seed            global seed; overrides every nested seed
  threads         worker threads; never changes results
  slope, pivot    pivot-slope overrides applied to every pivot-slope method

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.
Failures print one JSON error record on stderr.";

#[derive(Parser, Debug)]
#[command(name = "catmatch", version, about = "Category-matched comparison corpora", after_long_help = CONFIG_KEYS)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed (key `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (key `threads`).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (key `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Pivot-slope slope override (key `slope`).
    #[arg(long, global = true)]
    pub slope: Option<f64>,
    /// Pivot-slope pivot override (key `pivot`).
    #[arg(long, global = true)]
    pub pivot: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Sub {
    /// Read and filter the corpus, tag groups.
    #[command(after_long_help = "Reads: corpus, demo, filter, groups, seed.\n\
Writes: OUT/corpus.jsonl, OUT/groups.jsonl, OUT/ingest.json.")]
    Ingest,
    /// Match targets to candidates.
    #[command(after_long_help = "Reads: targets+candidates or corpus/demo+target_group+pool+groups, filter, \
match, seed, slope, pivot.\nWrites: OUT/matches.jsonl and, for propensity methods, OUT/propensity_model.json.")]
    Match,
    /// Grid-search the pivot-slope slope.
    #[command(after_long_help = "Reads: corpus, demo, filter, tune, seed, pivot.\n\
Writes: OUT/tune_slope.json, OUT/tune_slope.csv.")]
    TuneSlope,
    /// Balance report for a saved match.
    #[command(after_long_help = "Reads: matches, targets+candidates or corpus/demo+target_group+pool+groups, \
filter, eval, lda, seed.\nWrites: OUT/evaluation.json, OUT/evaluation_smd.csv.")]
    Evaluate,
    /// Repeated sampling simulations.
    #[command(after_long_help = "Reads: simulation, corpus, demo, filter, seed, slope, pivot; the \
attribute_specific regime reads targets+candidates or target_group+pool instead of sampling.\n\
Writes: OUT/simulation_<regime>.json and .csv.")]
    Simulate,
    /// Matched group comparisons for every configured pairing.
    #[command(after_long_help = "Reads: corpus, demo, filter, groups, match, analysis, seed, slope, pivot.\n\
Writes: OUT/groups.jsonl and per pairing OUT/analysis/<group>__<pool>.json, \
<group>__<pool>__matches.jsonl and <group>__<pool>__<table>.csv.")]
    Analyze,
    /// Log-odds word table between targets and candidates.
    #[command(after_long_help = "Reads: targets+candidates or corpus/demo+target_group+pool+groups, filter, \
eval, analysis.word_table_k, matches (optional: restricts to kept pairs).\n\
Writes: OUT/log_odds.json, OUT/log_odds.csv.")]
    LogOdds,
    /// Category TF-IDF matrix as id/category/weight triples.
    #[command(after_long_help = "Reads: corpus, demo, filter.\nWrites: OUT/category_matrix.tsv.")]
    ExportMatrix,
}

impl Sub {
    fn command(self) -> Command {
        match self {
            Sub::Ingest => Command::Ingest,
            Sub::Match => Command::Match,
            Sub::TuneSlope => Command::TuneSlope,
            Sub::Evaluate => Command::Evaluate,
            Sub::Simulate => Command::Simulate,
            Sub::Analyze => Command::Analyze,
            Sub::LogOdds => Command::LogOdds,
            Sub::ExportMatrix => Command::ExportMatrix,
        }
    }
}

/// Effective configuration: file, then flags, then resolution.
pub fn build_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(t) = global.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &global.out {
        cfg.out = o.clone();
    }
    if let Some(s) = global.slope {
        cfg.slope = Some(s);
    }
    if let Some(p) = global.pivot {
        cfg.pivot = Some(p);
    }
    cfg.resolve();
    Ok(cfg)
}

struct Artifacts<'a> {
    cfg: &'a RunConfig,
    run: Value,
    written: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    fn new(cfg: &'a RunConfig, cmd: Command) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
        let run = json!({
            "command": cmd.name(),
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "version": env!("CARGO_PKG_VERSION"),
        });
        Ok(Artifacts {
            cfg,
            run,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value).expect("artifact serializes");
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("run".into(), self.run.clone());
            }
            None => v = json!({ "run": self.run, "data": v }),
        }
        let path = self.path(name);
        let text = serde_json::to_string_pretty(&v).expect("artifact serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let path = self.path(name);
        let mut out = self.comment_line().into_bytes();
        out.extend_from_slice(body);
        std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn comment_line(&self) -> String {
        format!(
            "# config_hash={} seed={}\n",
            self.run["config_hash"].as_str().unwrap_or(""),
            self.cfg.seed
        )
    }

    fn note(&mut self, path: PathBuf) {
        self.written.push(path);
    }
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write_assignment(art: &mut Artifacts, a: &GroupAssignment) -> Result<()> {
    let path = art.path("groups.jsonl");
    let mut out = Vec::new();
    writeln!(out, "{}", json!({ "run": art.run })).map_err(io_at(&path))?;
    a.write_jsonl(&mut out).map_err(io_at(&path))?;
    std::fs::write(&path, out).map_err(io_at(&path))?;
    art.note(path);
    Ok(())
}

fn cmd_ingest(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let corpus = cfg.load_corpus()?;
    let path = art.path("corpus.jsonl");
    corpus.write_jsonl(&path)?;
    art.note(path);
    let groups = cfg.group_config()?;
    let assignment = tag_by_rules(&corpus, &groups.groups)?;
    write_assignment(art, &assignment)?;
    let summary = corpus_summary(&corpus)?;
    let sources: Vec<Value> = cfg
        .corpus
        .iter()
        .map(|p| json!(p.display().to_string()))
        .collect();
    let record = json!({
        "n_articles": summary.n_articles,
        "mean_categories": summary.mean_categories,
        "mean_tokens": summary.mean_tokens,
        "sources": sources,
        "demo": cfg.demo.is_some(),
        "group_counts": assignment.counts(),
        "artifact": "corpus.jsonl",
    });
    art.json("ingest.json", &record)
}

fn cmd_match(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let (targets, candidates, exclusions) = cfg.load_split()?;
    let mut mcfg = cfg.matching.clone();
    for e in exclusions {
        if !mcfg.excluded_category_patterns.contains(&e) {
            mcfg.excluded_category_patterns.push(e);
        }
    }
    let outcome = run_match(&targets, &candidates, &mcfg)?;
    let path = art.path("matches.jsonl");
    outcome.result.save(&path, Some(&art.run))?;
    art.note(path);
    if let Some(model) = &outcome.model {
        art.json("propensity_model.json", &model.to_json())?;
    }
    Ok(())
}

fn cmd_evaluate(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let (targets, candidates, _) = cfg.load_split()?;
    let result = MatchResult::load(&cfg.matches_path())?;
    let lda = match &cfg.lda {
        Some(l) => Some(train_lda(&targets.union(&candidates)?, l)?),
        None => None,
    };
    let report = evaluate_match(&result, &targets, &candidates, true, &cfg.eval, lda.as_ref())?;
    let path = art.path("evaluation.json");
    save_report(&report, &path, Some(&art.run))?;
    art.note(path);
    let smd = SmdReport {
        avg_smd: report.avg_smd,
        pct_smd_gt_01: report.pct_smd_gt_01,
        n_infinite_smd: report.n_infinite_smd,
        per_category_smd: report.per_category_smd.clone(),
    };
    let mut body = Vec::new();
    write_smd_csv(&smd, &mut body).map_err(io_at(&cfg.out))?;
    art.csv("evaluation_smd.csv", &body)
}

fn cmd_tune(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let corpus = cfg.load_corpus()?;
    let report = tune_slope(&corpus, &cfg.tune)?;
    art.json("tune_slope.json", &report)?;
    let mut body = Vec::new();
    report.write_csv(&mut body).map_err(io_at(&cfg.out))?;
    art.csv("tune_slope.csv", &body)
}

fn cmd_simulate(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let spec = &cfg.simulation;
    let mut body = Vec::new();
    let name = match spec.regime {
        Regime::AttributeSpecific => {
            let (targets, candidates, exclusions) = cfg.load_split()?;
            let report = run_attribute_specific(&targets, &candidates, &spec.methods, &exclusions)?;
            report.write_csv(&mut body).map_err(io_at(&cfg.out))?;
            art.json("simulation_attribute_specific.json", &report)?;
            "simulation_attribute_specific.csv"
        }
        regime => {
            let corpus = cfg.load_corpus()?;
            let report = if regime == Regime::ArticleSampling {
                run_article_sampling(&corpus, spec)?
            } else {
                run_category_sampling(&corpus, spec)?
            };
            report.write_csv(&mut body).map_err(io_at(&cfg.out))?;
            if regime == Regime::ArticleSampling {
                art.json("simulation_article_sampling.json", &report)?;
                "simulation_article_sampling.csv"
            } else {
                art.json("simulation_category_sampling.json", &report)?;
                "simulation_category_sampling.csv"
            }
        }
    };
    art.csv(name, &body)
}

fn cmd_analyze(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let corpus = cfg.load_corpus()?;
    let groups = cfg.group_config()?;
    groups.validate()?;
    let assignment = tag_by_rules(&corpus, &groups.groups)?;
    write_assignment(art, &assignment)?;
    let dir = cfg.out.join("analysis");
    std::fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let outcomes = run_analysis_tagged(&corpus, &groups, &assignment, &cfg.matching, &cfg.analysis)?;
    let mut index = Vec::new();
    for o in &outcomes {
        let r = &o.report;
        let stem = format!("{}__{}", file_slug(&r.group), file_slug(&r.comparison));
        art.json(&format!("analysis/{stem}.json"), r)?;
        let mpath = dir.join(format!("{stem}__matches.jsonl"));
        o.matches.save(&mpath, Some(&art.run))?;
        art.note(mpath);
        for p in r.write_csvs(&dir)? {
            let body = std::fs::read(&p).map_err(io_at(&p))?;
            let rel = format!("analysis/{}", p.file_name().and_then(|f| f.to_str()).unwrap_or_default());
            art.csv(&rel, &body)?;
        }
        index.push(json!({
            "group": r.group,
            "comparison": r.comparison,
            "n_pairs": r.n_pairs,
            "n_discarded": r.n_discarded,
            "report": format!("analysis/{stem}.json"),
        }));
    }
    art.json("analysis.json", &json!({ "reports": index }))
}

fn cmd_log_odds(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let (targets, candidates, _) = cfg.load_split()?;
    let (t, c): (Vec<&Article>, Vec<&Article>) = match &cfg.matches {
        Some(p) => {
            let result = MatchResult::load(p)?;
            kept_pairs(&result, &targets, &candidates)?.into_iter().unzip()
        }
        None => (targets.iter().collect(), candidates.iter().collect()),
    };
    let plo = polar_log_odds(
        &token_counts(t.iter().copied()),
        &token_counts(c.iter().copied()),
        cfg.eval.prior_scale,
        cfg.eval.top_words,
    )?;
    let table = word_table_groups(&t, &c, cfg.analysis.word_table_k, cfg.eval.prior_scale)?;
    art.json(
        "log_odds.json",
        &json!({
            "matched": cfg.matches.is_some(),
            "plo_mean": plo.plo_mean,
            "plo_sd": plo.plo_sd,
            "table": table,
        }),
    )?;
    let mut body = Vec::new();
    writeln!(body, "side,rank,word,z,delta,count_target,count_comparison").map_err(io_at(&cfg.out))?;
    for (side, words) in [("target", &table.target), ("comparison", &table.comparison)] {
        for (i, w) in words.iter().enumerate() {
            writeln!(body, "{side},{},{},{},{},{},{}", i + 1, w.word, w.z, w.delta, w.count_t, w.count_c)
                .map_err(io_at(&cfg.out))?;
        }
    }
    art.csv("log_odds.csv", &body)
}

fn cmd_export_matrix(art: &mut Artifacts) -> Result<()> {
    let cfg = art.cfg;
    let corpus = cfg.load_corpus()?;
    let idf = IdfTable::fit(corpus.iter().map(|a| &a.categories))?;
    let path = art.path("category_matrix.tsv");
    let mut body = Vec::new();
    write_matrix(&corpus, &idf, &mut body).map_err(io_at(&path))?;
    let text = String::from_utf8(body).expect("matrix is utf-8");
    let (header, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let stamped = format!(
        "{header} config_hash={} seed={}\n{rest}",
        art.run["config_hash"].as_str().unwrap_or(""),
        cfg.seed
    );
    std::fs::write(&path, stamped).map_err(io_at(&path))?;
    art.note(path);
    Ok(())
}

/// Run one subcommand; returns the written artifact paths.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let problems = cfg.validate(cmd);
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let threads = cfg.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?;
    pool.install(|| {
        let mut art = Artifacts::new(cfg, cmd)?;
        match cmd {
            Command::Ingest => cmd_ingest(&mut art)?,
            Command::Match => cmd_match(&mut art)?,
            Command::TuneSlope => cmd_tune(&mut art)?,
            Command::Evaluate => cmd_evaluate(&mut art)?,
            Command::Simulate => cmd_simulate(&mut art)?,
            Command::Analyze => cmd_analyze(&mut art)?,
            Command::LogOdds => cmd_log_odds(&mut art)?,
            Command::ExportMatrix => cmd_export_matrix(&mut art)?,
        }
        Ok(art.written)
    })
}

/// Machine-readable failure record.
pub fn error_record(e: &Error) -> Value {
    let mut v = json!({
        "error": e.kind(),
        "exit_code": e.exit_code(),
        "message": e.to_string(),
    });
    if let Error::Config(ps) = e {
        v["problems"] = json!(ps);
    }
    v
}

/// Parse arguments, run, and return the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = build_config(&cli.global).and_then(|cfg| execute(cli.command.command(), &cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run_from(std::env::args_os())
}
