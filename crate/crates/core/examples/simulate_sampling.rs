//! Both sampling simulations on a synthetic corpus, printed as CSV.

use catmatch::corpus::{generate_synthetic, SyntheticSpec};
use catmatch::matchers::{MatchConfig, Method};
use catmatch::simulate::{run_article_sampling, run_category_sampling, Regime, SimulationSpec};

fn main() -> catmatch::Result<()> {
    let corpus = generate_synthetic(&SyntheticSpec::confounded(3000), 9)?;
    let methods: Vec<MatchConfig> = [Method::Number, Method::Percent, Method::Tfidf, Method::PivotSlope]
        .into_iter()
        .map(MatchConfig::new)
        .collect();

    let article = SimulationSpec {
        regime: Regime::ArticleSampling,
        n_simulations: 5,
        sample_size: Some(300),
        seed: 9,
        methods: methods.clone(),
        ..Default::default()
    };
    let category = SimulationSpec {
        regime: Regime::CategorySampling,
        n_simulations: 5,
        sample_size: Some(300),
        min_category_size: 300,
        seed: 9,
        methods,
        ..Default::default()
    };
    let mut out = std::io::stdout().lock();
    for (name, report) in [
        ("article sampling", run_article_sampling(&corpus, &article)?),
        ("category sampling", run_category_sampling(&corpus, &category)?),
    ] {
        println!("# {name}");
        report.write_csv(&mut out).expect("stdout");
    }
    Ok(())
}
