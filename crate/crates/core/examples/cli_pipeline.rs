//! Drive the `catmatch` command line in-process: write a config, then ingest,
//! match and evaluate into a temporary output directory.

use catmatch::cli::run_from;

fn main() {
    let dir = std::env::temp_dir().join("catmatch_cli_pipeline");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let config = dir.join("run.json");
    let body = serde_json::json!({
        "demo": {"n_articles": 1500},
        "target_group": "African American",
        "pool": "unmarked American",
        "match": {"method": "pivot_slope"},
        "seed": 13
    });
    std::fs::write(&config, body.to_string()).expect("write config");

    for cmd in ["ingest", "match", "evaluate"] {
        let code = run_from([
            "catmatch",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            cmd,
        ]);
        println!("{cmd}: exit {code}");
        if code != 0 {
            std::process::exit(code);
        }
    }
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .expect("list")
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("artifacts in {}: {}", dir.display(), files.join(", "));
}
