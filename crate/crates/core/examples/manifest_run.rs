//! Build a manifest in code, run it and print a summary of the report.
use cvf::cli::{parse_manifest, run, Overrides};

fn main() {
    let manifest = parse_manifest(
        r#"{
            "chart": {"builtin": "hyperbolic_ball", "dim": 2},
            "field": {"components": ["-x2", "x1"], "name": "rotation"},
            "analyses": ["all"],
            "seed": 5
        }"#,
    )
    .expect("valid manifest");
    let report = run(&manifest, &Overrides::default()).expect("runnable manifest");
    for a in &report.analyses {
        println!("{:<18} {:?}", a.analysis.name(), a.status);
    }
    println!("exit code {}", report.exit_code());
}
