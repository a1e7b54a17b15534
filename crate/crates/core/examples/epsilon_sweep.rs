//! Config-driven sweep through the runner, as the CLI does it. Writes into
//! `out/epsilon_sweep` and prints the manifest checks.

use kirchhoff::config::ExperimentConfig;
use kirchhoff::runner::run_experiment;

const CONFIG: &str = r#"
experiment = "single_peak_sweep"
dim = 1
p = 4.0
v = "1 + x^2 + 0.1*x^3"
out = "out/epsilon_sweep"

[m]
kind = "affine"
a = 1.0
b = 1.0

[eps]
max = 0.05
factor = 0.5
count = 3
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let outcome = run_experiment(&cfg, None);
    for c in &outcome.manifest.checks {
        println!("{:<20} {}  {}", c.name, if c.pass { "ok" } else { "FAILED" }, c.detail);
    }
    println!("files: {:?} in {}", outcome.manifest.files, outcome.dir.display());
    print!("{}", std::fs::read_to_string(outcome.dir.join("sweep.csv"))?);
    std::process::exit(outcome.exit_code.into());
}
