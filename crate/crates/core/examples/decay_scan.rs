//! A reduced decay scan through the experiment harness.
//!
//! Writes its artifacts under the system temp directory and prints the fits
//! and checks from the manifest. The full-size run is `dnls-lab decay-scan`.

use dnls_lab::harness::{run_experiment, ExperimentConfig, Overrides};

const CONFIG: &str = r#"
kind = "decay_scan"
half_width = 512.0
n = 8192
dt = 2e-3
t_end = 25.0
snapshot_every = 0.5
epsilon = 0.05
epsilon_ladder = [0.025, 0.05]
fit_t_min = 5.0
"#;

fn main() -> dnls_lab::Result<()> {
    let out = std::env::temp_dir().join("dnls-lab-decay-scan");
    let overrides = Overrides {
        output_dir: Some(out.clone()),
        ..Default::default()
    };
    let cfg = ExperimentConfig::from_toml_str(CONFIG, &overrides)?;
    println!("config hash {}", cfg.hash());
    let manifest = run_experiment(&cfg)?;
    for f in &manifest.fits {
        println!("{:28} exponent {:+.4} r² {:.5}", f.quantity, f.exponent, f.r_squared);
    }
    for c in &manifest.checks {
        println!(
            "{} {:40} {:.4e} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.condition
        );
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
