//! Runs the default configuration of every named experiment and prints its
//! verdict line; pass experiment names to run a subset.

use std::time::Instant;

use nonlocal_gamma::lab::{preset, run, ExperimentName};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let names: Vec<ExperimentName> = match std::env::args().skip(1).map(|a| a.parse()).collect::<Result<Vec<_>, _>>()? {
        v if v.is_empty() => ExperimentName::ALL.to_vec(),
        v => v,
    };
    for name in names {
        let t = Instant::now();
        let report = run(&preset(name))?;
        println!("{}  ({:.1} s)", report.verdict_line(), t.elapsed().as_secs_f64());
        for c in &report.checks {
            println!("    {:<28} {}  {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.detail);
        }
    }
    Ok(())
}
