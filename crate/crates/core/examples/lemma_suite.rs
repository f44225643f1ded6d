// Aggregated lemma checks with and without an injected fault.

use kamtori::config::Thresholds;
use kamtori::verify::{lemma_suite, SuiteScope};

pub fn run_example() -> kamtori::Result<()> {
    let th = Thresholds::default();
    let suite = lemma_suite(&SuiteScope::parse("default")?, &th)?;
    for c in &suite.checks {
        println!("{:22} {}  ({})", c.name, if c.pass { "pass" } else { "FAIL" }, c.threshold);
    }
    let mut scope = SuiteScope::parse("counting_lemmas")?;
    scope.inject_fault = true;
    let bad = lemma_suite(&scope, &th)?;
    println!(
        "with γ* inflated 16x: pass = {}, witness = {}",
        bad.pass,
        bad.checks[0].witness.as_deref().unwrap_or("none")
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
