//! Runs the full acceptance battery and prints one pass/fail line per
//! criterion. Run with `--nocapture` to see the lines on success too.

use xnet::suite;

#[test]
fn acceptance_battery() {
    let results = suite::run_all();
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("criterion {} ({})", r.index, r.name))
        .collect();
    assert!(failed.is_empty(), "failed: {}", failed.join(", "));
}
