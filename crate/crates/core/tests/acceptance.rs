use std::io::Write;

use profilr_core::suite;

// Direct writes to stdout bypass the test harness capture, so the verdict
// lines show up in a plain `cargo test` run too.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance_criteria() {
    say("");
    let results = suite::run_all(|r| say(&r.line()));
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    say(&format!("{}/{} criteria passed", results.len() - failed.len(), results.len()));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
