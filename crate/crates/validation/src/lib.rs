//! Reporting helpers for the `acceptance` test target, which checks
//! desk-scale reproductions of the library's headline numbers and prints one
//! PASS/FAIL line per criterion.

/// Result of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        format!("{tag} [{}] {}: {}", self.id, self.title, self.detail)
    }
}

/// Prints every outcome and returns the number of failures.
pub fn summarize(outcomes: &[Outcome]) -> usize {
    for o in outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    failed
}
