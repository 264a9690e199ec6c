//! Text format for a single allocation problem.
//!
//! ```text
//! # budget for this frame
//! L 5
//! # id  z  r
//! u1 0 1
//! u2 0 6
//! u3 7 6
//! ```
//!
//! Blank lines and `#` comments are ignored. Exactly one `L` line is required;
//! user ids must be unique.

use anyhow::{bail, Context, Result};
use slicing_core::allocator::AllocationProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub ids: Vec<String>,
    pub problem: AllocationProblem,
}

fn number(token: &str, what: &str, line: usize) -> Result<f64> {
    let value: f64 = token
        .parse()
        .with_context(|| format!("line {line}: {what} `{token}` is not a number"))?;
    if !value.is_finite() {
        bail!("line {line}: {what} must be finite");
    }
    Ok(value)
}

pub fn parse(text: &str) -> Result<ProblemFile> {
    let mut budget = None;
    let mut ids: Vec<String> = Vec::new();
    let mut z = Vec::new();
    let mut r = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            ["L", value] => {
                if budget.is_some() {
                    bail!("line {line}: budget `L` given twice");
                }
                budget = Some(number(value, "budget", line)?);
            }
            [id, zv, rv] => {
                if ids.iter().any(|known| known == id) {
                    bail!("line {line}: duplicate user id `{id}`");
                }
                ids.push(id.to_string());
                z.push(number(zv, "z", line)?);
                r.push(number(rv, "r", line)?);
            }
            _ => bail!("line {line}: expected `L <budget>` or `<id> <z> <r>`, got `{content}`"),
        }
    }
    let budget = budget.context("missing budget line `L <value>`")?;
    let problem = AllocationProblem::new(z, r, budget)?;
    Ok(ProblemFile { ids, problem })
}
