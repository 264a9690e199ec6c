use super::{objective_unchecked, Allocation, AllocationProblem};
use crate::error::{Error, Result};

/// Largest instance [`brute_force_oracle`] accepts.
pub const ORACLE_MAX_USERS: usize = 6;

/// Grid points the exhaustive phase may visit.
const MAX_GRID_POINTS: f64 = 5.0e7;

/// Smallest transfer the refinement phase tries.
const MIN_TRANSFER: f64 = 1e-9;

/// Independent optimizer for small instances: exhaustive search over the
/// feasible set sampled at `grid_step`, then pairwise transfers of a shrinking
/// amount while any transfer lowers the objective.
pub fn brute_force_oracle(problem: &AllocationProblem, grid_step: f64) -> Result<Allocation> {
    problem.validate()?;
    problem.check_feasible()?;
    if problem.users() > ORACLE_MAX_USERS {
        return Err(Error::TooLarge(format!(
            "oracle handles at most {ORACLE_MAX_USERS} users, got {}",
            problem.users()
        )));
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::param("grid_step", "must be positive"));
    }
    let m = problem.users();
    let budget = problem.budget.min(problem.total_request());
    let free: Vec<usize> = (0..m).filter(|&i| problem.r[i] > 0.0).collect();
    let mut best = greedy_start(problem, budget);
    if free.is_empty() {
        return Ok(Allocation { x: best });
    }
    let mut best_value = objective_unchecked(problem, &best);

    // Every free user but the last walks its grid; the last absorbs the rest.
    let (&last, walkers) = free.split_last().expect("non-empty");
    let grids: Vec<Vec<f64>> = walkers
        .iter()
        .map(|&i| grid(problem.r[i], grid_step))
        .collect();
    let points: f64 = grids.iter().map(|g| g.len() as f64).product();
    if points > MAX_GRID_POINTS {
        return Err(Error::TooLarge(format!(
            "{points} grid points; use a coarser grid_step"
        )));
    }
    let mut cursor = vec![0usize; grids.len()];
    let mut x = vec![0.0; m];
    loop {
        let mut used = 0.0;
        for (d, &i) in walkers.iter().enumerate() {
            x[i] = grids[d][cursor[d]];
            used += x[i];
        }
        let rest = budget - used;
        if rest >= 0.0 && rest <= problem.r[last] {
            x[last] = rest;
            let value = objective_unchecked(problem, &x);
            if value < best_value {
                best_value = value;
                best.copy_from_slice(&x);
            }
        }
        // Odometer increment.
        let mut d = 0;
        loop {
            if d == cursor.len() {
                return Ok(Allocation {
                    x: refine(problem, best, grid_step, &free),
                });
            }
            cursor[d] += 1;
            if cursor[d] < grids[d].len() {
                break;
            }
            cursor[d] = 0;
            d += 1;
        }
    }
}

fn grid(cap: f64, step: f64) -> Vec<f64> {
    let mut points: Vec<f64> = (0..)
        .map(|k| k as f64 * step)
        .take_while(|&v| v < cap)
        .collect();
    points.push(cap);
    points
}

/// Feasible starting point: fill users in index order.
fn greedy_start(problem: &AllocationProblem, budget: f64) -> Vec<f64> {
    let mut left = budget;
    problem
        .r
        .iter()
        .map(|&r| {
            let take = r.min(left);
            left -= take;
            take
        })
        .collect()
}

fn refine(problem: &AllocationProblem, mut x: Vec<f64>, start: f64, free: &[usize]) -> Vec<f64> {
    let eta = problem.targets();
    let r = &problem.r;
    let mut delta = start;
    while delta >= MIN_TRANSFER {
        let mut improved = true;
        while improved {
            improved = false;
            for &i in free {
                for &j in free {
                    if i == j {
                        continue;
                    }
                    // Move t from j to i.
                    let t = delta.min(x[j]).min(r[i] - x[i]);
                    if t <= 0.0 {
                        continue;
                    }
                    let change = 2.0 * t * ((x[i] - eta[i]) - (x[j] - eta[j])) + 2.0 * t * t;
                    if change < 0.0 {
                        x[i] += t;
                        x[j] -= t;
                        improved = true;
                    }
                }
            }
        }
        delta *= 0.5;
    }
    x
}
