use super::{Allocation, AllocationProblem};
use crate::error::Result;

/// Levels closer than this (relative to `max(1, |z|)`) count as equal.
const LEVEL_TOL: f64 = 1e-9;

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_TOL * b.abs().max(1.0)
}

/// Variance-minimizing grants by water filling.
///
/// Buckets of size `r_j` sit on bins of height `z_j`; `L` units of water are
/// poured so that the lowest surfaces rise together. Each pass takes the `k`
/// users on the lowest level and raises them by the smaller of the tightest
/// remaining bucket and the gap to the next level. A full bucket leaves the
/// active set; a closed gap merges two levels. If the budget runs out within
/// a pass it is split evenly over the `k` users. At most `2m` passes run.
pub fn water_fill(problem: &AllocationProblem) -> Result<Allocation> {
    problem.validate()?;
    problem.check_feasible()?;
    let m = problem.users();
    let mut x = vec![0.0; m];
    let mut level = problem.z.clone();
    let mut room = problem.r.clone();
    let mut budget = problem.budget.min(problem.total_request());
    let mut active: Vec<usize> = (0..m).filter(|&i| room[i] > 0.0).collect();

    while budget > 0.0 {
        active.retain(|&i| room[i] > 0.0);
        if active.is_empty() {
            break;
        }
        active.sort_by(|&i, &j| {
            level[i]
                .total_cmp(&level[j])
                .then(room[i].total_cmp(&room[j]))
                .then(i.cmp(&j))
        });
        let base = level[active[0]];
        let k = active
            .iter()
            .take_while(|&&i| same_level(level[i], base))
            .count();
        let lowest = &active[..k];
        let min_room = lowest
            .iter()
            .map(|&i| room[i])
            .fold(f64::INFINITY, f64::min);
        let next_level = active.get(k).map(|&i| level[i]);
        let gap = next_level.map_or(f64::INFINITY, |next| next - base);
        let step = min_room.min(gap);

        if budget <= step * k as f64 {
            let share = budget / k as f64;
            for &i in lowest {
                x[i] += share;
            }
            break;
        }

        let raised = match next_level {
            Some(next) if gap <= min_room => next,
            _ => base + step,
        };
        for &i in lowest {
            x[i] += step;
            room[i] -= step;
            level[i] = raised;
        }
        budget -= step * k as f64;
    }

    Ok(Allocation { x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{brute_force_oracle, kkt_certificate, objective};
    use proptest::prelude::*;

    fn solve(z: &[f64], r: &[f64], l: f64) -> Vec<f64> {
        let p = AllocationProblem::new(z.to_vec(), r.to_vec(), l).unwrap();
        water_fill(&p).unwrap().x
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(a, b)| (a - b).abs() <= tol)
    }

    #[test]
    fn equal_levels_split_evenly() {
        assert!(close(
            &solve(&[1.0; 3], &[5.0; 3], 6.0),
            &[2.0, 2.0, 2.0],
            1e-12
        ));
    }

    #[test]
    fn lower_bin_fills_first() {
        assert!(close(
            &solve(&[0.0, 3.0], &[10.0, 10.0], 4.0),
            &[3.5, 0.5],
            1e-12
        ));
    }

    #[test]
    fn small_bucket_caps_then_spills() {
        let x = solve(&[0.0, 0.0, 7.0], &[1.0, 6.0, 6.0], 5.0);
        assert!(close(&x, &[1.0, 4.0, 0.0], 1e-12), "{x:?}");
        let p = AllocationProblem::new(vec![0.0, 0.0, 7.0], vec![1.0, 6.0, 6.0], 5.0).unwrap();
        let oracle = brute_force_oracle(&p, 1e-3).unwrap();
        assert!(close(&oracle.x, &x, 1e-6), "{:?}", oracle.x);
        let cert = kkt_certificate(&p, &x).unwrap();
        assert!(cert.stationarity_residual <= 1e-9);
    }

    #[test]
    fn zero_budget_and_zero_requests() {
        assert_eq!(solve(&[0.0, 5.0], &[3.0, 3.0], 0.0), vec![0.0, 0.0]);
        assert_eq!(solve(&[0.0, 5.0], &[0.0, 3.0], 2.0), vec![0.0, 2.0]);
        assert_eq!(solve(&[4.0], &[3.0], 2.5), vec![2.5]);
    }

    #[test]
    fn full_budget_grants_every_request() {
        let x = solve(&[3.0, 0.0, 1.0], &[2.0, 1.0, 4.0], 7.0);
        assert!(close(&x, &[2.0, 1.0, 4.0], 1e-12));
    }

    #[test]
    fn infeasible_budget_is_rejected() {
        let p = AllocationProblem::new(vec![0.0, 0.0], vec![1.0, 1.0], 2.5).unwrap();
        assert!(water_fill(&p).is_err());
    }

    fn instance() -> impl Strategy<Value = AllocationProblem> {
        (1usize..=8)
            .prop_flat_map(|m| {
                (
                    prop::collection::vec(0.0f64..100.0, m),
                    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..100.0], m),
                    0.0f64..=1.0,
                )
            })
            .prop_map(|(z, r, u)| {
                let l = u * r.iter().sum::<f64>();
                AllocationProblem::new(z, r, l).unwrap()
            })
    }

    proptest! {
        #[test]
        fn feasible_and_certified(problem in instance()) {
            let x = water_fill(&problem).unwrap().x;
            let total: f64 = x.iter().sum();
            prop_assert!((total - problem.budget).abs() <= 1e-12 * problem.budget.max(1.0) * 10.0);
            for (xj, rj) in x.iter().zip(&problem.r) {
                prop_assert!(*xj >= 0.0 && *xj <= rj + 1e-12 * rj.max(1.0));
            }
            let cert = kkt_certificate(&problem, &x).unwrap();
            prop_assert!(cert.stationarity_residual <= 1e-9, "{cert:?}");
            prop_assert!(cert.complementarity_residual <= 1e-9, "{cert:?}");
        }

        #[test]
        fn permutation_equivariant(problem in instance(), shift in 0usize..8) {
            let m = problem.users();
            let perm: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
            let permuted = AllocationProblem::new(
                perm.iter().map(|&i| problem.z[i]).collect(),
                perm.iter().map(|&i| problem.r[i]).collect(),
                problem.budget,
            ).unwrap();
            let x = water_fill(&problem).unwrap().x;
            let y = water_fill(&permuted).unwrap().x;
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!((y[k] - x[i]).abs() <= 1e-9 * problem.budget.max(1.0));
            }
            let _ = objective(&problem, &x).unwrap();
        }
    }
}
