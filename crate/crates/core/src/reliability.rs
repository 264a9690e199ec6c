//! Failure probability of a tagged URLLC packet under randomized persistent
//! retransmission.
//!
//! A packet is sent in its arrival mini slot and then, in each of the next
//! `tau - 1` mini slots, once more with probability `p`. It fails when every
//! copy it sends shares its (block, mini slot) with another URLLC transmission.
//! Background arrivals on one resource block are Poisson with rate `rho_tilde`
//! per mini slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::{self, Stream};

/// Trials per Monte Carlo chunk. Each chunk owns an RNG substream, so the
/// merged estimate does not depend on how chunks are scheduled.
const MC_CHUNK: u64 = 1 << 16;

/// Per-block retransmission parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetransParams {
    /// Background arrivals per mini slot on one resource block.
    pub rho_tilde: f64,
    /// Retransmission probability.
    pub p: f64,
    /// Delay budget in mini slots.
    pub tau: u32,
}

impl RetransParams {
    pub fn new(rho_tilde: f64, p: f64, tau: u32) -> Result<Self> {
        let params = RetransParams { rho_tilde, p, tau };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("rho_tilde", self.rho_tilde)?;
        check_probability(self.p)?;
        check_tau(self.tau)
    }
}

pub(crate) fn check_rate(name: &'static str, rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::param(
            name,
            format!("must be finite and >= 0, got {rate}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("must lie in [0, 1], got {p}")));
    }
    Ok(())
}

pub(crate) fn check_tau(tau: u32) -> Result<()> {
    if tau == 0 {
        return Err(Error::param("tau", "must be at least 1"));
    }
    Ok(())
}

/// Empirical failure probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub failures: u64,
    pub trials: u64,
    pub seed: u64,
}

impl MonteCarloEstimate {
    fn from_counts(failures: u64, trials: u64, seed: u64) -> Self {
        let estimate = failures as f64 / trials as f64;
        let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
        MonteCarloEstimate {
            estimate,
            std_error,
            failures,
            trials,
            seed,
        }
    }

    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn brackets(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.std_error
    }
}

/// Exact failure probability for `tau = 3` (four-exponential closed form).
///
/// The constant terms of the closed form cancel, so it is evaluated with
/// `expm1` to stay accurate at very small `rho_tilde`.
pub fn failure_prob_exact_tau3(params: RetransParams) -> Result<f64> {
    params.validate()?;
    if params.tau != 3 {
        return Err(Error::param(
            "tau",
            format!("closed form only holds for tau = 3, got {}", params.tau),
        ));
    }
    let RetransParams {
        rho_tilde: r, p, ..
    } = params;
    let q = 1.0 - p;
    let e1 = (-3.0 * r + 2.0 * q * r).exp_m1();
    let e2 = (-4.0 * r + q * r + q * q * r).exp_m1();
    let e3 = (-5.0 * r + 3.0 * q * r).exp_m1();
    let e4 = (-5.0 * r + q * r + q * q * r).exp_m1();
    let value = -(1.0 + 2.0 * p) * e1 + p * (1.0 + p) * e2 + p * e3 - p * p * e4;
    Ok(value.clamp(0.0, 1.0))
}

/// Multiplier of `rho_tilde` in the light-traffic approximation.
///
/// Sums the failure probability conditioned on a single background arrival in
/// each mini slot of `[-(tau-1), 0]`; arrivals after the tagged packet can
/// never block its first copy.
pub fn light_traffic_coefficient(p: f64, tau: u32) -> Result<f64> {
    check_probability(p)?;
    check_tau(tau)?;
    let q = 1.0 - p + p * p;
    let tau = tau as i32;
    let earlier: f64 = (-(tau - 1)..=-1)
        .map(|i| p * q.powi(tau + i - 1) * (1.0 - p).powi(-i))
        .sum();
    Ok(earlier + q.powi(tau - 1))
}

/// First-order (light traffic) failure probability, clamped to `[0, 1]`.
///
/// Only meaningful for `rho_tilde << 1`; the linear form exceeds one for heavy
/// load, where the clamp takes over.
pub fn failure_prob_light_traffic(params: RetransParams) -> Result<f64> {
    params.validate()?;
    let coefficient = light_traffic_coefficient(params.p, params.tau)?;
    Ok((coefficient * params.rho_tilde).clamp(0.0, 1.0))
}

/// Failure probability when the common region has `blocks` resource blocks and
/// URLLC traffic arrives at `rho` packets per mini slot in total.
///
/// An empty common region always fails.
pub fn failure_prob_per_region(rho: f64, p: f64, tau: u32, blocks: usize) -> Result<f64> {
    check_rate("rho", rho)?;
    let coefficient = light_traffic_coefficient(p, tau)?;
    Ok(failure_prob_with_coefficient(coefficient, rho, blocks))
}

pub(crate) fn failure_prob_with_coefficient(coefficient: f64, rho: f64, blocks: usize) -> f64 {
    if blocks == 0 {
        1.0
    } else {
        (coefficient * rho / blocks as f64).clamp(0.0, 1.0)
    }
}

/// Monte Carlo estimate of the tagged-packet failure probability.
pub fn failure_prob_monte_carlo(
    params: RetransParams,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    failure_prob_monte_carlo_with(params, trials, seed, Execution::default())
}

/// Like [`failure_prob_monte_carlo`] with an explicit execution strategy. The
/// result is identical for both strategies.
pub fn failure_prob_monte_carlo_with(
    params: RetransParams,
    trials: u64,
    seed: u64,
    execution: Execution,
) -> Result<MonteCarloEstimate> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let failures: u64 = execution
        .map_indexed(chunks as usize, |chunk| {
            let chunk = chunk as u64;
            let start = chunk * MC_CHUNK;
            let len = MC_CHUNK.min(trials - start);
            let mut rng = rng::substream(seed, Stream::MonteCarloChunk(chunk));
            let mut trial = TaggedTrial::new(params);
            (0..len).filter(|_| trial.run(&mut rng)).count() as u64
        })
        .into_iter()
        .sum();
    Ok(MonteCarloEstimate::from_counts(failures, trials, seed))
}

/// One tagged-packet experiment over the mini-slot window `[-(tau-1), tau-1]`.
struct TaggedTrial {
    params: RetransParams,
    /// Whether some background transmission occupies mini slot `i`, `0 <= i < tau`.
    busy: Vec<bool>,
    /// Whether the tagged packet transmits in mini slot `i`.
    tagged: Vec<bool>,
}

impl TaggedTrial {
    fn new(params: RetransParams) -> Self {
        let tau = params.tau as usize;
        TaggedTrial {
            params,
            busy: vec![false; tau],
            tagged: vec![false; tau],
        }
    }

    /// Returns `true` when the tagged packet fails.
    fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let tau = self.params.tau as i64;
        let window = 2 * tau - 1;
        // Splitting a Poisson total uniformly over the window gives independent
        // per-slot Poisson counts.
        let arrivals = rng::poisson(rng, self.params.rho_tilde * window as f64);
        if arrivals == 0 {
            return false;
        }
        let p = self.params.p;
        self.busy.fill(false);
        self.tagged[0] = true;
        for slot in 1..tau as usize {
            self.tagged[slot] = rng.gen_bool(p);
        }
        for _ in 0..arrivals {
            let j = rng.gen_range(0..window) - (tau - 1);
            if j >= 0 {
                self.busy[j as usize] = true;
            }
            for slot in (j + 1).max(0)..=(j + tau - 1).min(tau - 1) {
                if rng.gen_bool(p) {
                    self.busy[slot as usize] = true;
                }
            }
        }
        self.tagged
            .iter()
            .zip(&self.busy)
            .all(|(&sent, &busy)| !sent || busy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rho_tilde: f64, p: f64, tau: u32) -> RetransParams {
        RetransParams::new(rho_tilde, p, tau).unwrap()
    }

    /// Conditional failure probability given exactly one background packet in
    /// mini slot `offset`, by enumerating every coin outcome.
    fn single_arrival_failure(p: f64, tau: u32, offset: i64) -> f64 {
        let tau = tau as i64;
        let coins = (tau - 1) as u32;
        let mut total = 0.0;
        for tagged_mask in 0u32..(1 << coins) {
            for other_mask in 0u32..(1 << coins) {
                let weight = |mask: u32| {
                    (0..coins).fold(1.0, |w, b| {
                        if mask >> b & 1 == 1 {
                            w * p
                        } else {
                            w * (1.0 - p)
                        }
                    })
                };
                let w = weight(tagged_mask) * weight(other_mask);
                if w == 0.0 {
                    continue;
                }
                let other_sends = |slot: i64| {
                    slot == offset
                        || (slot > offset
                            && slot - offset < tau
                            && other_mask >> (slot - offset - 1) & 1 == 1)
                };
                let failed = (0..tau).all(|slot| {
                    let sent = slot == 0 || tagged_mask >> (slot - 1) & 1 == 1;
                    !sent || other_sends(slot)
                });
                if failed {
                    total += w;
                }
            }
        }
        total
    }

    fn enumerated_coefficient(p: f64, tau: u32) -> f64 {
        let t = tau as i64;
        (-(t - 1)..t)
            .map(|i| single_arrival_failure(p, tau, i))
            .sum()
    }

    #[test]
    fn exact_tau3_vanishes_without_traffic() {
        assert_eq!(failure_prob_exact_tau3(params(0.0, 0.3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn exact_tau3_slope_at_origin() {
        for p in [0.0, 0.1, 0.3, 0.7, 1.0] {
            let h = 1e-7;
            let slope = failure_prob_exact_tau3(params(h, p, 3)).unwrap() / h;
            let expected = 1.0 - p * p + p * p * p;
            assert!(
                (slope - expected).abs() < 1e-5,
                "p={p}: {slope} vs {expected}"
            );
        }
    }

    #[test]
    fn exact_tau3_rejects_other_tau() {
        assert!(failure_prob_exact_tau3(params(0.1, 0.3, 4)).is_err());
        assert!(RetransParams::new(0.1, 1.2, 3).is_err());
        assert!(RetransParams::new(-0.1, 0.2, 3).is_err());
        assert!(RetransParams::new(0.1, 0.2, 0).is_err());
    }

    #[test]
    fn light_traffic_edge_probabilities() {
        for tau in [1, 2, 3, 8, 12] {
            assert!(
                (failure_prob_light_traffic(params(0.01, 0.0, tau)).unwrap() - 0.01).abs() < 1e-15
            );
            assert!(
                (failure_prob_light_traffic(params(0.01, 1.0, tau)).unwrap() - 0.01).abs() < 1e-15
            );
        }
        assert_eq!(light_traffic_coefficient(0.0, 8).unwrap(), 1.0);
        assert_eq!(light_traffic_coefficient(0.4, 1).unwrap(), 1.0);
    }

    #[test]
    fn coefficient_tau3_closed_form() {
        let c = light_traffic_coefficient(0.3, 3).unwrap();
        assert!((c - 0.937).abs() < 1e-12);
        let lt = failure_prob_light_traffic(params(0.02, 0.3, 3)).unwrap();
        assert!((lt - 0.937 * 0.02).abs() < 1e-15);
    }

    #[test]
    fn coefficient_matches_coin_enumeration() {
        for tau in [1, 2, 3, 5, 8] {
            for p in [0.0, 0.15, 0.3, 0.5, 0.9, 1.0] {
                let direct = light_traffic_coefficient(p, tau).unwrap();
                let enumerated = enumerated_coefficient(p, tau);
                assert!(
                    (direct - enumerated).abs() < 1e-12,
                    "p={p} tau={tau}: {direct} vs {enumerated}"
                );
            }
        }
        // Frozen from the enumeration above.
        let frozen = 0.447_970_266_205_299_7;
        assert!((light_traffic_coefficient(0.3, 8).unwrap() - frozen).abs() < 1e-12);
    }

    #[test]
    fn per_region_edges() {
        assert_eq!(failure_prob_per_region(0.1, 0.3, 8, 0).unwrap(), 1.0);
        assert_eq!(failure_prob_per_region(0.0, 0.3, 8, 5).unwrap(), 0.0);
        let v = failure_prob_per_region(6.5e-4, 0.3, 8, 30).unwrap();
        let expected = 0.447_970_266_205_299_7 * 6.5e-4 / 30.0;
        assert!((v - expected).abs() < 1e-18);
        assert!(v <= 1e-5);
        assert_eq!(failure_prob_per_region(50.0, 0.3, 8, 1).unwrap(), 1.0);
        assert!(failure_prob_per_region(-1.0, 0.3, 8, 1).is_err());
    }

    #[test]
    fn light_and_exact_agree_to_second_order() {
        for p in [0.1, 0.3, 0.7] {
            for i in 1..=50 {
                let r = i as f64 * 0.001;
                let exact = failure_prob_exact_tau3(params(r, p, 3)).unwrap();
                let light = failure_prob_light_traffic(params(r, p, 3)).unwrap();
                assert!((exact - light).abs() / (r * r) < 10.0);
            }
        }
    }

    #[test]
    fn monte_carlo_zero_traffic() {
        let est = failure_prob_monte_carlo(params(0.0, 0.5, 4), 10_000, 3).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.std_error, 0.0);
        assert!(failure_prob_monte_carlo(params(0.1, 0.5, 4), 0, 3).is_err());
    }

    #[test]
    fn monte_carlo_tau1_is_slot_zero_collision() {
        let r = 0.2;
        let est = failure_prob_monte_carlo(params(r, 0.5, 1), 400_000, 9).unwrap();
        let expected = 1.0 - (-r).exp();
        assert!(est.brackets(expected, 4.0), "{est:?} vs {expected}");
    }

    #[test]
    fn monte_carlo_is_deterministic_and_mode_independent() {
        let p = params(0.05, 0.3, 8);
        let a = failure_prob_monte_carlo_with(p, 300_000, 42, Execution::Sequential).unwrap();
        let b = failure_prob_monte_carlo_with(p, 300_000, 42, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_brackets_exact_over_seeds() {
        let p = params(0.1, 0.3, 3);
        let exact = failure_prob_exact_tau3(p).unwrap();
        let hits = (0..100u64)
            .filter(|&seed| {
                failure_prob_monte_carlo(p, 100_000, seed)
                    .unwrap()
                    .brackets(exact, 3.0)
            })
            .count();
        assert!(hits >= 99, "only {hits}/100 seeds bracket the exact value");
    }
}
