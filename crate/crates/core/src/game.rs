//! Two-player region-sizing game between a URLLC agent and an eMBB agent.
//!
//! The URLLC agent picks the size `n1` of the common region, the eMBB agent
//! the size `n2` of the grant-based region, both out of `N` resource blocks.
//! Pure Nash equilibria are available two ways: a brute-force best-response
//! scan ([`enumerate_pure_nash`]) and the closed characterization
//! ([`solve_equilibrium_theorem`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reliability::{self, failure_prob_with_coefficient};

/// Largest `N` accepted by [`enumerate_pure_nash`].
pub const ENUMERATION_LIMIT: usize = 200;

/// Relative tolerance used when comparing payoffs for best responses.
const PAYOFF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// URLLC arrivals per mini slot, summed over all blocks.
    pub rho: f64,
    pub p: f64,
    pub tau: u32,
    /// Total number of resource blocks.
    pub n_blocks: usize,
    /// URLLC loss bound.
    pub epsilon: f64,
    /// Cost of using all `N` blocks.
    pub b: f64,
    /// Relative eMBB efficiency in the common region.
    pub a: f64,
    /// Bits per grant-based block per frame.
    pub c: f64,
    /// Total eMBB request in bits.
    pub r: f64,
}

impl GameParams {
    pub fn validate(&self) -> Result<()> {
        reliability::check_rate("rho", self.rho)?;
        reliability::check_probability(self.p)?;
        reliability::check_tau(self.tau)?;
        if self.n_blocks == 0 {
            return Err(Error::param("n_blocks", "need at least one resource block"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::param(
                "b",
                format!("must lie in (0, 1), got {}", self.b),
            ));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::param(
                "a",
                format!("must lie in (0, 1), got {}", self.a),
            ));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param(
                "c",
                format!("must be positive, got {}", self.c),
            ));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::param("r", format!("must be >= 0, got {}", self.r)));
        }
        Ok(())
    }

    /// `true` when `epsilon >= 1`, where even an empty common region meets the
    /// loss bound and `n1* = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.epsilon >= 1.0
    }

    fn check_action(&self, name: &'static str, n: usize) -> Result<()> {
        if n > self.n_blocks {
            return Err(Error::param(
                name,
                format!("action {n} exceeds N = {}", self.n_blocks),
            ));
        }
        Ok(())
    }
}

/// An action pair: common-region blocks `n1`, grant-based blocks `n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionProfile {
    pub n1: usize,
    pub n2: usize,
}

impl ActionProfile {
    pub fn new(n1: usize, n2: usize) -> Self {
        ActionProfile { n1, n2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EquilibriumCase {
    /// No common region size meets the loss bound.
    InfeasibleUrllc,
    /// `n2*(0) <= N - n1*` and `n2*(n1*) <= N - n1*`.
    Case1,
    /// `n2*(0) > N - n1*` and `n2*(n1*) <= N - n1*`.
    Case2,
    /// `n2*(0) > N - n1*` and `n2*(n1*) > N - n1*`.
    Case3,
}

impl EquilibriumCase {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumCase::InfeasibleUrllc => "INFEASIBLE_URLLC",
            EquilibriumCase::Case1 => "CASE1",
            EquilibriumCase::Case2 => "CASE2",
            EquilibriumCase::Case3 => "CASE3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub case: EquilibriumCase,
    pub n1_star: Option<usize>,
    pub equilibria: Vec<ActionProfile>,
    /// Socially optimal equilibria; the first entry is the default pick.
    pub socially_optimal: Vec<ActionProfile>,
}

impl EquilibriumResult {
    /// The equilibrium a region planner should deploy.
    pub fn preferred(&self) -> ActionProfile {
        self.socially_optimal[0]
    }
}

/// Bits eMBB users can move in one frame under `(n1, n2)`.
pub fn throughput(n1: usize, n2: usize, params: &GameParams) -> Result<f64> {
    params.check_action("n1", n1)?;
    params.check_action("n2", n2)?;
    Ok(throughput_unchecked(n1, n2, params))
}

fn throughput_unchecked(n1: usize, n2: usize, params: &GameParams) -> f64 {
    let n = params.n_blocks;
    let dedicated = n2.min(n - n1) as f64;
    let shared = n1.min(n - n2) as f64;
    (dedicated + params.a * shared) * params.c
}

/// Smallest `n2` whose throughput covers the request, or `N` if none does.
pub fn n2_star(n1: usize, params: &GameParams) -> Result<usize> {
    params.check_action("n1", n1)?;
    Ok(n2_star_unchecked(n1, params))
}

fn n2_star_unchecked(n1: usize, params: &GameParams) -> usize {
    (0..=params.n_blocks)
        .find(|&n2| throughput_unchecked(n1, n2, params) >= params.r)
        .unwrap_or(params.n_blocks)
}

/// Smallest common region meeting the loss bound, if any block count does.
pub fn n1_star(params: &GameParams) -> Result<Option<usize>> {
    let coefficient = reliability::light_traffic_coefficient(params.p, params.tau)?;
    Ok(n1_star_with(coefficient, params))
}

fn n1_star_with(coefficient: f64, params: &GameParams) -> Option<usize> {
    (0..=params.n_blocks)
        .find(|&k| failure_prob_with_coefficient(coefficient, params.rho, k) <= params.epsilon)
}

/// Game evaluated once per parameter set: the light-traffic coefficient and
/// the `n2*` table are computed up front.
#[derive(Debug, Clone)]
pub struct Game {
    params: GameParams,
    coefficient: f64,
    n2_star: Vec<usize>,
}

impl Game {
    pub fn new(params: GameParams) -> Result<Self> {
        params.validate()?;
        let coefficient = reliability::light_traffic_coefficient(params.p, params.tau)?;
        let n2_star = (0..=params.n_blocks)
            .map(|n1| n2_star_unchecked(n1, &params))
            .collect();
        Ok(Game {
            params,
            coefficient,
            n2_star,
        })
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    pub fn n2_star(&self, n1: usize) -> usize {
        self.n2_star[n1]
    }

    pub fn n1_star(&self) -> Option<usize> {
        n1_star_with(self.coefficient, &self.params)
    }

    /// Failure probability for a common region of `k` blocks.
    pub fn failure_prob(&self, k: usize) -> f64 {
        failure_prob_with_coefficient(self.coefficient, self.params.rho, k)
    }

    pub fn payoff_urllc(&self, profile: ActionProfile) -> f64 {
        let ActionProfile { n1, n2 } = profile;
        let n = self.params.n_blocks;
        let usable = n1.min(n - n2);
        let reward = if self.failure_prob(usable) <= self.params.epsilon && n1 + n2 <= n {
            1.0
        } else {
            0.0
        };
        reward - n1 as f64 / n as f64 * self.params.b
    }

    pub fn payoff_embb(&self, profile: ActionProfile) -> f64 {
        let ActionProfile { n1, n2 } = profile;
        let n = self.params.n_blocks as f64;
        let fits = if n1 + n2 <= self.params.n_blocks {
            1.0
        } else {
            0.0
        };
        let needed = self.n2_star[n1];
        let useful = if n2 > needed { needed } else { n2 };
        useful as f64 / n * fits - n2 as f64 / n * self.params.b
    }

    pub fn social_payoff(&self, profile: ActionProfile) -> f64 {
        self.payoff_urllc(profile) + self.payoff_embb(profile)
    }

    fn check_profile(&self, profile: ActionProfile) -> Result<()> {
        self.params.check_action("n1", profile.n1)?;
        self.params.check_action("n2", profile.n2)
    }

    /// Classifies the game and lists its pure equilibria from the closed-form
    /// characterization.
    pub fn solve(&self) -> EquilibriumResult {
        let n = self.params.n_blocks;
        let fallback = ActionProfile::new(0, self.n2_star[0]);
        let Some(n1s) = self.n1_star() else {
            return EquilibriumResult {
                case: EquilibriumCase::InfeasibleUrllc,
                n1_star: None,
                equilibria: vec![fallback],
                socially_optimal: vec![fallback],
            };
        };
        let room = n - n1s;
        let from_zero = self.n2_star[0];
        let from_star = self.n2_star[n1s];
        if from_zero <= room {
            // The remaining combination (from_star > room) cannot happen here:
            // the throughput at (n1*, N - n1*) dominates that at (0, N - n1*).
            let eq = ActionProfile::new(n1s, from_star);
            return EquilibriumResult {
                case: EquilibriumCase::Case1,
                n1_star: Some(n1s),
                equilibria: vec![eq],
                socially_optimal: vec![eq],
            };
        }
        let (case, urllc_eq, tie) = if from_star <= room {
            (
                EquilibriumCase::Case2,
                ActionProfile::new(n1s, from_star),
                n1s == n && from_zero - from_star == n,
            )
        } else {
            (
                EquilibriumCase::Case3,
                ActionProfile::new(n1s, room),
                n1s == n && from_zero == n,
            )
        };
        let socially_optimal = if tie {
            vec![urllc_eq, fallback]
        } else {
            vec![urllc_eq]
        };
        EquilibriumResult {
            case,
            n1_star: Some(n1s),
            equilibria: vec![urllc_eq, fallback],
            socially_optimal,
        }
    }

    /// All pure equilibria by checking weak best responses on the full grid.
    pub fn enumerate_pure_nash(&self) -> Result<Vec<ActionProfile>> {
        let n = self.params.n_blocks;
        if n > ENUMERATION_LIMIT {
            return Err(Error::TooLarge(format!(
                "brute-force enumeration needs N <= {ENUMERATION_LIMIT}, got {n}"
            )));
        }
        let best_urllc: Vec<f64> = (0..=n)
            .map(|n2| {
                (0..=n)
                    .map(|n1| self.payoff_urllc(ActionProfile::new(n1, n2)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let best_embb: Vec<f64> = (0..=n)
            .map(|n1| {
                (0..=n)
                    .map(|n2| self.payoff_embb(ActionProfile::new(n1, n2)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let attains = |value: f64, best: f64| value >= best - PAYOFF_TOL * best.abs().max(1.0);
        let mut equilibria = Vec::new();
        for (n1, &embb_best) in best_embb.iter().enumerate() {
            for (n2, &urllc_best) in best_urllc.iter().enumerate() {
                let profile = ActionProfile::new(n1, n2);
                if attains(self.payoff_urllc(profile), urllc_best)
                    && attains(self.payoff_embb(profile), embb_best)
                {
                    equilibria.push(profile);
                }
            }
        }
        Ok(equilibria)
    }

    /// Rows are `n1`, columns `n2`; each cell holds `(urllc, embb)` payoffs.
    pub fn payoff_matrix(&self) -> Vec<Vec<(f64, f64)>> {
        let n = self.params.n_blocks;
        (0..=n)
            .map(|n1| {
                (0..=n)
                    .map(|n2| {
                        let profile = ActionProfile::new(n1, n2);
                        (self.payoff_urllc(profile), self.payoff_embb(profile))
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn payoff_urllc(profile: ActionProfile, params: &GameParams) -> Result<f64> {
    let game = Game::new(*params)?;
    game.check_profile(profile)?;
    Ok(game.payoff_urllc(profile))
}

pub fn payoff_embb(profile: ActionProfile, params: &GameParams) -> Result<f64> {
    let game = Game::new(*params)?;
    game.check_profile(profile)?;
    Ok(game.payoff_embb(profile))
}

pub fn social_payoff(profile: ActionProfile, params: &GameParams) -> Result<f64> {
    let game = Game::new(*params)?;
    game.check_profile(profile)?;
    Ok(game.social_payoff(profile))
}

pub fn enumerate_pure_nash(params: &GameParams) -> Result<Vec<ActionProfile>> {
    Game::new(*params)?.enumerate_pure_nash()
}

pub fn solve_equilibrium_theorem(params: &GameParams) -> Result<EquilibriumResult> {
    Ok(Game::new(*params)?.solve())
}
