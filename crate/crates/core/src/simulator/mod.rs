//! Frame-by-frame simulation of the uplink.
//!
//! Each frame: eMBB users receive new bits into finite buffers, request their
//! whole backlog, and are granted bits by the configured allocator out of the
//! frame budget `min((n2 + a*n1)*c, sum r)`. Meanwhile URLLC packets contend
//! grant-free, mini slot by mini slot, in the `n1` common-region blocks.

mod config;
mod urllc;

pub use config::{GameRequest, OverflowPolicy, SimConfig, SplitStrategy, CONFIG_FIELDS, MAX_TAU};
pub use urllc::{Outcome, UrllcPacketRecord};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{allocate_baseline, AllocationProblem};
use crate::error::{Error, Result};
use crate::game::{ActionProfile, EquilibriumResult, Game};
use crate::metrics;
use crate::rng::{substream, Stream};
use urllc::UrllcProcess;

/// Buffer and accounting state of one eMBB user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbbUserState {
    pub buffer_bits: f64,
    /// Cumulative granted bits `z`.
    pub granted_bits: f64,
    pub arrived_bits: f64,
    pub lost_bits: f64,
    /// Arrivals with a non-zero size.
    pub arrivals: u64,
    /// Arrivals that lost at least one bit to overflow.
    pub arrivals_hit: u64,
}

/// What happened in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEvents {
    pub frame: u64,
    pub profile: ActionProfile,
    pub embb_arrived_bits: f64,
    pub embb_lost_bits: f64,
    pub requests: Vec<f64>,
    pub budget: f64,
    pub grants: Vec<f64>,
    pub urllc_arrived: u64,
    pub urllc_lost: u64,
    /// URLLC packets whose window closed during this frame.
    pub urllc_packets: Vec<UrllcPacketRecord>,
    pub social_payoff: f64,
}

/// Aggregate results of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub allocator: String,
    pub strategy: String,
    pub seed: u64,
    pub frames: u64,
    pub mean_n1: f64,
    pub mean_n2: f64,
    pub urllc_arrived: u64,
    pub urllc_lost: u64,
    pub urllc_loss_prob: f64,
    pub embb_arrived_bits: f64,
    pub embb_lost_bits: f64,
    pub embb_loss_prob: f64,
    pub embb_arrivals: u64,
    pub embb_arrivals_hit: u64,
    pub embb_arrival_loss_prob: f64,
    /// Sample variance of the final cumulative grants.
    pub sample_variance: f64,
    /// Jain's index of the final cumulative grants.
    pub jain_index: f64,
    pub social_payoff: f64,
    /// Case of the statically solved game.
    pub equilibrium_case: String,
    pub n1_star: Option<usize>,
}

/// Metric names in CSV column order.
pub const METRIC_FIELDS: [&str; 16] = [
    "mean_n1",
    "mean_n2",
    "urllc_arrived",
    "urllc_lost",
    "urllc_loss_prob",
    "embb_arrived_bits",
    "embb_lost_bits",
    "embb_loss_prob",
    "embb_arrivals",
    "embb_arrivals_hit",
    "embb_arrival_loss_prob",
    "sample_variance",
    "jain_index",
    "social_payoff",
    "equilibrium_case",
    "n1_star",
];

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Picks the region split for `strategy` given the solved game.
pub fn choose_split<R: Rng + ?Sized>(
    strategy: SplitStrategy,
    game: &Game,
    solution: &EquilibriumResult,
    fixed: ActionProfile,
    rng: &mut R,
) -> Result<ActionProfile> {
    let n = game.params().n_blocks;
    Ok(match strategy {
        SplitStrategy::SocialOpt => solution.preferred(),
        SplitStrategy::NonoptNash => ActionProfile::new(0, game.n2_star(0)),
        SplitStrategy::N1starPlus1 => {
            let n1s = solution.n1_star.ok_or_else(|| {
                Error::config(
                    "strategy",
                    "n1star_plus1 needs a feasible n1*, but no region size meets epsilon",
                )
            })?;
            if n1s + 1 > n {
                return Err(Error::config(
                    "strategy",
                    format!("n1* + 1 = {} exceeds N = {n}", n1s + 1),
                ));
            }
            ActionProfile::new(n1s + 1, n - n1s - 1)
        }
        SplitStrategy::Nminus1_1 => ActionProfile::new(n - 1, 1),
        SplitStrategy::Random => {
            let n1 = rng.gen_range(0..=n);
            let n2 = rng.gen_range(0..=n - n1);
            ActionProfile::new(n1, n2)
        }
        SplitStrategy::Fixed => fixed,
    })
}

/// Simulation state advanced one frame at a time.
#[derive(Debug)]
pub struct Simulator {
    config: SimConfig,
    game: Game,
    solution: EquilibriumResult,
    users: Vec<EmbbUserState>,
    urllc: UrllcProcess,
    embb_rng: ChaCha8Rng,
    profile_rng: ChaCha8Rng,
    order_rng: ChaCha8Rng,
    frame: u64,
    n1_sum: f64,
    n2_sum: f64,
    payoff_sum: f64,
    /// `n1` of the frame currently in progress, for URLLC draining.
    last_n1: usize,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let game = Game::new(config.game_params(config.static_request()))?;
        let solution = game.solve();
        let seed = config.seed;
        let urllc = UrllcProcess::new(
            config.rho,
            config.p,
            config.tau,
            substream(seed, Stream::UrllcArrivals),
            substream(seed, Stream::RetransmitCoins),
        );
        let sim = Simulator {
            users: vec![EmbbUserState::default(); config.users],
            game,
            solution,
            urllc,
            embb_rng: substream(seed, Stream::EmbbArrivals),
            profile_rng: substream(seed, Stream::RandomProfile),
            order_rng: substream(seed, Stream::RandomOrderAllocator),
            frame: 0,
            n1_sum: 0.0,
            n2_sum: 0.0,
            payoff_sum: 0.0,
            last_n1: 0,
            config,
        };
        // Surface strategy errors (e.g. a missing n1*) before any frame runs.
        if sim.config.strategy != SplitStrategy::Random {
            let fixed = sim.fixed_profile();
            choose_split(
                sim.config.strategy,
                &sim.game,
                &sim.solution,
                fixed,
                &mut sim.profile_rng.clone(),
            )?;
        }
        Ok(sim)
    }

    fn fixed_profile(&self) -> ActionProfile {
        ActionProfile::new(self.config.fixed_n1, self.config.fixed_n2)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn equilibrium(&self) -> &EquilibriumResult {
        &self.solution
    }

    pub fn users(&self) -> &[EmbbUserState] {
        &self.users
    }

    pub fn frames_done(&self) -> u64 {
        self.frame
    }

    /// Cumulative granted bits per user.
    pub fn granted(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.granted_bits).collect()
    }

    /// Runs one frame and reports its events.
    pub fn step_frame(&mut self) -> Result<FrameEvents> {
        let cfg = &self.config;
        let max = cfg.embb_arrival_max;
        let capacity = cfg.buffer_bits;
        let mut arrived_total = 0.0;
        let mut lost_total = 0.0;
        for user in &mut self.users {
            let bits = self.embb_rng.gen_range(0..=max) as f64;
            if bits == 0.0 {
                continue;
            }
            let space = capacity - user.buffer_bits;
            let lost = if bits <= space {
                0.0
            } else {
                match cfg.overflow {
                    OverflowPolicy::Truncate => bits - space,
                    OverflowPolicy::DropArrival => bits,
                }
            };
            user.buffer_bits += bits - lost;
            user.arrived_bits += bits;
            user.lost_bits += lost;
            user.arrivals += 1;
            if lost > 0.0 {
                user.arrivals_hit += 1;
            }
            arrived_total += bits;
            lost_total += lost;
        }
        let requests: Vec<f64> = self.users.iter().map(|u| u.buffer_bits).collect();
        let requested: f64 = requests.iter().sum();

        let per_frame_game;
        let (game, solution) = match cfg.game_request {
            GameRequest::Static => (&self.game, &self.solution),
            GameRequest::PerFrame => {
                let game = Game::new(cfg.game_params(requested))?;
                let solution = game.solve();
                per_frame_game = (game, solution);
                (&per_frame_game.0, &per_frame_game.1)
            }
        };
        let profile = choose_split(
            cfg.strategy,
            game,
            solution,
            ActionProfile::new(cfg.fixed_n1, cfg.fixed_n2),
            &mut self.profile_rng,
        )?;
        let social_payoff = game.social_payoff(profile);

        let capacity_bits = (profile.n2 as f64 + cfg.a * profile.n1 as f64) * cfg.c;
        let budget = capacity_bits.min(requested);
        let problem = AllocationProblem {
            z: self.granted(),
            r: requests.clone(),
            budget,
        };
        let grants = allocate_baseline(cfg.allocator, &problem, &mut self.order_rng)?.x;
        for (user, &x) in self.users.iter_mut().zip(&grants) {
            // Grants never exceed the request; clamp rounding dust.
            let x = x.min(user.buffer_bits).max(0.0);
            user.buffer_bits -= x;
            user.granted_bits += x;
        }

        let arrived_before = self.urllc.arrived;
        let lost_before = self.urllc.lost;
        let mut urllc_packets = Vec::new();
        for _ in 0..cfg.minislots_per_frame() {
            self.urllc.step(profile.n1, true, &mut urllc_packets);
        }
        self.last_n1 = profile.n1;

        self.frame += 1;
        self.n1_sum += profile.n1 as f64;
        self.n2_sum += profile.n2 as f64;
        self.payoff_sum += social_payoff;

        Ok(FrameEvents {
            frame: self.frame - 1,
            profile,
            embb_arrived_bits: arrived_total,
            embb_lost_bits: lost_total,
            requests,
            budget,
            grants,
            urllc_arrived: self.urllc.arrived - arrived_before,
            urllc_lost: self.urllc.lost - lost_before,
            urllc_packets,
            social_payoff,
        })
    }

    /// Lets URLLC packets still inside their window finish, without new
    /// arrivals, so every arrived packet has an outcome.
    pub fn drain_urllc(&mut self) -> Vec<UrllcPacketRecord> {
        let mut finished = Vec::new();
        while self.urllc.has_live_packets() {
            self.urllc.step(self.last_n1, false, &mut finished);
        }
        finished
    }

    /// Current metrics. Call [`Simulator::drain_urllc`] first for final
    /// URLLC counts.
    pub fn report(&self) -> MetricsReport {
        let frames = self.frame;
        let z = self.granted();
        let arrived: f64 = self.users.iter().map(|u| u.arrived_bits).sum();
        let lost: f64 = self.users.iter().map(|u| u.lost_bits).sum();
        let arrivals: u64 = self.users.iter().map(|u| u.arrivals).sum();
        let hit: u64 = self.users.iter().map(|u| u.arrivals_hit).sum();
        MetricsReport {
            allocator: self.config.allocator.to_string(),
            strategy: self.config.strategy.to_string(),
            seed: self.config.seed,
            frames,
            mean_n1: ratio(self.n1_sum, frames as f64),
            mean_n2: ratio(self.n2_sum, frames as f64),
            urllc_arrived: self.urllc.arrived,
            urllc_lost: self.urllc.lost,
            urllc_loss_prob: ratio(self.urllc.lost as f64, self.urllc.arrived as f64),
            embb_arrived_bits: arrived,
            embb_lost_bits: lost,
            embb_loss_prob: ratio(lost, arrived),
            embb_arrivals: arrivals,
            embb_arrivals_hit: hit,
            embb_arrival_loss_prob: ratio(hit as f64, arrivals as f64),
            sample_variance: if z.len() < 2 {
                0.0
            } else {
                metrics::sample_variance(&z).unwrap_or(0.0)
            },
            jain_index: metrics::jain_index(&z).unwrap_or(1.0),
            social_payoff: ratio(self.payoff_sum, frames as f64),
            equilibrium_case: self.solution.case.as_str().to_string(),
            n1_star: self.solution.n1_star,
        }
    }

    /// Current URLLC mini-slot clock.
    pub fn urllc_clock(&self) -> u64 {
        self.urllc.now()
    }
}

/// Runs `config.frames` frames and returns the final metrics.
pub fn run_simulation(config: &SimConfig) -> Result<MetricsReport> {
    run_simulation_with(config, |_| Ok(()))
}

/// Like [`run_simulation`], handing every frame's events to `observe`.
pub fn run_simulation_with<F>(config: &SimConfig, mut observe: F) -> Result<MetricsReport>
where
    F: FnMut(&FrameEvents) -> Result<()>,
{
    let mut sim = Simulator::new(config.clone())?;
    for _ in 0..config.frames {
        let events = sim.step_frame()?;
        observe(&events)?;
    }
    sim.drain_urllc();
    Ok(sim.report())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(frames: u64) -> SimConfig {
        SimConfig {
            frames,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_frames_gives_empty_report() {
        let report = run_simulation(&small(0)).unwrap();
        assert_eq!(report.frames, 0);
        assert_eq!(report.urllc_arrived, 0);
        assert_eq!(report.embb_arrived_bits, 0.0);
        assert_eq!(report.embb_loss_prob, 0.0);
        assert_eq!(report.sample_variance, 0.0);
        assert_eq!(report.jain_index, 1.0);
    }

    #[test]
    fn identical_seeds_identical_reports() {
        let cfg = SimConfig {
            strategy: SplitStrategy::Random,
            allocator: crate::allocator::AllocatorKind::RandomOrder,
            ..small(2000)
        };
        assert_eq!(run_simulation(&cfg).unwrap(), run_simulation(&cfg).unwrap());
        let other = SimConfig {
            seed: 2,
            ..cfg.clone()
        };
        assert_ne!(
            run_simulation(&cfg).unwrap(),
            run_simulation(&other).unwrap()
        );
    }

    #[test]
    fn no_urllc_traffic_no_urllc_loss() {
        let cfg = SimConfig {
            rho: 0.0,
            ..small(500)
        };
        let report = run_simulation(&cfg).unwrap();
        assert_eq!(report.urllc_arrived, 0);
        assert_eq!(report.urllc_lost, 0);
    }

    #[test]
    fn no_embb_traffic() {
        let cfg = SimConfig {
            embb_arrival_max: 0,
            ..small(300)
        };
        let report = run_simulation(&cfg).unwrap();
        assert_eq!(report.embb_lost_bits, 0.0);
        assert_eq!(report.embb_loss_prob, 0.0);
        assert_eq!(report.sample_variance, 0.0);
    }

    #[test]
    fn empty_common_region_loses_every_urllc_packet() {
        let cfg = SimConfig {
            rho: 0.05,
            strategy: SplitStrategy::NonoptNash,
            ..small(200)
        };
        let report = run_simulation(&cfg).unwrap();
        assert!(report.urllc_arrived > 0);
        assert_eq!(report.urllc_lost, report.urllc_arrived);
    }

    #[test]
    fn bits_are_conserved_per_user() {
        for overflow in [OverflowPolicy::Truncate, OverflowPolicy::DropArrival] {
            let mut sim = Simulator::new(SimConfig {
                overflow,
                a: 0.2,
                ..small(0)
            })
            .unwrap();
            for _ in 0..3000 {
                sim.step_frame().unwrap();
            }
            for user in sim.users() {
                let accounted = user.granted_bits + user.buffer_bits + user.lost_bits;
                assert!((accounted - user.arrived_bits).abs() <= 1e-6 * user.arrived_bits.max(1.0));
                assert!(user.buffer_bits <= sim.config().buffer_bits);
            }
        }
    }

    #[test]
    fn urllc_copies_stay_inside_their_window() {
        let cfg = SimConfig {
            rho: 0.4,
            strategy: SplitStrategy::Fixed,
            fixed_n1: 3,
            fixed_n2: 10,
            ..small(0)
        };
        let tau = cfg.tau as u64;
        let mut sim = Simulator::new(cfg).unwrap();
        let mut records = Vec::new();
        for _ in 0..200 {
            records.extend(sim.step_frame().unwrap().urllc_packets);
        }
        records.extend(sim.drain_urllc());
        let report = sim.report();
        assert_eq!(records.len() as u64, report.urllc_arrived);
        assert_eq!(
            records
                .iter()
                .filter(|r| r.outcome == Outcome::Lost)
                .count() as u64,
            report.urllc_lost
        );
        for r in &records {
            assert_eq!(r.transmit_slots.first(), Some(&r.arrival_minislot));
            assert!(r
                .transmit_slots
                .iter()
                .all(|&s| s >= r.arrival_minislot && s < r.arrival_minislot + tau));
        }
    }

    #[test]
    fn split_strategies_under_defaults() {
        let sim = Simulator::new(small(0)).unwrap();
        let game = &sim.game;
        let solution = &sim.solution;
        let fixed = ActionProfile::new(0, 0);
        let mut rng = substream(3, Stream::RandomProfile);
        let pick = |s, rng: &mut ChaCha8Rng| choose_split(s, game, solution, fixed, rng).unwrap();
        assert_eq!(
            pick(SplitStrategy::SocialOpt, &mut rng),
            ActionProfile::new(30, game.n2_star(30))
        );
        assert_eq!(
            pick(SplitStrategy::NonoptNash, &mut rng),
            ActionProfile::new(0, 38)
        );
        assert_eq!(
            pick(SplitStrategy::N1starPlus1, &mut rng),
            ActionProfile::new(31, 29)
        );
        assert_eq!(
            pick(SplitStrategy::Nminus1_1, &mut rng),
            ActionProfile::new(59, 1)
        );
        for _ in 0..1000 {
            let p = pick(SplitStrategy::Random, &mut rng);
            assert!(p.n1 + p.n2 <= 60);
        }
    }

    #[test]
    fn missing_n1_star_is_a_config_error() {
        let cfg = SimConfig {
            epsilon: 1e-9,
            strategy: SplitStrategy::N1starPlus1,
            ..small(10)
        };
        assert!(matches!(Simulator::new(cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn per_frame_game_runs() {
        let cfg = SimConfig {
            game_request: GameRequest::PerFrame,
            ..small(200)
        };
        let report = run_simulation(&cfg).unwrap();
        assert_eq!(report.frames, 200);
        assert!(report.social_payoff.is_finite());
    }
}
