use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::allocator::AllocatorKind;
use crate::error::{Error, Result};
use crate::game::GameParams;

/// Longest delay budget the simulator tracks (one bit per mini slot).
pub const MAX_TAU: u32 = 64;

/// How the common/grant-based split is chosen each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// The socially optimal pure equilibrium.
    SocialOpt,
    /// The equilibrium `(0, n2*(0))`.
    NonoptNash,
    /// `(n1* + 1, N - n1* - 1)`.
    N1starPlus1,
    /// `(N - 1, 1)`.
    Nminus1_1,
    /// `n1` uniform on `[0, N]`, then `n2` uniform on `[0, N - n1]`, redrawn
    /// every frame.
    Random,
    /// `(fixed_n1, fixed_n2)` from the configuration.
    Fixed,
}

impl SplitStrategy {
    /// The five strategies compared in the experiments.
    pub const COMPARED: [SplitStrategy; 5] = [
        SplitStrategy::SocialOpt,
        SplitStrategy::NonoptNash,
        SplitStrategy::N1starPlus1,
        SplitStrategy::Nminus1_1,
        SplitStrategy::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitStrategy::SocialOpt => "social_opt",
            SplitStrategy::NonoptNash => "nonopt_nash",
            SplitStrategy::N1starPlus1 => "n1star_plus1",
            SplitStrategy::Nminus1_1 => "nminus1_1",
            SplitStrategy::Random => "random",
            SplitStrategy::Fixed => "fixed",
        }
    }
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SplitStrategy::SocialOpt,
            SplitStrategy::NonoptNash,
            SplitStrategy::N1starPlus1,
            SplitStrategy::Nminus1_1,
            SplitStrategy::Random,
            SplitStrategy::Fixed,
        ]
        .into_iter()
        .find(|k| k.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::config("strategy", format!("unknown split strategy `{s}`")))
    }
}

/// Which eMBB request total the region-sizing game is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameRequest {
    /// Once, for `request_bits` (default: users times the mean arrival).
    Static,
    /// Every frame, for that frame's total request.
    PerFrame,
}

impl FromStr for GameRequest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(GameRequest::Static),
            "per_frame" => Ok(GameRequest::PerFrame),
            _ => Err(Error::config(
                "game_request",
                format!("expected static|per_frame, got `{s}`"),
            )),
        }
    }
}

/// What happens to an eMBB arrival that does not fit in the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverflowPolicy {
    /// Store what fits, drop the excess bits.
    Truncate,
    /// Drop the whole arrival.
    DropArrival,
}

impl FromStr for OverflowPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "truncate" => Ok(OverflowPolicy::Truncate),
            "drop_arrival" => Ok(OverflowPolicy::DropArrival),
            _ => Err(Error::config(
                "overflow",
                format!("expected truncate|drop_arrival, got `{s}`"),
            )),
        }
    }
}

/// Full simulator configuration. Defaults reproduce the reference scenario:
/// 60 blocks, 8 eMBB users, `rho = 6.5e-4`, `tau = 8`, `p = 0.3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub rho: f64,
    pub p: f64,
    pub tau: u32,
    pub n_blocks: usize,
    pub epsilon: f64,
    pub b: f64,
    pub a: f64,
    pub c: f64,
    /// eMBB buffer size per user, bits.
    pub buffer_bits: f64,
    /// Number of eMBB users `m`.
    pub users: usize,
    pub slots_per_frame: u32,
    /// Mini slots per slot; defaults to `tau`.
    pub minislots_per_slot: Option<u32>,
    /// Per-user arrivals are uniform on `0..=embb_arrival_max` bits.
    pub embb_arrival_max: u64,
    pub frames: u64,
    pub allocator: AllocatorKind,
    pub strategy: SplitStrategy,
    pub fixed_n1: usize,
    pub fixed_n2: usize,
    pub game_request: GameRequest,
    /// Static game request; defaults to `users * embb_arrival_max / 2`.
    pub request_bits: Option<f64>,
    pub overflow: OverflowPolicy,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rho: 6.5e-4,
            p: 0.3,
            tau: 8,
            n_blocks: 60,
            epsilon: 1e-5,
            b: 0.8,
            a: 0.5,
            c: 3.2e4,
            buffer_bits: 3.8e5,
            users: 8,
            slots_per_frame: 10,
            minislots_per_slot: None,
            embb_arrival_max: 300_000,
            frames: 100_000,
            allocator: AllocatorKind::WaterFill,
            strategy: SplitStrategy::SocialOpt,
            fixed_n1: 0,
            fixed_n2: 0,
            game_request: GameRequest::Static,
            request_bits: None,
            overflow: OverflowPolicy::Truncate,
            seed: 1,
        }
    }
}

/// Config field names in CSV column order.
pub const CONFIG_FIELDS: [&str; 23] = [
    "rho",
    "p",
    "tau",
    "n_blocks",
    "epsilon",
    "b",
    "a",
    "c",
    "buffer_bits",
    "users",
    "slots_per_frame",
    "minislots_per_slot",
    "embb_arrival_max",
    "frames",
    "allocator",
    "strategy",
    "fixed_n1",
    "fixed_n2",
    "game_request",
    "request_bits",
    "overflow",
    "seed",
    "minislots_per_frame",
];

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(field, format!("cannot parse `{value}`: {e}")))
}

impl SimConfig {
    pub fn minislots_per_slot(&self) -> u32 {
        self.minislots_per_slot.unwrap_or(self.tau)
    }

    pub fn minislots_per_frame(&self) -> u64 {
        self.slots_per_frame as u64 * self.minislots_per_slot() as u64
    }

    /// Mean per-user arrival per frame, bits.
    pub fn mean_arrival(&self) -> f64 {
        self.embb_arrival_max as f64 / 2.0
    }

    pub fn static_request(&self) -> f64 {
        self.request_bits
            .unwrap_or(self.users as f64 * self.mean_arrival())
    }

    pub fn game_params(&self, request: f64) -> GameParams {
        GameParams {
            rho: self.rho,
            p: self.p,
            tau: self.tau,
            n_blocks: self.n_blocks,
            epsilon: self.epsilon,
            b: self.b,
            a: self.a,
            c: self.c,
            r: request,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game_params(self.static_request())
            .validate()
            .map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::config(name, reason),
                other => other,
            })?;
        if self.tau > MAX_TAU {
            return Err(Error::config("tau", format!("at most {MAX_TAU} supported")));
        }
        if !(self.buffer_bits > 0.0 && self.buffer_bits.is_finite()) {
            return Err(Error::config("buffer_bits", "must be positive"));
        }
        if self.users == 0 {
            return Err(Error::config("users", "need at least one eMBB user"));
        }
        if self.slots_per_frame == 0 {
            return Err(Error::config("slots_per_frame", "must be at least 1"));
        }
        if self.minislots_per_slot == Some(0) {
            return Err(Error::config("minislots_per_slot", "must be at least 1"));
        }
        if let Some(r) = self.request_bits {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config("request_bits", "must be finite and >= 0"));
            }
        }
        if self.strategy == SplitStrategy::Fixed
            && (self.fixed_n1 > self.n_blocks || self.fixed_n2 > self.n_blocks)
        {
            return Err(Error::config("fixed_n1", "fixed profile exceeds n_blocks"));
        }
        Ok(())
    }

    /// Sets one field from its textual value (as used by sweeps and CSV).
    pub fn set_field(&mut self, field: &str, value: &str) -> Result<()> {
        match field {
            "rho" => self.rho = parse(field, value)?,
            "p" => self.p = parse(field, value)?,
            "tau" => self.tau = parse(field, value)?,
            "n_blocks" => self.n_blocks = parse(field, value)?,
            "epsilon" => self.epsilon = parse(field, value)?,
            "b" => self.b = parse(field, value)?,
            "a" => self.a = parse(field, value)?,
            "c" => self.c = parse(field, value)?,
            "buffer_bits" => self.buffer_bits = parse(field, value)?,
            "users" => self.users = parse(field, value)?,
            "slots_per_frame" => self.slots_per_frame = parse(field, value)?,
            "minislots_per_slot" => {
                self.minislots_per_slot = if value.trim().is_empty() {
                    None
                } else {
                    Some(parse(field, value)?)
                }
            }
            "embb_arrival_max" => self.embb_arrival_max = parse(field, value)?,
            "frames" => self.frames = parse(field, value)?,
            "allocator" => self.allocator = value.trim().parse()?,
            "strategy" => self.strategy = value.trim().parse()?,
            "fixed_n1" => self.fixed_n1 = parse(field, value)?,
            "fixed_n2" => self.fixed_n2 = parse(field, value)?,
            "game_request" => self.game_request = value.trim().parse()?,
            "request_bits" => {
                self.request_bits = if value.trim().is_empty() {
                    None
                } else {
                    Some(parse(field, value)?)
                }
            }
            "overflow" => self.overflow = value.trim().parse()?,
            "seed" => self.seed = parse(field, value)?,
            _ => return Err(Error::config(field, "no such configuration field")),
        }
        Ok(())
    }

    /// Textual value of a field, the inverse of [`SimConfig::set_field`].
    pub fn field_value(&self, field: &str) -> Result<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        Ok(match field {
            "rho" => self.rho.to_string(),
            "p" => self.p.to_string(),
            "tau" => self.tau.to_string(),
            "n_blocks" => self.n_blocks.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "b" => self.b.to_string(),
            "a" => self.a.to_string(),
            "c" => self.c.to_string(),
            "buffer_bits" => self.buffer_bits.to_string(),
            "users" => self.users.to_string(),
            "slots_per_frame" => self.slots_per_frame.to_string(),
            "minislots_per_slot" => opt(self.minislots_per_slot.map(|v| v.to_string())),
            "embb_arrival_max" => self.embb_arrival_max.to_string(),
            "frames" => self.frames.to_string(),
            "allocator" => self.allocator.to_string(),
            "strategy" => self.strategy.to_string(),
            "fixed_n1" => self.fixed_n1.to_string(),
            "fixed_n2" => self.fixed_n2.to_string(),
            "game_request" => match self.game_request {
                GameRequest::Static => "static".into(),
                GameRequest::PerFrame => "per_frame".into(),
            },
            "request_bits" => opt(self.request_bits.map(|v| v.to_string())),
            "overflow" => match self.overflow {
                OverflowPolicy::Truncate => "truncate".into(),
                OverflowPolicy::DropArrival => "drop_arrival".into(),
            },
            "seed" => self.seed.to_string(),
            "minislots_per_frame" => self.minislots_per_frame().to_string(),
            _ => return Err(Error::config(field, "no such configuration field")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.minislots_per_frame(), 80);
        assert_eq!(cfg.static_request(), 1.2e6);
    }

    #[test]
    fn set_and_read_every_field() {
        let mut cfg = SimConfig::default();
        for field in CONFIG_FIELDS
            .iter()
            .filter(|f| **f != "minislots_per_frame")
        {
            let value = cfg.field_value(field).unwrap();
            cfg.set_field(field, &value).unwrap();
        }
        assert_eq!(cfg, SimConfig::default());
        cfg.set_field("a", "0.3").unwrap();
        cfg.set_field("strategy", "random").unwrap();
        cfg.set_field("minislots_per_slot", "4").unwrap();
        assert_eq!(cfg.a, 0.3);
        assert_eq!(cfg.strategy, SplitStrategy::Random);
        assert_eq!(cfg.minislots_per_frame(), 40);
        assert!(cfg.set_field("nonsense", "1").is_err());
        let err = cfg.set_field("users", "many").unwrap_err();
        assert!(err.to_string().contains("users"));
    }

    #[test]
    fn validation_names_the_field() {
        let with = |edit: fn(&mut SimConfig)| {
            let mut cfg = SimConfig::default();
            edit(&mut cfg);
            cfg.validate()
        };
        assert!(with(|c| c.b = 1.5).unwrap_err().to_string().contains("`b`"));
        assert!(with(|c| c.users = 0).unwrap_err().to_string().contains("users"));
        assert!(with(|c| c.tau = 65).is_err());
    }
}
