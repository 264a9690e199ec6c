use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Success,
    Lost,
}

/// Life of one URLLC packet, reported once its window has closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrllcPacketRecord {
    pub arrival_minislot: u64,
    /// `None` when the common region was empty on arrival.
    pub block: Option<usize>,
    pub transmit_slots: Vec<u64>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
struct LivePacket {
    arrival: u64,
    block: usize,
    /// Bit `i` set when a copy went out in mini slot `arrival + i`.
    sent: u64,
    delivered: bool,
}

/// Grant-free contention in the common region, one mini slot at a time.
///
/// A copy is received iff it is the only URLLC transmission on its
/// (block, mini slot). eMBB traffic sharing the region never destroys a
/// URLLC copy.
#[derive(Debug)]
pub(crate) struct UrllcProcess {
    rho: f64,
    p: f64,
    tau: u64,
    now: u64,
    live: Vec<LivePacket>,
    scratch: Vec<(usize, usize)>,
    arrivals_rng: ChaCha8Rng,
    coins_rng: ChaCha8Rng,
    pub arrived: u64,
    pub lost: u64,
}

impl UrllcProcess {
    pub fn new(
        rho: f64,
        p: f64,
        tau: u32,
        arrivals_rng: ChaCha8Rng,
        coins_rng: ChaCha8Rng,
    ) -> Self {
        UrllcProcess {
            rho,
            p,
            tau: tau as u64,
            now: 0,
            live: Vec::new(),
            scratch: Vec::new(),
            arrivals_rng,
            coins_rng,
            arrived: 0,
            lost: 0,
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn has_live_packets(&self) -> bool {
        !self.live.is_empty()
    }

    /// Advances one mini slot with `blocks` common-region blocks. New
    /// arrivals are drawn only when `accept_arrivals` is set. Packets whose
    /// window closes in this slot are appended to `finished`.
    pub fn step(
        &mut self,
        blocks: usize,
        accept_arrivals: bool,
        finished: &mut Vec<UrllcPacketRecord>,
    ) {
        let t = self.now;
        if accept_arrivals {
            let count = rng::poisson(&mut self.arrivals_rng, self.rho);
            for _ in 0..count {
                self.arrived += 1;
                if blocks == 0 {
                    self.lost += 1;
                    finished.push(UrllcPacketRecord {
                        arrival_minislot: t,
                        block: None,
                        transmit_slots: Vec::new(),
                        outcome: Outcome::Lost,
                    });
                    continue;
                }
                let block = self.arrivals_rng.gen_range(0..blocks);
                self.live.push(LivePacket {
                    arrival: t,
                    block,
                    sent: 0,
                    delivered: false,
                });
            }
        }

        self.scratch.clear();
        for (idx, packet) in self.live.iter_mut().enumerate() {
            let offset = t - packet.arrival;
            let sends = offset == 0 || self.coins_rng.gen_bool(self.p);
            if sends {
                packet.sent |= 1 << offset;
                self.scratch.push((packet.block, idx));
            }
        }
        self.scratch.sort_unstable();
        let mut start = 0;
        while start < self.scratch.len() {
            let block = self.scratch[start].0;
            let end = start
                + self.scratch[start..]
                    .iter()
                    .take_while(|(b, _)| *b == block)
                    .count();
            if end - start == 1 {
                self.live[self.scratch[start].1].delivered = true;
            }
            start = end;
        }

        let tau = self.tau;
        let mut lost = 0;
        self.live.retain(|packet| {
            if t - packet.arrival + 1 < tau {
                return true;
            }
            if !packet.delivered {
                lost += 1;
            }
            finished.push(UrllcPacketRecord {
                arrival_minislot: packet.arrival,
                block: Some(packet.block),
                transmit_slots: (0..tau)
                    .filter(|i| packet.sent >> i & 1 == 1)
                    .map(|i| packet.arrival + i)
                    .collect(),
                outcome: if packet.delivered {
                    Outcome::Success
                } else {
                    Outcome::Lost
                },
            });
            false
        });
        self.lost += lost;
        self.now += 1;
    }
}
