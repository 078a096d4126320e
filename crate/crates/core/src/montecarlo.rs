//! Pulse-level Monte Carlo of the link.
//!
//! Every frame draws from its own ChaCha stream (key derived from the seed,
//! stream number = frame index), so any partition of the frame range gives
//! bit-identical totals. Per frame: Alice draws basis, symbol and intensity;
//! the photon number is Poisson; Bob's passive splitter sends the frame to
//! one arm; every photon survives the link and detector independently and
//! lands on an output slot drawn from the interferometer distribution; dark
//! counts fire independently in each conclusive slot. Multiple conclusive
//! clicks are resolved uniformly at random, and clicks caused by a photon are
//! flipped to a random wrong symbol with the misalignment probability.

use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    dark_prob_per_slot, photon_survival, Intensity, IntensitySettings, LinkParams, Tally, TallySet,
    BOB_BASIS_PROB,
};
use crate::receiver::{conclusive_bins, propagate, ClickOutcome, Detector, Receiver};
use crate::states::{encode, Basis, Dimension, Symbol};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub seed: u64,
    pub states_to_send: u64,
    pub settings: IntensitySettings,
    pub link: LinkParams,
    pub dimension: Dimension,
    /// Report true photon-number classes of sifted events.
    pub bookkeeping: bool,
    pub receiver: Receiver,
}

impl TrialConfig {
    pub fn new(
        seed: u64,
        states_to_send: u64,
        settings: IntensitySettings,
        link: LinkParams,
        dimension: Dimension,
    ) -> Result<Self> {
        let c = TrialConfig {
            seed,
            states_to_send,
            settings,
            link,
            dimension,
            bookkeeping: false,
            receiver: Receiver::ideal(dimension),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_bookkeeping(mut self, on: bool) -> Self {
        self.bookkeeping = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.states_to_send == 0 {
            return Err(Error::invalid("states_to_send must be > 0"));
        }
        if self.receiver.dimension != self.dimension {
            return Err(Error::invalid(
                "receiver dimension does not match trial dimension",
            ));
        }
        self.receiver.z_arm.validate()?;
        self.receiver.x_arm.validate()?;
        self.settings.validate()?;
        self.link.validate()
    }
}

/// Sifted events split by the true photon number emitted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonClassCounts {
    pub vacuum: u64,
    pub single: u64,
    pub multi: u64,
}

impl PhotonClassCounts {
    pub fn total(&self) -> u64 {
        self.vacuum + self.single + self.multi
    }
}

/// Integer counters of a (partial) run. Merging is associative and commutative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounts {
    pub frames: u64,
    /// Emitted states per intensity.
    pub sent: [u64; 2],
    /// Frames where Bob's arm matched Alice's basis, `[basis][intensity]`.
    pub matched: [[u64; 2]; 2],
    /// Sifted conclusive detections, `[basis][intensity]`.
    pub detections: [[u64; 2]; 2],
    pub errors: [[u64; 2]; 2],
    pub photons: [[PhotonClassCounts; 2]; 2],
}

impl SimCounts {
    pub fn merge(&mut self, other: &SimCounts) {
        self.frames += other.frames;
        for k in 0..2 {
            self.sent[k] += other.sent[k];
        }
        for b in 0..2 {
            for k in 0..2 {
                self.matched[b][k] += other.matched[b][k];
                self.detections[b][k] += other.detections[b][k];
                self.errors[b][k] += other.errors[b][k];
                let (p, q) = (&mut self.photons[b][k], other.photons[b][k]);
                p.vacuum += q.vacuum;
                p.single += q.single;
                p.multi += q.multi;
            }
        }
    }

    pub fn tallies(&self) -> TallySet {
        let mut t = TallySet::default();
        for b in Basis::ALL {
            for k in Intensity::ALL {
                *t.get_mut(b, k) = Tally {
                    n: self.detections[b.index()][k.index()] as f64,
                    m: self.errors[b.index()][k.index()] as f64,
                };
            }
        }
        t.sent = [self.sent[0] as f64, self.sent[1] as f64];
        t
    }

    /// Sifted single-photon events of one basis over both intensities.
    pub fn single_photon(&self, b: Basis) -> u64 {
        self.photons[b.index()].iter().map(|c| c.single).sum()
    }

    pub fn vacuum(&self, b: Basis) -> u64 {
        self.photons[b.index()].iter().map(|c| c.vacuum).sum()
    }
}

/// One frame with a conclusive click, for the raw event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub frame: u64,
    pub basis_a: Basis,
    pub symbol_a: u8,
    pub intensity: Intensity,
    pub basis_b: Basis,
    pub outcome: ClickOutcome,
    pub symbol_b: u8,
    pub photons: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub states_sent: u64,
    pub counts: SimCounts,
    pub tallies: TallySet,
    /// Empirical error rate, `[basis][intensity]`.
    pub qber: [[f64; 2]; 2],
    pub qber_z: f64,
    pub qber_x: f64,
    /// Empirical gain per intensity, conditional on a matched arm.
    pub gains: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photon_counts: Option<[[PhotonClassCounts; 2]; 2]>,
}

impl SimReport {
    pub fn from_counts(counts: SimCounts, bookkeeping: bool) -> Self {
        let ratio = |a: u64, b: u64| if b > 0 { a as f64 / b as f64 } else { 0.0 };
        let mut qber = [[0.0; 2]; 2];
        for b in 0..2 {
            for k in 0..2 {
                qber[b][k] = ratio(counts.errors[b][k], counts.detections[b][k]);
            }
        }
        let basis_qber = |b: usize| {
            ratio(
                counts.errors[b][0] + counts.errors[b][1],
                counts.detections[b][0] + counts.detections[b][1],
            )
        };
        let mut gains = [0.0; 2];
        for (k, g) in gains.iter_mut().enumerate() {
            *g = ratio(
                counts.detections[0][k] + counts.detections[1][k],
                counts.matched[0][k] + counts.matched[1][k],
            );
        }
        SimReport {
            states_sent: counts.frames,
            tallies: counts.tallies(),
            qber,
            qber_z: basis_qber(0),
            qber_x: basis_qber(1),
            gains,
            photon_counts: bookkeeping.then_some(counts.photons),
            counts,
        }
    }
}

#[derive(Debug, Clone)]
struct OutcomeTable {
    /// Cumulative probability, and conclusive slot index if any.
    entries: Vec<(f64, Option<u8>)>,
}

/// Precomputed per-state sampling tables for one trial configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: TrialConfig,
    key: [u8; 32],
    /// Indexed `[alice basis][symbol][bob arm]`.
    tables: Vec<OutcomeTable>,
    slots: Vec<ClickOutcome>,
    survival: f64,
    dark_slot: f64,
}

fn slot_outcomes(dim: Dimension, arm: Basis) -> Vec<ClickOutcome> {
    conclusive_bins(dim, arm)
        .iter()
        .flat_map(|&bin| {
            (0..2u8).map(move |parity| ClickOutcome {
                detector: Detector::for_arm(arm, parity),
                bin,
            })
        })
        .collect()
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u32 {
    let u: f64 = rng.random();
    let mut p = libm::exp(-mean);
    let mut cdf = p;
    let mut n = 0u32;
    while u > cdf && n < 1000 {
        n += 1;
        p *= mean / n as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    n
}

impl Simulator {
    pub fn new(config: TrialConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.dimension;
        let d = dim.d();
        let mut tables = Vec::with_capacity(2 * d * 2);
        let slots_by_arm = [slot_outcomes(dim, Basis::Z), slot_outcomes(dim, Basis::X)];
        for alice in Basis::ALL {
            for s in 0..d as u8 {
                let state = encode(alice, Symbol::new(s, dim)?, dim)?;
                for arm in Basis::ALL {
                    let dist = propagate(&state, config.receiver.arm(arm));
                    let mut cum = 0.0;
                    let entries = dist
                        .probabilities
                        .iter()
                        .map(|(o, p)| {
                            cum += p;
                            let slot = slots_by_arm[arm.index()]
                                .iter()
                                .position(|x| x == o)
                                .map(|i| i as u8);
                            (cum, slot)
                        })
                        .collect();
                    tables.push(OutcomeTable { entries });
                }
            }
        }
        let key = ChaCha8Rng::seed_from_u64(config.seed).get_seed();
        Ok(Simulator {
            config,
            key,
            tables,
            slots: slot_outcomes(dim, Basis::Z),
            survival: photon_survival(&config.link),
            dark_slot: dark_prob_per_slot(&config.link),
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    fn table(&self, alice: Basis, symbol: u8, arm: Basis) -> &OutcomeTable {
        let d = self.config.dimension.d();
        &self.tables[(alice.index() * d + symbol as usize) * 2 + arm.index()]
    }

    /// Simulates frames in `range`, adding into `counts`. `on_event` sees
    /// every frame that produced a conclusive click.
    pub fn simulate_range<F: FnMut(&Event)>(
        &self,
        range: Range<u64>,
        counts: &mut SimCounts,
        mut on_event: F,
    ) {
        let cfg = &self.config;
        let dim = cfg.dimension;
        let d = dim.d() as u8;
        let n_slots = self.slots.len();
        for frame in range {
            let mut rng = ChaCha8Rng::from_seed(self.key);
            rng.set_stream(frame);

            let alice = if rng.random::<f64>() < cfg.settings.p_x_alice {
                Basis::X
            } else {
                Basis::Z
            };
            let symbol: u8 = rng.random_range(0..d);
            let intensity = if rng.random::<f64>() < cfg.settings.p_mu {
                Intensity::Signal
            } else {
                Intensity::Decoy
            };
            let photons = poisson(&mut rng, cfg.settings.mean(intensity));
            let arm = if rng.random::<f64>() < BOB_BASIS_PROB {
                Basis::Z
            } else {
                Basis::X
            };

            counts.frames += 1;
            counts.sent[intensity.index()] += 1;
            let matched = alice == arm;
            if matched {
                counts.matched[alice.index()][intensity.index()] += 1;
            }

            let table = self.table(alice, symbol, arm);
            let mut photon_hits = 0u8;
            for _ in 0..photons {
                if rng.random::<f64>() >= self.survival {
                    continue;
                }
                let u: f64 = rng.random();
                if let Some(&(_, Some(s))) = table.entries.iter().find(|(c, _)| u < *c) {
                    photon_hits |= 1 << s;
                }
            }
            let mut dark_hits = 0u8;
            for s in 0..n_slots {
                if rng.random::<f64>() < self.dark_slot {
                    dark_hits |= 1 << s;
                }
            }
            let clicked = photon_hits | dark_hits;
            if clicked == 0 {
                continue;
            }
            let pick = if clicked.count_ones() > 1 {
                rng.random_range(0..clicked.count_ones())
            } else {
                0
            };
            let slot = (0..n_slots as u8)
                .filter(|s| clicked & (1 << s) != 0)
                .nth(pick as usize)
                .expect("pick within popcount");
            let pair = slot / 2;
            let parity = slot % 2;
            let mut symbol_b = 2 * pair + parity;
            if photon_hits & (1 << slot) != 0 {
                let mis = cfg.link.misalignment_for(arm);
                if mis > 0.0 && rng.random::<f64>() < mis {
                    symbol_b = (symbol_b + 1 + rng.random_range(0..d - 1)) % d;
                }
            }
            let outcome = ClickOutcome {
                detector: Detector::for_arm(arm, parity),
                bin: self.slots[slot as usize].bin_for_arm(dim, arm),
            };
            on_event(&Event {
                frame,
                basis_a: alice,
                symbol_a: symbol,
                intensity,
                basis_b: arm,
                outcome,
                symbol_b,
                photons,
            });
            if matched {
                let (b, k) = (alice.index(), intensity.index());
                counts.detections[b][k] += 1;
                if symbol_b != symbol {
                    counts.errors[b][k] += 1;
                }
                let class = &mut counts.photons[b][k];
                match photons {
                    0 => class.vacuum += 1,
                    1 => class.single += 1,
                    _ => class.multi += 1,
                }
            }
        }
    }

    pub fn run(&self) -> SimReport {
        let mut counts = SimCounts::default();
        self.simulate_range(0..self.config.states_to_send, &mut counts, |_| {});
        SimReport::from_counts(counts, self.config.bookkeeping)
    }
}

impl ClickOutcome {
    /// The conclusive bin of `arm` with the same pair index as this Z slot.
    fn bin_for_arm(&self, dim: Dimension, arm: Basis) -> u8 {
        let z = conclusive_bins(dim, Basis::Z);
        let pair = z.iter().position(|&b| b == self.bin).unwrap_or(0);
        conclusive_bins(dim, arm)[pair]
    }
}

/// Runs the whole configuration on the calling thread.
pub fn run(config: &TrialConfig) -> Result<SimReport> {
    Ok(Simulator::new(*config)?.run())
}
