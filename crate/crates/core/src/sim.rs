//! Slot-level simulation of the N-user downlink.
//!
//! At the start of slot `t` user `n` receives `a_n[t]` packets of `L` bits and
//! observes gain `h_n[t]`. Serving its whole backlog `d_n = q_n[t-1] + a_n[t]L`
//! costs `v_n = d_n / log2(1 + h_n²ρ)` channel symbols out of `B = W·T`.
//! GCFS serves backlogged users in decreasing gain order, clears each one in
//! full while the budget allows, gives the first user that does not fit the
//! leftover symbols, and serves nobody else. The queue then evolves as
//! `q_n[t] = q_n[t-1] + a_n[t]L - s_n[t]`.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::models::{rate, Channel, ChannelModel, SystemParams, TrafficModel};
use crate::stream::{substream, Purpose};
use crate::{Error, Result};

/// The user served with the leftover symbols of a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialService {
    pub user: usize,
    pub symbols: f64,
    pub bits: f64,
}

/// How one slot's symbol budget is spent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotPlan {
    /// Users that receive service, in serving order (decreasing gain, then
    /// index); the partial user, if any, is last.
    pub order: Vec<usize>,
    /// `ι`: `order[..ι]` are cleared.
    pub fully_served: usize,
    pub partial: Option<PartialService>,
    pub idle_symbols: f64,
    /// `s_n` for every user.
    pub served_bits: Vec<f64>,
    /// `S[t] = Σ s_n`.
    pub total_bits: f64,
}

impl SlotPlan {
    pub fn served(&self) -> &[usize] {
        &self.order[..self.fully_served]
    }

    /// Users with `s_n > 0`.
    pub fn served_count(&self) -> usize {
        self.fully_served + usize::from(self.partial.is_some_and(|p| p.bits > 0.0))
    }
}

/// Scheduling rule applied each slot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Policy {
    Gcfs,
    /// Only users with gain strictly above the threshold are candidates.
    Threshold(f64),
}

/// Reusable buffers for building slot plans.
#[derive(Debug, Clone, Default)]
pub struct Planner {
    keys: Vec<u128>,
    demand: Vec<f64>,
    last_served: usize,
}

// Positive gains order like their bit patterns, so complementing the bits
// and appending the index gives an ascending integer key for "decreasing
// gain, then increasing index".
fn rank_key(gain: f64, user: usize) -> u128 {
    (u128::from(!gain.to_bits()) << 64) | user as u128
}

fn unrank(key: u128) -> (f64, usize) {
    (f64::from_bits(!((key >> 64) as u64)), key as u64 as usize)
}

impl Planner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fills `plan` for the given buffers, arrivals and gains.
    #[allow(clippy::too_many_arguments)]
    pub fn plan_into(
        &mut self,
        queues: &[f64],
        arrivals: &[u32],
        packet_bits: f64,
        gains: &[f64],
        snr: f64,
        symbols: f64,
        policy: Policy,
        plan: &mut SlotPlan,
    ) {
        let n = queues.len();
        assert!(
            arrivals.len() == n && gains.len() == n,
            "queues, arrivals and gains must have equal length"
        );
        self.demand.clear();
        self.demand.extend(
            queues
                .iter()
                .zip(arrivals)
                .map(|(&q, &a)| q + f64::from(a) * packet_bits),
        );
        let floor = match policy {
            Policy::Gcfs => 0.0,
            Policy::Threshold(h) => h.max(0.0),
        };
        self.keys.clear();
        for (i, (&d, &h)) in self.demand.iter().zip(gains).enumerate() {
            // zero gain means zero rate; such users cannot be served
            if d > 0.0 && h > floor {
                self.keys.push(rank_key(h, i));
            }
        }
        plan.order.clear();
        plan.served_bits.clear();
        plan.served_bits.resize(n, 0.0);
        plan.fully_served = 0;
        plan.partial = None;
        plan.total_bits = 0.0;
        let mut remaining = symbols;
        // Only the head of the ranking is ever served, so rank it in chunks:
        // select the best `chunk` remaining candidates, sort just those, and
        // widen the chunk if the budget outlasts them.
        let mut chunk = 2 * self.last_served + 16;
        let mut start = 0;
        'rank: while start < self.keys.len() {
            let rest = &mut self.keys[start..];
            let end = chunk.min(rest.len());
            if end < rest.len() {
                rest.select_nth_unstable(end - 1);
            }
            rest[..end].sort_unstable();
            for &key in &rest[..end] {
                let (h, i) = unrank(key);
                let r = rate(h, snr);
                let d = self.demand[i];
                let v = d / r;
                if v <= remaining {
                    remaining -= v;
                    plan.order.push(i);
                    plan.served_bits[i] = d;
                    plan.total_bits += d;
                    plan.fully_served += 1;
                } else {
                    if remaining > 0.0 {
                        let bits = (remaining * r).min(d);
                        plan.order.push(i);
                        plan.served_bits[i] = bits;
                        plan.total_bits += bits;
                        plan.partial = Some(PartialService {
                            user: i,
                            symbols: remaining,
                            bits,
                        });
                        remaining = 0.0;
                    }
                    break 'rank;
                }
            }
            start += end;
            chunk *= 2;
        }
        self.last_served = plan.order.len();
        plan.idle_symbols = remaining;
    }

    fn demand(&self) -> &[f64] {
        &self.demand
    }
}

/// GCFS plan for one slot.
pub fn gcfs_plan(
    queues: &[f64],
    arrivals: &[u32],
    packet_bits: f64,
    gains: &[f64],
    snr: f64,
    symbols: f64,
) -> SlotPlan {
    let mut plan = SlotPlan::default();
    Planner::new().plan_into(
        queues,
        arrivals,
        packet_bits,
        gains,
        snr,
        symbols,
        Policy::Gcfs,
        &mut plan,
    );
    plan
}

/// Plan that only considers users whose gain exceeds `threshold`.
pub fn threshold_plan(
    queues: &[f64],
    arrivals: &[u32],
    packet_bits: f64,
    gains: &[f64],
    snr: f64,
    symbols: f64,
    threshold: f64,
) -> SlotPlan {
    let mut plan = SlotPlan::default();
    Planner::new().plan_into(
        queues,
        arrivals,
        packet_bits,
        gains,
        snr,
        symbols,
        Policy::Threshold(threshold),
        &mut plan,
    );
    plan
}

/// Channel, traffic and system parameters of one simulated downlink.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub channel: Channel,
    pub traffic: TrafficModel,
    pub system: SystemParams,
}

/// Queues and random streams of the N users.
#[derive(Debug, Clone)]
pub struct SimState {
    queues: Vec<f64>,
    slot: u64,
    arrival_streams: Vec<ChaCha8Rng>,
    gain_streams: Vec<ChaCha8Rng>,
    arrivals: Vec<u32>,
    gains: Vec<f64>,
    planner: Planner,
    plan: SlotPlan,
}

impl SimState {
    /// Empty buffers at slot 0.
    pub fn new(users: usize, seed: u64) -> Self {
        Self {
            queues: alloc::vec![0.0; users],
            slot: 0,
            arrival_streams: (0..users)
                .map(|n| substream(seed, n, Purpose::Arrivals))
                .collect(),
            gain_streams: (0..users)
                .map(|n| substream(seed, n, Purpose::Gain))
                .collect(),
            arrivals: alloc::vec![0; users],
            gains: alloc::vec![0.0; users],
            planner: Planner::new(),
            plan: SlotPlan::default(),
        }
    }

    pub fn queues(&self) -> &[f64] {
        &self.queues
    }

    /// Index of the last completed slot.
    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Arrivals drawn in the last slot.
    pub fn arrivals(&self) -> &[u32] {
        &self.arrivals
    }

    /// Gains drawn in the last slot.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// `q_n[t-1] + a_n[t]L` of the last slot.
    pub fn demand(&self) -> &[f64] {
        self.planner.demand()
    }

    /// Advances one slot: draws arrivals, then gains, plans, and updates the
    /// queues.
    pub fn step(&mut self, scenario: &Scenario, policy: Policy) -> &SlotPlan {
        for (a, rng) in self.arrivals.iter_mut().zip(&mut self.arrival_streams) {
            *a = scenario.traffic.sample_arrivals(rng);
        }
        for (h, rng) in self.gains.iter_mut().zip(&mut self.gain_streams) {
            *h = scenario.channel.sample(rng);
        }
        self.planner.plan_into(
            &self.queues,
            &self.arrivals,
            scenario.traffic.packet_bits(),
            &self.gains,
            scenario.system.snr(),
            scenario.system.symbols_per_slot(),
            policy,
            &mut self.plan,
        );
        for ((q, &d), &s) in self
            .queues
            .iter_mut()
            .zip(self.planner.demand())
            .zip(&self.plan.served_bits)
        {
            *q = d - s;
        }
        self.slot += 1;
        &self.plan
    }
}

/// Run length and seed of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub horizon: u64,
    /// Statistics use slots `warmup + 1..=horizon`.
    pub warmup: u64,
    pub seed: u64,
    pub record_trace: bool,
}

impl SimConfig {
    /// Warmup defaults to 10% of the horizon but at least 1000 slots, or 10%
    /// when the horizon is too short for that.
    pub fn new(horizon: u64, seed: u64) -> Self {
        Self {
            horizon,
            warmup: default_warmup(horizon),
            seed,
            record_trace: false,
        }
    }
}

pub fn default_warmup(horizon: u64) -> u64 {
    let w = (horizon / 10).max(1000);
    if w < horizon {
        w
    } else {
        horizon / 10
    }
}

/// One row of the per-slot trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub t: u64,
    pub total_queue_bits: f64,
    pub served_bits: f64,
    pub served_count: usize,
}

/// Histogram bins beyond this many packets are folded into the last one.
pub const HISTOGRAM_CAP: usize = 1 << 20;

/// Statistics of one replication over the post-warmup slots.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimSummary {
    pub seed: u64,
    pub horizon: u64,
    pub warmup: u64,
    pub users: usize,
    pub policy: Policy,
    /// `λ`, bits per user per slot.
    pub arrival_bits: f64,
    /// Time- and user-averaged end-of-slot queue.
    pub mean_queue_bits: f64,
    /// `mean_queue_bits / λ`.
    pub mean_delay_slots: f64,
    /// Mean of `ceil(q/L)` over mean packet arrivals per slot.
    pub packet_delay_slots: f64,
    /// `counts[k]` = user-slots ending with `ceil(q/L) = k`.
    pub histogram: Vec<u64>,
    pub nonempty_user_slots: u64,
    pub cleared_user_slots: u64,
    /// `p̂`: cleared / nonempty user-slots.
    pub service_fraction: f64,
    pub mean_served_bits: f64,
    pub mean_idle_symbols: f64,
    /// Mean per-slot total queue over `[H/4, H/2)` and `[3H/4, H)`.
    pub mid_quartile_queue_bits: f64,
    pub last_quartile_queue_bits: f64,
    pub diverged: bool,
    pub trace: Option<Vec<TraceRow>>,
}

impl SimSummary {
    /// Normalized packet histogram.
    pub fn histogram_pmf(&self) -> Vec<f64> {
        crate::metrics::histogram_pmf(&self.histogram)
    }
}

/// Runs one replication from empty buffers.
pub fn simulate(scenario: &Scenario, policy: Policy, config: &SimConfig) -> Result<SimSummary> {
    if config.horizon == 0 || config.warmup >= config.horizon {
        return Err(Error::InvalidParameter {
            name: "warmup",
            reason: "must be smaller than the horizon",
        });
    }
    if let Policy::Threshold(h) = policy {
        if !(h >= 0.0) {
            return Err(Error::Domain {
                what: "threshold",
                value: h,
            });
        }
    }
    let users = scenario.system.users();
    let lambda = scenario.traffic.mean_arrival_bits();
    let packet = scenario.traffic.packet_bits();
    let mut state = SimState::new(users, config.seed);
    let mut totals: Vec<f64> = Vec::with_capacity(config.horizon as usize);
    let mut trace = config
        .record_trace
        .then(|| Vec::with_capacity(config.horizon as usize));
    let mut histogram: Vec<u64> = Vec::new();
    let mut queue_sum = 0.0;
    let mut packet_sum: u64 = 0;
    let mut nonempty: u64 = 0;
    let mut cleared: u64 = 0;
    let mut served_sum = 0.0;
    let mut idle_sum = 0.0;

    for t in 1..=config.horizon {
        let plan = state.step(scenario, policy);
        let served = plan.total_bits;
        let idle = plan.idle_symbols;
        let served_count = plan.served_count();
        let fully = plan.fully_served as u64;
        let total: f64 = state.queues.iter().sum();
        totals.push(total);
        if let Some(rows) = trace.as_mut() {
            rows.push(TraceRow {
                t,
                total_queue_bits: total,
                served_bits: served,
                served_count,
            });
        }
        if t <= config.warmup {
            continue;
        }
        queue_sum += total;
        served_sum += served;
        idle_sum += idle;
        cleared += fully;
        nonempty += state.demand().iter().filter(|&&d| d > 0.0).count() as u64;
        for &q in &state.queues {
            let k = if q > 0.0 {
                (math::ceil(q / packet) as usize).min(HISTOGRAM_CAP)
            } else {
                0
            };
            if k >= histogram.len() {
                histogram.resize(k + 1, 0);
            }
            histogram[k] += 1;
            packet_sum += k as u64;
        }
    }

    let slots = (config.horizon - config.warmup) as f64;
    let samples = slots * users as f64;
    let mean_queue_bits = queue_sum / samples;
    let mean_packets = packet_sum as f64 / samples;
    let (mid, last) = quartile_means(&totals);
    Ok(SimSummary {
        seed: config.seed,
        horizon: config.horizon,
        warmup: config.warmup,
        users,
        policy,
        arrival_bits: lambda,
        mean_queue_bits,
        mean_delay_slots: mean_queue_bits / lambda,
        packet_delay_slots: mean_packets / scenario.traffic.mean_packets(),
        histogram,
        nonempty_user_slots: nonempty,
        cleared_user_slots: cleared,
        service_fraction: if nonempty > 0 {
            cleared as f64 / nonempty as f64
        } else {
            1.0
        },
        mean_served_bits: served_sum / slots,
        mean_idle_symbols: idle_sum / slots,
        mid_quartile_queue_bits: mid,
        last_quartile_queue_bits: last,
        diverged: last > 2.0 * mid,
        trace,
    })
}

fn quartile_means(totals: &[f64]) -> (f64, f64) {
    let h = totals.len();
    let mean = |s: &[f64]| {
        if s.is_empty() {
            0.0
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        }
    };
    (mean(&totals[h / 4..h / 2]), mean(&totals[3 * h / 4..]))
}

/// Merges replications of the same scenario: counts add, averages are
/// weighted by post-warmup user-slots. The trace is dropped.
pub fn pool(runs: &[SimSummary]) -> Result<SimSummary> {
    let first = runs.first().ok_or(Error::InvalidParameter {
        name: "runs",
        reason: "must not be empty",
    })?;
    let mut out = first.clone();
    out.trace = None;
    if runs.len() == 1 {
        return Ok(out);
    }
    let weight = |r: &SimSummary| (r.horizon - r.warmup) as f64;
    let total_w: f64 = runs.iter().map(weight).sum();
    let avg = |f: fn(&SimSummary) -> f64| runs.iter().map(|r| f(r) * weight(r)).sum::<f64>() / total_w;
    out.mean_queue_bits = avg(|r| r.mean_queue_bits);
    out.mean_delay_slots = out.mean_queue_bits / out.arrival_bits;
    out.packet_delay_slots = avg(|r| r.packet_delay_slots);
    out.mean_served_bits = avg(|r| r.mean_served_bits);
    out.mean_idle_symbols = avg(|r| r.mean_idle_symbols);
    out.mid_quartile_queue_bits = avg(|r| r.mid_quartile_queue_bits);
    out.last_quartile_queue_bits = avg(|r| r.last_quartile_queue_bits);
    out.diverged = runs.iter().any(|r| r.diverged);
    out.nonempty_user_slots = runs.iter().map(|r| r.nonempty_user_slots).sum();
    out.cleared_user_slots = runs.iter().map(|r| r.cleared_user_slots).sum();
    out.service_fraction = if out.nonempty_user_slots > 0 {
        out.cleared_user_slots as f64 / out.nonempty_user_slots as f64
    } else {
        1.0
    };
    let len = runs.iter().map(|r| r.histogram.len()).max().unwrap_or(0);
    out.histogram = alloc::vec![0; len];
    for r in runs {
        for (o, c) in out.histogram.iter_mut().zip(&r.histogram) {
            *o += c;
        }
    }
    Ok(out)
}
