//! TTI-stepped two-slice environment.
//!
//! Each call to [`SlicingEnv::step`] runs one TTI on the learning eNB:
//!
//! 1. HARQ processes due this TTI resolve (delivered, retried or dropped);
//! 2. Poisson arrivals join the per-UE FIFO queues;
//! 3. the inter-slice split is mapped to UEs round-robin within each slice;
//! 4. every allocated UE drains head-of-line bits up to its Shannon capacity,
//!    and each completed transmission fails with probability `initial_bler`;
//! 5. URLLC packets waiting longer than the delay budget are dropped;
//! 6. the reward is computed from this TTI's deliveries.
//!
//! Neighbouring eNBs only contribute interference, which is folded into each
//! UE's static per-episode SINR.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{MdpConfig, ScenarioConfig, TrafficConfig};
use crate::radio::{
    draw_ue_channel, link_capacity, retx_delay, Allocation, CellLayout, DelayBreakdown, Slice,
    UeChannel,
};
use crate::rng::{episode_stream, SimRng, CHANNEL, HARQ, TRAFFIC};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("action ({r_embb}, {r_urllc}) does not split {num_rbg} RBGs")]
    InvalidAction {
        r_embb: usize,
        r_urllc: usize,
        num_rbg: usize,
    },
}

/// MDP state: queued packets per slice, clamped to `queue_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    pub q_embb: usize,
    pub q_urllc: usize,
}

impl Observation {
    pub fn new(q_embb: usize, q_urllc: usize, queue_cap: usize) -> Self {
        Self {
            q_embb: q_embb.min(queue_cap),
            q_urllc: q_urllc.min(queue_cap),
        }
    }

    /// Row index into a Q-table with `(queue_cap + 1)^2` rows.
    pub fn index(&self, queue_cap: usize) -> usize {
        self.q_embb * (queue_cap + 1) + self.q_urllc
    }

    pub fn from_index(index: usize, queue_cap: usize) -> Self {
        Self {
            q_embb: index / (queue_cap + 1),
            q_urllc: index % (queue_cap + 1),
        }
    }
}

/// Inter-slice RBG split. Action index `k` means `k` RBGs to eMBB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SliceAction {
    pub r_embb: usize,
    pub r_urllc: usize,
}

impl SliceAction {
    pub fn new(r_embb: usize, r_urllc: usize, num_rbg: usize) -> Result<Self, EnvError> {
        if r_embb + r_urllc != num_rbg {
            return Err(EnvError::InvalidAction {
                r_embb,
                r_urllc,
                num_rbg,
            });
        }
        Ok(Self { r_embb, r_urllc })
    }

    /// Panics if `index > num_rbg`.
    pub fn from_index(index: usize, num_rbg: usize) -> Self {
        assert!(index <= num_rbg, "action index {index} > {num_rbg}");
        Self {
            r_embb: index,
            r_urllc: num_rbg - index,
        }
    }

    pub fn index(&self) -> usize {
        self.r_embb
    }

    pub fn rbgs_for(&self, slice: Slice) -> usize {
        match slice {
            Slice::Embb => self.r_embb,
            Slice::Urllc => self.r_urllc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub slice: Slice,
    pub ue_id: usize,
    pub size_bits: u64,
    pub arrival_tti: u64,
    /// Transmission attempts made so far.
    pub attempts: u32,
    /// Bits not yet sent in the current first transmission.
    pub remaining_bits: f64,
    /// TTI in which the first bit was sent.
    pub service_start: Option<u64>,
}

/// A packet waiting for its HARQ retransmission to resolve.
#[derive(Debug, Clone, PartialEq)]
pub struct HarqEntry {
    pub packet: Packet,
    pub release_tti: u64,
    pub tx_ms: f64,
    pub queue_ms: f64,
}

/// Per-slice counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceCounts {
    pub embb: u64,
    pub urllc: u64,
}

impl SliceCounts {
    pub fn get(&self, slice: Slice) -> u64 {
        match slice {
            Slice::Embb => self.embb,
            Slice::Urllc => self.urllc,
        }
    }

    pub fn add(&mut self, slice: Slice, n: u64) {
        match slice {
            Slice::Embb => self.embb += n,
            Slice::Urllc => self.urllc += n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub tti: u64,
    pub episode: usize,
    /// Slice of every UE. URLLC UEs come first, then eMBB.
    pub ue_slices: Vec<Slice>,
    pub queues: Vec<VecDeque<Packet>>,
    pub harq_in_flight: Vec<Vec<HarqEntry>>,
    pub ues: Vec<UeChannel>,
    /// Round-robin rotation per slice (eMBB, URLLC).
    pub rr_offset: [usize; 2],
    pub arrived: SliceCounts,
    pub delivered: SliceCounts,
    pub dropped: SliceCounts,
}

impl EnvState {
    pub fn ues_of(&self, slice: Slice) -> impl Iterator<Item = usize> + '_ {
        self.ue_slices
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == slice)
            .map(|(i, _)| i)
    }

    pub fn queued(&self, slice: Slice) -> usize {
        self.ues_of(slice).map(|u| self.queues[u].len()).sum()
    }

    pub fn in_flight(&self, slice: Slice) -> usize {
        self.ues_of(slice).map(|u| self.harq_in_flight[u].len()).sum()
    }

    pub fn observation(&self, queue_cap: usize) -> Observation {
        Observation::new(
            self.queued(Slice::Embb),
            self.queued(Slice::Urllc),
            queue_cap,
        )
    }

    /// Checks FIFO order, the HARQ attempt cap and packet conservation.
    pub fn check_invariants(&self, max_attempts: u32) -> Result<(), String> {
        for (ue, q) in self.queues.iter().enumerate() {
            let mut last = 0;
            for p in q {
                if p.arrival_tti < last {
                    return Err(format!("queue of UE {ue} is out of FIFO order"));
                }
                last = p.arrival_tti;
                if p.attempts > max_attempts {
                    return Err(format!("queued packet of UE {ue} has {} attempts", p.attempts));
                }
            }
        }
        for (ue, hs) in self.harq_in_flight.iter().enumerate() {
            for h in hs {
                if h.packet.attempts == 0 || h.packet.attempts > max_attempts {
                    return Err(format!(
                        "in-flight packet of UE {ue} has {} attempts",
                        h.packet.attempts
                    ));
                }
            }
        }
        for slice in [Slice::Embb, Slice::Urllc] {
            let resident = (self.queued(slice) + self.in_flight(slice)) as u64;
            let accounted = self.delivered.get(slice) + self.dropped.get(slice) + resident;
            if self.arrived.get(slice) != accounted {
                return Err(format!(
                    "{} conservation: arrived {} != delivered {} + dropped {} + resident {resident}",
                    slice.as_str(),
                    self.arrived.get(slice),
                    self.delivered.get(slice),
                    self.dropped.get(slice)
                ));
            }
        }
        Ok(())
    }
}

/// A packet that reached its UE this TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivered {
    pub slice: Slice,
    pub ue_id: usize,
    pub delay: DelayBreakdown,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtiMetrics {
    pub delivered: Vec<Delivered>,
    pub dropped: SliceCounts,
    pub allocation: Allocation,
    pub reward: f64,
}

impl TtiMetrics {
    pub fn delivered_count(&self, slice: Slice) -> usize {
        self.delivered.iter().filter(|d| d.slice == slice).count()
    }
}

/// Per-TTI objective.
///
/// `w_embb` times the eMBB throughput in Mbps averaged over all eMBB UEs,
/// plus `w_urllc` times the URLLC delay margin `D_tar - D_v` averaged over all
/// URLLC UEs, where a UE without deliveries this TTI counts as on target
/// (margin zero). `D_v` is the mean delay of UE `v`'s deliveries.
pub fn reward(
    delivered: &[Delivered],
    mdp: &MdpConfig,
    traffic: &TrafficConfig,
    tti_ms: f64,
) -> f64 {
    let embb_bits: u64 = delivered
        .iter()
        .filter(|d| d.slice == Slice::Embb)
        .map(|d| d.bits)
        .sum();
    let throughput_mbps = embb_bits as f64 / (tti_ms * 1e-3) / 1e6 / traffic.embb_ues as f64;

    // (ue, delay sum, count) in first-delivery order
    let mut per_ue: Vec<(usize, f64, usize)> = Vec::new();
    for d in delivered.iter().filter(|d| d.slice == Slice::Urllc) {
        match per_ue.iter_mut().find(|e| e.0 == d.ue_id) {
            Some(e) => {
                e.1 += d.delay.total;
                e.2 += 1;
            }
            None => per_ue.push((d.ue_id, d.delay.total, 1)),
        }
    }
    let margin: f64 = per_ue
        .iter()
        .map(|&(_, sum, n)| mdp.d_target_ms - sum / n as f64)
        .sum::<f64>()
        / traffic.urllc_ues as f64;

    mdp.w_embb * throughput_mbps + mdp.w_urllc * margin
}

/// Adds one TTI of Poisson arrivals to every UE queue.
pub fn arrivals<R: Rng + ?Sized>(state: &mut EnvState, traffic: &TrafficConfig, rng: &mut R) {
    let embb = PacketSource::new(traffic.embb_rate, traffic.embb_pkt_bytes);
    let urllc = PacketSource::new(traffic.urllc_rate, traffic.urllc_pkt_bytes);
    for ue in 0..state.ue_slices.len() {
        let slice = state.ue_slices[ue];
        let source = match slice {
            Slice::Embb => &embb,
            Slice::Urllc => &urllc,
        };
        let k = source.draw(rng);
        for _ in 0..k {
            state.queues[ue].push_back(Packet {
                slice,
                ue_id: ue,
                size_bits: source.size_bits,
                arrival_tti: state.tti,
                attempts: 0,
                remaining_bits: source.size_bits as f64,
                service_start: None,
            });
        }
        state.arrived.add(slice, k);
    }
}

struct PacketSource {
    poisson: Option<Poisson<f64>>,
    size_bits: u64,
}

impl PacketSource {
    fn new(rate: f64, bytes: usize) -> Self {
        Self {
            poisson: (rate > 0.0).then(|| Poisson::new(rate).expect("finite positive rate")),
            size_bits: bytes as u64 * 8,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.poisson.as_ref().map_or(0, |p| p.sample(rng) as u64)
    }
}

/// Maps an inter-slice split onto UEs.
///
/// eMBB owns RBGs `0..r_embb`, URLLC the rest. Within a slice, the RBGs are
/// split as evenly as possible over UEs that have queued packets and a free
/// HARQ process, in UE order rotated by the slice's round-robin offset;
/// earlier UEs in that order take the remainder. RBGs of a slice without
/// backlog stay unassigned.
pub fn schedule_intra_slice(
    state: &EnvState,
    action: SliceAction,
    num_processes: usize,
) -> Allocation {
    let num_rbg = action.r_embb + action.r_urllc;
    let mut alloc = Allocation::empty(num_rbg);
    let ranges = [
        (Slice::Embb, 0, action.r_embb, state.rr_offset[0]),
        (Slice::Urllc, action.r_embb, num_rbg, state.rr_offset[1]),
    ];
    for (slice, start, end, offset) in ranges {
        let members: Vec<usize> = state.ues_of(slice).collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        let mut eligible: Vec<(usize, usize)> = members
            .iter()
            .enumerate()
            .filter(|(_, &ue)| {
                !state.queues[ue].is_empty() && state.harq_in_flight[ue].len() < num_processes
            })
            .map(|(local, &ue)| ((local + n - offset % n) % n, ue))
            .collect();
        if eligible.is_empty() {
            continue;
        }
        eligible.sort_unstable();
        let rbgs = end - start;
        let k = eligible.len();
        let (base, extra) = (rbgs / k, rbgs % k);
        let mut r = start;
        for (i, &(_, ue)) in eligible.iter().enumerate() {
            let count = base + usize::from(i < extra);
            for slot in &mut alloc.assignment[r..r + count] {
                *slot = Some((slice, ue));
            }
            r += count;
        }
    }
    alloc
}

/// Result of one TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub metrics: TtiMetrics,
}

/// One episode's worth of environment: state plus its private random streams.
#[derive(Debug, Clone)]
pub struct SlicingEnv {
    config: ScenarioConfig,
    state: EnvState,
    traffic_rng: SimRng,
    harq_rng: SimRng,
}

/// Fresh state for `episode`: empty queues and newly drawn UE positions.
pub fn reset(config: &ScenarioConfig, episode: usize) -> EnvState {
    let traffic = &config.traffic;
    let ue_slices: Vec<Slice> = std::iter::repeat_n(Slice::Urllc, traffic.urllc_ues)
        .chain(std::iter::repeat_n(Slice::Embb, traffic.embb_ues))
        .collect();
    let layout = CellLayout::new(&config.radio);
    let mut channel_rng = episode_stream(config.seed, CHANNEL, episode);
    let ues = (0..ue_slices.len())
        .map(|id| draw_ue_channel(id, &config.radio, &layout, &mut channel_rng))
        .collect();
    let n = ue_slices.len();
    EnvState {
        tti: 0,
        episode,
        ue_slices,
        queues: vec![VecDeque::new(); n],
        harq_in_flight: vec![Vec::new(); n],
        ues,
        rr_offset: [0, 0],
        arrived: SliceCounts::default(),
        delivered: SliceCounts::default(),
        dropped: SliceCounts::default(),
    }
}

impl SlicingEnv {
    pub fn new(config: &ScenarioConfig, episode: usize) -> Self {
        Self {
            config: config.clone(),
            state: reset(config, episode),
            traffic_rng: episode_stream(config.seed, TRAFFIC, episode),
            harq_rng: episode_stream(config.seed, HARQ, episode),
        }
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn observation(&self) -> Observation {
        self.state.observation(self.config.mdp.queue_cap)
    }

    pub fn step(&mut self, action: SliceAction) -> Result<StepOutcome, EnvError> {
        let num_rbg = self.config.radio.num_rbg;
        SliceAction::new(action.r_embb, action.r_urllc, num_rbg)?;

        let mut delivered = Vec::new();
        let mut dropped = SliceCounts::default();

        self.release_harq(&mut delivered, &mut dropped);
        arrivals(&mut self.state, &self.config.traffic, &mut self.traffic_rng);
        let allocation =
            schedule_intra_slice(&self.state, action, self.config.harq.num_processes);
        self.serve(&allocation, &mut delivered, &mut dropped);
        self.drop_expired(&mut dropped);

        let reward = reward(
            &delivered,
            &self.config.mdp,
            &self.config.traffic,
            self.config.radio.tti_ms,
        );

        let st = &mut self.state;
        for d in &delivered {
            st.delivered.add(d.slice, 1);
        }
        st.dropped.add(Slice::Embb, dropped.embb);
        st.dropped.add(Slice::Urllc, dropped.urllc);
        st.tti += 1;
        let n_urllc = self.config.traffic.urllc_ues;
        let n_embb = self.config.traffic.embb_ues;
        st.rr_offset = [(st.rr_offset[0] + 1) % n_embb, (st.rr_offset[1] + 1) % n_urllc];

        Ok(StepOutcome {
            observation: self.observation(),
            metrics: TtiMetrics {
                delivered,
                dropped,
                allocation,
                reward,
            },
        })
    }

    fn delivered_packet(&self, packet: &Packet, tx_ms: f64, queue_ms: f64) -> Delivered {
        let retx = retx_delay(packet.attempts, &self.config.harq, self.config.radio.tti_ms)
            .expect("attempts never exceed the HARQ cap");
        Delivered {
            slice: packet.slice,
            ue_id: packet.ue_id,
            delay: DelayBreakdown::new(tx_ms, retx, queue_ms, self.config.mdp.edge_delay_ms),
            bits: packet.size_bits,
        }
    }

    fn release_harq(&mut self, delivered: &mut Vec<Delivered>, dropped: &mut SliceCounts) {
        let tti = self.state.tti;
        let harq = self.config.harq.clone();
        for ue in 0..self.state.harq_in_flight.len() {
            let entries = std::mem::take(&mut self.state.harq_in_flight[ue]);
            let mut keep = Vec::with_capacity(entries.len());
            for mut h in entries {
                if h.release_tti != tti {
                    keep.push(h);
                    continue;
                }
                h.packet.attempts += 1;
                let failed = self.harq_rng.random::<f64>() < harq.initial_bler;
                if !failed {
                    delivered.push(self.delivered_packet(&h.packet, h.tx_ms, h.queue_ms));
                } else if h.packet.attempts < harq.max_attempts() {
                    h.release_tti = tti + harq.rtt_ttis;
                    keep.push(h);
                } else {
                    dropped.add(h.packet.slice, 1);
                }
            }
            self.state.harq_in_flight[ue] = keep;
        }
    }

    fn serve(
        &mut self,
        allocation: &Allocation,
        delivered: &mut Vec<Delivered>,
        dropped: &mut SliceCounts,
    ) {
        let tti = self.state.tti;
        let tti_ms = self.config.radio.tti_ms;
        let b_rb = self.config.radio.rb_bandwidth_hz();
        let harq = self.config.harq.clone();

        for ue in 0..self.state.queues.len() {
            let rbgs = allocation.rbgs_of(ue);
            if rbgs.is_empty() {
                continue;
            }
            let sinrs = vec![self.state.ues[ue].sinr; rbgs.len()];
            let capacity = link_capacity(&rbgs, &sinrs, b_rb).expect("equal lengths");
            let mut budget = capacity * self.config.radio.tti_seconds();

            while budget > 0.0 && self.state.harq_in_flight[ue].len() < harq.num_processes {
                let Some(head) = self.state.queues[ue].front_mut() else {
                    break;
                };
                let start = *head.service_start.get_or_insert(tti);
                let sent = budget.min(head.remaining_bits);
                head.remaining_bits -= sent;
                budget -= sent;
                if head.remaining_bits > 1e-9 {
                    break;
                }
                let mut packet = self.state.queues[ue].pop_front().expect("head exists");
                packet.attempts += 1;
                let tx_ms = (tti - start + 1) as f64 * tti_ms;
                let queue_ms = (start - packet.arrival_tti) as f64 * tti_ms;
                let failed = self.harq_rng.random::<f64>() < harq.initial_bler;
                if !failed {
                    delivered.push(self.delivered_packet(&packet, tx_ms, queue_ms));
                } else if packet.attempts < harq.max_attempts() {
                    self.state.harq_in_flight[ue].push(HarqEntry {
                        packet,
                        release_tti: tti + harq.rtt_ttis,
                        tx_ms,
                        queue_ms,
                    });
                } else {
                    dropped.add(packet.slice, 1);
                }
            }
        }
    }

    fn drop_expired(&mut self, dropped: &mut SliceCounts) {
        let tti = self.state.tti;
        let tti_ms = self.config.radio.tti_ms;
        let budget = self.config.mdp.urllc_delay_budget_ms;
        for ue in 0..self.state.queues.len() {
            if self.state.ue_slices[ue] != Slice::Urllc {
                continue;
            }
            let q = &mut self.state.queues[ue];
            while q
                .front()
                .is_some_and(|p| (tti - p.arrival_tti) as f64 * tti_ms > budget)
            {
                q.pop_front();
                dropped.add(Slice::Urllc, 1);
            }
        }
    }
}

/// Per-episode summary used for all reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub mean_reward: f64,
    /// Mean delay of delivered URLLC packets (0 when none were delivered).
    pub mean_urllc_delay_ms: f64,
    /// Delivered eMBB bit rate per eMBB UE.
    pub mean_embb_throughput_mbps: f64,
    /// URLLC dropped / (dropped + delivered), 0 when both are zero.
    pub pdr_urllc: f64,
}

/// Folds [`TtiMetrics`] into [`EpisodeMetrics`].
#[derive(Debug, Clone, Default)]
pub struct EpisodeAccumulator {
    ttis: u64,
    reward_sum: f64,
    urllc_delay_sum: f64,
    urllc_delivered: u64,
    urllc_dropped: u64,
    embb_bits: u64,
}

impl EpisodeAccumulator {
    pub fn record(&mut self, m: &TtiMetrics) {
        self.ttis += 1;
        self.reward_sum += m.reward;
        for d in &m.delivered {
            match d.slice {
                Slice::Urllc => {
                    self.urllc_delay_sum += d.delay.total;
                    self.urllc_delivered += 1;
                }
                Slice::Embb => self.embb_bits += d.bits,
            }
        }
        self.urllc_dropped += m.dropped.urllc;
    }

    pub fn finish(&self, config: &ScenarioConfig) -> EpisodeMetrics {
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let seconds = self.ttis as f64 * config.radio.tti_seconds();
        EpisodeMetrics {
            mean_reward: ratio(self.reward_sum, self.ttis as f64),
            mean_urllc_delay_ms: ratio(self.urllc_delay_sum, self.urllc_delivered as f64),
            mean_embb_throughput_mbps: ratio(
                self.embb_bits as f64 / 1e6,
                seconds * config.traffic.embb_ues as f64,
            ),
            pdr_urllc: ratio(
                self.urllc_dropped as f64,
                (self.urllc_dropped + self.urllc_delivered) as f64,
            ),
        }
    }
}
