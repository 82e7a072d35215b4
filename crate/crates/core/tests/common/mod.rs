#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sliceq_core::env::{SliceAction, SlicingEnv};
use sliceq_core::radio::Slice;
use sliceq_core::{default_scenario, ScenarioConfig};

/// A valid scenario with every environment knob drawn at random.
pub fn random_config<R: Rng>(rng: &mut R) -> ScenarioConfig {
    let mut c = default_scenario();
    c.seed = rng.random_range(0..=i64::MAX as u64);
    c.radio.num_rbg = rng.random_range(1..=20);
    c.radio.num_enb = rng.random_range(1..=7);
    c.radio.tti_ms = rng.random_range(0.05..0.5);
    c.radio.shadowing_sigma_db = rng.random_range(0.0..12.0);
    c.traffic.urllc_ues = rng.random_range(1..=12);
    c.traffic.embb_ues = rng.random_range(1..=8);
    c.traffic.urllc_rate = rng.random_range(0.01..2.0);
    c.traffic.embb_rate = rng.random_range(0.01..2.0);
    c.traffic.urllc_pkt_bytes = rng.random_range(10..=400);
    c.traffic.embb_pkt_bytes = rng.random_range(10..=2000);
    c.harq.rtt_ttis = rng.random_range(1..=6);
    c.harq.num_processes = rng.random_range(1..=8);
    c.harq.max_retx = rng.random_range(0..=3);
    c.harq.initial_bler = rng.random_range(0.0..0.6);
    c.mdp.queue_cap = rng.random_range(1..=15);
    c.mdp.d_target_ms = rng.random_range(0.2..3.0);
    c.mdp.urllc_delay_budget_ms = c.mdp.d_target_ms + rng.random_range(0.0..3.0);
    c.mdp.edge_delay_ms = rng.random_range(0.0..0.5);
    c.mdp.ttis_per_episode = rng.random_range(50..=200);
    c.validate().expect("generated config is valid");
    c
}

pub fn random_config_from_seed(seed: u64) -> ScenarioConfig {
    random_config(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Plays one episode with uniformly random actions and checks every
/// environment invariant after each step.
pub fn check_episode(c: &ScenarioConfig, episode: usize, action_seed: u64) -> Result<(), String> {
    let mut env = SlicingEnv::new(c, episode);
    let mut actions = ChaCha8Rng::seed_from_u64(action_seed);
    let num_rbg = c.radio.num_rbg;
    let cap = c.mdp.queue_cap;
    let max_attempts = c.harq.max_attempts();
    let max_retx_ms = c.harq.max_retx as f64 * c.harq.rtt_ttis as f64 * c.radio.tti_ms;

    for tti in 0..c.mdp.ttis_per_episode {
        let action = SliceAction::from_index(actions.random_range(0..=num_rbg), num_rbg);
        let before = env.state().clone();
        let out = env.step(action).map_err(|e| e.to_string())?;
        let st = env.state();
        let ctx = |msg: String| format!("tti {tti}: {msg}");

        st.check_invariants(max_attempts).map_err(ctx)?;

        // Every RBG goes to at most one UE of the slice that owns it.
        let alloc = &out.metrics.allocation;
        if alloc.assignment.len() != num_rbg {
            return Err(ctx(format!("{} RBGs in allocation", alloc.assignment.len())));
        }
        for slice in [Slice::Embb, Slice::Urllc] {
            let used = alloc.count_for_slice(slice);
            if used > action.rbgs_for(slice) {
                return Err(ctx(format!("{} uses {used} RBGs of {}", slice.as_str(), action.rbgs_for(slice))));
            }
        }
        for &(slice, ue) in alloc.assignment.iter().flatten() {
            if st.ue_slices.get(ue) != Some(&slice) {
                return Err(ctx(format!("RBG given to UE {ue} outside {}", slice.as_str())));
            }
        }
        let per_ue: usize = (0..st.ue_slices.len()).map(|u| alloc.rbgs_of(u).len()).sum();
        if per_ue != alloc.assigned_count() {
            return Err(ctx("an RBG is counted for more than one UE".into()));
        }

        for d in &out.metrics.delivered {
            let delay = &d.delay;
            if !delay.is_consistent() {
                return Err(ctx(format!("delay parts do not sum: {delay:?}")));
            }
            if delay.retx > max_retx_ms + 1e-9 {
                return Err(ctx(format!("retx delay {} above HARQ cap", delay.retx)));
            }
            if delay.tx < c.radio.tti_ms - 1e-12 {
                return Err(ctx(format!("tx delay {} below one TTI", delay.tx)));
            }
            if delay.edge != c.mdp.edge_delay_ms {
                return Err(ctx(format!("edge delay {}", delay.edge)));
            }
        }

        for slice in [Slice::Embb, Slice::Urllc] {
            let step_delivered = out.metrics.delivered_count(slice) as u64;
            if st.delivered.get(slice) - before.delivered.get(slice) != step_delivered {
                return Err(ctx(format!("{} delivery counter drifted", slice.as_str())));
            }
            if st.dropped.get(slice) - before.dropped.get(slice) != out.metrics.dropped.get(slice) {
                return Err(ctx(format!("{} drop counter drifted", slice.as_str())));
            }
        }

        let obs = out.observation;
        if obs.q_embb > cap || obs.q_urllc > cap {
            return Err(ctx(format!("observation {obs:?} above cap {cap}")));
        }
        if obs.q_embb != st.queued(Slice::Embb).min(cap) || obs.q_urllc != st.queued(Slice::Urllc).min(cap) {
            return Err(ctx(format!("observation {obs:?} is not the clamped queue")));
        }
        if obs.index(cap) >= c.mdp.num_states() {
            return Err(ctx(format!("state index {} out of range", obs.index(cap))));
        }
    }
    Ok(())
}
