//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Run with
//! `cargo test -p sliceq-core --test acceptance -- --nocapture`.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sliceq_core::agents::policy::{epsilon_greedy, majority_vote};
use sliceq_core::agents::update::{
    adversarial_update, double_q_update, q_update, DoubleQState, DoubleSide, EnsembleState,
};
use sliceq_core::agents::{Learner, QTable};
use sliceq_core::config::Algorithm;
use sliceq_core::env::{arrivals, reset};
use sliceq_core::harness::report::{csv_digest, runs_csv, REFERENCE_IMPROVEMENT};
use sliceq_core::harness::{compare, robustness, run, train, Metric, TraceWriter};
use sliceq_core::radio::{link_capacity, sinr, ChannelGain, PathLossModel, Slice};
use sliceq_core::rng::{rng_stream, COIN, EXPLORATION, TIE_BREAK, TRAFFIC};
use sliceq_core::{default_scenario, ScenarioConfig};

const SIGNIFICANCE: f64 = 0.05;
const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
const ORACLE_REL_TOL: f64 = 1e-12;
const VOTE_INSTANCES: usize = 1000;
const REDUCTION_EPISODES: usize = 10;
const RANDOM_EPISODES: u64 = 100;
const PATH_LOSS_125M_DB: f64 = 94.144;
const PATH_LOSS_TOL_DB: f64 = 0.001;
const SINR_INSTANCES: usize = 1000;
const DRAWS: usize = 10_000;
const POISSON_SIGMAS: f64 = 3.0;
const EPSILON: f64 = 0.3;
const EPSILON_TOL: f64 = 0.02;
const COIN_TOL: f64 = 0.02;
const GOLDEN_SEED: u64 = 42;
const GOLDEN_DIGEST: &str = include_str!("golden/default_seed42.sha256");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn seeds() -> Vec<u64> {
    SEEDS.collect()
}

fn ordering_and_metrics() -> (Outcome, Outcome) {
    let report = compare(
        &default_scenario(),
        &[Algorithm::QLearning, Algorithm::DoubleQ, Algorithm::SelfPlayEnsemble],
        &seeds(),
    )
    .expect("compare runs");
    let reward = |a| report.summary(a).unwrap().mean.reward;
    let gap = |c, b, m| *report.test(c, b, m).unwrap();

    let sp_dq = gap(Algorithm::SelfPlayEnsemble, Algorithm::DoubleQ, Metric::Reward);
    let dq_ql = gap(Algorithm::DoubleQ, Algorithm::QLearning, Metric::Reward);
    let ordering = outcome(
        sp_dq.significant(SIGNIFICANCE) && dq_ql.significant(SIGNIFICANCE),
        format!(
            "mean reward sp {:.5} dq {:.5} ql {:.5}; sp>dq p={:.3e}, dq>ql p={:.3e}",
            reward(Algorithm::SelfPlayEnsemble),
            reward(Algorithm::DoubleQ),
            reward(Algorithm::QLearning),
            sp_dq.p_value,
            dq_ql.p_value
        ),
    );

    let improvement = report.improvement(Algorithm::SelfPlayEnsemble).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Metric::UrllcDelay, Metric::EmbbThroughput, Metric::Pdr] {
        let t = gap(Algorithm::SelfPlayEnsemble, Algorithm::QLearning, m);
        pass &= t.significant(SIGNIFICANCE);
        parts.push(format!(
            "{} {:+.2}% [ref {:.2}%] p={:.3e}",
            m.as_str(),
            improvement.get(m),
            REFERENCE_IMPROVEMENT.get(m),
            t.p_value
        ));
    }
    (ordering, outcome(pass, parts.join("; ")))
}

fn adversarial_robustness() -> Outcome {
    let report = robustness(&default_scenario(), &seeds()).expect("robustness runs");
    let dq = report.entry(Algorithm::DoubleQ).unwrap();
    let sp = report.entry(Algorithm::SelfPlayEnsemble).unwrap();
    let less = report.self_play_less_degraded;
    outcome(
        less.significant(SIGNIFICANCE) && dq.reward_drop.significant(SIGNIFICANCE),
        format!(
            "reward degradation dq {:+.3}% sp {:+.3}%; sp less degraded p={:.3e}; dq clean>corrupted p={:.3e}",
            dq.degradation.reward, sp.degradation.reward, less.p_value, dq.reward_drop.p_value
        ),
    )
}

fn close(got: f64, want: f64) -> bool {
    (got - want).abs() <= ORACLE_REL_TOL * want.abs()
}

fn table(rows: &[&[f64]]) -> QTable {
    QTable::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

fn update_oracles() -> Outcome {
    let mut failures = Vec::new();
    let check = |failures: &mut Vec<String>, name: &str, got: f64, want: f64| {
        if !close(got, want) {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };

    // Q(0,0) = 0.5, r = 1, gamma = 0.2, max Q(1,.) = 2: target 1.4, step 0.5 -> 0.95.
    let mut q = table(&[&[0.5, 0.0], &[2.0, -1.0]]);
    q_update(&mut q, 0, 0, 1.0, 1, 0.5, 0.2);
    check(&mut failures, "q_update", q.get(0, 0), 0.95);

    // A picks argmax 1 of [1, 3] at s' and B evaluates it at 2: target 1.4 -> 0.7.
    // B picks argmax 0 of [5, 2] and A evaluates it at 1: target 1.2 -> 0.6.
    let dq = || {
        let mut s = DoubleQState::new(2, 2);
        s.tables[0] = table(&[&[0.0, 0.0], &[1.0, 3.0]]);
        s.tables[1] = table(&[&[0.0, 0.0], &[5.0, 2.0]]);
        s
    };
    let mut tie = rng_stream(0, TIE_BREAK);
    let mut coin = rng_stream(0, COIN);
    for _ in 0..8 {
        let mut s = dq();
        let side = double_q_update(&mut s, 0, 1, 1.0, 1, 0.5, 0.2, &mut coin, &mut tie);
        let (want, other) = match side {
            DoubleSide::A => (0.7, 1),
            DoubleSide::B => (0.6, 0),
        };
        check(&mut failures, "double_q_update", s.tables[side.index()].get(0, 1), want);
        if s.tables[other] != dq().tables[other] {
            failures.push("double_q_update wrote the other table".into());
        }
    }

    // 0.5 * 4 + 0.5 * 2 = 3 and 0.75 * 4 + 0.25 * 2 = 3.5.
    for (beta, want) in [(0.5, 3.0), (0.25, 3.5)] {
        let mut e = EnsembleState::new(1, 1, vec![0.5], beta, None);
        e.snapshots[0].set(0, 0, 2.0);
        e.tables[0].set(0, 0, 4.0);
        e.self_play_blend();
        check(&mut failures, "self_play_blend", e.tables[0].get(0, 0), want);
    }

    // Own min 0.5, partner min -1 at s': target 1 + 0.2 * -1 = 0.8; 0.2 -> 0.5.
    let mut tables = vec![
        table(&[&[0.2, 0.0], &[0.5, 2.0]]),
        table(&[&[0.0, 0.0], &[-1.0, 3.0]]),
    ];
    adversarial_update(&mut tables, 0, 0, 0, 1.0, 1, 0.5, 0.2).unwrap();
    check(&mut failures, "adversarial_update", tables[0].get(0, 0), 0.5);

    // Majority vote against a brute-force counter on tie-free tables.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut vote_tie = rng_stream(4, TIE_BREAK);
    let mut mismatches = 0;
    for _ in 0..VOTE_INSTANCES {
        let actions = 14;
        let tables: Vec<QTable> = (0..3)
            .map(|_| {
                let mut row: Vec<f64> = (0..actions).map(|_| rng.random::<f64>()).collect();
                row[rng.random_range(0..3)] += 10.0;
                QTable::from_rows(&[row])
            })
            .collect();
        let votes: Vec<usize> = tables
            .iter()
            .map(|t| {
                let row = t.row(0);
                (0..actions).fold(0, |best, a| if row[a] > row[best] { a } else { best })
            })
            .collect();
        let mut counts = vec![0usize; actions];
        for &v in &votes {
            counts[v] += 1;
        }
        let best = *counts.iter().max().unwrap();
        let winners: Vec<usize> = (0..actions).filter(|&a| counts[a] == best).collect();
        let got = majority_vote(&tables, 0, &mut vote_tie).unwrap();
        let exact = if winners.len() == 1 {
            got.action == winners[0]
        } else {
            winners.contains(&got.action)
        };
        if got.votes.as_deref() != Some(&votes[..]) || !exact {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        failures.push(format!("majority_vote: {mismatches} of {VOTE_INSTANCES} mismatches"));
    }

    if failures.is_empty() {
        outcome(true, format!("4 update rules within {ORACLE_REL_TOL:e} rel; {VOTE_INSTANCES} votes exact"))
    } else {
        outcome(false, failures.join("; "))
    }
}

fn trajectory(c: &ScenarioConfig) -> (Vec<u8>, Vec<f64>, Vec<QTable>) {
    let mut trace = TraceWriter::new(Vec::new()).unwrap();
    let (result, agent) = train(c, Some(&mut trace)).unwrap();
    let rewards = result.per_episode.iter().map(|m| m.mean_reward).collect();
    let tables = match agent.learner() {
        Learner::Single(t) => vec![t.clone()],
        Learner::Double(d) => d.tables.to_vec(),
        Learner::Ensemble(e) => e.tables.clone(),
    };
    (trace.into_inner().unwrap(), rewards, tables)
}

fn reductions() -> Outcome {
    let mut base = default_scenario().with_seed(5);
    base.mdp.num_episodes = REDUCTION_EPISODES;

    let ql = trajectory(&base.with_algorithm(Algorithm::QLearning));
    let mut single = base.with_algorithm(Algorithm::SelfPlayEnsemble);
    single.agent.num_tables = 1;
    single.agent.per_table_alpha = vec![base.agent.alpha];
    single.agent.beta = 0.0;
    let single = trajectory(&single);
    let a = ql == single;

    let mv = trajectory(&base.with_algorithm(Algorithm::EnsembleMv));
    let mut sp = base.with_algorithm(Algorithm::SelfPlayEnsemble);
    sp.agent.beta = 0.0;
    let sp = trajectory(&sp);
    let b = mv == sp;

    outcome(
        a && b,
        format!(
            "N=1 beta=0 ensemble == q_learning: {a}; beta=0 self-play == ensemble_mv: {b} ({REDUCTION_EPISODES} episodes, traces and tables)"
        ),
    )
}

fn environment_invariants() -> Outcome {
    let mut failures = Vec::new();
    for k in 0..RANDOM_EPISODES {
        let c = common::random_config_from_seed(1000 + k);
        if let Err(e) = common::check_episode(&c, k as usize, k) {
            failures.push(format!("episode {k}: {e}"));
        }
    }
    if failures.is_empty() {
        outcome(true, format!("{RANDOM_EPISODES} random episodes"))
    } else {
        outcome(false, failures.join("; "))
    }
}

fn radio_numerics() -> Outcome {
    let radio = default_scenario().radio;
    let pl = PathLossModel::from_config(&radio).path_loss(0.125).unwrap();
    let pl_ok = (pl - PATH_LOSS_125M_DB).abs() <= PATH_LOSS_TOL_DB;

    let b_rb = radio.rb_bandwidth_hz();
    let cap = link_capacity(&[0], &[1.0], b_rb).unwrap();
    let cap_ok = cap == b_rb;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    for _ in 0..SINR_INSTANCES {
        let gain = ChannelGain(10f64.powf(rng.random_range(-14.0..-6.0)));
        let power = rng.random_range(0.0..46.0);
        let noise = rng.random_range(-130.0..-90.0);
        let interferers: Vec<(f64, ChannelGain)> = (0..rng.random_range(0..6))
            .map(|_| {
                (
                    rng.random_range(0.0..46.0),
                    ChannelGain(10f64.powf(rng.random_range(-16.0..-8.0))),
                )
            })
            .collect();
        let s = sinr(gain, power, &interferers, noise);
        let stronger = sinr(ChannelGain(gain.0 * rng.random_range(1.01..10.0)), power, &interferers, noise);
        let louder = sinr(gain, power + rng.random_range(0.1..10.0), &interferers, noise);
        let noisier = sinr(gain, power, &interferers, noise + rng.random_range(0.1..10.0));
        let mut more = interferers.clone();
        more.push((power, ChannelGain(10f64.powf(rng.random_range(-14.0..-8.0)))));
        let crowded = sinr(gain, power, &more, noise);
        if !(s > 0.0 && stronger > s && louder > s && noisier < s && crowded < s) {
            violations += 1;
        }
    }
    outcome(
        pl_ok && cap_ok && violations == 0,
        format!(
            "PL(0.125 km) = {pl:.4} dB; capacity(SNR 1) = {cap} of b_RB {b_rb}; {violations} monotonicity violations in {SINR_INSTANCES}"
        ),
    )
}

fn statistical_fidelity() -> Outcome {
    let c = default_scenario();
    let mut state = reset(&c, 0);
    let mut rng = rng_stream(9, TRAFFIC);
    for _ in 0..DRAWS {
        arrivals(&mut state, &c.traffic, &mut rng);
    }
    let mut poisson_ok = true;
    let mut parts = Vec::new();
    for (slice, rate, ues) in [
        (Slice::Urllc, c.traffic.urllc_rate, c.traffic.urllc_ues),
        (Slice::Embb, c.traffic.embb_rate, c.traffic.embb_ues),
    ] {
        let expected = rate * ues as f64 * DRAWS as f64;
        let z = (state.arrived.get(slice) as f64 - expected) / expected.sqrt();
        poisson_ok &= z.abs() <= POISSON_SIGMAS;
        parts.push(format!("{} arrivals z={z:+.2}", slice.as_str()));
    }

    let q = QTable::zeros(1, 14);
    let mut explore = rng_stream(9, EXPLORATION);
    let mut tie = rng_stream(9, TIE_BREAK);
    let explored = (0..DRAWS)
        .filter(|_| epsilon_greedy(&q, 0, EPSILON, &mut explore, &mut tie).explored)
        .count();
    let freq = explored as f64 / DRAWS as f64;
    let eps_ok = (freq - EPSILON).abs() <= EPSILON_TOL;

    let mut dq = DoubleQState::new(1, 2);
    let mut coin = rng_stream(9, COIN);
    let heads = (0..DRAWS)
        .filter(|_| double_q_update(&mut dq, 0, 0, 0.0, 0, 0.5, 0.2, &mut coin, &mut tie) == DoubleSide::A)
        .count();
    let balance = heads as f64 / DRAWS as f64;
    let coin_ok = (balance - 0.5).abs() <= COIN_TOL;

    parts.push(format!("exploration {freq:.4}"));
    parts.push(format!("coin {balance:.4}"));
    outcome(poisson_ok && eps_ok && coin_ok, parts.join("; "))
}

fn determinism() -> Outcome {
    let c = default_scenario().with_seed(GOLDEN_SEED);
    let first = run(&c).unwrap();
    let second = run(&c).unwrap();
    let identical = runs_csv(std::slice::from_ref(&first)) == runs_csv(std::slice::from_ref(&second));
    let digest = csv_digest(std::slice::from_ref(&first));
    let golden = GOLDEN_DIGEST.trim();
    outcome(
        identical && digest == golden,
        format!("byte-identical: {identical}; digest {digest} (golden {golden})"),
    )
}

fn main() {
    let (ordering, metrics) = ordering_and_metrics();
    let results: Vec<(&str, Outcome)> = vec![
        ("algorithm ordering", ordering),
        ("metric direction", metrics),
        ("adversarial robustness", adversarial_robustness()),
        ("update-rule oracles", update_oracles()),
        ("reduction identities", reductions()),
        ("environment invariants", environment_invariants()),
        ("radio numerics", radio_numerics()),
        ("statistical fidelity", statistical_fidelity()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
