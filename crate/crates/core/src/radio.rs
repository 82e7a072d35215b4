//! Link-level radio model: path loss, channel gains, SINR, Shannon capacity
//! and the per-packet delay components.
//!
//! Everything here is a pure function. Channel gains combine path loss,
//! penetration loss, antenna gain and a log-normal shadowing draw; there is
//! no fast fading, so a UE sees the same SINR on every RBG for a whole
//! episode.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{HarqConfig, RadioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("distance must be > 0 km, got {0}")]
    NonPositiveDistance(f64),
    #[error("{rbgs} RBGs but {sinrs} SINR values")]
    LengthMismatch { rbgs: usize, sinrs: usize },
    #[error("{attempts} transmission attempts exceed the HARQ limit of {max}")]
    TooManyAttempts { attempts: u32, max: u32 },
    #[error("attempt count must be >= 1")]
    ZeroAttempts,
}

/// Traffic class of a UE or packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slice {
    Embb,
    Urllc,
}

impl Slice {
    pub fn as_str(self) -> &'static str {
        match self {
            Slice::Embb => "embb",
            Slice::Urllc => "urllc",
        }
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Log-distance path loss `intercept + slope * log10(D[km])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl PathLossModel {
    pub fn from_config(radio: &RadioConfig) -> Self {
        Self {
            intercept_db: radio.path_loss_intercept_db,
            slope_db: radio.path_loss_slope_db,
        }
    }

    pub fn path_loss(&self, distance_km: f64) -> Result<f64, RadioError> {
        if distance_km.is_nan() || distance_km <= 0.0 {
            return Err(RadioError::NonPositiveDistance(distance_km));
        }
        Ok(self.intercept_db + self.slope_db * distance_km.log10())
    }
}

/// Linear power gain of one eNB-to-UE link.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ChannelGain(pub f64);

impl ChannelGain {
    /// `gain_dB = -(path_loss + penetration - antenna_gain) + shadowing`.
    pub fn from_losses(
        path_loss_db: f64,
        penetration_loss_db: f64,
        antenna_gain_db: f64,
        shadowing_db: f64,
    ) -> Self {
        let db = -(path_loss_db + penetration_loss_db - antenna_gain_db) + shadowing_db;
        ChannelGain(db_to_linear(db))
    }

    pub fn linear(self) -> f64 {
        self.0
    }
}

/// Signal to interference plus noise ratio on one RBG, in linear units.
///
/// `interferers` holds the transmit power and gain of every co-channel
/// transmitter seen by the receiver.
pub fn sinr(
    target: ChannelGain,
    tx_power_dbm: f64,
    interferers: &[(f64, ChannelGain)],
    noise_total_dbm: f64,
) -> f64 {
    let signal = dbm_to_mw(tx_power_dbm) * target.0;
    let interference: f64 = interferers
        .iter()
        .map(|&(p, g)| dbm_to_mw(p) * g.0)
        .sum();
    signal / (dbm_to_mw(noise_total_dbm) + interference)
}

/// Shannon capacity in bit/s summed over a set of RBGs.
pub fn link_capacity(
    rbg_set: &[usize],
    per_rbg_sinr: &[f64],
    rb_bandwidth_hz: f64,
) -> Result<f64, RadioError> {
    if rbg_set.len() != per_rbg_sinr.len() {
        return Err(RadioError::LengthMismatch {
            rbgs: rbg_set.len(),
            sinrs: per_rbg_sinr.len(),
        });
    }
    Ok(per_rbg_sinr
        .iter()
        .map(|&s| rb_bandwidth_hz * (1.0 + s).log2())
        .sum())
}

/// Transmission delay with whole-TTI service quantization.
///
/// Returns `f64::INFINITY` when the capacity is zero (the packet cannot be
/// served).
pub fn tx_delay(packet_bits: f64, capacity_bps: f64, tti_ms: f64) -> f64 {
    if capacity_bps <= 0.0 {
        return f64::INFINITY;
    }
    let bits_per_tti = capacity_bps * tti_ms * 1e-3;
    (packet_bits / bits_per_tti).ceil().max(1.0) * tti_ms
}

/// HARQ retransmission delay accumulated by a packet after `attempts`
/// transmission attempts.
pub fn retx_delay(attempts: u32, harq: &HarqConfig, tti_ms: f64) -> Result<f64, RadioError> {
    if attempts == 0 {
        return Err(RadioError::ZeroAttempts);
    }
    if attempts > harq.max_attempts() {
        return Err(RadioError::TooManyAttempts {
            attempts,
            max: harq.max_attempts(),
        });
    }
    Ok(f64::from(attempts - 1) * harq.rtt_ttis as f64 * tti_ms)
}

/// The four components of a delivered packet's latency, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub tx: f64,
    pub retx: f64,
    pub queue: f64,
    pub edge: f64,
    pub total: f64,
}

impl DelayBreakdown {
    pub fn new(tx: f64, retx: f64, queue: f64, edge: f64) -> Self {
        Self {
            tx,
            retx,
            queue,
            edge,
            total: tx + retx + queue + edge,
        }
    }

    /// True when `total` is exactly the sum of the parts and nothing is negative.
    pub fn is_consistent(&self) -> bool {
        self.total == self.tx + self.retx + self.queue + self.edge
            && self.tx >= 0.0
            && self.retx >= 0.0
            && self.queue >= 0.0
            && self.edge >= 0.0
    }
}

/// Placement of one UE relative to its serving eNB.
#[derive(Debug, Clone, PartialEq)]
pub struct UePosition {
    pub enb_id: usize,
    pub ue_id: usize,
    /// Distance to the serving eNB in km.
    pub distance_km: f64,
    /// Shadowing on the serving link, drawn once per episode.
    pub shadowing_db: f64,
    /// Coordinates in metres, serving eNB at the origin.
    pub x_m: f64,
    pub y_m: f64,
}

/// Fixed cell layout: the serving eNB at the origin and its neighbours on a
/// hexagonal ring at the inter-site distance `sqrt(3) * radius`.
#[derive(Debug, Clone)]
pub struct CellLayout {
    pub enb_xy_m: Vec<(f64, f64)>,
}

impl CellLayout {
    pub fn new(radio: &RadioConfig) -> Self {
        let isd = 3f64.sqrt() * radio.cell_radius_m;
        let mut enb_xy_m = vec![(0.0, 0.0)];
        for k in 0..radio.num_enb.saturating_sub(1) {
            let ring = (k / 6 + 1) as f64;
            let angle = (k % 6) as f64 * PI / 3.0;
            enb_xy_m.push((ring * isd * angle.cos(), ring * isd * angle.sin()));
        }
        Self { enb_xy_m }
    }
}

/// Static per-episode channel of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct UeChannel {
    pub position: UePosition,
    /// SINR on every RBG (linear); neighbours transmit on all RBGs at full power.
    pub sinr: f64,
}

/// Draws a UE uniformly over the serving disk and evaluates its SINR
/// against full-power co-channel interference from every neighbour eNB.
pub fn draw_ue_channel<R: Rng + ?Sized>(
    ue_id: usize,
    radio: &RadioConfig,
    layout: &CellLayout,
    rng: &mut R,
) -> UeChannel {
    let model = PathLossModel::from_config(radio);
    let shadowing = Normal::new(0.0, radio.shadowing_sigma_db)
        .expect("validated shadowing sigma is finite and >= 0");

    // 1 - u lies in (0, 1], so the distance is never zero.
    let u: f64 = rng.random();
    let radius_m = radio.cell_radius_m * (1.0 - u).sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    let (x_m, y_m) = (radius_m * theta.cos(), radius_m * theta.sin());
    let serving_shadow = shadowing.sample(rng);

    let gain = |dist_m: f64, shadow: f64| {
        let pl = model
            .path_loss(dist_m / 1000.0)
            .expect("distances are strictly positive");
        ChannelGain::from_losses(pl, radio.penetration_loss_db, radio.antenna_gain_db, shadow)
    };

    let target = gain(radius_m, serving_shadow);
    let interferers: Vec<(f64, ChannelGain)> = layout.enb_xy_m[1..]
        .iter()
        .map(|&(ex, ey)| {
            let d = ((x_m - ex).powi(2) + (y_m - ey).powi(2)).sqrt().max(1e-3);
            (radio.tx_power_per_rb_dbm, gain(d, shadowing.sample(rng)))
        })
        .collect();

    UeChannel {
        position: UePosition {
            enb_id: 0,
            ue_id,
            distance_km: radius_m / 1000.0,
            shadowing_db: serving_shadow,
            x_m,
            y_m,
        },
        sinr: sinr(
            target,
            radio.tx_power_per_rb_dbm,
            &interferers,
            radio.noise_per_rb_dbm(),
        ),
    }
}

/// RBG-to-UE assignment of one TTI. Each RBG holds at most one UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub assignment: Vec<Option<(Slice, usize)>>,
}

impl Allocation {
    pub fn empty(num_rbg: usize) -> Self {
        Self {
            assignment: vec![None; num_rbg],
        }
    }

    pub fn rbgs_of(&self, ue_id: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, Some((_, u)) if *u == ue_id))
            .map(|(r, _)| r)
            .collect()
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    pub fn count_for_slice(&self, slice: Slice) -> usize {
        self.assignment
            .iter()
            .filter(|a| matches!(a, Some((s, _)) if *s == slice))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_scenario;
    use crate::rng::{rng_stream, CHANNEL};
    use proptest::prelude::*;

    fn model() -> PathLossModel {
        PathLossModel::from_config(&default_scenario().radio)
    }

    #[test]
    fn path_loss_reference_points() {
        let m = model();
        assert_eq!(m.path_loss(1.0).unwrap(), 128.1);
        assert!((m.path_loss(0.125).unwrap() - 94.144).abs() <= 0.001);
        assert!((m.path_loss(0.010).unwrap() - 52.9).abs() <= 0.1);
    }

    #[test]
    fn path_loss_rejects_non_positive_distance() {
        let m = model();
        assert_eq!(m.path_loss(0.0), Err(RadioError::NonPositiveDistance(0.0)));
        assert!(m.path_loss(-1.0).is_err());
        assert!(m.path_loss(f64::NAN).is_err());
    }

    #[test]
    fn sinr_hand_values() {
        let noise_dbm = -100.0;
        let noise_mw = dbm_to_mw(noise_dbm);
        // p = 1 mW, so p*q = noise power when q = noise_mw.
        let target = ChannelGain(noise_mw);
        let s = sinr(target, 0.0, &[], noise_dbm);
        assert!((s - 1.0).abs() < 1e-12);
        let s = sinr(target, 0.0, &[(0.0, ChannelGain(noise_mw))], noise_dbm);
        assert!((s - 0.5).abs() < 1e-12);
        let s = sinr(target, 0.0, &[(0.0, ChannelGain(1e-300))], noise_dbm);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_hand_values() {
        assert_eq!(link_capacity(&[0], &[1.0], 180e3).unwrap(), 180e3);
        assert_eq!(link_capacity(&[], &[], 180e3).unwrap(), 0.0);
        assert_eq!(link_capacity(&[0, 1], &[1.0, 3.0], 180e3).unwrap(), 540e3);
        assert_eq!(
            link_capacity(&[0, 1], &[1.0], 180e3),
            Err(RadioError::LengthMismatch { rbgs: 2, sinrs: 1 })
        );
    }

    #[test]
    fn tx_delay_quantization() {
        let tti = 0.1429;
        assert_eq!(tx_delay(400.0, 2.8e6, tti), tti);
        assert_eq!(tx_delay(400.0, 0.0, tti), f64::INFINITY);
        // Exactly one TTI worth of bits.
        let cap = 1e6;
        let per_tti = cap * tti * 1e-3;
        assert_eq!(tx_delay(per_tti, cap, tti), tti);
        assert_eq!(tx_delay(per_tti + 1.0, cap, tti), 2.0 * tti);
    }

    #[test]
    fn retx_delay_values() {
        let harq = default_scenario().harq;
        let tti = 0.1429;
        assert_eq!(retx_delay(1, &harq, tti).unwrap(), 0.0);
        assert!((retx_delay(2, &harq, tti).unwrap() - 0.5716).abs() < 1e-12);
        assert_eq!(
            retx_delay(3, &harq, tti),
            Err(RadioError::TooManyAttempts { attempts: 3, max: 2 })
        );
        assert_eq!(retx_delay(0, &harq, tti), Err(RadioError::ZeroAttempts));
    }

    #[test]
    fn delay_breakdown_sums() {
        let d = DelayBreakdown::new(0.1429, 0.5716, 0.2858, 0.1);
        assert!(d.is_consistent());
        assert_eq!(d.total, 0.1429 + 0.5716 + 0.2858 + 0.1);
    }

    #[test]
    fn channel_gain_composition() {
        let g = ChannelGain::from_losses(100.0, 5.0, 15.0, 0.0);
        assert!((g.linear() - 1e-9).abs() < 1e-21);
        let shadowed = ChannelGain::from_losses(100.0, 5.0, 15.0, 10.0);
        assert!((shadowed.linear() / g.linear() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn layout_places_neighbours_on_ring() {
        let radio = default_scenario().radio;
        let layout = CellLayout::new(&radio);
        assert_eq!(layout.enb_xy_m.len(), 3);
        let isd = 3f64.sqrt() * 125.0;
        for &(x, y) in &layout.enb_xy_m[1..] {
            assert!(((x * x + y * y).sqrt() - isd).abs() < 1e-9);
        }
    }

    #[test]
    fn drawn_ues_stay_in_cell() {
        let radio = default_scenario().radio;
        let layout = CellLayout::new(&radio);
        let mut rng = rng_stream(1, CHANNEL);
        for id in 0..2000 {
            let ue = draw_ue_channel(id, &radio, &layout, &mut rng);
            assert!(ue.position.distance_km > 0.0);
            assert!(ue.position.distance_km <= radio.cell_radius_m / 1000.0);
            assert!(ue.sinr.is_finite() && ue.sinr > 0.0);
        }
    }

    proptest! {
        #[test]
        fn path_loss_strictly_increasing(a in 1e-4f64..10.0, b in 1e-4f64..10.0) {
            prop_assume!(a < b);
            let m = model();
            prop_assert!(m.path_loss(a).unwrap() < m.path_loss(b).unwrap());
        }

        #[test]
        fn capacity_monotone_and_additive(
            s in proptest::collection::vec(0.0f64..1e4, 0..8),
            t in proptest::collection::vec(0.0f64..1e4, 0..8),
            bump in 0.0f64..100.0,
        ) {
            let ids = |v: &Vec<f64>| (0..v.len()).collect::<Vec<_>>();
            let cs = link_capacity(&ids(&s), &s, 180e3).unwrap();
            let ct = link_capacity(&ids(&t), &t, 180e3).unwrap();
            let joined: Vec<f64> = s.iter().chain(&t).copied().collect();
            let cj = link_capacity(&ids(&joined), &joined, 180e3).unwrap();
            prop_assert!((cj - (cs + ct)).abs() <= 1e-9 * cj.max(1.0));
            if !s.is_empty() {
                let mut up = s.clone();
                up[0] += bump;
                prop_assert!(link_capacity(&ids(&up), &up, 180e3).unwrap() >= cs);
            }
        }
    }
}
