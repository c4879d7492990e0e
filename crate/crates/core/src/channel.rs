//! Network geometry, channel realizations and backscatter-enhanced effective channels.
//!
//! All channel amplitudes produced here are pre-divided by the square root of the
//! receiver noise power, so every SNR expression downstream assumes unit noise.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Tolerance on `‖w‖ ≤ 1` used by the SNR evaluators.
pub const NORM_SLACK: f64 = 1e-9;

/// Log-distance propagation model `L(d) = L0 + 10 α log10(d / d_ref)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub l0_db: f64,
    pub alpha: f64,
    #[serde(rename = "d_ref_m")]
    pub d_ref: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            l0_db: 30.0,
            alpha: 2.0,
            d_ref: 1.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("pathloss.alpha", "must be strictly positive"));
        }
        if !(self.d_ref > 0.0 && self.d_ref.is_finite()) {
            return Err(Error::invalid("pathloss.d_ref_m", "must be strictly positive"));
        }
        if !self.l0_db.is_finite() {
            return Err(Error::invalid("pathloss.l0_db", "must be finite"));
        }
        Ok(())
    }
}

/// Attenuation in dB at distance `d` meters.
pub fn path_loss_db(d: f64, model: &PathLossModel) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("path loss needs a positive distance, got {d}")));
    }
    Ok(model.l0_db + 10.0 * model.alpha * (d / model.d_ref).log10())
}

/// Physical description of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// HAP antenna count.
    pub antennas: usize,
    pub hap: [f64; 2],
    pub receiver: [f64; 2],
    pub relays: Vec<[f64; 2]>,
    pub pt_mw: f64,
    pub eta: f64,
    pub gamma_max: f64,
    pub pc_mw: f64,
    pub noise_density_dbm: f64,
    /// Interpret `noise_density_dbm` as the total in-band noise power instead of a per-Hz density.
    pub noise_is_total: bool,
    pub bandwidth_hz: f64,
    pub antenna_gain_db: f64,
    pub pathloss: PathLossModel,
    pub seed: u64,
}

impl Scenario {
    /// The parameter set used throughout the numerical study, placed on the given geometry.
    pub fn with_geometry(hap: [f64; 2], receiver: [f64; 2], relays: Vec<[f64; 2]>) -> Self {
        Self {
            antennas: 3,
            hap,
            receiver,
            relays,
            pt_mw: 50.0,
            eta: 0.5,
            gamma_max: 0.5,
            pc_mw: 0.0,
            noise_density_dbm: -90.0,
            noise_is_total: false,
            bandwidth_hz: 100e3,
            antenna_gain_db: 15.0,
            pathloss: PathLossModel::default(),
            seed: 0,
        }
    }

    /// Bundled five-relay topology with the HAP–receiver distance of 4 m.
    pub fn canonical() -> Self {
        Self::with_geometry(
            [0.0, 0.0],
            [4.0, 0.0],
            vec![[0.8, 0.9], [1.2, -0.7], [2.6, 0.8], [2.9, -0.5], [1.9, 0.1]],
        )
    }

    /// Random placement of `n` relays in the rectangle spanned between HAP and receiver.
    pub fn random_topology(seed: u64, n: usize, antennas: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7f4a_7c15_9e37_79b9);
        let relays = (0..n)
            .map(|_| [rng.gen_range(0.3..3.7), rng.gen_range(-1.5..1.5)])
            .collect();
        let mut s = Self::with_geometry([0.0, 0.0], [4.0, 0.0], relays);
        s.antennas = antennas;
        s.seed = seed;
        s
    }

    pub fn relay_count(&self) -> usize {
        self.relays.len()
    }

    pub fn hap_receiver_distance(&self) -> f64 {
        distance(self.hap, self.receiver)
    }

    /// Total noise power in milliwatts.
    pub fn noise_power_mw(&self) -> f64 {
        let dbm = if self.noise_is_total {
            self.noise_density_dbm
        } else {
            self.noise_density_dbm + 10.0 * self.bandwidth_hz.log10()
        };
        10f64.powf(dbm / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be strictly positive, got {v}")))
            }
        }
        if self.antennas == 0 {
            return Err(Error::invalid("k", "need at least one antenna"));
        }
        if self.relays.is_empty() {
            return Err(Error::invalid("relays_xy", "need at least one relay"));
        }
        positive("pt_mw", self.pt_mw)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max < 1.0) {
            return Err(Error::invalid(
                "gamma_max",
                format!("must lie in (0, 1), got {}", self.gamma_max),
            ));
        }
        if !(self.pc_mw >= 0.0 && self.pc_mw.is_finite()) {
            return Err(Error::invalid("pc_mw", "must be nonnegative"));
        }
        if !self.noise_density_dbm.is_finite() {
            return Err(Error::invalid("noise_density_dbm", "must be finite"));
        }
        if !self.antenna_gain_db.is_finite() {
            return Err(Error::invalid("antenna_gain_db", "must be finite"));
        }
        self.pathloss.validate()?;
        let coords = std::iter::once(("hap_xy", self.hap))
            .chain(std::iter::once(("rx_xy", self.receiver)))
            .chain(self.relays.iter().map(|r| ("relays_xy", *r)));
        for (key, p) in coords {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::invalid(key, "coordinates must be finite"));
            }
        }
        if self.hap_receiver_distance() <= 0.0 {
            return Err(Error::invalid("rx_xy", "receiver coincides with the HAP"));
        }
        for (i, r) in self.relays.iter().enumerate() {
            if distance(*r, self.hap) <= 0.0 || distance(*r, self.receiver) <= 0.0 {
                return Err(Error::invalid(
                    "relays_xy",
                    format!("relay {} coincides with the HAP or the receiver", i + 1),
                ));
            }
            for (j, q) in self.relays.iter().enumerate().skip(i + 1) {
                if distance(*r, *q) <= 0.0 {
                    return Err(Error::invalid(
                        "relays_xy",
                        format!("relays {} and {} coincide", i + 1, j + 1),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// HAP → receiver.
    pub f0: CVector,
    /// HAP → relay n.
    pub f: Vec<CVector>,
    /// Relay n → receiver.
    pub g: Vec<C64>,
    /// Relay n ↔ relay k; symmetric, zero diagonal.
    pub z: DMatrix<C64>,
}

impl ChannelSet {
    pub fn antennas(&self) -> usize {
        self.f0.len()
    }

    pub fn relay_count(&self) -> usize {
        self.g.len()
    }
}

/// Amplitude fading applied on top of the deterministic path loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fading {
    #[default]
    None,
    /// Unit-mean-power Rayleigh amplitudes from a stream independent of the phases.
    Rayleigh,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GeneratorOptions {
    pub fading: Fading,
}

/// Deterministic channel realization for `scenario` (phases uniform, magnitudes from path loss).
pub fn generate_channels(scenario: &Scenario) -> Result<ChannelSet> {
    generate_channels_with(scenario, GeneratorOptions::default())
}

pub fn generate_channels_with(scenario: &Scenario, opts: GeneratorOptions) -> Result<ChannelSet> {
    scenario.validate()?;
    let k = scenario.antennas;
    let n = scenario.relay_count();
    let noise_amp = scenario.noise_power_mw().sqrt();
    let amplitude = |d: f64| -> Result<f64> {
        let net_db = scenario.antenna_gain_db - path_loss_db(d, &scenario.pathloss)?;
        Ok(10f64.powf(net_db / 20.0) / noise_amp)
    };

    let mut phases = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut fading = ChaCha8Rng::seed_from_u64(scenario.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut draw = |amp: f64| -> C64 {
        let theta: f64 = phases.gen_range(0.0..TAU);
        let scale = match opts.fading {
            Fading::None => 1.0,
            Fading::Rayleigh => {
                let e: f64 = Exp1.sample(&mut fading);
                e.sqrt()
            }
        };
        C64::from_polar(amp * scale, theta)
    };

    let a0 = amplitude(scenario.hap_receiver_distance())?;
    let f0 = CVector::from_fn(k, |_, _| draw(a0));

    let mut f = Vec::with_capacity(n);
    for r in &scenario.relays {
        let a = amplitude(distance(scenario.hap, *r))?;
        f.push(CVector::from_fn(k, |_, _| draw(a)));
    }
    let mut g = Vec::with_capacity(n);
    for r in &scenario.relays {
        let a = amplitude(distance(*r, scenario.receiver))?;
        g.push(draw(a));
    }
    let mut z = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        for j in (i + 1)..n {
            let a = amplitude(distance(scenario.relays[i], scenario.relays[j]))?;
            let v = draw(a);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    Ok(ChannelSet { f0, f, g, z })
}

/// Binary radio mode per relay: `true` means passive (backscatter).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeAssignment {
    passive: Vec<bool>,
}

impl ModeAssignment {
    pub fn all_active(n: usize) -> Self {
        Self {
            passive: vec![false; n],
        }
    }

    pub fn from_flags(passive: Vec<bool>) -> Self {
        Self { passive }
    }

    /// Zero-based passive relay indices.
    pub fn with_passive(n: usize, passive: &[usize]) -> Result<Self> {
        let mut flags = vec![false; n];
        for &i in passive {
            if i >= n {
                return Err(Error::contract(format!("relay index {i} out of range for {n} relays")));
            }
            flags[i] = true;
        }
        Ok(Self { passive: flags })
    }

    pub fn len(&self) -> usize {
        self.passive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passive.is_empty()
    }

    pub fn is_passive(&self, n: usize) -> bool {
        self.passive[n]
    }

    pub fn flags(&self) -> &[bool] {
        &self.passive
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.passive[n]).collect()
    }

    pub fn passive(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.passive[n]).collect()
    }

    pub fn switched_to_passive(&self, n: usize) -> Self {
        let mut next = self.clone();
        next.passive[n] = true;
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    /// Phase offset in `[0, 2π)`.
    pub theta: f64,
    pub magnitude: f64,
}

impl Reflection {
    pub fn new(theta: f64, magnitude: f64) -> Self {
        Self {
            theta: theta.rem_euclid(TAU),
            magnitude,
        }
    }

    pub fn coefficient(&self) -> C64 {
        C64::from_polar(self.magnitude, self.theta)
    }
}

/// Reflection coefficients of the passive relays, keyed by zero-based relay index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReflectionPlan {
    pub entries: BTreeMap<usize, Reflection>,
}

impl ReflectionPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, relay: usize, theta: f64, magnitude: f64) {
        self.entries.insert(relay, Reflection::new(theta, magnitude));
    }

    pub fn with(mut self, relay: usize, theta: f64, magnitude: f64) -> Self {
        self.set(relay, theta, magnitude);
        self
    }

    pub fn get(&self, relay: usize) -> Option<&Reflection> {
        self.entries.get(&relay)
    }

    /// Same phases with every magnitude replaced by `magnitude`.
    pub fn with_magnitude(&self, magnitude: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(&n, r)| (n, Reflection::new(r.theta, magnitude)))
                .collect(),
        }
    }

    /// Check magnitudes against `gamma_max`.
    pub fn validate(&self, gamma_max: f64) -> Result<()> {
        for (n, r) in &self.entries {
            if !(r.magnitude >= 0.0 && r.magnitude <= gamma_max + 1e-12) {
                return Err(Error::contract(format!(
                    "reflection magnitude {} of relay {n} outside [0, {gamma_max}]",
                    r.magnitude
                )));
            }
        }
        Ok(())
    }
}

/// Effective channels seen by the active part of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedChannels {
    pub f0: CVector,
    /// Zero-based indices of the active relays; `f` and `g` are parallel to it.
    pub active: Vec<usize>,
    pub f: Vec<CVector>,
    pub g: Vec<C64>,
}

impl EnhancedChannels {
    pub fn antennas(&self) -> usize {
        self.f0.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnhanceOptions {
    /// Apply backscatter enhancement to the relay → receiver channels.
    pub enhance_forward: bool,
}

impl Default for EnhanceOptions {
    fn default() -> Self {
        Self {
            enhance_forward: true,
        }
    }
}

fn passive_coefficients(mode: &ModeAssignment, refl: &ReflectionPlan) -> Result<Vec<(usize, C64)>> {
    mode.passive()
        .into_iter()
        .map(|n| {
            refl.get(n)
                .map(|r| (n, r.coefficient()))
                .ok_or_else(|| Error::contract(format!("no reflection coefficient for passive relay {n}")))
        })
        .collect()
}

fn check_shape(ch: &ChannelSet, mode: &ModeAssignment) -> Result<()> {
    if mode.len() != ch.relay_count() {
        return Err(Error::contract(format!(
            "mode covers {} relays, channel set has {}",
            mode.len(),
            ch.relay_count()
        )));
    }
    Ok(())
}

fn check_active(mode: &ModeAssignment, k: usize) -> Result<()> {
    if k >= mode.len() || mode.is_passive(k) {
        return Err(Error::contract(format!("relay {k} is not an active relay")));
    }
    Ok(())
}

/// `f0 + Σ_{n passive} Γ_n g_n F[n]`.
pub fn enhance_direct(ch: &ChannelSet, mode: &ModeAssignment, refl: &ReflectionPlan) -> Result<CVector> {
    check_shape(ch, mode)?;
    let mut out = ch.f0.clone();
    for (n, gamma) in passive_coefficients(mode, refl)? {
        out.axpy(gamma * ch.g[n], &ch.f[n], C64::new(1.0, 0.0));
    }
    Ok(out)
}

/// `F[k] + Σ_{n passive} Γ_n Z[n,k] F[n]`.
pub fn enhance_relay(ch: &ChannelSet, mode: &ModeAssignment, refl: &ReflectionPlan, k: usize) -> Result<CVector> {
    check_shape(ch, mode)?;
    check_active(mode, k)?;
    let mut out = ch.f[k].clone();
    for (n, gamma) in passive_coefficients(mode, refl)? {
        out.axpy(gamma * ch.z[(n, k)], &ch.f[n], C64::new(1.0, 0.0));
    }
    Ok(out)
}

/// `g_k + Σ_{n passive} Γ_n Z[n,k] g_n`.
pub fn enhance_forward(ch: &ChannelSet, mode: &ModeAssignment, refl: &ReflectionPlan, k: usize) -> Result<C64> {
    check_shape(ch, mode)?;
    check_active(mode, k)?;
    let mut out = ch.g[k];
    for (n, gamma) in passive_coefficients(mode, refl)? {
        out += gamma * ch.z[(n, k)] * ch.g[n];
    }
    Ok(out)
}

pub fn enhance(ch: &ChannelSet, mode: &ModeAssignment, refl: &ReflectionPlan) -> Result<EnhancedChannels> {
    enhance_with(ch, mode, refl, EnhanceOptions::default())
}

pub fn enhance_with(
    ch: &ChannelSet,
    mode: &ModeAssignment,
    refl: &ReflectionPlan,
    opts: EnhanceOptions,
) -> Result<EnhancedChannels> {
    let f0 = enhance_direct(ch, mode, refl)?;
    let active = mode.active();
    let mut f = Vec::with_capacity(active.len());
    let mut g = Vec::with_capacity(active.len());
    for &k in &active {
        f.push(enhance_relay(ch, mode, refl, k)?);
        g.push(if opts.enhance_forward {
            enhance_forward(ch, mode, refl, k)?
        } else {
            ch.g[k]
        });
    }
    Ok(EnhancedChannels { f0, active, f, g })
}

fn check_beam(w: &CVector, what: &str) -> Result<()> {
    let norm = w.norm();
    if !(norm <= 1.0 + NORM_SLACK) {
        return Err(Error::contract(format!("‖{what}‖ = {norm} exceeds 1")));
    }
    Ok(())
}

/// First-hop receiver SNR `p_t |f̂0^H w1|²`.
pub fn snr_first_hop(f0_hat: &CVector, w1: &CVector, p_t: f64) -> Result<f64> {
    if f0_hat.len() != w1.len() {
        return Err(Error::contract("w1 and f0_hat differ in length"));
    }
    check_beam(w1, "w1")?;
    Ok(p_t * f0_hat.dotc(w1).norm_sqr())
}

/// Second-hop receiver SNR with amplify-and-forward relays and direct beamforming `w2`.
pub fn snr_second_hop(
    x: &[f64],
    y: &[C64],
    g_hat: &[C64],
    f0_hat: &CVector,
    w2: &CVector,
    p_t: f64,
) -> Result<f64> {
    if x.len() != y.len() || x.len() != g_hat.len() {
        return Err(Error::contract(format!(
            "x, y, g_hat lengths differ ({}, {}, {})",
            x.len(),
            y.len(),
            g_hat.len()
        )));
    }
    if f0_hat.len() != w2.len() {
        return Err(Error::contract("w2 and f0_hat differ in length"));
    }
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::contract("amplification coefficients must be nonnegative"));
    }
    check_beam(w2, "w2")?;
    let relayed: C64 = x.iter().zip(g_hat).zip(y).map(|((&xn, gn), yn)| xn * gn * yn).sum();
    let noise: f64 = x.iter().zip(g_hat).map(|(&xn, gn)| xn * xn * gn.norm_sqr()).sum();
    let signal = relayed + p_t.sqrt() * f0_hat.dotc(w2);
    Ok(signal.norm_sqr() / (1.0 + noise))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn toy(k: usize) -> ChannelSet {
        ChannelSet {
            f0: CVector::from_element(k, c(1.0, 0.0)),
            f: vec![CVector::from_element(k, c(1.0, 0.0)), CVector::from_element(k, c(2.0, 0.0))],
            g: vec![c(1.0, 0.0), c(1.0, 0.0)],
            z: DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.1, 0.0), c(0.1, 0.0), c(0.0, 0.0)]),
        }
    }

    #[test]
    fn path_loss_reference_points() {
        let m = PathLossModel::default();
        assert!((path_loss_db(1.0, &m).unwrap() - 30.0).abs() < 1e-12);
        assert!((path_loss_db(10.0, &m).unwrap() - 50.0).abs() < 1e-12);
        let m3 = PathLossModel { alpha: 3.7, ..m };
        assert!((path_loss_db(1.0, &m3).unwrap() - 30.0).abs() < 1e-12);
        assert!(matches!(path_loss_db(0.0, &m), Err(Error::Domain(_))));
        assert!(matches!(path_loss_db(-2.0, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn noise_power_conventions() {
        let mut s = Scenario::canonical();
        // -90 dBm/Hz over 100 kHz = -40 dBm
        assert!((s.noise_power_mw() / 1e-4 - 1.0).abs() < 1e-12);
        s.noise_is_total = true;
        assert!((s.noise_power_mw() / 1e-9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_net_gain_link() {
        let mut s = Scenario::canonical();
        // HAP–receiver loss at 4 m with α=2
        s.antenna_gain_db = path_loss_db(4.0, &s.pathloss).unwrap();
        let ch = generate_channels(&s).unwrap();
        let expect = 1.0 / s.noise_power_mw().sqrt();
        for v in ch.f0.iter() {
            assert!((v.norm() - expect).abs() <= 1e-9 * expect);
        }
    }

    #[test]
    fn channels_are_deterministic_and_reciprocal() {
        let s = Scenario::canonical();
        let a = generate_channels(&s).unwrap();
        let b = generate_channels(&s).unwrap();
        assert_eq!(a, b);
        for i in 0..a.relay_count() {
            assert_eq!(a.z[(i, i)], c(0.0, 0.0));
            for j in 0..a.relay_count() {
                assert_eq!(a.z[(i, j)], a.z[(j, i)]);
            }
        }
        let other = generate_channels(&Scenario { seed: 1, ..s }).unwrap();
        assert_ne!(a.f0, other.f0);
    }

    #[test]
    fn rayleigh_hook_keeps_phases() {
        let s = Scenario::canonical();
        let plain = generate_channels(&s).unwrap();
        let faded = generate_channels_with(&s, GeneratorOptions { fading: Fading::Rayleigh }).unwrap();
        for (a, b) in plain.f0.iter().zip(faded.f0.iter()) {
            assert!((a.arg() - b.arg()).abs() < 1e-12);
        }
        assert_ne!(plain.f0, faded.f0);
    }

    #[test]
    fn validation_names_keys() {
        let mut s = Scenario::canonical();
        s.pt_mw = -1.0;
        match s.validate() {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "pt_mw"),
            other => panic!("{other:?}"),
        }
        let mut s = Scenario::canonical();
        s.relays[2] = s.receiver;
        assert!(matches!(s.validate(), Err(Error::Validation { key, .. }) if key == "relays_xy"));
        let mut s = Scenario::canonical();
        s.gamma_max = 1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn direct_enhancement_arithmetic() {
        let ch = ChannelSet {
            f0: CVector::from_element(1, c(1.0, 0.0)),
            f: vec![CVector::from_element(1, c(1.0, 0.0))],
            g: vec![c(1.0, 0.0)],
            z: DMatrix::from_element(1, 1, c(0.0, 0.0)),
        };
        let mode = ModeAssignment::with_passive(1, &[0]).unwrap();
        let refl = ReflectionPlan::new().with(0, 0.0, 0.5);
        let f0 = enhance_direct(&ch, &mode, &refl).unwrap();
        assert!((f0[0] - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn relay_and_forward_enhancement_arithmetic() {
        let ch = toy(1);
        let mode = ModeAssignment::with_passive(2, &[1]).unwrap();
        let refl = ReflectionPlan::new().with(1, 0.0, 0.5);
        let fk = enhance_relay(&ch, &mode, &refl, 0).unwrap();
        assert!((fk[0] - c(1.1, 0.0)).norm() < 1e-15);

        let mut ch2 = toy(1);
        ch2.z[(1, 0)] = c(0.2, 0.0);
        let refl = ReflectionPlan::new().with(1, std::f64::consts::PI, 0.5);
        let gk = enhance_forward(&ch2, &mode, &refl, 0).unwrap();
        assert!((gk - c(0.9, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn enhancement_contract_errors() {
        let ch = toy(2);
        let mode = ModeAssignment::with_passive(2, &[1]).unwrap();
        assert!(matches!(enhance_direct(&ch, &mode, &ReflectionPlan::new()), Err(Error::Contract(_))));
        let refl = ReflectionPlan::new().with(1, 0.0, 0.5);
        assert!(matches!(enhance_relay(&ch, &mode, &refl, 1), Err(Error::Contract(_))));
        assert!(matches!(enhance_forward(&ch, &mode, &refl, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn disconnected_cross_channel_leaves_relay_untouched() {
        let mut ch = toy(2);
        ch.z = DMatrix::from_element(2, 2, c(0.0, 0.0));
        let mode = ModeAssignment::with_passive(2, &[1]).unwrap();
        let refl = ReflectionPlan::new().with(1, 1.0, 0.5);
        assert_eq!(enhance_relay(&ch, &mode, &refl, 0).unwrap(), ch.f[0]);
    }

    #[test]
    fn forward_enhancement_can_be_disabled() {
        let ch = toy(2);
        let mode = ModeAssignment::with_passive(2, &[1]).unwrap();
        let refl = ReflectionPlan::new().with(1, 0.3, 0.5);
        let raw = enhance_with(&ch, &mode, &refl, EnhanceOptions { enhance_forward: false }).unwrap();
        assert_eq!(raw.g, vec![ch.g[0]]);
        let full = enhance(&ch, &mode, &refl).unwrap();
        assert_ne!(full.g, raw.g);
    }

    #[test]
    fn first_hop_snr() {
        let f0 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let w1 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((snr_first_hop(&f0, &w1, 2.0).unwrap() - 2.0).abs() < 1e-15);
        let matched = f0.unscale(f0.norm());
        assert!((snr_first_hop(&f0, &matched, 3.0).unwrap() - 3.0 * f0.norm_squared()).abs() < 1e-12);
        let ortho = CVector::from_vec(vec![c(0.0, 1.0), c(1.0, 0.0)]).unscale(2f64.sqrt());
        assert!(snr_first_hop(&f0, &ortho, 3.0).unwrap().abs() < 1e-15);
        let big = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(snr_first_hop(&f0, &big, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn second_hop_snr() {
        let f0 = CVector::from_vec(vec![c(1.0, 0.0)]);
        let zero_w = CVector::from_vec(vec![c(0.0, 0.0)]);
        let v = snr_second_hop(&[1.0], &[c(2.0, 0.0)], &[c(1.0, 0.0)], &f0, &zero_w, 5.0).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let w2 = CVector::from_vec(vec![c(1.0, 0.0)]);
        let none = snr_second_hop(&[], &[], &[], &f0, &w2, 5.0).unwrap();
        assert!((none - 5.0).abs() < 1e-12);
        let off = snr_second_hop(&[0.0], &[c(3.0, 0.0)], &[c(1.0, 0.0)], &f0, &w2, 5.0).unwrap();
        assert!((off - 5.0).abs() < 1e-12);
        assert!(snr_second_hop(&[1.0, 2.0], &[c(3.0, 0.0)], &[c(1.0, 0.0)], &f0, &w2, 5.0).is_err());
    }
}
