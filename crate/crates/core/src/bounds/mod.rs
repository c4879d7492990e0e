//! SNR lower bounds for a fixed mode assignment.

mod direct;
mod relay;

pub use direct::{closed_form_snr, eval_bound_direct, eval_bound_direct_with, DirectOptions};
pub use relay::{
    eval_bound_relay, eval_bound_relay_with, eval_bound_single_antenna, inner_beamforming, ps_step, x_bar, y_bar,
    Algorithm1State, InnerSolution, RelayOptions, StepOutcome,
};

use serde::Serialize;

use crate::channel::{CVector, EnhancedChannels, C64};
use crate::error::{Error, Result};

pub const RHO_FLOOR: f64 = 1e-9;
pub const RHO_CEIL: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Direct,
    Relay,
    SingleAntenna,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Direct => "direct",
            BoundKind::Relay => "relay",
            BoundKind::SingleAntenna => "single-antenna",
        }
    }
}

/// Beamformers and relay parameters realizing a bound. Per-relay vectors are
/// parallel to `relays` (zero-based relay indices of the active set).
#[derive(Debug, Clone, Serialize)]
pub struct OperatingPoint {
    #[serde(serialize_with = "ser_cvec")]
    pub w1: CVector,
    #[serde(serialize_with = "ser_cvec")]
    pub w2: CVector,
    pub relays: Vec<usize>,
    pub rho: Vec<f64>,
    /// Relay transmit power, mW.
    pub p: Vec<f64>,
    pub x: Vec<f64>,
    /// Magnitude of the signal received by each relay's information decoder.
    pub y: Vec<f64>,
    /// `x_n · |ĝ_n|`.
    pub x_hat: Vec<f64>,
}

fn ser_cvec<S: serde::Serializer>(v: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v.iter() {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl OperatingPoint {
    /// Fill `p, x, y, x_hat` from `rho` and `w1` at the full harvested budget.
    pub(crate) fn with_full_budget(
        enh: &EnhancedChannels,
        w1: CVector,
        w2: CVector,
        rho: Vec<f64>,
        p_t: f64,
        eta: f64,
    ) -> Self {
        let mut op = Self {
            w1,
            w2,
            relays: enh.active.clone(),
            rho,
            p: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
            x_hat: Vec::new(),
        };
        for (i, f) in enh.f.iter().enumerate() {
            let gain = f.dotc(&op.w1).norm_sqr();
            let rho = op.rho[i];
            let p = eta * rho * p_t * gain;
            let y2 = (1.0 - rho) * p_t * gain;
            let x = (p / (1.0 + y2)).sqrt();
            op.p.push(p);
            op.x.push(x);
            op.y.push(y2.sqrt());
            op.x_hat.push(x * enh.g[i].norm());
        }
        op
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    pub kind: BoundKind,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub op: OperatingPoint,
    pub iterations: usize,
    pub converged: bool,
    /// Per-iteration objective values.
    pub trace: Vec<f64>,
    /// Optimal value of the convex program behind the bound, when there is one.
    pub relaxation: Option<f64>,
    /// `p_t |f̂0ᴴ w1|²`, reported alongside the direct-link-free bounds.
    pub direct_reference: f64,
    /// Minimum beamforming gain over the active relays (relay bounds only).
    pub s_min2: Option<f64>,
    pub flags: Vec<String>,
}

/// Unit vector along `v`, or the first basis vector when `v = 0`.
pub(crate) fn matched(v: &CVector) -> CVector {
    let n = v.norm();
    if n > 0.0 {
        v / C64::new(n, 0.0)
    } else {
        let mut e = CVector::zeros(v.len());
        e[0] = C64::new(1.0, 0.0);
        e
    }
}

/// Evaluate the requested bound; `SingleAntenna` requires `K = 1`.
pub fn evaluate(kind: BoundKind, enh: &EnhancedChannels, p_t: f64, eta: f64) -> Result<BoundResult> {
    match kind {
        BoundKind::Direct => eval_bound_direct(enh, p_t, eta),
        BoundKind::Relay => eval_bound_relay(enh, p_t, eta),
        BoundKind::SingleAntenna => eval_bound_single_antenna(enh, p_t, eta),
    }
}

pub(crate) fn check_params(p_t: f64, eta: f64) -> Result<()> {
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::domain(format!("p_t must be positive, got {p_t}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}
