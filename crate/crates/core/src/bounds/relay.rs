//! Direct-link-free bound: alternating optimization of the relays' power-splitting
//! ratios and the network beamforming subproblem, with the HAP beam fixed by the
//! max–min gain design.

use super::{check_params, matched, BoundKind, BoundResult, OperatingPoint, RHO_FLOOR};
use crate::channel::{CVector, EnhancedChannels, C64};
use crate::conic::solve_min_gain_beamforming;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RelayOptions {
    pub rho_init: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_sweeps: usize,
}

impl Default for RelayOptions {
    fn default() -> Self {
        Self {
            rho_init: 0.5,
            beta: 0.5,
            epsilon: 1e-5,
            max_iter: 10_000,
            inner_tol: 1e-10,
            inner_sweeps: 500,
        }
    }
}

/// Upper bound on `x̂_n²`: `ηρ P ĝ² / (1 + (1−ρ)P)` with `P = p_t s²`.
pub fn x_bar(rho: f64, s2: f64, p_t: f64, eta: f64, g2: f64) -> f64 {
    let p = p_t * s2;
    eta * rho * p * g2 / (1.0 + (1.0 - rho) * p)
}

/// Upper bound on `y_n²`: `(1−ρ) p_t s²`.
pub fn y_bar(rho: f64, s2: f64, p_t: f64) -> f64 {
    (1.0 - rho) * p_t * s2
}

#[derive(Debug, Clone)]
pub struct Algorithm1State {
    pub rho: Vec<f64>,
    /// Per-relay beamforming gain used in the bounds (`s_min²` unless K = 1).
    pub s2: Vec<f64>,
    pub g2: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub gaps: Vec<f64>,
    pub beta: f64,
}

impl Algorithm1State {
    pub fn new(rho: Vec<f64>, s2: Vec<f64>, g2: Vec<f64>, p_t: f64, eta: f64, beta: f64) -> Result<Self> {
        let n = rho.len();
        if s2.len() != n || g2.len() != n {
            return Err(Error::contract("rho, s2 and g2 must have equal length"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::domain(format!("beta must lie in (0, 1], got {beta}")));
        }
        let mut st = Self {
            rho,
            s2,
            g2,
            x_bar: vec![0.0; n],
            y_bar: vec![0.0; n],
            gaps: vec![0.0; n],
            beta,
        };
        st.refresh(p_t, eta);
        Ok(st)
    }

    fn refresh(&mut self, p_t: f64, eta: f64) {
        for i in 0..self.rho.len() {
            self.x_bar[i] = x_bar(self.rho[i], self.s2[i], p_t, eta, self.g2[i]);
            self.y_bar[i] = y_bar(self.rho[i], self.s2[i], p_t);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub x_hat: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

fn inner_objective(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let den: f64 = 1.0 + x.iter().map(|a| a * a).sum::<f64>();
    num * num / den
}

fn ascend(cap: &[f64], y: &[f64], mut x: Vec<f64>, tol: f64, max_sweeps: usize) -> (Vec<f64>, f64) {
    let mut value = inner_objective(&x, y);
    for _ in 0..max_sweeps {
        for n in 0..x.len() {
            let a: f64 = (0..x.len()).filter(|&k| k != n).map(|k| x[k] * y[k]).sum();
            let b: f64 = 1.0 + (0..x.len()).filter(|&k| k != n).map(|k| x[k] * x[k]).sum::<f64>();
            x[n] = if a > 0.0 { (y[n] * b / a).min(cap[n]) } else if y[n] > 0.0 { cap[n] } else { 0.0 };
        }
        let next = inner_objective(&x, y);
        let change = next - value;
        value = next;
        if change.abs() <= tol * value.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (x, value)
}

pub(crate) fn inner_with(
    x_bar: &[f64],
    y_bar: &[f64],
    warm: Option<&[f64]>,
    tol: f64,
    max_sweeps: usize,
) -> Result<InnerSolution> {
    if x_bar.len() != y_bar.len() {
        return Err(Error::contract("x_bar and y_bar differ in length"));
    }
    if x_bar.iter().chain(y_bar).any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::contract("bounds must be finite and nonnegative"));
    }
    let cap: Vec<f64> = x_bar.iter().map(|v| v.sqrt()).collect();
    let y: Vec<f64> = y_bar.iter().map(|v| v.sqrt()).collect();

    let mut starts = vec![cap.clone()];
    let tau = cap
        .iter()
        .zip(&y)
        .filter(|(_, &yn)| yn > 0.0)
        .map(|(&c, &yn)| c / yn)
        .fold(f64::INFINITY, f64::min);
    if tau.is_finite() {
        starts.push(y.iter().map(|&v| tau * v).collect());
    }
    if let Some(w) = warm {
        if w.len() == cap.len() {
            starts.push(w.iter().zip(&cap).map(|(&a, &c)| a.clamp(0.0, c)).collect());
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (x, v) = ascend(&cap, &y, s, tol, max_sweeps);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    let (x_hat, value) = best.expect("at least one start");
    Ok(InnerSolution { x_hat, y, value })
}

/// Network beamforming subproblem `max |x̂ᵀy|²/(1+‖x̂‖²)` over `x̂_n² ≤ x̄_n`, `y_n² ≤ ȳ_n`.
pub fn inner_beamforming(x_bar: &[f64], y_bar: &[f64]) -> Result<InnerSolution> {
    let o = RelayOptions::default();
    inner_with(x_bar, y_bar, None, o.inner_tol, o.inner_sweeps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Updated { relay: usize, rho: f64 },
    /// Every `x̂_n²` already meets its bound.
    Converged,
}

/// Shrink the PS ratio of the relay with the largest gap `x̄_n − x̂_n²` so that its
/// bound drops to `x̄_m − β·G_m`.
pub fn ps_step(state: &mut Algorithm1State, p_t: f64, eta: f64, x_hat: &[f64]) -> Result<StepOutcome> {
    if x_hat.len() != state.rho.len() {
        return Err(Error::contract("x_hat length does not match the relay count"));
    }
    let mut best: Option<usize> = None;
    for i in 0..x_hat.len() {
        state.gaps[i] = state.x_bar[i] - x_hat[i] * x_hat[i];
        let significant = state.gaps[i] > 1e-12 * state.x_bar[i].max(1.0);
        if significant && best.is_none_or(|b| state.gaps[i] > state.gaps[b]) {
            best = Some(i);
        }
    }
    let Some(m) = best else { return Ok(StepOutcome::Converged) };
    let target = state.x_bar[m] - state.beta * state.gaps[m];
    let p = p_t * state.s2[m];
    let new_rho = target * (1.0 + p) / (p * (eta * state.g2[m] + target));
    let new_rho = new_rho.clamp(RHO_FLOOR, state.rho[m]);
    state.rho[m] = new_rho;
    state.refresh(p_t, eta);
    Ok(StepOutcome::Updated { relay: m, rho: new_rho })
}

pub fn eval_bound_relay(enh: &EnhancedChannels, p_t: f64, eta: f64) -> Result<BoundResult> {
    eval_bound_relay_with(enh, p_t, eta, &RelayOptions::default())
}

/// With one HAP antenna the beam is a phase, so each relay keeps its own gain `|f_n|²`.
pub fn eval_bound_relay_with(
    enh: &EnhancedChannels,
    p_t: f64,
    eta: f64,
    opts: &RelayOptions,
) -> Result<BoundResult> {
    check_params(p_t, eta)?;
    if enh.f.is_empty() {
        return Err(Error::contract("the relay bound needs at least one active relay"));
    }
    let k = enh.antennas();
    if k == 1 {
        let mut r = run(enh, p_t, eta, opts, CVector::from_element(1, C64::new(1.0, 0.0)), None)?;
        r.kind = BoundKind::Relay;
        return Ok(r);
    }
    let mg = solve_min_gain_beamforming(&enh.f)?;
    run(enh, p_t, eta, opts, mg.w, Some(mg.s_min2))
}

pub fn eval_bound_single_antenna(enh: &EnhancedChannels, p_t: f64, eta: f64) -> Result<BoundResult> {
    if enh.antennas() != 1 {
        return Err(Error::contract(format!(
            "single-antenna bound needs K = 1, got K = {}",
            enh.antennas()
        )));
    }
    check_params(p_t, eta)?;
    if enh.f.is_empty() {
        return Err(Error::contract("the relay bound needs at least one active relay"));
    }
    run(
        enh,
        p_t,
        eta,
        &RelayOptions::default(),
        CVector::from_element(1, C64::new(1.0, 0.0)),
        None,
    )
}

fn run(
    enh: &EnhancedChannels,
    p_t: f64,
    eta: f64,
    opts: &RelayOptions,
    w1: CVector,
    common_s2: Option<f64>,
) -> Result<BoundResult> {
    let n = enh.f.len();
    let s2: Vec<f64> = match common_s2 {
        Some(s) => vec![s; n],
        None => enh.f.iter().map(|f| f.dotc(&w1).norm_sqr()).collect(),
    };
    let s_min2 = s2.iter().copied().fold(f64::INFINITY, f64::min);
    let g2: Vec<f64> = enh.g.iter().map(|g| g.norm_sqr()).collect();
    let direct_reference = p_t * enh.f0.dotc(&w1).norm_sqr();
    let kind = if common_s2.is_some() { BoundKind::Relay } else { BoundKind::SingleAntenna };
    let mut flags = Vec::new();
    if common_s2.is_some() && s_min2 <= 0.0 {
        flags.push("s_min = 0: some active relay is orthogonal to every beam".into());
        let rho = vec![opts.rho_init; n];
        let mut op = OperatingPoint::with_full_budget(enh, w1, matched(&enh.f0), rho, p_t, eta);
        op.p.iter_mut().for_each(|v| *v = 0.0);
        op.x.iter_mut().for_each(|v| *v = 0.0);
        op.x_hat.iter_mut().for_each(|v| *v = 0.0);
        return Ok(BoundResult {
            kind,
            gamma1: 0.0,
            gamma2: 0.0,
            gamma: 0.0,
            op,
            iterations: 0,
            converged: true,
            trace: vec![0.0],
            relaxation: None,
            direct_reference,
            s_min2: Some(0.0),
            flags,
        });
    }

    let mut state = Algorithm1State::new(vec![opts.rho_init; n], s2, g2, p_t, eta, opts.beta)?;
    let mut inner = inner_with(&state.x_bar, &state.y_bar, None, opts.inner_tol, opts.inner_sweeps)?;
    let mut trace = vec![inner.value];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if ps_step(&mut state, p_t, eta, &inner.x_hat)? == StepOutcome::Converged {
            converged = true;
            break;
        }
        iterations += 1;
        let next = inner_with(
            &state.x_bar,
            &state.y_bar,
            Some(&inner.x_hat),
            opts.inner_tol,
            opts.inner_sweeps,
        )?;
        let delta = next.value - inner.value;
        inner = next;
        trace.push(inner.value);
        if delta.abs() <= opts.epsilon.max(16.0 * f64::EPSILON * inner.value) {
            converged = true;
            break;
        }
    }
    if !converged {
        flags.push(format!("stopped after {} iterations", opts.max_iter));
    }

    let mut op = OperatingPoint::with_full_budget(enh, w1, matched(&enh.f0), state.rho.clone(), p_t, eta);
    for i in 0..n {
        let g = enh.g[i].norm();
        let x = if g > 0.0 { inner.x_hat[i] / g } else { 0.0 };
        op.x[i] = x;
        op.y[i] = inner.y[i];
        op.x_hat[i] = inner.x_hat[i];
        op.p[i] = x * x * (1.0 + inner.y[i] * inner.y[i]);
    }
    Ok(BoundResult {
        kind,
        gamma1: 0.0,
        gamma2: inner.value,
        gamma: inner.value,
        op,
        iterations,
        converged,
        trace,
        relaxation: None,
        direct_reference,
        s_min2: Some(s_min2),
        flags,
    })
}
