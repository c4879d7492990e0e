//! Reflection-phase optimization and greedy relay mode selection.

mod brute;
mod phase;

pub use brute::{brute_force_select, BRUTE_FORCE_MAX_RELAYS};
pub use phase::{g_total, identity_weight, optimize_phase, PhaseGrid, PhaseOutcome, PhaseTerms};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, BoundKind, BoundResult, OperatingPoint};
use crate::channel::{enhance, ChannelSet, ModeAssignment, ReflectionPlan};
use crate::conic::solve_min_gain_beamforming;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    MaxSnr,
    MaxDr,
    MaxRr,
    MaxDg,
    MinRf,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::MaxSnr, Metric::MaxDr, Metric::MaxRr, Metric::MaxDg, Metric::MinRf];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MaxSnr => "max-snr",
            Metric::MaxDr => "max-dr",
            Metric::MaxRr => "max-rr",
            Metric::MaxDg => "max-dg",
            Metric::MinRf => "min-rf",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("metric", format!("unknown metric `{s}`")))
    }
}

/// Bound requested by the user; `Auto` is resolved once per channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundChoice {
    Direct,
    Relay,
    Auto,
}

impl FromStr for BoundChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(BoundChoice::Direct),
            "relay" => Ok(BoundChoice::Relay),
            "auto" => Ok(BoundChoice::Auto),
            _ => Err(Error::invalid("bound", format!("unknown bound `{s}`"))),
        }
    }
}

/// Pick the bound for a realization: direct when `p_t‖f0‖²` exceeds `|N|·p_t·s_min²`
/// at the all-active configuration, relay otherwise.
pub fn resolve_bound(choice: BoundChoice, ch: &ChannelSet, p_t: f64) -> Result<BoundKind> {
    match choice {
        BoundChoice::Direct => Ok(BoundKind::Direct),
        BoundChoice::Relay => Ok(BoundKind::Relay),
        BoundChoice::Auto => {
            let direct = p_t * ch.f0.norm_squared();
            if ch.f.is_empty() {
                return Ok(BoundKind::Direct);
            }
            let s_min2 = if ch.antennas() == 1 {
                ch.f.iter().map(|f| f.norm_squared()).fold(f64::INFINITY, f64::min)
            } else {
                solve_min_gain_beamforming(&ch.f)?.s_min2
            };
            let relay = ch.f.len() as f64 * p_t * s_min2;
            Ok(if direct >= relay { BoundKind::Direct } else { BoundKind::Relay })
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionConfig {
    pub grid: PhaseGrid,
    pub epsilon: f64,
    pub max_phase_rounds: usize,
    /// Re-optimize every passive phase cyclically after the greedy loop.
    pub polish: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            grid: PhaseGrid::default(),
            epsilon: 1e-5,
            max_phase_rounds: 50,
            polish: false,
        }
    }
}

/// Channels and parameters shared by every bound evaluation of one realization.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub ch: &'a ChannelSet,
    pub p_t: f64,
    pub eta: f64,
    pub gamma_max: f64,
    pub kind: BoundKind,
    pub config: SelectionConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(ch: &'a ChannelSet, p_t: f64, eta: f64, gamma_max: f64, kind: BoundKind) -> Self {
        Self {
            ch,
            p_t,
            eta,
            gamma_max,
            kind,
            config: SelectionConfig::default(),
        }
    }

    pub fn with_config(mut self, config: SelectionConfig) -> Self {
        self.config = config;
        self
    }

    pub fn bound(&self, mode: &ModeAssignment, refl: &ReflectionPlan) -> Result<BoundResult> {
        let enh = enhance(self.ch, mode, refl)?;
        bounds::evaluate(self.kind, &enh, self.p_t, self.eta)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub mode: ModeAssignment,
    pub refl: ReflectionPlan,
    pub bound: BoundResult,
    pub gamma: f64,
    pub baseline_gamma: f64,
    /// Accepted switches in order: (relay index, γ after the switch).
    pub per_iteration: Vec<(usize, f64)>,
    pub metric: Option<Metric>,
    pub bound_kind: BoundKind,
    pub notes: Vec<String>,
}

impl SelectionResult {
    pub fn op(&self) -> &OperatingPoint {
        &self.bound.op
    }
}

/// A candidate's score and the phase at which it would be switched.
#[derive(Debug, Clone)]
pub struct Scored {
    pub candidate: usize,
    pub score: f64,
    pub theta: f64,
    /// Bound at the switched configuration, when scoring already produced it.
    pub bound: Option<BoundResult>,
}

/// Score `candidate` (currently active) as if switched to passive.
pub fn metric_score(
    ev: &Evaluator<'_>,
    metric: Metric,
    candidate: usize,
    mode: &ModeAssignment,
    refl: &ReflectionPlan,
    current: &BoundResult,
) -> Result<Scored> {
    if candidate >= mode.len() || mode.is_passive(candidate) {
        return Err(Error::contract(format!("relay {candidate} is not active")));
    }
    let op = &current.op;
    let next_mode = mode.switched_to_passive(candidate);
    let next_refl = refl.clone().with(candidate, 0.0, ev.gamma_max);
    let terms = PhaseTerms::new(ev.ch, &next_mode, &next_refl, candidate)?;
    let c = identity_weight(ev.ch, &next_mode, op, ev.eta);
    let grid_theta = || ev.config.grid.argmax(|t| terms.quadratic(t, c, &op.w1)).0;
    let scored = |score: f64, theta: f64, bound: Option<BoundResult>| Scored {
        candidate,
        score,
        theta,
        bound,
    };
    Ok(match metric {
        Metric::MaxSnr => {
            let out = optimize_phase(ev, candidate, &next_mode, &next_refl, op)?;
            scored(out.gamma, out.theta, Some(out.bound))
        }
        Metric::MaxDr => {
            let (theta, v) = ev.config.grid.argmax(|t| terms.quadratic(t, 1.0, &op.w1));
            scored(ev.p_t * v, theta, None)
        }
        Metric::MaxRr => {
            let theta = grid_theta();
            if next_mode.active().is_empty() {
                scored(f64::NEG_INFINITY, theta, None)
            } else {
                let enh = enhance(ev.ch, &next_mode, &next_refl.clone().with(candidate, theta, ev.gamma_max))?;
                let r = bounds::eval_bound_relay(&enh, ev.p_t, ev.eta)?;
                scored(r.gamma, theta, None)
            }
        }
        Metric::MaxDg => {
            let theta = terms.analytic_argmax(1.0, &crate::channel::CVector::zeros(ev.ch.antennas()));
            scored(terms.at(theta).norm_squared(), theta, None)
        }
        Metric::MinRf => {
            let enh = enhance(ev.ch, mode, refl)?;
            let i = enh
                .active
                .iter()
                .position(|&n| n == candidate)
                .ok_or_else(|| Error::contract("operating point lacks the candidate"))?;
            let rho = op.rho.get(i).copied().unwrap_or(0.5);
            let rf = ev.eta * rho * ev.p_t * enh.f[i].dotc(&op.w1).norm_sqr();
            scored(-rf, grid_theta(), None)
        }
    })
}

/// Greedy mode selection: starting all-active, switch the best-scoring active relay to
/// passive while that strictly improves the bound by more than `epsilon`.
pub fn select_modes(ev: &Evaluator<'_>, metric: Metric) -> Result<SelectionResult> {
    let n = ev.ch.relay_count();
    let mut mode = ModeAssignment::all_active(n);
    let mut refl = ReflectionPlan::new();
    let mut current = ev.bound(&mode, &refl)?;
    let baseline_gamma = current.gamma;
    let mut per_iteration = Vec::new();
    let mut notes = Vec::new();

    loop {
        let candidates = mode.active();
        // the relay bounds are undefined without an active relay
        if candidates.is_empty() || (ev.kind != BoundKind::Direct && candidates.len() == 1) {
            break;
        }
        let scores: Vec<(usize, Result<Scored>)> = candidates
            .par_iter()
            .map(|&c| (c, metric_score(ev, metric, c, &mode, &refl, &current)))
            .collect();
        let mut best: Option<Scored> = None;
        for (c, s) in scores {
            match s {
                Ok(s) => {
                    if best.as_ref().is_none_or(|b| s.score > b.score) {
                        best = Some(s);
                    }
                }
                Err(e) => notes.push(format!("relay {c} not scored: {e}")),
            }
        }
        let Some(best) = best else { break };
        if !best.score.is_finite() && best.score < 0.0 {
            break;
        }
        let next_mode = mode.switched_to_passive(best.candidate);
        let next_refl = refl.clone().with(best.candidate, best.theta, ev.gamma_max);
        let bound = match best.bound {
            Some(b) => b,
            None => match ev.bound(&next_mode, &next_refl) {
                Ok(b) => b,
                Err(e) => {
                    notes.push(format!("switching relay {} failed: {e}", best.candidate));
                    break;
                }
            },
        };
        if bound.gamma > current.gamma + ev.config.epsilon {
            per_iteration.push((best.candidate, bound.gamma));
            mode = next_mode;
            refl = next_refl;
            current = bound;
        } else {
            break;
        }
    }

    if ev.config.polish {
        polish(ev, &mode, &mut refl, &mut current)?;
    }

    Ok(SelectionResult {
        gamma: current.gamma,
        mode,
        refl,
        bound: current,
        baseline_gamma,
        per_iteration,
        metric: Some(metric),
        bound_kind: ev.kind,
        notes,
    })
}

/// Cyclic re-optimization of every passive phase, keeping only strict improvements.
fn polish(ev: &Evaluator<'_>, mode: &ModeAssignment, refl: &mut ReflectionPlan, current: &mut BoundResult) -> Result<()> {
    for _ in 0..ev.config.max_phase_rounds {
        let mut improved = false;
        for n in mode.passive() {
            let out = optimize_phase(ev, n, mode, refl, &current.op)?;
            if out.gamma > current.gamma + ev.config.epsilon {
                refl.set(n, out.theta, ev.gamma_max);
                *current = out.bound;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(())
}

/// Passive relays' power budget: `p_c ≤ (1−|Γ_n|²)·p_t·(|F_nᴴw1|² + |F_nᴴw2|²)`.
pub fn check_passive_power(
    ch: &ChannelSet,
    mode: &ModeAssignment,
    refl: &ReflectionPlan,
    op: &OperatingPoint,
    p_t: f64,
    p_c: f64,
) -> Result<Vec<(usize, bool)>> {
    mode.passive()
        .into_iter()
        .map(|n| {
            let r = refl
                .get(n)
                .ok_or_else(|| Error::contract(format!("no reflection coefficient for passive relay {n}")))?;
            let incident = ch.f[n].dotc(&op.w1).norm_sqr() + ch.f[n].dotc(&op.w2).norm_sqr();
            let harvested = (1.0 - r.magnitude * r.magnitude) * p_t * incident;
            Ok((n, p_c <= harvested))
        })
        .collect()
}
