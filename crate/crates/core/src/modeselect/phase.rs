use std::f64::consts::TAU;

use super::Evaluator;
use crate::bounds::{BoundResult, OperatingPoint};
use crate::channel::{ChannelSet, CVector, ModeAssignment, ReflectionPlan, C64};
use crate::error::{Error, Result};

/// Uniform grid of `M` phases on `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    points: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("phase grid needs at least one point"));
        }
        Ok(Self {
            points: (0..m).map(|i| TAU * i as f64 / m as f64).collect(),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid point maximizing `f`; ties go to the lowest index.
    pub fn argmax(&self, f: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut best = (self.points[0], f(self.points[0]));
        for &t in &self.points[1..] {
            let v = f(t);
            if v > best.1 {
                best = (t, v);
            }
        }
        best
    }
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self::new(20).expect("nonzero")
    }
}

/// Direct channel split as `f̂0(θ) = base + e^{jθ}·v` in the phase of one passive relay.
#[derive(Debug, Clone)]
pub struct PhaseTerms {
    pub base: CVector,
    pub v: CVector,
}

impl PhaseTerms {
    pub fn new(ch: &ChannelSet, mode: &ModeAssignment, refl: &ReflectionPlan, candidate: usize) -> Result<Self> {
        if candidate >= mode.len() || !mode.is_passive(candidate) {
            return Err(Error::contract(format!("relay {candidate} is not passive")));
        }
        let mut base = ch.f0.clone();
        for n in mode.passive() {
            if n == candidate {
                continue;
            }
            let r = refl
                .get(n)
                .ok_or_else(|| Error::contract(format!("no reflection coefficient for passive relay {n}")))?;
            base.axpy(r.coefficient() * ch.g[n], &ch.f[n], C64::new(1.0, 0.0));
        }
        let mag = refl
            .get(candidate)
            .ok_or_else(|| Error::contract(format!("no reflection coefficient for passive relay {candidate}")))?
            .magnitude;
        let v = &ch.f[candidate] * (ch.g[candidate] * mag);
        Ok(Self { base, v })
    }

    pub fn at(&self, theta: f64) -> CVector {
        &self.base + &self.v * C64::from_polar(1.0, theta)
    }

    /// `f̂0(θ)ᴴ A f̂0(θ)` with `A = c·I + w wᴴ`.
    pub fn quadratic(&self, theta: f64, c: f64, w: &CVector) -> f64 {
        let f = self.at(theta);
        c * f.norm_squared() + w.dotc(&f).norm_sqr()
    }

    /// Exact maximizer of `f̂0(θ)ᴴ A f̂0(θ)`: align the cross term.
    pub fn analytic_argmax(&self, c: f64, w: &CVector) -> f64 {
        let av = &self.v * C64::new(c, 0.0) + w * w.dotc(&self.v);
        let cross = self.base.dotc(&av);
        if cross.norm() == 0.0 {
            0.0
        } else {
            (-cross.arg()).rem_euclid(TAU)
        }
    }
}

/// `Σ ρ_n/(1−ρ_n)·|g_n|²` over the relays of `op` that are still active in `mode`.
pub fn g_total(ch: &ChannelSet, mode: &ModeAssignment, op: &OperatingPoint) -> f64 {
    op.relays
        .iter()
        .zip(&op.rho)
        .filter(|(&n, _)| !mode.is_passive(n))
        .map(|(&n, &r)| r / (1.0 - r) * ch.g[n].norm_sqr())
        .sum()
}

/// Weight `1 + η g_t` of the identity part of the phase objective's matrix.
pub fn identity_weight(ch: &ChannelSet, mode: &ModeAssignment, op: &OperatingPoint, eta: f64) -> f64 {
    1.0 + eta * g_total(ch, mode, op)
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub theta: f64,
    pub gamma: f64,
    pub bound: BoundResult,
    pub rounds: usize,
}

/// Alternate a grid phase step on the candidate and a full bound re-solve until the
/// SNR settles. `refl` must already hold the candidate's entry.
pub fn optimize_phase(
    ev: &Evaluator<'_>,
    candidate: usize,
    mode: &ModeAssignment,
    refl: &ReflectionPlan,
    op: &OperatingPoint,
) -> Result<PhaseOutcome> {
    let terms = PhaseTerms::new(ev.ch, mode, refl, candidate)?;
    let mag = refl.get(candidate).map(|r| r.magnitude).unwrap_or(ev.gamma_max);
    let mut theta = refl.get(candidate).map(|r| r.theta).unwrap_or(0.0);
    let mut op = op.clone();
    let mut plan = refl.clone();
    let mut best: Option<PhaseOutcome> = None;
    let mut prev: Option<f64> = None;
    for round in 1..=ev.config.max_phase_rounds {
        let c = identity_weight(ev.ch, mode, &op, ev.eta);
        let (next, _) = ev.config.grid.argmax(|t| terms.quadratic(t, c, &op.w1));
        plan.set(candidate, next, mag);
        let bound = ev.bound(mode, &plan)?;
        let gamma = bound.gamma;
        let settled = prev.is_some_and(|p| (gamma - p).abs() <= ev.config.epsilon) || next == theta;
        if best.as_ref().is_none_or(|b| gamma > b.gamma) {
            best = Some(PhaseOutcome {
                theta: next,
                gamma,
                bound: bound.clone(),
                rounds: round,
            });
        }
        prev = Some(gamma);
        op = bound.op;
        theta = next;
        if settled {
            break;
        }
    }
    Ok(best.expect("at least one round"))
}
