//! Strong-direct-link bound: semidefinite reformulation with power splitting, and
//! its closed-form value at the recovered operating point.

use nalgebra::DMatrix;

use super::{check_params, matched, BoundKind, BoundResult, OperatingPoint, RHO_CEIL};
use crate::channel::{CVector, EnhancedChannels, C64};
use crate::conic::{
    extract_beamformer, herm_quad_coeff, recover_hermitian, reduce_rank, solve_sdp, trace_coeff, Affine,
    Constraint, ScalarKind, SdpProblem,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct DirectOptions {
    pub tol: f64,
    /// Gaussian randomization draws used when the beamforming matrix is not rank one.
    pub trials: usize,
    pub seed: u64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            trials: 200,
            seed: 0x5eed,
        }
    }
}

/// `p_t‖f̂0‖² + p_t|f̂0ᴴw1|² + Σ (ηρ_n p_t/(1−ρ_n)·|ĝ_n|²‖f̂0‖² − 1)`.
pub fn closed_form_snr(rho: &[f64], w1: &CVector, f0_hat: &CVector, g_hat: &[C64], p_t: f64, eta: f64) -> Result<f64> {
    if rho.len() != g_hat.len() {
        return Err(Error::contract(format!("{} PS ratios for {} relays", rho.len(), g_hat.len())));
    }
    if w1.len() != f0_hat.len() {
        return Err(Error::contract("w1 and f0_hat differ in length"));
    }
    let f0 = f0_hat.norm_squared();
    let mut gamma = p_t * f0 + p_t * f0_hat.dotc(w1).norm_sqr();
    for (&r, g) in rho.iter().zip(g_hat) {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::domain(format!("PS ratio {r} outside [0, 1)")));
        }
        gamma += eta * r * p_t / (1.0 - r) * g.norm_sqr() * f0 - 1.0;
    }
    Ok(gamma)
}

/// Positive root of `p_t s² + (1+ψ)s − aψ = 0`: the largest `s` the LMI admits for `κ = a`.
fn tight_s(a: f64, psi: f64, p_t: f64) -> f64 {
    let lin = 1.0 + psi;
    2.0 * a * psi / (lin + (lin * lin + 4.0 * p_t * a * psi).sqrt())
}

/// Orthonormal basis (as columns) of the span of `vs`.
fn span_basis(vs: &[&CVector], k: usize) -> DMatrix<C64> {
    if vs.is_empty() {
        return DMatrix::zeros(k, 0);
    }
    let m = DMatrix::from_columns(&vs.iter().map(|v| (*v).clone()).collect::<Vec<_>>());
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.max();
    let cols: Vec<_> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * top)
        .map(|i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(k, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn eval_bound_direct(enh: &EnhancedChannels, p_t: f64, eta: f64) -> Result<BoundResult> {
    eval_bound_direct_with(enh, p_t, eta, &DirectOptions::default())
}

pub fn eval_bound_direct_with(
    enh: &EnhancedChannels,
    p_t: f64,
    eta: f64,
    opts: &DirectOptions,
) -> Result<BoundResult> {
    check_params(p_t, eta)?;
    let k = enh.antennas();
    let f0 = &enh.f0;
    let f0_norm2 = f0.norm_squared();
    let psi: Vec<f64> = enh.g.iter().map(|g| eta * p_t * g.norm_sqr() * f0_norm2).collect();
    let live: Vec<usize> = (0..enh.f.len())
        .filter(|&i| psi[i] > 0.0 && enh.f[i].norm_squared() > 0.0)
        .collect();
    let mut flags = Vec::new();
    if live.len() < enh.f.len() {
        flags.push(format!(
            "{} active relay(s) without a usable two-hop path contribute nothing",
            enh.f.len() - live.len()
        ));
    }

    let scale = p_t * enh.f.iter().map(|f| f.norm_squared()).fold(f0_norm2, f64::max);
    let mut rho = vec![0.5; enh.f.len()];

    if live.is_empty() || scale == 0.0 {
        let w1 = matched(f0);
        let relaxation = 2.0 * p_t * f0_norm2;
        let gamma1 = p_t * f0.dotc(&w1).norm_sqr();
        let op = OperatingPoint::with_full_budget(enh, w1, matched(f0), rho, p_t, eta);
        return Ok(BoundResult {
            kind: BoundKind::Direct,
            gamma1,
            gamma2: p_t * f0_norm2,
            gamma: gamma1 + p_t * f0_norm2,
            direct_reference: gamma1,
            op,
            iterations: 0,
            converged: true,
            trace: vec![relaxation],
            relaxation: Some(relaxation),
            s_min2: None,
            flags,
        });
    }

    let psi_ref = live.iter().map(|&i| psi[i]).fold(0.0, f64::max);
    let omega = (scale / psi_ref).min(1.0);
    let sigma = (scale / psi_ref).sqrt();
    let basis = span_basis(&live.iter().map(|&i| &enh.f[i]).collect::<Vec<_>>(), k);
    let r = basis.ncols();

    let mut p = SdpProblem::new();
    let xw = p.add_block(2 * k);
    let xv = p.add_block(2 * r);
    let mut objective = Affine::trace(xw, herm_quad_coeff(f0) * (p_t / scale)).plus_constant(p_t * f0_norm2 / scale);
    p.constrain(Constraint::Le(Affine::trace(xw, trace_coeff(k)).plus_constant(-1.0)));
    let mut t_vars = Vec::with_capacity(live.len());
    for &i in &live {
        let f = &enh.f[i];
        let t = p.add_scalar(ScalarKind::Nonneg);
        t_vars.push(t);
        objective = objective.plus_scalar(t, 1.0);
        let a = Affine::trace(xw, herm_quad_coeff(f) * (p_t / scale));
        let fb = basis.adjoint() * f;
        let b = Affine::trace(xv, herm_quad_coeff(&fb) * (p_t * omega / scale));
        p.constrain(Constraint::Eq(Affine::scalar(t, 1.0).plus(a.clone().scaled(-1.0)).plus(b)));
        let c = psi[i] / psi_ref;
        let d = (1.0 + psi[i]) / psi_ref;
        p.constrain(Constraint::Lmi(vec![
            vec![a.scaled(c).plus_scalar(t, -d), Affine::scalar(t, sigma)],
            vec![Affine::scalar(t, sigma), Affine::constant(1.0)],
        ]));
    }
    p.maximize(objective);

    let sol = solve_sdp(&p, opts.tol)?;
    if !sol.is_usable() {
        return Err(Error::Solver(format!(
            "direct bound: status {:?} after {} iterations (gap {:.3e})",
            sol.status, sol.iterations, sol.gap
        )));
    }
    let relaxation = sol.objective * scale;
    let w_mat = recover_hermitian(sol.block(xw));

    let mut functionals = vec![f0 * f0.adjoint()];
    functionals.extend(live.iter().map(|&i| &enh.f[i] * enh.f[i].adjoint()));
    let reduced = reduce_rank(&w_mat, &functionals);
    let eig = {
        let sym = (&reduced + reduced.adjoint()) * C64::new(0.5, 0.0);
        sym.symmetric_eigenvalues()
    };
    let trace: f64 = eig.iter().map(|v| v.max(0.0)).sum();
    let rank_one = trace > 0.0 && eig.max() / trace >= 1.0 - 1e-6;

    let quad = |m: &DMatrix<C64>, v: &CVector| (v.adjoint() * m * v)[(0, 0)].re;
    let w1 = if rank_one {
        extract_beamformer(&reduced, |_| 0.0, 0, opts.seed)?
    } else {
        flags.push("beamforming matrix not rank one; randomized extraction".into());
        let score = |w: &CVector| {
            let mut v = p_t * f0_norm2 + p_t * f0.dotc(w).norm_sqr();
            for &i in &live {
                v += p_t * tight_s(enh.f[i].dotc(w).norm_sqr(), psi[i], p_t);
            }
            v
        };
        extract_beamformer(&reduced, score, opts.trials, opts.seed)?
    };
    let mut slack_relays = Vec::new();
    for (j, &i) in live.iter().enumerate() {
        let a_mat = quad(&w_mat, &enh.f[i]);
        let s = sol.scalar(t_vars[j]) * scale / p_t;
        let slack = a_mat * psi[i] - (1.0 + psi[i]) * s - p_t * s * s;
        if rank_one && slack > 1e-6 * a_mat * psi[i] {
            slack_relays.push(i);
        }
        // the ratio is set on the LMI boundary, where the closed form is exact; written as
        // 1 − s*(a)/a it does not cancel
        let a = enh.f[i].dotc(&w1).norm_sqr();
        rho[i] = if a <= 0.0 {
            1.0 / (1.0 + psi[i])
        } else {
            (1.0 - tight_s(a, psi[i], p_t) / a).clamp(0.0, RHO_CEIL)
        };
    }
    if !slack_relays.is_empty() {
        flags.push(format!("power-splitting LMI inactive at relays {slack_relays:?}"));
    }

    let live_rho: Vec<f64> = live.iter().map(|&i| rho[i]).collect();
    let live_g: Vec<C64> = live.iter().map(|&i| enh.g[i]).collect();
    let gamma = closed_form_snr(&live_rho, &w1, f0, &live_g, p_t, eta)?;
    let gamma1 = p_t * f0.dotc(&w1).norm_sqr();
    let op = OperatingPoint::with_full_budget(enh, w1, matched(f0), rho, p_t, eta);
    Ok(BoundResult {
        kind: BoundKind::Direct,
        gamma1,
        gamma2: gamma - gamma1,
        gamma,
        direct_reference: gamma1,
        op,
        iterations: sol.iterations,
        converged: sol.status == crate::conic::Status::Optimal,
        trace: vec![relaxation],
        relaxation: Some(relaxation),
        s_min2: None,
        flags,
    })
}
