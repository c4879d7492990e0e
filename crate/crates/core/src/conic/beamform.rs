use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{embed, solve_sdp_checked, Affine, Constraint, ScalarKind, SdpProblem};
use crate::channel::{CVector, C64};
use crate::error::{Error, Result};

const SOLVER_TOL: f64 = 1e-9;

fn hermitian_eigen(w: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let sym = (w + w.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (vals, vecs)
}

/// Basis matrix `k` of the real vector space of `r × r` Hermitian matrices.
fn herm_basis(r: usize, k: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(r, r);
    if k < r {
        m[(k, k)] = C64::new(1.0, 0.0);
        return m;
    }
    let mut idx = k - r;
    let pairs = r * (r - 1) / 2;
    let imag = idx >= pairs;
    if imag {
        idx -= pairs;
    }
    let mut count = 0;
    for i in 0..r {
        for j in (i + 1)..r {
            if count == idx {
                let v = if imag { C64::new(0.0, 1.0) } else { C64::new(1.0, 0.0) };
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
                return m;
            }
            count += 1;
        }
    }
    unreachable!()
}

/// Lower the rank of PSD `W` while keeping `trace(A_i W)` for every Hermitian `A_i`
/// and the trace. Stops once `rank² ≤ functionals + 1`.
pub fn reduce_rank(w: &DMatrix<C64>, functionals: &[DMatrix<C64>]) -> DMatrix<C64> {
    let mut cur = w.clone();
    let m = functionals.len() + 1;
    loop {
        let (vals, vecs) = hermitian_eigen(&cur);
        let top = vals.max().max(0.0);
        if top <= 0.0 {
            return cur;
        }
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-10 * top).collect();
        let r = keep.len();
        let factor = DMatrix::from_columns(
            &keep
                .iter()
                .map(|&i| vecs.column(i) * C64::new(vals[i].sqrt(), 0.0))
                .collect::<Vec<_>>(),
        );
        if r * r <= m {
            return &factor * factor.adjoint();
        }
        let dim = r * r;
        let basis: Vec<DMatrix<C64>> = (0..dim).map(|k| herm_basis(r, k)).collect();
        let mut projected: Vec<DMatrix<C64>> = functionals.iter().map(|a| factor.adjoint() * a * &factor).collect();
        projected.push(factor.adjoint() * &factor);
        let mut lin = DMatrix::<f64>::zeros(projected.len(), dim);
        for (i, p) in projected.iter().enumerate() {
            let scale = p.norm().max(1e-300);
            for (k, e) in basis.iter().enumerate() {
                lin[(i, k)] = (p * e).trace().re / scale;
            }
        }
        let gram = lin.transpose() * &lin;
        let eig = gram.symmetric_eigen();
        let (kmin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let coef = eig.eigenvectors.column(kmin);
        let mut delta = DMatrix::<C64>::zeros(r, r);
        for (k, e) in basis.iter().enumerate() {
            delta += e * C64::new(coef[k], 0.0);
        }
        let dmax = (&delta + delta.adjoint()).map(|z| z * 0.5).symmetric_eigenvalues().max();
        if dmax <= 1e-12 {
            return &factor * factor.adjoint();
        }
        let step = DMatrix::<C64>::identity(r, r) - delta * C64::new(1.0 / dmax, 0.0);
        let next = &factor * step * factor.adjoint();
        cur = (&next + next.adjoint()) * C64::new(0.5, 0.0);
    }
}

/// Pick a unit-norm beamformer from PSD `W`: the principal eigenvector when `W` is
/// numerically rank one, otherwise the best-scoring among all eigenvectors and
/// `trials` Gaussian draws shaped by `W`. Ties go to the earliest candidate.
pub fn extract_beamformer<F>(w: &DMatrix<C64>, score: F, trials: usize, seed: u64) -> Result<CVector>
where
    F: Fn(&CVector) -> f64,
{
    if w.nrows() == 0 || w.nrows() != w.ncols() {
        return Err(Error::contract("beamforming matrix must be square and nonempty"));
    }
    let (vals, vecs) = hermitian_eigen(w);
    let n = vals.len();
    let floor = -1e-8 * (1.0 + w.norm());
    if let Some(&low) = vals.iter().find(|&&v| v < floor) {
        return Err(Error::contract(format!("beamforming matrix has eigenvalue {low:.3e}")));
    }
    let trace: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    if trace <= 0.0 || vals[0] / trace >= 1.0 - 1e-6 {
        return Ok(vecs.column(0).into_owned());
    }
    let mut candidates: Vec<CVector> = (0..n).map(|i| vecs.column(i).into_owned()).collect();
    let shape = DMatrix::from_columns(
        &(0..n)
            .map(|i| vecs.column(i) * C64::new(vals[i].max(0.0).sqrt(), 0.0))
            .collect::<Vec<_>>(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let z = CVector::from_fn(n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        });
        let v = &shape * z;
        let norm = v.norm();
        if norm > 0.0 {
            candidates.push(v / C64::new(norm, 0.0));
        }
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let s = score(c);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(candidates.swap_remove(best))
}

/// Result of the max–min gain beamforming problem.
#[derive(Debug, Clone)]
pub struct MinGain {
    /// Unit-norm beamformer.
    pub w: CVector,
    /// `min_n |f_nᴴ w|²` achieved by `w`.
    pub s_min2: f64,
    /// Optimal value of the relaxation, an upper bound on `s_min2`.
    pub relaxed: f64,
}

pub const RANDOMIZATION_TRIALS: usize = 500;

/// `max_{‖w‖≤1} min_n |f_nᴴ w|²` through its semidefinite relaxation.
pub fn solve_min_gain_beamforming(vectors: &[CVector]) -> Result<MinGain> {
    let Some(first) = vectors.first() else {
        return Err(Error::contract("min-gain beamforming needs at least one vector"));
    };
    let k = first.len();
    if k == 0 || vectors.iter().any(|v| v.len() != k) {
        return Err(Error::contract("vectors must share a nonzero dimension"));
    }
    let scale = vectors.iter().map(|v| v.norm_squared()).fold(0.0, f64::max);
    let gain = |w: &CVector| {
        vectors
            .iter()
            .map(|f| (f.adjoint() * w)[(0, 0)].norm_sqr())
            .fold(f64::INFINITY, f64::min)
    };
    if scale == 0.0 {
        let mut w = CVector::zeros(k);
        w[0] = C64::new(1.0, 0.0);
        return Ok(MinGain {
            w,
            s_min2: 0.0,
            relaxed: 0.0,
        });
    }
    let unit: Vec<CVector> = vectors.iter().map(|v| v / C64::new(scale.sqrt(), 0.0)).collect();

    let mut p = SdpProblem::new();
    let x = p.add_block(2 * k);
    let t = p.add_scalar(ScalarKind::Nonneg);
    p.maximize(Affine::scalar(t, 1.0));
    for f in &unit {
        p.constrain(Constraint::Ge(Affine::trace(x, embed::herm_quad_coeff(f)).plus_scalar(t, -1.0)));
    }
    p.constrain(Constraint::Le(Affine::trace(x, embed::trace_coeff(k)).plus_constant(-1.0)));
    let sol = solve_sdp_checked(&p, SOLVER_TOL)?;
    let w_mat = embed::recover_hermitian(sol.block(x));
    let functionals: Vec<DMatrix<C64>> = unit.iter().map(|f| f * f.adjoint()).collect();
    let reduced = reduce_rank(&w_mat, &functionals);
    let w = extract_beamformer(&reduced, gain, RANDOMIZATION_TRIALS, 0x5eed)?;
    let s_min2 = gain(&w);
    Ok(MinGain {
        w,
        s_min2,
        relaxed: sol.objective * scale,
    })
}
