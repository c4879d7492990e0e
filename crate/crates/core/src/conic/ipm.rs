//! Dense primal–dual interior-point method for
//!
//! ```text
//! minimize ⟨c, x⟩  s.t.  A x = b,  x ∈ K = R^l_+ × S^{n_1}_+ × … × S^{n_p}_+
//! maximize bᵀy     s.t.  A*y + s = c,  s ∈ K
//! ```
//!
//! Nesterov–Todd scaling with a Mehrotra predictor–corrector, infeasible start.
//! All blocks are small, so the Schur complement is formed and factored densely.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct Cone {
    pub l: usize,
    pub sizes: Vec<usize>,
}

impl Cone {
    fn degree(&self) -> usize {
        self.l + self.sizes.iter().sum::<usize>()
    }
}

/// Element of the cone's ambient space.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub lin: DVector<f64>,
    pub mats: Vec<DMatrix<f64>>,
}

impl Point {
    fn zeros(cone: &Cone) -> Self {
        Self {
            lin: DVector::zeros(cone.l),
            mats: cone.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        }
    }

    fn identity(cone: &Cone, scale: f64) -> Self {
        Self {
            lin: DVector::from_element(cone.l, scale),
            mats: cone.sizes.iter().map(|&n| DMatrix::identity(n, n) * scale).collect(),
        }
    }

    fn dot(&self, other: &Point) -> f64 {
        self.lin.dot(&other.lin) + self.mats.iter().zip(&other.mats).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, a: f64, x: &Point) {
        self.lin.axpy(a, &x.lin, 1.0);
        for (m, xm) in self.mats.iter_mut().zip(&x.mats) {
            *m += xm * a;
        }
    }

    fn sub(&self, other: &Point) -> Point {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// One linear functional `⟨a_i, x⟩`; blocks the row does not touch are `None`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub lin: DVector<f64>,
    pub mats: Vec<Option<DMatrix<f64>>>,
}

impl Row {
    pub fn new(cone: &Cone) -> Self {
        Self {
            lin: DVector::zeros(cone.l),
            mats: vec![None; cone.sizes.len()],
        }
    }

    pub fn add_lin(&mut self, i: usize, c: f64) {
        self.lin[i] += c;
    }

    pub fn add_mat(&mut self, b: usize, m: &DMatrix<f64>) {
        match &mut self.mats[b] {
            Some(existing) => *existing += m,
            slot => *slot = Some(m.clone()),
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.lin *= k;
        for m in self.mats.iter_mut().flatten() {
            *m *= k;
        }
    }

    fn dot(&self, p: &Point) -> f64 {
        let mut v = self.lin.dot(&p.lin);
        for (m, pm) in self.mats.iter().zip(&p.mats) {
            if let Some(m) = m {
                v += m.dot(pm);
            }
        }
        v
    }

    fn add_to(&self, a: f64, p: &mut Point) {
        p.lin.axpy(a, &self.lin, 1.0);
        for (m, pm) in self.mats.iter().zip(p.mats.iter_mut()) {
            if let Some(m) = m {
                *pm += m * a;
            }
        }
    }

    fn to_point(&self, cone: &Cone) -> Point {
        let mut p = Point::zeros(cone);
        self.add_to(1.0, &mut p);
        p
    }

    fn norm(&self) -> f64 {
        let mut s = self.lin.norm_squared();
        for m in self.mats.iter().flatten() {
            s += m.norm_squared();
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub cone: Cone,
    pub c: Row,
    pub rows: Vec<Row>,
    pub b: Vec<f64>,
}

impl StandardForm {
    fn apply(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.dot(x)))
    }

    fn adjoint(&self, y: &DVector<f64>) -> Point {
        let mut p = Point::zeros(&self.cone);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            r.add_to(yi, &mut p);
        }
        p
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    MaxIterations,
    /// A primal infeasibility certificate was found.
    Infeasible,
    /// A primal improving ray was found (dual infeasible).
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Relative duality gap and residual target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

pub(crate) struct RawSolution {
    pub x: Point,
    pub status: Status,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
}

struct BlockScaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    lam: DVector<f64>,
}

struct Scaling {
    d: DVector<f64>,
    lam: DVector<f64>,
    blocks: Vec<BlockScaling>,
}

fn lower_inverse(l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
}

fn block_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<BlockScaling> {
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let svd = (ls.transpose() * &lx).svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let lam = svd.singular_values;
    if lam.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let _ = u;
    let inv_sqrt = DMatrix::from_diagonal(&lam.map(|v| 1.0 / v.sqrt()));
    let sqrt = DMatrix::from_diagonal(&lam.map(f64::sqrt));
    let g = &lx * &v * inv_sqrt;
    let ginv = sqrt * v.transpose() * lower_inverse(&lx)?;
    let w = &g * g.transpose();
    Some(BlockScaling { g, ginv, w, lam })
}

fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    (a * b + b * a) * 0.5
}

/// Largest α ≥ 0 keeping `λ + α·dir` in the cone (in NT-scaled coordinates).
fn max_step(scaling: &Scaling, dir: &Point) -> f64 {
    let mut alpha = f64::INFINITY;
    for (lam, d) in scaling.lam.iter().zip(dir.lin.iter()) {
        if *d < 0.0 {
            alpha = alpha.min(-lam / d);
        }
    }
    for (bs, d) in scaling.blocks.iter().zip(&dir.mats) {
        let n = bs.lam.len();
        let m = DMatrix::from_fn(n, n, |i, j| d[(i, j)] / (bs.lam[i] * bs.lam[j]).sqrt());
        let m = (&m + m.transpose()) * 0.5;
        let min = m.symmetric_eigenvalues().min();
        if min < 0.0 {
            alpha = alpha.min(-1.0 / min);
        }
    }
    alpha
}

struct Newton<'a> {
    sf: &'a StandardForm,
    sc: &'a Scaling,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> Newton<'a> {
    fn new(sf: &'a StandardForm, sc: &'a Scaling) -> Option<Self> {
        let m = sf.rows.len();
        let mut schur = DMatrix::zeros(m, m);
        let d2 = sc.d.map(|v| v * v);
        for i in 0..m {
            let ri = sf.rows[i].lin.component_mul(&d2);
            for j in i..m {
                schur[(i, j)] = ri.dot(&sf.rows[j].lin);
            }
        }
        for (b, bs) in sc.blocks.iter().enumerate() {
            let scaled: Vec<Option<DMatrix<f64>>> = sf
                .rows
                .iter()
                .map(|r| r.mats[b].as_ref().map(|a| &bs.w * a * &bs.w))
                .collect();
            for i in 0..m {
                let Some(ai) = &sf.rows[i].mats[b] else { continue };
                for j in i..m {
                    if let Some(waw) = &scaled[j] {
                        schur[(i, j)] += ai.dot(waw);
                    }
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                schur[(i, j)] = schur[(j, i)];
            }
        }
        if let Some(chol) = schur.clone().cholesky() {
            return Some(Self {
                sf,
                sc,
                chol: Some(chol),
                lu: None,
            });
        }
        let diag_max = schur.diagonal().max().max(1e-300);
        let mut reg = schur.clone();
        for i in 0..m {
            reg[(i, i)] += 1e-13 * diag_max;
        }
        if let Some(chol) = reg.cholesky() {
            return Some(Self {
                sf,
                sc,
                chol: Some(chol),
                lu: None,
            });
        }
        let lu = schur.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self {
            sf,
            sc,
            chol: None,
            lu: Some(lu),
        })
    }

    fn solve_schur(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match (&self.chol, &self.lu) {
            (Some(c), _) => Some(c.solve(rhs)),
            (None, Some(lu)) => lu.solve(rhs),
            _ => None,
        }
    }

    fn apply_w(&self, p: &Point) -> Point {
        Point {
            lin: p.lin.component_mul(&self.sc.d.map(|v| v * v)),
            mats: self.sc.blocks.iter().zip(&p.mats).map(|(bs, m)| &bs.w * m * &bs.w).collect(),
        }
    }

    /// Solve with scaled complementarity right-hand side `rc`; returns (dx, dy, ds).
    fn solve(&self, rp: &DVector<f64>, rd: &Point, rc: &Point) -> Option<(Point, DVector<f64>, Point)> {
        let sc = self.sc;
        // U solves λ ∘ U = rc, then mapped back: G U Gᵀ
        let mut gug = Point {
            lin: DVector::zeros(rc.lin.len()),
            mats: Vec::with_capacity(rc.mats.len()),
        };
        for k in 0..rc.lin.len() {
            gug.lin[k] = sc.d[k] * rc.lin[k] / sc.lam[k];
        }
        for (bs, r) in sc.blocks.iter().zip(&rc.mats) {
            let n = bs.lam.len();
            let u = DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (bs.lam[i] + bs.lam[j]));
            gug.mats.push(&bs.g * u * bs.g.transpose());
        }
        let wrdw = self.apply_w(rd);
        let rhs = rp - self.sf.apply(&gug.sub(&wrdw));
        let dy = self.solve_schur(&rhs)?;
        let mut ds = rd.clone();
        ds.axpy(-1.0, &self.sf.adjoint(&dy));
        let mut dx = gug;
        dx.axpy(-1.0, &self.apply_w(&ds));
        Some((dx, dy, ds))
    }

    fn scaled_primal(&self, dx: &Point) -> Point {
        Point {
            lin: dx.lin.component_div(&self.sc.d),
            mats: self
                .sc
                .blocks
                .iter()
                .zip(&dx.mats)
                .map(|(bs, m)| &bs.ginv * m * bs.ginv.transpose())
                .collect(),
        }
    }

    fn scaled_dual(&self, ds: &Point) -> Point {
        Point {
            lin: ds.lin.component_mul(&self.sc.d),
            mats: self
                .sc
                .blocks
                .iter()
                .zip(&ds.mats)
                .map(|(bs, m)| bs.g.transpose() * m * &bs.g)
                .collect(),
        }
    }
}

fn lambda_square(sc: &Scaling) -> Point {
    Point {
        lin: sc.lam.map(|v| v * v),
        mats: sc
            .blocks
            .iter()
            .map(|bs| DMatrix::from_diagonal(&bs.lam.map(|v| v * v)))
            .collect(),
    }
}

fn compute_scaling(x: &Point, s: &Point) -> Option<Scaling> {
    if x.lin.iter().chain(s.lin.iter()).any(|&v| !(v > 0.0)) {
        return None;
    }
    let d = x.lin.zip_map(&s.lin, |a, b| (a / b).sqrt());
    let lam = x.lin.zip_map(&s.lin, |a, b| (a * b).sqrt());
    let blocks = x
        .mats
        .iter()
        .zip(&s.mats)
        .map(|(xm, sm)| block_scaling(xm, sm))
        .collect::<Option<Vec<_>>>()?;
    Some(Scaling { d, lam, blocks })
}

pub(crate) fn solve_standard(sf: &StandardForm, opts: &SolverOptions) -> RawSolution {
    let cone = &sf.cone;
    let nu = cone.degree().max(1) as f64;
    let b = DVector::from_vec(sf.b.clone());
    let c = sf.c.to_point(cone);
    let b_norm = b.norm();
    let c_norm = c.norm();

    let max_row = sf.rows.iter().map(Row::norm).fold(0.0, f64::max);
    let xi = sf
        .rows
        .iter()
        .zip(&sf.b)
        .map(|(r, bi)| (1.0 + bi.abs()) / (1.0 + r.norm()))
        .fold(nu.sqrt().max(10.0), f64::max);
    let zeta = nu.sqrt().max(10.0).max(c_norm).max(max_row);

    let mut x = Point::identity(cone, xi);
    let mut s = Point::identity(cone, zeta);
    let mut y = DVector::zeros(sf.rows.len());

    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let (mut pobj, mut dobj, mut gap, mut pres);

    loop {
        let rp = &b - sf.apply(&x);
        let mut rd = c.clone();
        rd.axpy(-1.0, &sf.adjoint(&y));
        rd.axpy(-1.0, &s);
        pobj = c.dot(&x);
        dobj = b.dot(&y);
        let xs = x.dot(&s);
        let mu = xs / nu;
        pres = rp.norm() / (1.0 + b_norm);
        let dres = rd.norm() / (1.0 + c_norm);
        gap = (pobj - dobj).abs().max(xs) / (1.0 + pobj.abs() + dobj.abs());

        if pres <= opts.tol && dres <= opts.tol && gap <= opts.tol {
            status = Status::Optimal;
            break;
        }
        let inf_tol = 1e-9;
        if dobj > 0.0 && (c.sub(&rd)).norm() <= inf_tol * dobj {
            status = Status::Infeasible;
            break;
        }
        if pobj < 0.0 && (&b - &rp).norm() <= inf_tol * -pobj {
            status = Status::Unbounded;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let Some(sc) = compute_scaling(&x, &s) else { break };
        let Some(newton) = Newton::new(sf, &sc) else { break };

        let lam2 = lambda_square(&sc);
        let mut rc_aff = lam2.clone();
        rc_aff.axpy(-2.0, &lam2);
        let Some((dx_a, _, ds_a)) = newton.solve(&rp, &rd, &rc_aff) else { break };
        let dxs_a = newton.scaled_primal(&dx_a);
        let dss_a = newton.scaled_dual(&ds_a);
        let ap = max_step(&sc, &dxs_a).min(1.0);
        let ad = max_step(&sc, &dss_a).min(1.0);
        let mut xa = x.clone();
        xa.axpy(ap, &dx_a);
        let mut sa = s.clone();
        sa.axpy(ad, &ds_a);
        let mu_aff = xa.dot(&sa) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let mut rc = Point::identity(cone, sigma * mu);
        rc.axpy(-1.0, &lam2);
        let cross = Point {
            lin: dxs_a.lin.component_mul(&dss_a.lin),
            mats: dxs_a.mats.iter().zip(&dss_a.mats).map(|(a, b)| jordan(a, b)).collect(),
        };
        rc.axpy(-1.0, &cross);
        let Some((dx, dy, ds)) = newton.solve(&rp, &rd, &rc) else { break };
        let ap = (0.98 * max_step(&sc, &newton.scaled_primal(&dx))).min(1.0);
        let ad = (0.98 * max_step(&sc, &newton.scaled_dual(&ds))).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        x.axpy(ap, &dx);
        y.axpy(ad, &dy, 1.0);
        s.axpy(ad, &ds);
        for m in x.mats.iter_mut().chain(s.mats.iter_mut()) {
            let sym = (&*m + m.transpose()) * 0.5;
            *m = sym;
        }
        iterations += 1;
    }

    RawSolution {
        x,
        status,
        iterations,
        primal_objective: pobj,
        dual_objective: dobj,
        gap,
        primal_residual: pres,
    }
}
