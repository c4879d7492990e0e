//! User-facing SDP description: PSD matrix blocks, scalar variables, affine expressions,
//! and linear/LMI constraints. Compiled into the standard primal form consumed by the
//! interior-point solver.

use nalgebra::DMatrix;

use super::ipm::{Cone, Row, StandardForm};
use crate::error::{Error, Result};

/// Handle to a symmetric PSD block variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockVar(pub(crate) usize);

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarVar(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    Nonneg,
    Free,
}

/// `constant + Σ trace(C_b X_b) + Σ c_s x_s`.
#[derive(Debug, Clone, Default)]
pub struct Affine {
    pub constant: f64,
    pub blocks: Vec<(BlockVar, DMatrix<f64>)>,
    pub scalars: Vec<(ScalarVar, f64)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Default::default()
        }
    }

    pub fn scalar(v: ScalarVar, coef: f64) -> Self {
        Self::default().plus_scalar(v, coef)
    }

    /// `trace(C X)`; `C` is symmetrized.
    pub fn trace(b: BlockVar, c: DMatrix<f64>) -> Self {
        Self::default().plus_trace(b, c)
    }

    pub fn plus_scalar(mut self, v: ScalarVar, coef: f64) -> Self {
        self.scalars.push((v, coef));
        self
    }

    pub fn plus_trace(mut self, b: BlockVar, c: DMatrix<f64>) -> Self {
        let sym = (&c + c.transpose()) * 0.5;
        self.blocks.push((b, sym));
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.constant *= k;
        for (_, m) in &mut self.blocks {
            *m *= k;
        }
        for (_, c) in &mut self.scalars {
            *c *= k;
        }
        self
    }

    pub fn plus(mut self, other: Affine) -> Self {
        self.constant += other.constant;
        self.blocks.extend(other.blocks);
        self.scalars.extend(other.scalars);
        self
    }

    /// Evaluate at given block and scalar values.
    pub fn eval(&self, blocks: &[DMatrix<f64>], scalars: &[f64]) -> f64 {
        let mut v = self.constant;
        for (b, c) in &self.blocks {
            v += c.dot(&blocks[b.0]);
        }
        for (s, c) in &self.scalars {
            v += c * scalars[s.0];
        }
        v
    }
}

#[derive(Debug, Clone)]
pub enum Constraint {
    /// `expr = 0`
    Eq(Affine),
    /// `expr ≥ 0`
    Ge(Affine),
    /// `expr ≤ 0`
    Le(Affine),
    /// Symmetric matrix of affine entries is PSD; only the upper triangle is read.
    Lmi(Vec<Vec<Affine>>),
}

/// A maximization SDP over PSD blocks and scalars.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    pub(crate) blocks: Vec<usize>,
    pub(crate) scalars: Vec<ScalarKind>,
    pub(crate) objective: Affine,
    pub(crate) constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, side: usize) -> BlockVar {
        self.blocks.push(side);
        BlockVar(self.blocks.len() - 1)
    }

    pub fn add_scalar(&mut self, kind: ScalarKind) -> ScalarVar {
        self.scalars.push(kind);
        ScalarVar(self.scalars.len() - 1)
    }

    pub fn maximize(&mut self, objective: Affine) {
        self.objective = objective;
    }

    pub fn constrain(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn block_sides(&self) -> &[usize] {
        &self.blocks
    }

    pub fn scalar_count(&self) -> usize {
        self.scalars.len()
    }

    pub fn objective(&self) -> &Affine {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn check_affine(&self, a: &Affine) -> Result<()> {
        for (b, m) in &a.blocks {
            let side = *self
                .blocks
                .get(b.0)
                .ok_or_else(|| Error::contract(format!("unknown block {}", b.0)))?;
            if m.nrows() != side || m.ncols() != side {
                return Err(Error::contract(format!(
                    "coefficient {}x{} does not match block {} of side {side}",
                    m.nrows(),
                    m.ncols(),
                    b.0
                )));
            }
        }
        for (s, c) in &a.scalars {
            if s.0 >= self.scalars.len() {
                return Err(Error::contract(format!("unknown scalar {}", s.0)));
            }
            if !c.is_finite() {
                return Err(Error::contract("non-finite scalar coefficient"));
            }
        }
        if !a.constant.is_finite() {
            return Err(Error::contract("non-finite constant"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_affine(&self.objective)?;
        for c in &self.constraints {
            match c {
                Constraint::Eq(a) | Constraint::Ge(a) | Constraint::Le(a) => self.check_affine(a)?,
                Constraint::Lmi(m) => {
                    if m.is_empty() || m.iter().any(|r| r.len() != m.len()) {
                        return Err(Error::contract("LMI must be a nonempty square array"));
                    }
                    for r in m {
                        for a in r {
                            self.check_affine(a)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn compile(&self) -> Result<Compiled> {
        self.validate()?;
        // orthant layout: scalars first (free ones take two slots), then inequality slacks
        let mut scalar_slots = Vec::with_capacity(self.scalars.len());
        let mut l = 0usize;
        for kind in &self.scalars {
            match kind {
                ScalarKind::Nonneg => {
                    scalar_slots.push((l, None));
                    l += 1;
                }
                ScalarKind::Free => {
                    scalar_slots.push((l, Some(l + 1)));
                    l += 2;
                }
            }
        }
        let ineq_count = self
            .constraints
            .iter()
            .filter(|c| matches!(c, Constraint::Ge(_) | Constraint::Le(_)))
            .count();
        let first_slack = l;
        l += ineq_count;

        let mut sizes = self.blocks.clone();
        let user_blocks = sizes.len();
        for c in &self.constraints {
            if let Constraint::Lmi(m) = c {
                sizes.push(m.len());
            }
        }
        let cone = Cone { l, sizes };

        let lower = |a: &Affine, row: &mut Row| {
            for (s, c) in &a.scalars {
                let (p, m) = scalar_slots[s.0];
                row.add_lin(p, *c);
                if let Some(m) = m {
                    row.add_lin(m, -*c);
                }
            }
            for (b, mat) in &a.blocks {
                row.add_mat(b.0, mat);
            }
        };

        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut slack = first_slack;
        let mut lmi_block = user_blocks;
        for c in &self.constraints {
            match c {
                Constraint::Eq(a) => {
                    let mut row = Row::new(&cone);
                    lower(a, &mut row);
                    rows.push(row);
                    rhs.push(-a.constant);
                }
                Constraint::Ge(a) | Constraint::Le(a) => {
                    let mut row = Row::new(&cone);
                    lower(a, &mut row);
                    let sign = if matches!(c, Constraint::Ge(_)) { -1.0 } else { 1.0 };
                    row.add_lin(slack, sign);
                    slack += 1;
                    rows.push(row);
                    rhs.push(-a.constant);
                }
                Constraint::Lmi(m) => {
                    let side = m.len();
                    for i in 0..side {
                        for j in i..side {
                            let mut row = Row::new(&cone);
                            lower(&m[i][j], &mut row);
                            let mut e = DMatrix::zeros(side, side);
                            if i == j {
                                e[(i, i)] = -1.0;
                            } else {
                                e[(i, j)] = -0.5;
                                e[(j, i)] = -0.5;
                            }
                            row.add_mat(lmi_block, &e);
                            rows.push(row);
                            rhs.push(-m[i][j].constant);
                        }
                    }
                    lmi_block += 1;
                }
            }
        }

        // maximize obj  <=>  minimize -obj
        let mut c = Row::new(&cone);
        lower(&self.objective, &mut c);
        c.scale(-1.0);

        Ok(Compiled {
            std: StandardForm {
                cone,
                c,
                rows,
                b: rhs,
            },
            scalar_slots,
            user_blocks,
            objective_constant: self.objective.constant,
        })
    }
}

pub(crate) struct Compiled {
    pub std: StandardForm,
    pub scalar_slots: Vec<(usize, Option<usize>)>,
    pub user_blocks: usize,
    pub objective_constant: f64,
}
