//! Real embedding of complex Hermitian matrices: `W ↦ [[Re W, −Im W], [Im W, Re W]]`.
//! For Hermitian `A`, `trace(embed(A)·embed(W)) = 2·trace(A W)`.

use nalgebra::DMatrix;

use crate::channel::{CVector, C64};

pub fn embed(m: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// Coefficient `C` such that `trace(C X) = fᴴ W f` for `X` the embedding of `W`.
pub fn herm_quad_coeff(f: &CVector) -> DMatrix<f64> {
    embed(&(f * f.adjoint())) * 0.5
}

/// Coefficient `C` such that `trace(C X) = trace(W)`.
pub fn trace_coeff(n: usize) -> DMatrix<f64> {
    DMatrix::identity(2 * n, 2 * n) * 0.5
}

/// Hermitian `W` from a real PSD `X` of side `2n`; values of embedded functionals are kept.
pub fn recover_hermitian(x: &DMatrix<f64>) -> DMatrix<C64> {
    let n = x.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        C64::new(re, im)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_w() -> DMatrix<C64> {
        let a = DMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 - j as f64 * 0.5, 0.3 * (i + j) as f64));
        &a * a.adjoint()
    }

    #[test]
    fn quadratic_form_preserved() {
        let w = sample_w();
        let f = CVector::from_vec(vec![C64::new(1.0, -0.5), C64::new(0.2, 0.7), C64::new(-1.1, 0.0)]);
        let direct = (f.adjoint() * &w * &f)[(0, 0)].re;
        let via = herm_quad_coeff(&f).dot(&embed(&w));
        assert!((direct - via).abs() < 1e-12);
        let tr = trace_coeff(3).dot(&embed(&w));
        assert!((tr - w.trace().re).abs() < 1e-12);
    }

    #[test]
    fn recover_inverts_embed() {
        let w = sample_w();
        let back = recover_hermitian(&embed(&w));
        assert!((back - w).norm() < 1e-12);
    }
}
