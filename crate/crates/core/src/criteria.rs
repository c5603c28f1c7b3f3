//! Checkable criteria: non-resonance, irreducibility and the minimal-extension test.

use crate::connection::ConnectionS;
use crate::error::Result;
use crate::hobject::HObject;
use crate::linalg::{algebra_closure, charpoly, det, inverse, SpanBuilder};
use crate::matrix::Matrix;
use crate::normal_form::NormalForm;
use crate::poly::{integer_roots, Polynomial};
use crate::scalar::Field;
use crate::sylvester::ad_operator;

/// True iff `ad_L` on `⊕_a End(V_a)` has no nonzero integer eigenvalue.
pub fn nonresonance_check<F: Field>(nf: &NormalForm<F>) -> Result<bool> {
    let mut cp = Polynomial::constant(F::one());
    for l in nf.l_blocks() {
        cp = cp.mul(&charpoly(&ad_operator(l)));
    }
    Ok(integer_roots(&cp)?.iter().all(|&k| k == 0))
}

/// Burnside test on all partial-fraction coefficients.
pub fn is_irreducible_s<F: Field>(a: &ConnectionS<F>) -> bool {
    let n = a.dim();
    n > 0 && algebra_closure(&a.all_coefficients(), n) == n * n
}

/// `Ker N`, and coordinates on `Coker N = W / Im N`, for a nilpotent `N`.
fn kernel_and_cokernel<F: Field>(n: &Matrix<F>) -> (Matrix<F>, Matrix<F>) {
    let d = n.rows();
    let ker = crate::linalg::mat_kernel(n);
    let mut span = SpanBuilder::new(d);
    let mut basis: Vec<Vec<F>> = Vec::new();
    for c in 0..d {
        let col = n.column(c);
        if span.insert(&col) {
            basis.push(col);
        }
    }
    let range_dim = basis.len();
    for c in 0..d {
        let mut e = vec![F::zero(); d];
        e[c] = F::one();
        if span.insert(&e) {
            basis.push(e);
        }
    }
    let b = Matrix::from_columns(d, &basis);
    let binv = inverse(&b).expect("completed basis is invertible");
    let proj = binv.submatrix(range_dim, 0, d - range_dim, d);
    (Matrix::from_columns(d, &ker), proj)
}

/// Every block's map `Ker N_i → Coker N_i` induced by `P_iQ_i + k` must be
/// invertible for all integers `k`.
pub fn minimal_criterion<F: Field>(h: &HObject<F>) -> Result<bool> {
    for b in h.blocks() {
        let (incl, proj) = kernel_and_cokernel(&b.n);
        let r = incl.cols();
        if r == 0 {
            continue;
        }
        let m = proj.mul_mat(&b.p.mul_mat(&b.q)).mul_mat(&incl);
        let j = proj.mul_mat(&incl);
        let p = det_pencil(&m, &j);
        if p.is_zero() {
            return Ok(false);
        }
        if !integer_roots(&p)?.is_empty() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `det(M + kJ)` as a polynomial in `k`, by interpolation.
pub fn det_pencil<F: Field>(m: &Matrix<F>, j: &Matrix<F>) -> Polynomial<F> {
    let r = m.rows();
    let xs: Vec<F> = (0..=r as i64).map(F::from_i64).collect();
    let ys: Vec<F> = xs.iter().map(|k| det(&m.add_mat(&j.scale(k)))).collect();
    Polynomial::interpolate(&xs, &ys)
}
