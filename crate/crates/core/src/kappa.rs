//! The canonical section κ of Φ, and the closed-form κ of a normal form.

use crate::connection::ConnectionS;
use crate::error::{Error, Result};
use crate::hobject::{HBlock, HObject};
use crate::linalg::{block_shift, mat_kernel, rref};
use crate::matrix::Matrix;
use crate::normal_form::NormalForm;
use crate::scalar::Field;

/// `Â = Σ_j A_j x^{k−j}` acting on `V ⊗ ℂ[x]/(x^k)`, basis `1, x, …, x^{k−1}`.
pub fn a_hat<F: Field>(coeffs: &[Matrix<F>], n: usize) -> Matrix<F> {
    let k = coeffs.len();
    let mut m = Matrix::zeros(n * k, n * k);
    for p in 0..k {
        for q in 0..=p {
            m.set_block(p * n, q * n, &coeffs[k - 1 - (p - q)]);
        }
    }
    m
}

/// `W = V ⊗ R / Ker Â` realized on the non-pivot coordinates of the
/// row-reduced kernel.
struct Quotient<F> {
    kernel_rows: Vec<Vec<F>>,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

impl<F: Field> Quotient<F> {
    fn new(kernel: Vec<Vec<F>>, total: usize) -> Self {
        if kernel.is_empty() {
            return Quotient { kernel_rows: Vec::new(), pivots: Vec::new(), free: (0..total).collect() };
        }
        let e = rref(&Matrix::from_rows(kernel, total).expect("kernel vectors share length"));
        let r = e.pivots.len();
        let kernel_rows = e.reduced.to_rows().into_iter().take(r).collect();
        let free = (0..total).filter(|c| !e.pivots.contains(c)).collect();
        Quotient { kernel_rows, pivots: e.pivots, free }
    }

    fn dim(&self) -> usize {
        self.free.len()
    }

    fn project(&self, u: &[F]) -> Vec<F> {
        let mut v = u.to_vec();
        for (row, &p) in self.kernel_rows.iter().zip(&self.pivots) {
            let c = v[p].clone();
            if c.is_zero() {
                continue;
            }
            for (x, y) in v.iter_mut().zip(row) {
                if !y.is_zero() {
                    *x = x.sub_ref(&c.mul_ref(y));
                }
            }
        }
        self.free.iter().map(|&f| v[f].clone()).collect()
    }

    fn lift(&self, w: &[F], total: usize) -> Vec<F> {
        let mut u = vec![F::zero(); total];
        for (&f, x) in self.free.iter().zip(w) {
            u[f] = x.clone();
        }
        u
    }
}

/// κ at one pole: `(N_i, Q_i, P_i)` from the coefficient stack `[A_1, …, A_k]`.
pub fn kappa_block<F: Field>(coeffs: &[Matrix<F>], n: usize) -> (Matrix<F>, Matrix<F>, Matrix<F>) {
    let k = coeffs.len();
    let total = n * k;
    let ah = a_hat(coeffs, n);
    let quo = Quotient::new(mat_kernel(&ah), total);
    let d = quo.dim();
    let shift = |u: &[F]| -> Vec<F> {
        let mut out = vec![F::zero(); total];
        out[n..].clone_from_slice(&u[..total - n]);
        out
    };
    let mut nmat = Matrix::zeros(d, d);
    let mut qmat = Matrix::zeros(n, d);
    for c in 0..d {
        let mut e = vec![F::zero(); d];
        e[c] = F::one();
        let u = quo.lift(&e, total);
        let col = quo.project(&shift(&u));
        for (r, x) in col.into_iter().enumerate() {
            nmat[(r, c)] = x;
        }
        let img = ah.apply(&u);
        for r in 0..n {
            qmat[(r, c)] = img[(k - 1) * n + r].clone();
        }
    }
    let mut pmat = Matrix::zeros(d, n);
    for c in 0..n {
        let mut u = vec![F::zero(); total];
        u[c] = F::one();
        for (r, x) in quo.project(&u).into_iter().enumerate() {
            pmat[(r, c)] = x;
        }
    }
    (nmat, qmat, pmat)
}

/// The canonical section: `Φ(κ(a)) = a` and `κ(a)` is stable.
pub fn kappa<F: Field>(a: &ConnectionS<F>) -> Result<HObject<F>> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let blocks = a
        .poles()
        .iter()
        .map(|p| {
            let (nm, q, pm) = kappa_block(&p.coeffs, n);
            HBlock { t: p.position.clone(), n: nm, q, p: pm }
        })
        .collect();
    HObject::new(n, a.constant_term().clone(), blocks)
}

/// `(N_a, X_a, Y_a)` for one group in the basis `z^{k−1}, …, 1`.
pub fn normal_group_block<F: Field>(lambda_coeffs: &[F], l: &Matrix<F>) -> (Matrix<F>, Matrix<F>, Matrix<F>) {
    let d = l.rows();
    if lambda_coeffs.is_empty() {
        // W_0 = V_0 / Ker L_0: project onto the row space coordinates
        let quo = Quotient::new(mat_kernel(l), d);
        let w = quo.dim();
        let mut y = Matrix::zeros(w, d);
        for c in 0..d {
            let mut u = vec![F::zero(); d];
            u[c] = F::one();
            for (r, x) in quo.project(&u).into_iter().enumerate() {
                y[(r, c)] = x;
            }
        }
        let mut x = Matrix::zeros(d, w);
        for c in 0..w {
            let mut e = vec![F::zero(); w];
            e[c] = F::one();
            for (r, v) in l.apply(&quo.lift(&e, d)).into_iter().enumerate() {
                x[(r, c)] = v;
            }
        }
        return (Matrix::zeros(w, w), x, y);
    }
    let k = lambda_coeffs.len() + 1;
    let mut x = Matrix::zeros(d, d * k);
    for (p, c) in lambda_coeffs.iter().rev().enumerate() {
        x.set_block(0, p * d, &Matrix::scalar(d, c.clone()));
    }
    x.set_block(0, (k - 1) * d, l);
    let mut y = Matrix::zeros(d * k, d);
    y.set_block((k - 1) * d, 0, &Matrix::identity(d));
    (block_shift(d, k), x, y)
}

/// Block-diagonal `(N, X, Y)` of a normal form, groups in order.
pub fn normal_form_xy<F: Field>(nf: &NormalForm<F>) -> (Matrix<F>, Matrix<F>, Matrix<F>) {
    let parts: Vec<_> = nf
        .groups()
        .iter()
        .zip(nf.l_blocks())
        .map(|(g, l)| normal_group_block(&g.lambda_coeffs, l))
        .collect();
    let ns: Vec<Matrix<F>> = parts.iter().map(|p| p.0.clone()).collect();
    let xs: Vec<Matrix<F>> = parts.iter().map(|p| p.1.clone()).collect();
    let ys: Vec<Matrix<F>> = parts.iter().map(|p| p.2.clone()).collect();
    (Matrix::block_diag(&ns), Matrix::block_diag(&xs), Matrix::block_diag(&ys))
}

/// The closed-form object `(V, W; 0, t + N, X, Y)` of a normal form at a
/// finite point.
pub fn normal_form_hobject<F: Field>(nf: &NormalForm<F>) -> Result<HObject<F>> {
    let t = match nf.position() {
        crate::normal_form::Position::Finite(t) => t.clone(),
        crate::normal_form::Position::Infinity => {
            return Err(Error::InvalidInput("normal form at infinity has no finite block".into()))
        }
    };
    let n = nf.dim();
    let (nm, x, y) = normal_form_xy(nf);
    HObject::new(n, Matrix::zeros(n, n), vec![HBlock { t, n: nm, q: x, p: y }])
}
