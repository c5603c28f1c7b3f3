//! The group `G̃(T)` acting on `(Q, P)`, its moment map, and the stability check on `g_T`.

use crate::error::{dim_err, Error, Result};
use crate::hobject::{is_stable, HObject};
use crate::linalg::{mat_kernel, mat_solve};
use crate::matrix::Matrix;
use crate::scalar::Field;
use crate::series::GaugeJet;

/// One jet `g_i(x_i)` per block; coefficients past the block size act as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GTildeElement<F> {
    pub jets: Vec<GaugeJet<F>>,
}

impl<F: Field> GTildeElement<F> {
    pub fn identity(h: &HObject<F>) -> Self {
        GTildeElement { jets: h.blocks().iter().map(|_| GaugeJet::identity(h.dim_v())).collect() }
    }

    fn check(&self, h: &HObject<F>) -> Result<()> {
        if self.jets.len() != h.blocks().len() {
            return Err(dim_err(format!("{} jets for {} blocks", self.jets.len(), h.blocks().len())));
        }
        if self.jets.iter().any(|g| g.dim() != h.dim_v()) {
            return Err(dim_err("jet size differs from dim V"));
        }
        Ok(())
    }
}

/// Principal-part stacks `[M_1, …, M_{d_i}]` per block, `M_j` the coefficient
/// of `x_i^{-j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentValue<F> {
    pub stacks: Vec<Vec<Matrix<F>>>,
}

/// `Q'_i = Σ g_j Q_i N_i^j`, `P'_i = Σ N_i^j P_i ḡ_j`.
pub fn gtilde_act<F: Field>(g: &GTildeElement<F>, h: &HObject<F>) -> Result<HObject<F>> {
    g.check(h)?;
    let mut blocks = h.blocks().to_vec();
    for (b, jet) in blocks.iter_mut().zip(&g.jets) {
        let d = b.dim();
        let ginv = jet.truncated_inverse(d);
        let mut q = Matrix::zeros(b.q.rows(), d);
        let mut p = Matrix::zeros(d, b.p.cols());
        let mut npow = Matrix::identity(d);
        for j in 0..d {
            if let Some(gj) = jet.coeffs().get(j) {
                q = q.add_mat(&gj.mul_mat(&b.q).mul_mat(&npow));
            }
            p = p.add_mat(&npow.mul_mat(&b.p).mul_mat(&ginv[j]));
            npow = npow.mul_mat(&b.n);
        }
        b.q = q;
        b.p = p;
    }
    HObject::new(h.dim_v(), h.s().clone(), blocks)
}

/// `Q(x−T)^{-1}P` split into principal parts at each `t_i`.
pub fn moment_map<F: Field>(h: &HObject<F>) -> MomentValue<F> {
    let stacks = h
        .blocks()
        .iter()
        .map(|b| {
            let mut out = Vec::with_capacity(b.dim());
            let mut qn = b.q.clone();
            for _ in 0..b.dim() {
                out.push(qn.mul_mat(&b.p));
                qn = qn.mul_mat(&b.n);
            }
            out
        })
        .collect();
    MomentValue { stacks }
}

/// Principal part of `g(x)·(Σ_j M_j x^{-j})·g(x)^{-1}`, same length as `stack`.
pub fn coadjoint_stack<F: Field>(jet: &GaugeJet<F>, stack: &[Matrix<F>]) -> Vec<Matrix<F>> {
    let d = stack.len();
    let n = jet.dim();
    let ginv = jet.truncated_inverse(d);
    let mut out = vec![Matrix::zeros(n, n); d];
    for (a, ga) in jet.coeffs().iter().enumerate().take(d) {
        for (b, gb) in ginv.iter().enumerate() {
            // x^{a+b−j'} lands at x^{-j} with j = j' − a − b
            for (jp, m) in stack.iter().enumerate() {
                let jp = jp + 1;
                if jp > a + b {
                    let j = jp - a - b;
                    out[j - 1] = out[j - 1].add_mat(&ga.mul_mat(m).mul_mat(gb));
                }
            }
        }
    }
    out
}

/// An element of `g̃(T)`: per block the coefficients `X_0, …, X_{d_i−1}`.
pub type GTildeAlgebra<F> = Vec<Vec<Matrix<F>>>;

/// Infinitesimal action `δQ_i = Σ X_j Q_i N_i^j`, `δP_i = −Σ N_i^j P_i X_j`,
/// returned as full `n×w` and `w×n` matrices.
pub fn infinitesimal_action<F: Field>(h: &HObject<F>, x: &GTildeAlgebra<F>) -> Result<(Matrix<F>, Matrix<F>)> {
    if x.len() != h.blocks().len() {
        return Err(dim_err("one Lie-algebra jet per block"));
    }
    let mut dq = Vec::new();
    let mut dp = Vec::new();
    for (b, xs) in h.blocks().iter().zip(x) {
        let d = b.dim();
        let mut q = Matrix::zeros(b.q.rows(), d);
        let mut p = Matrix::zeros(d, b.p.cols());
        let mut npow = Matrix::identity(d);
        for xj in xs.iter().take(d) {
            xj.check_shape(h.dim_v(), h.dim_v(), "Lie algebra coefficient")?;
            q = q.add_mat(&xj.mul_mat(&b.q).mul_mat(&npow));
            p = p.sub_mat(&npow.mul_mat(&b.p).mul_mat(xj));
            npow = npow.mul_mat(&b.n);
        }
        dq.push(q);
        dp.push(p);
    }
    let n = h.dim_v();
    let dq = if dq.is_empty() { Matrix::zeros(n, 0) } else { Matrix::hstack(&dq.iter().collect::<Vec<_>>())? };
    let dp = if dp.is_empty() { Matrix::zeros(0, n) } else { Matrix::vstack(&dp.iter().collect::<Vec<_>>())? };
    Ok((dq, dp))
}

/// `ω(u, v) = tr(δQ_u δP_v) − tr(δQ_v δP_u)`.
pub fn symplectic_form<F: Field>(u: (&Matrix<F>, &Matrix<F>), v: (&Matrix<F>, &Matrix<F>)) -> F {
    u.0.mul_mat(v.1).trace().sub_ref(&v.0.mul_mat(u.1).trace())
}

/// Both sides of `ω(ρ(X), δ) = ⟨dΦ_T(δ), X⟩`.
pub fn moment_map_sides<F: Field>(
    h: &HObject<F>,
    x: &GTildeAlgebra<F>,
    dq: &Matrix<F>,
    dp: &Matrix<F>,
) -> Result<(F, F)> {
    dq.check_shape(h.dim_v(), h.dim_w(), "δQ")?;
    dp.check_shape(h.dim_w(), h.dim_v(), "δP")?;
    let (rq, rp) = infinitesimal_action(h, x)?;
    let lhs = symplectic_form((&rq, &rp), (dq, dp));
    let mut rhs = F::zero();
    for ((b, off), xs) in h.blocks().iter().zip(h.offsets()).zip(x) {
        let d = b.dim();
        let dqi = dq.submatrix(0, off, h.dim_v(), d);
        let dpi = dp.submatrix(off, 0, d, h.dim_v());
        let mut npow = Matrix::identity(d);
        for xj in xs.iter().take(d) {
            let dm = dqi.mul_mat(&npow).mul_mat(&b.p).add_mat(&b.q.mul_mat(&npow).mul_mat(&dpi));
            rhs = rhs.add_ref(&xj.mul_mat(&dm).trace());
            npow = npow.mul_mat(&b.n);
        }
    }
    Ok((lhs, rhs))
}

pub fn moment_map_check<F: Field>(h: &HObject<F>, x: &GTildeAlgebra<F>, dq: &Matrix<F>, dp: &Matrix<F>) -> Result<bool> {
    let (l, r) = moment_map_sides(h, x, dq, dp)?;
    Ok(l.sub_ref(&r).is_negligible())
}

/// Linear constraints `[C, T] = 0` on `vec(C)`.
fn centralizer_rows<F: Field>(t: &Matrix<F>) -> Matrix<F> {
    let w = t.rows();
    let id = Matrix::identity(w);
    id.kron(&t.transpose()).sub_mat(&t.kron(&id))
}

/// Dimension of `{C ∈ g_T : Q(x−T)^{-1}CP = 0}`; zero for stable input.
pub fn lemma_stability_check<F: Field>(h: &HObject<F>) -> Result<usize> {
    if !is_stable(h) {
        return Err(Error::NotStable);
    }
    let w = h.dim_w();
    if w == 0 {
        return Ok(0);
    }
    let t = h.t_matrix();
    let (q, p) = (h.q_matrix(), h.p_matrix());
    let mut rows = vec![centralizer_rows(&t)];
    let mut qt = q.clone();
    for _ in 0..w {
        rows.push(qt.kron(&p.transpose()));
        qt = qt.mul_mat(&t);
    }
    let sys = Matrix::vstack(&rows.iter().collect::<Vec<_>>())?;
    Ok(mat_kernel(&sys).len())
}

/// The unique `C ∈ g_T` with `Q' = QC` and `P' = CP`.
pub fn stability_solve<F: Field>(h: &HObject<F>, q2: &Matrix<F>, p2: &Matrix<F>) -> Result<Matrix<F>> {
    if !is_stable(h) {
        return Err(Error::NotStable);
    }
    let (n, w) = (h.dim_v(), h.dim_w());
    q2.check_shape(n, w, "Q'")?;
    p2.check_shape(w, n, "P'")?;
    let t = h.t_matrix();
    let (q, p) = (h.q_matrix(), h.p_matrix());
    let idw = Matrix::identity(w);
    let sys = Matrix::vstack(&[&centralizer_rows(&t), &q.kron(&idw), &idw.kron(&p.transpose())])?;
    let mut rhs = vec![F::zero(); w * w];
    rhs.extend(q2.vec());
    rhs.extend(p2.vec());
    let rhs = Matrix::from_vec(rhs.len(), 1, rhs)?;
    let c = mat_solve(&sys, &rhs)?;
    let c = Matrix::from_vec(w, w, c.into_data())?;
    if !q.mul_mat(&c).sub_mat(q2).is_zero() || !c.mul_mat(&p).sub_mat(p2).is_zero() {
        return Err(Error::NoSolution);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hobject::{phi, HBlock};
    use crate::linalg::block_shift;
    use crate::Qi;

    fn q(rows: &[&[i64]]) -> Matrix<Qi> {
        let c = rows[0].len();
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| Qi::int(x)).collect()).collect(), c).unwrap()
    }

    fn sample() -> HObject<Qi> {
        HObject::new(
            2,
            Matrix::zeros(2, 2),
            vec![
                HBlock { t: Qi::int(0), n: block_shift(1, 2), q: q(&[&[1, 2], &[0, 1]]), p: q(&[&[1, 1], &[1, 0]]) },
                HBlock { t: Qi::int(3), n: Matrix::zeros(1, 1), q: q(&[&[1], &[1]]), p: q(&[&[0, 2]]) },
            ],
        )
        .unwrap()
    }

    fn jets() -> GTildeElement<Qi> {
        GTildeElement {
            jets: vec![
                GaugeJet::new(vec![q(&[&[1, 1], &[0, 1]]), q(&[&[2, 0], &[1, -1]])]).unwrap(),
                GaugeJet::new(vec![q(&[&[2, 0], &[1, 1]])]).unwrap(),
            ],
        }
    }

    #[test]
    fn identity_action() {
        let h = sample();
        assert_eq!(gtilde_act(&GTildeElement::identity(&h), &h).unwrap(), h);
    }

    #[test]
    fn action_preserves_stability_and_is_equivariant() {
        let h = sample();
        assert!(is_stable(&h));
        let g = jets();
        let h2 = gtilde_act(&g, &h).unwrap();
        assert!(is_stable(&h2));
        let m = moment_map(&h);
        let m2 = moment_map(&h2);
        for ((jet, s), s2) in g.jets.iter().zip(&m.stacks).zip(&m2.stacks) {
            assert_eq!(&coadjoint_stack(jet, s), s2);
        }
    }

    #[test]
    fn constant_jets_on_semisimple_blocks() {
        let h = sample();
        let g0 = q(&[&[2, 0], &[1, 1]]);
        let g = GTildeElement { jets: vec![GaugeJet::identity(2), GaugeJet::new(vec![g0.clone()]).unwrap()] };
        let h2 = gtilde_act(&g, &h).unwrap();
        let b = &h2.blocks()[1];
        assert_eq!(b.q, g0.mul_mat(&h.blocks()[1].q));
        assert_eq!(b.p, h.blocks()[1].p.mul_mat(&crate::linalg::inverse(&g0).unwrap()));
    }

    #[test]
    fn moment_map_matches_phi() {
        let h = sample();
        let a = phi(&h).unwrap();
        let m = moment_map(&h);
        for (pole, stack) in a.poles().iter().zip(&m.stacks) {
            assert_eq!(&pole.coeffs[..], &stack[..pole.coeffs.len()]);
        }
    }

    #[test]
    fn moment_identity_exact() {
        let h = sample();
        let x: GTildeAlgebra<Qi> = vec![vec![q(&[&[1, -1], &[2, 0]]), q(&[&[0, 3], &[1, 1]])], vec![q(&[&[5, 1], &[0, -2]])]];
        let dq = q(&[&[1, 0, 2], &[-1, 1, 1]]);
        let dp = q(&[&[0, 1], &[2, 2], &[1, -3]]);
        let (l, r) = moment_map_sides(&h, &x, &dq, &dp).unwrap();
        assert_eq!(l, r);
        let zero: GTildeAlgebra<Qi> = vec![vec![], vec![]];
        assert_eq!(moment_map_sides(&h, &zero, &dq, &dp).unwrap(), (Qi::int(0), Qi::int(0)));
    }

    #[test]
    fn stability_lemma() {
        let h = sample();
        assert_eq!(lemma_stability_check(&h).unwrap(), 0);
        // C₀ = 1 + 2N on the first block, 3 on the second
        let mut c0 = Matrix::identity(3);
        c0[(0, 1)] = Qi::int(2);
        c0[(2, 2)] = Qi::int(3);
        let c = stability_solve(&h, &h.q_matrix().mul_mat(&c0), &c0.mul_mat(&h.p_matrix())).unwrap();
        assert_eq!(c, c0);
        let bad = HObject::new(1, Matrix::zeros(1, 1), vec![HBlock { t: Qi::int(0), n: Matrix::zeros(1, 1), q: q(&[&[0]]), p: q(&[&[1]]) }]).unwrap();
        assert_eq!(lemma_stability_check(&bad), Err(Error::NotStable));
    }
}
