//! Block solver for `[ξ, T] = rhs` with `T = ⊕ (t_i + N_i)`.

use crate::error::{Error, Result};
use crate::linalg::min_norm_solve;
use crate::matrix::Matrix;
use crate::scalar::Field;

/// One Jordan-type block `t·1 + N` of `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TBlock<F> {
    pub t: F,
    pub n: Matrix<F>,
}

impl<F: Field> TBlock<F> {
    pub fn dim(&self) -> usize {
        self.n.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SylvesterSolution<F> {
    pub xi: Matrix<F>,
    /// Component of the right-hand side outside `range(ad_T)`.
    pub residual: Matrix<F>,
}

pub fn assemble_t<F: Field>(blocks: &[TBlock<F>]) -> Matrix<F> {
    let parts: Vec<Matrix<F>> = blocks
        .iter()
        .map(|b| Matrix::scalar(b.dim(), b.t.clone()).add_mat(&b.n))
        .collect();
    Matrix::block_diag(&parts)
}

fn offsets<F: Field>(blocks: &[TBlock<F>]) -> Vec<usize> {
    let mut off = Vec::with_capacity(blocks.len() + 1);
    let mut acc = 0;
    off.push(0);
    for b in blocks {
        acc += b.dim();
        off.push(acc);
    }
    off
}

/// The matrix of `ξ ↦ ξN − Nξ` on row-major vectorized `d×d` matrices.
pub fn ad_operator<F: Field>(n: &Matrix<F>) -> Matrix<F> {
    let d = n.rows();
    let mut op = Matrix::zeros(d * d, d * d);
    for k in 0..d * d {
        let mut e = Matrix::zeros(d, d);
        e[(k / d, k % d)] = F::one();
        let img = e.commutator(n);
        for (r, v) in img.data().iter().enumerate() {
            if !v.is_zero() {
                op[(r, k)] = v.clone();
            }
        }
    }
    op
}

/// Solve `[ξ, T] = rhs − residual` blockwise.
///
/// Off-diagonal blocks are always solvable (distinct eigenvalues) and use a
/// terminating Neumann series. On diagonal blocks `ξ_ii` is the solution of
/// minimal Hermitian norm, hence orthogonal to `Ker ad_{N_i}`, and the
/// residual is the Hermitian projection of the block onto the complement of
/// `range ad_{N_i}`.
pub fn sylvester_block_solve<F: Field>(
    blocks: &[TBlock<F>],
    rhs: &Matrix<F>,
) -> Result<SylvesterSolution<F>> {
    let off = offsets(blocks);
    let w = *off.last().unwrap();
    rhs.check_shape(w, w, "Sylvester right-hand side")?;
    for (i, a) in blocks.iter().enumerate() {
        a.n.check_square("nilpotent block")?;
        for b in &blocks[i + 1..] {
            if a.t.sub_ref(&b.t).is_negligible() {
                return Err(Error::InvalidInput("T blocks must have distinct eigenvalues".into()));
            }
        }
    }
    let mut xi = Matrix::zeros(w, w);
    let mut residual = Matrix::zeros(w, w);
    for (i, bi) in blocks.iter().enumerate() {
        for (j, bj) in blocks.iter().enumerate() {
            let (di, dj) = (bi.dim(), bj.dim());
            if di == 0 || dj == 0 {
                continue;
            }
            let r = rhs.submatrix(off[i], off[j], di, dj);
            if i != j {
                // (δ + D)ξ = r with D(ξ) = ξN_j − N_iξ nilpotent
                let delta_inv = bj.t.sub_ref(&bi.t).inv();
                let mut term = r.scale(&delta_inv);
                let mut acc = term.clone();
                for _ in 0..(di + dj) {
                    let d = term.mul_mat(&bj.n).sub_mat(&bi.n.mul_mat(&term));
                    if d.is_exactly_zero() {
                        break;
                    }
                    term = d.scale(&delta_inv.neg_ref());
                    acc = acc.add_mat(&term);
                }
                xi.set_block(off[i], off[j], &acc);
            } else if bi.n.is_exactly_zero() {
                residual.set_block(off[i], off[j], &r);
            } else {
                let op = ad_operator(&bi.n);
                let rv = Matrix::from_vec(di * di, 1, r.vec())?;
                let (x, res) = min_norm_solve(&op, &rv)?;
                xi.set_block(off[i], off[i], &Matrix::from_vec(di, di, x.vec())?);
                residual.set_block(off[i], off[i], &Matrix::from_vec(di, di, res.vec())?);
            }
        }
    }
    Ok(SylvesterSolution { xi, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block_shift, mat_kernel};
    use crate::Qi;
    use proptest::prelude::*;

    fn scalar_block(t: i64) -> TBlock<Qi> {
        TBlock {
            t: Qi::int(t),
            n: Matrix::zeros(1, 1),
        }
    }

    #[test]
    fn diagonal_two_by_two() {
        let blocks = [scalar_block(0), scalar_block(1)];
        let mut rhs = Matrix::zeros(2, 2);
        rhs[(0, 1)] = Qi::int(1);
        let sol = sylvester_block_solve(&blocks, &rhs).unwrap();
        // ξ_12 (t_2 − t_1) = rhs_12
        let mut expect = Matrix::zeros(2, 2);
        expect[(0, 1)] = Qi::int(1);
        assert_eq!(sol.xi, expect);
        assert!(sol.residual.is_zero());
        let t = assemble_t(&blocks);
        assert_eq!(sol.xi.commutator(&t), rhs);
    }

    #[test]
    fn kernel_rhs_goes_to_residual() {
        let blocks = [scalar_block(0), scalar_block(1)];
        let sol = sylvester_block_solve(&blocks, &Matrix::identity(2)).unwrap();
        assert!(sol.xi.is_zero());
        assert_eq!(sol.residual, Matrix::identity(2));
        let zero = [TBlock { t: Qi::int(0), n: Matrix::zeros(3, 3) }];
        let rhs = Matrix::from_fn(3, 3, |i, j| Qi::int((i * 3 + j) as i64));
        let sol = sylvester_block_solve(&zero, &rhs).unwrap();
        assert!(sol.xi.is_zero());
        assert_eq!(sol.residual, rhs);
    }

    fn blocks_strategy() -> impl Strategy<Value = (Vec<TBlock<Qi>>, Matrix<Qi>)> {
        proptest::collection::vec((1usize..3, 1usize..3), 1..3).prop_flat_map(|shapes| {
            let w: usize = shapes.iter().map(|(d, l)| d * l).sum();
            proptest::collection::vec(-3i64..4, w * w).prop_map(move |vals| {
                let blocks: Vec<TBlock<Qi>> = shapes
                    .iter()
                    .enumerate()
                    .map(|(k, &(d, l))| TBlock { t: Qi::int(2 * k as i64 - 1), n: block_shift(d, l) })
                    .collect();
                (blocks, Matrix::from_vec(w, w, vals.into_iter().map(Qi::int).collect()).unwrap())
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn decomposition_is_exact((blocks, rhs) in blocks_strategy()) {
            let sol = sylvester_block_solve(&blocks, &rhs).unwrap();
            let t = assemble_t(&blocks);
            prop_assert_eq!(sol.xi.commutator(&t).add_mat(&sol.residual), rhs.clone());
            // gauge fix: ξ is Hermitian-orthogonal to Ker ad_T
            let ker = mat_kernel(&ad_operator(&t));
            for k in ker {
                let km = Matrix::from_vec(t.rows(), t.rows(), k).unwrap();
                prop_assert!(km.hermitian_dot(&sol.xi).is_negligible());
            }
            // residual lies in Ker ad_{T*}, the Hermitian complement of range ad_T
            let th = t.conj_transpose();
            prop_assert!(sol.residual.commutator(&th).is_zero());
            // commutators are in range, so they leave no residual
            let c = rhs.commutator(&t);
            let sol2 = sylvester_block_solve(&blocks, &c).unwrap();
            prop_assert!(sol2.residual.is_zero());
        }
    }
}
