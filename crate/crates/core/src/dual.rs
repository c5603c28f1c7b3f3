//! Harnad duality, `add_α` and the additive middle convolution.

use crate::connection::ConnectionS;
use crate::error::{Error, Result};
use crate::hobject::{phi, sigma, sigma_inv};
use crate::kappa::kappa;
use crate::linalg::{charpoly, rref};
use crate::matrix::Matrix;
use crate::poly::integer_roots;
use crate::scalar::Field;

/// `Φ ∘ σ ∘ κ`; the result is `−(T + P(y−S)^{-1}Q) dy`.
pub fn hd<F: Field>(a: &ConnectionS<F>) -> Result<ConnectionS<F>> {
    phi(&sigma(&kappa(a)?)?)
}

/// `Φ ∘ σ^{-1} ∘ κ`; the result is `(T − P(y+S)^{-1}Q) dy`.
pub fn ihd<F: Field>(a: &ConnectionS<F>) -> Result<ConnectionS<F>> {
    phi(&sigma_inv(&kappa(a)?)?)
}

/// Adds `α·1/y` at the origin.
pub fn add_alpha<F: Field>(a: &ConnectionS<F>, alpha: &F) -> Result<ConnectionS<F>> {
    if a.dim() == 0 || alpha.is_zero() {
        return Ok(a.clone());
    }
    a.add_polar_term(&F::zero(), 1, &Matrix::scalar(a.dim(), alpha.clone()))
}

/// Output of [`mc_alpha`].
#[derive(Clone, Debug, PartialEq)]
pub struct McResult<F> {
    pub connection: ConnectionS<F>,
    /// Sufficient admissibility condition on the exponents, when it can be
    /// read off (all finite poles simple and no irregular part at ∞).
    pub admissible: Option<bool>,
}

/// `ihd ∘ add_{−α} ∘ hd`.
pub fn mc_alpha<F: Field>(a: &ConnectionS<F>, alpha: &F) -> Result<McResult<F>> {
    if a.dim() == 0 {
        return Err(Error::ZeroDimension);
    }
    if a.dim() == 1 && a.poles().is_empty() {
        return Err(Error::NotDefined("middle convolution of a scalar c·dx".into()));
    }
    let b = add_alpha(&hd(a)?, &alpha.neg_ref())?;
    Ok(McResult { connection: ihd(&b)?, admissible: admissibility_hint(a, alpha)? })
}

/// `λ + α ∉ ℤ` for every residue eigenvalue and no integral eigenvalue of
/// the residue at ∞. `None` when some pole is not simple.
pub fn admissibility_hint<F: Field>(a: &ConnectionS<F>, alpha: &F) -> Result<Option<bool>> {
    if !a.constant_term().is_exactly_zero() || a.poles().iter().any(|p| p.order() != 1) {
        return Ok(None);
    }
    let n = a.dim();
    let shift = Matrix::scalar(n, alpha.clone());
    let mut sum = Matrix::zeros(n, n);
    for p in a.poles() {
        let r = &p.coeffs[0];
        sum = sum.add_mat(r);
        if !integer_roots(&charpoly(&r.add_mat(&shift)))?.is_empty() {
            return Ok(Some(false));
        }
    }
    Ok(Some(integer_roots(&charpoly(&sum))?.is_empty()))
}

/// `(Q^α, P^α)` with `Q^α` surjective, `P^α` injective and
/// `P^α Q^α = m + α`.
pub fn rank_factorize<F: Field>(m: &Matrix<F>, alpha: &F) -> Result<(Matrix<F>, Matrix<F>)> {
    m.check_square("rank_factorize input")?;
    let n = m.rows();
    let shifted = m.add_mat(&Matrix::scalar(n, alpha.clone()));
    let e = rref(&shifted);
    let r = e.pivots.len();
    let q = e.reduced.submatrix(0, 0, r, n);
    let cols: Vec<Vec<F>> = e.pivots.iter().map(|&c| shifted.column(c)).collect();
    let p = if r == 0 { Matrix::zeros(n, 0) } else { Matrix::from_columns(n, &cols) };
    Ok((q, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{iso_search, Pole, DEFAULT_ISO_ATTEMPTS};
    use crate::criteria::is_irreducible_s;
    use crate::Qi;

    fn simple(dim: usize, poles: Vec<(Qi, Matrix<Qi>)>) -> ConnectionS<Qi> {
        let poles = poles.into_iter().map(|(t, r)| Pole { position: t, coeffs: vec![r] }).collect();
        ConnectionS::new(dim, Matrix::zeros(dim, dim), poles).unwrap()
    }

    fn q(rows: &[&[i64]]) -> Matrix<Qi> {
        let c = rows[0].len();
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| Qi::int(x)).collect()).collect(), c).unwrap()
    }

    #[test]
    fn dual_of_scalar_log_pole() {
        let a0 = Qi::frac(2, 3);
        let a = simple(1, vec![(Qi::int(0), Matrix::scalar(1, a0.clone()))]);
        let d = hd(&a).unwrap();
        assert_eq!(d, simple(1, vec![(Qi::int(0), Matrix::scalar(1, a0.neg_ref()))]));
        assert_eq!(ihd(&d).unwrap(), a);
    }

    #[test]
    fn dual_of_fuchsian_has_constant_term() {
        let a = simple(
            2,
            vec![(Qi::int(1), q(&[&[1, 1], &[0, 0]])), (Qi::int(-1), q(&[&[0, 0], &[1, 2]]))],
        );
        let d = hd(&a).unwrap();
        assert!(!d.constant_term().is_exactly_zero());
        assert_eq!(d.poles().len(), 1);
        assert_eq!(d.poles()[0].position, Qi::int(0));
    }

    #[test]
    fn add_alpha_cases() {
        let a = simple(2, vec![(Qi::int(0), q(&[&[1, 0], &[0, 2]]))]);
        assert_eq!(add_alpha(&a, &Qi::int(0)).unwrap(), a);
        let b = add_alpha(&a, &Qi::int(3)).unwrap();
        assert_eq!(b.poles()[0].coeffs[0], q(&[&[4, 0], &[0, 5]]));
        let c = add_alpha(&ConnectionS::zero(2), &Qi::int(3)).unwrap();
        assert_eq!(c.poles()[0].coeffs[0], Matrix::scalar(2, Qi::int(3)));
    }

    #[test]
    fn mc_dimension_rank_one() {
        let a = simple(
            1,
            vec![
                (Qi::int(0), Matrix::scalar(1, Qi::frac(1, 3))),
                (Qi::int(1), Matrix::scalar(1, Qi::frac(1, 5))),
                (Qi::int(2), Matrix::scalar(1, Qi::frac(1, 7))),
            ],
        );
        let out = mc_alpha(&a, &Qi::frac(1, 2)).unwrap();
        assert_eq!(out.connection.dim(), 3);
        assert_eq!(out.admissible, Some(true));
        let bad = mc_alpha(&a, &Qi::frac(2, 3)).unwrap();
        assert_eq!(bad.admissible, Some(false));
    }

    #[test]
    fn mc_zero_is_identity_up_to_iso() {
        let a = simple(
            2,
            vec![(Qi::int(0), q(&[&[0, 1], &[0, 0]])), (Qi::int(1), q(&[&[0, 0], &[1, 0]])), (Qi::int(3), q(&[&[1, 0], &[0, 2]]))],
        );
        assert!(is_irreducible_s(&a));
        let out = mc_alpha(&a, &Qi::int(0)).unwrap().connection;
        let w = iso_search(&a, &out, DEFAULT_ISO_ATTEMPTS, 1);
        assert!(w.witness().is_some());
    }

    #[test]
    fn mc_scalar_constant_is_excluded() {
        let a = ConnectionS::constant(Matrix::scalar(1, Qi::int(5))).unwrap();
        assert_eq!(mc_alpha(&a, &Qi::frac(1, 2)).unwrap_err().name(), "NotDefined");
    }

    #[test]
    fn rank_factorize_cases() {
        let m = q(&[&[1, 0], &[0, 0]]);
        let (qa, pa) = rank_factorize(&m, &Qi::int(0)).unwrap();
        assert_eq!((qa.rows(), pa.cols()), (1, 1));
        assert_eq!(pa.mul_mat(&qa), m);
        let (qa, pa) = rank_factorize(&m, &Qi::int(2)).unwrap();
        assert_eq!(qa.rows(), 2);
        assert_eq!(pa.mul_mat(&qa), q(&[&[3, 0], &[0, 2]]));
        let (qa, pa) = rank_factorize(&Matrix::scalar(2, Qi::int(-1)), &Qi::int(1)).unwrap();
        assert_eq!((qa.rows(), pa.cols()), (0, 0));
    }
}
