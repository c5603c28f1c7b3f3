//! Objects of the category 𝒮: `A(x) = A₀ + Σ_i Σ_j A⁽ⁱ⁾_j / (x − t_i)^j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{det, inverse, mat_kernel};
use crate::matrix::Matrix;
use crate::scalar::Field;
use crate::series::LaurentSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Field + Serialize", deserialize = "F: Field + Deserialize<'de>"))]
pub struct Pole<F> {
    pub position: F,
    /// `[A_1, …, A_k]`: the coefficient of `(x − t)^{-j}` is `coeffs[j-1]`.
    pub coeffs: Vec<Matrix<F>>,
}

impl<F: Field> Pole<F> {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// A point where a principal part is requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum At {
    Pole(usize),
    Infinity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionS<F> {
    dim: usize,
    constant_term: Matrix<F>,
    poles: Vec<Pole<F>>,
}

impl<F: Field> ConnectionS<F> {
    /// Validates shapes, trims trailing zero coefficients, drops empty poles
    /// and sorts poles by position.
    pub fn new(dim: usize, constant_term: Matrix<F>, poles: Vec<Pole<F>>) -> Result<Self> {
        constant_term.check_shape(dim, dim, "constant term")?;
        let mut kept = Vec::new();
        for mut p in poles {
            for c in &p.coeffs {
                c.check_shape(dim, dim, "pole coefficient")?;
            }
            while p.coeffs.last().is_some_and(|c| c.is_zero()) {
                p.coeffs.pop();
            }
            if !p.coeffs.is_empty() {
                kept.push(p);
            }
        }
        kept.sort_by(|a, b| a.position.canonical_cmp(&b.position));
        for w in kept.windows(2) {
            if w[0].position.sub_ref(&w[1].position).is_negligible() {
                return Err(Error::InvalidInput(format!(
                    "duplicate pole position {:?}",
                    w[0].position
                )));
            }
        }
        Ok(ConnectionS {
            dim,
            constant_term,
            poles: kept,
        })
    }

    pub fn constant(a0: Matrix<F>) -> Result<Self> {
        Self::new(a0.rows(), a0.clone(), Vec::new())
    }

    pub fn zero(dim: usize) -> Self {
        ConnectionS {
            dim,
            constant_term: Matrix::zeros(dim, dim),
            poles: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant_term(&self) -> &Matrix<F> {
        &self.constant_term
    }

    pub fn poles(&self) -> &[Pole<F>] {
        &self.poles
    }

    pub fn pole_index(&self, position: &F) -> Option<usize> {
        self.poles
            .iter()
            .position(|p| p.position.sub_ref(position).is_negligible())
    }

    /// Every coefficient matrix, constant term first.
    pub fn all_coefficients(&self) -> Vec<Matrix<F>> {
        let mut out = vec![self.constant_term.clone()];
        for p in &self.poles {
            out.extend(p.coeffs.iter().cloned());
        }
        out
    }

    pub fn laurent_principal(&self, at: At) -> Result<Vec<Matrix<F>>> {
        match at {
            At::Infinity => Ok(vec![self.constant_term.clone()]),
            At::Pole(i) => self
                .poles
                .get(i)
                .map(|p| p.coeffs.clone())
                .ok_or_else(|| Error::BadIndex(format!("pole {i} of {}", self.poles.len()))),
        }
    }

    /// Coefficients of `(x − center)^m` for `m = −k..=order`.
    pub fn laurent_expand(&self, center: &F, order: i64) -> LaurentSeries<F> {
        let n = self.dim;
        let (own, k) = match self.pole_index(center) {
            Some(i) => (Some(i), self.poles[i].order() as i64),
            None => (None, 0),
        };
        if order < -k {
            return LaurentSeries::zero(n, n, order + 1);
        }
        let mut coeffs: Vec<Matrix<F>> = (-k..=order).map(|_| Matrix::zeros(n, n)).collect();
        let idx = |m: i64| (m + k) as usize;
        if order >= 0 {
            coeffs[idx(0)] = self.constant_term.clone();
        }
        for (pi, p) in self.poles.iter().enumerate() {
            if Some(pi) == own {
                for (j, c) in p.coeffs.iter().enumerate() {
                    coeffs[idx(-(j as i64) - 1)] = coeffs[idx(-(j as i64) - 1)].add_mat(c);
                }
                continue;
            }
            // (u + δ)^{-j} = Σ_m (−1)^m C(j+m−1, m) δ^{−j−m} u^m,  δ = center − t
            let delta = center.sub_ref(&p.position);
            let dinv = delta.inv();
            for (jj, c) in p.coeffs.iter().enumerate() {
                let j = jj as i64 + 1;
                let mut dpow = F::one();
                for _ in 0..j {
                    dpow = dpow.mul_ref(&dinv);
                }
                let mut binom = F::one();
                for m in 0..=order.max(-1) {
                    if m > 0 {
                        // C(j+m−1, m) = C(j+m−2, m−1)·(j+m−1)/m
                        binom = binom.mul_ref(&F::from_frac(j + m - 1, m));
                        dpow = dpow.mul_ref(&dinv);
                    }
                    let mut f = binom.mul_ref(&dpow);
                    if m % 2 == 1 {
                        f = f.neg_ref();
                    }
                    coeffs[idx(m)] = coeffs[idx(m)].add_mat(&c.scale(&f));
                }
            }
        }
        LaurentSeries::new(n, n, -k, coeffs).expect("shapes checked")
    }

    /// Value of `A(x)` at a non-pole point.
    pub fn eval(&self, x: &F) -> Matrix<F> {
        let mut acc = self.constant_term.clone();
        for p in &self.poles {
            let u = x.sub_ref(&p.position).inv();
            let mut up = F::one();
            for c in &p.coeffs {
                up = up.mul_ref(&u);
                acc.axpy(&up, c);
            }
        }
        acc
    }

    pub fn direct_sum(&self, o: &Self) -> Self {
        let (n, m) = (self.dim, o.dim);
        let bd = |a: &Matrix<F>, b: &Matrix<F>| Matrix::block_diag(&[a.clone(), b.clone()]);
        let mut poles: Vec<Pole<F>> = Vec::new();
        for p in &self.poles {
            let coeffs = match o.pole_index(&p.position) {
                Some(j) => {
                    let q = &o.poles[j];
                    let k = p.order().max(q.order());
                    (0..k)
                        .map(|r| {
                            let a = p.coeffs.get(r).cloned().unwrap_or_else(|| Matrix::zeros(n, n));
                            let b = q.coeffs.get(r).cloned().unwrap_or_else(|| Matrix::zeros(m, m));
                            bd(&a, &b)
                        })
                        .collect()
                }
                None => p.coeffs.iter().map(|a| bd(a, &Matrix::zeros(m, m))).collect(),
            };
            poles.push(Pole {
                position: p.position.clone(),
                coeffs,
            });
        }
        for q in &o.poles {
            if self.pole_index(&q.position).is_none() {
                poles.push(Pole {
                    position: q.position.clone(),
                    coeffs: q.coeffs.iter().map(|b| bd(&Matrix::zeros(n, n), b)).collect(),
                });
            }
        }
        ConnectionS::new(n + m, bd(&self.constant_term, &o.constant_term), poles)
            .expect("direct sum of valid connections")
    }

    /// Adds `c/(x − t)^j`, creating the pole if needed.
    pub fn add_polar_term(&self, position: &F, j: usize, c: &Matrix<F>) -> Result<Self> {
        if j == 0 {
            return Err(Error::InvalidInput("polar order must be positive".into()));
        }
        c.check_shape(self.dim, self.dim, "polar term")?;
        let mut poles = self.poles.clone();
        let idx = match self.pole_index(position) {
            Some(i) => i,
            None => {
                poles.push(Pole {
                    position: position.clone(),
                    coeffs: Vec::new(),
                });
                poles.len() - 1
            }
        };
        let p = &mut poles[idx];
        while p.coeffs.len() < j {
            p.coeffs.push(Matrix::zeros(self.dim, self.dim));
        }
        p.coeffs[j - 1] = p.coeffs[j - 1].add_mat(c);
        ConnectionS::new(self.dim, self.constant_term.clone(), poles)
    }

    /// Conjugation `φ A φ^{-1}` by a constant invertible matrix.
    pub fn conjugate(&self, phi: &Matrix<F>) -> Result<Self> {
        let inv = inverse(phi).ok_or(Error::SingularLeadingCoefficient)?;
        let c = |a: &Matrix<F>| phi.mul_mat(a).mul_mat(&inv);
        ConnectionS::new(
            self.dim,
            c(&self.constant_term),
            self.poles
                .iter()
                .map(|p| Pole {
                    position: p.position.clone(),
                    coeffs: p.coeffs.iter().map(c).collect(),
                })
                .collect(),
        )
    }

    pub fn scale(&self, s: &F) -> Result<Self> {
        ConnectionS::new(
            self.dim,
            self.constant_term.scale(s),
            self.poles
                .iter()
                .map(|p| Pole {
                    position: p.position.clone(),
                    coeffs: p.coeffs.iter().map(|c| c.scale(s)).collect(),
                })
                .collect(),
        )
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G + Copy) -> ConnectionS<G> {
        ConnectionS {
            dim: self.dim,
            constant_term: self.constant_term.map(f),
            poles: self
                .poles
                .iter()
                .map(|p| Pole {
                    position: f(&p.position),
                    coeffs: p.coeffs.iter().map(|c| c.map(f)).collect(),
                })
                .collect(),
        }
    }

    /// Coefficientwise pairs `(A_self, A_other)` over the union of poles,
    /// zero-padded.
    fn paired_coefficients(&self, o: &Self) -> Vec<(Matrix<F>, Matrix<F>)> {
        let mut out = vec![(self.constant_term.clone(), o.constant_term.clone())];
        let zs = Matrix::zeros(self.dim, self.dim);
        let zo = Matrix::zeros(o.dim, o.dim);
        for p in &self.poles {
            let q = o.pole_index(&p.position).map(|j| &o.poles[j]);
            let k = p.order().max(q.map(|q| q.order()).unwrap_or(0));
            for r in 0..k {
                let a = p.coeffs.get(r).cloned().unwrap_or_else(|| zs.clone());
                let b = q.and_then(|q| q.coeffs.get(r).cloned()).unwrap_or_else(|| zo.clone());
                out.push((a, b));
            }
        }
        for q in &o.poles {
            if self.pole_index(&q.position).is_none() {
                for b in &q.coeffs {
                    out.push((zs.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// True iff `A' φ = φ A` for every partial-fraction coefficient.
    pub fn intertwines(&self, other: &Self, phi: &Matrix<F>) -> bool {
        if phi.shape() != (other.dim, self.dim) {
            return false;
        }
        self.paired_coefficients(other)
            .iter()
            .all(|(a, b)| b.mul_mat(phi).sub_mat(&phi.mul_mat(a)).is_zero())
    }
}

/// Result of a search for an invertible intertwiner.
#[derive(Clone, Debug, PartialEq)]
pub enum IsoOutcome<F> {
    Witness(Matrix<F>),
    /// The intertwiner space contains no invertible element (it is zero, or
    /// the dimensions differ).
    NotIsomorphic,
    /// The space is nonzero but the bounded scan found no invertible element.
    NoWitnessFound,
}

impl<F> IsoOutcome<F> {
    pub fn witness(&self) -> Option<&Matrix<F>> {
        match self {
            IsoOutcome::Witness(m) => Some(m),
            _ => None,
        }
    }
}

/// Linear system `A'_r φ − φ A_r = 0` in the row-major entries of φ (n'×n).
pub(crate) fn intertwiner_rows<F: Field>(
    pairs: &[(Matrix<F>, Matrix<F>)],
    n_src: usize,
    n_dst: usize,
) -> Matrix<F> {
    let unknowns = n_dst * n_src;
    let mut rows: Vec<Vec<F>> = Vec::new();
    for (a, b) in pairs {
        for i in 0..n_dst {
            for l in 0..n_src {
                let mut row = vec![F::zero(); unknowns];
                for r in 0..n_dst {
                    let v = &b[(i, r)];
                    if !v.is_zero() {
                        row[r * n_src + l] = row[r * n_src + l].add_ref(v);
                    }
                }
                for r in 0..n_src {
                    let v = &a[(r, l)];
                    if !v.is_zero() {
                        row[i * n_src + r] = row[i * n_src + r].sub_ref(v);
                    }
                }
                if row.iter().any(|x| !x.is_zero()) {
                    rows.push(row);
                }
            }
        }
    }
    Matrix::from_rows(rows, unknowns).expect("uniform row length")
}

/// Scan a solution space (given by a basis of flattened `rows×cols`
/// matrices) for an invertible element: basis vectors first, then seeded
/// small-integer combinations.
pub(crate) fn scan_invertible<F: Field>(
    particular: Option<&Matrix<F>>,
    basis: &[Vec<F>],
    rows: usize,
    cols: usize,
    attempts: usize,
    seed: u64,
    accept: impl Fn(&Matrix<F>) -> bool,
) -> IsoOutcome<F> {
    if rows != cols {
        return IsoOutcome::NotIsomorphic;
    }
    let base = particular.cloned().unwrap_or_else(|| Matrix::zeros(rows, cols));
    let as_mat = |v: &[F]| Matrix::from_vec(rows, cols, v.to_vec()).expect("flattened shape");
    let ok = |m: &Matrix<F>| !det(m).is_negligible() && accept(m);
    if basis.is_empty() {
        return if particular.is_some() && ok(&base) {
            IsoOutcome::Witness(base)
        } else {
            IsoOutcome::NotIsomorphic
        };
    }
    if particular.is_some() && ok(&base) {
        return IsoOutcome::Witness(base);
    }
    if particular.is_none() {
        for v in basis {
            let m = as_mat(v);
            if ok(&m) {
                return IsoOutcome::Witness(m);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..attempts {
        let mut m = base.clone();
        for v in basis {
            let c: i64 = rng.gen_range(-3..=3);
            m.axpy(&F::from_i64(c), &as_mat(v));
        }
        if ok(&m) {
            return IsoOutcome::Witness(m);
        }
    }
    IsoOutcome::NoWitnessFound
}

pub const DEFAULT_ISO_ATTEMPTS: usize = 64;

/// Search for an invertible φ with `A' φ = φ A`.
pub fn iso_search<F: Field>(a: &ConnectionS<F>, b: &ConnectionS<F>, attempts: usize, seed: u64) -> IsoOutcome<F> {
    if a.dim != b.dim {
        return IsoOutcome::NotIsomorphic;
    }
    let n = a.dim;
    if n == 0 {
        return IsoOutcome::Witness(Matrix::zeros(0, 0));
    }
    let pairs = a.paired_coefficients(b);
    let sys = intertwiner_rows(&pairs, n, n);
    let basis = if sys.rows() == 0 {
        (0..n * n)
            .map(|k| {
                let mut v = vec![F::zero(); n * n];
                v[k] = F::one();
                v
            })
            .collect()
    } else {
        mat_kernel(&sys)
    };
    scan_invertible(None, &basis, n, n, attempts, seed, |phi| a.intertwines(b, phi))
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Field + Serialize", deserialize = "F: Field + Deserialize<'de>"))]
struct ConnectionRepr<F> {
    dim: usize,
    constant_term: Matrix<F>,
    poles: Vec<Pole<F>>,
}

impl<F: Field + Serialize> Serialize for ConnectionS<F> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConnectionRepr {
            dim: self.dim,
            constant_term: self.constant_term.clone(),
            poles: self.poles.clone(),
        }
        .serialize(s)
    }
}

impl<'de, F: Field + Deserialize<'de>> Deserialize<'de> for ConnectionS<F> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ConnectionRepr::<F>::deserialize(d)?;
        ConnectionS::new(r.dim, r.constant_term, r.poles).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Qi;

    fn s(n: i64) -> Matrix<Qi> {
        Matrix::scalar(1, Qi::int(n))
    }

    fn simple(t: i64, r: Matrix<Qi>) -> ConnectionS<Qi> {
        let n = r.rows();
        ConnectionS::new(n, Matrix::zeros(n, n), vec![Pole { position: Qi::int(t), coeffs: vec![r] }]).unwrap()
    }

    #[test]
    fn principal_parts() {
        let a = simple(1, s(5));
        assert_eq!(a.laurent_principal(At::Pole(0)).unwrap(), vec![s(5)]);
        assert_eq!(a.laurent_principal(At::Infinity).unwrap(), vec![s(0)]);
        assert!(matches!(a.laurent_principal(At::Pole(3)), Err(Error::BadIndex(_))));
        let b = ConnectionS::new(1, s(0), vec![Pole { position: Qi::int(0), coeffs: vec![s(2), s(7)] }]).unwrap();
        assert_eq!(b.laurent_principal(At::Pole(0)).unwrap(), vec![s(2), s(7)]);
    }

    #[test]
    fn expansion_geometric_series() {
        let a = simple(1, s(1));
        let e = a.laurent_expand(&Qi::int(0), 2);
        assert_eq!(e.valuation(), 0);
        for m in 0..=2 {
            assert_eq!(e.coeff(m), s(-1));
        }
        let c = ConnectionS::constant(s(4)).unwrap();
        let e = c.laurent_expand(&Qi::int(3), 2);
        assert_eq!(e.coeff(0), s(4));
        assert_eq!(e.coeff(1), s(0));
        let e = simple(0, s(1)).laurent_expand(&Qi::int(0), 1);
        assert_eq!(e.valuation(), -1);
        assert_eq!(e.coeff(-1), s(1));
        assert_eq!(e.coeff(0), s(0));
    }

    #[test]
    fn expansion_of_double_pole() {
        // 1/(x−1)^2 at 0: Σ (m+1) x^m
        let a = ConnectionS::new(1, s(0), vec![Pole { position: Qi::int(1), coeffs: vec![s(0), s(1)] }]).unwrap();
        let e = a.laurent_expand(&Qi::int(0), 3);
        for m in 0..=3 {
            assert_eq!(e.coeff(m), s(m + 1));
        }
    }

    #[test]
    fn canonicalization() {
        let a = ConnectionS::new(
            1,
            s(0),
            vec![
                Pole { position: Qi::int(3), coeffs: vec![s(1), s(0)] },
                Pole { position: Qi::int(-1), coeffs: vec![s(2)] },
                Pole { position: Qi::int(5), coeffs: vec![s(0)] },
            ],
        )
        .unwrap();
        assert_eq!(a.poles().len(), 2);
        assert_eq!(a.poles()[0].position, Qi::int(-1));
        assert_eq!(a.poles()[1].order(), 1);
        let dup = ConnectionS::new(1, s(0), vec![Pole { position: Qi::int(1), coeffs: vec![s(1)] }, Pole { position: Qi::int(1), coeffs: vec![s(1)] }]);
        assert!(dup.is_err());
        let text = serde_json::to_string(&a).unwrap();
        let back: ConnectionS<Qi> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn direct_sums() {
        let a = simple(1, s(2));
        assert_eq!(a.direct_sum(&ConnectionS::zero(0)), a);
        let same = a.direct_sum(&simple(1, s(3)));
        assert_eq!(same.poles().len(), 1);
        assert_eq!(same.poles()[0].coeffs[0], Matrix::diag(&[Qi::int(2), Qi::int(3)]));
        let two = a.direct_sum(&simple(2, s(3)));
        assert_eq!(two.poles().len(), 2);
        assert_eq!(two.poles()[0].coeffs[0], Matrix::diag(&[Qi::int(2), Qi::int(0)]));
    }

    #[test]
    fn iso_search_examples() {
        let r = Matrix::from_rows(vec![vec![Qi::int(1), Qi::int(2)], vec![Qi::int(0), Qi::int(3)]], 2).unwrap();
        let a = simple(0, r).direct_sum(&ConnectionS::zero(0));
        let g = Matrix::from_rows(vec![vec![Qi::int(1), Qi::int(1)], vec![Qi::int(1), Qi::int(2)]], 2).unwrap();
        let b = a.conjugate(&g).unwrap();
        let phi = iso_search(&a, &b, DEFAULT_ISO_ATTEMPTS, 1).witness().cloned().unwrap();
        assert!(a.intertwines(&b, &phi));
        assert_eq!(iso_search(&simple(0, s(1)), &simple(0, s(2)), 8, 0), IsoOutcome::NotIsomorphic);
        assert!(iso_search(&a, &a, 8, 0).witness().is_some());
    }

    #[test]
    fn eval_matches_definition() {
        let a = ConnectionS::new(1, s(1), vec![Pole { position: Qi::int(2), coeffs: vec![s(3), s(4)] }]).unwrap();
        // 1 + 3/(x−2) + 4/(x−2)^2 at x = 4: 1 + 3/2 + 1
        assert_eq!(a.eval(&Qi::int(4)), Matrix::scalar(1, Qi::frac(7, 2)));
    }
}
