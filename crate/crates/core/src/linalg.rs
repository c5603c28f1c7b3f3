//! Row reduction and the subspace kernels built on it.

use crate::error::{dim_err, Error, Result};
use crate::matrix::Matrix;
use crate::poly::Polynomial;
use crate::scalar::Field;

/// Reduced row echelon form together with its pivot columns.
#[derive(Clone, Debug)]
pub struct Echelon<F> {
    pub reduced: Matrix<F>,
    pub pivots: Vec<usize>,
}

fn float_tol<F: Field>(m: &Matrix<F>) -> f64 {
    1e-9 * m.max_abs().max(1.0)
}

fn usable<F: Field>(x: &F, tol: f64) -> bool {
    if F::EXACT {
        !x.is_zero()
    } else {
        x.magnitude() > tol
    }
}

/// Exact: first nonzero pivot in each column. Float: largest modulus.
pub fn rref<F: Field>(m: &Matrix<F>) -> Echelon<F> {
    let (nr, nc) = m.shape();
    let tol = if F::EXACT { 0.0 } else { float_tol(m) };
    let mut rows = m.to_rows();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..nc {
        if r == nr {
            break;
        }
        let p = if F::EXACT {
            (r..nr).find(|&i| !rows[i][c].is_zero())
        } else {
            (r..nr)
                .filter(|&i| usable(&rows[i][c], tol))
                .max_by(|&a, &b| rows[a][c].magnitude().total_cmp(&rows[b][c].magnitude()))
        };
        let Some(p) = p else { continue };
        rows.swap(r, p);
        let inv = rows[r][c].inv();
        for x in rows[r].iter_mut().skip(c) {
            if !x.is_zero() {
                *x = x.mul_ref(&inv);
            }
        }
        rows[r][c] = F::one();
        let nz: Vec<usize> = (c + 1..nc).filter(|&j| !rows[r][j].is_zero()).collect();
        let prow = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &j in &nz {
                row[j] = row[j].sub_ref(&f.mul_ref(&prow[j]));
            }
            row[c] = F::zero();
        }
        pivots.push(c);
        r += 1;
    }
    if !F::EXACT {
        for row in rows.iter_mut().skip(r) {
            for x in row.iter_mut() {
                *x = F::zero();
            }
        }
    }
    Echelon {
        reduced: Matrix::from_rows(rows, nc).expect("rref keeps shape"),
        pivots,
    }
}

pub fn rank<F: Field>(m: &Matrix<F>) -> usize {
    rref(m).pivots.len()
}

/// Exact basis of the right kernel, one vector per free column.
pub fn mat_kernel<F: Field>(m: &Matrix<F>) -> Vec<Vec<F>> {
    let e = rref(m);
    kernel_from_echelon(&e, m.cols())
}

fn kernel_from_echelon<F: Field>(e: &Echelon<F>, nc: usize) -> Vec<Vec<F>> {
    let mut is_pivot = vec![false; nc];
    for &p in &e.pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for f in (0..nc).filter(|&c| !is_pivot[c]) {
        let mut v = vec![F::zero(); nc];
        v[f] = F::one();
        for (r, &p) in e.pivots.iter().enumerate() {
            v[p] = e.reduced[(r, f)].neg_ref();
        }
        basis.push(v);
    }
    basis
}

/// Solve `a·x = b`; free variables are set to zero.
pub fn mat_solve<F: Field>(a: &Matrix<F>, b: &Matrix<F>) -> Result<Matrix<F>> {
    if a.rows() != b.rows() {
        return Err(dim_err(format!(
            "solve: a has {} rows, b has {}",
            a.rows(),
            b.rows()
        )));
    }
    let n = a.cols();
    let aug = Matrix::hstack(&[a, b])?;
    let e = rref(&aug);
    if e.pivots.iter().any(|&p| p >= n) {
        return Err(Error::NoSolution);
    }
    let mut x = Matrix::zeros(n, b.cols());
    for (r, &p) in e.pivots.iter().enumerate() {
        for j in 0..b.cols() {
            x[(p, j)] = e.reduced[(r, n + j)].clone();
        }
    }
    Ok(x)
}

pub fn inverse<F: Field>(m: &Matrix<F>) -> Option<Matrix<F>> {
    if !m.is_square() {
        return None;
    }
    let n = m.rows();
    if n == 0 {
        return Some(Matrix::zeros(0, 0));
    }
    let aug = Matrix::hstack(&[m, &Matrix::identity(n)]).ok()?;
    let e = rref(&aug);
    if e.pivots.len() < n || e.pivots[n - 1] >= n {
        return None;
    }
    Some(e.reduced.submatrix(0, n, n, n))
}

pub fn det<F: Field>(m: &Matrix<F>) -> F {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.rows();
    let tol = if F::EXACT { 0.0 } else { float_tol(m) };
    let mut a = m.to_rows();
    let mut acc = F::one();
    for c in 0..n {
        let p = if F::EXACT {
            (c..n).find(|&i| !a[i][c].is_zero())
        } else {
            (c..n)
                .filter(|&i| usable(&a[i][c], tol))
                .max_by(|&x, &y| a[x][c].magnitude().total_cmp(&a[y][c].magnitude()))
        };
        let Some(p) = p else { return F::zero() };
        if p != c {
            a.swap(p, c);
            acc = acc.neg_ref();
        }
        let piv = a[c][c].clone();
        acc = acc.mul_ref(&piv);
        let inv = piv.inv();
        let prow = a[c].clone();
        for row in a.iter_mut().skip(c + 1) {
            if row[c].is_zero() {
                continue;
            }
            let f = row[c].mul_ref(&inv);
            for j in c..n {
                if !prow[j].is_zero() {
                    row[j] = row[j].sub_ref(&f.mul_ref(&prow[j]));
                }
            }
        }
    }
    acc
}

/// `det(x·1 − m)` by Faddeev–LeVerrier.
pub fn charpoly<F: Field>(m: &Matrix<F>) -> Polynomial<F> {
    assert!(m.is_square(), "characteristic polynomial of a non-square matrix");
    let n = m.rows();
    let mut c = vec![F::zero(); n + 1];
    c[n] = F::one();
    let mut mk = Matrix::zeros(n, n);
    for k in 1..=n {
        let mut next = m.mul_mat(&mk);
        for i in 0..n {
            next[(i, i)] = next[(i, i)].add_ref(&c[n - k + 1]);
        }
        mk = next;
        let tr = m.mul_mat(&mk).trace();
        c[n - k] = tr.neg_ref().div_ref(&F::from_i64(k as i64));
    }
    Polynomial::new(c)
}

/// Incrementally maintained echelon basis of a subspace of `F^dim`.
#[derive(Clone, Debug)]
pub struct SpanBuilder<F> {
    dim: usize,
    basis: Vec<(usize, Vec<F>)>,
}

impl<F: Field> SpanBuilder<F> {
    pub fn new(dim: usize) -> Self {
        SpanBuilder {
            dim,
            basis: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.dim
    }

    fn reduce(&self, v: &mut [F]) {
        for (p, b) in &self.basis {
            if v[*p].is_zero() {
                continue;
            }
            let f = v[*p].clone();
            for (x, y) in v.iter_mut().zip(b) {
                if !y.is_zero() {
                    *x = x.sub_ref(&f.mul_ref(y));
                }
            }
            v[*p] = F::zero();
        }
    }

    fn residue(&self, v: &[F]) -> Option<(usize, Vec<F>)> {
        assert_eq!(v.len(), self.dim, "span vector has wrong length");
        let scale = v.iter().map(|x| x.magnitude()).fold(0.0, f64::max).max(1.0);
        let mut w = v.to_vec();
        self.reduce(&mut w);
        let pivot = if F::EXACT {
            w.iter().position(|x| !x.is_zero())
        } else {
            let (k, mag) = w
                .iter()
                .enumerate()
                .map(|(k, x)| (k, x.magnitude()))
                .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            (mag > 1e-9 * scale).then_some(k)
        };
        pivot.map(|p| (p, w))
    }

    pub fn contains(&self, v: &[F]) -> bool {
        self.residue(v).is_none()
    }

    /// Adds `v`; returns false if it was already in the span.
    pub fn insert(&mut self, v: &[F]) -> bool {
        match self.residue(v) {
            None => false,
            Some((p, mut w)) => {
                let inv = w[p].inv();
                for x in w.iter_mut() {
                    if !x.is_zero() {
                        *x = x.mul_ref(&inv);
                    }
                }
                w[p] = F::one();
                self.basis.push((p, w));
                true
            }
        }
    }

    pub fn vectors(&self) -> Vec<Vec<F>> {
        self.basis.iter().map(|(_, v)| v.clone()).collect()
    }
}

/// Dimension of the unital algebra generated by `generators` inside `n×n`
/// matrices.
pub fn algebra_closure<F: Field>(generators: &[Matrix<F>], n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    for g in generators {
        assert_eq!(g.shape(), (n, n), "algebra generator has wrong shape");
    }
    let full = n * n;
    // a full span mod p lifts to a full span over ℚ(i)
    if F::EXACT && modp::closure_is_full(generators, n) {
        return full;
    }
    exact_closure(generators, n)
}

fn exact_closure<F: Field>(generators: &[Matrix<F>], n: usize) -> usize {
    let full = n * n;
    let mut span = SpanBuilder::new(full);
    let id = Matrix::identity(n);
    span.insert(id.data());
    let mut elems = vec![id];
    let mut idx = 0;
    while idx < elems.len() {
        let e = elems[idx].clone();
        idx += 1;
        for g in generators {
            let p = g.mul_mat(&e);
            if span.insert(p.data()) {
                if span.len() == full {
                    return full;
                }
                elems.push(p);
            }
        }
    }
    span.len()
}

/// Burnside closure over `𝔽_p`, `p ≡ 1 mod 4`, with `i ↦ √−1`.
mod modp {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;

    use super::Field;
    use crate::matrix::Matrix;

    const P: u64 = 998_244_353;

    fn mul(a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % P as u128) as u64
    }

    fn pow(mut a: u64, mut e: u64) -> u64 {
        let mut r = 1;
        while e > 0 {
            if e & 1 == 1 {
                r = mul(r, a);
            }
            a = mul(a, a);
            e >>= 1;
        }
        r
    }

    fn int(z: &BigInt) -> u64 {
        let m = z % BigInt::from(P);
        let v = m.to_i64().expect("residue fits");
        v.rem_euclid(P as i64) as u64
    }

    fn rational(q: &num_rational::BigRational) -> Option<u64> {
        let d = int(q.denom());
        (d != 0).then(|| mul(int(q.numer()), pow(d, P - 2)))
    }

    fn reduce<F: Field>(m: &Matrix<F>, sqrt_m1: u64) -> Option<Vec<u64>> {
        m.data()
            .iter()
            .map(|x| {
                let q = x.to_qi()?;
                let (re, im) = (rational(q.re())?, rational(q.im())?);
                Some((re + mul(im, sqrt_m1)) % P)
            })
            .collect()
    }

    /// Row-echelon span with pivot-normalized rows.
    struct Span {
        rows: Vec<(usize, Vec<u64>)>,
    }

    impl Span {
        fn insert(&mut self, v: &[u64]) -> bool {
            let mut w = v.to_vec();
            for (p, r) in &self.rows {
                let f = w[*p];
                if f != 0 {
                    for (x, y) in w.iter_mut().zip(r) {
                        *x = (*x + P - mul(f, *y)) % P;
                    }
                }
            }
            let Some(p) = w.iter().position(|&x| x != 0) else { return false };
            let inv = pow(w[p], P - 2);
            for x in w.iter_mut() {
                *x = mul(*x, inv);
            }
            self.rows.push((p, w));
            true
        }
    }

    fn matmul(a: &[u64], b: &[u64], n: usize) -> Vec<u64> {
        let mut c = vec![0; n * n];
        for i in 0..n {
            for k in 0..n {
                let x = a[i * n + k];
                if x == 0 {
                    continue;
                }
                for j in 0..n {
                    c[i * n + j] = (c[i * n + j] + mul(x, b[k * n + j])) % P;
                }
            }
        }
        c
    }

    pub fn closure_is_full<F: Field>(generators: &[Matrix<F>], n: usize) -> bool {
        // 3 generates 𝔽_p^×
        let sqrt_m1 = pow(3, (P - 1) / 4);
        let Some(gens) = generators.iter().map(|g| reduce(g, sqrt_m1)).collect::<Option<Vec<_>>>() else { return false };
        let full = n * n;
        let mut span = Span { rows: Vec::new() };
        let id: Vec<u64> = (0..full).map(|k| u64::from(k / n == k % n)).collect();
        span.insert(&id);
        let mut elems = vec![id];
        let mut idx = 0;
        while idx < elems.len() && span.rows.len() < full {
            let e = elems[idx].clone();
            idx += 1;
            for g in &gens {
                let p = matmul(g, &e, n);
                if span.insert(&p) {
                    elems.push(p);
                }
            }
        }
        span.rows.len() == full
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn square_root_of_minus_one() {
            let s = pow(3, (P - 1) / 4);
            assert_eq!(mul(s, s), P - 1);
        }
    }
}

/// Basis of the smallest `t`-invariant subspace containing the seed vectors.
pub fn invariant_closure<F: Field>(t: &Matrix<F>, seed: &[Vec<F>]) -> Vec<Vec<F>> {
    assert!(t.is_square(), "invariant_closure needs a square matrix");
    let n = t.rows();
    let mut span = SpanBuilder::new(n);
    let mut queue: Vec<Vec<F>> = Vec::new();
    for v in seed {
        if span.insert(v) {
            queue.push(v.clone());
        }
    }
    let mut idx = 0;
    while idx < queue.len() && !span.is_full() {
        let w = t.apply(&queue[idx]);
        idx += 1;
        if span.insert(&w) {
            queue.push(w);
        }
    }
    span.vectors()
}

/// Block shift of length `l` with `d×d` identity blocks on the block
/// superdiagonal (multiplication by `z` in the basis `z^{l-1}, …, 1`).
pub fn block_shift<F: Field>(d: usize, l: usize) -> Matrix<F> {
    let mut n = Matrix::zeros(d * l, d * l);
    for p in 0..l.saturating_sub(1) {
        for i in 0..d {
            n[(p * d + i, (p + 1) * d + i)] = F::one();
        }
    }
    n
}

/// True iff `Σ_{j=1..l} N^{l−j} X N^{j−1} = 0` for the block shift `N`.
pub fn in_range_ad_shift<F: Field>(x: &Matrix<F>, d: usize, l: usize) -> Result<bool> {
    x.check_shape(d * l, d * l, "in_range_ad_shift input")?;
    let n = block_shift::<F>(d, l);
    let pows: Vec<Matrix<F>> = (0..l).map(|j| n.pow(j)).collect();
    let mut acc = Matrix::zeros(d * l, d * l);
    for j in 1..=l {
        acc = acc.add_mat(&pows[l - j].mul_mat(x).mul_mat(&pows[j - 1]));
    }
    Ok(acc.is_zero())
}

/// Least-squares solution of `m·x = r` of minimal Hermitian norm.
///
/// Returns `(x, r − m·x)`; the residual is Hermitian-orthogonal to the range
/// of `m` and `x` is orthogonal to its kernel.
pub fn min_norm_solve<F: Field>(m: &Matrix<F>, r: &Matrix<F>) -> Result<(Matrix<F>, Matrix<F>)> {
    if m.rows() != r.rows() {
        return Err(dim_err("min_norm_solve shape mismatch"));
    }
    let mh = m.conj_transpose();
    let normal = mh.mul_mat(m);
    let ker = mat_kernel(m);
    let kh = Matrix::from_columns(m.cols(), &ker).conj_transpose();
    let lhs = Matrix::vstack(&[&normal, &kh])?;
    let rhs = Matrix::vstack(&[&mh.mul_mat(r), &Matrix::zeros(ker.len(), r.cols())])?;
    let x = mat_solve(&lhs, &rhs)?;
    let res = r.sub_mat(&m.mul_mat(&x));
    Ok((x, res))
}

/// Columns of `m` at its pivot positions: a basis of the column space.
pub fn column_space<F: Field>(m: &Matrix<F>) -> Vec<Vec<F>> {
    rref(m).pivots.iter().map(|&c| m.column(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Qi;
    use num_traits::Zero;
    use proptest::prelude::*;

    fn m(rows: &[&[i64]]) -> Matrix<Qi> {
        let c = rows.first().map(|r| r.len()).unwrap_or(0);
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| Qi::int(x)).collect()).collect(), c).unwrap()
    }

    fn mat_strategy(max: usize) -> impl Strategy<Value = Matrix<Qi>> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            proptest::collection::vec(prop_oneof![3 => Just(0i64), 2 => -3i64..4], r * c)
                .prop_map(move |v| Matrix::from_vec(r, c, v.into_iter().map(Qi::int).collect()).unwrap())
        })
    }

    #[test]
    fn kernel_examples() {
        let k = mat_kernel(&Matrix::<Qi>::zeros(2, 2));
        assert_eq!(k, vec![vec![Qi::int(1), Qi::int(0)], vec![Qi::int(0), Qi::int(1)]]);
        assert!(mat_kernel(&Matrix::<Qi>::identity(3)).is_empty());
        assert_eq!(mat_kernel(&m(&[&[1, 0], &[0, 0]])), vec![vec![Qi::int(0), Qi::int(1)]]);
    }

    #[test]
    fn solve_examples() {
        let b = m(&[&[3, 1], &[-2, 5]]);
        assert_eq!(mat_solve(&Matrix::identity(2), &b).unwrap(), b);
        assert_eq!(
            mat_solve(&m(&[&[1, 0], &[0, 0]]), &m(&[&[0], &[1]])),
            Err(Error::NoSolution)
        );
        assert_eq!(mat_solve(&m(&[&[1, 1]]), &m(&[&[2]])).unwrap(), m(&[&[2], &[0]]));
    }

    #[test]
    fn inverse_det_charpoly() {
        let a = m(&[&[2, 1], &[1, 1]]);
        assert_eq!(inverse(&a).unwrap(), m(&[&[1, -1], &[-1, 2]]));
        assert!(inverse(&m(&[&[1, 2], &[2, 4]])).is_none());
        assert_eq!(det(&a), Qi::int(1));
        let cp = charpoly(&a);
        assert_eq!(cp.coeffs(), &[Qi::int(1), Qi::int(-3), Qi::int(1)]);
    }

    #[test]
    fn algebra_closure_examples() {
        assert_eq!(algebra_closure::<Qi>(&[], 2), 1);
        assert_eq!(inverse(&Matrix::<Qi>::zeros(0, 0)), Some(Matrix::zeros(0, 0)));
        assert_eq!(algebra_closure(&[Matrix::diag(&[Qi::int(1), Qi::int(2)])], 2), 2);
        assert_eq!(algebra_closure(&[m(&[&[0, 1], &[0, 0]]), m(&[&[0, 0], &[1, 0]])], 2), 4);
    }

    #[test]
    fn invariant_closure_examples() {
        let e1 = vec![Qi::int(1), Qi::int(0)];
        let e2 = vec![Qi::int(0), Qi::int(1)];
        assert_eq!(invariant_closure(&Matrix::<Qi>::zeros(2, 2), &[e1.clone()]).len(), 1);
        let shift = m(&[&[0, 1], &[0, 0]]);
        assert_eq!(invariant_closure(&shift, &[e2]).len(), 2);
        assert!(invariant_closure(&shift, &[]).is_empty());
    }

    #[test]
    fn in_range_examples() {
        let n = block_shift::<Qi>(1, 2);
        let y = m(&[&[1, 2], &[3, 4]]);
        assert!(in_range_ad_shift(&n.commutator(&y), 1, 2).unwrap());
        assert!(!in_range_ad_shift(&Matrix::<Qi>::identity(2), 1, 2).unwrap());
        assert!(in_range_ad_shift(&Matrix::<Qi>::zeros(3, 3), 3, 1).unwrap());
        assert!(!in_range_ad_shift(&Matrix::<Qi>::identity(3), 3, 1).unwrap());
        assert!(in_range_ad_shift(&Matrix::<Qi>::identity(3), 1, 2).is_err());
    }

    #[test]
    fn float_rank_tolerates_noise() {
        use num_complex::Complex64;
        let a = Matrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(4.0 + 1e-14, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(rank(&a), 1);
    }

    // brute force: solvability of [N, Y] = x as a linear system in Y
    fn square_strategy(max: usize) -> impl Strategy<Value = Matrix<Qi>> {
        (1..=max).prop_flat_map(|n| {
            proptest::collection::vec(prop_oneof![3 => Just(0i64), 2 => -3i64..4], n * n)
                .prop_map(move |v| Matrix::from_vec(n, n, v.into_iter().map(Qi::int).collect()).unwrap())
        })
    }

    fn brute_in_range(x: &Matrix<Qi>, d: usize, l: usize) -> bool {
        let n = block_shift::<Qi>(d, l);
        let s = d * l;
        let mut op = Matrix::zeros(s * s, s * s);
        for k in 0..s * s {
            let mut e = Matrix::zeros(s, s);
            e[(k / s, k % s)] = Qi::int(1);
            let img = n.commutator(&e);
            for r in 0..s * s {
                op[(r, k)] = img.data()[r].clone();
            }
        }
        mat_solve(&op, &Matrix::from_vec(s * s, 1, x.vec()).unwrap()).is_ok()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn rank_nullity(a in mat_strategy(8)) {
            prop_assert_eq!(rank(&a) + mat_kernel(&a).len(), a.cols());
            for v in mat_kernel(&a) {
                prop_assert!(a.apply(&v).iter().all(|x| x.is_zero()));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn invariant_closure_is_invariant(a in square_strategy(5), seed in proptest::collection::vec(-2i64..3, 5)) {
            let n = a.rows();
            let v: Vec<Qi> = seed.into_iter().take(n).map(Qi::int).collect();
            let basis = invariant_closure(&a, &[v.clone()]);
            let mut span = SpanBuilder::new(n);
            for b in &basis { span.insert(b); }
            prop_assert!(v.iter().all(|x| x.is_zero()) || span.contains(&v));
            for b in &basis { prop_assert!(span.contains(&a.apply(b))); }
            prop_assert_eq!(invariant_closure(&a, &basis).len(), basis.len());
        }

        #[test]
        fn modular_closure_never_overclaims(a in square_strategy(3), seed in proptest::collection::vec(-2i64..3, 9)) {
            let n = a.rows();
            let b = Matrix::from_vec(n, n, seed.into_iter().take(n * n).map(Qi::int).collect()).unwrap();
            let gens = [a, b];
            if modp::closure_is_full(&gens, n) {
                prop_assert_eq!(exact_closure(&gens, n), n * n);
            }
        }

        #[test]
        fn algebra_closure_monotone(a in square_strategy(3), seed in proptest::collection::vec(-2i64..3, 9)) {
            let n = a.rows();
            let b = Matrix::from_vec(n, n, seed.into_iter().take(n * n).map(Qi::int).collect()).unwrap();
            let one = algebra_closure(&[a.clone()], n);
            let two = algebra_closure(&[a, b], n);
            prop_assert!(one <= two && two <= n * n);
        }

        #[test]
        fn in_range_matches_brute_force(d in 1usize..4, l in 1usize..4, vals in proptest::collection::vec(prop_oneof![2 => Just(0i64), 1 => -2i64..3], 36)) {
            prop_assume!(d * l <= 6);
            let s = d * l;
            let x = Matrix::from_vec(s, s, vals.into_iter().take(s * s).map(Qi::int).collect()).unwrap();
            prop_assert_eq!(in_range_ad_shift(&x, d, l).unwrap(), brute_in_range(&x, d, l));
            let n = block_shift::<Qi>(d, l);
            let c = n.commutator(&x);
            prop_assert!(in_range_ad_shift(&c, d, l).unwrap());
        }

        #[test]
        fn min_norm_residual_is_orthogonal(a in mat_strategy(4)) {
            let r = Matrix::from_fn(a.rows(), 1, |i, _| Qi::int(i as i64 + 1));
            let (x, res) = min_norm_solve(&a, &r).unwrap();
            prop_assert_eq!(a.mul_mat(&x).add_mat(&res), r);
            prop_assert!(a.conj_transpose().mul_mat(&res).is_zero());
            for k in mat_kernel(&a) {
                let kc = Matrix::from_columns(a.cols(), &[k]);
                prop_assert!(kc.hermitian_dot(&x).is_zero());
            }
        }
    }
}
