//! Objects `(V, W; S, T, Q, P)` of the category ℋ, the functor Φ and σ.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::connection::{scan_invertible, ConnectionS, IsoOutcome, Pole, DEFAULT_ISO_ATTEMPTS};
use crate::error::{Error, Result};
use crate::linalg::{algebra_closure, charpoly, inverse, invariant_closure, mat_kernel, mat_solve};
use crate::matrix::Matrix;
use crate::poly::{gaussian_rational_roots, numeric_roots, Polynomial};
use crate::scalar::Field;
use crate::sylvester::TBlock;

/// One generalized eigenspace `W_i` of `T`: `T|_{W_i} = t·1 + N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Field + Serialize", deserialize = "F: Field + Deserialize<'de>"))]
pub struct HBlock<F> {
    pub t: F,
    #[serde(rename = "N")]
    pub n: Matrix<F>,
    /// `Q_i : W_i → V`, shape `dimV × d_i`.
    #[serde(rename = "Q")]
    pub q: Matrix<F>,
    /// `P_i : V → W_i`, shape `d_i × dimV`.
    #[serde(rename = "P")]
    pub p: Matrix<F>,
}

impl<F: Field> HBlock<F> {
    pub fn dim(&self) -> usize {
        self.n.rows()
    }

    pub fn tblock(&self) -> TBlock<F> {
        TBlock {
            t: self.t.clone(),
            n: self.n.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HObject<F> {
    dim_v: usize,
    s: Matrix<F>,
    blocks: Vec<HBlock<F>>,
}

impl<F: Field> HObject<F> {
    /// Zero-dimensional blocks are dropped.
    pub fn new(dim_v: usize, s: Matrix<F>, blocks: Vec<HBlock<F>>) -> Result<Self> {
        s.check_shape(dim_v, dim_v, "S")?;
        let blocks: Vec<HBlock<F>> = blocks.into_iter().filter(|b| b.dim() > 0).collect();
        for (i, b) in blocks.iter().enumerate() {
            let d = b.dim();
            b.n.check_shape(d, d, "N")?;
            b.q.check_shape(dim_v, d, "Q block")?;
            b.p.check_shape(d, dim_v, "P block")?;
            if !b.n.pow(d).is_zero() {
                return Err(Error::InvalidInput(format!("block {i}: N is not nilpotent")));
            }
            for c in &blocks[i + 1..] {
                if b.t.sub_ref(&c.t).is_negligible() {
                    return Err(Error::InvalidInput(format!("repeated block eigenvalue {:?}", b.t)));
                }
            }
        }
        Ok(HObject { dim_v, s, blocks })
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    pub fn dim_w(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    pub fn s(&self) -> &Matrix<F> {
        &self.s
    }

    pub fn blocks(&self) -> &[HBlock<F>] {
        &self.blocks
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for b in &self.blocks {
            off.push(off.last().unwrap() + b.dim());
        }
        off
    }

    pub fn tblocks(&self) -> Vec<TBlock<F>> {
        self.blocks.iter().map(|b| b.tblock()).collect()
    }

    pub fn t_matrix(&self) -> Matrix<F> {
        crate::sylvester::assemble_t(&self.tblocks())
    }

    pub fn n_matrix(&self) -> Matrix<F> {
        Matrix::block_diag(&self.blocks.iter().map(|b| b.n.clone()).collect::<Vec<_>>())
    }

    /// `Q = (Q_1 ⋯ Q_m)`.
    pub fn q_matrix(&self) -> Matrix<F> {
        let parts: Vec<&Matrix<F>> = self.blocks.iter().map(|b| &b.q).collect();
        if parts.is_empty() {
            return Matrix::zeros(self.dim_v, 0);
        }
        Matrix::hstack(&parts).expect("Q blocks share their row count")
    }

    /// `P = (P_1; ⋯; P_m)`.
    pub fn p_matrix(&self) -> Matrix<F> {
        let parts: Vec<&Matrix<F>> = self.blocks.iter().map(|b| &b.p).collect();
        if parts.is_empty() {
            return Matrix::zeros(0, self.dim_v);
        }
        Matrix::vstack(&parts).expect("P blocks share their column count")
    }

    /// `γ = (S Q; P T)` on `V ⊕ W`.
    pub fn gamma(&self) -> Matrix<F> {
        let (n, w) = (self.dim_v, self.dim_w());
        let mut g = Matrix::zeros(n + w, n + w);
        g.set_block(0, 0, &self.s);
        g.set_block(0, n, &self.q_matrix());
        g.set_block(n, 0, &self.p_matrix());
        g.set_block(n, n, &self.t_matrix());
        g
    }

    /// Same `V`, `S` and `T` blocks, new `Q`, `P` given as full matrices.
    pub fn with_qp(&self, q: &Matrix<F>, p: &Matrix<F>) -> Result<Self> {
        let w = self.dim_w();
        q.check_shape(self.dim_v, w, "Q")?;
        p.check_shape(w, self.dim_v, "P")?;
        let off = self.offsets();
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| HBlock {
                t: b.t.clone(),
                n: b.n.clone(),
                q: q.submatrix(0, off[i], self.dim_v, b.dim()),
                p: p.submatrix(off[i], 0, b.dim(), self.dim_v),
            })
            .collect();
        HObject::new(self.dim_v, self.s.clone(), blocks)
    }

    pub fn direct_sum(&self, o: &Self) -> Result<Self> {
        let (n, m) = (self.dim_v, o.dim_v);
        let s = Matrix::block_diag(&[self.s.clone(), o.s.clone()]);
        let mut blocks = Vec::new();
        let widen = |b: &HBlock<F>, first: bool| -> HBlock<F> {
            let d = b.dim();
            let mut q = Matrix::zeros(n + m, d);
            let mut p = Matrix::zeros(d, n + m);
            let r0 = if first { 0 } else { n };
            q.set_block(r0, 0, &b.q);
            p.set_block(0, r0, &b.p);
            HBlock { t: b.t.clone(), n: b.n.clone(), q, p }
        };
        let mut used = vec![false; o.blocks.len()];
        for b in &self.blocks {
            let wb = widen(b, true);
            match o.blocks.iter().position(|c| c.t.sub_ref(&b.t).is_negligible()) {
                Some(j) => {
                    used[j] = true;
                    let wc = widen(&o.blocks[j], false);
                    blocks.push(HBlock {
                        t: b.t.clone(),
                        n: Matrix::block_diag(&[wb.n, wc.n]),
                        q: Matrix::hstack(&[&wb.q, &wc.q])?,
                        p: Matrix::vstack(&[&wb.p, &wc.p])?,
                    });
                }
                None => blocks.push(wb),
            }
        }
        for (j, c) in o.blocks.iter().enumerate() {
            if !used[j] {
                blocks.push(widen(c, false));
            }
        }
        HObject::new(n + m, s, blocks)
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G + Copy) -> HObject<G> {
        HObject {
            dim_v: self.dim_v,
            s: self.s.map(f),
            blocks: self
                .blocks
                .iter()
                .map(|b| HBlock {
                    t: f(&b.t),
                    n: b.n.map(f),
                    q: b.q.map(f),
                    p: b.p.map(f),
                })
                .collect(),
        }
    }
}

/// `Φ(V, W; γ) = (V, (S + Q(x − T)⁻¹P) dx)`.
pub fn phi<F: Field>(h: &HObject<F>) -> Result<ConnectionS<F>> {
    let poles = h
        .blocks
        .iter()
        .map(|b| {
            let mut coeffs = Vec::with_capacity(b.dim());
            let mut np = b.p.clone();
            for _ in 0..b.dim() {
                coeffs.push(b.q.mul_mat(&np));
                np = b.n.mul_mat(&np);
            }
            Pole {
                position: b.t.clone(),
                coeffs,
            }
        })
        .collect();
    ConnectionS::new(h.dim_v, h.s.clone(), poles)
}

/// Eigenvalues of `m` with their generalized eigenspaces, sorted by
/// eigenvalue. Exact input must have its spectrum in ℚ(i).
pub fn spectral_decomposition<F: Field>(m: &Matrix<F>) -> Result<Vec<(F, Vec<Vec<F>>)>> {
    m.check_square("spectral decomposition input")?;
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let cp = charpoly(m);
    let mut roots: Vec<(F, usize)> = match cp.coeffs().iter().map(|c| c.to_qi()).collect::<Option<Vec<_>>>() {
        Some(q) => gaussian_rational_roots(&Polynomial::new(q))
            .ok_or_else(|| Error::ReblockFailure("eigenvalues are not Gaussian rationals".into()))?
            .into_iter()
            .map(|(r, k)| (F::from_qi(&r), k))
            .collect(),
        None => cluster_roots(&numeric_roots(&cp.coeffs().iter().map(|c| c.to_c64()).collect::<Vec<_>>()))
            .into_iter()
            .map(|(z, k)| {
                let q = crate::scalar::Qi::new(
                    num_rational::BigRational::from_float(z.re).unwrap_or_default(),
                    num_rational::BigRational::from_float(z.im).unwrap_or_default(),
                );
                (F::from_qi(&q), k)
            })
            .collect(),
    };
    roots.sort_by(|a, b| a.0.canonical_cmp(&b.0));
    let mut out = Vec::new();
    for (r, k) in roots {
        let shifted = m.sub_mat(&Matrix::scalar(n, r.clone())).pow(k);
        let basis = mat_kernel(&shifted);
        if basis.len() != k {
            return Err(Error::ReblockFailure(format!(
                "generalized eigenspace of {r:?} has dimension {} instead of {k}",
                basis.len()
            )));
        }
        out.push((r, basis));
    }
    Ok(out)
}

const ROOT_CLUSTER_TOL: f64 = 1e-6;

fn cluster_roots(roots: &[num_complex::Complex64]) -> Vec<(num_complex::Complex64, usize)> {
    let mut groups: Vec<(num_complex::Complex64, usize)> = Vec::new();
    for &z in roots {
        match groups.iter_mut().find(|(c, _)| (*c - z).norm() < ROOT_CLUSTER_TOL) {
            Some(g) => {
                g.0 = (g.0 * g.1 as f64 + z) / (g.1 as f64 + 1.0);
                g.1 += 1;
            }
            None => groups.push((z, 1)),
        }
    }
    groups
}

/// Build an object whose `T` is given unblocked, re-blocking it by
/// generalized eigenspaces.
fn reblock<F: Field>(s: Matrix<F>, t: &Matrix<F>, q: &Matrix<F>, p: &Matrix<F>) -> Result<HObject<F>> {
    let dim_v = s.rows();
    let spaces = spectral_decomposition(t)?;
    let cols: Vec<Vec<F>> = spaces.iter().flat_map(|(_, b)| b.iter().cloned()).collect();
    let b = Matrix::from_columns(t.rows(), &cols);
    let binv = inverse(&b).ok_or_else(|| Error::ReblockFailure("eigenvector basis is singular".into()))?;
    let tt = binv.mul_mat(t).mul_mat(&b);
    let qq = q.mul_mat(&b);
    let pp = binv.mul_mat(p);
    let mut blocks = Vec::new();
    let mut off = 0;
    for (r, basis) in &spaces {
        let d = basis.len();
        let n = tt.submatrix(off, off, d, d).sub_mat(&Matrix::scalar(d, r.clone()));
        blocks.push(HBlock {
            t: r.clone(),
            n,
            q: qq.submatrix(0, off, dim_v, d),
            p: pp.submatrix(off, 0, d, dim_v),
        });
        off += d;
    }
    HObject::new(dim_v, s, blocks)
}

/// `σ: (V, W; S, T, Q, P) ↦ (W, V; −T, S, P, −Q)`.
pub fn sigma<F: Field>(h: &HObject<F>) -> Result<HObject<F>> {
    reblock(h.t_matrix().neg_mat(), &h.s, &h.p_matrix(), &h.q_matrix().neg_mat())
}

/// `σ⁻¹: (V, W; S, T, Q, P) ↦ (W, V; T, −S, −P, Q)`.
pub fn sigma_inv<F: Field>(h: &HObject<F>) -> Result<HObject<F>> {
    reblock(h.t_matrix(), &h.s.neg_mat(), &h.p_matrix().neg_mat(), &h.q_matrix())
}

/// Both stability conditions: `Im P` generates `W` under `T`, and `Ker Q`
/// contains no nonzero `T`-invariant subspace.
pub fn is_stable<F: Field>(h: &HObject<F>) -> bool {
    let w = h.dim_w();
    if w == 0 {
        return true;
    }
    let t = h.t_matrix();
    let p = h.p_matrix();
    let cols: Vec<Vec<F>> = (0..p.cols()).map(|j| p.column(j)).collect();
    if invariant_closure(&t, &cols).len() < w {
        return false;
    }
    let q = h.q_matrix();
    invariant_closure(&t.transpose(), &q.to_rows()).len() == w
}

/// Burnside test on `{γ, π_V}`.
pub fn is_irreducible_h<F: Field>(h: &HObject<F>) -> bool {
    let (n, w) = (h.dim_v, h.dim_w());
    let mut pi = Matrix::zeros(n + w, n + w);
    for i in 0..n {
        pi[(i, i)] = F::one();
    }
    algebra_closure(&[h.gamma(), pi], n + w) == (n + w) * (n + w)
}

/// Search for `f: W → W'` with `γ'(1_V ⊕ f) = (1_V ⊕ f)γ` and `f` invertible.
pub fn h_intertwiner<F: Field>(h: &HObject<F>, h2: &HObject<F>, seed: u64) -> IsoOutcome<F> {
    if h.dim_v != h2.dim_v || h.dim_w() != h2.dim_w() || h.s != h2.s {
        return IsoOutcome::NotIsomorphic;
    }
    let (w, n) = (h.dim_w(), h.dim_v);
    if w == 0 {
        return IsoOutcome::Witness(Matrix::zeros(0, 0));
    }
    let (t, t2) = (h.t_matrix(), h2.t_matrix());
    let (q, q2) = (h.q_matrix(), h2.q_matrix());
    let (p, p2) = (h.p_matrix(), h2.p_matrix());
    let iw = Matrix::<F>::identity(w);
    // f ↦ T'f − fT, f ↦ Q'f, f ↦ fP on row-major vec(f)
    let op_t = t2.kron(&iw).sub_mat(&iw.kron(&t.transpose()));
    let op_q = q2.kron(&iw);
    let op_p = iw.kron(&p.transpose());
    let lhs = Matrix::vstack(&[&op_t, &op_q, &op_p]).expect("columns agree");
    let rhs_v: Vec<F> = std::iter::repeat(F::zero())
        .take(w * w)
        .chain(q.vec())
        .chain(p2.vec())
        .collect();
    let rhs = Matrix::from_vec(w * w + n * w + w * n, 1, rhs_v).expect("length matches");
    let Ok(x) = mat_solve(&lhs, &rhs) else {
        return IsoOutcome::NotIsomorphic;
    };
    let particular = Matrix::from_vec(w, w, x.vec()).expect("w×w");
    let kernel = mat_kernel(&lhs);
    let check = |f: &Matrix<F>| h_intertwines(h, h2, f);
    scan_invertible(Some(&particular), &kernel, w, w, DEFAULT_ISO_ATTEMPTS, seed, check)
}

pub fn h_intertwines<F: Field>(h: &HObject<F>, h2: &HObject<F>, f: &Matrix<F>) -> bool {
    let n = h.dim_v;
    if f.shape() != (h2.dim_w(), h.dim_w()) || h.dim_v != h2.dim_v {
        return false;
    }
    let mut rect = Matrix::zeros(n + f.rows(), n + f.cols());
    rect.set_block(0, 0, &Matrix::identity(n));
    rect.set_block(n, n, f);
    h2.gamma().mul_mat(&rect).sub_mat(&rect.mul_mat(&h.gamma())).is_zero()
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Field + Serialize", deserialize = "F: Field + Deserialize<'de>"))]
struct HObjectRepr<F> {
    #[serde(rename = "dimV")]
    dim_v: usize,
    #[serde(rename = "S")]
    s: Matrix<F>,
    blocks: Vec<HBlock<F>>,
}

impl<F: Field + Serialize> Serialize for HObject<F> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HObjectRepr {
            dim_v: self.dim_v,
            s: self.s.clone(),
            blocks: self.blocks.clone(),
        }
        .serialize(s)
    }
}

impl<'de, F: Field + Deserialize<'de>> Deserialize<'de> for HObject<F> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = HObjectRepr::<F>::deserialize(d)?;
        HObject::new(r.dim_v, r.s, r.blocks).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Qi;

    fn q(rows: &[&[i64]]) -> Matrix<Qi> {
        let c = rows.first().map(|r| r.len()).unwrap_or(0);
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| Qi::int(x)).collect()).collect(), c).unwrap()
    }

    fn scalar_obj(t: i64, qv: i64, pv: i64) -> HObject<Qi> {
        HObject::new(
            1,
            q(&[&[0]]),
            vec![HBlock { t: Qi::int(t), n: q(&[&[0]]), q: q(&[&[qv]]), p: q(&[&[pv]]) }],
        )
        .unwrap()
    }

    #[test]
    fn phi_examples() {
        let h = HObject::new(2, q(&[&[1, 2], &[3, 4]]), vec![]).unwrap();
        let a = phi(&h).unwrap();
        assert!(a.poles().is_empty());
        assert_eq!(a.constant_term(), h.s());
        let a = phi(&scalar_obj(2, 3, 5)).unwrap();
        assert_eq!(a.poles()[0].position, Qi::int(2));
        assert_eq!(a.poles()[0].coeffs, vec![q(&[&[15]])]);
    }

    #[test]
    fn phi_of_shift_block() {
        // X = (−c, ℓ), Y = (0, 1)ᵀ, N = shift: X(x − N)⁻¹Y = −c/x² + ℓ/x
        let h = HObject::new(
            1,
            q(&[&[0]]),
            vec![HBlock { t: Qi::int(0), n: q(&[&[0, 1], &[0, 0]]), q: q(&[&[-7, 2]]), p: q(&[&[0], &[1]]) }],
        )
        .unwrap();
        let a = phi(&h).unwrap();
        assert_eq!(a.poles()[0].coeffs, vec![q(&[&[2]]), q(&[&[-7]])]);
    }

    #[test]
    fn stability_examples() {
        assert!(!is_stable(&scalar_obj(0, 0, 1)));
        assert!(!is_stable(&scalar_obj(0, 1, 0)));
        assert!(is_stable(&scalar_obj(0, 1, 1)));
    }

    #[test]
    fn sigma_squares_to_minus() {
        let h = HObject::new(
            2,
            q(&[&[1, 0], &[0, 3]]),
            vec![
                HBlock { t: Qi::int(0), n: q(&[&[0]]), q: q(&[&[1], &[2]]), p: q(&[&[1, 1]]) },
                HBlock { t: Qi::int(5), n: q(&[&[0]]), q: q(&[&[0], &[1]]), p: q(&[&[2, -1]]) },
            ],
        )
        .unwrap();
        let s2 = sigma(&sigma(&h).unwrap()).unwrap();
        // σ² = (V, W; −S, −T, −Q, −P) up to the re-blocking basis
        assert_eq!(s2.s(), &h.s().neg_mat());
        let neg = HObject::new(
            2,
            h.s().neg_mat(),
            h.blocks()
                .iter()
                .map(|b| HBlock { t: b.t.neg_ref(), n: b.n.neg_mat(), q: b.q.neg_mat(), p: b.p.neg_mat() })
                .collect(),
        )
        .unwrap();
        assert!(h_intertwiner(&neg, &s2, 1).witness().is_some());
        let back = sigma_inv(&sigma(&h).unwrap()).unwrap();
        assert!(h_intertwiner(&h, &back, 1).witness().is_some());
    }

    #[test]
    fn sigma_of_zero_s() {
        let h = scalar_obj(3, 1, 1);
        let s = sigma(&h).unwrap();
        assert_eq!(s.blocks().len(), 1);
        assert_eq!(s.blocks()[0].t, Qi::int(0));
    }

    #[test]
    fn reblock_failure_for_irrational_spectrum() {
        let h = HObject::new(2, q(&[&[0, 1], &[2, 0]]), vec![]).unwrap();
        assert!(matches!(sigma(&h), Err(Error::ReblockFailure(_))));
    }

    #[test]
    fn json_round_trip() {
        let h = scalar_obj(2, 3, 5);
        let s = serde_json::to_string(&h).unwrap();
        assert!(s.contains("\"dimV\":1"));
        let back: HObject<Qi> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn irreducibility_of_h() {
        assert!(is_irreducible_h(&scalar_obj(0, 1, 1)));
        assert!(!is_irreducible_h(&scalar_obj(0, 0, 1)));
    }
}
