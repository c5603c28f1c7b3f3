//! Unramified normal forms `d − dΛ − L dz/z` and the truncated formal matcher.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::connection::{ConnectionS, Pole};
use crate::criteria::nonresonance_check;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{inverse, mat_kernel, mat_solve, min_norm_solve};
use crate::matrix::Matrix;
use crate::scalar::Field;
use crate::series::{gauge_series, GaugeJet, LaurentSeries};

#[derive(Clone, Debug, PartialEq)]
pub enum Position<F> {
    Finite(F),
    Infinity,
}

/// One eigen-group `V_a` of the irregular type: `∂_z λ_a = Σ_{j≥2} λ_{a,j} z^{-j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Field + Serialize", deserialize = "F: Field + Deserialize<'de>"))]
pub struct NormalGroup<F> {
    pub multiplicity: usize,
    /// `[λ_{a,2}, …, λ_{a,k_a}]`; empty for the group with `λ_a = 0`.
    pub lambda_coeffs: Vec<F>,
}

impl<F: Field> NormalGroup<F> {
    /// Pole order `k_a` of `∂_z λ_a` (1 for the zero group).
    pub fn order(&self) -> usize {
        self.lambda_coeffs.len() + 1
    }

    pub fn is_zero_group(&self) -> bool {
        self.lambda_coeffs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm<F> {
    position: Position<F>,
    groups: Vec<NormalGroup<F>>,
    l_blocks: Vec<Matrix<F>>,
}

impl<F: Field> NormalForm<F> {
    pub fn new(position: Position<F>, groups: Vec<NormalGroup<F>>, l_blocks: Vec<Matrix<F>>) -> Result<Self> {
        if groups.len() != l_blocks.len() {
            return Err(dim_err(format!("{} groups but {} L blocks", groups.len(), l_blocks.len())));
        }
        for (a, (g, l)) in groups.iter().zip(&l_blocks).enumerate() {
            if g.multiplicity == 0 {
                return Err(Error::InvalidInput(format!("group {a} has multiplicity 0")));
            }
            l.check_shape(g.multiplicity, g.multiplicity, "L block")?;
            if g.lambda_coeffs.last().is_some_and(|c| c.is_negligible()) {
                return Err(Error::LeadingCoefficientZero(format!("group {a}")));
            }
        }
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                if groups[a].lambda_coeffs == groups[b].lambda_coeffs {
                    return Err(Error::InvalidInput(format!(
                        "groups {a} and {b} have equal irregular coefficients"
                    )));
                }
            }
        }
        Ok(NormalForm {
            position,
            groups,
            l_blocks,
        })
    }

    pub fn position(&self) -> &Position<F> {
        &self.position
    }

    pub fn groups(&self) -> &[NormalGroup<F>] {
        &self.groups
    }

    pub fn l_blocks(&self) -> &[Matrix<F>] {
        &self.l_blocks
    }

    pub fn dim(&self) -> usize {
        self.groups.iter().map(|g| g.multiplicity).sum()
    }

    /// Pole order `k = max_a k_a`.
    pub fn order(&self) -> usize {
        self.groups.iter().map(|g| g.order()).max().unwrap_or(1)
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for g in &self.groups {
            off.push(off.last().unwrap() + g.multiplicity);
        }
        off
    }

    pub fn l_matrix(&self) -> Matrix<F> {
        Matrix::block_diag(&self.l_blocks)
    }

    /// `⊕_a λ_{a,j}·1_{V_a}` for `j ≥ 2`.
    pub fn lambda_matrix(&self, j: usize) -> Matrix<F> {
        let entries: Vec<F> = self
            .groups
            .iter()
            .flat_map(|g| {
                let c = if j >= 2 {
                    g.lambda_coeffs.get(j - 2).cloned().unwrap_or_else(F::zero)
                } else {
                    F::zero()
                };
                std::iter::repeat(c).take(g.multiplicity)
            })
            .collect();
        Matrix::diag(&entries)
    }

    /// Principal part `[L, Λ_2, …, Λ_k]`, trailing zeros trimmed.
    pub fn principal_stack(&self) -> Vec<Matrix<F>> {
        let mut out = vec![self.l_matrix()];
        for j in 2..=self.order() {
            out.push(self.lambda_matrix(j));
        }
        while out.last().is_some_and(|c| c.is_zero()) {
            out.pop();
        }
        out
    }

    /// Local series of the normal form at its own pole, known below `precision`.
    pub fn local_series(&self, precision: i64) -> LaurentSeries<F> {
        let n = self.dim();
        let k = self.order() as i64;
        let stack = self.principal_stack();
        let coeffs = (-k..precision)
            .map(|m| {
                if m < 0 {
                    stack.get((-m - 1) as usize).cloned().unwrap_or_else(|| Matrix::zeros(n, n))
                } else {
                    Matrix::zeros(n, n)
                }
            })
            .collect();
        LaurentSeries::new(n, n, -k, coeffs).expect("shapes fixed")
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G + Copy) -> NormalForm<G> {
        NormalForm {
            position: match &self.position {
                Position::Finite(t) => Position::Finite(f(t)),
                Position::Infinity => Position::Infinity,
            },
            groups: self
                .groups
                .iter()
                .map(|g| NormalGroup {
                    multiplicity: g.multiplicity,
                    lambda_coeffs: g.lambda_coeffs.iter().map(f).collect(),
                })
                .collect(),
            l_blocks: self.l_blocks.iter().map(|m| m.map(f)).collect(),
        }
    }
}

/// The single-pole connection `dΛ + L dz/z` at a finite position.
pub fn normal_form_connection<F: Field>(nf: &NormalForm<F>) -> Result<ConnectionS<F>> {
    let t = match &nf.position {
        Position::Finite(t) => t.clone(),
        Position::Infinity => {
            return Err(Error::InvalidInput("normal form at infinity has no finite pole".into()))
        }
    };
    let n = nf.dim();
    ConnectionS::new(
        n,
        Matrix::zeros(n, n),
        vec![Pole {
            position: t,
            coeffs: nf.principal_stack(),
        }],
    )
}

/// `g[A]` of a connection's local series at `t`, known through `x^truncation`.
pub fn gauge_polynomial<F: Field>(
    a: &ConnectionS<F>,
    t: &F,
    g: &GaugeJet<F>,
    truncation: i64,
) -> Result<LaurentSeries<F>> {
    let series = a.laurent_expand(t, truncation);
    gauge_series(&series, g, truncation + 1)
}

pub const FORMAL_MATCH_ATTEMPTS: usize = 64;

/// Find `ĝ = Σ_{s≤order} g_s x^s` with `ĝ[A⁰] ≡ A mod x^{order−k+1}`.
pub fn formal_match<F: Field>(
    a: &ConnectionS<F>,
    t: &F,
    nf: &NormalForm<F>,
    order: usize,
) -> Result<GaugeJet<F>> {
    let k = nf.order().max(a.pole_index(t).map(|i| a.poles()[i].order()).unwrap_or(0));
    let series = a.laurent_expand(t, order as i64 - k as i64);
    formal_match_series(&series, nf, order)
}

/// [`formal_match`] on a local series given directly.
pub fn formal_match_series<F: Field>(
    a: &LaurentSeries<F>,
    nf: &NormalForm<F>,
    order: usize,
) -> Result<GaugeJet<F>> {
    if !nonresonance_check(nf)? {
        return Err(Error::NonResonantRequired);
    }
    let n = nf.dim();
    if a.shape() != (n, n) {
        return Err(dim_err("connection and normal form dimensions differ"));
    }
    let kk = nf.order().max((-a.valuation()).max(0) as usize) as i64;
    let top = order as i64 - kk;
    if top < -kk || a.precision() <= top {
        return Err(Error::InvalidInput(format!(
            "truncation {order} too small for pole order {kk}"
        )));
    }
    let a0 = nf.local_series(top + 1);
    let nn = n * n;
    let unknowns = (order + 1) * nn;
    let var = |s: usize, i: usize, j: usize| s * nn + i * n + j;
    let mut rows: Vec<Vec<F>> = Vec::new();
    for m in -kk..=top {
        for i in 0..n {
            for j in 0..n {
                let mut row = vec![F::zero(); unknowns];
                for p in -kk..=m {
                    let s = (m - p) as usize;
                    let ap = a.coeff(p);
                    let a0p = a0.coeff(p);
                    for r in 0..n {
                        let v = &ap[(i, r)];
                        if !v.is_zero() {
                            row[var(s, r, j)] = row[var(s, r, j)].add_ref(v);
                        }
                        let w = &a0p[(r, j)];
                        if !w.is_zero() {
                            row[var(s, i, r)] = row[var(s, i, r)].sub_ref(w);
                        }
                    }
                }
                let s1 = (m + 1) as usize;
                if m + 1 >= 1 && s1 <= order {
                    row[var(s1, i, j)] = row[var(s1, i, j)].sub_ref(&F::from_i64(m + 1));
                }
                if row.iter().any(|x| !x.is_zero()) {
                    rows.push(row);
                }
            }
        }
    }
    let sys = Matrix::from_rows(rows, unknowns)?;
    let kernel = mat_kernel(&sys);
    if kernel.is_empty() {
        return Err(Error::NoMatch("gauge equations have only the zero solution".into()));
    }
    let kmat = Matrix::from_columns(unknowns, &kernel);
    let g0_part = kmat.submatrix(0, 0, nn, kernel.len());
    let id = Matrix::from_vec(nn, 1, Matrix::<F>::identity(n).vec())?;
    let (c, _) = min_norm_solve(&g0_part, &id)?;
    let target = g0_part.mul_mat(&c);
    let jet_of = |coeffs: &Matrix<F>| -> Vec<Matrix<F>> {
        (0..=order)
            .map(|s| Matrix::from_vec(n, n, (0..nn).map(|q| coeffs[(s * nn + q, 0)].clone()).collect()).unwrap())
            .collect()
    };
    let mut candidates: Vec<Matrix<F>> = Vec::new();
    if let Ok(coef) = mat_solve(&g0_part, &target) {
        candidates.push(kmat.mul_mat(&coef));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..FORMAL_MATCH_ATTEMPTS {
        let coef = Matrix::from_fn(kernel.len(), 1, |_, _| F::from_i64(rng.gen_range(-3..=3)));
        candidates.push(kmat.mul_mat(&coef));
    }
    for cand in candidates {
        let coeffs = jet_of(&cand);
        if inverse(&coeffs[0]).is_none() {
            continue;
        }
        let jet = GaugeJet::new(coeffs)?;
        let check = gauge_series(&a0.truncate(top + 1), &jet, top + 1)?;
        if check.agrees_with(&a.truncate(top + 1), top + 1) {
            return Ok(jet);
        }
    }
    Err(Error::NoMatch("no solution with invertible constant term".into()))
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
#[serde(bound(serialize = "F: Field + Serialize", deserialize = "F: Field + Deserialize<'de>"))]
enum PositionRepr<F> {
    Finite(F),
    Named(String),
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Field + Serialize", deserialize = "F: Field + Deserialize<'de>"))]
struct NormalFormRepr<F> {
    position: PositionRepr<F>,
    groups: Vec<NormalGroup<F>>,
    #[serde(rename = "L_blocks")]
    l_blocks: Vec<Matrix<F>>,
}

impl<F: Field + Serialize> Serialize for NormalForm<F> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NormalFormRepr {
            position: match &self.position {
                Position::Finite(t) => PositionRepr::Finite(t.clone()),
                Position::Infinity => PositionRepr::Named("infinity".into()),
            },
            groups: self.groups.clone(),
            l_blocks: self.l_blocks.clone(),
        }
        .serialize(s)
    }
}

impl<'de, F: Field + Deserialize<'de>> Deserialize<'de> for NormalForm<F> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = NormalFormRepr::<F>::deserialize(d)?;
        let position = match r.position {
            PositionRepr::Finite(t) => Position::Finite(t),
            PositionRepr::Named(s) if s == "infinity" => Position::Infinity,
            PositionRepr::Named(s) => {
                return Err(serde::de::Error::custom(format!("unknown position {s:?}")))
            }
        };
        NormalForm::new(position, r.groups, r.l_blocks).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Qi;

    fn one_dim(l: Qi, coeffs: Vec<Qi>) -> NormalForm<Qi> {
        NormalForm::new(
            Position::Finite(Qi::int(0)),
            vec![NormalGroup { multiplicity: 1, lambda_coeffs: coeffs }],
            vec![Matrix::scalar(1, l)],
        )
        .unwrap()
    }

    #[test]
    fn connection_of_normal_form() {
        let nf = one_dim(Qi::frac(1, 3), vec![]);
        let a = normal_form_connection(&nf).unwrap();
        assert_eq!(a.poles()[0].coeffs, vec![Matrix::scalar(1, Qi::frac(1, 3))]);
        // ∂λ = −c/z², L = ℓ → [ℓ, −c]
        let nf = one_dim(Qi::int(2), vec![Qi::int(-5)]);
        let a = normal_form_connection(&nf).unwrap();
        assert_eq!(a.poles()[0].coeffs, vec![Matrix::scalar(1, Qi::int(2)), Matrix::scalar(1, Qi::int(-5))]);
    }

    #[test]
    fn rejects_bad_normal_forms() {
        let g = NormalGroup { multiplicity: 1, lambda_coeffs: vec![Qi::int(1)] };
        let e = NormalForm::new(
            Position::Finite(Qi::int(0)),
            vec![g.clone(), g],
            vec![Matrix::identity(1), Matrix::identity(1)],
        );
        assert!(e.is_err());
        let z = NormalForm::new(
            Position::<Qi>::Infinity,
            vec![NormalGroup { multiplicity: 1, lambda_coeffs: vec![Qi::int(0)] }],
            vec![Matrix::identity(1)],
        );
        assert!(matches!(z, Err(Error::LeadingCoefficientZero(_))));
    }

    #[test]
    fn formal_match_of_normal_form_itself() {
        let nf = NormalForm::new(
            Position::Finite(Qi::int(1)),
            vec![
                NormalGroup { multiplicity: 1, lambda_coeffs: vec![Qi::int(2)] },
                NormalGroup { multiplicity: 1, lambda_coeffs: vec![] },
            ],
            vec![Matrix::scalar(1, Qi::frac(1, 2)), Matrix::scalar(1, Qi::frac(-1, 3))],
        )
        .unwrap();
        let a = normal_form_connection(&nf).unwrap();
        let g = formal_match(&a, &Qi::int(1), &nf, 4).unwrap();
        assert_eq!(g.coeffs()[0], Matrix::identity(2));
        assert!(g.coeffs()[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn formal_match_wrong_residue() {
        let nf = one_dim(Qi::frac(1, 2), vec![]);
        let a = normal_form_connection(&one_dim(Qi::frac(1, 3), vec![])).unwrap();
        assert!(matches!(formal_match(&a, &Qi::int(0), &nf, 4), Err(Error::NoMatch(_))));
    }

    #[test]
    fn formal_match_round_trip() {
        let nf = NormalForm::new(
            Position::Finite(Qi::int(0)),
            vec![
                NormalGroup { multiplicity: 1, lambda_coeffs: vec![Qi::int(1)] },
                NormalGroup { multiplicity: 1, lambda_coeffs: vec![Qi::int(-1)] },
            ],
            vec![Matrix::scalar(1, Qi::frac(1, 2)), Matrix::scalar(1, Qi::int(0))],
        )
        .unwrap();
        let g = GaugeJet::new(vec![
            Matrix::from_rows(vec![vec![Qi::int(1), Qi::int(1)], vec![Qi::int(0), Qi::int(1)]], 2).unwrap(),
            Matrix::from_rows(vec![vec![Qi::int(0), Qi::int(2)], vec![Qi::int(-1), Qi::int(0)]], 2).unwrap(),
        ])
        .unwrap();
        let order = nf.order() + 4;
        let a0 = nf.local_series(order as i64 + 2);
        let a = gauge_series(&a0, &g, order as i64).unwrap();
        let found = formal_match_series(&a, &nf, order).unwrap();
        let top = order as i64 - nf.order() as i64;
        let back = gauge_series(&nf.local_series(top + 1), &found, top + 1).unwrap();
        assert!(back.agrees_with(&a.truncate(top + 1), top + 1));
    }

    #[test]
    fn resonant_normal_form_is_refused() {
        let nf = NormalForm::new(
            Position::Finite(Qi::int(0)),
            vec![NormalGroup { multiplicity: 2, lambda_coeffs: vec![] }],
            vec![Matrix::diag(&[Qi::int(1), Qi::int(0)])],
        )
        .unwrap();
        let a = normal_form_connection(&nf).unwrap();
        assert_eq!(formal_match(&a, &Qi::int(0), &nf, 3), Err(Error::NonResonantRequired));
    }

    #[test]
    fn json_round_trip() {
        let nf = one_dim(Qi::int(2), vec![Qi::int(-5)]);
        let s = serde_json::to_string(&nf).unwrap();
        let back: NormalForm<Qi> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, nf);
        let inf = r#"{"position":"infinity","groups":[{"multiplicity":1,"lambda_coeffs":[]}],"L_blocks":[{"rows":1,"cols":1,"data":[[{"re":"1/2","im":"0"}]]}]}"#;
        let nf: NormalForm<Qi> = serde_json::from_str(inf).unwrap();
        assert_eq!(nf.position(), &Position::Infinity);
    }
}
