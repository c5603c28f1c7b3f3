//! Admissible families of singularity data over a named parameter space.
//!
//! Pole positions and irregular coefficients are parameters; the exponent
//! matrices `L_i` are frozen. Points are `Vec<F>` in parameter order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::criteria::nonresonance_check;
use crate::error::{dim_err, Error, Result};
use crate::hobject::{HBlock, HObject};
use crate::kappa::{normal_form_xy, normal_group_block};
use crate::matrix::Matrix;
use crate::normal_form::{NormalForm, NormalGroup, Position};
use crate::scalar::{Field, Qi};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub base: Qi,
}

/// `λ_{a,j}` for `j = 2, 3, …` are the named parameters, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTemplate {
    pub mult: usize,
    #[serde(default)]
    pub coeff_params: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleTemplate {
    pub t_param: String,
    pub groups: Vec<GroupTemplate>,
    #[serde(rename = "L")]
    pub l: Matrix<Qi>,
}

/// The family document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub parameters: Vec<Parameter>,
    pub poles: Vec<PoleTemplate>,
    #[serde(rename = "L_infinity")]
    pub l_infinity: Matrix<Qi>,
    /// Optional irregular data at ∞; any nonempty coefficient list violates (A1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infinity_groups: Option<Vec<GroupTemplate>>,
}

/// A validated family.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularityFamily {
    spec: FamilySpec,
    dim: usize,
    t_index: Vec<usize>,
    /// Per pole, per group: parameter indices of `λ_{a,2}, …`.
    coeff_index: Vec<Vec<Vec<usize>>>,
    l_blocks: Vec<Vec<Matrix<Qi>>>,
}

/// Where a parameter enters: as the position of pole `i`, or as
/// `λ_{a,j}` of group `a` at pole `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Position { pole: usize },
    Coefficient { pole: usize, group: usize, j: usize },
}

fn split_blocks(l: &Matrix<Qi>, groups: &[GroupTemplate], pole: usize) -> Result<Vec<Matrix<Qi>>> {
    let mut off = 0;
    let mut out = Vec::new();
    for g in groups {
        out.push(l.submatrix(off, off, g.mult, g.mult));
        off += g.mult;
    }
    let rebuilt = Matrix::block_diag(&out);
    if rebuilt != *l {
        return Err(Error::InvalidInput(format!("pole {pole}: L does not commute with the irregular type")));
    }
    Ok(out)
}

impl SingularityFamily {
    /// Validates (A1)–(A3), (E1) and the base point.
    pub fn new(spec: FamilySpec) -> Result<Self> {
        let n = spec.l_infinity.rows();
        spec.l_infinity.check_shape(n, n, "L_infinity")?;
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut names = BTreeSet::new();
        for p in &spec.parameters {
            if !names.insert(p.name.as_str()) {
                return Err(Error::InvalidInput(format!("parameter `{}` declared twice", p.name)));
            }
        }
        let lookup = |name: &str| -> Result<usize> {
            spec.parameters
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{name}`")))
        };
        if let Some(groups) = &spec.infinity_groups {
            if groups.iter().any(|g| !g.coeff_params.is_empty()) {
                return Err(Error::InfinityIrregular);
            }
        }
        let mut t_index = Vec::new();
        let mut coeff_index = Vec::new();
        let mut l_blocks = Vec::new();
        let mut coeff_names = BTreeSet::new();
        for (i, pole) in spec.poles.iter().enumerate() {
            let ti = lookup(&pole.t_param)?;
            if t_index.contains(&ti) {
                return Err(Error::InvalidInput(format!("pole {i} reuses position `{}`", pole.t_param)));
            }
            t_index.push(ti);
            if pole.groups.iter().map(|g| g.mult).sum::<usize>() != n || pole.groups.iter().any(|g| g.mult == 0) {
                return Err(dim_err(format!("pole {i}: group multiplicities must be positive and sum to {n}")));
            }
            pole.l.check_shape(n, n, "L")?;
            l_blocks.push(split_blocks(&pole.l, &pole.groups, i)?);
            let mut per_group = Vec::new();
            for g in &pole.groups {
                let idx = g.coeff_params.iter().map(|c| lookup(c)).collect::<Result<Vec<_>>>()?;
                coeff_names.extend(g.coeff_params.iter().cloned());
                per_group.push(idx);
            }
            for a in 0..pole.groups.len() {
                for b in a + 1..pole.groups.len() {
                    if pole.groups[a].coeff_params == pole.groups[b].coeff_params {
                        return Err(Error::InvalidInput(format!("pole {i}: groups {a} and {b} coincide")));
                    }
                }
            }
            coeff_index.push(per_group);
        }
        for p in &spec.poles {
            if coeff_names.contains(&p.t_param) {
                return Err(Error::InvalidInput(format!("`{}` is both a position and a coefficient", p.t_param)));
            }
        }
        let fam = SingularityFamily { dim: n, t_index, coeff_index, l_blocks, spec };
        let base = fam.base_point::<Qi>();
        for nf in fam.normal_forms(&base)? {
            if !nonresonance_check(&nf)? {
                return Err(Error::ResonantExponent(format!("pole at {:?}", nf.position())));
            }
        }
        let inf = NormalForm::new(
            Position::Infinity,
            vec![NormalGroup { multiplicity: n, lambda_coeffs: vec![] }],
            vec![fam.spec.l_infinity.clone()],
        )?;
        if !nonresonance_check(&inf)? {
            return Err(Error::ResonantExponent("infinity".into()));
        }
        Ok(fam)
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.spec.parameters
    }

    pub fn param_names(&self) -> Vec<String> {
        self.spec.parameters.iter().map(|p| p.name.clone()).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.spec.parameters.iter().position(|p| p.name == name)
    }

    pub fn pole_count(&self) -> usize {
        self.spec.poles.len()
    }

    pub fn base_point<F: Field>(&self) -> Vec<F> {
        self.spec.parameters.iter().map(|p| F::from_qi(&p.base)).collect()
    }

    pub fn is_fuchsian(&self) -> bool {
        self.spec.poles.iter().all(|p| p.groups.iter().all(|g| g.coeff_params.is_empty()))
    }

    /// Every place the parameter enters.
    pub fn roles(&self, param: usize) -> Vec<ParamRole> {
        let mut out = Vec::new();
        for (i, &ti) in self.t_index.iter().enumerate() {
            if ti == param {
                out.push(ParamRole::Position { pole: i });
            }
            for (a, idx) in self.coeff_index[i].iter().enumerate() {
                for (pos, &p) in idx.iter().enumerate() {
                    if p == param {
                        out.push(ParamRole::Coefficient { pole: i, group: a, j: pos + 2 });
                    }
                }
            }
        }
        out
    }

    pub fn positions<F: Field>(&self, point: &[F]) -> Vec<F> {
        self.t_index.iter().map(|&i| point[i].clone()).collect()
    }

    /// The exponent blocks `L_a` of pole `i`.
    pub fn l_blocks<F: Field>(&self, pole: usize) -> Vec<Matrix<F>> {
        self.l_blocks[pole].iter().map(|m| m.map(F::from_qi)).collect()
    }

    pub fn l_matrix<F: Field>(&self, pole: usize) -> Matrix<F> {
        self.spec.poles[pole].l.map(F::from_qi)
    }

    pub fn group_coeffs<F: Field>(&self, point: &[F], pole: usize, group: usize) -> Vec<F> {
        self.coeff_index[pole][group].iter().map(|&i| point[i].clone()).collect()
    }

    fn check_point_len<F>(&self, point: &[F]) -> Result<()> {
        if point.len() != self.spec.parameters.len() {
            return Err(dim_err(format!("point has {} values for {} parameters", point.len(), self.spec.parameters.len())));
        }
        Ok(())
    }

    /// (A2) at a point: the structural leading coefficient of every `λ_a`
    /// and every difference `λ_a − λ_b` is nonzero; poles are distinct.
    pub fn check_point<F: Field>(&self, point: &[F]) -> Result<()> {
        self.check_point_len(point)?;
        let ts = self.positions(point);
        for i in 0..ts.len() {
            for j in i + 1..ts.len() {
                if ts[i].sub_ref(&ts[j]).is_negligible() {
                    return Err(Error::PoleCollision {
                        first: self.spec.poles[i].t_param.clone(),
                        second: self.spec.poles[j].t_param.clone(),
                        distance: ts[i].sub_ref(&ts[j]).magnitude(),
                    });
                }
            }
        }
        for (i, groups) in self.coeff_index.iter().enumerate() {
            for (a, ga) in groups.iter().enumerate() {
                if let Some(&last) = ga.last() {
                    if point[last].is_negligible() {
                        return Err(Error::LeadingCoefficientZero(format!(
                            "pole {i}, group {a}: `{}` vanishes",
                            self.spec.parameters[last].name
                        )));
                    }
                }
                for (b, gb) in groups.iter().enumerate().skip(a + 1) {
                    let top = (0..ga.len().max(gb.len())).rev().find(|&j| ga.get(j) != gb.get(j));
                    let Some(j) = top else { continue };
                    let va = ga.get(j).map(|&p| point[p].clone()).unwrap_or_else(F::zero);
                    let vb = gb.get(j).map(|&p| point[p].clone()).unwrap_or_else(F::zero);
                    if va.sub_ref(&vb).is_negligible() {
                        return Err(Error::LeadingCoefficientZero(format!(
                            "pole {i}: λ_{a} − λ_{b} loses its order-{} term",
                            j + 2
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The normal forms `(Λ_i, L_i)` at a point.
    pub fn normal_forms<F: Field>(&self, point: &[F]) -> Result<Vec<NormalForm<F>>> {
        self.check_point(point)?;
        let ts = self.positions(point);
        (0..self.pole_count())
            .map(|i| {
                let groups = self.spec.poles[i]
                    .groups
                    .iter()
                    .enumerate()
                    .map(|(a, g)| NormalGroup { multiplicity: g.mult, lambda_coeffs: self.group_coeffs(point, i, a) })
                    .collect();
                NormalForm::new(Position::Finite(ts[i].clone()), groups, self.l_blocks(i))
            })
            .collect()
    }

    /// `dim W_a^{(i)}` per pole and group: `mult·k_a`, or `rank L_0` for the zero group.
    pub fn group_dims(&self) -> Vec<Vec<usize>> {
        (0..self.pole_count())
            .map(|i| {
                self.spec.poles[i]
                    .groups
                    .iter()
                    .zip(&self.l_blocks[i])
                    .map(|(g, l)| {
                        if g.coeff_params.is_empty() {
                            crate::linalg::rank(l)
                        } else {
                            g.mult * (g.coeff_params.len() + 1)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn dim_w(&self) -> usize {
        self.group_dims().iter().flatten().sum()
    }

    /// The closed-form object `(X, Y)` at a point, one block per pole with
    /// `dim W_i > 0`.
    pub fn closed_form<F: Field>(&self, point: &[F]) -> Result<HObject<F>> {
        let blocks = self
            .normal_forms(point)?
            .iter()
            .map(|nf| {
                let (n, x, y) = normal_form_xy(nf);
                let Position::Finite(t) = nf.position().clone() else { unreachable!() };
                HBlock { t, n, q: x, p: y }
            })
            .collect();
        HObject::new(self.dim, Matrix::zeros(self.dim, self.dim), blocks)
    }

    /// Pole index of each block of `h`, matched by eigenvalue.
    pub fn block_poles<F: Field>(&self, point: &[F], h: &HObject<F>) -> Result<Vec<usize>> {
        let ts = self.positions(point);
        let dims = self.group_dims();
        h.blocks()
            .iter()
            .map(|b| {
                let i = ts
                    .iter()
                    .position(|t| t.sub_ref(&b.t).is_negligible())
                    .ok_or_else(|| Error::InvalidInput(format!("block at {:?} matches no pole", b.t)))?;
                if dims[i].iter().sum::<usize>() != b.dim() {
                    return Err(dim_err(format!("block at pole {i} has size {}, expected {}", b.dim(), dims[i].iter().sum::<usize>())));
                }
                Ok(i)
            })
            .collect()
    }

    /// `(N_a, X_a, Y_a)` of one group at a point.
    pub fn group_block<F: Field>(&self, point: &[F], pole: usize, group: usize) -> (Matrix<F>, Matrix<F>, Matrix<F>) {
        normal_group_block(&self.group_coeffs(point, pole, group), &self.l_blocks::<F>(pole)[group])
    }
}

impl TryFrom<FamilySpec> for SingularityFamily {
    type Error = Error;
    fn try_from(spec: FamilySpec) -> Result<Self> {
        SingularityFamily::new(spec)
    }
}

pub fn family_from_json(text: &str) -> Result<SingularityFamily> {
    let spec: FamilySpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    SingularityFamily::new(spec)
}
