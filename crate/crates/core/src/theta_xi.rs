//! The one-forms Θ and Ξ on parameter space, the extended representation and
//! the dual connection, with their derivative-free identities.

use crate::connection::{ConnectionS, Pole};
use crate::error::{dim_err, Error, Result};
use crate::family::{ParamRole, SingularityFamily};
use crate::hobject::{is_stable, phi, HObject};
use crate::linalg::{inverse, mat_solve};
use crate::matrix::Matrix;
use crate::scalar::Field;
use crate::sylvester::sylvester_block_solve;

/// A one-form on parameter space at a point: one matrix per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaForm<F> {
    names: Vec<String>,
    pub(crate) values: Vec<Matrix<F>>,
}

impl<F: Field> DeltaForm<F> {
    pub fn new(names: Vec<String>, values: Vec<Matrix<F>>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(dim_err("one value per parameter"));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.shape() != first.shape()) {
                return Err(dim_err("DeltaForm values differ in shape"));
            }
        }
        Ok(DeltaForm { names, values })
    }

    pub fn zeros(names: Vec<String>, rows: usize, cols: usize) -> Self {
        let values = names.iter().map(|_| Matrix::zeros(rows, cols)).collect();
        DeltaForm { names, values }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix<F>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix<F>> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix<F>)> {
        self.names.iter().map(|s| s.as_str()).zip(&self.values)
    }

    /// Contraction with a tangent vector `δ`.
    pub fn contract(&self, delta: &[F]) -> Matrix<F> {
        let (r, c) = self.values.first().map(|m| m.shape()).unwrap_or((0, 0));
        let mut out = Matrix::zeros(r, c);
        for (v, d) in self.values.iter().zip(delta) {
            if !d.is_zero() {
                out.axpy(d, v);
            }
        }
        out
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G + Copy) -> DeltaForm<G> {
        DeltaForm { names: self.names.clone(), values: self.values.iter().map(|m| m.map(f)).collect() }
    }
}

/// `d_Δ T` at a point: identity on the blocks whose position is the parameter.
pub fn d_t<F: Field>(f: &SingularityFamily, point: &[F], h: &HObject<F>) -> Result<DeltaForm<F>> {
    let poles = f.block_poles(point, h)?;
    let off = h.offsets();
    let w = h.dim_w();
    let mut out = DeltaForm::zeros(f.param_names(), w, w);
    for (p, v) in out.values.iter_mut().enumerate() {
        for role in f.roles(p) {
            if let ParamRole::Position { pole } = role {
                for (b, &bp) in poles.iter().enumerate() {
                    if bp == pole {
                        for r in off[b]..off[b + 1] {
                            v[(r, r)] = F::one();
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `X̃^{-1}` modulo `z^k`, with `X̃ = Σ_j λ_j z^{k−j} + L z^{k−1}`.
fn xtilde_inverse<F: Field>(lambda: &[F], l: &Matrix<F>) -> Result<Vec<Matrix<F>>> {
    let d = l.rows();
    let k = lambda.len() + 1;
    let coeff = |e: usize| -> Matrix<F> {
        if e == k - 1 {
            l.clone()
        } else {
            Matrix::scalar(d, lambda[k - 2 - e].clone())
        }
    };
    let x0inv = inverse(&coeff(0)).ok_or(Error::SingularXtilde)?;
    let mut y: Vec<Matrix<F>> = vec![x0inv.clone()];
    for e in 1..k {
        let mut acc = Matrix::zeros(d, d);
        for m in 1..=e {
            acc = acc.add_mat(&coeff(m).mul_mat(&y[e - m]));
        }
        y.push(x0inv.mul_mat(&acc).neg_mat());
    }
    Ok(y)
}

/// Upper-triangular Toeplitz matrix of `Σ_e E_e z^e` on the basis
/// `z^{k−1}, …, 1`: block `(p, q)` is `E_{q−p}`.
fn toeplitz<F: Field>(coeffs: &[Matrix<F>], d: usize) -> Matrix<F> {
    let k = coeffs.len();
    let mut m = Matrix::zeros(d * k, d * k);
    for p in 0..k {
        for q in p..k {
            m.set_block(p * d, q * d, &coeffs[q - p]);
        }
    }
    m
}

/// Θ at a point, on the `W` of `h` (blocks matched to poles by position).
pub fn theta_build<F: Field>(f: &SingularityFamily, point: &[F], h: &HObject<F>) -> Result<DeltaForm<F>> {
    let poles = f.block_poles(point, h)?;
    let off = h.offsets();
    let dims = f.group_dims();
    let w = h.dim_w();
    let mut out = d_t(f, point, h)?;
    for v in out.values.iter_mut() {
        *v = v.neg_mat();
    }
    for (b, &i) in poles.iter().enumerate() {
        let mut goff = off[b];
        let ls = f.l_blocks::<F>(i);
        for (a, l) in ls.iter().enumerate() {
            let lambda = f.group_coeffs(point, i, a);
            let wa = dims[i][a];
            if !lambda.is_empty() {
                let k = lambda.len() + 1;
                let d = l.rows();
                let y = xtilde_inverse(&lambda, l)?;
                for (p, v) in out.values.iter_mut().enumerate() {
                    for role in f.roles(p) {
                        let ParamRole::Coefficient { pole, group, j } = role else { continue };
                        if pole != i || group != a {
                            continue;
                        }
                        // X̃^{-1}·z^{k−j+1}/(1−j)
                        let e0 = k - j + 1;
                        let c = F::from_frac(1, 1 - j as i64);
                        let coeffs: Vec<Matrix<F>> = (0..k)
                            .map(|e| if e >= e0 { y[e - e0].scale(&c) } else { Matrix::zeros(d, d) })
                            .collect();
                        let mut blk = v.submatrix(goff, goff, wa, wa);
                        blk = blk.add_mat(&toeplitz(&coeffs, d));
                        v.set_block(goff, goff, &blk);
                    }
                }
            }
            goff += wa;
        }
    }
    debug_assert!(out.values.iter().all(|v| v.shape() == (w, w)));
    Ok(out)
}

/// Principal part of `Ω⁰_i = d_ΔΛ_i + L_i d_Δx_i/x_i` per parameter, as a
/// stack `[c_1, c_2, …]` of coefficients of `x_i^{-j}` on `V`.
pub fn omega0_principal<F: Field>(f: &SingularityFamily, point: &[F], pole: usize, len: usize) -> Result<DeltaForm<F>> {
    let nf = &f.normal_forms(point)?[pole];
    let n = f.dim();
    let mut out = DeltaForm::zeros(f.param_names(), n * len, n);
    let offs = nf.offsets();
    for (p, v) in out.values.iter_mut().enumerate() {
        for role in f.roles(p) {
            match role {
                ParamRole::Position { pole: i } if i == pole => {
                    for j in 1..=len {
                        let c = if j == 1 { nf.l_matrix() } else { nf.lambda_matrix(j) };
                        let blk = v.submatrix((j - 1) * n, 0, n, n).sub_mat(&c);
                        v.set_block((j - 1) * n, 0, &blk);
                    }
                }
                ParamRole::Coefficient { pole: i, group, j } if i == pole && j - 1 <= len => {
                    let c = F::from_frac(1, 1 - j as i64);
                    let r0 = (j - 2) * n;
                    for r in offs[group]..offs[group + 1] {
                        v[(r0 + r, r)] = v[(r0 + r, r)].add_ref(&c);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

/// `X_i N_i^{j−1} Θ_i Y_i` stacked for `j = 1..=len`, from the closed form at the point.
pub fn theta_principal<F: Field>(
    f: &SingularityFamily,
    point: &[F],
    theta: &DeltaForm<F>,
    pole: usize,
    len: usize,
) -> Result<DeltaForm<F>> {
    let closed = f.closed_form(point)?;
    let poles = f.block_poles(point, &closed)?;
    let n = f.dim();
    let mut out = DeltaForm::zeros(f.param_names(), n * len, n);
    let Some(b) = poles.iter().position(|&i| i == pole) else { return Ok(out) };
    let off = closed.offsets();
    let blk = &closed.blocks()[b];
    let d = blk.dim();
    for (v, th) in out.values.iter_mut().zip(&theta.values) {
        let tb = th.submatrix(off[b], off[b], d, d);
        let mut xn = blk.q.clone();
        for j in 1..=len {
            v.set_block((j - 1) * n, 0, &xn.mul_mat(&tb).mul_mat(&blk.p));
            xn = xn.mul_mat(&blk.n);
        }
    }
    Ok(out)
}

/// Ξ and the out-of-range defect per parameter, without the stability check.
pub fn xi_solve<F: Field>(
    dt: &DeltaForm<F>,
    theta: &DeltaForm<F>,
    h: &HObject<F>,
) -> Result<(DeltaForm<F>, Vec<Matrix<F>>)> {
    let pq = h.p_matrix().mul_mat(&h.q_matrix());
    let blocks = h.tblocks();
    let mut xs = Vec::with_capacity(theta.len());
    let mut defects = Vec::with_capacity(theta.len());
    for (dtp, th) in dt.values.iter().zip(&theta.values) {
        let rhs = dtp.add_mat(th).add_mat(&pq.commutator(th));
        let sol = sylvester_block_solve(&blocks, &rhs)?;
        xs.push(sol.xi);
        defects.push(sol.residual);
    }
    Ok((DeltaForm { names: theta.names.clone(), values: xs }, defects))
}

/// Ξ with `[Ξ, T] = d_ΔT + Θ + [PQ, Θ]`, zero along `Ker ad_T`.
pub fn xi_build<F: Field>(f: &SingularityFamily, point: &[F], h: &HObject<F>, theta: &DeltaForm<F>) -> Result<DeltaForm<F>> {
    if !is_stable(h) {
        return Err(Error::NotStable);
    }
    let dt = d_t(f, point, h)?;
    let (xi, defects) = xi_solve(&dt, theta, h)?;
    for (name, d) in theta.names.iter().zip(&defects) {
        if !d.is_zero() {
            return Err(Error::NotInRange { param: name.clone(), defect: d.max_abs() });
        }
    }
    Ok(xi)
}

/// `Θ = −d_ΔT` and `Ξ_ij = −P_iQ_j d_Δ log(t_i − t_j)`.
pub fn schlesinger_closed_forms<F: Field>(
    f: &SingularityFamily,
    point: &[F],
    h: &HObject<F>,
) -> Result<(DeltaForm<F>, DeltaForm<F>)> {
    if !f.is_fuchsian() {
        return Err(Error::NotFuchsian);
    }
    let dt = d_t(f, point, h)?;
    let theta = DeltaForm { names: dt.names.clone(), values: dt.values.iter().map(|m| m.neg_mat()).collect() };
    let poles = f.block_poles(point, h)?;
    let off = h.offsets();
    let w = h.dim_w();
    let mut xs = Vec::new();
    for p in 0..f.parameters().len() {
        let moves: Vec<bool> = poles
            .iter()
            .map(|&i| f.roles(p).contains(&ParamRole::Position { pole: i }))
            .collect();
        let mut x = Matrix::zeros(w, w);
        for (i, bi) in h.blocks().iter().enumerate() {
            for (j, bj) in h.blocks().iter().enumerate() {
                if i == j || moves[i] == moves[j] {
                    continue;
                }
                let dlog = F::from_i64(moves[i] as i64 - moves[j] as i64).div_ref(&bi.t.sub_ref(&bj.t));
                x.set_block(off[i], off[j], &bi.p.mul_mat(&bj.q).scale(&dlog.neg_ref()));
            }
        }
        xs.push(x);
    }
    Ok((theta, DeltaForm { names: dt.names, values: xs }))
}

/// `𝒜 = Q(x−T)^{-1}(dx + Θ)P` with `Ω_∞ = 0`.
#[derive(Clone, Debug)]
pub struct ExtendedConnection<F> {
    pub h: HObject<F>,
    pub theta: DeltaForm<F>,
}

impl<F: Field> ExtendedConnection<F> {
    pub fn new(h: &HObject<F>, theta: &DeltaForm<F>) -> Self {
        ExtendedConnection { h: h.clone(), theta: theta.clone() }
    }

    /// The fiber connection `Q(x−T)^{-1}P dx`.
    pub fn fiber(&self) -> Result<ConnectionS<F>> {
        let n = self.h.dim_v();
        phi(&HObject::new(n, Matrix::zeros(n, n), self.h.blocks().to_vec())?)
    }

    fn resolvent_times(&self, x: &F, m: &Matrix<F>) -> Result<Matrix<F>> {
        let w = self.h.dim_w();
        let shifted = Matrix::scalar(w, x.clone()).sub_mat(&self.h.t_matrix());
        mat_solve(&shifted, m)
    }

    /// `A(x) = Q(x−T)^{-1}P`.
    pub fn a_at(&self, x: &F) -> Result<Matrix<F>> {
        Ok(self.h.q_matrix().mul_mat(&self.resolvent_times(x, &self.h.p_matrix())?))
    }

    /// `Ω_p(x) = Q(x−T)^{-1}Θ_pP`.
    pub fn omega_at(&self, param: usize, x: &F) -> Result<Matrix<F>> {
        let th = &self.theta.values[param];
        Ok(self.h.q_matrix().mul_mat(&self.resolvent_times(x, &th.mul_mat(&self.h.p_matrix()))?))
    }

    /// `∂_xΩ_p(x) = −Q(x−T)^{-2}Θ_pP`.
    pub fn omega_dx_at(&self, param: usize, x: &F) -> Result<Matrix<F>> {
        let th = &self.theta.values[param];
        let once = self.resolvent_times(x, &th.mul_mat(&self.h.p_matrix()))?;
        Ok(self.h.q_matrix().mul_mat(&self.resolvent_times(x, &once)?).neg_mat())
    }
}

/// `∇^∨ = d − B − (Θy + Ξ)` with `B = −(T + PQ/y) dy`.
#[derive(Clone, Debug)]
pub struct DualConnection<F> {
    pub b: ConnectionS<F>,
    pub dt: DeltaForm<F>,
    pub theta: DeltaForm<F>,
    pub xi: DeltaForm<F>,
    t: Matrix<F>,
    pq: Matrix<F>,
}

/// Largest entries of the identities that need no derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraicDefects {
    /// `[T, Θ]`
    pub t_theta: f64,
    /// `Θ ∧ Θ`
    pub theta_wedge: f64,
    /// `[Ξ, T] − d_ΔT − Θ − [PQ, Θ]`
    pub sylvester: f64,
    /// every identity holds exactly (or below float tolerance)
    pub exact: bool,
}

impl<F: Field> DualConnection<F> {
    pub fn new(h: &HObject<F>, dt: &DeltaForm<F>, theta: &DeltaForm<F>, xi: &DeltaForm<F>) -> Result<Self> {
        let w = h.dim_w();
        let t = h.t_matrix();
        let pq = h.p_matrix().mul_mat(&h.q_matrix());
        let poles = if w == 0 || pq.is_exactly_zero() {
            vec![]
        } else {
            vec![Pole { position: F::zero(), coeffs: vec![pq.neg_mat()] }]
        };
        let b = ConnectionS::new(w, t.neg_mat(), poles)?;
        Ok(DualConnection { b, dt: dt.clone(), theta: theta.clone(), xi: xi.clone(), t, pq })
    }

    pub fn algebraic_defects(&self) -> AlgebraicDefects {
        let mut exact = true;
        let mut track = |m: Matrix<F>, acc: &mut f64| {
            exact &= m.is_zero();
            *acc = acc.max(m.max_abs());
        };
        let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
        let th = &self.theta.values;
        for (p, tp) in th.iter().enumerate() {
            track(self.t.commutator(tp), &mut a);
            for tq in &th[p + 1..] {
                track(tp.commutator(tq), &mut b);
            }
            let lhs = self.xi.values[p].commutator(&self.t);
            let rhs = self.dt.values[p].add_mat(tp).add_mat(&self.pq.commutator(tp));
            track(lhs.sub_mat(&rhs), &mut c);
        }
        AlgebraicDefects { t_theta: a, theta_wedge: b, sylvester: c, exact }
    }
}

/// Convenience: the dual data at a point, failing if Ξ does not exist.
pub fn dual_connection<F: Field>(
    f: &SingularityFamily,
    point: &[F],
    h: &HObject<F>,
) -> Result<DualConnection<F>> {
    let theta = theta_build(f, point, h)?;
    let xi = xi_build(f, point, h, &theta)?;
    DualConnection::new(h, &d_t(f, point, h)?, &theta, &xi)
}
