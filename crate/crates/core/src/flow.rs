//! Numerical isomonodromy flow in double precision.
//!
//! The vector field along a parameter direction `δ` is `dQ = −QΞ(δ)`,
//! `dP = Ξ(δ)P`, with `T` following the pole positions and `Ω_∞ = 0`.
//! Flatness is checked pointwise by central differences over short RK4 flows
//! in each coordinate direction.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::family::SingularityFamily;
use crate::hobject::{is_stable, HBlock, HObject};
use crate::linalg::{inverse, mat_kernel};
use crate::matrix::Matrix;
use crate::moment::{gtilde_act, GTildeElement};
use crate::scalar::{Field, Qi};
use crate::series::GaugeJet;
use crate::theta_xi::{d_t, theta_build, xi_solve, DeltaForm, DualConnection, ExtendedConnection};
use crate::{CMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    /// Central-difference step for the derivative residuals.
    pub fd_step: f64,
    pub collision_tol: f64,
    pub abort_threshold: f64,
    /// Residuals are computed (and a CSV row written) every this many steps.
    pub report_every: usize,
    /// Sample points for the primal residual.
    pub probes: Vec<C64>,
    /// Coarse difference step for the step-halving measurement.
    pub halving_step: f64,
    /// Residuals below this at the coarse step are treated as exact.
    pub noise_floor: f64,
    pub gauge: XiGauge,
}

/// How the `Ker ad_T` component of Ξ is fixed during the flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum XiGauge {
    /// `MinNorm` when every block is Fuchsian, `Slice` otherwise.
    #[default]
    Auto,
    /// Zero component along `Ker ad_T`, as in the exact builder.
    MinNorm,
    /// Starts from `MinNorm`, then adds the component along the symmetries of
    /// `(T, Θ)` that keeps a fixed set of coordinates of `(Q, P)` constant.
    /// The set is picked at the first state the flow sees. Unlike `MinNorm`
    /// this is flat and does not drift along the centralizer orbit, which is
    /// non-compact once some `N_i ≠ 0`.
    Slice,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            fd_step: 1e-4,
            collision_tol: 1e-6,
            abort_threshold: 1e-3,
            report_every: 100,
            probes: vec![C64::new(0.37, 1.21), C64::new(-1.13, -0.71), C64::new(2.9, -1.7)],
            halving_step: 1e-2,
            noise_floor: 1e-10,
            gauge: XiGauge::Auto,
        }
    }
}

/// Piecewise-linear path through full parameter vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Vec<C64>>,
}

impl Path {
    /// Each waypoint overrides some parameters of the previous one; the path
    /// starts at the base point.
    pub fn from_overrides(f: &SingularityFamily, overrides: &[BTreeMap<String, Qi>]) -> Result<Self> {
        let mut cur: Vec<C64> = f.base_point();
        let mut waypoints = vec![cur.clone()];
        for w in overrides {
            for (name, v) in w {
                let i = f.param_index(name).ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{name}`")))?;
                cur[i] = v.to_c64();
            }
            waypoints.push(cur.clone());
        }
        Ok(Path { waypoints })
    }

    /// JSON `{"waypoints": [{"t3": Scalar, …}, …]}`.
    pub fn from_json(f: &SingularityFamily, text: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Doc {
            waypoints: Vec<BTreeMap<String, Qi>>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_overrides(f, &doc.waypoints)
    }

    pub fn start(&self) -> &[C64] {
        &self.waypoints[0]
    }

    fn segment_lengths(&self) -> Vec<f64> {
        self.waypoints
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    /// `(direction, step count)` per segment, with steps shared by length.
    fn schedule(&self, steps: usize) -> Vec<(Vec<C64>, usize)> {
        let lens = self.segment_lengths();
        let total: f64 = lens.iter().sum();
        let mut out = Vec::new();
        let mut used = 0;
        for (k, w) in self.waypoints.windows(2).enumerate() {
            if lens[k] == 0.0 {
                continue;
            }
            let last = k + 2 == self.waypoints.len();
            let n = if last { steps.saturating_sub(used).max(1) } else { ((steps as f64 * lens[k] / total).round() as usize).max(1) };
            used += n;
            let dir = w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) / n as f64).collect();
            out.push((dir, n));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub params: Vec<C64>,
    pub q: CMatrix,
    pub p: CMatrix,
}

/// Everything derived from one state.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub h: HObject<C64>,
    pub dt: DeltaForm<C64>,
    pub theta: DeltaForm<C64>,
    pub xi: DeltaForm<C64>,
    /// Largest component of any Sylvester right-hand side outside range(ad T).
    pub defect: f64,
}

/// Named residual magnitudes at one state.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Residuals {
    /// `∂_pA − ∂_xΩ_p + [A, Ω_p]` at the probes
    pub primal: f64,
    /// `∂_pΩ_q − ∂_qΩ_p − [Ω_p, Ω_q]` at the probes
    pub primal_2form: f64,
    /// `[T,Θ]`, `Θ∧Θ` and the Sylvester identity
    pub dual_algebraic: f64,
    /// `d_Δ(PQ) − [Ξ, PQ]`
    pub dual_pq: f64,
    /// `d_ΔΘ − (Θ∧Ξ + Ξ∧Θ)`
    pub dual_theta: f64,
    /// `d_ΔΞ − Ξ∧Ξ`
    pub dual_xi: f64,
}

impl Residuals {
    pub const NAMES: [&'static str; 6] = ["primal", "primal_2form", "dual_algebraic", "dual_pq", "dual_theta", "dual_xi"];

    pub fn values(&self) -> [f64; 6] {
        [self.primal, self.primal_2form, self.dual_algebraic, self.dual_pq, self.dual_theta, self.dual_xi]
    }

    /// Residuals that involve finite differences.
    pub fn is_fd(name: &str) -> bool {
        name != "dual_algebraic"
    }

    pub fn primal_max(&self) -> f64 {
        self.primal.max(self.primal_2form)
    }

    pub fn dual_max(&self) -> f64 {
        self.dual_algebraic.max(self.dual_pq).max(self.dual_theta).max(self.dual_xi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalvingRatio {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    /// `None` when the coarse residual is already at the noise floor.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSummary {
    pub steps: usize,
    pub step_size: f64,
    pub max_exponent_drift: f64,
    pub max_defect: f64,
    pub max_residuals: Residuals,
    pub halving: Vec<HalvingRatio>,
    pub stable_throughout: bool,
    pub seconds: f64,
}

impl FlowSummary {
    /// Smallest measured step-halving ratio.
    pub fn min_halving_ratio(&self) -> Option<f64> {
        self.halving.iter().filter_map(|h| h.ratio).reduce(f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct FlowReport {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: FlowSummary,
    pub final_state: FlowState,
}

impl FlowReport {
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// The flow of one family; block structure is frozen at the base point.
pub struct Flow<'a> {
    fam: &'a SingularityFamily,
    pub options: FlowOptions,
    /// Per block: pole index and nilpotent part.
    blocks: Vec<(usize, CMatrix)>,
    offsets: Vec<usize>,
    /// Basis of the part of `Ker ad_T` commuting with Θ, used by the slice
    /// gauge.
    kernel: Vec<CMatrix>,
    slice: OnceCell<Vec<usize>>,
}

fn c64_of(m: &Matrix<Qi>) -> CMatrix {
    m.map(|x| x.to_c64())
}

impl<'a> Flow<'a> {
    pub fn new(fam: &'a SingularityFamily, options: FlowOptions) -> Result<Self> {
        let base = fam.base_point::<Qi>();
        let closed = fam.closed_form(&base)?;
        let poles = fam.block_poles(&base, &closed)?;
        let blocks: Vec<(usize, CMatrix)> = closed.blocks().iter().zip(poles).map(|(b, i)| (i, c64_of(&b.n))).collect();
        let offsets = closed.offsets();
        let w = *offsets.last().unwrap_or(&0);
        // symmetries of the extended data: commute with T and with every Θ_p
        let theta = theta_build(fam, &base, &closed)?;
        let mut kernel = Vec::new();
        for (b, blk) in closed.blocks().iter().enumerate() {
            let (o, d) = (offsets[b], blk.n.rows());
            let ad = |m: &Matrix<Qi>| Matrix::identity(d).kron(&m.transpose()).sub_mat(&m.kron(&Matrix::identity(d)));
            let mut parts = vec![ad(&blk.n)];
            parts.extend(theta.values().iter().map(|th| ad(&th.submatrix(o, o, d, d))));
            let stacked = Matrix::vstack(&parts.iter().collect::<Vec<_>>())?;
            for v in mat_kernel(&stacked) {
                let mut k = Matrix::zeros(w, w);
                k.set_block(o, o, &c64_of(&Matrix::from_vec(d, d, v)?));
                kernel.push(k);
            }
        }
        Ok(Flow { fam, options, blocks, offsets, kernel, slice: OnceCell::new() })
    }

    pub fn uses_slice_gauge(&self) -> bool {
        match self.options.gauge {
            XiGauge::Auto => self.blocks.iter().any(|(_, n)| !n.is_exactly_zero()),
            XiGauge::MinNorm => false,
            XiGauge::Slice => true,
        }
    }

    /// Columns `(−QK, KP)` over the kernel basis, flattened.
    fn gauge_columns(&self, s: &FlowState) -> Vec<Vec<C64>> {
        self.kernel
            .iter()
            .map(|k| {
                let mut c = s.q.mul_mat(k).neg_mat().vec();
                c.extend(k.mul_mat(&s.p).vec());
                c
            })
            .collect()
    }

    /// Greedy row selection with largest-pivot elimination.
    fn pick_slice(&self, s: &FlowState) -> Vec<usize> {
        let mut cols = self.gauge_columns(s);
        let len = cols.first().map_or(0, |c| c.len());
        let mut rows = Vec::new();
        for m in 0..cols.len() {
            let r = (0..len).filter(|r| !rows.contains(r)).max_by(|&a, &b| cols[m][a].norm().total_cmp(&cols[m][b].norm()));
            let Some(r) = r else { break };
            let piv = cols[m][r];
            rows.push(r);
            if piv.norm() == 0.0 {
                continue;
            }
            for l in m + 1..cols.len() {
                let f = cols[l][r] / piv;
                for i in 0..len {
                    let v = cols[m][i];
                    cols[l][i] -= f * v;
                }
            }
        }
        rows
    }

    /// Adds the `Ker ad_T` component that keeps the slice coordinates fixed.
    fn slice_correct(&self, s: &FlowState, xi: &mut DeltaForm<C64>) -> Result<()> {
        if self.kernel.is_empty() {
            return Ok(());
        }
        let rows = self.slice.get_or_init(|| self.pick_slice(s));
        let cols = self.gauge_columns(s);
        let m = Matrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][rows[i]]);
        let inv = inverse(&m).ok_or(Error::NotStable)?;
        for x in xi.values.iter_mut() {
            let mut v = s.q.mul_mat(x).neg_mat().vec();
            v.extend(x.mul_mat(&s.p).vec());
            let rhs = Matrix::from_fn(rows.len(), 1, |i, _| -v[rows[i]]);
            let c = inv.mul_mat(&rhs);
            for (j, k) in self.kernel.iter().enumerate() {
                x.axpy(&c[(j, 0)], k);
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &SingularityFamily {
        self.fam
    }

    /// `g·(X, Y)` at the base point, with `g` a seeded random element of
    /// `G̃(T)` (identity when `seed` is `None`).
    pub fn initial_state(&self, seed: Option<u64>) -> Result<FlowState> {
        let base = self.fam.base_point::<Qi>();
        let mut h = self.fam.closed_form(&base)?;
        if let Some(seed) = seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = self.fam.dim();
            let jets = h
                .blocks()
                .iter()
                .map(|b| {
                    let len = if b.n.is_exactly_zero() { 1 } else { 2 };
                    loop {
                        let mut coeffs = vec![random_small(&mut rng, n).add_mat(&Matrix::identity(n))];
                        for _ in 1..len {
                            coeffs.push(random_small(&mut rng, n));
                        }
                        if let Ok(g) = GaugeJet::new(coeffs) {
                            break g;
                        }
                    }
                })
                .collect();
            h = gtilde_act(&GTildeElement { jets }, &h)?;
        }
        Ok(FlowState { params: self.fam.base_point(), q: c64_of(&h.q_matrix()), p: c64_of(&h.p_matrix()) })
    }

    pub fn hobject(&self, s: &FlowState) -> Result<HObject<C64>> {
        let n = self.fam.dim();
        let ts = self.fam.positions(&s.params);
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(b, (i, nm))| {
                let (o, d) = (self.offsets[b], nm.rows());
                HBlock { t: ts[*i], n: nm.clone(), q: s.q.submatrix(0, o, n, d), p: s.p.submatrix(o, 0, d, n) }
            })
            .collect();
        HObject::new(n, Matrix::zeros(n, n), blocks)
    }

    pub fn snapshot(&self, s: &FlowState) -> Result<Snapshot> {
        let h = self.hobject(s)?;
        let dt = d_t(self.fam, &s.params, &h)?;
        let theta = theta_build(self.fam, &s.params, &h)?;
        let (mut xi, defects) = xi_solve(&dt, &theta, &h)?;
        let defect = defects.iter().map(|d| d.max_abs()).fold(0.0, f64::max);
        if self.uses_slice_gauge() {
            self.slice_correct(s, &mut xi)?;
        }
        Ok(Snapshot { h, dt, theta, xi, defect })
    }

    fn field(&self, s: &FlowState, delta: &[C64]) -> Result<(CMatrix, CMatrix, f64)> {
        let snap = self.snapshot(s)?;
        let xi = snap.xi.contract(delta);
        Ok((s.q.mul_mat(&xi).neg_mat(), xi.mul_mat(&s.p), snap.defect))
    }

    fn shifted(s: &FlowState, delta: &[C64], h: f64, k: &(CMatrix, CMatrix, f64)) -> FlowState {
        let c = C64::new(h, 0.0);
        let mut q = s.q.clone();
        q.axpy(&c, &k.0);
        let mut p = s.p.clone();
        p.axpy(&c, &k.1);
        FlowState { params: s.params.iter().zip(delta).map(|(a, d)| a + d * h).collect(), q, p }
    }

    /// One classical RK4 step of parameter length `h·|δ|`; returns the
    /// largest Sylvester defect seen.
    pub fn rk4_step(&self, s: &FlowState, delta: &[C64], h: f64) -> Result<(FlowState, f64)> {
        let k1 = self.field(s, delta)?;
        let k2 = self.field(&Self::shifted(s, delta, h / 2.0, &k1), delta)?;
        let k3 = self.field(&Self::shifted(s, delta, h / 2.0, &k2), delta)?;
        let k4 = self.field(&Self::shifted(s, delta, h, &k3), delta)?;
        let w = |a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix| {
            let mut m = a.clone();
            m.axpy(&C64::new(2.0, 0.0), b);
            m.axpy(&C64::new(2.0, 0.0), c);
            m = m.add_mat(d);
            m.scale(&C64::new(h / 6.0, 0.0))
        };
        let next = FlowState {
            params: s.params.iter().zip(delta).map(|(a, d)| a + d * h).collect(),
            q: s.q.add_mat(&w(&k1.0, &k2.0, &k3.0, &k4.0)),
            p: s.p.add_mat(&w(&k1.1, &k2.1, &k3.1, &k4.1)),
        };
        Ok((next, k1.2.max(k2.2).max(k3.2).max(k4.2)))
    }

    pub fn check_collisions(&self, s: &FlowState) -> Result<()> {
        let ts = self.fam.positions(&s.params);
        let names: Vec<&str> = self.fam.spec().poles.iter().map(|p| p.t_param.as_str()).collect();
        for i in 0..ts.len() {
            for j in i + 1..ts.len() {
                let d = (ts[i] - ts[j]).norm();
                if d < self.options.collision_tol {
                    return Err(Error::PoleCollision { first: names[i].into(), second: names[j].into(), distance: d });
                }
            }
        }
        Ok(())
    }

    /// Power sums `tr(M^m)`, `m = 1..=n`.
    fn power_sums(m: &CMatrix) -> Vec<C64> {
        let mut out = Vec::new();
        let mut pw = m.clone();
        for _ in 0..m.rows() {
            out.push(pw.trace());
            pw = pw.mul_mat(m);
        }
        out
    }

    /// Spectral invariants of the local data at every finite pole, paired with
    /// their prescribed values, plus `tr((QP)^m)` at ∞.
    pub fn exponent_invariants(&self, s: &FlowState, h: &HObject<C64>) -> Result<(Vec<(C64, C64)>, Vec<C64>)> {
        let mut pairs = Vec::new();
        let nfs = self.fam.normal_forms(&s.params)?;
        let n = self.fam.dim();
        for (b, (i, nm)) in self.blocks.iter().enumerate() {
            let blk = &h.blocks()[b];
            let nf = &nfs[*i];
            let k = nf.order();
            let coeff = |j: usize| blk.q.mul_mat(&nm.pow(j - 1)).mul_mat(&blk.p);
            if k == 1 {
                let got = Self::power_sums(&coeff(1));
                let want = Self::power_sums(&nf.l_matrix());
                pairs.extend(got.into_iter().zip(want));
                continue;
            }
            // leading coefficient is conjugate to Λ_k; group by its eigenvalues
            let lead = coeff(k);
            let lam = nf.lambda_matrix(k);
            let mut mus: Vec<(C64, usize, Vec<usize>)> = Vec::new();
            for (a, g) in nf.groups().iter().enumerate() {
                let mu = lam[(nf.offsets()[a], nf.offsets()[a])];
                match mus.iter_mut().find(|m| (m.0 - mu).norm() < 1e-12) {
                    Some(m) => {
                        m.1 += g.multiplicity;
                        m.2.push(a);
                    }
                    None => mus.push((mu, g.multiplicity, vec![a])),
                }
            }
            let id = Matrix::identity(n);
            for (a, (mu, mult, groups)) in mus.iter().enumerate() {
                let mut proj = id.clone();
                for (b2, (nu, _, _)) in mus.iter().enumerate() {
                    if b2 != a {
                        let f = lead.sub_mat(&Matrix::scalar(n, *nu)).scale(&(C64::new(1.0, 0.0) / (mu - nu)));
                        proj = proj.mul_mat(&f);
                    }
                }
                pairs.push((proj.trace(), C64::new(*mult as f64, 0.0)));
                pairs.push((lead.mul_mat(&proj).trace(), mu * *mult as f64));
                if k == 2 {
                    let formal = proj.mul_mat(&coeff(1)).mul_mat(&proj);
                    let want = Matrix::block_diag(&groups.iter().map(|&g| nf.l_blocks()[g].clone()).collect::<Vec<_>>());
                    let got = Self::power_sums(&formal);
                    let want = Self::power_sums(&want);
                    pairs.extend(got.into_iter().zip(want));
                }
            }
        }
        let qp = h.q_matrix().mul_mat(&h.p_matrix());
        Ok((pairs, Self::power_sums(&qp)))
    }

    /// Residuals at `s` with central differences of step `fd`.
    pub fn residuals(&self, s: &FlowState, fd: f64) -> Result<Residuals> {
        let np = s.params.len();
        let snap = self.snapshot(s)?;
        let ext = ExtendedConnection::new(&snap.h, &snap.theta);
        let probes = &self.options.probes;
        let mut plus = Vec::with_capacity(np);
        let mut minus = Vec::with_capacity(np);
        for p in 0..np {
            let mut e = vec![C64::new(0.0, 0.0); np];
            e[p] = C64::new(1.0, 0.0);
            let (sp, _) = self.rk4_step(s, &e, fd)?;
            let (sm, _) = self.rk4_step(s, &e, -fd)?;
            plus.push(self.snapshot(&sp)?);
            minus.push(self.snapshot(&sm)?);
        }
        let inv2h = C64::new(0.5 / fd, 0.0);
        let diff = |a: &CMatrix, b: &CMatrix| a.sub_mat(b).scale(&inv2h);
        let mut r = Residuals::default();

        let dual = DualConnection::new(&snap.h, &snap.dt, &snap.theta, &snap.xi)?;
        let alg = dual.algebraic_defects();
        r.dual_algebraic = alg.t_theta.max(alg.theta_wedge).max(alg.sylvester);

        let pq = snap.h.p_matrix().mul_mat(&snap.h.q_matrix());
        let (th, xi) = (snap.theta.values(), snap.xi.values());
        for p in 0..np {
            let pq_p = plus[p].h.p_matrix().mul_mat(&plus[p].h.q_matrix());
            let pq_m = minus[p].h.p_matrix().mul_mat(&minus[p].h.q_matrix());
            let res = diff(&pq_p, &pq_m).sub_mat(&xi[p].commutator(&pq));
            r.dual_pq = r.dual_pq.max(res.max_abs());
            for q in p + 1..np {
                let d_p_q = |f: &dyn Fn(&Snapshot) -> CMatrix, a: usize| diff(&f(&plus[a]), &f(&minus[a]));
                let theta_q = |sn: &Snapshot| sn.theta.values()[q].clone();
                let theta_p = |sn: &Snapshot| sn.theta.values()[p].clone();
                let xi_q = |sn: &Snapshot| sn.xi.values()[q].clone();
                let xi_p = |sn: &Snapshot| sn.xi.values()[p].clone();
                let dtheta = d_p_q(&theta_q, p).sub_mat(&d_p_q(&theta_p, q));
                let wedge = th[p].mul_mat(&xi[q]).sub_mat(&th[q].mul_mat(&xi[p]))
                    .add_mat(&xi[p].mul_mat(&th[q]))
                    .sub_mat(&xi[q].mul_mat(&th[p]));
                r.dual_theta = r.dual_theta.max(dtheta.sub_mat(&wedge).max_abs());
                let dxi = d_p_q(&xi_q, p).sub_mat(&d_p_q(&xi_p, q));
                let xx = xi[p].mul_mat(&xi[q]).sub_mat(&xi[q].mul_mat(&xi[p]));
                r.dual_xi = r.dual_xi.max(dxi.sub_mat(&xx).max_abs());
            }
        }

        let exts_p: Vec<ExtendedConnection<C64>> = plus.iter().map(|sn| ExtendedConnection::new(&sn.h, &sn.theta)).collect();
        let exts_m: Vec<ExtendedConnection<C64>> = minus.iter().map(|sn| ExtendedConnection::new(&sn.h, &sn.theta)).collect();
        for x in probes {
            let a = ext.a_at(x)?;
            let omegas: Vec<CMatrix> = (0..np).map(|p| ext.omega_at(p, x)).collect::<Result<_>>()?;
            for p in 0..np {
                let da = diff(&exts_p[p].a_at(x)?, &exts_m[p].a_at(x)?);
                let res = da.sub_mat(&ext.omega_dx_at(p, x)?).add_mat(&a.commutator(&omegas[p]));
                r.primal = r.primal.max(res.max_abs());
                for q in p + 1..np {
                    let dq = diff(&exts_p[p].omega_at(q, x)?, &exts_m[p].omega_at(q, x)?);
                    let dp = diff(&exts_p[q].omega_at(p, x)?, &exts_m[q].omega_at(p, x)?);
                    let res = dq.sub_mat(&dp).sub_mat(&omegas[p].commutator(&omegas[q]));
                    r.primal_2form = r.primal_2form.max(res.max_abs());
                }
            }
        }
        Ok(r)
    }

    /// Residuals at the coarse difference step and at half of it.
    pub fn step_halving(&self, s: &FlowState) -> Result<Vec<HalvingRatio>> {
        let h = self.options.halving_step;
        let coarse = self.residuals(s, h)?;
        let fine = self.residuals(s, h / 2.0)?;
        Ok(Residuals::NAMES
            .iter()
            .zip(coarse.values().iter().zip(fine.values()))
            .filter(|(n, _)| Residuals::is_fd(n))
            .map(|(n, (&c, f))| HalvingRatio {
                name: (*n).into(),
                coarse: c,
                fine: f,
                ratio: (c > self.options.noise_floor).then(|| c / f.max(f64::MIN_POSITIVE)),
            })
            .collect())
    }

    /// Integrates along `path` with `steps` RK4 steps in total.
    pub fn integrate(&self, start: &FlowState, path: &Path, steps: usize) -> Result<FlowReport> {
        let clock = Instant::now();
        let opts = &self.options;
        if steps == 0 {
            return Err(Error::InvalidInput("steps must be positive".into()));
        }
        if path.start().iter().zip(&start.params).any(|(a, b)| (a - b).norm() > 1e-12) {
            return Err(Error::InvalidInput("path must start at the initial parameters".into()));
        }
        let mut s = start.clone();
        self.check_collisions(&s)?;
        let h0 = self.hobject(&s)?;
        if !is_stable(&h0) {
            return Err(Error::NotStable);
        }
        let (_, inf0) = self.exponent_invariants(&s, &h0)?;
        let names = self.fam.param_names();
        let mut columns = vec!["step".to_string(), "arc".to_string()];
        for nme in &names {
            columns.push(format!("{nme}_re"));
            columns.push(format!("{nme}_im"));
        }
        columns.extend(Residuals::NAMES.iter().map(|s| s.to_string()));
        columns.push("sylvester_defect".into());
        columns.push("exponent_drift".into());

        let schedule = path.schedule(steps);
        let total: usize = schedule.iter().map(|x| x.1).sum();
        let mut rows = Vec::new();
        let mut max_res = Residuals::default();
        let mut max_drift = 0.0f64;
        let mut max_defect = 0.0f64;
        let mut arc = 0.0;
        let mut step = 0usize;
        let mut report = |s: &FlowState, step: usize, arc: f64, defect: f64, drift: f64, max_res: &mut Residuals| -> Result<()> {
            let r = self.residuals(s, opts.fd_step)?;
            for (name, v) in Residuals::NAMES.iter().zip(r.values()) {
                if !(v <= opts.abort_threshold) {
                    return Err(Error::ResidualExceeded { name: (*name).into(), value: v, limit: opts.abort_threshold, step });
                }
            }
            let m = max_res.values();
            let v = r.values();
            *max_res = Residuals {
                primal: m[0].max(v[0]),
                primal_2form: m[1].max(v[1]),
                dual_algebraic: m[2].max(v[2]),
                dual_pq: m[3].max(v[3]),
                dual_theta: m[4].max(v[4]),
                dual_xi: m[5].max(v[5]),
            };
            let mut row = vec![step as f64, arc];
            for p in &s.params {
                row.push(p.re);
                row.push(p.im);
            }
            row.extend(v);
            row.push(defect);
            row.push(drift);
            rows.push(row);
            Ok(())
        };
        let drift_of = |s: &FlowState| -> Result<(f64, bool)> {
            let h = self.hobject(s)?;
            let (pairs, inf) = self.exponent_invariants(s, &h)?;
            let mut d = pairs.iter().map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            d = inf.iter().zip(&inf0).map(|(a, b)| (a - b).norm()).fold(d, f64::max);
            Ok((d, is_stable(&h)))
        };
        report(&s, 0, 0.0, self.snapshot(&s)?.defect, drift_of(&s)?.0, &mut max_res)?;
        for (dir, n) in &schedule {
            let len = dir.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
            let unit: Vec<C64> = dir.iter().map(|d| d / len).collect();
            for _ in 0..*n {
                // the endpoint first, so the RK4 stages never see a collision
                let ahead = FlowState { params: s.params.iter().zip(&unit).map(|(a, d)| a + d * len).collect(), q: s.q.clone(), p: s.p.clone() };
                self.check_collisions(&ahead)?;
                let (next, defect) = self.rk4_step(&s, &unit, len)?;
                s = next;
                step += 1;
                arc += len;
                self.check_collisions(&s)?;
                if !(defect <= opts.abort_threshold) {
                    return Err(Error::ResidualExceeded { name: "sylvester_defect".into(), value: defect, limit: opts.abort_threshold, step });
                }
                let (drift, st) = drift_of(&s)?;
                if !st {
                    return Err(Error::NotStable);
                }
                max_drift = max_drift.max(drift);
                max_defect = max_defect.max(defect);
                if step % opts.report_every.max(1) == 0 || step == total {
                    report(&s, step, arc, defect, drift, &mut max_res)?;
                }
            }
        }
        let halving = self.step_halving(&s)?;
        Ok(FlowReport {
            columns,
            rows,
            summary: FlowSummary {
                steps: step,
                step_size: if step > 0 { arc / step as f64 } else { 0.0 },
                max_exponent_drift: max_drift,
                max_defect,
                max_residuals: max_res,
                halving,
                stable_throughout: true,
                seconds: clock.elapsed().as_secs_f64(),
            },
            final_state: s,
        })
    }
}

fn random_small(rng: &mut ChaCha8Rng, n: usize) -> Matrix<Qi> {
    Matrix::from_fn(n, n, |_, _| Qi::frac(rng.gen_range(-2..=2), 2))
}

/// Inverse of a float matrix, for callers building gauges by hand.
pub fn c64_inverse(m: &CMatrix) -> Option<CMatrix> {
    inverse(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::tests::{irregular_spec, param, qm};
    use crate::family::{FamilySpec, GroupTemplate, PoleTemplate};

    #[test]
    fn single_pole_translates() {
        let f = SingularityFamily::new(FamilySpec {
            parameters: vec![param("t", Qi::int(0))],
            poles: vec![PoleTemplate { t_param: "t".into(), groups: vec![GroupTemplate { mult: 1, coeff_params: vec![] }], l: qm(&[&[(1, 3)]]) }],
            l_infinity: qm(&[&[(-1, 3)]]),
            infinity_groups: None,
        })
        .unwrap();
        let flow = Flow::new(&f, FlowOptions { report_every: 5, ..Default::default() }).unwrap();
        let s0 = flow.initial_state(Some(3)).unwrap();
        let mut wp = BTreeMap::new();
        wp.insert("t".to_string(), Qi::complex(1, 1));
        let path = Path::from_overrides(&f, &[wp]).unwrap();
        let rep = flow.integrate(&s0, &path, 20).unwrap();
        assert_eq!(rep.final_state.q, s0.q);
        assert_eq!(rep.final_state.p, s0.p);
        assert!((rep.final_state.params[0] - C64::new(1.0, 1.0)).norm() < 1e-12);
        assert!(rep.summary.max_residuals.primal_max() < 1e-6);
        assert!(rep.to_csv().starts_with("step,arc,t_re,t_im,primal"));
    }

    #[test]
    fn irregular_one_pole_flow_is_flat() {
        let f = SingularityFamily::new(irregular_spec()).unwrap();
        let flow = Flow::new(&f, FlowOptions { report_every: 10, ..Default::default() }).unwrap();
        let s0 = flow.initial_state(Some(5)).unwrap();
        let mut wp = BTreeMap::new();
        wp.insert("c".to_string(), Qi::int(3));
        wp.insert("t".to_string(), Qi::frac(1, 2));
        let path = Path::from_overrides(&f, &[wp]).unwrap();
        let rep = flow.integrate(&s0, &path, 50).unwrap();
        assert!(rep.summary.max_exponent_drift < 1e-8, "{:?}", rep.summary);
        assert!(rep.summary.max_residuals.primal_max() < 1e-6, "{:?}", rep.summary);
        assert!(rep.summary.max_residuals.dual_max() < 1e-6, "{:?}", rep.summary);
    }

    #[test]
    fn frozen_state_is_off_shell() {
        // moving t while (Q, P) stay fixed breaks the primal identity
        let f = SingularityFamily::new(FamilySpec {
            parameters: vec![param("t1", Qi::int(0)), param("t2", Qi::int(1))],
            poles: vec![
                PoleTemplate { t_param: "t1".into(), groups: vec![GroupTemplate { mult: 2, coeff_params: vec![] }], l: qm(&[&[(1, 3), (0, 1)], &[(0, 1), (1, 5)]]) },
                PoleTemplate { t_param: "t2".into(), groups: vec![GroupTemplate { mult: 2, coeff_params: vec![] }], l: qm(&[&[(1, 7), (0, 1)], &[(0, 1), (2, 7)]]) },
            ],
            l_infinity: qm(&[&[(1, 9), (0, 1)], &[(0, 1), (2, 9)]]),
            infinity_groups: None,
        })
        .unwrap();
        let flow = Flow::new(&f, FlowOptions::default()).unwrap();
        let s0 = flow.initial_state(Some(1)).unwrap();
        let good = flow.residuals(&s0, 1e-4).unwrap();
        assert!(good.primal < 1e-6);
        // frozen: difference quotient of A with Q, P held fixed
        let ext0 = ExtendedConnection::new(&flow.hobject(&s0).unwrap(), &flow.snapshot(&s0).unwrap().theta);
        let mut moved = s0.clone();
        moved.params[0] += 1e-4;
        let mut back = s0.clone();
        back.params[0] -= 1e-4;
        let x = C64::new(0.3, 0.9);
        let a_p = ExtendedConnection::new(&flow.hobject(&moved).unwrap(), &flow.snapshot(&moved).unwrap().theta).a_at(&x).unwrap();
        let a_m = ExtendedConnection::new(&flow.hobject(&back).unwrap(), &flow.snapshot(&back).unwrap().theta).a_at(&x).unwrap();
        let da = a_p.sub_mat(&a_m).scale(&C64::new(0.5e4, 0.0));
        let res = da.sub_mat(&ext0.omega_dx_at(0, &x).unwrap()).add_mat(&ext0.a_at(&x).unwrap().commutator(&ext0.omega_at(0, &x).unwrap()));
        assert!(res.max_abs() > 1e-3);
    }
}
