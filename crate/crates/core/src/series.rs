//! Truncated matrix Laurent series and polynomial gauge jets.

use crate::error::{dim_err, Error, Result};
use crate::linalg::inverse;
use crate::matrix::Matrix;
use crate::scalar::Field;

/// `Σ_{m ≥ valuation} c_m x^m`, known for exponents below `precision()`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentSeries<F> {
    rows: usize,
    cols: usize,
    valuation: i64,
    coeffs: Vec<Matrix<F>>,
}

impl<F: Field> LaurentSeries<F> {
    pub fn new(rows: usize, cols: usize, valuation: i64, coeffs: Vec<Matrix<F>>) -> Result<Self> {
        if coeffs.iter().any(|c| c.shape() != (rows, cols)) {
            return Err(dim_err("series coefficient has wrong shape"));
        }
        Ok(LaurentSeries {
            rows,
            cols,
            valuation,
            coeffs,
        })
    }

    /// The zero series known up to (excluding) `precision`.
    pub fn zero(rows: usize, cols: usize, precision: i64) -> Self {
        LaurentSeries {
            rows,
            cols,
            valuation: precision,
            coeffs: Vec::new(),
        }
    }

    /// A polynomial `Σ c_m x^m` (m ≥ 0) padded with zeros up to `precision`.
    pub fn from_polynomial(coeffs: &[Matrix<F>], rows: usize, cols: usize, precision: i64) -> Self {
        let len = precision.max(0) as usize;
        let cs = (0..len)
            .map(|m| coeffs.get(m).cloned().unwrap_or_else(|| Matrix::zeros(rows, cols)))
            .collect();
        LaurentSeries {
            rows,
            cols,
            valuation: 0,
            coeffs: cs,
        }
        .clamp_valuation(precision)
    }

    fn clamp_valuation(mut self, precision: i64) -> Self {
        if precision < self.valuation {
            self.valuation = precision;
            self.coeffs.clear();
        }
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn valuation(&self) -> i64 {
        self.valuation
    }

    pub fn precision(&self) -> i64 {
        self.valuation + self.coeffs.len() as i64
    }

    /// Coefficient of `x^m`; panics if `m` is beyond the known precision.
    pub fn coeff(&self, m: i64) -> Matrix<F> {
        assert!(m < self.precision(), "coefficient x^{m} beyond series precision");
        if m < self.valuation {
            Matrix::zeros(self.rows, self.cols)
        } else {
            self.coeffs[(m - self.valuation) as usize].clone()
        }
    }

    pub fn truncate(&self, precision: i64) -> Self {
        let p = precision.min(self.precision());
        if p <= self.valuation {
            return Self::zero(self.rows, self.cols, p);
        }
        LaurentSeries {
            rows: self.rows,
            cols: self.cols,
            valuation: self.valuation,
            coeffs: self.coeffs[..(p - self.valuation) as usize].to_vec(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.shape(), o.shape(), "series shape mismatch");
        let v = self.valuation.min(o.valuation);
        let p = self.precision().min(o.precision());
        let coeffs = (v..p).map(|m| self.coeff(m).add_mat(&o.coeff(m))).collect();
        LaurentSeries {
            rows: self.rows,
            cols: self.cols,
            valuation: v,
            coeffs,
        }
        .clamp_valuation(p)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        LaurentSeries {
            rows: self.rows,
            cols: self.cols,
            valuation: self.valuation,
            coeffs: self.coeffs.iter().map(|c| c.neg_mat()).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "series product shape mismatch");
        let v = self.valuation + o.valuation;
        let p = (self.precision() + o.valuation).min(o.precision() + self.valuation);
        let mut coeffs = Vec::new();
        for m in v..p {
            let mut acc = Matrix::zeros(self.rows, o.cols);
            for a in self.valuation..=(m - o.valuation) {
                let b = m - a;
                if a >= self.precision() || b >= o.precision() {
                    continue;
                }
                let ca = &self.coeffs[(a - self.valuation) as usize];
                let cb = &o.coeffs[(b - o.valuation) as usize];
                acc = acc.add_mat(&ca.mul_mat(cb));
            }
            coeffs.push(acc);
        }
        LaurentSeries {
            rows: self.rows,
            cols: o.cols,
            valuation: v,
            coeffs,
        }
        .clamp_valuation(p)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.scale(&F::from_i64(self.valuation + k as i64)))
            .collect();
        LaurentSeries {
            rows: self.rows,
            cols: self.cols,
            valuation: self.valuation - 1,
            coeffs,
        }
    }

    /// Inverse of a series with valuation ≥ 0 and invertible constant term.
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols || self.valuation < 0 {
            return Err(Error::InvalidInput("series inverse needs a square power series".into()));
        }
        let p = self.precision();
        let n = self.rows;
        if p <= 0 {
            return Ok(Self::zero(n, n, p));
        }
        let c0 = self.coeff(0);
        let c0i = inverse(&c0).ok_or(Error::SingularLeadingCoefficient)?;
        let mut b: Vec<Matrix<F>> = vec![c0i.clone()];
        for m in 1..p {
            let mut acc = Matrix::zeros(n, n);
            for j in 1..=m {
                acc = acc.add_mat(&self.coeff(j).mul_mat(&b[(m - j) as usize]));
            }
            b.push(c0i.mul_mat(&acc).neg_mat());
        }
        Ok(LaurentSeries {
            rows: n,
            cols: n,
            valuation: 0,
            coeffs: b,
        })
    }

    /// Equality of all coefficients below `upto` (both must be known there).
    pub fn agrees_with(&self, o: &Self, upto: i64) -> bool {
        let lo = self.valuation.min(o.valuation);
        (lo..upto).all(|m| self.coeff(m).sub_mat(&o.coeff(m)).is_zero())
    }

    /// `[c_{-1}, c_{-2}, …, c_{-k}]` for the principal part.
    pub fn principal_stack(&self) -> Vec<Matrix<F>> {
        let mut out: Vec<Matrix<F>> = (self.valuation.min(0)..0)
            .rev()
            .map(|m| self.coeff(m))
            .collect();
        while out.last().is_some_and(|c| c.is_zero()) {
            out.pop();
        }
        out
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G + Copy) -> LaurentSeries<G> {
        LaurentSeries {
            rows: self.rows,
            cols: self.cols,
            valuation: self.valuation,
            coeffs: self.coeffs.iter().map(|c| c.map(f)).collect(),
        }
    }
}

/// A polynomial gauge transformation `g(x) = Σ g_j x^j` with `g_0` invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeJet<F> {
    coeffs: Vec<Matrix<F>>,
    coordinate: String,
}

impl<F: Field> GaugeJet<F> {
    pub fn new(coeffs: Vec<Matrix<F>>) -> Result<Self> {
        let g0 = coeffs
            .first()
            .ok_or_else(|| Error::InvalidInput("gauge jet needs g_0".into()))?;
        g0.check_square("g_0")?;
        let n = g0.rows();
        if coeffs.iter().any(|c| c.shape() != (n, n)) {
            return Err(dim_err("gauge jet coefficients differ in shape"));
        }
        if inverse(g0).is_none() {
            return Err(Error::SingularLeadingCoefficient);
        }
        Ok(GaugeJet {
            coeffs,
            coordinate: "x".into(),
        })
    }

    pub fn identity(n: usize) -> Self {
        GaugeJet {
            coeffs: vec![Matrix::identity(n)],
            coordinate: "x".into(),
        }
    }

    pub fn with_coordinate(mut self, name: &str) -> Self {
        self.coordinate = name.into();
        self
    }

    pub fn coordinate(&self) -> &str {
        &self.coordinate
    }

    pub fn coeffs(&self) -> &[Matrix<F>] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].rows()
    }

    pub fn to_series(&self, precision: i64) -> LaurentSeries<F> {
        let n = self.dim();
        LaurentSeries::from_polynomial(&self.coeffs, n, n, precision)
    }

    /// First `len` coefficients of `g^{-1}`.
    pub fn truncated_inverse(&self, len: usize) -> Vec<Matrix<F>> {
        let s = self.to_series(len as i64).inverse().expect("g_0 invertible");
        (0..len as i64).map(|m| s.coeff(m)).collect()
    }

    /// Product of polynomials (untruncated).
    pub fn compose(&self, o: &Self) -> Self {
        let n = self.dim();
        let len = self.coeffs.len() + o.coeffs.len() - 1;
        let mut out = vec![Matrix::zeros(n, n); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add_mat(&a.mul_mat(b));
            }
        }
        GaugeJet {
            coeffs: out,
            coordinate: self.coordinate.clone(),
        }
    }
}

/// `g[A] = g A g^{-1} + g' g^{-1}` as a local series known below `precision`.
pub fn gauge_series<F: Field>(
    a: &LaurentSeries<F>,
    g: &GaugeJet<F>,
    precision: i64,
) -> Result<LaurentSeries<F>> {
    let n = g.dim();
    if a.shape() != (n, n) {
        return Err(dim_err("gauge and connection dimensions differ"));
    }
    if a.precision() < precision {
        return Err(Error::InvalidInput(format!(
            "series known below x^{}, need x^{precision}",
            a.precision()
        )));
    }
    let k = (-a.valuation()).max(0);
    let gs = g.to_series(precision + k + 1);
    let gi = gs.inverse()?;
    let conj = gs.mul(a).mul(&gi);
    let dg = gs.derivative().mul(&gi);
    Ok(conj.add(&dg).truncate(precision))
}
