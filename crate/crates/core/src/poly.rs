//! Univariate polynomials, integer-root scans and root recovery over ℚ(i).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::{rationalize, Field, Qi};

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<F> {
    coeffs: Vec<F>,
    var: String,
}

impl<F: Field> Polynomial<F> {
    /// Coefficients in ascending degree; trailing zeros are trimmed.
    pub fn new(coeffs: Vec<F>) -> Self {
        let mut p = Polynomial {
            coeffs,
            var: "k".to_string(),
        };
        p.trim();
        p
    }

    pub fn with_var(mut self, var: &str) -> Self {
        self.var = var.to_string();
        self
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    pub fn constant(c: F) -> Self {
        Self::new(vec![c])
    }

    /// `x − r`.
    pub fn linear_root(r: &F) -> Self {
        Self::new(vec![r.neg_ref(), F::one()])
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&F> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &F) -> F {
        let mut acc = F::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul_ref(x).add_ref(c);
        }
        acc
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let z = F::zero();
        Self::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).unwrap_or(&z).add_ref(o.coeffs.get(i).unwrap_or(&z))
                })
                .collect(),
        )
        .with_var(&self.var)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&F::one().neg_ref()))
    }

    pub fn scale(&self, c: &F) -> Self {
        Self::new(self.coeffs.iter().map(|x| x.mul_ref(c)).collect()).with_var(&self.var)
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero().with_var(&self.var);
        }
        let mut out = vec![F::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add_ref(&a.mul_ref(b));
            }
        }
        Self::new(out).with_var(&self.var)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c.mul_ref(&F::from_i64(i as i64)))
                .collect(),
        )
        .with_var(&self.var)
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            None => self.clone(),
            Some(l) => {
                let inv = l.inv();
                self.scale(&inv)
            }
        }
    }

    /// Euclidean division `self = q·d + r` with `deg r < deg d`.
    pub fn divrem(&self, d: &Self) -> Result<(Self, Self)> {
        let dl = d.leading().ok_or(Error::ZeroPolynomial)?.clone();
        let dd = d.coeffs.len() - 1;
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return Ok((Self::zero().with_var(&self.var), self.clone()));
        }
        let mut q = vec![F::zero(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let c = r[k + dd].div_ref(&dl);
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                r[k + j] = r[k + j].sub_ref(&c.mul_ref(dc));
            }
            q[k] = c;
        }
        r.truncate(dd);
        Ok((Self::new(q).with_var(&self.var), Self::new(r).with_var(&self.var)))
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b).expect("nonzero divisor");
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Newton interpolation through `(xs[i], ys[i])` with distinct nodes.
    pub fn interpolate(xs: &[F], ys: &[F]) -> Self {
        assert_eq!(xs.len(), ys.len(), "interpolation data lengths differ");
        let n = xs.len();
        let mut dd = ys.to_vec();
        for lvl in 1..n {
            for i in (lvl..n).rev() {
                dd[i] = dd[i].sub_ref(&dd[i - 1]).div_ref(&xs[i].sub_ref(&xs[i - lvl]));
            }
        }
        let mut p = Self::zero();
        for i in (0..n).rev() {
            p = p.mul(&Self::linear_root(&xs[i])).add(&Self::constant(dd[i].clone()));
        }
        p
    }
}

fn clear_denominators(parts: &[BigRational]) -> Vec<BigInt> {
    let lcm = parts.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    parts
        .iter()
        .map(|r| r.numer() * (&lcm / r.denom()))
        .collect()
}

fn eval_int(coeffs: &[BigInt], k: &BigInt) -> BigInt {
    let mut acc = BigInt::zero();
    for c in coeffs.iter().rev() {
        acc = acc * k + c;
    }
    acc
}

/// Integer roots of `p`, scanned exactly over the Cauchy-bound interval.
pub fn poly_integer_roots(p: &Polynomial<Qi>) -> Result<Vec<i64>> {
    let lead = p.leading().ok_or(Error::ZeroPolynomial)?;
    let mut bound = BigRational::zero();
    for c in &p.coeffs()[..p.coeffs().len() - 1] {
        let q = c.div_ref(lead);
        let m = q.re().abs() + q.im().abs();
        if m > bound {
            bound = m;
        }
    }
    let b = (bound + BigRational::one()).ceil().to_integer();
    let b = b
        .to_i64()
        .ok_or_else(|| Error::InvalidInput("integer-root bound too large".into()))?;
    // p(k) = 0 for real k iff both the real and imaginary parts vanish
    let re: Vec<BigRational> = p.coeffs().iter().map(|c| c.re().clone()).collect();
    let im: Vec<BigRational> = p.coeffs().iter().map(|c| c.im().clone()).collect();
    let re = clear_denominators(&re);
    let im = clear_denominators(&im);
    // k | (lowest nonzero coefficient) filters most candidates cheaply
    let filter = |coeffs: &[BigInt]| coeffs.iter().find(|c| !c.is_zero()).cloned();
    let fre = filter(&re);
    let fim = filter(&im);
    let mut roots = Vec::new();
    for k in -b..=b {
        let kb = BigInt::from(k);
        if k != 0 {
            if let Some(c) = &fre {
                if !(c % &kb).is_zero() {
                    continue;
                }
            }
            if let Some(c) = &fim {
                if !(c % &kb).is_zero() {
                    continue;
                }
            }
        }
        if eval_int(&re, &kb).is_zero() && eval_int(&im, &kb).is_zero() {
            roots.push(k);
        }
    }
    Ok(roots)
}

/// Distance from a float root to the nearest integer below which it counts as one.
pub const INTEGER_ROOT_TOL: f64 = 1e-7;

/// Integer roots over either field: the exact scan for ℚ(i), rounded numeric
/// roots for floats.
pub fn integer_roots<F: Field>(p: &Polynomial<F>) -> Result<Vec<i64>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let exact: Option<Vec<Qi>> = p.coeffs().iter().map(|c| c.to_qi()).collect();
    if let Some(c) = exact {
        return poly_integer_roots(&Polynomial::new(c));
    }
    let c: Vec<Complex64> = p.coeffs().iter().map(|c| c.to_c64()).collect();
    let mut roots: Vec<i64> = numeric_roots(&c)
        .into_iter()
        .filter(|z| (z - z.re.round()).norm() < INTEGER_ROOT_TOL)
        .map(|z| z.re.round() as i64)
        .collect();
    roots.sort_unstable();
    roots.dedup();
    Ok(roots)
}

/// All complex roots of a polynomial with complex float coefficients
/// (Aberth–Ehrlich iteration).
pub fn numeric_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|x| x.norm() == 0.0) {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    let n = c.len() - 1;
    let lead = c[n];
    let c: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    let radius = 1.0 + c[..n].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(radius * 0.5, ang)
        })
        .collect();
    let eval = |x: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for a in c.iter().rev() {
            dp = dp * x + p;
            p = p * x + a;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let w = ratio / (1.0 - ratio * s);
            if w.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Factor `p` completely into linear factors over ℚ(i), returning each root
/// with its multiplicity, or `None` if some root leaves ℚ(i).
pub fn gaussian_rational_roots(p: &Polynomial<Qi>) -> Option<Vec<(Qi, usize)>> {
    let deg = p.degree()?;
    if deg == 0 {
        return Some(Vec::new());
    }
    let sqfree = {
        let g = p.gcd(&p.derivative());
        p.divrem(&g).ok()?.0.monic()
    };
    let approx = numeric_roots(&sqfree.coeffs().iter().map(|c| c.to_c64()).collect::<Vec<_>>());
    let mut rest = p.clone();
    let mut out = Vec::new();
    for z in approx {
        let r = Qi::new(rationalize(z.re, 1_000_000)?, rationalize(z.im, 1_000_000)?);
        if !sqfree.eval(&r).is_zero() || out.iter().any(|(q, _): &(Qi, usize)| *q == r) {
            return None;
        }
        let lin = Polynomial::linear_root(&r);
        let mut mult = 0;
        loop {
            let (q, rem) = rest.divrem(&lin).ok()?;
            if !rem.is_zero() {
                break;
            }
            rest = q;
            mult += 1;
        }
        out.push((r, mult));
    }
    if rest.degree() == Some(0) {
        out.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        Some(out)
    } else {
        None
    }
}
