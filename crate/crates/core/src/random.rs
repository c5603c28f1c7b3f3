//! Seeded generators of exact test instances.

use rand::seq::SliceRandom;
use num_traits::Zero;
use rand::Rng;

use crate::connection::{ConnectionS, Pole};
use crate::criteria::{is_irreducible_s, nonresonance_check};
use crate::family::{FamilySpec, GroupTemplate, Parameter, PoleTemplate, SingularityFamily};
use crate::hobject::HObject;
use crate::linalg::{det, inverse, mat_kernel};
use crate::matrix::Matrix;
use crate::moment::{GTildeAlgebra, GTildeElement};
use crate::normal_form::{NormalForm, NormalGroup, Position};
use crate::scalar::{Field, Qi};
use crate::series::GaugeJet;

/// Small rational, with an occasional imaginary part.
pub fn small_qi<R: Rng>(rng: &mut R) -> Qi {
    let re = Qi::frac(rng.gen_range(-3..=3), rng.gen_range(1..=3));
    if rng.gen_bool(0.15) {
        re.add_ref(&Qi::complex(0, rng.gen_range(-1..=1)))
    } else {
        re
    }
}

pub fn small_int<R: Rng>(rng: &mut R, bound: i64) -> Qi {
    Qi::int(rng.gen_range(-bound..=bound))
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix<Qi> {
    Matrix::from_fn(rows, cols, |_, _| if rng.gen_bool(0.3) { Qi::int(0) } else { small_qi(rng) })
}

pub fn random_int_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: i64) -> Matrix<Qi> {
    Matrix::from_fn(rows, cols, |_, _| small_int(rng, bound))
}

/// Invertible matrix with small integer entries.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> Matrix<Qi> {
    loop {
        let m = random_int_matrix(rng, n, n, 2);
        if !det(&m).is_zero() {
            return m;
        }
    }
}

/// Distinct small Gaussian-integer positions.
pub fn distinct_positions<R: Rng>(rng: &mut R, count: usize) -> Vec<Qi> {
    let mut pool: Vec<Qi> = (-3..=3).flat_map(|a| (-1..=1).map(move |b| Qi::complex(a, b))).collect();
    pool.shuffle(rng);
    pool.truncate(count);
    pool
}

/// `n ≤ max_dim`, at most `max_poles` poles of order at most `max_order`.
pub fn random_connection<R: Rng>(rng: &mut R, max_dim: usize, max_poles: usize, max_order: usize) -> ConnectionS<Qi> {
    let n = rng.gen_range(1..=max_dim);
    let np = rng.gen_range(0..=max_poles);
    let poles = distinct_positions(rng, np)
        .into_iter()
        .map(|t| {
            let k = rng.gen_range(1..=max_order);
            let mut coeffs: Vec<Matrix<Qi>> = (0..k).map(|_| random_matrix(rng, n, n)).collect();
            while coeffs[k - 1].is_zero() {
                coeffs[k - 1] = random_matrix(rng, n, n);
            }
            Pole { position: t, coeffs }
        })
        .collect();
    let a0 = if rng.gen_bool(0.3) { random_matrix(rng, n, n) } else { Matrix::zeros(n, n) };
    ConnectionS::new(n, a0, poles).expect("generated data is well formed")
}

/// Irreducible connection of dimension at least 2, by rejection.
pub fn random_irreducible<R: Rng>(rng: &mut R, max_dim: usize, max_poles: usize, max_order: usize) -> ConnectionS<Qi> {
    loop {
        let n = rng.gen_range(2..=max_dim);
        let np = rng.gen_range(2..=max_poles.max(2));
        let poles = distinct_positions(rng, np)
            .into_iter()
            .map(|t| {
                let k = rng.gen_range(1..=max_order);
                Pole { position: t, coeffs: (0..k).map(|_| random_int_matrix(rng, n, n, 2)).collect() }
            })
            .collect();
        let Ok(a) = ConnectionS::new(n, Matrix::zeros(n, n), poles) else { continue };
        if a.dim() >= 2 && is_irreducible_s(&a) {
            return a;
        }
    }
}

/// Diagonalizable `m×m` matrix `S D S^{-1}` with the given eigenvalues.
pub fn with_spectrum<R: Rng>(rng: &mut R, eig: &[Qi]) -> Matrix<Qi> {
    let s = random_invertible(rng, eig.len());
    let si = inverse(&s).expect("invertible");
    s.mul_mat(&Matrix::diag(eig)).mul_mat(&si)
}

/// Non-integral small rational.
pub fn non_integer<R: Rng>(rng: &mut R) -> Qi {
    let d = [2, 3, 5, 7][rng.gen_range(0..4)];
    let mut num = rng.gen_range(-9..=9);
    if num % d == 0 {
        num += 1;
    }
    Qi::frac(num, d)
}

/// Normal form with `n ≤ max_dim` and pole orders `≤ max_order`. With
/// `nonresonant`, every `L` block has distinct eigenvalues that are pairwise
/// non-integrally separated.
pub fn random_normal_form<R: Rng>(rng: &mut R, max_dim: usize, max_order: usize, nonresonant: bool) -> NormalForm<Qi> {
    loop {
        let n = rng.gen_range(1..=max_dim);
        let mut groups = Vec::new();
        let mut left = n;
        let mut zero_used = false;
        while left > 0 {
            let m = rng.gen_range(1..=left);
            left -= m;
            let zero = !zero_used && rng.gen_bool(0.35);
            let coeffs = if zero {
                zero_used = true;
                vec![]
            } else {
                let len = rng.gen_range(1..=max_order.max(2) - 1);
                let mut c: Vec<Qi> = (0..len).map(|_| small_int(rng, 2)).collect();
                while c[len - 1].is_zero() {
                    c[len - 1] = small_int(rng, 3);
                }
                c
            };
            groups.push(NormalGroup { multiplicity: m, lambda_coeffs: coeffs });
        }
        let l_blocks = groups
            .iter()
            .map(|g| {
                if nonresonant {
                    let eig: Vec<Qi> = (0..g.multiplicity).map(|i| non_integer(rng).add_ref(&Qi::frac(i as i64, 11))).collect();
                    with_spectrum(rng, &eig)
                } else {
                    random_matrix(rng, g.multiplicity, g.multiplicity)
                }
            })
            .collect();
        let t = distinct_positions(rng, 1).remove(0);
        let Ok(nf) = NormalForm::new(Position::Finite(t), groups, l_blocks) else { continue };
        if nonresonant && !nonresonance_check(&nf).unwrap_or(false) {
            continue;
        }
        return nf;
    }
}

/// Jet `g_0 + g_1 x + …` with invertible integer `g_0`.
pub fn random_jet<R: Rng>(rng: &mut R, n: usize, len: usize) -> GaugeJet<Qi> {
    let mut coeffs = vec![random_invertible(rng, n)];
    for _ in 1..len {
        coeffs.push(random_int_matrix(rng, n, n, 1));
    }
    GaugeJet::new(coeffs).expect("leading coefficient invertible")
}

/// One jet per block, of length 1 on blocks with `N = 0`.
pub fn random_gtilde<R: Rng>(rng: &mut R, h: &HObject<Qi>) -> GTildeElement<Qi> {
    let jets = h
        .blocks()
        .iter()
        .map(|b| random_jet(rng, h.dim_v(), if b.n.is_exactly_zero() { 1 } else { 2 }))
        .collect();
    GTildeElement { jets }
}

pub fn random_gtilde_algebra<R: Rng>(rng: &mut R, h: &HObject<Qi>) -> GTildeAlgebra<Qi> {
    h.blocks().iter().map(|b| (0..b.dim()).map(|_| random_int_matrix(rng, h.dim_v(), h.dim_v(), 2)).collect()).collect()
}

fn param(name: String, base: Qi) -> Parameter {
    Parameter { name, base }
}

/// Admissible family with `n ≤ 3` and at most three finite poles; with
/// `fuchsian` every pole is simple.
pub fn random_family<R: Rng>(rng: &mut R, fuchsian: bool) -> SingularityFamily {
    loop {
        let n = rng.gen_range(1..=3);
        let np = rng.gen_range(1..=3);
        let ts = distinct_positions(rng, np);
        let mut parameters = Vec::new();
        let mut poles = Vec::new();
        for (i, t) in ts.into_iter().enumerate() {
            let t_param = format!("t{}", i + 1);
            parameters.push(param(t_param.clone(), t));
            let mut groups = Vec::new();
            let mut left = n;
            let mut zero_used = fuchsian;
            let mut blocks = Vec::new();
            if fuchsian {
                groups.push(GroupTemplate { mult: n, coeff_params: vec![] });
                left = 0;
                let eig: Vec<Qi> = (0..n).map(|j| non_integer(rng).add_ref(&Qi::frac(j as i64, 13))).collect();
                blocks.push(with_spectrum(rng, &eig));
            }
            while left > 0 {
                let m = rng.gen_range(1..=left);
                left -= m;
                let zero = !zero_used && rng.gen_bool(0.3);
                let mut coeff_params = Vec::new();
                if zero {
                    zero_used = true;
                } else {
                    let len = rng.gen_range(1..=2);
                    for j in 0..len {
                        let name = format!("c{}_{}_{}", i + 1, groups.len() + 1, j + 2);
                        let mut v = small_int(rng, 2);
                        while v.is_zero() {
                            v = small_int(rng, 3);
                        }
                        parameters.push(param(name.clone(), v));
                        coeff_params.push(name);
                    }
                }
                let eig: Vec<Qi> = (0..m).map(|j| non_integer(rng).add_ref(&Qi::frac(j as i64, 13))).collect();
                blocks.push(with_spectrum(rng, &eig));
                groups.push(GroupTemplate { mult: m, coeff_params });
            }
            let l = Matrix::block_diag(&blocks);
            poles.push(PoleTemplate { t_param, groups, l });
        }
        let eig: Vec<Qi> = (0..n).map(|j| non_integer(rng).add_ref(&Qi::frac(j as i64, 17))).collect();
        let spec = FamilySpec { parameters, poles, l_infinity: with_spectrum(rng, &eig), infinity_groups: None };
        if let Ok(f) = SingularityFamily::new(spec) {
            return f;
        }
    }
}

/// Random invertible element of the centralizer of `T`.
pub fn random_centralizer<R: Rng>(rng: &mut R, h: &HObject<Qi>) -> Option<Matrix<Qi>> {
    let w = h.dim_w();
    let mut g = Matrix::zeros(w, w);
    for (b, off) in h.blocks().iter().zip(h.offsets()) {
        let d = b.dim();
        let ad = Matrix::identity(d).kron(&b.n.transpose()).sub_mat(&b.n.kron(&Matrix::identity(d)));
        let basis = mat_kernel(&ad);
        let mut tries = 0;
        let blk = loop {
            let mut v = vec![Qi::int(0); d * d];
            for k in &basis {
                let c = small_int(rng, 2);
                for (x, y) in v.iter_mut().zip(k) {
                    *x = x.add_ref(&c.mul_ref(y));
                }
            }
            let m = Matrix::from_vec(d, d, v).ok()?;
            if !det(&m).is_zero() {
                break m;
            }
            tries += 1;
            if tries > 50 {
                return None;
            }
        };
        g.set_block(off, off, &blk);
    }
    Some(g)
}

/// Fuchsian connection whose `κ` has invertible `PQ`.
pub fn invertible_pq_instance<R: Rng>(rng: &mut R) -> (ConnectionS<Qi>, HObject<Qi>, Matrix<Qi>) {
    loop {
        let n = rng.gen_range(1..=3);
        let np = rng.gen_range(2..=3);
        let poles = distinct_positions(rng, np)
            .into_iter()
            .map(|t| {
                let r = rng.gen_range(1..=n);
                let m = random_int_matrix(rng, n, r, 1).mul_mat(&random_int_matrix(rng, r, n, 1));
                Pole { position: t, coeffs: vec![m] }
            })
            .collect();
        let Ok(a) = ConnectionS::new(n, Matrix::zeros(n, n), poles) else { continue };
        if a.poles().len() < 2 {
            continue;
        }
        let Ok(h) = crate::kappa::kappa(&a) else { continue };
        let pq = h.p_matrix().mul_mat(&h.q_matrix());
        if !det(&pq).is_zero() {
            return (a, h, pq);
        }
    }
}

/// `g·(X, Y)` at `point` for a `g ∈ G̃(T)` drawn from `seed`; the closed
/// form itself without a seed.
pub fn seeded_state(f: &SingularityFamily, point: &[Qi], seed: Option<u64>) -> crate::error::Result<HObject<Qi>> {
    let h = f.closed_form(point)?;
    match seed {
        None => Ok(h),
        Some(s) => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(s);
            crate::moment::gtilde_act(&random_gtilde(&mut rng, &h), &h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_deterministic() {
        let a = random_connection(&mut ChaCha8Rng::seed_from_u64(9), 4, 3, 3);
        let b = random_connection(&mut ChaCha8Rng::seed_from_u64(9), 4, 3, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn generated_objects_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let a = random_irreducible(&mut rng, 3, 3, 2);
            assert!(is_irreducible_s(&a) && a.dim() >= 2);
            let nf = random_normal_form(&mut rng, 4, 4, true);
            assert!(nonresonance_check(&nf).unwrap());
            assert!(nf.order() <= 4);
            let f = random_family(&mut rng, true);
            assert!(f.is_fuchsian());
        }
    }
}
