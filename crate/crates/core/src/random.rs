//! Seeded generators for test data. ChaCha streams keep every draw
//! reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matfun::{op_norm, CMat, HermMatrix};
use crate::scalar::{cre, cx, dot, Real, C};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<T: Real>(rng: &mut SeededRng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Entries with independent standard normal real and imaginary parts scaled
/// by `1/sqrt(2)`.
pub fn gaussian_matrix<T: Real>(rng: &mut SeededRng, rows: usize, cols: usize) -> CMat<T> {
    let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    CMat::from_fn(rows, cols, |_, _| {
        cx(normal::<T>(rng) * s, normal::<T>(rng) * s)
    })
}

/// Haar-distributed unitary via Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<T: Real>(rng: &mut SeededRng, n: usize) -> CMat<T> {
    let g = gaussian_matrix::<T>(rng, n, n);
    let mut cols: Vec<Vec<C<T>>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.col(j);
        for _ in 0..2 {
            for q in &cols {
                let proj = dot(q, &v);
                for (vi, &qi) in v.iter_mut().zip(q) {
                    *vi = *vi - proj * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        for vi in v.iter_mut() {
            *vi = *vi / norm;
        }
        cols.push(v);
    }
    CMat::from_fn(n, n, |i, j| cols[j][i])
}

/// Hermitian matrix with operator norm `radius`.
pub fn random_hermitian<T: Real>(rng: &mut SeededRng, n: usize, radius: T) -> HermMatrix<T> {
    let a = gaussian_matrix::<T>(rng, n, n).hermitian_part();
    let norm = op_norm(&a);
    let s = if norm > T::zero() {
        radius / norm
    } else {
        T::zero()
    };
    HermMatrix::from_hermitian_part(&a.scale_re(s))
}

/// `U diag(values) U^*` with Haar `U`.
pub fn random_with_spectrum<T: Real>(rng: &mut SeededRng, values: &[T]) -> HermMatrix<T> {
    let u = random_unitary::<T>(rng, values.len());
    HermMatrix::from_hermitian_part(
        &u.scale_cols(&values.iter().map(|&v| cre(v)).collect::<Vec<_>>())
            .mul_adjoint(&u),
    )
}

/// Samples log-uniformly from `[lo, hi]`.
pub fn log_uniform<T: Real>(rng: &mut SeededRng, lo: T, hi: T) -> T {
    let u = T::lit(rng.gen::<f64>());
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// Positive definite matrix with spectrum log-uniform in `[hi/cond, hi]`;
/// `cond == 1` gives exactly `hi I`.
pub fn random_positive<T: Real>(rng: &mut SeededRng, n: usize, hi: T, cond: T) -> HermMatrix<T> {
    if cond <= T::one() {
        return HermMatrix::identity(n).scale(hi);
    }
    let values: Vec<T> = (0..n).map(|_| log_uniform(rng, hi / cond, hi)).collect();
    random_with_spectrum(rng, &values)
}
