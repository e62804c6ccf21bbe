//! Lower estimates for the norms of amplifications `φ ⊗ id_n` of a linear
//! map on a full matrix algebra.
//!
//! The unit ball of `M_n(M_a)` is the closed convex hull of its unitaries,
//! so `‖φ_n‖` is the supremum of `‖φ_n(U)‖` over unitary `U`. For fixed
//! unit vectors `u, v` the best unitary is the polar part of
//! `φ_n^†(u v^*)`, and for fixed `U` the best vectors are the top singular
//! pair of `φ_n(U)`. Alternating the two steps increases the objective
//! monotonically.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::matfun::{eig_herm, CMat, HermMatrix};
use crate::random::{random_unitary, rng};
use crate::scalar::{dot, Real, C};

/// Linear map `M_a → M_{r,c}` given by the images of the matrix units.
#[derive(Clone, Debug)]
pub struct LinearMap<T: Real> {
    source_k: usize,
    images: Vec<CMat<T>>,
}

impl<T: Real> LinearMap<T> {
    pub fn new(source_k: usize, images: Vec<CMat<T>>) -> Result<Self> {
        if images.len() != source_k * source_k || source_k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} images for M_{}",
                images.len(),
                source_k
            )));
        }
        let shape = images[0].shape();
        if images.iter().any(|m| m.shape() != shape) {
            return Err(Error::DimensionMismatch("images of unequal shape".into()));
        }
        Ok(Self { source_k, images })
    }

    pub fn from_fn(source_k: usize, f: impl Fn(&CMat<T>) -> CMat<T>) -> Result<Self> {
        Self::new(
            source_k,
            super::MatrixAlgebra::new(source_k)
                .units()
                .iter()
                .map(f)
                .collect(),
        )
    }

    pub fn source_k(&self) -> usize {
        self.source_k
    }

    pub fn target_shape(&self) -> (usize, usize) {
        self.images[0].shape()
    }

    pub fn apply(&self, x: &CMat<T>) -> CMat<T> {
        self.amplify(1, x)
    }

    /// `(id_n ⊗ φ)(X)` for `X ∈ M_n(M_a)`.
    pub fn amplify(&self, n: usize, x: &CMat<T>) -> CMat<T> {
        let a = self.source_k;
        let (r, c) = self.target_shape();
        assert_eq!(x.shape(), (n * a, n * a), "amplify: argument shape");
        let mut out = CMat::zeros(n * r, n * c);
        for p in 0..n {
            for q in 0..n {
                for i in 0..a {
                    for j in 0..a {
                        let s = x[(p * a + i, q * a + j)];
                        if s.is_zero() {
                            continue;
                        }
                        let img = &self.images[i * a + j];
                        for u in 0..r {
                            for v in 0..c {
                                let e = &mut out[(p * r + u, q * c + v)];
                                *e = *e + s * img[(u, v)];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`Self::amplify`] for the trace pairing.
    pub fn amplify_adjoint(&self, n: usize, y: &CMat<T>) -> CMat<T> {
        let a = self.source_k;
        let (r, c) = self.target_shape();
        assert_eq!(y.shape(), (n * r, n * c), "amplify_adjoint: argument shape");
        let mut out = CMat::zeros(n * a, n * a);
        for p in 0..n {
            for q in 0..n {
                for i in 0..a {
                    for j in 0..a {
                        let img = &self.images[i * a + j];
                        let mut s = C::zero();
                        for u in 0..r {
                            for v in 0..c {
                                s = s + img[(u, v)].conj() * y[(p * r + u, q * c + v)];
                            }
                        }
                        out[(p * a + i, q * a + j)] = s;
                    }
                }
            }
        }
        out
    }
}

/// Search effort for [`cb_norm_estimate`].
#[derive(Clone, Copy, Debug)]
pub struct CbOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for CbOptions {
    fn default() -> Self {
        Self {
            restarts: 6,
            max_iter: 200,
            seed: 0x5eed,
        }
    }
}

/// Top singular value with a right and left singular vector.
fn top_singular<T: Real>(y: &CMat<T>) -> Result<(T, Vec<C<T>>, Vec<C<T>>)> {
    let g = HermMatrix::from_hermitian_part(&y.adjoint_mul(y));
    let e = eig_herm(&g)?;
    let last = e.dim() - 1;
    let sigma = e.values[last].max(T::zero()).sqrt();
    let v = e.vectors.col(last);
    let yv = y.mul_vec(&v);
    let u = if sigma > T::zero() {
        yv.iter().map(|&z| z / sigma).collect()
    } else {
        yv
    };
    Ok((sigma, u, v))
}

/// A unitary `U` maximizing `Re tr(W^* U)`.
fn polar_unitary<T: Real>(w: &CMat<T>) -> Result<CMat<T>> {
    let n = w.rows();
    let e = eig_herm(&HermMatrix::from_hermitian_part(&w.adjoint_mul(w)))?;
    let top = e.max_abs_value();
    let cut = top * T::lit(1e-14);
    let mut left: Vec<Vec<C<T>>> = Vec::new();
    let mut right: Vec<Vec<C<T>>> = Vec::new();
    let mut deficient: Vec<Vec<C<T>>> = Vec::new();
    for idx in (0..n).rev() {
        let v = e.vectors.col(idx);
        if e.values[idx] > cut && top > T::zero() {
            let s = e.values[idx].sqrt();
            let cand: Vec<C<T>> = w.mul_vec(&v).into_iter().map(|z| z / s).collect();
            if let Some(q) = orthonormal_residual(&left, cand) {
                left.push(q);
                right.push(v);
                continue;
            }
        }
        deficient.push(v);
    }
    // Complete the left system to an orthonormal basis.
    for basis_idx in 0..n {
        if left.len() == n {
            break;
        }
        let mut cand = vec![C::zero(); n];
        cand[basis_idx] = C::one();
        if let Some(q) = orthonormal_residual(&left, cand) {
            left.push(q);
        }
    }
    right.extend(deficient);
    let mut u = CMat::zeros(n, n);
    for (l, r) in left.iter().zip(&right) {
        for i in 0..n {
            for j in 0..n {
                u[(i, j)] = u[(i, j)] + l[i] * r[j].conj();
            }
        }
    }
    Ok(u)
}

/// Gram-Schmidt step against an orthonormal family; `None` if the
/// candidate is numerically dependent.
fn orthonormal_residual<T: Real>(family: &[Vec<C<T>>], mut v: Vec<C<T>>) -> Option<Vec<C<T>>> {
    let before = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    for _ in 0..2 {
        for q in family {
            let proj = dot(q, &v);
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi = *vi - proj * qi;
            }
        }
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    if !(norm > T::lit(1e-3) * before) || norm == T::zero() {
        return None;
    }
    Some(v.into_iter().map(|z| z / norm).collect())
}

fn climb<T: Real>(
    phi: &LinearMap<T>,
    n: usize,
    start: CMat<T>,
    max_iter: usize,
) -> Result<(T, CMat<T>)> {
    let mut u = start;
    let (mut sigma, mut left, mut right) = top_singular(&phi.amplify(n, &u))?;
    for _ in 0..max_iter {
        if sigma == T::zero() {
            break;
        }
        let rank_one = CMat::from_fn(left.len(), right.len(), |i, j| left[i] * right[j].conj());
        let cand = polar_unitary(&phi.amplify_adjoint(n, &rank_one))?;
        let (s, l, r) = top_singular(&phi.amplify(n, &cand))?;
        if s <= sigma * (T::one() + T::lit(1e-14)) {
            if s > sigma {
                sigma = s;
                u = cand;
            }
            break;
        }
        sigma = s;
        u = cand;
        left = l;
        right = r;
    }
    Ok((sigma, u))
}

/// Estimates of `‖φ ⊗ id_n‖` for `n = 1..=max_level`. Each level is seeded
/// with the optimizer of the previous one embedded as `U ⊕ 1`, so the list
/// is nondecreasing and every entry is attained by an explicit unitary.
pub fn cb_norm_estimate<T: Real>(
    phi: &LinearMap<T>,
    max_level: usize,
    opts: CbOptions,
) -> Result<Vec<T>> {
    let a = phi.source_k();
    let mut r = rng(opts.seed);
    let mut out = Vec::with_capacity(max_level);
    let mut best_prev: Option<CMat<T>> = None;
    for n in 1..=max_level {
        let dim = n * a;
        let mut starts = vec![CMat::identity(dim)];
        if let Some(prev) = &best_prev {
            starts.push(prev.direct_sum(&CMat::identity(a)));
        }
        for _ in 0..opts.restarts {
            starts.push(random_unitary(&mut r, dim));
        }
        let mut best = T::neg_infinity();
        let mut best_u = CMat::identity(dim);
        for s in starts {
            let (v, u) = climb(phi, n, s, opts.max_iter)?;
            if v > best {
                best = v;
                best_u = u;
            }
        }
        if let Some(&last) = out.last() {
            best = best.max(last);
        }
        out.push(best);
        best_prev = Some(best_u);
    }
    Ok(out)
}
