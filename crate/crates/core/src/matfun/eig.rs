//! Hermitian eigensolver: Householder reduction to a real tridiagonal
//! matrix followed by implicit QL with Wilkinson-type shifts.

use std::ops::Deref;

use num_traits::{One, Zero};

use super::cmatrix::CMat;
use crate::error::{Error, Result};
use crate::scalar::{cre, Real, C};

const MAX_QL_ITERATIONS: usize = 60;

/// Square matrix validated as Hermitian and stored exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix<T: Real>(CMat<T>);

/// Relative tolerance on `‖M - M^*‖_F` accepted by [`HermMatrix::new`].
pub fn hermitian_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

impl<T: Real> HermMatrix<T> {
    /// Validates `‖M - M^*‖_F ≤ tol (1 + ‖M‖_F)` and symmetrizes.
    pub fn new(m: CMat<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix of shape {:?}",
                m.shape()
            )));
        }
        let defect = m.hermitian_defect();
        if defect > hermitian_tolerance::<T>() * (T::one() + m.norm_fro()) {
            return Err(Error::NonHermitian {
                residual: defect.as_f64(),
            });
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Wraps the Hermitian part of `m` without validation.
    pub fn from_hermitian_part(m: &CMat<T>) -> Self {
        Self(m.hermitian_part())
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn from_real_diag(d: &[T]) -> Self {
        Self(CMat::from_real_diag(d))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_mat(&self) -> &CMat<T> {
        &self.0
    }

    pub fn into_mat(self) -> CMat<T> {
        self.0
    }

    pub fn scale(&self, s: T) -> Self {
        Self(self.0.scale_re(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `self + s I`.
    pub fn shift(&self, s: T) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.rows() {
            m[(i, i)] = m[(i, i)] + cre(s);
        }
        Self(m)
    }

    /// `A B A` for Hermitian `A`, `B`.
    pub fn sandwich(&self, inner: &Self) -> Self {
        Self::from_hermitian_part(&self.0.matmul(&inner.0).matmul(&self.0))
    }

    /// `X^* self X`.
    pub fn congruence(&self, x: &CMat<T>) -> Self {
        Self::from_hermitian_part(&x.adjoint().matmul(&self.0).matmul(x))
    }

    pub fn kron_identity(&self, n: usize) -> Self {
        Self(self.0.kron(&CMat::identity(n)))
    }

    pub fn identity_kron(&self, n: usize) -> Self {
        Self(CMat::identity(n).kron(&self.0))
    }
}

impl<T: Real> Deref for HermMatrix<T> {
    type Target = CMat<T>;
    fn deref(&self) -> &CMat<T> {
        &self.0
    }
}

/// `M = U diag(values) U^*` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct EigDecomp<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMat<T>,
}

impl<T: Real> EigDecomp<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U diag(d) U^*` for complex weights.
    pub fn compose(&self, d: &[C<T>]) -> CMat<T> {
        self.vectors.scale_cols(d).mul_adjoint(&self.vectors)
    }

    /// `U diag(f(λ)) U^*`; fails if `f` is not finite at some eigenvalue.
    pub fn apply(&self, f: impl Fn(T) -> T) -> Result<HermMatrix<T>> {
        let mut d = Vec::with_capacity(self.dim());
        for &l in &self.values {
            let v = f(l);
            if !v.is_finite() {
                return Err(Error::DomainError {
                    eigenvalue: l.as_f64(),
                });
            }
            d.push(cre(v));
        }
        Ok(HermMatrix::from_hermitian_part(&self.compose(&d)))
    }

    /// Complex-valued spectral calculus, e.g. resolvents at non-real points.
    pub fn apply_complex(&self, f: impl Fn(T) -> C<T>) -> Result<CMat<T>> {
        let mut d = Vec::with_capacity(self.dim());
        for &l in &self.values {
            let v = f(l);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::DomainError {
                    eigenvalue: l.as_f64(),
                });
            }
            d.push(v);
        }
        Ok(self.compose(&d))
    }

    pub fn reconstruct(&self) -> CMat<T> {
        let d: Vec<C<T>> = self.values.iter().map(|&l| cre(l)).collect();
        self.compose(&d)
    }

    pub fn max_abs_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Reduce to real symmetric tridiagonal form `M = Z T Z^*`.
/// Returns the diagonal, the subdiagonal (`e[i] = T[i, i-1]`, `e[0] = 0`)
/// and optionally `Z`.
fn tridiagonalize<T: Real>(m: &CMat<T>, want_vectors: bool) -> (Vec<T>, Vec<T>, Option<CMat<T>>) {
    let n = m.rows();
    let mut a = m.clone();
    let mut q = if want_vectors {
        Some(CMat::identity(n))
    } else {
        None
    };

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut tail_max = T::zero();
        for i in k + 2..n {
            tail_max = tail_max.max(a[(i, k)].norm());
        }
        if tail_max == T::zero() {
            continue;
        }
        // Work with the column scaled by its largest entry so squares of
        // tiny entries cannot underflow.
        let scale = tail_max.max(a[(k + 1, k)].norm());
        let x0 = a[(k + 1, k)] / scale;
        let mut tail = T::zero();
        for i in k + 2..n {
            tail += (a[(i, k)] / scale).norm_sqr();
        }
        let x0_abs = x0.norm();
        let alpha_abs = (x0_abs * x0_abs + tail).sqrt();
        let phase = if x0_abs > T::zero() {
            x0 / x0_abs
        } else {
            C::one()
        };
        let alpha = -(phase * (alpha_abs * scale));

        let mut v: Vec<C<T>> = (0..len).map(|i| a[(k + 1 + i, k)] / scale).collect();
        v[0] = phase * (x0_abs + alpha_abs);
        let vnorm2 = v[0].norm_sqr() + tail;
        let tau = T::lit(2.0) / vnorm2;

        // p = tau B v on the trailing block B = a[k+1.., k+1..].
        let mut p = vec![C::zero(); len];
        for i in 0..len {
            let row = k + 1 + i;
            let mut s = C::zero();
            for j in 0..len {
                s = s + a[(row, k + 1 + j)] * v[j];
            }
            p[i] = s * tau;
        }
        let vp = v
            .iter()
            .zip(&p)
            .fold(C::zero(), |acc, (&vi, &pi)| acc + vi.conj() * pi);
        let kk = vp * (tau * T::lit(0.5));
        let w: Vec<C<T>> = p.iter().zip(&v).map(|(&pi, &vi)| pi - kk * vi).collect();
        for i in 0..len {
            for j in 0..len {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                let e = &mut a[(k + 1 + i, k + 1 + j)];
                *e = *e - upd;
            }
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            a[(i, k)] = C::zero();
            a[(k, i)] = C::zero();
        }
        if let Some(q) = q.as_mut() {
            // q <- q H, H = I - tau v v^* acting on columns k+1..n.
            for r in 0..n {
                let mut s = C::zero();
                for j in 0..len {
                    s = s + q[(r, k + 1 + j)] * v[j];
                }
                let s = s * tau;
                if s.is_zero() {
                    continue;
                }
                for j in 0..len {
                    let e = &mut q[(r, k + 1 + j)];
                    *e = *e - s * v[j].conj();
                }
            }
        }
    }

    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    let mut phases = vec![C::<T>::one(); n];
    for i in 0..n {
        d[i] = a[(i, i)].re;
    }
    for i in 0..n.saturating_sub(1) {
        let s = a[(i + 1, i)];
        let s_abs = s.norm();
        e[i + 1] = s_abs;
        phases[i + 1] = if s_abs > T::zero() {
            s * phases[i] / s_abs
        } else {
            phases[i]
        };
    }
    let z = q.map(|q| q.scale_cols(&phases));
    (d, e, z)
}

/// Implicit QL on a real symmetric tridiagonal matrix, rotating the
/// columns of `z` along.
fn tql2<T: Real>(d: &mut [T], e: &mut [T], mut z: Option<&mut CMat<T>>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    // Deflate against the whole matrix so leading zero rows cannot shrink
    // the threshold to zero.
    let tst1 = d
        .iter()
        .zip(e.iter())
        .fold(T::zero(), |acc, (&di, &ei)| acc.max(di.abs() + ei.abs()));
    for l in 0..n {
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence { iterations: iter });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        for k in 0..n {
                            let hk = z[(k, i + 1)];
                            let zk = z[(k, i)];
                            z[(k, i + 1)] = zk * s + hk * c;
                            z[(k, i)] = zk * c - hk * s;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

fn sort_ascending<T: Real>(d: &mut [T], z: Option<&mut CMat<T>>) {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        d[i].partial_cmp(&d[j])
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let sorted: Vec<T> = order.iter().map(|&i| d[i]).collect();
    d.copy_from_slice(&sorted);
    if let Some(z) = z {
        let old = z.clone();
        for (new_col, &old_col) in order.iter().enumerate() {
            for r in 0..n {
                z[(r, new_col)] = old[(r, old_col)];
            }
        }
    }
}

/// Diagonal entries when every off-diagonal entry is exactly zero.
fn exact_diagonal<T: Real>(m: &CMat<T>) -> Option<Vec<T>> {
    let n = m.rows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != C::new(T::zero(), T::zero()) {
                return None;
            }
        }
    }
    Some((0..n).map(|i| m[(i, i)].re).collect())
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eig_herm<T: Real>(m: &HermMatrix<T>) -> Result<EigDecomp<T>> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    if let Some(mut d) = exact_diagonal(m.as_mat()) {
        let mut z = CMat::identity(d.len());
        sort_ascending(&mut d, Some(&mut z));
        return Ok(EigDecomp {
            values: d,
            vectors: z,
        });
    }
    let (mut d, mut e, z) = tridiagonalize(m.as_mat(), true);
    let mut z = z.expect("vectors requested");
    tql2(&mut d, &mut e, Some(&mut z))?;
    sort_ascending(&mut d, Some(&mut z));
    Ok(EigDecomp {
        values: d,
        vectors: z,
    })
}

/// Eigenvalues only, ascending.
pub fn eigvals_herm<T: Real>(m: &HermMatrix<T>) -> Result<Vec<T>> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    if let Some(mut d) = exact_diagonal(m.as_mat()) {
        sort_ascending(&mut d, None);
        return Ok(d);
    }
    let (mut d, mut e, _) = tridiagonalize(m.as_mat(), false);
    tql2(&mut d, &mut e, None)?;
    sort_ascending(&mut d, None);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn seeded(n: usize, salt: f64) -> HermMatrix<f64> {
        let a = CMat::from_fn(n, n, |i, j| {
            let t = (i * n + j) as f64 + salt;
            cx((1.3 * t).sin(), (0.7 * t + 0.4).cos())
        });
        HermMatrix::from_hermitian_part(&a)
    }

    #[test]
    fn diagonal_is_sorted() {
        let m = HermMatrix::from_real_diag(&[3.0, 1.0]);
        let e = eig_herm(&m).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
    }

    #[test]
    fn zero_rows_with_subnormal_coupling_converge() {
        // Zero leading rows, then a block whose couplings decay to ~1e-300.
        let n = 12;
        let m = CMat::from_fn(n, n, |i, j| {
            if i < 4 || j < 4 {
                return cx(0.0, 0.0);
            }
            match i.abs_diff(j) {
                0 => cx(0.0, 0.0),
                1 => {
                    let k = i.min(j) as i32 - 4;
                    cx(0.0, 10f64.powi(-40 * k)).scale(if i > j { 1.0 } else { -1.0 })
                }
                _ => cx(0.0, 0.0),
            }
        });
        let h = HermMatrix::new(m).unwrap();
        let e = eig_herm(&h).unwrap();
        assert!(e.values.iter().all(|v| v.is_finite()));
        let rec = e.reconstruct();
        assert!((&rec - h.as_mat()).max_abs() < 1e-14);
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = eig_herm(&HermMatrix::<f64>::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for n in [1, 2, 3, 7, 16] {
            let m = seeded(n, n as f64);
            let e = eig_herm(&m).unwrap();
            let scale = 1.0 + m.norm_fro();
            assert!((&e.reconstruct() - m.as_mat()).norm_fro() < 1e-12 * scale);
            let g = &e.vectors.adjoint_mul(&e.vectors) - &CMat::identity(n);
            assert!(g.norm_fro() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn values_only_agree_with_full() {
        let m = seeded(9, 0.25);
        let a = eig_herm(&m).unwrap().values;
        let b = eigvals_herm(&m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMat::<f64>::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(
            HermMatrix::new(m),
            Err(Error::NonHermitian { .. })
        ));
    }

    #[test]
    fn single_precision_instance() {
        let m: HermMatrix<f32> = HermMatrix::from_hermitian_part(&seeded(6, 1.5).cast::<f32>());
        let e = eig_herm(&m).unwrap();
        assert!((&e.reconstruct() - m.as_mat()).norm_fro() < 1e-4);
    }
}
