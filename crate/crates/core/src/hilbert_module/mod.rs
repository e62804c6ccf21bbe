//! Hilbert C*-modules over full matrix algebras.
//!
//! The module `M_{p,k}(ℂ)` over `B = M_k(ℂ)` carries the inner product
//! `⟨x, y⟩ = x^* y` and right multiplication. Its adjointable operators are
//! the `p × p` matrices acting on the left. Interior tensor products are
//! built on an explicit quotient of the algebraic tensor product by the
//! null space of the scalarized Gram form.

mod cb;
mod tensor;

pub use cb::{cb_norm_estimate, CbOptions, LinearMap};
pub use tensor::{creation_op, interior_tensor, localize, Localization, TensorModule};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::matfun::{CMat, HermMatrix};
use crate::scalar::{Real, C};

/// Relative tolerance for the *-representation relations.
const REP_TOL: f64 = 1e-10;

/// The C*-algebra `M_k(ℂ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixAlgebra {
    pub k: usize,
}

impl MatrixAlgebra {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    /// Complex dimension `k^2`.
    pub fn dim(&self) -> usize {
        self.k * self.k
    }

    /// Matrix unit `E_ij`.
    pub fn unit<T: Real>(&self, i: usize, j: usize) -> CMat<T> {
        let mut e = CMat::zeros(self.k, self.k);
        e[(i, j)] = C::one();
        e
    }

    /// All matrix units in row-major order.
    pub fn units<T: Real>(&self) -> Vec<CMat<T>> {
        (0..self.k)
            .flat_map(|i| (0..self.k).map(move |j| (i, j)))
            .map(|(i, j)| self.unit(i, j))
            .collect()
    }
}

/// Right Hilbert module `M_{p,k}(ℂ)` over `M_k(ℂ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertModule {
    /// Number of rows `p`; adjointable operators are `p × p`.
    pub rows: usize,
    pub algebra: MatrixAlgebra,
}

impl HilbertModule {
    pub fn new(rows: usize, k: usize) -> Self {
        Self {
            rows,
            algebra: MatrixAlgebra::new(k),
        }
    }

    /// The algebra as a module over itself.
    pub fn standard(k: usize) -> Self {
        Self::new(k, k)
    }

    /// Hilbert space `ℂ^n` as a module over `ℂ`.
    pub fn hilbert_space(n: usize) -> Self {
        Self::new(n, 1)
    }

    pub fn k(&self) -> usize {
        self.algebra.k
    }

    /// Complex dimension `p k`.
    pub fn ambient_dim(&self) -> usize {
        self.rows * self.algebra.k
    }

    pub fn check_element<T: Real>(&self, x: &CMat<T>) -> Result<()> {
        if x.shape() != (self.rows, self.k()) {
            return Err(Error::DimensionMismatch(format!(
                "module element of shape {:?}, expected {:?}",
                x.shape(),
                (self.rows, self.k())
            )));
        }
        Ok(())
    }

    /// `⟨x, y⟩ = x^* y ∈ M_k`.
    pub fn inner<T: Real>(&self, x: &CMat<T>, y: &CMat<T>) -> CMat<T> {
        x.adjoint_mul(y)
    }

    /// `x · b`.
    pub fn right_action<T: Real>(&self, x: &CMat<T>, b: &CMat<T>) -> CMat<T> {
        x.matmul(b)
    }

    /// Module norm `‖⟨x, x⟩‖^{1/2}`.
    pub fn norm<T: Real>(&self, x: &CMat<T>) -> T {
        crate::matfun::op_norm(x)
    }

    /// Row-major flattening, index `a k + b` for entry `(a, b)`.
    pub fn vectorize<T: Real>(&self, x: &CMat<T>) -> Vec<C<T>> {
        x.as_slice().to_vec()
    }

    pub fn unvectorize<T: Real>(&self, v: &[C<T>]) -> CMat<T> {
        CMat::from_vec(self.rows, self.k(), v.to_vec()).expect("length p k")
    }

    /// Matrix of an adjointable operator `T ∈ M_p` on the flattened module.
    pub fn operator_on_ambient<T: Real>(&self, t: &CMat<T>) -> CMat<T> {
        t.kron(&CMat::identity(self.k()))
    }
}

/// Truncated standard module `ℓ²_N(Y) = Y^N`, realized as `M_{Np,k}`.
pub fn std_module_trunc(y: &HilbertModule, n: usize) -> HilbertModule {
    HilbertModule::new(n * y.rows, y.k())
}

/// Inclusion of the `i`-th summand `Y → ℓ²_N(Y)`.
pub fn std_module_inject<T: Real>(y: &HilbertModule, n: usize, i: usize, x: &CMat<T>) -> CMat<T> {
    let mut out = CMat::zeros(n * y.rows, y.k());
    out.set_block(i * y.rows, 0, x);
    out
}

/// Block-diagonal lift `T ↦ diag(T, ..., T)` on `ℓ²_N(Y)`.
pub fn diag_lift<T: Real>(t: &CMat<T>, n: usize) -> CMat<T> {
    t.block_diag_repeat(n)
}

/// Hermitian variant of [`diag_lift`].
pub fn diag_lift_herm<T: Real>(t: &HermMatrix<T>, n: usize) -> HermMatrix<T> {
    t.identity_kron(n)
}

/// *-representation `π : M_k → M_q` stored through the images of the
/// matrix units.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation<T: Real> {
    source: MatrixAlgebra,
    target_dim: usize,
    images: Vec<CMat<T>>,
}

impl<T: Real> Representation<T> {
    /// Validates `π(E_ij)^* = π(E_ji)` and `π(E_ij) π(E_lm) = δ_jl π(E_im)`.
    pub fn new(k: usize, images: Vec<CMat<T>>) -> Result<Self> {
        if images.len() != k * k || k == 0 {
            return Err(Error::NotRepresentation {
                residual: f64::INFINITY,
            });
        }
        let q = images[0].rows();
        if images.iter().any(|m| m.shape() != (q, q)) {
            return Err(Error::NotRepresentation {
                residual: f64::INFINITY,
            });
        }
        let rep = Self {
            source: MatrixAlgebra::new(k),
            target_dim: q,
            images,
        };
        let residual = rep.relation_residual();
        if !(residual <= T::lit(REP_TOL)) {
            return Err(Error::NotRepresentation {
                residual: residual.as_f64(),
            });
        }
        Ok(rep)
    }

    /// Builds from an arbitrary linear map on matrix units.
    pub fn from_fn(k: usize, f: impl Fn(&CMat<T>) -> CMat<T>) -> Result<Self> {
        let alg = MatrixAlgebra::new(k);
        Self::new(k, alg.units().iter().map(f).collect())
    }

    /// Identity representation of `M_k` on `ℂ^k`.
    pub fn identity(k: usize) -> Self {
        Self {
            source: MatrixAlgebra::new(k),
            target_dim: k,
            images: MatrixAlgebra::new(k).units(),
        }
    }

    /// `b ↦ U (b ⊗ 1_m) U^*` on `ℂ^{k m}`.
    pub fn conjugated_ampliation(k: usize, m: usize, u: &CMat<T>) -> Result<Self> {
        let id = CMat::identity(m);
        Self::from_fn(k, |e| u.matmul(&e.kron(&id)).mul_adjoint(u))
    }

    pub fn source(&self) -> MatrixAlgebra {
        self.source
    }

    pub fn k(&self) -> usize {
        self.source.k
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn images(&self) -> &[CMat<T>] {
        &self.images
    }

    pub fn image(&self, i: usize, j: usize) -> &CMat<T> {
        &self.images[i * self.k() + j]
    }

    /// `π(b) = Σ b_ij π(E_ij)`.
    pub fn apply(&self, b: &CMat<T>) -> CMat<T> {
        let k = self.k();
        assert_eq!(b.shape(), (k, k), "representation: argument shape");
        let mut out = CMat::zeros(self.target_dim, self.target_dim);
        for i in 0..k {
            for j in 0..k {
                let c = b[(i, j)];
                if c.is_zero() {
                    continue;
                }
                out = &out + &self.image(i, j).scale(c);
            }
        }
        out
    }

    /// Largest violation of the matrix-unit relations, relative to the
    /// largest image norm.
    pub fn relation_residual(&self) -> T {
        let k = self.k();
        let scale = self
            .images
            .iter()
            .fold(T::one(), |m, x| m.max(x.norm_fro()));
        let mut worst = T::zero();
        for i in 0..k {
            for j in 0..k {
                let a = self.image(i, j);
                worst = worst.max((&a.adjoint() - self.image(j, i)).norm_fro());
                for l in 0..k {
                    for m in 0..k {
                        let prod = a.matmul(self.image(l, m));
                        let expect = if j == l {
                            self.image(i, m).clone()
                        } else {
                            CMat::zeros(self.target_dim, self.target_dim)
                        };
                        worst = worst.max((&prod - &expect).norm_fro());
                    }
                }
            }
        }
        worst / scale
    }

    /// Stabilization `K(π)` on `ℓ²_N`: the matrix unit `E_{(n,i),(m,j)}` of
    /// `M_N(M_k)` acts as `π(E_ij)` in block `(n, m)`.
    pub fn stabilize(&self, n: usize) -> Representation<T> {
        let k = self.k();
        let q = self.target_dim;
        let kk = n * k;
        let mut images = Vec::with_capacity(kk * kk);
        for a in 0..kk {
            for b in 0..kk {
                let mut m = CMat::zeros(n * q, n * q);
                m.set_block((a / k) * q, (b / k) * q, self.image(a % k, b % k));
                images.push(m);
            }
        }
        Representation {
            source: MatrixAlgebra::new(kk),
            target_dim: n * q,
            images,
        }
    }

    /// `π(b) ⊗ 1_m`.
    pub fn ampliate(&self, m: usize) -> Representation<T> {
        let id = CMat::identity(m);
        Representation {
            source: self.source,
            target_dim: self.target_dim * m,
            images: self.images.iter().map(|x| x.kron(&id)).collect(),
        }
    }

    /// Unchecked constructor for images known to satisfy the relations.
    pub(crate) fn from_parts(k: usize, images: Vec<CMat<T>>) -> Self {
        let q = images.first().map_or(0, |m| m.rows());
        Self {
            source: MatrixAlgebra::new(k),
            target_dim: q,
            images,
        }
    }
}
