//! Interior tensor products and localization at a state.

use super::{HilbertModule, Representation};
use crate::error::{Error, Result};
use crate::matfun::{eig_herm, CMat, HermMatrix};
use crate::scalar::{cre, Real};

/// Eigenvalues of a Gram matrix below this fraction of the largest one are
/// treated as null vectors.
pub const KERNEL_TOL: f64 = 1e-10;

/// Orthonormal basis of the quotient of a Gram form by its null space:
/// `basis^* G basis = I` and `coords = basis^* G` sends ambient vectors to
/// quotient coordinates.
#[derive(Clone, Debug)]
struct GramQuotient<T: Real> {
    gram: HermMatrix<T>,
    basis: CMat<T>,
    coords: CMat<T>,
}

impl<T: Real> GramQuotient<T> {
    fn new(gram: HermMatrix<T>) -> Result<Self> {
        let e = eig_herm(&gram)?;
        let top = e.max_abs_value();
        let cut = T::lit(KERNEL_TOL) * top;
        let keep: Vec<usize> = (0..e.dim())
            .filter(|&i| e.values[i] > cut && top > T::zero())
            .collect();
        let n = gram.dim();
        let basis = CMat::from_fn(n, keep.len(), |r, c| {
            e.vectors[(r, keep[c])] / e.values[keep[c]].sqrt()
        });
        let coords = CMat::from_fn(keep.len(), n, |r, c| {
            e.vectors[(c, keep[r])].conj() * e.values[keep[r]].sqrt()
        });
        Ok(Self {
            gram,
            basis,
            coords,
        })
    }

    fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// Induced action of an ambient operator that preserves the null space.
    fn induced(&self, ambient_op: &CMat<T>) -> CMat<T> {
        self.coords.matmul(ambient_op).matmul(&self.basis)
    }
}

/// `X ⊗_B Y` for `X = M_{p,k}` over `M_k`, `Y = M_{q,k'}` over `M_{k'}` and
/// `π_B : M_k → M_q`. The result is again a module `M_{d,k'}`; elements
/// are `d × k'` coordinate matrices with respect to an orthonormal basis of
/// the quotient.
#[derive(Clone, Debug)]
pub struct TensorModule<T: Real> {
    pub x: HilbertModule,
    pub y: HilbertModule,
    pub rep: Representation<T>,
    quotient: GramQuotient<T>,
}

/// Builds `X ⊗_B Y`; the representation must act on the rows of `Y`.
pub fn interior_tensor<T: Real>(
    x: &HilbertModule,
    y: &HilbertModule,
    pi_b: &Representation<T>,
) -> Result<TensorModule<T>> {
    if pi_b.k() != x.k() || pi_b.target_dim() != y.rows {
        return Err(Error::NotRepresentation {
            residual: f64::INFINITY,
        });
    }
    let residual = pi_b.relation_residual();
    if !(residual <= T::lit(1e-10)) {
        return Err(Error::NotRepresentation {
            residual: residual.as_f64(),
        });
    }
    let k = x.k();
    let q = y.rows;
    // Block (b, b') of the per-row Gram is π(E_{b b'}); rows of X decouple.
    let mut per_row = CMat::zeros(k * q, k * q);
    for b in 0..k {
        for bp in 0..k {
            per_row.set_block(b * q, bp * q, pi_b.image(b, bp));
        }
    }
    let gram = HermMatrix::from_hermitian_part(&CMat::identity(x.rows).kron(&per_row));
    let quotient = GramQuotient::new(gram)?;
    Ok(TensorModule {
        x: *x,
        y: *y,
        rep: pi_b.clone(),
        quotient,
    })
}

impl<T: Real> TensorModule<T> {
    /// Number of rows `d` of the quotient module `M_{d,k'}`.
    pub fn dim(&self) -> usize {
        self.quotient.dim()
    }

    pub fn as_module(&self) -> HilbertModule {
        HilbertModule::new(self.dim(), self.y.k())
    }

    /// Dimension of the algebraic tensor product before the quotient.
    pub fn raw_dim(&self) -> usize {
        self.x.ambient_dim() * self.y.rows
    }

    pub fn gram(&self) -> &HermMatrix<T> {
        &self.quotient.gram
    }

    /// `d × raw` map from algebraic tensors to quotient coordinates.
    pub fn coords(&self) -> &CMat<T> {
        &self.quotient.coords
    }

    /// `raw × d` lift of quotient coordinates.
    pub fn basis(&self) -> &CMat<T> {
        &self.quotient.basis
    }

    /// Algebraic tensor `x ⊗ y` as a `raw × k'` matrix.
    pub fn raw_elementary(&self, x: &CMat<T>, y: &CMat<T>) -> CMat<T> {
        CMat::column(&self.x.vectorize(x)).kron(y)
    }

    /// Class of `x ⊗ y` in the quotient.
    pub fn elementary(&self, x: &CMat<T>, y: &CMat<T>) -> CMat<T> {
        self.coords().matmul(&self.raw_elementary(x, y))
    }

    /// `⟨w, w⟩` for an algebraic tensor, scalarized; zero on null vectors.
    pub fn raw_norm_sqr(&self, raw: &CMat<T>) -> T {
        raw.adjoint_mul(&self.quotient.gram.matmul(raw)).trace().re
    }

    /// Creation operator `T_ξ : Y → X ⊗_B Y`, `y ↦ ξ ⊗ y`, as a `d × q`
    /// matrix.
    pub fn creation_op(&self, xi: &CMat<T>) -> CMat<T> {
        self.coords()
            .matmul(&CMat::column(&self.x.vectorize(xi)).kron(&CMat::identity(self.y.rows)))
    }

    /// `T ⊗ 1` for an adjointable `T ∈ M_p` on `X`.
    pub fn lift_operator(&self, t: &CMat<T>) -> CMat<T> {
        let ambient = self
            .x
            .operator_on_ambient(t)
            .kron(&CMat::identity(self.y.rows));
        self.quotient.induced(&ambient)
    }

    /// `1 ⊗ S` for an operator `S` on `Y` commuting with `π_B(B)`.
    pub fn lift_coefficient_operator(&self, s: &CMat<T>) -> CMat<T> {
        let ambient = CMat::identity(self.x.ambient_dim()).kron(s);
        self.quotient.induced(&ambient)
    }

    /// Representation `a ↦ a ⊗ 1` of `M_p` on the quotient.
    pub fn left_representation(&self) -> Representation<T> {
        let p = self.x.rows;
        let images = super::MatrixAlgebra::new(p)
            .units()
            .iter()
            .map(|e| self.lift_operator(e))
            .collect();
        Representation::from_parts(p, images)
    }
}

/// Free-function form of [`TensorModule::creation_op`].
pub fn creation_op<T: Real>(tm: &TensorModule<T>, xi: &CMat<T>) -> CMat<T> {
    tm.creation_op(xi)
}

/// Localization `Y_ρ` of `Y = M_{q,k}` at the state `ρ` (a `k × k` density
/// matrix): the Hilbert space completion of `Y` for `tr(ρ ⟨x, y⟩)`.
#[derive(Clone, Debug)]
pub struct Localization<T: Real> {
    pub module: HilbertModule,
    quotient: GramQuotient<T>,
}

pub fn localize<T: Real>(y: &HilbertModule, rho: &CMat<T>) -> Result<Localization<T>> {
    let k = y.k();
    if rho.shape() != (k, k) {
        return Err(Error::NotState(format!(
            "density of shape {:?} on M_{}",
            rho.shape(),
            k
        )));
    }
    let h = HermMatrix::new(rho.clone()).map_err(|_| Error::NotState("not Hermitian".into()))?;
    let e = eig_herm(&h)?;
    if e.values[0] < T::lit(-1e-12) {
        return Err(Error::NotState(format!(
            "negative eigenvalue {}",
            e.values[0]
        )));
    }
    let tr = h.trace().re;
    if (tr - T::one()).abs() > T::lit(1e-10) {
        return Err(Error::NotState(format!("trace {tr}")));
    }
    let gram = HermMatrix::from_hermitian_part(&CMat::identity(y.rows).kron(&h.transpose()));
    Ok(Localization {
        module: *y,
        quotient: GramQuotient::new(gram)?,
    })
}

impl<T: Real> Localization<T> {
    pub fn dim(&self) -> usize {
        self.quotient.dim()
    }

    /// Class of a module element.
    pub fn embed(&self, x: &CMat<T>) -> Vec<crate::scalar::C<T>> {
        self.quotient.coords.mul_vec(&self.module.vectorize(x))
    }

    /// `T ⊗ 1` on `Y_ρ` for an adjointable `T ∈ M_q`.
    pub fn lift(&self, t: &CMat<T>) -> CMat<T> {
        self.quotient.induced(&self.module.operator_on_ambient(t))
    }

    /// `V^* G V`, the identity up to rounding.
    pub fn basis_gram(&self) -> CMat<T> {
        self.quotient
            .basis
            .adjoint_mul(&self.quotient.gram.matmul(&self.quotient.basis))
    }

    /// Scalar inner product of two embedded elements.
    pub fn inner(
        &self,
        u: &[crate::scalar::C<T>],
        v: &[crate::scalar::C<T>],
    ) -> crate::scalar::C<T> {
        u.iter()
            .zip(v)
            .fold(cre(T::zero()), |a, (&x, &y)| a + x.conj() * y)
    }
}
