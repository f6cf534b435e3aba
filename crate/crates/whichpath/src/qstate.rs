//! Pointer-state algebra.
//!
//! The internal degree of freedom carried by the particle is an
//! [`AncillaVector`]: an ordered list of complex amplitudes over a fixed
//! basis whose first two entries are the undisturbed pointer state `phi`
//! (index 0) and its distinguished orthogonal partner `phi_perp` (index 1).
//! The full state of the particle inside the interferometer is a
//! [`JointState`], a map from live path labels to the (unnormalized)
//! ancilla vector travelling on each path.
//!
//! Everything a circuit does to the pointer is a [`TwoLevelOp`], a 2x2
//! complex matrix applied to a chosen pair of components. The probe
//! rotation, its generator, and the sign-flip device are provided as named
//! constructors.

use std::collections::BTreeMap;

use num_complex::Complex;
use thiserror::Error;

use crate::{PathLabel, Scalar};

/// Component index of the undisturbed pointer state.
pub const PHI: usize = 0;
/// Component index of the orthogonal pointer state excited by a probe.
pub const PHI_PERP: usize = 1;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("ancilla dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unknown path label `{0}`")]
    UnknownPath(String),
}

/// Ordered complex amplitudes of the pointer degree of freedom.
///
/// The dimension is at least 2 and stays fixed for the lifetime of a
/// scenario; dimension 2 is the default everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct AncillaVector<T: Scalar> {
    components: Vec<Complex<T>>,
}

impl<T: Scalar> AncillaVector<T> {
    /// The zero vector of the given dimension.
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 2, "ancilla dimension must be at least 2");
        Self {
            components: vec![Complex::new(T::zero(), T::zero()); dim],
        }
    }

    /// Basis vector `k` of the given dimension.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zero(dim);
        assert!(k < dim, "basis index out of range");
        v.components[k] = Complex::new(T::one(), T::zero());
        v
    }

    /// The undisturbed pointer state.
    pub fn phi(dim: usize) -> Self {
        Self::basis(dim, PHI)
    }

    /// The orthogonal pointer state a probe rotates into.
    pub fn phi_perp(dim: usize) -> Self {
        Self::basis(dim, PHI_PERP)
    }

    pub fn from_components(components: Vec<Complex<T>>) -> Self {
        assert!(
            components.len() >= 2,
            "ancilla dimension must be at least 2"
        );
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> Complex<T> {
        self.components[k]
    }

    pub fn components(&self) -> &[Complex<T>] {
        &self.components
    }

    /// Squared Euclidean norm.
    pub fn norm2(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        Self {
            components: self.components.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, StateError> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Applies a 2x2 operator to components `(i, j)`, leaving the rest
    /// untouched.
    pub fn apply_two_level(&mut self, op: &TwoLevelOp<T>, i: usize, j: usize) {
        assert!(i < self.dim() && j < self.dim() && i != j);
        let a = self.components[i];
        let b = self.components[j];
        self.components[i] = op.m00 * a + op.m01 * b;
        self.components[j] = op.m10 * a + op.m11 * b;
    }

    /// Returns a copy with `op` applied to the `(phi, phi_perp)` pair.
    pub fn apply(&self, op: &TwoLevelOp<T>) -> Self {
        let mut out = self.clone();
        out.apply_two_level(op, PHI, PHI_PERP);
        out
    }
}

/// Inner product, conjugate-linear in the first argument.
pub fn inner<T: Scalar>(
    a: &AncillaVector<T>,
    b: &AncillaVector<T>,
) -> Result<Complex<T>, StateError> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.components
        .iter()
        .zip(&b.components)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        }))
}

fn check_dims(left: usize, right: usize) -> Result<(), StateError> {
    if left == right {
        Ok(())
    } else {
        Err(StateError::DimensionMismatch { left, right })
    }
}

/// A 2x2 complex matrix acting on a pair of ancilla components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelOp<T: Scalar> {
    pub m00: Complex<T>,
    pub m01: Complex<T>,
    pub m10: Complex<T>,
    pub m11: Complex<T>,
}

impl<T: Scalar> TwoLevelOp<T> {
    pub fn new(m00: Complex<T>, m01: Complex<T>, m10: Complex<T>, m11: Complex<T>) -> Self {
        Self { m00, m01, m10, m11 }
    }

    fn real(m00: T, m01: T, m10: T, m11: T) -> Self {
        let z = T::zero();
        Self::new(
            Complex::new(m00, z),
            Complex::new(m01, z),
            Complex::new(m10, z),
            Complex::new(m11, z),
        )
    }

    pub fn identity() -> Self {
        Self::real(T::one(), T::zero(), T::zero(), T::one())
    }

    /// The probe disturbance: a rotation by `epsilon` taking `phi` towards
    /// `phi_perp`.
    ///
    /// To first order this sends `phi` to `phi + epsilon * phi_perp`, and
    /// being unitary it preserves the total norm exactly.
    pub fn probe_rotation(epsilon: T) -> Self {
        let (s, c) = epsilon.sin_cos();
        Self::real(c, -s, s, c)
    }

    /// Derivative of [`Self::probe_rotation`] at zero angle.
    pub fn probe_generator() -> Self {
        Self::real(T::zero(), -T::one(), T::one(), T::zero())
    }

    /// The sign-flip device: leaves `phi` alone and negates `phi_perp`.
    pub fn pi_device() -> Self {
        Self::real(T::one(), T::zero(), T::zero(), -T::one())
    }

    /// True when the matrix is unitary within `tol` (checked via the four
    /// entries of `M* M - I`).
    pub fn is_unitary_within(&self, tol: T) -> bool {
        let g00 = self.m00.conj() * self.m00 + self.m10.conj() * self.m10;
        let g01 = self.m00.conj() * self.m01 + self.m10.conj() * self.m11;
        let g11 = self.m01.conj() * self.m01 + self.m11.conj() * self.m11;
        let one = Complex::new(T::one(), T::zero());
        (g00 - one).norm() <= tol && g01.norm() <= tol && (g11 - one).norm() <= tol
    }
}

/// Map from live path labels to the unnormalized ancilla vector on each.
///
/// The total squared norm starts at 1 and can only shrink, through blocks
/// or marker conditioning; unitary stages preserve it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointState<T: Scalar> {
    entries: BTreeMap<PathLabel, AncillaVector<T>>,
}

impl<T: Scalar> JointState<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, path: PathLabel, vector: AncillaVector<T>) {
        if let Some(existing) = self.entries.values().next() {
            debug_assert_eq!(existing.dim(), vector.dim(), "mixed ancilla dimensions");
        }
        self.entries.insert(path, vector);
    }

    pub fn remove(&mut self, path: &PathLabel) -> Option<AncillaVector<T>> {
        self.entries.remove(path)
    }

    pub fn entry(&self, path: &PathLabel) -> Option<&AncillaVector<T>> {
        self.entries.get(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &PathLabel> {
        self.entries.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PathLabel, &AncillaVector<T>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of squared norms over every path.
    pub fn total_norm2(&self) -> T {
        self.entries
            .values()
            .fold(T::zero(), |acc, v| acc + v.norm2())
    }

    /// Applies `op` to the `(i, j)` component pair of one path's vector.
    ///
    /// Every other entry is left untouched, bit for bit.
    pub fn apply_op(
        &mut self,
        path: &PathLabel,
        op: &TwoLevelOp<T>,
        i: usize,
        j: usize,
    ) -> Result<(), StateError> {
        let v = self
            .entries
            .get_mut(path)
            .ok_or_else(|| StateError::UnknownPath(path.as_str().to_owned()))?;
        v.apply_two_level(op, i, j);
        Ok(())
    }

    /// Multiplies one path's vector by a complex factor.
    pub fn scale(&mut self, path: &PathLabel, factor: Complex<T>) -> Result<(), StateError> {
        let v = self
            .entries
            .get_mut(path)
            .ok_or_else(|| StateError::UnknownPath(path.as_str().to_owned()))?;
        *v = v.scaled(factor);
        Ok(())
    }

    /// Replaces one path's vector with zero.
    pub fn set_zero(&mut self, path: &PathLabel) -> Result<(), StateError> {
        let v = self
            .entries
            .get_mut(path)
            .ok_or_else(|| StateError::UnknownPath(path.as_str().to_owned()))?;
        *v = AncillaVector::zero(v.dim());
        Ok(())
    }

    /// Zeroes every entry except `path`: the projection a conditioned
    /// marker performs. Renormalization is deferred to the analysis layer.
    pub fn project_onto(&mut self, path: &PathLabel) -> Result<(), StateError> {
        if !self.entries.contains_key(path) {
            return Err(StateError::UnknownPath(path.as_str().to_owned()));
        }
        let keep = path.clone();
        for (label, v) in self.entries.iter_mut() {
            if *label != keep {
                *v = AncillaVector::zero(v.dim());
            }
        }
        Ok(())
    }
}
