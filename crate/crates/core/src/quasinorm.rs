//! Finite-dimensional ℓ_p codomain, `0 < p ≤ 1`.
//!
//! `‖v‖ = (Σ|v_i|^p)^(1/p)` is a p-norm: `‖v + w‖^p ≤ ‖v‖^p + ‖w‖^p`. As a
//! quasi-norm its modulus of concavity is `2^(1/p - 1)`, so the quasi-triangle
//! inequality `‖v + w‖ ≤ M(‖v‖ + ‖w‖)` holds with that `M`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Codomain `(R^dim, ‖·‖_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PNormSpace<T> {
    dim: usize,
    p: T,
    modulus: T,
}

impl<T: Scalar> PNormSpace<T> {
    pub fn new(dim: usize, p: T) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("codomain dimension must be at least 1"));
        }
        let modulus = modulus_of_concavity(p)?;
        Ok(Self { dim, p, modulus })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// Smallest `M` with `‖v + w‖ ≤ M(‖v‖ + ‖w‖)`.
    pub fn modulus(&self) -> T {
        self.modulus
    }

    pub fn zero(&self) -> CodomainVector<T> {
        CodomainVector::zeros(self.dim)
    }

    pub fn contains(&self, v: &CodomainVector<T>) -> bool {
        v.len() == self.dim
    }

    pub fn pnorm(&self, v: &CodomainVector<T>) -> Result<T> {
        if !self.contains(v) {
            return Err(invalid(format!(
                "vector of length {} does not belong to a space of dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(self.norm(v))
    }

    /// `pnorm` without the membership check. Callers guarantee the length.
    pub(crate) fn norm(&self, v: &CodomainVector<T>) -> T {
        if self.p == T::one() {
            return v.0.iter().fold(T::zero(), |acc, c| acc + c.abs());
        }
        let sum = v.0.iter().fold(T::zero(), |acc, c| acc + c.pow_abs(self.p));
        if sum == T::zero() {
            return T::zero();
        }
        sum.pow_abs(self.p.recip())
    }

    /// `‖v‖^p`, the quantity that is subadditive.
    pub fn pnorm_pow(&self, v: &CodomainVector<T>) -> Result<T> {
        if !self.contains(v) {
            return Err(invalid("dimension mismatch"));
        }
        Ok(v.0.iter().fold(T::zero(), |acc, c| acc + c.pow_abs(self.p)))
    }
}

/// `pnorm_eval` in free-function form.
pub fn pnorm_eval<T: Scalar>(space: &PNormSpace<T>, v: &CodomainVector<T>) -> Result<T> {
    space.pnorm(v)
}

/// `M = 2^(1/p - 1)`, exactly 1 for `p = 1`.
pub fn modulus_of_concavity<T: Scalar>(p: T) -> Result<T> {
    if !(p > T::zero() && p <= T::one()) {
        return Err(invalid(format!("exponent p = {p} outside (0, 1]")));
    }
    if p == T::one() {
        return Ok(T::one());
    }
    Ok(T::of(2.0).pow_abs(p.recip() - T::one()))
}

/// `Σ x_i^p - (Σ x_i)^p`, nonnegative for `0 < p ≤ 1` and `x_i ≥ 0`.
pub fn power_sum_residual<T: Scalar>(xs: &[T], p: T) -> Result<T> {
    if !(p > T::zero() && p <= T::one()) {
        return Err(invalid(format!("exponent p = {p} outside (0, 1]")));
    }
    if let Some(bad) = xs.iter().find(|x| !(**x >= T::zero())) {
        return Err(invalid(format!("negative or NaN entry {bad}")));
    }
    let sum_of_powers = xs.iter().fold(T::zero(), |acc, &x| acc + x.pow_abs(p));
    let total = xs.iter().fold(T::zero(), |acc, &x| acc + x);
    Ok(sum_of_powers - total.pow_abs(p))
}

/// Element of the codomain.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CodomainVector<T>(Vec<T>);

impl<T: Scalar> CodomainVector<T> {
    pub fn new(components: Vec<T>) -> Self {
        Self(components)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn scalar(v: T) -> Self {
        Self(vec![v])
    }

    pub fn components(&self) -> &[T] {
        &self.0
    }

    pub fn into_components(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self(self.0.iter().map(|&c| c * factor).collect())
    }

    /// `self + factor * other`, in place.
    pub fn add_scaled(&mut self, factor: T, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a = *a + factor * b;
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.lossy_f64()).collect()
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, c| acc.max(c.abs()))
    }
}

impl<T: Scalar> Add<&CodomainVector<T>> for &CodomainVector<T> {
    type Output = CodomainVector<T>;

    fn add(self, rhs: &CodomainVector<T>) -> CodomainVector<T> {
        debug_assert_eq!(self.len(), rhs.len());
        CodomainVector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a + b).collect())
    }
}

impl<T: Scalar> Sub<&CodomainVector<T>> for &CodomainVector<T> {
    type Output = CodomainVector<T>;

    fn sub(self, rhs: &CodomainVector<T>) -> CodomainVector<T> {
        debug_assert_eq!(self.len(), rhs.len());
        CodomainVector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a - b).collect())
    }
}

impl<T: Scalar> Add for CodomainVector<T> {
    type Output = CodomainVector<T>;

    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<T: Scalar> Sub for CodomainVector<T> {
    type Output = CodomainVector<T>;

    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<T: Scalar> Mul<T> for &CodomainVector<T> {
    type Output = CodomainVector<T>;

    fn mul(self, rhs: T) -> CodomainVector<T> {
        self.scaled(rhs)
    }
}

impl<T: Scalar> Mul<T> for CodomainVector<T> {
    type Output = CodomainVector<T>;

    fn mul(self, rhs: T) -> CodomainVector<T> {
        self.scaled(rhs)
    }
}

impl<T: Scalar> Neg for CodomainVector<T> {
    type Output = CodomainVector<T>;

    fn neg(self) -> Self {
        Self(self.0.into_iter().map(|c| -c).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> CodomainVector<f64> {
        CodomainVector::new(xs.to_vec())
    }

    #[test]
    fn pnorm_examples() {
        let l1 = PNormSpace::new(2, 1.0).unwrap();
        assert_eq!(l1.pnorm(&v(&[3.0, 4.0])).unwrap(), 7.0);

        let half = PNormSpace::new(2, 0.5).unwrap();
        assert!((half.pnorm(&v(&[1.0, 1.0])).unwrap() - 4.0).abs() < 1e-15);

        let half3 = PNormSpace::new(3, 0.5).unwrap();
        assert_eq!(half3.pnorm(&v(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn pnorm_rejects_wrong_dimension() {
        let s = PNormSpace::new(2, 1.0).unwrap();
        assert!(s.pnorm(&v(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn modulus_examples() {
        assert_eq!(modulus_of_concavity(1.0).unwrap(), 1.0);
        assert!((modulus_of_concavity(0.5f64).unwrap() - 2.0).abs() < 1e-15);
        assert!((modulus_of_concavity(1.0f64 / 3.0).unwrap() - 4.0).abs() < 1e-14);
        assert!(modulus_of_concavity(0.0).is_err());
        assert!(modulus_of_concavity(1.5).is_err());
        assert!(modulus_of_concavity(f64::NAN).is_err());
    }

    #[test]
    fn space_rejects_bad_parameters() {
        assert!(PNormSpace::new(0, 1.0).is_err());
        assert!(PNormSpace::new(2, -0.1).is_err());
        let s = PNormSpace::new(4, 0.25f64).unwrap();
        assert!((s.modulus() - 8.0).abs() < 1e-13);
    }

    #[test]
    fn power_sum_examples() {
        let r = power_sum_residual(&[1.0, 1.0], 0.5).unwrap();
        assert!((r - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(power_sum_residual(&[5.0], 0.7).unwrap(), 0.0);
        assert!(power_sum_residual(&[1.0, -1.0], 0.5).is_err());
        assert!(power_sum_residual(&[1.0], 0.0).is_err());
    }

    fn vec_pair(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-1e3..1e3f64, dim),
            prop::collection::vec(-1e3..1e3f64, dim),
        )
    }

    proptest! {
        #[test]
        fn p_norm_inequality(p in 0.05..=1.0f64, (a, b) in vec_pair(3)) {
            let s = PNormSpace::new(3, p).unwrap();
            let (a, b) = (v(&a), v(&b));
            let lhs = s.pnorm(&(&a + &b)).unwrap().powf(p);
            let rhs = s.pnorm(&a).unwrap().powf(p) + s.pnorm(&b).unwrap().powf(p);
            prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn quasi_triangle(p in 0.05..=1.0f64, (a, b) in vec_pair(4)) {
            let s = PNormSpace::new(4, p).unwrap();
            let (a, b) = (v(&a), v(&b));
            let lhs = s.pnorm(&(&a + &b)).unwrap();
            let rhs = s.modulus() * (s.pnorm(&a).unwrap() + s.pnorm(&b).unwrap());
            prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn homogeneity(p in 0.05..=1.0f64, lam in -50.0..50.0f64, (a, _) in vec_pair(2)) {
            let s = PNormSpace::new(2, p).unwrap();
            let a = v(&a);
            let lhs = s.pnorm(&a.scaled(lam)).unwrap();
            let rhs = lam.abs() * s.pnorm(&a).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn power_sum_nonnegative(p in 0.01..=1.0f64, xs in prop::collection::vec(0.0..10.0f64, 1..100)) {
            prop_assert!(power_sum_residual(&xs, p).unwrap() >= -1e-12);
        }
    }
}
