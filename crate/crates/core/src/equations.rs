//! Residual operators for the functional equations involved in the
//! decomposition, the parity split, and grid verification.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quasinorm::{CodomainVector, PNormSpace};
use crate::scalar::Scalar;

/// The integer `k` of the mixed equation; `k ∉ {-1, 0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct EquationParams {
    k: i64,
}

impl EquationParams {
    pub fn new(k: i64) -> Result<Self> {
        if (-1..=1).contains(&k) {
            return Err(invalid(format!("k = {k} is excluded; need k ∉ {{-1, 0, 1}}")));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn k_as<T: Scalar>(&self) -> T {
        T::of_int(self.k)
    }

    /// `k²` as a scalar.
    pub fn k_sq<T: Scalar>(&self) -> T {
        let k = self.k_as::<T>();
        k * k
    }
}

impl TryFrom<i64> for EquationParams {
    type Error = crate::error::Error;

    fn try_from(k: i64) -> Result<Self> {
        Self::new(k)
    }
}

impl From<EquationParams> for i64 {
    fn from(p: EquationParams) -> i64 {
        p.k
    }
}

type EvalFn<T> = dyn Fn(T) -> CodomainVector<T> + Send + Sync;

/// Evaluable map from the real line into a p-normed codomain, normalised so
/// that `f(0) = 0`.
#[derive(Clone)]
pub struct FunctionHandle<T> {
    eval: Arc<EvalFn<T>>,
    space: PNormSpace<T>,
    offset: CodomainVector<T>,
}

impl<T: Scalar> FunctionHandle<T> {
    /// Wraps `f`, translating by `-f(0)` when `f(0) ≠ 0`. The applied offset
    /// is kept in [`FunctionHandle::offset`].
    pub fn new<F>(space: PNormSpace<T>, f: F) -> Result<Self>
    where
        F: Fn(T) -> CodomainVector<T> + Send + Sync + 'static,
    {
        let at_zero = f(T::zero());
        if at_zero.len() != space.dim() {
            return Err(invalid(format!(
                "function returns {} components, codomain has {}",
                at_zero.len(),
                space.dim()
            )));
        }
        if !at_zero.is_finite() {
            return Err(invalid("f(0) is not finite"));
        }
        if at_zero.is_zero() {
            return Ok(Self {
                eval: Arc::new(f),
                offset: space.zero(),
                space,
            });
        }
        let shift = at_zero.clone();
        Ok(Self {
            eval: Arc::new(move |x| &f(x) - &shift),
            offset: at_zero,
            space,
        })
    }

    /// Scalar-valued `f` in `(R, |·|)`.
    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        let space = PNormSpace::new(1, T::one()).expect("p = 1 is valid");
        Self::new(space, move |x| CodomainVector::scalar(f(x)))
            .expect("scalar closures always have one component")
    }

    /// `x ↦ a3·x³ + a2·x² + a1·x`, one coefficient triple per component.
    pub fn polynomial(space: PNormSpace<T>, coeffs: Vec<[T; 3]>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(invalid(format!(
                "{} coefficient triples for a {}-dimensional codomain",
                coeffs.len(),
                space.dim()
            )));
        }
        Self::new(space, move |x| {
            CodomainVector::new(
                coeffs
                    .iter()
                    .map(|&[a3, a2, a1]| ((a3 * x + a2) * x + a1) * x)
                    .collect(),
            )
        })
    }

    pub fn zero(space: PNormSpace<T>) -> Self {
        let z = space.zero();
        Self {
            eval: Arc::new(move |_| z.clone()),
            offset: space.zero(),
            space,
        }
    }

    /// Wraps a closure already known to vanish at 0 with the right dimension.
    pub(crate) fn from_normalized<F>(space: PNormSpace<T>, f: F) -> Self
    where
        F: Fn(T) -> CodomainVector<T> + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            offset: space.zero(),
            space,
        }
    }

    #[inline]
    pub fn eval(&self, x: T) -> CodomainVector<T> {
        (self.eval)(x)
    }

    pub fn space(&self) -> &PNormSpace<T> {
        &self.space
    }

    /// `f(0)` of the wrapped closure before normalisation.
    pub fn offset(&self) -> &CodomainVector<T> {
        &self.offset
    }

    pub fn norm_at(&self, x: T) -> T {
        self.space.norm(&self.eval(x))
    }

    /// Pointwise `self - other`.
    pub fn minus(&self, other: &FunctionHandle<T>) -> FunctionHandle<T> {
        let (a, b) = (self.clone(), other.clone());
        Self::from_normalized(self.space, move |x| &a.eval(x) - &b.eval(x))
    }
}

impl<T: Scalar> fmt::Debug for FunctionHandle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("space", &self.space)
            .field("offset", &self.offset)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationKind {
    /// `f(x+ky) + f(x-ky) = k²f(x+y) + k²f(x-y) + 2(1-k²)f(x)`
    GeneralMixed(EquationParams),
    /// `f(x+y) + f(x-y) = 2f(x) + 2f(y)`
    Quadratic,
    /// `f(2x+y) + f(2x-y) = 2f(x+y) + 2f(x-y) + 12f(x)`
    CubicJunKim,
    /// `f(2x+y) + f(2x-y) = 2f(x+y) + 2f(x-y) + 2f(2x) - 4f(x)`
    CubicAdditive,
}

impl EquationKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EquationKind::GeneralMixed(_) => "general_mixed",
            EquationKind::Quadratic => "quadratic",
            EquationKind::CubicJunKim => "cubic",
            EquationKind::CubicAdditive => "cubic_additive",
        }
    }

    pub fn k(&self) -> Option<i64> {
        match self {
            EquationKind::GeneralMixed(p) => Some(p.k()),
            _ => None,
        }
    }
}

/// `D_f(x, y)` together with the largest `‖f‖` on its five-point stencil.
pub(crate) fn mixed_stencil<T: Scalar>(
    f: &FunctionHandle<T>,
    params: EquationParams,
    x: T,
    y: T,
) -> (CodomainVector<T>, T) {
    let k = params.k_as::<T>();
    let k2 = k * k;
    let two = T::of(2.0);
    let vals = [
        f.eval(x + k * y),
        f.eval(x - k * y),
        f.eval(x + y),
        f.eval(x - y),
        f.eval(x),
    ];
    let scale = vals
        .iter()
        .map(|v| f.space().norm(v))
        .fold(T::zero(), T::max);
    let c = two * (T::one() - k2);
    let out = (0..f.space().dim())
        .map(|i| {
            vals[0].components()[i] + vals[1].components()[i]
                - k2 * (vals[2].components()[i] + vals[3].components()[i])
                - c * vals[4].components()[i]
        })
        .collect();
    (CodomainVector::new(out), scale)
}

/// `D_f(x, y) = f(x+ky) + f(x-ky) - k²f(x+y) - k²f(x-y) - 2(1-k²)f(x)`.
pub fn difference_operator<T: Scalar>(
    f: &FunctionHandle<T>,
    params: EquationParams,
    x: T,
    y: T,
) -> CodomainVector<T> {
    mixed_stencil(f, params, x, y).0
}

/// Linear combination `Σ c_i f(t_i)`, with the largest `‖f(t_i)‖` seen.
fn combine<T: Scalar>(f: &FunctionHandle<T>, terms: &[(f64, T)]) -> (CodomainVector<T>, T) {
    let mut out = f.space().zero();
    let mut scale = T::zero();
    for &(c, t) in terms {
        let v = f.eval(t);
        scale = scale.max(f.space().norm(&v));
        out.add_scaled(T::of(c), &v);
    }
    (out, scale)
}

fn residual_with_scale<T: Scalar>(
    kind: EquationKind,
    f: &FunctionHandle<T>,
    x: T,
    y: T,
) -> (CodomainVector<T>, T) {
    let two = T::of(2.0);
    match kind {
        EquationKind::GeneralMixed(params) => mixed_stencil(f, params, x, y),
        EquationKind::Quadratic => combine(
            f,
            &[(1.0, x + y), (1.0, x - y), (-2.0, x), (-2.0, y)],
        ),
        EquationKind::CubicJunKim => combine(
            f,
            &[
                (1.0, two * x + y),
                (1.0, two * x - y),
                (-2.0, x + y),
                (-2.0, x - y),
                (-12.0, x),
            ],
        ),
        EquationKind::CubicAdditive => combine(
            f,
            &[
                (1.0, two * x + y),
                (1.0, two * x - y),
                (-2.0, x + y),
                (-2.0, x - y),
                (-2.0, two * x),
                (4.0, x),
            ],
        ),
    }
}

/// LHS minus RHS of `kind` at `(x, y)`.
pub fn residual<T: Scalar>(
    kind: EquationKind,
    f: &FunctionHandle<T>,
    x: T,
    y: T,
) -> CodomainVector<T> {
    residual_with_scale(kind, f, x, y).0
}

/// Cauchy difference `f(x+y) - f(x) - f(y)`.
pub fn additive_residual<T: Scalar>(f: &FunctionHandle<T>, x: T, y: T) -> CodomainVector<T> {
    combine(f, &[(1.0, x + y), (-1.0, x), (-1.0, y)]).0
}

/// Even and odd parts `½(f(x) ± f(-x))`. Both are exactly (anti)symmetric in
/// floating point; their sum reproduces `f` up to rounding.
pub fn parity_split<T: Scalar>(f: &FunctionHandle<T>) -> (FunctionHandle<T>, FunctionHandle<T>) {
    let half = T::of(0.5);
    let (fe, fo) = (f.clone(), f.clone());
    let even = FunctionHandle::from_normalized(*f.space(), move |x| {
        (&fe.eval(x) + &fe.eval(-x)).scaled(half)
    });
    let odd = FunctionHandle::from_normalized(*f.space(), move |x| {
        (&fo.eval(x) - &fo.eval(-x)).scaled(half)
    });
    (even, odd)
}

/// `f(4x) - 10f(2x) + 16f(x)`; annihilates odd cubic and additive parts.
pub fn mixed_fourth_residual<T: Scalar>(f: &FunctionHandle<T>, x: T) -> CodomainVector<T> {
    combine(f, &[(1.0, T::of(4.0) * x), (-10.0, T::of(2.0) * x), (16.0, x)]).0
}

/// Polarisation `B(x, y) = ¼(q(x+y) - q(x-y))` of a quadratic `q`.
pub fn biadditive_form<T: Scalar>(q: &FunctionHandle<T>, x: T, y: T) -> CodomainVector<T> {
    combine(q, &[(0.25, x + y), (-0.25, x - y)]).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub equation: String,
    pub k: Option<i64>,
    pub max_residual: f64,
    pub argmax_point: [f64; 2],
    pub scale: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "all_zero")]
    pub offset: Vec<f64>,
}

fn all_zero(v: &[f64]) -> bool {
    v.iter().all(|c| *c == 0.0)
}

impl SolutionReport {
    /// `max_residual / scale`.
    pub fn relative_residual(&self) -> f64 {
        self.max_residual / self.scale
    }
}

/// Maximum of `‖D_f‖` over `grid`; passes when it is at most `tol · scale`,
/// `scale = 1 + max ‖f‖` over every stencil point visited.
pub fn verify_solution<T: Scalar>(
    f: &FunctionHandle<T>,
    params: EquationParams,
    grid: &[(T, T)],
    tol: T,
) -> Result<SolutionReport> {
    verify_equation(EquationKind::GeneralMixed(params), f, grid, tol)
}

pub fn verify_equation<T: Scalar>(
    kind: EquationKind,
    f: &FunctionHandle<T>,
    grid: &[(T, T)],
    tol: T,
) -> Result<SolutionReport> {
    if grid.is_empty() {
        return Err(invalid("verification grid is empty"));
    }
    if !(tol > T::zero()) {
        return Err(invalid("tolerance must be positive"));
    }
    let mut max_residual = T::zero();
    let mut argmax = grid[0];
    let mut max_norm = T::zero();
    for &(x, y) in grid {
        let (r, s) = residual_with_scale(kind, f, x, y);
        let n = f.space().norm(&r);
        if n > max_residual || n.is_nan() {
            max_residual = n;
            argmax = (x, y);
        }
        max_norm = max_norm.max(s);
    }
    let scale = T::one() + max_norm;
    Ok(SolutionReport {
        equation: kind.tag().to_string(),
        k: kind.k(),
        max_residual: max_residual.lossy_f64(),
        argmax_point: [argmax.0.lossy_f64(), argmax.1.lossy_f64()],
        scale: scale.lossy_f64(),
        pass: max_residual <= tol * scale,
        offset: f.offset().to_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k: i64) -> EquationParams {
        EquationParams::new(k).unwrap()
    }

    fn scalar(f: fn(f64) -> f64) -> FunctionHandle<f64> {
        FunctionHandle::scalar(f)
    }

    fn val(v: CodomainVector<f64>) -> f64 {
        v.components()[0]
    }

    fn lattice(n: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let pts: Vec<f64> = (0..n)
            .map(|i| (lo * (n - 1 - i) as f64 + hi * i as f64) / (n - 1) as f64)
            .collect();
        pts.iter()
            .flat_map(|&x| pts.iter().map(move |&y| (x, y)))
            .collect()
    }

    #[test]
    fn params_reject_excluded_k() {
        for k in [-1, 0, 1] {
            assert!(EquationParams::new(k).is_err());
        }
        assert_eq!(params(-2).k(), -2);
        assert!(serde_json::from_str::<EquationParams>("1").is_err());
        assert_eq!(serde_json::from_str::<EquationParams>("3").unwrap().k(), 3);
    }

    #[test]
    fn handle_translates_nonzero_origin() {
        let f = FunctionHandle::scalar(|x: f64| x * x + 7.0);
        assert_eq!(f.offset().components(), &[7.0]);
        assert_eq!(val(f.eval(0.0)), 0.0);
        assert_eq!(val(f.eval(2.0)), 4.0);
    }

    #[test]
    fn handle_checks_dimension() {
        let space = PNormSpace::new(2, 1.0).unwrap();
        assert!(FunctionHandle::new(space, |x: f64| CodomainVector::scalar(x)).is_err());
        assert!(FunctionHandle::polynomial(space, vec![[1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn difference_operator_examples() {
        let sq = scalar(|x| x * x);
        for &(x, y) in &[(1.0, 2.0), (-3.5, 0.25), (4.0, -4.0)] {
            assert_eq!(val(difference_operator(&sq, params(2), x, y)), 0.0);
        }
        // D of x⁴ with k = 2 expands to 24y⁴.
        let quartic = scalar(|x| x.powi(4));
        assert_eq!(val(difference_operator(&quartic, params(2), 1.0, 1.0)), 24.0);
        let zero = FunctionHandle::zero(PNormSpace::new(3, 0.5).unwrap());
        assert!(difference_operator(&zero, params(3), 1.3, -2.0).is_zero());
    }

    #[test]
    fn residual_examples() {
        let sq = scalar(|x| x * x);
        assert_eq!(val(residual(EquationKind::Quadratic, &sq, 2.0, 3.0)), 0.0);
        let cube = scalar(|x| x * x * x);
        assert_eq!(val(residual(EquationKind::CubicJunKim, &cube, 1.0, 1.0)), 0.0);
        let ca = scalar(|x| x * x * x + x);
        for &(x, y) in &[(1.0, 1.0), (0.5, -2.0), (3.0, 1.25)] {
            assert_eq!(val(residual(EquationKind::CubicAdditive, &ca, x, y)), 0.0);
        }
        // x² does not solve the cubic equation
        assert_ne!(val(residual(EquationKind::CubicJunKim, &sq, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn parity_split_examples() {
        let f = scalar(|x| x * x * x + x * x + x);
        let (e, o) = parity_split(&f);
        for x in [-2.5, -1.0, 0.5, 3.0] {
            assert!((val(e.eval(x)) - x * x).abs() < 1e-12);
            assert!((val(o.eval(x)) - (x * x * x + x)).abs() < 1e-12);
        }
        let even = scalar(|x| x.powi(4) - x * x);
        let (e, o) = parity_split(&even);
        assert_eq!(val(e.eval(1.7)), val(even.eval(1.7)));
        assert_eq!(val(o.eval(1.7)), 0.0);

        let g = scalar(|x| x.powi(4) + x.powi(5));
        let (e, o) = parity_split(&g);
        assert_eq!(val(e.eval(2.0)), 16.0);
        assert_eq!(val(o.eval(2.0)), 32.0);
    }

    #[test]
    fn mixed_fourth_examples() {
        assert!(val(mixed_fourth_residual(&scalar(|x| x * x * x), 1.7)).abs() < 1e-12);
        assert_eq!(val(mixed_fourth_residual(&scalar(|x| x), -3.0)), 0.0);
        assert_eq!(val(mixed_fourth_residual(&scalar(|x| x * x), 1.0)), -8.0);
    }

    #[test]
    fn biadditive_examples() {
        let sq = scalar(|x| x * x);
        assert_eq!(val(biadditive_form(&sq, 3.0, 5.0)), 15.0);
        for x in [-2.0, 0.75, 4.0] {
            assert_eq!(val(biadditive_form(&sq, x, x)), x * x);
        }
        let zero = FunctionHandle::zero(PNormSpace::new(1, 1.0).unwrap());
        assert!(biadditive_form(&zero, 1.0, 2.0).is_zero());
    }

    #[test]
    fn verify_exact_and_non_solutions() {
        let grid = lattice(101, -5.0, 5.0);
        let f = scalar(|x| 2.0 * x * x * x - x * x + 5.0 * x);
        let rep = verify_solution(&f, params(3), &grid, 1e-9).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.relative_residual() <= 1e-9);

        let quartic = scalar(|x| x.powi(4));
        let rep = verify_solution(&quartic, params(2), &grid, 1e-9).unwrap();
        assert!(!rep.pass);
        assert!((rep.max_residual - 15000.0).abs() < 1e-9);
        assert_eq!(rep.argmax_point[1].abs(), 5.0);

        let zero = FunctionHandle::zero(PNormSpace::new(1, 1.0).unwrap());
        let rep = verify_solution(&zero, params(2), &grid, 1e-9).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max_residual, 0.0);
    }

    #[test]
    fn verify_rejects_bad_arguments() {
        let f = scalar(|x| x);
        assert!(verify_solution(&f, params(2), &[], 1e-9).is_err());
        assert!(verify_solution(&f, params(2), &[(1.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn report_json_shape() {
        let f = scalar(|x| x * x);
        let rep = verify_solution(&f, params(2), &[(1.0, 2.0)], 1e-9).unwrap();
        let json: serde_json::Value = serde_json::to_value(&rep).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            ["argmax_point", "equation", "k", "max_residual", "pass", "scale"]
        );
        assert_eq!(json["equation"], "general_mixed");
        assert_eq!(json["k"], 2);
    }

    fn poly_vec(dim: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
        prop::collection::vec(
            (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| [a, b, c]),
            dim,
        )
    }

    proptest! {
        #[test]
        fn cubic_quadratic_additive_polynomials_solve_mixed_equation(
            coeffs in poly_vec(2),
            k in prop::sample::select(vec![-3i64, -2, 2, 3]),
            x in -10.0..10.0f64,
            y in -10.0..10.0f64,
            p in 0.3..=1.0f64,
        ) {
            let space = PNormSpace::new(2, p).unwrap();
            let amax = coeffs.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, c| m.max(c.abs()));
            let f = FunctionHandle::polynomial(space, coeffs).unwrap();
            let d = difference_operator(&f, params(k), x, y);
            let reach = x.abs() + (k.abs() as f64) * y.abs();
            let scale = 1.0 + amax * (reach.powi(3) + reach.powi(2) + reach);
            prop_assert!(space.pnorm(&d).unwrap() <= 1e-9 * scale);
        }

        #[test]
        fn parity_parts_reassemble_and_are_symmetric(a in -3.0..3.0f64, b in -3.0..3.0f64, x in -20.0..20.0f64) {
            let f = FunctionHandle::scalar(move |t: f64| a * t.powi(4) + b * t.powi(3) + (t).sin() + t.cos() - 1.0);
            let (e, o) = parity_split(&f);
            let (ev, ov, fv) = (val(e.eval(x)), val(o.eval(x)), val(f.eval(x)));
            prop_assert_eq!(ev, val(e.eval(-x)));
            prop_assert_eq!(ov, -val(o.eval(-x)));
            prop_assert!((ev + ov - fv).abs() <= 4.0 * f64::EPSILON * fv.abs().max(ev.abs()).max(1.0));
        }

        #[test]
        fn even_part_residual_is_controlled(x in -4.0..4.0f64, y in -4.0..4.0f64, eps in 0.0..0.1f64) {
            let f = FunctionHandle::scalar(move |t: f64| t * t * t + t * t + eps * (1.3 * t).sin() + eps * (t.cos() - 1.0));
            let (e, _) = parity_split(&f);
            let k = params(2);
            let lhs = val(difference_operator(&e, k, x, y)).abs();
            let rhs = 0.5 * (val(difference_operator(&f, k, x, y)).abs()
                + val(difference_operator(&f, k, -x, -y)).abs());
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + 250.0));
        }

        #[test]
        fn even_solutions_are_quadratic_and_odd_are_cubic_additive(
            a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64,
            x in -6.0..6.0f64, y in -6.0..6.0f64,
        ) {
            let f = FunctionHandle::scalar(move |t: f64| a * t * t * t + b * t * t + c * t);
            let (e, o) = parity_split(&f);
            let scale = 1.0 + 8.0 * (a.abs() * 1728.0 + b.abs() * 144.0 + c.abs() * 12.0);
            prop_assert!(val(residual(EquationKind::Quadratic, &e, x, y)).abs() <= 1e-12 * scale);
            prop_assert!(val(residual(EquationKind::CubicAdditive, &o, x, y)).abs() <= 1e-12 * scale);
        }
    }
}
