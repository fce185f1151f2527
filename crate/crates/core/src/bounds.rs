//! ψ̃ series, stability bounds and the closed-form corollary constants.
//!
//! Coefficient bases such as `5 - 4k²`, `1 - 2k` and `1 - k²` are taken in
//! absolute value throughout.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::approximants::{Direction, Directions};
use crate::equations::EquationParams;
use crate::error::{invalid, Error, Result};
use crate::quasinorm::PNormSpace;
use crate::scalar::Scalar;

/// Relative size of the geometric tail at which adaptive sums stop.
pub const TAIL_RTOL: f64 = 1e-15;
/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiForm {
    /// `θ(|x|^r + |y|^s)`; a zero exponent drops its term, `r = s = 0` is `θ`.
    Sum,
    /// `θ|x|^r|y|^s`
    Product,
    /// `θ`
    Constant,
}

impl PhiForm {
    pub fn tag(&self) -> &'static str {
        match self {
            PhiForm::Sum => "sum",
            PhiForm::Product => "product",
            PhiForm::Constant => "constant",
        }
    }
}

impl std::str::FromStr for PhiForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(PhiForm::Sum),
            "product" => Ok(PhiForm::Product),
            "constant" => Ok(PhiForm::Constant),
            other => Err(invalid(format!("unknown control-function form {other:?}"))),
        }
    }
}

/// Control function `φ` bounding `‖D_f(x, y)‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBound<T> {
    theta: T,
    r: T,
    s: T,
    form: PhiForm,
}

impl<T: Scalar> PowerBound<T> {
    pub fn new(form: PhiForm, theta: T, r: T, s: T) -> Result<Self> {
        if !(theta >= T::zero()) || !theta.is_finite() {
            return Err(invalid(format!("theta must be finite and nonnegative, got {theta}")));
        }
        if !(r >= T::zero() && s >= T::zero()) || !r.is_finite() || !s.is_finite() {
            return Err(invalid(format!("exponents must be finite and nonnegative, got r = {r}, s = {s}")));
        }
        let (r, s) = match form {
            PhiForm::Constant => (T::zero(), T::zero()),
            PhiForm::Product if r == T::zero() || s == T::zero() => {
                return Err(invalid("product form needs r > 0 and s > 0"));
            }
            _ => (r, s),
        };
        Ok(Self { theta, r, s, form })
    }

    pub fn constant(theta: T) -> Self {
        Self {
            theta,
            r: T::zero(),
            s: T::zero(),
            form: PhiForm::Constant,
        }
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn s(&self) -> T {
        self.s
    }

    /// `r + s`.
    pub fn lambda(&self) -> T {
        self.r + self.s
    }

    pub fn form(&self) -> PhiForm {
        self.form
    }

    pub fn with_theta(&self, theta: T) -> Result<Self> {
        Self::new(self.form, theta, self.r, self.s)
    }

    /// The same form with `θ = 1`.
    pub fn unit(&self) -> Self {
        Self {
            theta: T::one(),
            ..*self
        }
    }

    /// Sum form with both exponents zero behaves as a constant.
    fn is_constant(&self) -> bool {
        self.form == PhiForm::Constant
            || (self.form == PhiForm::Sum && self.r == T::zero() && self.s == T::zero())
    }

    /// `φ(x, y) / θ`.
    pub fn eval_unit(&self, x: T, y: T) -> T {
        if self.is_constant() {
            return T::one();
        }
        match self.form {
            PhiForm::Sum => {
                let tx = if self.r > T::zero() { x.pow_abs(self.r) } else { T::zero() };
                let ty = if self.s > T::zero() { y.pow_abs(self.s) } else { T::zero() };
                tx + ty
            }
            PhiForm::Product => x.pow_abs(self.r) * y.pow_abs(self.s),
            PhiForm::Constant => T::one(),
        }
    }

    pub fn eval(&self, x: T, y: T) -> T {
        self.theta * self.eval_unit(x, y)
    }

    /// Exponents whose monomials survive in `φ(a, b)` (`{0}` for a constant).
    fn exponents(&self) -> Vec<T> {
        if self.is_constant() {
            return vec![T::zero()];
        }
        match self.form {
            PhiForm::Sum => [self.r, self.s]
                .into_iter()
                .filter(|e| *e > T::zero())
                .collect(),
            PhiForm::Product => vec![self.lambda()],
            PhiForm::Constant => vec![T::zero()],
        }
    }

    /// `φ(a, b) / θ` split into `(exponent, monomial)` pairs, so that a
    /// dilation by `t` multiplies each monomial by `t^exponent`.
    fn monomials(&self, a: T, b: T) -> Vec<(T, T)> {
        if self.is_constant() {
            return vec![(T::zero(), T::one())];
        }
        match self.form {
            PhiForm::Sum => {
                let mut out = Vec::with_capacity(2);
                if self.r > T::zero() {
                    out.push((self.r, a.pow_abs(self.r)));
                }
                if self.s > T::zero() {
                    out.push((self.s, b.pow_abs(self.s)));
                }
                out
            }
            PhiForm::Product => vec![(self.lambda(), a.pow_abs(self.r) * b.pow_abs(self.s))],
            PhiForm::Constant => vec![(T::zero(), T::one())],
        }
    }

    /// Exponents surviving in `φ(0, b)`; empty when `φ(0, ·) ≡ 0`.
    fn exponents_on_axis(&self) -> Vec<T> {
        if self.is_constant() {
            return vec![T::zero()];
        }
        match self.form {
            PhiForm::Sum if self.s > T::zero() => vec![self.s],
            _ => Vec::new(),
        }
    }
}

/// `+1` above the critical exponent, `-1` below.
pub fn select_direction<T: Scalar>(exponent: T, critical: T) -> Result<Direction> {
    if !(exponent >= T::zero()) {
        return Err(invalid(format!("exponent must be nonnegative, got {exponent}")));
    }
    if exponent > critical {
        Ok(Direction::Contract)
    } else if exponent < critical {
        Ok(Direction::Expand)
    } else {
        Err(Error::CriticalExponent(format!(
            "exponent {exponent} equals the critical value {critical}"
        )))
    }
}

fn common_direction<T: Scalar>(exps: &[T], critical: f64, what: &str) -> Result<Direction> {
    let crit = T::of(critical);
    let mut dir = None;
    for &e in exps {
        let d = select_direction(e, crit)?;
        if dir.is_some_and(|prev| prev != d) {
            return Err(Error::CriticalExponent(format!(
                "{what}: exponents straddle the critical value {critical}"
            )));
        }
        dir = Some(d);
    }
    Ok(dir.unwrap_or(Direction::Expand))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeriesKind {
    /// quadratic series over `φ(0, ·)`
    E,
    /// additive series, weights `2^(ipj)`
    A,
    /// cubic series, weights `8^(ipj)`
    C,
}

impl SeriesKind {
    fn critical(self) -> f64 {
        match self {
            SeriesKind::E => 2.0,
            SeriesKind::A => 1.0,
            SeriesKind::C => 3.0,
        }
    }
}

/// Everything the bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundContext<T> {
    pub params: EquationParams,
    pub space: PNormSpace<T>,
    pub phi: PowerBound<T>,
    pub directions: Directions,
    blocked: [bool; 3],
}

impl<T: Scalar> BoundContext<T> {
    /// Picks each direction from the exponents of `φ`. A series whose
    /// exponents hit or straddle its critical value is only rejected when it
    /// is evaluated.
    pub fn new(params: EquationParams, space: PNormSpace<T>, phi: PowerBound<T>) -> Result<Self> {
        let mut ctx = Self::with_directions(params, space, phi, Directions::uniform(Direction::Expand));
        let mut blocked = [false; 3];
        for (i, kind) in [SeriesKind::E, SeriesKind::A, SeriesKind::C].into_iter().enumerate() {
            match ctx.auto_direction(kind) {
                Ok(d) => match kind {
                    SeriesKind::E => ctx.directions.q = d,
                    SeriesKind::A => ctx.directions.a = d,
                    SeriesKind::C => ctx.directions.c = d,
                },
                Err(Error::CriticalExponent(_)) => blocked[i] = true,
                Err(e) => return Err(e),
            }
        }
        ctx.blocked = blocked;
        Ok(ctx)
    }

    pub fn with_directions(
        params: EquationParams,
        space: PNormSpace<T>,
        phi: PowerBound<T>,
        directions: Directions,
    ) -> Self {
        Self {
            params,
            space,
            phi,
            directions,
            blocked: [false; 3],
        }
    }

    fn auto_direction(&self, kind: SeriesKind) -> Result<Direction> {
        let phi = &self.phi;
        match (kind, phi.form()) {
            (SeriesKind::E, PhiForm::Product) => select_direction(phi.lambda(), T::of(2.0)),
            (SeriesKind::E, _) => {
                common_direction(&phi.exponents_on_axis(), kind.critical(), "quadratic part")
            }
            (SeriesKind::A, _) => common_direction(&phi.exponents(), kind.critical(), "additive part"),
            (SeriesKind::C, _) => common_direction(&phi.exponents(), kind.critical(), "cubic part"),
        }
    }

    pub fn p(&self) -> T {
        self.space.p()
    }

    pub fn modulus(&self) -> T {
        self.space.modulus()
    }

    /// `φ(0, ·) ≡ 0` while `θ > 0`: the quadratic bound is then identically
    /// zero, which is only justified in the limit.
    pub fn quadratic_degenerate(&self) -> bool {
        self.phi.theta() > T::zero() && self.phi.exponents_on_axis().is_empty()
    }

    /// Per-step decay `max_e (w b^(-e))^j` of a perturbation bounded by `φ`,
    /// for the quadratic, additive and cubic iterations, when it lies in
    /// `(0, 1)`.
    pub fn decay_rates(&self) -> [Option<T>; 3] {
        [SeriesKind::E, SeriesKind::A, SeriesKind::C].map(|kind| {
            let dir = self.direction(kind).ok()?;
            let k = self.params.k_as::<T>();
            let two = T::of(2.0);
            let (w, base) = match kind {
                SeriesKind::E => (k * k, k.abs()),
                SeriesKind::A => (two, two),
                SeriesKind::C => (T::of(8.0), two),
            };
            let exps = match kind {
                SeriesKind::E => self.phi.exponents_on_axis(),
                _ => self.phi.exponents(),
            };
            let rate = exps.iter().fold(T::zero(), |acc, &e| {
                let g = w / base.pow_abs(e);
                acc.max(match dir {
                    Direction::Contract => g,
                    Direction::Expand => g.recip(),
                })
            });
            (rate > T::zero() && rate < T::one()).then_some(rate)
        })
    }

    fn direction(&self, kind: SeriesKind) -> Result<Direction> {
        let i = match kind {
            SeriesKind::E => 0,
            SeriesKind::A => 1,
            SeriesKind::C => 2,
        };
        if self.blocked[i] {
            self.auto_direction(kind)?;
        }
        Ok(match kind {
            SeriesKind::E => self.directions.q,
            SeriesKind::A => self.directions.a,
            SeriesKind::C => self.directions.c,
        })
    }
}

/// Truncated series: `partial` over `terms` summands plus a geometric bound
/// on the rest, so `partial + tail_bound` bounds the full sum from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue<T> {
    pub partial: T,
    pub tail_bound: T,
    pub terms: usize,
}

impl<T: Scalar> SeriesValue<T> {
    pub fn upper(&self) -> T {
        self.partial + self.tail_bound
    }
}

/// The nine `(coefficient, u, v)` triples of the additive and cubic series,
/// evaluated at `φ(u·x, v·x)`, without the common prefactor.
fn odd_stencil<T: Scalar>(k: T, p: T) -> [(T, T, T); 9] {
    let one = T::one();
    let two = T::of(2.0);
    let k2 = k * k;
    [
        ((T::of(5.0) - T::of(4.0) * k2).pow_abs(p), one, one),
        (k2.pow_abs(p), two, two),
        ((two * k2).pow_abs(p), two, one),
        (one, one, T::of(3.0)),
        ((T::of(4.0) - two * k2).pow_abs(p), one, two),
        (two.pow_abs(p), one + k, one),
        (two.pow_abs(p), one - k, one),
        (one, one + two * k, one),
        (one, one - two * k, one),
    ]
}

/// Geometric data of one ψ̃ series.
///
/// The `i`-th summand is `pre · Σ c (w^(ij) φ(u x b^(-ij), v x b^(-ij)))^p`.
/// Each monomial of `φ` with exponent `e` picks up `g_e^i`, `g_e = (w b^(-e))^j`,
/// so the dilations are never formed and nothing underflows before the
/// summand itself is negligible.
struct Series<'a, T> {
    ctx: &'a BoundContext<T>,
    prefactor: T,
    stencil: Vec<(T, T, T)>,
    /// `(e, g_e)` for every exponent `φ` can produce
    steps: Vec<(T, T)>,
    ratio: T,
    i0: usize,
}

impl<'a, T: Scalar> Series<'a, T> {
    fn new(kind: SeriesKind, ctx: &'a BoundContext<T>) -> Result<Self> {
        let p = ctx.p();
        let k = ctx.params.k_as::<T>();
        let dir = ctx.direction(kind)?;
        let two = T::of(2.0);
        let (w, base) = match kind {
            SeriesKind::E => (k * k, k.abs()),
            SeriesKind::A => (two, two),
            SeriesKind::C => (T::of(8.0), two),
        };
        let (prefactor, stencil) = match kind {
            SeriesKind::E => (T::one(), vec![(T::one(), T::zero(), T::one())]),
            _ => {
                let pre = ((k * k).pow_abs(p) * (T::one() - k * k).pow_abs(p)).recip();
                (pre, odd_stencil(k, p).to_vec())
            }
        };
        let step = |e: T| {
            let g = w / base.pow_abs(e);
            match dir {
                Direction::Contract => g,
                Direction::Expand => g.recip(),
            }
        };
        let phi = &ctx.phi;
        let steps: Vec<(T, T)> = [T::zero(), phi.r(), phi.s(), phi.lambda()]
            .into_iter()
            .map(|e| (e, step(e)))
            .collect();
        let exps = match kind {
            SeriesKind::E => phi.exponents_on_axis(),
            _ => phi.exponents(),
        };
        // successive-term ratio bound: max over active monomials of g_e^p
        let ratio = exps
            .iter()
            .fold(T::zero(), |acc, &e| acc.max(step(e).pow_abs(p)));
        if phi.theta() > T::zero() && ratio >= T::one() {
            return Err(Error::DivergentSeries(format!(
                "{kind:?} series with j = {} has term ratio {ratio} >= 1",
                dir.j()
            )));
        }
        Ok(Self {
            ctx,
            prefactor,
            stencil,
            steps,
            ratio,
            i0: dir.first_index(),
        })
    }

    fn step_index(&self, e: T) -> usize {
        self.steps
            .iter()
            .position(|&(se, _)| se == e)
            .expect("every monomial exponent has a step")
    }

    /// Summand given `g_e^i` for each entry of `steps`.
    fn summand(&self, x: T, powers: &[T]) -> T {
        let phi = &self.ctx.phi;
        let p = self.ctx.p();
        let inner = self.stencil.iter().fold(T::zero(), |acc, &(c, u, v)| {
            let dilated = phi
                .monomials(u * x, v * x)
                .into_iter()
                .fold(T::zero(), |m, (e, val)| m + val * powers[self.step_index(e)]);
            acc + c * (phi.theta() * dilated).pow_abs(p)
        });
        self.prefactor * inner
    }

    fn term(&self, i: usize, x: T) -> T {
        let powers: Vec<T> = self
            .steps
            .iter()
            .map(|&(_, g)| (0..i).fold(T::one(), |acc, _| acc * g))
            .collect();
        self.summand(x, &powers)
    }

    /// Sums from `i0`, stopping after `n_terms` summands, or adaptively when
    /// `n_terms` is `None`.
    fn sum(&self, x: T, n_terms: Option<usize>) -> SeriesValue<T> {
        if self.ctx.phi.theta() == T::zero() || self.stencil.is_empty() {
            return SeriesValue {
                partial: T::zero(),
                tail_bound: T::zero(),
                terms: 0,
            };
        }
        let cap = n_terms.unwrap_or(MAX_TERMS).min(MAX_TERMS);
        let rtol = T::of(TAIL_RTOL);
        let geometric = self.ratio / (T::one() - self.ratio);
        let mut powers: Vec<T> = self
            .steps
            .iter()
            .map(|&(_, g)| (0..self.i0).fold(T::one(), |acc, _| acc * g))
            .collect();
        let mut partial = T::zero();
        let mut last = T::zero();
        let mut terms = 0;
        while terms < cap {
            let t = self.summand(x, &powers);
            if !t.is_finite() {
                break;
            }
            partial = partial + t;
            last = t;
            terms += 1;
            // summands only shrink from here on once one has underflowed
            if t == T::zero() && terms > 1 {
                break;
            }
            if n_terms.is_none() && last * geometric <= rtol * partial {
                break;
            }
            for (pw, &(_, g)) in powers.iter_mut().zip(&self.steps) {
                *pw = *pw * g;
            }
        }
        SeriesValue {
            partial,
            tail_bound: last * geometric,
            terms,
        }
    }
}

/// Partial sum of `n_terms` summands with its geometric tail bound.
pub fn psi_tilde_numeric<T: Scalar>(
    kind: SeriesKind,
    ctx: &BoundContext<T>,
    x: T,
    n_terms: usize,
) -> Result<SeriesValue<T>> {
    if n_terms == 0 {
        return Err(invalid("n_terms must be at least 1"));
    }
    let series = Series::new(kind, ctx)?;
    Ok(series.sum(x, Some(n_terms)))
}

/// Upper bound on `ψ̃(x)`, summed until the tail is below `1e-15` of the sum.
pub fn psi_tilde<T: Scalar>(kind: SeriesKind, ctx: &BoundContext<T>, x: T) -> Result<T> {
    Ok(Series::new(kind, ctx)?.sum(x, None).upper())
}

/// `n`-th summand of a ψ̃ series, counted from its first index.
pub fn psi_tilde_term<T: Scalar>(kind: SeriesKind, ctx: &BoundContext<T>, x: T, n: usize) -> Result<T> {
    let series = Series::new(kind, ctx)?;
    Ok(series.term(series.i0 + n, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `‖f - Q‖` for even `f`
    Quadratic,
    /// `‖f(2x) - 8f(x) - A₀(x)‖`
    AdditiveG,
    /// `‖f(2x) - 2f(x) - C₀(x)‖`
    CubicH,
    /// `‖f - A - C‖` for odd `f`
    OddCombined,
    /// `‖f - A - Q - C‖`
    Full,
}

impl BoundKind {
    pub fn tag(&self) -> &'static str {
        match self {
            BoundKind::Quadratic => "quadratic",
            BoundKind::AdditiveG => "additive_g",
            BoundKind::CubicH => "cubic_h",
            BoundKind::OddCombined => "odd_combined",
            BoundKind::Full => "full",
        }
    }
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(BoundKind::Quadratic),
            "additive_g" | "additive" => Ok(BoundKind::AdditiveG),
            "cubic_h" | "cubic" => Ok(BoundKind::CubicH),
            "odd_combined" | "odd" => Ok(BoundKind::OddCombined),
            "full" => Ok(BoundKind::Full),
            other => Err(invalid(format!("unknown bound kind {other:?}"))),
        }
    }
}

fn root<T: Scalar>(v: T, p: T) -> T {
    v.pow_abs(p.recip())
}

/// Right-hand side of the chosen stability inequality at `x`.
pub fn stability_bound<T: Scalar>(kind: BoundKind, ctx: &BoundContext<T>, x: T) -> Result<T> {
    let p = ctx.p();
    let m = ctx.modulus();
    let k2 = ctx.params.k_sq::<T>();
    let two = T::of(2.0);
    let mp = |n: i32| m.powi(n);
    let value = match kind {
        BoundKind::Quadratic => m / (two * k2) * root(psi_tilde(SeriesKind::E, ctx, x)?, p),
        BoundKind::AdditiveG => mp(5) / two * root(psi_tilde(SeriesKind::A, ctx, x)?, p),
        BoundKind::CubicH => mp(5) / T::of(8.0) * root(psi_tilde(SeriesKind::C, ctx, x)?, p),
        BoundKind::OddCombined => {
            let a = root(psi_tilde(SeriesKind::A, ctx, x)?, p);
            let c = root(psi_tilde(SeriesKind::C, ctx, x)?, p);
            mp(6) / T::of(48.0) * (T::of(4.0) * a + c)
        }
        BoundKind::Full => {
            let both = |kind| -> Result<T> {
                Ok(psi_tilde(kind, ctx, x)? + psi_tilde(kind, ctx, -x)?)
            };
            let a = root(both(SeriesKind::A)?, p);
            let c = root(both(SeriesKind::C)?, p);
            let e = root(both(SeriesKind::E)?, p);
            mp(8) / T::of(96.0) * (T::of(4.0) * a + c) + mp(3) / (T::of(4.0) * k2) * e
        }
    };
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstantKind {
    Cor33,
    DeltaA,
    AlphaA,
    BetaA,
    EpsA,
    DeltaC,
    AlphaC,
    BetaC,
    EpsC,
    GammaA,
    GammaC,
}

impl ConstantKind {
    pub const ALL: [ConstantKind; 11] = [
        ConstantKind::Cor33,
        ConstantKind::DeltaA,
        ConstantKind::AlphaA,
        ConstantKind::BetaA,
        ConstantKind::EpsA,
        ConstantKind::DeltaC,
        ConstantKind::AlphaC,
        ConstantKind::BetaC,
        ConstantKind::EpsC,
        ConstantKind::GammaA,
        ConstantKind::GammaC,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ConstantKind::Cor33 => "cor33",
            ConstantKind::DeltaA => "delta_a",
            ConstantKind::AlphaA => "alpha_a",
            ConstantKind::BetaA => "beta_a",
            ConstantKind::EpsA => "eps_a",
            ConstantKind::DeltaC => "delta_c",
            ConstantKind::AlphaC => "alpha_c",
            ConstantKind::BetaC => "beta_c",
            ConstantKind::EpsC => "eps_c",
            ConstantKind::GammaA => "gamma_a",
            ConstantKind::GammaC => "gamma_c",
        }
    }

    fn is_cubic(&self) -> bool {
        matches!(
            self,
            ConstantKind::DeltaC
                | ConstantKind::AlphaC
                | ConstantKind::BetaC
                | ConstantKind::EpsC
                | ConstantKind::GammaC
        )
    }
}

impl fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

fn critical_if_zero<T: Scalar>(den: T, what: &str) -> Result<T> {
    if den == T::zero() {
        Err(Error::CriticalExponent(format!("{what}: exponent on the critical value")))
    } else {
        Ok(den)
    }
}

/// Closed-form constant of the corollaries. Gamma variants include the
/// `‖x‖` dependence; the others do not.
pub fn corollary_constant<T: Scalar>(
    which: ConstantKind,
    ctx: &BoundContext<T>,
    x_norm: T,
) -> Result<T> {
    if !(x_norm >= T::zero()) {
        return Err(invalid("x_norm must be nonnegative"));
    }
    let p = ctx.p();
    let k = ctx.params.k_as::<T>();
    let k2 = k * k;
    let (r, s, lam) = (ctx.phi.r(), ctx.phi.s(), ctx.phi.lambda());
    let one = T::one();
    let two = T::of(2.0);
    let pw = |b: T, e: T| b.pow_abs(e);
    let two_p = pw(two, p);
    let outer = if which.is_cubic() { pw(T::of(8.0), p) } else { two_p };
    let c54 = pw(T::of(5.0) - T::of(4.0) * k2, p);
    let c42 = pw(T::of(4.0) - two * k2, p);
    let k2p = pw(k2, p);
    let mixed = |e: T| {
        pw(one + two * k, e * p)
            + pw(one - two * k, e * p)
            + two_p * pw(one + k, e * p)
            + two_p * pw(one - k, e * p)
    };
    let value = match which {
        ConstantKind::Cor33 => {
            let den = critical_if_zero((k2p - pw(k.abs(), s * p)).abs(), "Cor33 (s = 2)")?;
            root(den.recip(), p)
        }
        ConstantKind::DeltaA | ConstantKind::DeltaC => {
            let bracket = c54 + c42 + k2p * (two_p + one) + pw(two, p + one) + T::of(3.0);
            root(bracket / (outer - one), p)
        }
        ConstantKind::AlphaA | ConstantKind::AlphaC => {
            let den = critical_if_zero((outer - pw(two, r * p)).abs(), "alpha")?;
            let bracket = c54 + c42 + mixed(r) + pw(two, r * p) * k2p * (two_p + one) + one;
            root(bracket / den, p)
        }
        ConstantKind::BetaA | ConstantKind::BetaC => {
            let den = critical_if_zero((outer - pw(two, s * p)).abs(), "beta")?;
            let bracket = c54
                + pw(two, s * p) * c42
                + k2p * (pw(two, s * p) + two_p)
                + pw(T::of(3.0), s * p)
                + pw(two, p + one)
                + two;
            root(bracket / den, p)
        }
        ConstantKind::EpsA | ConstantKind::EpsC => {
            let den = critical_if_zero((outer - pw(two, lam * p)).abs(), "epsilon (lambda)")?;
            let bracket = c54
                + pw(two, s * p) * c42
                + mixed(r)
                + k2p * (pw(two, lam * p) + pw(two, (r + one) * p))
                + pw(T::of(3.0), s * p);
            root(bracket / den, p)
        }
        ConstantKind::GammaA | ConstantKind::GammaC => {
            let critical = if which.is_cubic() { 3.0 } else { 1.0 };
            common_direction(&[r, s], critical, "gamma")?;
            let (alpha, beta) = if which.is_cubic() {
                (ConstantKind::AlphaC, ConstantKind::BetaC)
            } else {
                (ConstantKind::AlphaA, ConstantKind::BetaA)
            };
            let a = corollary_constant(alpha, ctx, x_norm)?;
            let b = corollary_constant(beta, ctx, x_norm)?;
            root(
                pw(a, p) * pw(x_norm, r * p) + pw(b, p) * pw(x_norm, s * p),
                p,
            )
        }
    };
    Ok(value)
}

/// Which admissible band `(lo, hi)` both exponents share, if any.
fn shared_band<T: Scalar>(r: T, s: T, cuts: &[f64]) -> Option<(f64, f64)> {
    let mut edges = vec![0.0];
    edges.extend_from_slice(cuts);
    edges.push(f64::INFINITY);
    edges.windows(2).map(|w| (w[0], w[1])).find(|&(lo, hi)| {
        let inside = |e: T| e > T::of(lo) && (hi.is_infinite() || e < T::of(hi));
        inside(r) && inside(s)
    })
}

/// Closed-form bound on `‖f(x) - A(x) - Q(x) - C(x)‖` at `‖x‖ = x_norm`.
///
/// * Sum form, `r, s` inside one of `(0,1)`, `(1,2)`, `(2,3)`, `(3,∞)`:
///   `M⁸θ/(6k²|1-k²|)(γ_a + γ_c) + (M³θ/2)(‖x‖^(sp)/|k^(2p) - k^(sp)|)^(1/p)`.
/// * Product form, `λ ∉ {1, 2, 3}`: `M⁸θ/(6k²|1-k²|)(ε_a + ε_c)‖x‖^λ`; the
///   quadratic part vanishes because `φ(0, ·) ≡ 0`.
/// * Constant form: the `δ` analogue plus `(M³θ/2)(1/|k^(2p) - 1|)^(1/p)`.
pub fn full_bound_power<T: Scalar>(ctx: &BoundContext<T>, x_norm: T) -> Result<T> {
    if !(x_norm >= T::zero()) {
        return Err(invalid("x_norm must be nonnegative"));
    }
    let phi = ctx.phi;
    let theta = phi.theta();
    let p = ctx.p();
    let m = ctx.modulus();
    let k = ctx.params.k_as::<T>();
    let k2 = k * k;
    let odd_pre = m.powi(8) * theta / (T::of(6.0) * k2 * (T::one() - k2).abs());
    let even_pre = m.powi(3) * theta / T::of(2.0);
    let c = |which| corollary_constant(which, ctx, x_norm);
    if phi.is_constant() {
        let quad = root(
            (ctx.params.k_sq::<T>().pow_abs(p) - T::one()).abs().recip(),
            p,
        );
        return Ok(odd_pre * (c(ConstantKind::DeltaA)? + c(ConstantKind::DeltaC)?) + even_pre * quad);
    }
    match phi.form() {
        PhiForm::Sum => {
            let (r, s) = (phi.r(), phi.s());
            if r == T::zero() || s == T::zero() {
                return Err(Error::CriticalExponent(
                    "combined bound needs r > 0 and s > 0".into(),
                ));
            }
            if shared_band(r, s, &[1.0, 2.0, 3.0]).is_none() {
                return Err(Error::CriticalExponent(format!(
                    "r = {r} and s = {s} do not share one of the bands (0,1), (1,2), (2,3), (3,∞)"
                )));
            }
            let gammas = c(ConstantKind::GammaA)? + c(ConstantKind::GammaC)?;
            let quad = root(
                x_norm.pow_abs(s * p) / (k2.pow_abs(p) - k.abs().pow_abs(s * p)).abs(),
                p,
            );
            Ok(odd_pre * gammas + even_pre * quad)
        }
        PhiForm::Product => {
            let lam = phi.lambda();
            if [1.0, 2.0, 3.0].iter().any(|&c| lam == T::of(c)) {
                return Err(Error::CriticalExponent(format!("lambda = {lam} is critical")));
            }
            let eps = c(ConstantKind::EpsA)? + c(ConstantKind::EpsC)?;
            Ok(odd_pre * eps * x_norm.pow_abs(lam))
        }
        PhiForm::Constant => unreachable!("handled above"),
    }
}

/// Closed form against the matching series at `x = 1`, `θ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub constant: String,
    pub form: String,
    pub closed_form: f64,
    pub from_series: f64,
    pub relative_difference: f64,
    /// Equality is expected; otherwise the closed form is only an upper bound.
    pub exact: bool,
}

/// The constant recovered from a ψ̃ series of a single-term `φ` with `θ = 1`
/// evaluated at `x = 1`.
fn constant_from_series<T: Scalar>(which: ConstantKind, ctx: &BoundContext<T>) -> Result<T> {
    let p = ctx.p();
    let k2 = ctx.params.k_sq::<T>();
    let one = T::one();
    match which {
        ConstantKind::Cor33 => {
            let psi = psi_tilde(SeriesKind::E, ctx, one)?;
            Ok(root(psi, p) / k2)
        }
        _ => {
            let (kind, w) = if which.is_cubic() {
                (SeriesKind::C, T::of(8.0))
            } else {
                (SeriesKind::A, T::of(2.0))
            };
            let psi = psi_tilde(kind, ctx, one)?;
            Ok(root(psi, p) * k2 * (one - k2).abs() / w)
        }
    }
}

/// Compares every constant applicable to `(k, p, r, s)` with its series.
pub fn cross_check<T: Scalar>(params: EquationParams, p: T, r: T, s: T) -> Result<Vec<CrossCheck>> {
    let space = PNormSpace::new(1, p)?;
    let one = T::one();
    let zero = T::zero();
    let mut out = Vec::new();
    let mut push = |which: ConstantKind, phi: PowerBound<T>, exact: bool| -> Result<()> {
        let ctx = match BoundContext::new(params, space, phi) {
            Ok(c) => c,
            Err(Error::CriticalExponent(_)) => return Ok(()),
            Err(e) => return Err(e),
        };
        let closed = match corollary_constant(which, &ctx, one) {
            Ok(v) => v,
            Err(Error::CriticalExponent(_)) => return Ok(()),
            Err(e) => return Err(e),
        };
        let series = match constant_from_series(which, &ctx) {
            Ok(v) => v,
            Err(Error::CriticalExponent(_)) => return Ok(()),
            Err(e) => return Err(e),
        };
        let closed_f = closed.lossy_f64();
        let series_f = series.lossy_f64();
        out.push(CrossCheck {
            constant: which.tag().to_string(),
            form: phi.form().tag().to_string(),
            closed_form: closed_f,
            from_series: series_f,
            relative_difference: (closed_f - series_f).abs() / closed_f.abs().max(f64::MIN_POSITIVE),
            exact,
        });
        Ok(())
    };
    let constant = PowerBound::constant(one);
    push(ConstantKind::DeltaA, constant, true)?;
    push(ConstantKind::DeltaC, constant, true)?;
    if s > zero {
        let only_s = PowerBound::new(PhiForm::Sum, one, zero, s)?;
        push(ConstantKind::Cor33, only_s, true)?;
        push(ConstantKind::BetaA, only_s, true)?;
        push(ConstantKind::BetaC, only_s, true)?;
    } else {
        push(ConstantKind::Cor33, constant, true)?;
    }
    if r > zero {
        let only_r = PowerBound::new(PhiForm::Sum, one, r, zero)?;
        push(ConstantKind::AlphaA, only_r, true)?;
        push(ConstantKind::AlphaC, only_r, true)?;
    }
    if r > zero && s > zero {
        let prod = PowerBound::new(PhiForm::Product, one, r, s)?;
        push(ConstantKind::EpsA, prod, true)?;
        push(ConstantKind::EpsC, prod, true)?;
        let sum = PowerBound::new(PhiForm::Sum, one, r, s)?;
        push(ConstantKind::GammaA, sum, p == one)?;
        push(ConstantKind::GammaC, sum, p == one)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundPoint {
    pub x: f64,
    pub bound: f64,
}

/// Serialisable table of one bound over a set of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTable {
    pub kind: String,
    pub k: i64,
    pub p: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub theta: f64,
    pub r: f64,
    pub s: f64,
    pub form: String,
    pub j: Directions,
    pub constants: BTreeMap<String, f64>,
    pub per_x: Vec<BoundPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Evaluates `kind` at each point of `xs`, with every constant that is
/// defined for the context.
pub fn bound_table<T: Scalar>(kind: BoundKind, ctx: &BoundContext<T>, xs: &[T]) -> Result<BoundTable> {
    let mut constants = BTreeMap::new();
    for which in ConstantKind::ALL {
        if let Ok(v) = corollary_constant(which, ctx, T::one()) {
            constants.insert(which.tag().to_string(), v.lossy_f64());
        }
    }
    let per_x = xs
        .iter()
        .map(|&x| {
            Ok(BoundPoint {
                x: x.lossy_f64(),
                bound: stability_bound(kind, ctx, x)?.lossy_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    if ctx.quadratic_degenerate() && matches!(kind, BoundKind::Quadratic | BoundKind::Full) {
        warnings.push("phi(0, y) vanishes identically; the quadratic bound is zero".to_string());
    }
    Ok(BoundTable {
        kind: kind.tag().to_string(),
        k: ctx.params.k(),
        p: ctx.p().lossy_f64(),
        m: ctx.modulus().lossy_f64(),
        theta: ctx.phi.theta().lossy_f64(),
        r: ctx.phi.r().lossy_f64(),
        s: ctx.phi.s().lossy_f64(),
        form: ctx.phi.form().tag().to_string(),
        j: ctx.directions,
        constants,
        per_x,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k: i64) -> EquationParams {
        EquationParams::new(k).unwrap()
    }

    fn ctx(k: i64, p: f64, phi: PowerBound<f64>) -> BoundContext<f64> {
        BoundContext::new(params(k), PNormSpace::new(1, p).unwrap(), phi).unwrap()
    }

    fn sum(theta: f64, r: f64, s: f64) -> PowerBound<f64> {
        PowerBound::new(PhiForm::Sum, theta, r, s).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn power_bound_validation() {
        assert!(PowerBound::new(PhiForm::Product, 1.0, 0.0, 2.0).is_err());
        assert!(PowerBound::new(PhiForm::Sum, -1.0, 1.0, 2.0).is_err());
        assert!(PowerBound::new(PhiForm::Sum, 1.0, -1.0, 2.0).is_err());
        let c = PowerBound::new(PhiForm::Constant, 2.0, 5.0, 5.0).unwrap();
        assert_eq!((c.r(), c.s()), (0.0, 0.0));
        assert_eq!(c.eval(3.0, 4.0), 2.0);
        assert_eq!(sum(2.0, 1.0, 2.0).eval(3.0, -2.0), 14.0);
        assert_eq!(sum(1.0, 0.0, 2.0).eval(3.0, 2.0), 4.0);
        assert_eq!(sum(1.0, 0.0, 0.0).eval(3.0, 2.0), 1.0);
        let prod = PowerBound::new(PhiForm::Product, 0.5, 1.0, 2.0).unwrap();
        assert_eq!(prod.eval(2.0, -3.0), 9.0);
        assert_eq!(prod.eval(2.0, 0.0), 0.0);
    }

    #[test]
    fn select_direction_examples() {
        assert_eq!(select_direction(3.0, 2.0).unwrap(), Direction::Contract);
        assert_eq!(select_direction(0.0, 1.0).unwrap(), Direction::Expand);
        assert!(matches!(select_direction(2.0, 2.0), Err(Error::CriticalExponent(_))));
    }

    #[test]
    fn context_directions() {
        let c = ctx(2, 1.0, PowerBound::constant(1.0));
        assert_eq!(c.directions, Directions::uniform(Direction::Expand));
        let c = ctx(2, 1.0, sum(1.0, 4.0, 4.0));
        assert_eq!(c.directions, Directions::uniform(Direction::Contract));
        let c = ctx(2, 1.0, sum(1.0, 1.5, 1.5));
        assert_eq!(
            c.directions,
            Directions::new(Direction::Expand, Direction::Contract, Direction::Expand)
        );
        let straddle = ctx(2, 1.0, sum(1.0, 0.5, 1.5));
        assert!(matches!(psi_tilde(SeriesKind::A, &straddle, 1.0), Err(Error::CriticalExponent(_))));
        assert!(psi_tilde(SeriesKind::C, &straddle, 1.0).is_ok());
        let on_critical = ctx(2, 1.0, sum(1.0, 3.0, 3.0));
        assert!(matches!(psi_tilde(SeriesKind::C, &on_critical, 1.0), Err(Error::CriticalExponent(_))));
    }

    #[test]
    fn psi_e_examples() {
        let c = ctx(2, 1.0, sum(1.0, 3.0, 3.0));
        let v = psi_tilde_numeric(SeriesKind::E, &c, 1.0, 60).unwrap();
        assert!(rel(v.upper(), 1.0) < 1e-14);
        assert!(rel(psi_tilde(SeriesKind::E, &c, 1.0).unwrap(), 1.0) < 1e-14);

        let c = ctx(2, 1.0, PowerBound::constant(1.0));
        assert!(rel(psi_tilde(SeriesKind::E, &c, 1.0).unwrap(), 4.0 / 3.0) < 1e-14);
        // first summand of the constant series has index 0
        assert_eq!(psi_tilde_term(SeriesKind::E, &c, 1.0, 0).unwrap(), 1.0);

        let zero = ctx(2, 0.5, PowerBound::constant(0.0));
        for kind in [SeriesKind::E, SeriesKind::A, SeriesKind::C] {
            assert_eq!(psi_tilde(kind, &zero, 1.7).unwrap(), 0.0);
        }
    }

    #[test]
    fn wrong_direction_diverges() {
        let phi = sum(1.0, 3.0, 3.0);
        let space = PNormSpace::new(1, 1.0).unwrap();
        let bad = BoundContext::with_directions(params(2), space, phi, Directions::uniform(Direction::Expand));
        assert!(matches!(psi_tilde(SeriesKind::E, &bad, 1.0), Err(Error::DivergentSeries(_))));
        assert!(matches!(psi_tilde(SeriesKind::A, &bad, 1.0), Err(Error::DivergentSeries(_))));
        assert!(matches!(psi_tilde(SeriesKind::C, &bad, 1.0), Err(Error::DivergentSeries(_))));
    }

    #[test]
    fn quadratic_bound_examples() {
        let c = ctx(2, 1.0, sum(1.0, 3.0, 3.0));
        assert!(rel(stability_bound(BoundKind::Quadratic, &c, 1.0).unwrap(), 0.125) < 1e-14);
        assert!(rel(stability_bound(BoundKind::Quadratic, &c, -1.0).unwrap(), 0.125) < 1e-14);
        let c = ctx(2, 1.0, PowerBound::constant(1.0));
        assert!(rel(stability_bound(BoundKind::Quadratic, &c, 1.0).unwrap(), 1.0 / 6.0) < 1e-14);
        let z = ctx(3, 0.5, PowerBound::constant(0.0));
        for kind in [
            BoundKind::Quadratic,
            BoundKind::AdditiveG,
            BoundKind::CubicH,
            BoundKind::OddCombined,
            BoundKind::Full,
        ] {
            assert_eq!(stability_bound(kind, &z, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn delta_constants() {
        let c = ctx(2, 1.0, PowerBound::constant(1.0));
        assert!(rel(corollary_constant(ConstantKind::DeltaA, &c, 1.0).unwrap(), 34.0) < 1e-15);
        assert!(rel(corollary_constant(ConstantKind::DeltaC, &c, 1.0).unwrap(), 34.0 / 7.0) < 1e-15);
        assert!(rel(corollary_constant(ConstantKind::Cor33, &c, 1.0).unwrap(), 1.0 / 3.0) < 1e-15);
    }

    #[test]
    fn constants_reject_critical_exponents() {
        let space = PNormSpace::new(1, 1.0).unwrap();
        let c = BoundContext::with_directions(
            params(2),
            space,
            sum(1.0, 1.0, 2.0),
            Directions::uniform(Direction::Contract),
        );
        assert!(matches!(corollary_constant(ConstantKind::AlphaA, &c, 1.0), Err(Error::CriticalExponent(_))));
        assert!(matches!(corollary_constant(ConstantKind::Cor33, &c, 1.0), Err(Error::CriticalExponent(_))));
        assert!(corollary_constant(ConstantKind::BetaA, &c, 1.0).is_ok());
        assert!(matches!(corollary_constant(ConstantKind::EpsC, &c, 1.0), Err(Error::CriticalExponent(_))));
    }

    #[test]
    fn constant_full_bound_matches_series_at_p_one() {
        let c = ctx(2, 1.0, PowerBound::constant(1.0));
        let series = stability_bound(BoundKind::Full, &c, 1.0).unwrap();
        let closed = full_bound_power(&c, 1.0).unwrap();
        assert!(rel(series, closed) < 1e-13, "{series} vs {closed}");
    }

    #[test]
    fn sum_full_bound_example() {
        let c = ctx(2, 1.0, sum(1.0, 4.0, 4.0));
        let ga = corollary_constant(ConstantKind::GammaA, &c, 1.0).unwrap();
        let gc = corollary_constant(ConstantKind::GammaC, &c, 1.0).unwrap();
        let expect = (ga + gc) / (6.0 * 4.0 * 3.0) + 0.5 * (1.0f64 / 12.0);
        let got = full_bound_power(&c, 1.0).unwrap();
        assert!(rel(got, expect) < 1e-14);
        // p = 1, symmetric φ: the series form agrees with the closed form
        let series = stability_bound(BoundKind::Full, &c, 1.0).unwrap();
        assert!(rel(series, got) < 1e-12, "{series} vs {got}");
    }

    #[test]
    fn full_bound_band_checks() {
        let space = PNormSpace::new(1, 1.0).unwrap();
        let c = BoundContext::with_directions(params(2), space, sum(1.0, 1.5, 2.5), Directions::uniform(Direction::Contract));
        assert!(matches!(full_bound_power(&c, 1.0), Err(Error::CriticalExponent(_))));
        let prod = PowerBound::new(PhiForm::Product, 1.0, 1.0, 1.0).unwrap();
        let c = BoundContext::with_directions(params(2), space, prod, Directions::uniform(Direction::Contract));
        assert!(matches!(full_bound_power(&c, 1.0), Err(Error::CriticalExponent(_))));
        let c = ctx(2, 1.0, sum(0.0, 4.0, 4.0));
        assert_eq!(full_bound_power(&c, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn cross_checks_agree() {
        for k in [2, -2, 3] {
            for p in [1.0, 0.75, 0.5] {
                for (r, s) in [(0.0, 0.0), (0.5, 0.5), (1.5, 1.5), (2.5, 2.5), (4.0, 4.0), (0.3, 0.6)] {
                    for row in cross_check(params(k), p, r, s).unwrap() {
                        if row.exact {
                            assert!(row.relative_difference < 1e-9, "{row:?}");
                        } else {
                            assert!(row.closed_form >= row.from_series * (1.0 - 1e-12), "{row:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn product_form_degenerate_quadratic() {
        let prod = PowerBound::new(PhiForm::Product, 1.0, 2.0, 2.0).unwrap();
        let c = ctx(2, 1.0, prod);
        assert!(c.quadratic_degenerate());
        assert_eq!(stability_bound(BoundKind::Quadratic, &c, 1.0).unwrap(), 0.0);
        let table = bound_table(BoundKind::Full, &c, &[1.0, 2.0]).unwrap();
        assert_eq!(table.warnings.len(), 1);
    }

    #[test]
    fn bound_table_json_shape() {
        let c = ctx(2, 1.0, PowerBound::constant(1.0));
        let t = bound_table(BoundKind::Quadratic, &c, &[1.0]).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        for key in ["kind", "k", "p", "M", "theta", "r", "s", "form", "j", "constants", "per_x"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["j"], serde_json::json!([-1, -1, -1]));
        assert!((v["constants"]["delta_a"].as_f64().unwrap() - 34.0).abs() < 1e-12);
        assert!(v.get("warnings").is_none());
    }

    fn admissible_sum() -> impl Strategy<Value = (f64, f64)> {
        prop::sample::select(vec![(0.2, 0.7), (1.3, 1.8), (2.2, 2.9), (3.5, 5.0)])
    }

    proptest! {
        #[test]
        fn bounds_monotone_in_theta(
            t1 in 0.0..5.0f64, dt in 0.0..5.0f64, x in -4.0..4.0f64,
            (r, s) in admissible_sum(),
            p in prop::sample::select(vec![1.0, 0.75, 0.5]),
        ) {
            let lo = ctx(2, p, sum(t1, r, s));
            let hi = ctx(2, p, sum(t1 + dt, r, s));
            for kind in [BoundKind::Quadratic, BoundKind::OddCombined, BoundKind::Full] {
                let a = stability_bound(kind, &lo, x).unwrap();
                let b = stability_bound(kind, &hi, x).unwrap();
                prop_assert!(a <= b * (1.0 + 1e-14));
            }
            prop_assert!(full_bound_power(&lo, x.abs()).unwrap() <= full_bound_power(&hi, x.abs()).unwrap() * (1.0 + 1e-14));
        }

        #[test]
        fn equal_exponent_bounds_are_homogeneous(
            lam in prop::sample::select(vec![0.5, 1.5, 2.5, 4.0]),
            c in 0.1..10.0f64, x in 0.1..5.0f64,
            p in prop::sample::select(vec![1.0, 0.75, 0.5]),
            k in prop::sample::select(vec![-3i64, 2, 3]),
        ) {
            let b = ctx(k, p, sum(1.0, lam, lam));
            for kind in [BoundKind::Quadratic, BoundKind::AdditiveG, BoundKind::CubicH, BoundKind::Full] {
                let lhs = stability_bound(kind, &b, c * x).unwrap();
                let rhs = c.powf(lam) * stability_bound(kind, &b, x).unwrap();
                prop_assert!(rel(lhs, rhs) < 1e-12, "{:?}: {} vs {}", kind, lhs, rhs);
            }
            let lhs = full_bound_power(&b, c * x).unwrap();
            let rhs = c.powf(lam) * full_bound_power(&b, x).unwrap();
            prop_assert!(rel(lhs, rhs) < 1e-12);
        }

        #[test]
        fn symmetric_phi_gives_even_full_bound(x in -5.0..5.0f64, (r, s) in admissible_sum()) {
            let b = ctx(3, 0.75, sum(1.3, r, s));
            prop_assert_eq!(
                stability_bound(BoundKind::Full, &b, x).unwrap(),
                stability_bound(BoundKind::Full, &b, -x).unwrap()
            );
        }

        #[test]
        fn series_converges_iff_selected_direction(
            e in prop::sample::select(vec![0.0, 0.5, 1.5, 2.5, 3.5]),
            j in prop::sample::select(vec![1i64, -1]),
        ) {
            let space = PNormSpace::new(1, 0.75).unwrap();
            let phi = if e == 0.0 { PowerBound::constant(1.0) } else { sum(1.0, e, e) };
            let d = Direction::from_j(j).unwrap();
            let c = BoundContext::with_directions(params(2), space, phi, Directions::uniform(d));
            for (kind, crit) in [(SeriesKind::E, 2.0), (SeriesKind::A, 1.0), (SeriesKind::C, 3.0)] {
                let ok = psi_tilde(kind, &c, 1.0).is_ok();
                prop_assert_eq!(ok, select_direction(e, crit).unwrap() == d);
            }
        }
    }
}
