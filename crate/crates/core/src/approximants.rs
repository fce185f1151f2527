//! Direct-method limits recovering the quadratic, additive and cubic parts
//! of an approximate solution.
//!
//! With `g(x) = f(2x) - 8f(x)` and `h(x) = f(2x) - 2f(x)`:
//!
//! ```text
//! Q(x)  = lim k^(2nj) f_e(x / k^(nj))
//! A₀(x) = lim 2^(nj)  g(x / 2^(nj)),   A = -A₀/6
//! C₀(x) = lim 8^(nj)  h(x / 2^(nj)),   C =  C₀/6
//! ```
//!
//! `j = +1` contracts the argument, `j = -1` expands it.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equations::{parity_split, EquationParams, FunctionHandle};
use crate::error::{invalid, Error, Result};
use crate::quasinorm::CodomainVector;
use crate::scalar::Scalar;

/// Seed of the 32 probe points used to check that an input is odd.
pub const PARITY_SEED: u64 = 0x5EED_0DD5;
const PARITY_PROBES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Direction {
    /// `j = +1`
    Contract,
    /// `j = -1`
    Expand,
}

impl Direction {
    pub fn j(self) -> i64 {
        match self {
            Direction::Contract => 1,
            Direction::Expand => -1,
        }
    }

    pub fn from_j(j: i64) -> Result<Self> {
        match j {
            1 => Ok(Direction::Contract),
            -1 => Ok(Direction::Expand),
            _ => Err(invalid(format!("direction must be +1 or -1, got {j}"))),
        }
    }

    /// First summation index `(1 + j)/2` of the ψ̃ series.
    pub fn first_index(self) -> usize {
        match self {
            Direction::Contract => 1,
            Direction::Expand => 0,
        }
    }
}

impl TryFrom<i64> for Direction {
    type Error = Error;

    fn try_from(j: i64) -> Result<Self> {
        Self::from_j(j)
    }
}

impl From<Direction> for i64 {
    fn from(d: Direction) -> i64 {
        d.j()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.j())
    }
}

/// Per-component directions `(j_Q, j_A, j_C)`; serialises as `[jQ, jA, jC]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i64; 3]", into = "[i64; 3]")]
pub struct Directions {
    pub q: Direction,
    pub a: Direction,
    pub c: Direction,
}

impl Directions {
    pub fn new(q: Direction, a: Direction, c: Direction) -> Self {
        Self { q, a, c }
    }

    pub fn uniform(d: Direction) -> Self {
        Self::new(d, d, d)
    }
}

impl TryFrom<[i64; 3]> for Directions {
    type Error = Error;

    fn try_from(js: [i64; 3]) -> Result<Self> {
        Ok(Self::new(
            Direction::from_j(js[0])?,
            Direction::from_j(js[1])?,
            Direction::from_j(js[2])?,
        ))
    }
}

impl From<Directions> for [i64; 3] {
    fn from(d: Directions) -> [i64; 3] {
        [d.q.j(), d.a.j(), d.c.j()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterKind {
    Quadratic,
    Additive,
    Cubic,
}

/// One limit construction with its stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSpec<T> {
    kind: IterKind,
    params: EquationParams,
    direction: Direction,
    max_n: usize,
    tol: T,
    rate: T,
}

impl<T: Scalar> IterationSpec<T> {
    /// Defaults: `tol = 1e-10`; `max_n = 48` for the base-2 iterations and
    /// `⌊30 / log₂|k|⌋` for the quadratic one, so `k^(2n)` stays below `2^60`;
    /// `rate` from [`IterationSpec::default_rate`].
    pub fn new(kind: IterKind, params: EquationParams, direction: Direction) -> Self {
        Self {
            kind,
            params,
            direction,
            max_n: default_max_n(kind, params),
            tol: T::of(1e-10),
            rate: Self::default_rate(kind, params, direction),
        }
    }

    /// Per-step decay of a perturbation when nothing is known about it:
    /// bounded perturbations when expanding (`1/k²`, `1/2`, `1/8`), smooth
    /// ones when contracting (`1/k²`, `1/2`, `1/4`).
    pub fn default_rate(kind: IterKind, params: EquationParams, direction: Direction) -> T {
        let inv = |v: f64| T::of(v).recip();
        match (kind, direction) {
            (IterKind::Quadratic, _) => params.k_sq::<T>().recip(),
            (IterKind::Additive, _) => inv(2.0),
            (IterKind::Cubic, Direction::Expand) => inv(8.0),
            (IterKind::Cubic, Direction::Contract) => inv(4.0),
        }
    }

    /// Geometric rate `ρ ∈ (0, 1)` at which the perturbation part of the
    /// iterates shrinks; it sizes the predicted tail of the stopping rule.
    pub fn with_rate(mut self, rate: T) -> Result<Self> {
        if !(rate > T::zero() && rate < T::one()) {
            return Err(invalid(format!("rate must lie in (0, 1), got {rate}")));
        }
        self.rate = rate;
        Ok(self)
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn with_max_n(mut self, max_n: usize) -> Result<Self> {
        if max_n == 0 {
            return Err(invalid("max_n must be at least 1"));
        }
        self.max_n = max_n;
        Ok(self)
    }

    pub fn with_tol(mut self, tol: T) -> Result<Self> {
        if !(tol > T::zero()) || !tol.is_finite() {
            return Err(invalid(format!("tolerance must be positive, got {tol}")));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn kind(&self) -> IterKind {
        self.kind
    }

    pub fn params(&self) -> EquationParams {
        self.params
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    /// The `n`-th iterate at `x`.
    pub fn iterate(&self, f: &FunctionHandle<T>, x: T, n: usize) -> Result<CodomainVector<T>> {
        match self.kind {
            IterKind::Quadratic => iterate_quadratic(f, self.params, self.direction, x, n),
            IterKind::Additive => iterate_additive(f, self.direction, x, n),
            IterKind::Cubic => iterate_cubic(f, self.direction, x, n),
        }
    }
}

fn default_max_n(kind: IterKind, params: EquationParams) -> usize {
    match kind {
        IterKind::Additive | IterKind::Cubic => 48,
        IterKind::Quadratic => {
            let bits = (params.k().unsigned_abs() as f64).log2();
            ((30.0 / bits).floor() as usize).max(1)
        }
    }
}

/// Overrides applied to every [`IterationSpec`] built by the decompositions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitControl<T> {
    /// `None` keeps each kind's default.
    pub max_n: Option<usize>,
    pub tol: T,
    /// Decay rates for `(Q, A, C)`; `None` keeps the defaults.
    pub rates: Option<[T; 3]>,
}

impl<T: Scalar> Default for LimitControl<T> {
    fn default() -> Self {
        Self {
            max_n: None,
            tol: T::of(1e-10),
            rates: None,
        }
    }
}

impl<T: Scalar> LimitControl<T> {
    pub fn spec(
        &self,
        kind: IterKind,
        params: EquationParams,
        direction: Direction,
    ) -> Result<IterationSpec<T>> {
        let mut spec = IterationSpec::new(kind, params, direction).with_tol(self.tol)?;
        if let Some(rates) = self.rates {
            let i = match kind {
                IterKind::Quadratic => 0,
                IterKind::Additive => 1,
                IterKind::Cubic => 2,
            };
            spec = spec.with_rate(rates[i])?;
        }
        match self.max_n {
            Some(n) => spec.with_max_n(n),
            None => Ok(spec),
        }
    }
}

fn int_pow<T: Scalar>(base: T, n: usize) -> T {
    let (mut acc, mut b, mut e) = (T::one(), base, n);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b;
        }
        b = b * b;
        e >>= 1;
    }
    acc
}

fn overflow(n: usize, what: &str) -> Error {
    Error::Overflow {
        n,
        what: what.to_string(),
    }
}

/// `weight^(nj) · inner(x / base^(nj))`, the common shape of all three
/// iterations.
fn dilated<T: Scalar>(
    inner: impl Fn(T) -> CodomainVector<T>,
    base: T,
    weight: T,
    dir: Direction,
    x: T,
    n: usize,
) -> Result<CodomainVector<T>> {
    let b = int_pow(base, n);
    let w = int_pow(weight, n);
    if !b.is_finite() || !w.is_finite() {
        return Err(overflow(n, "dilation factor"));
    }
    let v = match dir {
        Direction::Contract => inner(x / b).scaled(w),
        Direction::Expand => {
            let y = x * b;
            if !y.is_finite() {
                return Err(overflow(n, "argument"));
            }
            CodomainVector::new(inner(y).components().iter().map(|&c| c / w).collect())
        }
    };
    if !v.is_finite() {
        return Err(overflow(n, "iterate"));
    }
    Ok(v)
}

/// `k^(2nj) f(x / k^(nj))`.
pub fn iterate_quadratic<T: Scalar>(
    f: &FunctionHandle<T>,
    params: EquationParams,
    dir: Direction,
    x: T,
    n: usize,
) -> Result<CodomainVector<T>> {
    let k = params.k_as::<T>().abs();
    dilated(|t| f.eval(t), k, k * k, dir, x, n)
}

/// `2^(nj) g(x / 2^(nj))` with `g(x) = f(2x) - 8f(x)`.
pub fn iterate_additive<T: Scalar>(
    f: &FunctionHandle<T>,
    dir: Direction,
    x: T,
    n: usize,
) -> Result<CodomainVector<T>> {
    let (two, eight) = (T::of(2.0), T::of(8.0));
    let g = |t: T| {
        let mut v = f.eval(two * t);
        v.add_scaled(-eight, &f.eval(t));
        v
    };
    dilated(g, two, two, dir, x, n)
}

/// `8^(nj) h(x / 2^(nj))` with `h(x) = f(2x) - 2f(x)`.
pub fn iterate_cubic<T: Scalar>(
    f: &FunctionHandle<T>,
    dir: Direction,
    x: T,
    n: usize,
) -> Result<CodomainVector<T>> {
    let two = T::of(2.0);
    let h = |t: T| {
        let mut v = f.eval(two * t);
        v.add_scaled(-two, &f.eval(t));
        v
    };
    dilated(h, two, T::of(8.0), dir, x, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    /// Index of the accepted iterate (1 for a stationary sequence).
    pub n_used: usize,
    /// p-norm distance between the last two iterates computed.
    pub last_step: f64,
    /// Effective tolerance `tol · (1 + ‖iterate₀‖)`.
    pub tol: f64,
    pub converged: bool,
    /// The sequence left the floating-point range before settling.
    pub overflowed: bool,
}

/// Consecutive Cauchy steps within tolerance needed to accept a limit.
pub const CAUCHY_RUN: usize = 2;

/// Steps below this many ulps of the scale, or this fraction of the
/// tolerance, count as rounding noise.
const STATIONARY_ULPS: f64 = 1024.0;
const STATIONARY_FRACTION: f64 = 1e-6;

/// Iterates `n = 1, 2, …` until [`CAUCHY_RUN`] consecutive steps are within
/// `tol · (1 + ‖iterate₀(x)‖)` and so is the predicted tail, or `max_n` is
/// reached; a final step within tolerance at `max_n` is also accepted.
/// `n_used` is the first `n` of the accepted run. Overflow ends the run as
/// not converged.
///
/// The predicted tail is `env ρ/(1 - ρ)` with `env = max_m step_m ρ^(n-m)`,
/// and a run whose last step rises above both the previous step and `ρ env`
/// is not accepted: an oscillating perturbation can look additive (or
/// quadratic, cubic) over several dilations, with small but growing steps.
/// A sequence whose steps never exceed rounding level (or `1e-6` of the
/// tolerance) is accepted without these tests.
pub fn take_limit<T: Scalar>(
    spec: &IterationSpec<T>,
    f: &FunctionHandle<T>,
    x: T,
) -> (CodomainVector<T>, ConvergenceDiagnostics) {
    let space = *f.space();
    let mut prev = match spec.iterate(f, x, 0) {
        Ok(v) => v,
        Err(_) => {
            let nan = CodomainVector::new(vec![T::nan(); space.dim()]);
            return (
                nan,
                ConvergenceDiagnostics {
                    n_used: 0,
                    last_step: f64::INFINITY,
                    tol: spec.tol.lossy_f64(),
                    converged: false,
                    overflowed: true,
                },
            );
        }
    };
    let scale = T::one() + space.norm(&prev);
    let tol = spec.tol * scale;
    let floor = (scale * T::roundoff() * T::of(STATIONARY_ULPS)).max(tol * T::of(STATIONARY_FRACTION));
    let mut diag = ConvergenceDiagnostics {
        n_used: 0,
        last_step: f64::INFINITY,
        tol: tol.lossy_f64(),
        converged: false,
        overflowed: false,
    };
    let rate = spec.rate;
    let tail_factor = rate / (T::one() - rate);
    let mut envelope = T::zero();
    let mut stationary = true;
    let mut last = T::infinity();
    let mut run_start: Option<usize> = None;
    for n in 1..=spec.max_n {
        let cur = match spec.iterate(f, x, n) {
            Ok(v) => v,
            Err(_) => {
                diag.n_used = n - 1;
                diag.overflowed = true;
                return (prev, diag);
            }
        };
        let step = space.norm(&(&cur - &prev));
        stationary &= step <= floor;
        // rising above both the previous step and the predicted decay
        let growing = step > last && step > envelope * rate;
        last = step;
        envelope = (envelope * rate).max(step);
        diag.last_step = step.lossy_f64();
        diag.n_used = n;
        prev = cur;
        if step <= tol {
            let first = *run_start.get_or_insert(n);
            let settled = n + 1 - first >= CAUCHY_RUN
                && (stationary || (!growing && envelope * tail_factor <= tol));
            if settled || n == spec.max_n {
                diag.n_used = first.max((n + 1).saturating_sub(CAUCHY_RUN));
                diag.converged = true;
                return (prev, diag);
            }
        } else {
            run_start = None;
        }
    }
    (prev, diag)
}

/// Aggregate of the diagnostics of every point a component was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub points: usize,
    pub converged: usize,
    pub overflowed: usize,
    pub max_n_used: usize,
    pub max_last_step: f64,
}

impl DiagnosticsSummary {
    pub fn all_converged(&self) -> bool {
        self.converged == self.points
    }
}

type Memo<T> = RwLock<HashMap<(u64, u64), (CodomainVector<T>, ConvergenceDiagnostics)>>;

struct ComponentInner<T> {
    spec: IterationSpec<T>,
    source: FunctionHandle<T>,
    numerator: T,
    denominator: T,
    memo: Memo<T>,
}

/// Lazily evaluated limit `(numerator / denominator) · lim iterate(x)`,
/// memoised per point. Clones share the cache.
#[derive(Clone)]
pub struct RecoveredComponent<T> {
    inner: Arc<ComponentInner<T>>,
}

impl<T: Scalar> RecoveredComponent<T> {
    fn new(spec: IterationSpec<T>, source: FunctionHandle<T>, numerator: f64, denominator: f64) -> Self {
        Self {
            inner: Arc::new(ComponentInner {
                spec,
                source,
                numerator: T::of(numerator),
                denominator: T::of(denominator),
                memo: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn spec(&self) -> &IterationSpec<T> {
        &self.inner.spec
    }

    /// Value and diagnostics at `x`.
    pub fn evaluate(&self, x: T) -> (CodomainVector<T>, ConvergenceDiagnostics) {
        let key = x.key_bits();
        if let Some(hit) = self.inner.memo.read().expect("memo lock").get(&key) {
            return hit.clone();
        }
        let (lim, diag) = take_limit(&self.inner.spec, &self.inner.source, x);
        let (num, den) = (self.inner.numerator, self.inner.denominator);
        let value = CodomainVector::new(
            lim.components().iter().map(|&c| c * num / den).collect(),
        );
        self.inner
            .memo
            .write()
            .expect("memo lock")
            .entry(key)
            .or_insert((value, diag))
            .clone()
    }

    pub fn eval(&self, x: T) -> CodomainVector<T> {
        self.evaluate(x).0
    }

    pub fn diagnostics(&self, x: T) -> ConvergenceDiagnostics {
        self.evaluate(x).1
    }

    /// Summary over every point evaluated so far.
    pub fn summary(&self) -> DiagnosticsSummary {
        let memo = self.inner.memo.read().expect("memo lock");
        let mut s = DiagnosticsSummary {
            points: memo.len(),
            converged: 0,
            overflowed: 0,
            max_n_used: 0,
            max_last_step: 0.0,
        };
        for (_, d) in memo.values() {
            s.converged += usize::from(d.converged);
            s.overflowed += usize::from(d.overflowed);
            s.max_n_used = s.max_n_used.max(d.n_used);
            s.max_last_step = s.max_last_step.max(d.last_step);
        }
        s
    }

    /// The component as an ordinary function handle (sharing the cache).
    pub fn handle(&self) -> FunctionHandle<T> {
        let me = self.clone();
        FunctionHandle::from_normalized(*self.inner.source.space(), move |x| me.eval(x))
    }
}

impl<T: Scalar> fmt::Debug for RecoveredComponent<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecoveredComponent")
            .field("spec", &self.inner.spec)
            .field("summary", &self.summary())
            .finish()
    }
}

/// Additive and cubic parts of an odd function.
#[derive(Debug, Clone)]
pub struct OddDecomposition<T: Scalar> {
    pub a: RecoveredComponent<T>,
    pub c: RecoveredComponent<T>,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult<T: Scalar> {
    pub a: RecoveredComponent<T>,
    pub q: RecoveredComponent<T>,
    pub c: RecoveredComponent<T>,
    pub directions: Directions,
    /// `f(0)` removed from the input before decomposing.
    pub offset: CodomainVector<T>,
}

impl<T: Scalar> DecompositionResult<T> {
    /// `f(x) - A(x) - Q(x) - C(x)` for the normalised `f`.
    pub fn remainder(&self, f: &FunctionHandle<T>, x: T) -> CodomainVector<T> {
        let mut r = f.eval(x);
        r.add_scaled(-T::one(), &self.a.eval(x));
        r.add_scaled(-T::one(), &self.q.eval(x));
        r.add_scaled(-T::one(), &self.c.eval(x));
        r
    }

    /// Summaries for `(Q, A, C)`.
    pub fn summaries(&self) -> [DiagnosticsSummary; 3] {
        [self.q.summary(), self.a.summary(), self.c.summary()]
    }

    pub fn all_converged(&self) -> bool {
        self.summaries().iter().all(DiagnosticsSummary::all_converged)
    }
}

/// Checks `‖f(x) + f(-x)‖ ≤ 1e-9 (1 + ‖f(x)‖)` at [`PARITY_SEED`] probes in
/// `[-10, 10]`.
fn check_odd<T: Scalar>(f: &FunctionHandle<T>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(PARITY_SEED);
    let slack = T::of(1e-9);
    for _ in 0..PARITY_PROBES {
        let x = T::of(rng.random_range(-10.0..10.0));
        let fx = f.eval(x);
        let sum = &fx + &f.eval(-x);
        let space = f.space();
        if space.norm(&sum) > slack * (T::one() + space.norm(&fx)) {
            return Err(invalid(format!(
                "function is not odd: f({x}) + f(-{x}) has norm {}",
                space.norm(&sum)
            )));
        }
    }
    Ok(())
}

/// `A = -(1/6) lim 2^(nj) g(x/2^(nj))`, `C = (1/6) lim 8^(nj) h(x/2^(nj))`.
pub fn decompose_odd<T: Scalar>(
    f_odd: &FunctionHandle<T>,
    params: EquationParams,
    j_a: Direction,
    j_c: Direction,
    ctrl: &LimitControl<T>,
) -> Result<OddDecomposition<T>> {
    check_odd(f_odd)?;
    Ok(OddDecomposition {
        a: RecoveredComponent::new(
            ctrl.spec(IterKind::Additive, params, j_a)?,
            f_odd.clone(),
            -1.0,
            6.0,
        ),
        c: RecoveredComponent::new(
            ctrl.spec(IterKind::Cubic, params, j_c)?,
            f_odd.clone(),
            1.0,
            6.0,
        ),
    })
}

/// `Q` from the even part, `(A, C)` from the odd part.
pub fn decompose_full<T: Scalar>(
    f: &FunctionHandle<T>,
    params: EquationParams,
    directions: Directions,
    ctrl: &LimitControl<T>,
) -> Result<DecompositionResult<T>> {
    let (even, odd) = parity_split(f);
    let q = RecoveredComponent::new(
        ctrl.spec(IterKind::Quadratic, params, directions.q)?,
        even,
        1.0,
        1.0,
    );
    let OddDecomposition { a, c } = decompose_odd(&odd, params, directions.a, directions.c, ctrl)?;
    Ok(DecompositionResult {
        a,
        q,
        c,
        directions,
        offset: f.offset().clone(),
    })
}
