//! Regular variation toolkit: numerical limits, index estimation, Karamata
//! integral ratios, left-continuous inverses and Γ-variation.
//!
//! Every limit is estimated the same way: sample on a geometric grid, apply
//! two stages of Richardson extrapolation with an estimated order (Aitken
//! form), and report the gap between the last two extrapolants.

use crate::error::{Error, Result};
use crate::quad::{integrate_panels, Tol};
use std::sync::Arc;

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToInfinity,
    ToZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    /// Gap between the last two extrapolants.
    pub stderr: f64,
    pub grid: Vec<f64>,
    pub converged: bool,
}

impl LimitEstimate {
    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.value - target).abs() <= tol
    }
}

fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    if d1 == 0.0 || d2 == 0.0 {
        return x2;
    }
    let lam = d2 / d1;
    if !(lam.abs() < 0.98) {
        return x2;
    }
    x2 + d2 * lam / (1.0 - lam)
}

fn stage(v: &[f64]) -> Vec<f64> {
    v.windows(3).map(|w| aitken(w[0], w[1], w[2])).collect()
}

fn oscillates(v: &[f64]) -> bool {
    if v.len() < 4 {
        return false;
    }
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let tail = &d[d.len() - 3..];
    let noise = 1e-13 * scale;
    tail.iter().all(|x| x.abs() > noise)
        && tail.windows(2).all(|w| w[0].signum() != w[1].signum())
        && tail.windows(2).all(|w| w[1].abs() >= w[0].abs())
}

/// Extrapolates the limit of `samples` (abscissa, value) along a geometric
/// abscissa sequence.
pub fn limit_extrapolate(samples: &[(f64, f64)], direction: Direction, tol: f64) -> Result<LimitEstimate> {
    if samples.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 samples, got {}", samples.len())));
    }
    let grid: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let ratio = grid[1] / grid[0];
    for w in grid.windows(2) {
        let r = w[1] / w[0];
        if !(r > 0.0) || ((r - ratio) / ratio).abs() > 0.01 {
            return Err(Error::InvalidInput("abscissae are not geometric".into()));
        }
    }
    let ok_dir = match direction {
        Direction::ToInfinity => ratio > 1.0,
        Direction::ToZero => ratio < 1.0,
    };
    if !ok_dir {
        return Err(Error::InvalidInput(format!("grid ratio {ratio} does not move {direction:?}")));
    }
    let v: Vec<f64> = samples.iter().map(|p| p.1).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample value".into()));
    }
    if oscillates(&v) {
        // No extrapolation across an oscillation; it counts as converged
        // only if its amplitude is already below the tolerance.
        let n = v.len();
        let stderr = (v[n - 1] - v[n - 2]).abs();
        return Ok(LimitEstimate { value: 0.5 * (v[n - 1] + v[n - 2]), stderr, grid, converged: stderr < tol });
    }
    let s1 = stage(&v);
    let s2 = stage(&s1);
    let ex = if s2.len() >= 2 { s2 } else { s1 };
    let n = ex.len();
    let value = ex[n - 1];
    let stderr = (ex[n - 1] - ex[n - 2]).abs();
    Ok(LimitEstimate { value, stderr, grid, converged: stderr < tol })
}

/// How a sampling grid approaches its limit point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// The abscissa itself is geometric.
    Algebraic,
    /// The logarithm of the abscissa is geometric; suited to slowly varying
    /// corrections such as powers of `1/ln u`.
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub scale: Scale,
    /// First abscissa (Algebraic) or first |ln abscissa| (Logarithmic).
    pub start: f64,
    /// Growth factor per step, > 1.
    pub ratio: f64,
    pub n: usize,
}

impl Grid {
    pub const fn algebraic(start: f64, ratio: f64, n: usize) -> Self {
        Grid { scale: Scale::Algebraic, start, ratio, n }
    }
    pub const fn logarithmic(start: f64, ratio: f64, n: usize) -> Self {
        Grid { scale: Scale::Logarithmic, start, ratio, n }
    }

    /// Points as logarithms of the abscissa, ordered toward the limit.
    pub fn log_points(&self, dir: Direction) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let g = self.ratio.powi(j as i32);
                match (self.scale, dir) {
                    (Scale::Algebraic, Direction::ToInfinity) => (self.start * g).ln(),
                    (Scale::Algebraic, Direction::ToZero) => (self.start / g).ln(),
                    (Scale::Logarithmic, Direction::ToInfinity) => self.start * g,
                    (Scale::Logarithmic, Direction::ToZero) => -self.start * g,
                }
            })
            .collect()
    }

    /// Extrapolates values sampled at `log_points(dir)`.
    pub fn estimate(&self, values: &[f64], dir: Direction, tol: f64) -> Result<LimitEstimate> {
        let pts = self.log_points(dir);
        let samples: Vec<(f64, f64)> = match self.scale {
            Scale::Algebraic => pts.iter().map(|s| s.exp()).zip(values.iter().copied()).collect(),
            Scale::Logarithmic => pts.iter().map(|s| s.abs()).zip(values.iter().copied()).collect(),
        };
        let d = match self.scale {
            Scale::Algebraic => dir,
            Scale::Logarithmic => Direction::ToInfinity,
        };
        limit_extrapolate(&samples, d, tol)
    }

    /// Evaluates `g` at each log-point and extrapolates.
    pub fn limit<G: Fn(f64) -> Result<f64>>(&self, dir: Direction, tol: f64, g: G) -> Result<LimitEstimate> {
        let vals = self.log_points(dir).into_iter().map(g).collect::<Result<Vec<f64>>>()?;
        self.estimate(&vals, dir, tol)
    }
}

pub type LogMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A positive function on `[A, ∞)`, stored as `s ↦ ln Z(e^s)` so that
/// evaluation far out on the half-line never overflows.
#[derive(Clone)]
pub struct RegVarFunction {
    ln_z: LogMap,
    pub a: f64,
    pub declared_index: Option<f64>,
}

impl std::fmt::Debug for RegVarFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegVarFunction").field("a", &self.a).field("declared_index", &self.declared_index).finish()
    }
}

impl RegVarFunction {
    pub fn from_log<L: Fn(f64) -> f64 + Send + Sync + 'static>(ln_z: L, a: f64, declared_index: Option<f64>) -> Self {
        RegVarFunction { ln_z: Arc::new(ln_z), a, declared_index }
    }

    pub fn from_fn<Z: Fn(f64) -> f64 + Send + Sync + 'static>(z: Z, a: f64, declared_index: Option<f64>) -> Self {
        Self::from_log(move |s: f64| z(s.exp()).ln(), a, declared_index)
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.ln_z)(u.ln()).exp()
    }

    /// `ln Z(e^s)`.
    pub fn ln_at(&self, s: f64) -> f64 {
        (self.ln_z)(s)
    }
}

/// Estimates q in `Z(ξu)/Z(u) → ξ^q` by extrapolating
/// `ln(Z(ξu)/Z(u))/ln ξ` for each ξ and pooling.
pub fn rv_index_estimate(z: &RegVarFunction, xi_set: &[f64], grid: &Grid, tol: f64) -> Result<LimitEstimate> {
    if xi_set.is_empty() {
        return Err(Error::InvalidInput("empty scale set".into()));
    }
    for &xi in xi_set {
        if !(xi > 0.0) || xi == 1.0 {
            return Err(Error::InvalidInput(format!("scale factor {xi} must be positive and != 1")));
        }
    }
    let pts = grid.log_points(Direction::ToInfinity);
    if pts[0] < z.a.ln() {
        return Err(Error::Domain(format!("grid starts below A = {}", z.a)));
    }
    let mut ests = Vec::with_capacity(xi_set.len());
    for &xi in xi_set {
        let lx = xi.ln();
        let mut vals = Vec::with_capacity(pts.len());
        for &s in &pts {
            let (a, b) = (z.ln_at(s + lx), z.ln_at(s));
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Domain(format!("Z is not positive near u = e^{s}")));
            }
            vals.push((a - b) / lx);
        }
        ests.push(grid.estimate(&vals, Direction::ToInfinity, tol)?);
    }
    let value = ests.iter().map(|e| e.value).sum::<f64>() / ests.len() as f64;
    let spread = ests.iter().fold(0.0f64, |m, e| m.max((e.value - value).abs()));
    let stderr = ests.iter().fold(spread, |m, e| m.max(e.stderr));
    let converged = ests.iter().all(|e| e.converged) && spread < tol;
    Ok(LimitEstimate { value, stderr, grid: ests[0].grid.clone(), converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `∫_A^u x^j Z(x) dx`
    Lower,
    /// `∫_u^∞ x^j Z(x) dx`
    Upper,
}

/// Extrapolates `u^{j+1} Z(u) / ∫ x^j Z(x) dx`; for `Z ∈ RV_q` the limit is
/// `j+q+1` (lower side) or `-(j+q+1)` (upper side).
pub fn karamata_direct_check(z: &RegVarFunction, q: f64, j: f64, side: Side, grid: &Grid, tol: f64) -> Result<LimitEstimate> {
    let c = j + q + 1.0;
    match side {
        Side::Lower if c < 0.0 => return Err(Error::Precondition(format!("lower-side ratio needs j >= -(q+1); got j = {j}, q = {q}"))),
        Side::Upper if c >= 0.0 => {
            return Err(Error::Precondition(format!(
                "upper tail of x^j Z(x) diverges: integrability needs j < -(q+1); got j = {j}, q = {q}"
            )))
        }
        _ => {}
    }
    let la = z.a.ln();
    let itol = Tol { abs: 1e-300, rel: 1e-13 };
    grid.limit(Direction::ToInfinity, tol, |s| {
        let base = z.ln_at(s);
        if !base.is_finite() {
            return Err(Error::Domain(format!("Z is not positive near u = e^{s}")));
        }
        // Integrand relative to the value at u, in the variable σ = ln x.
        let g = |sig: f64| ((j + 1.0) * (sig - s) + z.ln_at(sig) - base).exp();
        let integral = match side {
            Side::Lower => {
                let lo = if c > 0.05 { la.max(s - 60.0 / c) } else { la };
                integrate_panels(g, lo, s, 1.0, itol)?.value
            }
            Side::Upper => {
                let w = 60.0 / (-c);
                let far = g(s + w);
                if !(far < 1e-12) {
                    return Err(Error::Precondition("upper tail of x^j Z(x) fails to decay: integrability proviso violated".into()));
                }
                integrate_panels(g, s, s + w, 1.0, itol)?.value
            }
        };
        Ok(1.0 / integral)
    })
}

/// Shrinks a bracket with `H(lo) < y <= H(hi)` to the smallest point where
/// `H >= y`, mixing Illinois false-position steps with bisection.
fn refine<H: Fn(f64) -> f64>(h: &H, y: f64, mut lo: f64, mut hi: f64, mut hlo: f64, mut hhi: f64, xtol: f64) -> Result<f64> {
    let mut side = 0i32;
    let mut wide = 0;
    for _ in 0..400 {
        let width = hi - lo;
        if width <= xtol * hi.abs().max(lo.abs()).max(1.0) {
            return Ok(hi);
        }
        let mut x = if wide >= 2 || hhi == hlo {
            0.5 * (lo + hi)
        } else {
            let (mut fl, mut fh) = (hlo - y, hhi - y);
            if side == -1 {
                fh *= 0.5;
            } else if side == 1 {
                fl *= 0.5;
            }
            lo + (hi - lo) * fl / (fl - fh)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let hx = h(x);
        if hx.is_nan() {
            return Err(Error::Domain(format!("H is undefined at {x}")));
        }
        let slack = 1e-12 * (hlo.abs() + hhi.abs());
        if hx < hlo - slack || hx > hhi + slack {
            return Err(Error::NonMonotone { at: x });
        }
        if hx >= y {
            hi = x;
            hhi = hx;
            side = if side == 1 { 2 } else { 1 };
        } else {
            lo = x;
            hlo = hx;
            side = if side == -1 { -2 } else { -1 };
        }
        wide = if hi - lo > 0.5 * width { wide + 1 } else { 0 };
    }
    Ok(hi)
}

/// Left-continuous inverse `H^←(y) = inf{s : H(s) >= y}` of a non-decreasing
/// `H` whose domain starts at `lo`. The upper end is doubled until it
/// brackets `y`.
pub fn left_inverse<H: Fn(f64) -> f64>(h: H, y: f64, bracket: (f64, f64), xtol: f64) -> Result<f64> {
    let (lo, mut hi) = bracket;
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!("empty bracket ({lo}, {hi})")));
    }
    let hlo = h(lo);
    if hlo >= y {
        return Ok(lo);
    }
    let mut hhi = h(hi);
    let mut n = 0;
    while !(hhi >= y) {
        if hhi < hlo {
            return Err(Error::NonMonotone { at: hi });
        }
        n += 1;
        if n > 64 || !hi.is_finite() {
            return Err(Error::Unbracketable { target: y, last_hi: hi });
        }
        hi = lo + 2.0 * (hi - lo);
        hhi = h(hi);
    }
    refine(&h, y, lo, hi, hlo, hhi, xtol)
}

/// Solves `H(s) = y` for a non-decreasing `H` on the whole line, expanding a
/// bracket around `guess` in both directions.
pub fn invert_increasing<H: Fn(f64) -> f64>(h: H, y: f64, guess: f64, step: f64, xtol: f64) -> Result<f64> {
    let mut lo = guess - step;
    let mut hi = guess + step;
    let mut hlo = h(lo);
    let mut hhi = h(hi);
    let mut w = step;
    let mut n = 0;
    while !(hlo < y) {
        n += 1;
        if n > 64 || hlo.is_nan() {
            return Err(Error::Unbracketable { target: y, last_hi: lo });
        }
        w *= 2.0;
        hi = lo;
        hhi = hlo;
        lo -= w;
        hlo = h(lo);
    }
    while !(hhi >= y) {
        n += 1;
        if n > 128 || hhi.is_nan() {
            return Err(Error::Unbracketable { target: y, last_hi: hi });
        }
        w *= 2.0;
        lo = hi;
        hlo = hhi;
        hi += w;
        hhi = h(hi);
    }
    refine(&h, y, lo, hi, hlo, hhi, xtol)
}

/// Extrapolates `U(y + λ g(y)) / U(y)`; Γ-variation means the limit is
/// `e^λ`. `ln_u` is `ln U` as a function of `y`.
pub fn gamma_variation_check<U, G>(ln_u: U, g: G, lambda: f64, grid: &Grid, tol: f64) -> Result<LimitEstimate>
where
    U: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    grid.limit(Direction::ToInfinity, tol, |s| {
        let y = s.exp();
        let gy = g(y);
        if !(gy > 0.0) {
            return Err(Error::Domain(format!("auxiliary function not positive at {y}")));
        }
        let y2 = y + lambda * gy;
        if !(y2 > 0.0) {
            return Err(Error::Domain(format!("y + λg(y) = {y2} leaves the domain")));
        }
        let r = ln_u(y2) - ln_u(y);
        if !r.is_finite() {
            return Err(Error::Domain(format!("U not finite near {y}")));
        }
        Ok(r.exp())
    })
}

/// `L(u) = M̄ exp(∫_B^u y(t)/t dt)` with `y → 0`.
#[derive(Clone)]
pub struct KaramataRepresentation {
    pub b: f64,
    pub m_bar: f64,
    pub y: LogMap,
    pub normalised: bool,
}

impl KaramataRepresentation {
    pub fn new<Y: Fn(f64) -> f64 + Send + Sync + 'static>(b: f64, m_bar: f64, y: Y) -> Result<Self> {
        if !(b > 0.0) || !(m_bar > 0.0) {
            return Err(Error::InvalidInput("B and M̄ must be positive".into()));
        }
        Ok(KaramataRepresentation { b, m_bar, y: Arc::new(y), normalised: true })
    }

    /// `ln L₀(e^s)`; the integral runs in the variable `ln t`.
    pub fn ln_eval(&self, s: f64) -> Result<f64> {
        let y = &self.y;
        let q = integrate_panels(|x: f64| y(x.exp()), self.b.ln(), s, 1.0, Tol { abs: 1e-15, rel: 1e-13 })?;
        Ok(self.m_bar.ln() + q.value)
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        Ok(self.ln_eval(u.ln())?.exp())
    }

    pub fn into_regvar(self, q: f64) -> RegVarFunction {
        let rep = self;
        RegVarFunction::from_log(move |s| q * s + rep.ln_eval(s).unwrap_or(f64::NAN), 1.0, Some(q))
    }
}
