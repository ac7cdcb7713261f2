//! Weights `k` on `(0, ν)`: the integral `K`, the ratio `K/k` and its
//! derivative, classification into the power-like and flat families, and
//! construction from the two canonical representations.

use crate::error::{Error, Result};
use crate::expr::{central_diff, Fn1, ScalarFn};
use crate::quad::{integrate, integrate_capped, integrate_panels, Tol};
use crate::regvar::{limit_extrapolate, rv_index_estimate, Direction, Grid, LimitEstimate, RegVarFunction, Scale};
use std::sync::Arc;

/// A difference between the values at `s` and at `t`, called as
/// `(s, x, t)` with `x = t − s`; both `s` and `x` are passed so that
/// whichever is small keeps its full relative precision.
type Gap = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A positive, non-decreasing weight stored through `ln k` and `k′/k`.
#[derive(Clone)]
pub struct WeightFunction {
    ln_k: Fn1,
    dlog: Fn1,
    /// `ln k(s) − ln k(t)`, when it can be formed without cancellation.
    ln_ratio: Option<Gap>,
    /// `k′/k(s) − k′/k(t)`, likewise.
    dlog_diff: Option<Gap>,
    pub nu: f64,
    pub label: String,
}

impl std::fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightFunction").field("label", &self.label).field("nu", &self.nu).finish()
    }
}

/// `K/k` and `(K/k)′` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRatio {
    pub t: f64,
    pub ln_k: f64,
    pub dlog: f64,
    pub k_over: f64,
    pub deriv: f64,
}

impl KRatio {
    /// `ln K(t)`.
    pub fn ln_big_k(&self) -> f64 {
        self.ln_k + self.k_over.ln()
    }
}

impl WeightFunction {
    pub fn from_log<L, D>(label: &str, nu: f64, ln_k: L, dlog: D) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        WeightFunction { ln_k: Arc::new(ln_k), dlog: Arc::new(dlog), ln_ratio: None, dlog_diff: None, nu, label: label.into() }
    }

    pub fn with_ratio<R: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static>(mut self, r: R) -> Self {
        self.ln_ratio = Some(Arc::new(r));
        self
    }

    pub fn with_dlog_diff<R: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static>(mut self, r: R) -> Self {
        self.dlog_diff = Some(Arc::new(r));
        self
    }

    /// A weight given only by its values; `k′` comes from central differences
    /// of `ln k` with a step proportional to `t`.
    pub fn from_fn<K: Fn(f64) -> f64 + Send + Sync + 'static>(label: &str, nu: f64, k: K) -> Self {
        let ln_k: Fn1 = Arc::new(move |t| k(t).ln());
        let l2 = ln_k.clone();
        WeightFunction {
            ln_k,
            dlog: Arc::new(move |t| central_diff(|x| l2(x), t, 1e-3 * t)),
            ln_ratio: None,
            dlog_diff: None,
            nu,
            label: label.into(),
        }
    }

    /// `k(t) = √C₀ t^{γ/2}`.
    pub fn power(c0: f64, gamma: f64) -> Result<Self> {
        if !(c0 > 0.0) || !(gamma >= 0.0) {
            return Err(Error::InvalidInput(format!("power weight needs C₀ > 0, γ ≥ 0 (got {c0}, {gamma})")));
        }
        let a = 0.5 * gamma;
        let lc = 0.5 * c0.ln();
        Ok(Self::from_log(&format!("power(C0={c0}, gamma={gamma})"), f64::INFINITY, move |t| lc + a * t.ln(), move |t| a / t)
            .with_ratio(move |s, x, _| -a * log_gap(s, x)))
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("constant weight must be positive, got {c}")));
        }
        let lc = c.ln();
        Ok(Self::from_log(&format!("constant({c})"), f64::INFINITY, move |_| lc, |_| 0.0).with_ratio(|_, _, _| 0.0))
    }

    /// `k(t) = exp(−t^{−ζ})`.
    pub fn exp_flat(zeta: f64) -> Result<Self> {
        if !(zeta > 0.0) {
            return Err(Error::InvalidInput(format!("ζ must be positive, got {zeta}")));
        }
        Ok(Self::from_log(&format!("exp_flat(zeta={zeta})"), f64::INFINITY, move |t| -t.powf(-zeta), move |t| zeta * t.powf(-zeta - 1.0))
            // t^{−ζ} − s^{−ζ} = −t^{−ζ} expm1(ζ ln(t/s))
            .with_ratio(move |s, x, t| -t.powf(-zeta) * (zeta * log_gap(s, x)).exp_m1())
            .with_dlog_diff(move |s, x, _| -zeta * s.powf(-zeta - 1.0) * (-(zeta + 1.0) * log_gap(s, x)).exp_m1()))
    }

    /// A weight written as an expression in `t`. `ln k` is formed
    /// structurally so that flat factors such as `exp(−1/t)` stay finite.
    pub fn parse(src: &str, nu: f64) -> std::result::Result<Self, crate::expr::ParseError> {
        let e = crate::expr::parse(src, "t")?;
        let l = e.ln_of();
        let dl = l.derivative();
        Ok(Self::from_log(src, nu, move |t| l.eval(t), move |t| dl.eval(t)))
    }

    pub fn ln_eval(&self, t: f64) -> f64 {
        (self.ln_k)(t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_eval(t).exp()
    }

    /// `k′(t)/k(t)`.
    pub fn dlog(&self, t: f64) -> f64 {
        (self.dlog)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.eval(t) * self.dlog(t)
    }

    /// `ln(k(s)/k(t))`.
    pub fn ln_ratio(&self, s: f64, t: f64) -> f64 {
        self.ln_ratio_gap(s, t - s, t)
    }

    fn ln_ratio_gap(&self, s: f64, x: f64, t: f64) -> f64 {
        match &self.ln_ratio {
            Some(r) => r(s, x, t),
            None => self.ln_eval(s) - self.ln_eval(t),
        }
    }

    fn dlog_diff(&self, s: f64, x: f64, t: f64, dt: f64) -> f64 {
        match &self.dlog_diff {
            Some(d) => d(s, x, t),
            None => self.dlog(s) - dt,
        }
    }

    /// Samples the invariants: `k > 0`, `k′ ≥ 0` near 0 and `k′` consistent
    /// with a difference quotient of `k`.
    pub fn validate(&self) -> Result<()> {
        let top = if self.nu.is_finite() { self.nu } else { 1.0 };
        for j in 1..=40 {
            let t = top * 0.5f64.powi(j);
            let lk = self.ln_eval(t);
            if lk.is_nan() || lk == f64::INFINITY {
                return Err(Error::InvalidInput(format!("{}: k is not positive and finite at t = {t:e}", self.label)));
            }
            let d = self.dlog(t);
            if !d.is_finite() {
                return Err(Error::InvalidInput(format!("{}: k′ is not finite at t = {t:e}", self.label)));
            }
            if j > 10 && d < 0.0 {
                return Err(Error::InvalidInput(format!("{}: k is decreasing at t = {t:e}", self.label)));
            }
            if j <= 20 {
                let fd = central_diff(|x| self.ln_eval(x), t, 1e-3 * t);
                if (fd - d).abs() > 1e-5 * (d.abs() + 1.0 / t) {
                    return Err(Error::InvalidInput(format!(
                        "{}: k′/k = {d:e} disagrees with difference quotient {fd:e} at t = {t:e}",
                        self.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// `K/k` and `(K/k)′` at `t`.
    ///
    /// Both are integrals of `k(s)/k(t)` over geometric panels toward 0. The
    /// derivative is taken as `k(t_min)/k(t) + ∫ k(s)/k(t) (k′/k(s) − k′/k(t)) ds`,
    /// which is exact and avoids the cancellation in `1 − (k′/k)(K/k)` when
    /// that difference is small.
    pub fn ratio(&self, t: f64) -> Result<KRatio> {
        if !(t > 0.0) || !(t < self.nu) {
            return Err(Error::Domain(format!("t = {t} outside (0, {})", self.nu)));
        }
        let ln_k = self.ln_eval(t);
        let dt = self.dlog(t);
        if !ln_k.is_finite() || !dt.is_finite() {
            return Err(Error::Domain(format!("{}: k not representable at t = {t:e}", self.label)));
        }
        let tol = Tol { abs: 1e-300, rel: 1e-13 };
        let check = |q: crate::quad::Quad, acc: f64, lo: f64, hi: f64| -> Result<f64> {
            // ln k(s) − ln k(t) and k′/k(s) − k′/k(t) carry cancellation
            // noise for weights without closed-form differences, so the
            // budget may run out short of 1e-13.
            if q.error <= acc * q.value.abs() + 1e-300 {
                Ok(q.value)
            } else {
                Err(Error::Quadrature(format!("{}: K/k panel [{lo:e}, {hi:e}] error {:e} on {:e}", self.label, q.error, q.value)))
            }
        };
        let mut a_sum = 0.0;
        let mut d_sum = 0.0;
        // Near s = t the integrand decays on the scale 1/(k′/k + 1/t), which
        // for flat weights is far narrower than t. Integrate there in the gap
        // x = t − s over panels doubling away from 0.
        let ra = |x: f64| {
            let s = t - x;
            self.ln_ratio_gap(s, x, t).exp()
        };
        let rd = |x: f64| {
            let s = t - x;
            self.ln_ratio_gap(s, x, t).exp() * self.dlog_diff(s, x, t, dt)
        };
        let mut xlo = 0.0;
        let mut xhi = 0.25 / (dt.max(0.0) + 1.0 / t);
        loop {
            let top = xhi.min(0.5 * t);
            a_sum += check(integrate_capped(&ra, xlo, top, tol, 400)?, 1e-9, t - top, t - xlo)?;
            d_sum += check(integrate_capped(&rd, xlo, top, tol, 400)?, 1e-7, t - top, t - xlo)?;
            if top == 0.5 * t {
                break;
            }
            xlo = top;
            xhi *= 2.0;
        }
        let r = |s: f64| self.ln_ratio_gap(s, t - s, t).exp();
        let sd = |s: f64| r(s) * self.dlog_diff(s, t - s, t, dt);
        let mut hi = 0.5 * t;
        let mut j = 0;
        loop {
            let lo = 0.5 * hi;
            a_sum += check(integrate_capped(&r, lo, hi, tol, 400)?, 1e-9, lo, hi)?;
            d_sum += check(integrate_capped(&sd, lo, hi, tol, 400)?, 1e-7, lo, hi)?;
            hi = lo;
            j += 1;
            let edge = r(hi);
            if !edge.is_finite() {
                return Err(Error::Quadrature(format!("{}: k(s)/k(t) not finite at s = {hi:e}", self.label)));
            }
            let rem = hi * edge;
            if (j >= 40 && rem <= 1e-17 * a_sum) || hi < 1e-290 {
                return Ok(KRatio { t, ln_k, dlog: dt, k_over: a_sum, deriv: d_sum + edge });
            }
            if j > 1100 {
                return Err(Error::NonConvergence(format!("{}: K/k tail at t = {t:e}", self.label)));
            }
        }
    }
}

/// `K(t) = ∫₀^t k`.
pub fn weight_integral(k: &WeightFunction, t: f64) -> Result<f64> {
    let r = k.ratio(t)?;
    Ok(r.ln_big_k().exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subclass {
    K01,
    K01Tau,
    K0,
    K0Zeta,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightClassReport {
    pub ell0: LimitEstimate,
    pub ell1: LimitEstimate,
    /// Which grid produced `ell1`.
    pub ell1_scale: Scale,
    pub alpha: Option<f64>,
    pub subclass: Subclass,
    pub zeta: Option<f64>,
    pub lstar: Option<LimitEstimate>,
    pub tau: Option<f64>,
    pub lsharp: Option<LimitEstimate>,
    /// Estimated index of `k(1/u)`; should equal `−α`.
    pub index_check: Option<LimitEstimate>,
}

impl WeightClassReport {
    pub fn ell1_value(&self) -> f64 {
        self.ell1.value
    }
    pub fn is_flat(&self) -> bool {
        matches!(self.subclass, Subclass::K0 | Subclass::K0Zeta)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Hints {
    pub zeta: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    /// `t = start·ratio^{−j}`.
    pub alg: Grid,
    /// `t = e^{−L}` with `L = start·ratio^j`.
    pub log: Grid,
    pub tol: f64,
    pub taus: Vec<f64>,
    pub zetas: Vec<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            alg: Grid::algebraic(1e-2, 2.0, 14),
            log: Grid::logarithmic(8.0, 2.0, 7),
            tol: 1e-6,
            taus: vec![0.5, 1.0, 2.0],
            zetas: vec![0.5, 1.0, 2.0],
        }
    }
}

/// Ratios on a grid, ordered toward 0.
pub fn ratios_on(k: &WeightFunction, grid: &Grid) -> Result<Vec<KRatio>> {
    grid.log_points(Direction::ToZero).into_iter().map(|s| k.ratio(s.exp())).collect()
}

const FLAT_ELL1: f64 = 1e-3;

pub fn classify_weight(k: &WeightFunction, hints: Hints, opts: &ClassifyOptions) -> Result<WeightClassReport> {
    let tol = opts.tol;
    let alg = ratios_on(k, &opts.alg)?;
    let ell0 = opts.alg.estimate(&alg.iter().map(|r| r.k_over).collect::<Vec<_>>(), Direction::ToZero, tol)?;
    if ell0.value.abs() > 1e-4 {
        return Err(Error::Classification(format!("{}: K/k tends to {:e}, not 0", k.label, ell0.value)));
    }
    let alg_d: Vec<f64> = alg.iter().map(|r| r.deriv).collect();
    let mut ell1 = opts.alg.estimate(&alg_d, Direction::ToZero, tol)?;
    let mut scale = Scale::Algebraic;
    let mut log_rs = None;
    if ell1.value.abs() > FLAT_ELL1 {
        let rs = ratios_on(k, &opts.log)?;
        let est = opts.log.estimate(&rs.iter().map(|r| r.deriv).collect::<Vec<_>>(), Direction::ToZero, tol)?;
        if est.converged || !ell1.converged {
            ell1 = est;
            scale = Scale::Logarithmic;
        }
        log_rs = Some(rs);
    }
    if ell1.value < -1e-4 || ell1.value > 1.0 + 1e-4 {
        return Err(Error::Classification(format!("{}: (K/k)′ tends to {:e}, outside [0, 1]", k.label, ell1.value)));
    }
    let mut report = WeightClassReport {
        ell0,
        ell1: ell1.clone(),
        ell1_scale: scale,
        alpha: None,
        subclass: Subclass::Unclassified,
        zeta: None,
        lstar: None,
        tau: None,
        lsharp: None,
        index_check: None,
    };
    if !ell1.converged {
        return Ok(report);
    }
    if ell1.value.abs() <= FLAT_ELL1 {
        report.subclass = Subclass::K0;
        let zetas = hints.zeta.map(|z| vec![z]).unwrap_or_else(|| opts.zetas.clone());
        for &z in zetas.iter().rev() {
            let v: Vec<f64> = alg.iter().map(|r| r.deriv * r.t.powf(-z)).collect();
            let est = opts.alg.estimate(&v, Direction::ToZero, tol)?;
            if est.converged {
                report.subclass = Subclass::K0Zeta;
                report.zeta = Some(z);
                report.lstar = Some(est);
                break;
            }
        }
        return Ok(report);
    }
    let l1 = ell1.value;
    let alpha = 1.0 / l1 - 1.0;
    report.alpha = Some(alpha);
    report.subclass = Subclass::K01;
    let rs = match log_rs {
        Some(rs) => rs,
        None => ratios_on(k, &opts.log)?,
    };
    // L♯ from successive differences along the grid, so that the error in
    // the extrapolated ℓ₁ is not amplified by (−ln t)^τ.
    let taus = hints.tau.map(|t| vec![t]).unwrap_or_else(|| opts.taus.clone());
    let sub = Grid { n: opts.log.n - 1, ..opts.log };
    for &tau in taus.iter().rev() {
        let q = 1.0 - opts.log.ratio.powf(-tau);
        let v: Vec<f64> = rs.windows(2).map(|p| (-p[0].t.ln()).powf(tau) * (p[0].deriv - p[1].deriv) / q).collect();
        let est = sub.estimate(&v, Direction::ToZero, tol)?;
        if est.converged {
            report.subclass = Subclass::K01Tau;
            report.tau = Some(tau);
            report.lsharp = Some(est);
            break;
        }
    }
    // k(1/u) should be regularly varying with index −α.
    let kk = k.clone();
    let z = RegVarFunction::from_log(move |s| kk.ln_eval((-s).exp()), 1.0 / k.nu.min(1e300), Some(-alpha));
    let igrid = match scale {
        Scale::Algebraic => Grid::algebraic(1.0 / opts.alg.start, opts.alg.ratio, opts.alg.n),
        Scale::Logarithmic => opts.log,
    };
    let idx = rv_index_estimate(&z, &[2.0, 0.5], &igrid, 1e-3)?;
    if idx.converged && (idx.value + alpha).abs() > 1e-3 * (1.0 + alpha) {
        return Err(Error::Classification(format!("{}: index of k(1/u) is {:.6} but 1/ℓ₁ − 1 = {:.6}", k.label, idx.value, alpha)));
    }
    report.index_check = Some(idx);
    Ok(report)
}

/// Checks that `k′(t)/(k(t) t^{θ−1})` grows without bound as `t ↘ 0`. The
/// returned estimate has value `+∞` when divergence is detected.
pub fn tur_check(k: &WeightFunction, report: &WeightClassReport, theta: f64, opts: &ClassifyOptions) -> Result<LimitEstimate> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("θ must be positive, got {theta}")));
    }
    let grid = match report.subclass {
        Subclass::K0 | Subclass::K0Zeta => opts.alg,
        Subclass::K01Tau => {
            let l1 = report.ell1.value;
            let ls = report.lsharp.as_ref().map_or(0.0, |e| e.value);
            if (1.0 - l1).powi(2) + ls * ls <= 1e-8 {
                return Err(Error::Precondition(format!("{}: ℓ₁ = 1 with L♯ = 0 is excluded", k.label)));
            }
            opts.log
        }
        _ => return Err(Error::Precondition(format!("{}: needs a weight of class K₀ or K₀₁,τ", k.label))),
    };
    let pts = grid.log_points(Direction::ToZero);
    let lv: Vec<f64> = pts.iter().map(|&s| k.dlog(s.exp()).ln() + (1.0 - theta) * s).collect();
    let n = lv.len();
    let rising = lv[n - 4..].windows(2).all(|w| w[1] > w[0]);
    if rising && lv[n - 1] > 1e8f64.ln() {
        return Ok(LimitEstimate { value: f64::INFINITY, stderr: 0.0, grid: pts.iter().map(|s| s.exp()).collect(), converged: true });
    }
    let vals: Vec<f64> = lv.iter().map(|x| x.exp()).collect();
    grid.estimate(&vals, Direction::ToZero, opts.tol)
}

/// `ln(t/s)` from `s` and `x = t − s`.
fn log_gap(s: f64, x: f64) -> f64 {
    if x < s {
        (x / s).ln_1p()
    } else {
        ((s + x) / s).ln()
    }
}

fn log_grid_limit<F: Fn(f64) -> f64>(f: F) -> Result<LimitEstimate> {
    let samples: Vec<(f64, f64)> = (0..7)
        .map(|j| {
            let l = 8.0 * 2f64.powi(j);
            (l, f(-l))
        })
        .collect();
    limit_extrapolate(&samples, Direction::ToInfinity, 1e-6)
}

/// `k(t) = c₀ t^α exp ∫_t^{c₁} E(y)/y dy` with `E(0+) = 0`.
pub fn weight_from_e(c0: f64, alpha: f64, e: ScalarFn, c1: f64) -> Result<WeightFunction> {
    if !(c0 > 0.0) || !(c1 > 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("need c₀, c₁ > 0 and α ≥ 0 (got {c0}, {c1}, {alpha})")));
    }
    let e0 = log_grid_limit(|x| e.eval(x.exp()))?;
    if !(e0.value.abs() <= 1e-3) {
        return Err(Error::InvalidInput(format!("E({}) tends to {:e}, not 0", e.label, e0.value)));
    }
    if alpha == 0.0 {
        for j in 1..=60 {
            let y = c1 * 0.7f64.powi(j);
            if e.eval(y) > 0.0 {
                return Err(Error::InvalidInput(format!("α = 0 needs E ≤ 0; E({y:e}) = {:e}", e.eval(y))));
            }
        }
    }
    let tol = Tol { abs: 1e-15, rel: 1e-13 };
    let (lc0, lc1) = (c0.ln(), c1.ln());
    let (e1, e2, e3) = (e.clone(), e.clone(), e.clone());
    let ln_k = move |t: f64| {
        let q = integrate_panels(|x: f64| e1.eval(x.exp()), t.ln(), lc1, 4.0, tol);
        lc0 + alpha * t.ln() + q.map_or(f64::NAN, |q| q.value)
    };
    let dlog = move |t: f64| (alpha - e2.eval(t)) / t;
    let ratio = move |s: f64, x: f64, t: f64| {
        let d = log_gap(s, x);
        let q = integrate(|y: f64| e3.eval(t * (-y).exp()), 0.0, d, tol);
        -alpha * d + q.map_or(f64::NAN, |q| q.value)
    };
    Ok(WeightFunction::from_log(&format!("E-form(c0={c0}, alpha={alpha}, E={}, c1={c1})", e.label), c1, ln_k, dlog).with_ratio(ratio))
}

/// `k(t) = d₀ (d/dt) exp(−∫_t^{d₁} dx/(x W(x)))` with `W, tW′ → 0`.
pub fn weight_from_w(d0: f64, d1: f64, w: ScalarFn) -> Result<WeightFunction> {
    if !(d0 > 0.0) || !(d1 > 0.0) {
        return Err(Error::InvalidInput(format!("need d₀, d₁ > 0 (got {d0}, {d1})")));
    }
    for j in 1..=60 {
        let t = d1 * 0.7f64.powi(j);
        if !(w.eval(t) > 0.0) {
            return Err(Error::InvalidInput(format!("W({}) is not positive at {t:e}", w.label)));
        }
    }
    // ∫ dx/(xW) must diverge at 0: its increments over halvings of t
    // may not shrink geometrically.
    let inc: Vec<f64> = (10..=40)
        .step_by(3)
        .map(|j| {
            let t = d1 * 0.5f64.powi(j);
            integrate(|y: f64| 1.0 / w.eval(y.exp()), (0.5 * t).ln(), t.ln(), Tol::rel(1e-10)).map(|q| q.value)
        })
        .collect::<Result<_>>()?;
    let n = inc.len();
    if inc[n - 3..].windows(2).all(|p| p[1] < 0.95 * p[0]) {
        return Err(Error::InvalidInput(format!("∫ dx/(xW) converges at 0 for W = {}; not a flat weight", w.label)));
    }
    let tol = Tol { abs: 1e-15, rel: 1e-13 };
    let (ld0, ld1) = (d0.ln(), d1.ln());
    let (w1, w2, w3) = (w.clone(), w.clone(), w.clone());
    let ln_k = move |t: f64| {
        let q = integrate_panels(|y: f64| 1.0 / w1.eval(y.exp()), t.ln(), ld1, 1.0, tol);
        ld0 - q.map_or(f64::NAN, |q| q.value) - t.ln() - w1.eval(t).ln()
    };
    let dlog = move |t: f64| {
        let wt = w2.eval(t);
        1.0 / (t * wt) - 1.0 / t - w2.deriv(t) / wt
    };
    let ratio = move |s: f64, x: f64, t: f64| {
        let d = log_gap(s, x);
        let q = integrate(|y: f64| 1.0 / w3.eval(t * (-y).exp()), 0.0, d, tol);
        -q.map_or(f64::NAN, |q| q.value) + d - (w3.eval(s) / w3.eval(t)).ln()
    };
    // k′/k = 1/(tW) − 1/t − W′/W. The first term dominates and its
    // difference is formed from ∫_s^t (xW)′ dx.
    let w4 = w.clone();
    let dlog_diff = move |s: f64, x: f64, t: f64| {
        let m = integrate(|z: f64| w4.eval(t - z) + (t - z) * w4.deriv(t - z), 0.0, x, Tol::rel(1e-13));
        let (ws, wt) = (w4.eval(s), w4.eval(t));
        m.map_or(f64::NAN, |m| m.value) / (s * ws * t * wt) - x / (s * t) - (w4.deriv(s) / ws - w4.deriv(t) / wt)
    };
    Ok(WeightFunction::from_log(&format!("W-form(d0={d0}, d1={d1}, W={})", w.label), d1, ln_k, dlog)
        .with_ratio(ratio)
        .with_dlog_diff(dlog_diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_of_root() {
        let k = WeightFunction::power(1.0, 1.0).unwrap();
        let v = weight_integral(&k, 0.25).unwrap();
        assert!((v - 2.0 / 3.0 * 0.125).abs() < 1e-14, "{v}");
    }

    #[test]
    fn integral_of_constant() {
        let k = WeightFunction::constant(3.0).unwrap();
        let v = weight_integral(&k, 0.1).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn integral_of_flat_weight_against_direct_quadrature() {
        let k = WeightFunction::exp_flat(1.0).unwrap();
        let v = weight_integral(&k, 0.1).unwrap();
        // e^{−1/s} is negligible below 0.005 at this scale.
        let oracle = integrate(|s: f64| (-1.0 / s).exp(), 1e-3, 0.1, Tol::rel(1e-15)).unwrap().value;
        assert!((v / oracle - 1.0).abs() < 1e-12, "{v} vs {oracle}");
        // The two-term asymptotic t²e^{−1/t}(1 − 2t) gives only the first digits.
        assert!((v / 3.67e-7 - 1.0).abs() < 0.05);
    }

    #[test]
    fn ratio_derivative_of_flat_weight() {
        // K/k = t² − 2t³ + 6t⁴ − ..., so (K/k)′ = 2t − 6t² + ...
        let k = WeightFunction::exp_flat(1.0).unwrap();
        let t = 1e-4;
        let r = k.ratio(t).unwrap();
        let series = 2.0 * t - 6.0 * t * t + 24.0 * t.powi(3) - 120.0 * t.powi(4);
        assert!((r.deriv / series - 1.0).abs() < 1e-12, "{}", r.deriv);
        let h = 1e-3 * t;
        let fd = (k.ratio(t + h).unwrap().k_over - k.ratio(t - h).unwrap().k_over) / (2.0 * h);
        assert!((fd / r.deriv - 1.0).abs() < 1e-6);
    }

    #[test]
    fn parsed_weight_matches_builtin() {
        let a = WeightFunction::parse("exp(-1/t)", 1.0).unwrap();
        let b = WeightFunction::exp_flat(1.0).unwrap();
        a.validate().unwrap();
        let (ra, rb) = (a.ratio(0.01).unwrap(), b.ratio(0.01).unwrap());
        assert!((ra.k_over / rb.k_over - 1.0).abs() < 1e-12);
        assert!((ra.deriv / rb.deriv - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_weight_is_rejected() {
        let k = WeightFunction::parse("1/t", 1.0).unwrap();
        assert!(k.validate().is_err());
    }

    #[test]
    fn classify_linear() {
        let k = WeightFunction::power(1.0, 2.0).unwrap();
        let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
        assert!(r.ell1.within(0.5, 1e-6), "{:?}", r.ell1);
        assert!((r.alpha.unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(r.subclass, Subclass::K01Tau);
        assert!(r.lsharp.unwrap().within(0.0, 1e-8));
        assert!(r.index_check.unwrap().within(-1.0, 1e-6));
    }

    #[test]
    fn classify_constant() {
        let k = WeightFunction::constant(2.0).unwrap();
        let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
        assert!(r.ell1.within(1.0, 1e-10));
        assert!(r.alpha.unwrap().abs() < 1e-10);
        assert!(r.lsharp.unwrap().within(0.0, 1e-10));
    }

    #[test]
    fn classify_flat() {
        let k = WeightFunction::exp_flat(1.0).unwrap();
        let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
        assert_eq!(r.subclass, Subclass::K0Zeta);
        assert_eq!(r.zeta, Some(1.0));
        assert!(r.lstar.unwrap().within(2.0, 1e-6));
    }

    #[test]
    fn e_form_with_log_correction() {
        let e = ScalarFn::parse("1/(-ln(u))", "u").unwrap();
        let k = weight_from_e(1.0, 1.0, e, 0.5).unwrap();
        k.validate().unwrap();
        let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
        assert!(r.ell1.within(0.5, 1e-5), "{:?}", r.ell1);
        assert_eq!(r.tau, Some(1.0));
        assert!(r.lsharp.as_ref().unwrap().within(0.25, 1e-3), "{:?}", r.lsharp);
    }

    #[test]
    fn e_form_rejects_nonzero_e0() {
        assert!(weight_from_e(1.0, 1.0, ScalarFn::constant(0.3), 0.5).is_err());
    }

    #[test]
    fn w_form_identity() {
        let w = ScalarFn::parse("u", "u").unwrap();
        let k = weight_from_w(1.0, 1.0, w).unwrap();
        k.validate().unwrap();
        for j in 1..=20 {
            let t = 0.5 * 0.7f64.powi(j);
            let r = k.ratio(t).unwrap();
            // K = t k W, i.e. K/k = t²
            assert!((r.k_over / (t * t) - 1.0).abs() < 1e-10, "t={t} {}", r.k_over);
        }
    }

    #[test]
    fn w_form_rejects_convergent_integral() {
        // ∫ dx/(x·x⁻¹) is finite at 0.
        let w = ScalarFn::parse("1/u", "u").unwrap();
        assert!(weight_from_w(1.0, 1.0, w).is_err());
    }

    #[test]
    fn tur_examples() {
        let o = ClassifyOptions::default();
        let k = WeightFunction::power(1.0, 2.0).unwrap();
        let r = classify_weight(&k, Hints::default(), &o).unwrap();
        assert_eq!(tur_check(&k, &r, 0.5, &o).unwrap().value, f64::INFINITY);
        let k = WeightFunction::exp_flat(1.0).unwrap();
        let r = classify_weight(&k, Hints::default(), &o).unwrap();
        assert_eq!(tur_check(&k, &r, 1.0, &o).unwrap().value, f64::INFINITY);
        let k = WeightFunction::constant(1.0).unwrap();
        let r = classify_weight(&k, Hints::default(), &o).unwrap();
        assert!(matches!(tur_check(&k, &r, 1.0, &o), Err(Error::Precondition(_))));
    }

    #[test]
    fn e_form_slowly_varying_limit_one() {
        let e = ScalarFn::parse("-(-ln(u))^(-2)", "u").unwrap();
        let k = weight_from_e(1.0, 0.0, e, 0.5).unwrap();
        let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
        assert!(r.ell1.within(1.0, 1e-5), "{:?}", r.ell1);
        assert_eq!(r.tau, Some(2.0));
        assert!(r.lsharp.as_ref().unwrap().within(-1.0, 1e-3), "{:?}", r.lsharp);
    }

    #[test]
    fn e_form_power_family() {
        for alpha in [0.0, 0.5, 1.0, 3.0] {
            let k = weight_from_e(2.0, alpha, ScalarFn::constant(0.0), 0.5).unwrap();
            let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
            assert!(r.ell1.within(1.0 / (1.0 + alpha), 1e-8), "{alpha}: {:?}", r.ell1);
            assert!((r.alpha.unwrap() - alpha).abs() < 1e-6);
        }
    }

    #[test]
    fn w_form_round_trips() {
        for (src, zeta, lstar) in [("u", 1.0, 2.0), ("u^2/3", 2.0, 1.0)] {
            let k = weight_from_w(1.0, 1.0, ScalarFn::parse(src, "u").unwrap()).unwrap();
            let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
            assert_eq!(r.zeta, Some(zeta), "{src}");
            assert!(r.lstar.as_ref().unwrap().within(lstar, 1e-5), "{src}: {:?}", r.lstar);
        }
    }
}
