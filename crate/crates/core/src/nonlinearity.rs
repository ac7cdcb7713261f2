//! Nonlinearities `f(u) = C u^{ρ+1} exp(∫_B^u ε(t)/t dt)` (pure power `C u^{ρ+1}`
//! below `B`), their antiderivative `F`, the transform
//! `ψ(u) = ∫_u^∞ (2F)^{−1/2}` and the functionals built on them.
//!
//! Everything is carried in the variable `s = ln u`. With
//! `Λ(s) = ∫_{ln B}^s ε(e^x) dx` one has `ln f(e^s) = ln C + (ρ+1)s + Λ(s)`,
//! and `F`, `ψ` are written as that leading part times a factor computed by
//! quadrature, so nothing overflows even for `ln u ~ 10⁶`.

use crate::error::{Error, Result};
use crate::expr::{Fn1, ParseError};
use crate::quad::{integrate, integrate_limit, integrate_panels, Tol};
use crate::regvar::{limit_extrapolate, rv_index_estimate, Direction, Grid, LimitEstimate, RegVarFunction};
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassTag {
    PurePower,
    /// `ε` regularly varying with index `η`.
    RhoEta {
        eta: f64,
    },
    /// `(ln u)^τ ε(u) → ℓ⋆`.
    Rho0Tau {
        tau: f64,
        ell_star: f64,
    },
}

/// `Λ(s)` either in closed form or accumulated panel by panel.
enum Lambda {
    Closed(Fn1),
    Table(Table),
}

struct Table {
    base: f64,
    eps: Fn1,
    vals: RwLock<Vec<f64>>,
}

const PANEL: f64 = 0.5;

impl Table {
    fn eval(&self, s: f64) -> f64 {
        let i = ((s - self.base) / PANEL).floor() as usize;
        if i > 20_000_000 {
            return f64::NAN;
        }
        let tol = Tol { abs: 1e-15, rel: 1e-13 };
        let known = self.vals.read().map(|v| v.get(i).copied()).unwrap_or(None);
        let start = match known {
            Some(v) => v,
            None => {
                let mut v = self.vals.write().expect("table lock");
                while v.len() <= i {
                    let j = v.len() - 1;
                    let a = self.base + PANEL * j as f64;
                    let q = integrate(|x| (self.eps)(x), a, a + PANEL, tol).map_or(f64::NAN, |q| q.value);
                    let next = v[j] + q;
                    v.push(next);
                }
                v[i]
            }
        };
        let a = self.base + PANEL * i as f64;
        start + integrate(|x| (self.eps)(x), a, s, tol).map_or(f64::NAN, |q| q.value)
    }
}

#[derive(Clone)]
pub struct Nonlinearity {
    pub c: f64,
    pub rho: f64,
    pub b: f64,
    /// `s ↦ ε(e^s)`.
    eps_s: Fn1,
    lambda: Arc<Lambda>,
    /// `G` at `ln B + j·PANEL`.
    g_nodes: Arc<RwLock<HashMap<i64, f64>>>,
    pub class: ClassTag,
    pub label: String,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.label)
            .field("C", &self.c)
            .field("rho", &self.rho)
            .field("B", &self.b)
            .field("class", &self.class)
            .finish()
    }
}

/// Result of the Keller–Osserman test.
#[derive(Debug, Clone, PartialEq)]
pub struct KellerOsserman {
    pub holds: bool,
    /// `∫_1^T F^{−1/2}` at the last `T`.
    pub partial: f64,
    /// Ratio of the last two dyadic increments.
    pub ratio: f64,
}

fn check_params(c: f64, rho: f64, b: f64) -> Result<()> {
    if !(c > 0.0) || !(b > 0.0) || !(rho >= 0.0) || !c.is_finite() || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("need C, B > 0 and ρ ≥ 0 (got C={c}, ρ={rho}, B={b})")));
    }
    Ok(())
}

impl Nonlinearity {
    fn build(c: f64, rho: f64, b: f64, eps_s: Fn1, lambda: Lambda, class: ClassTag, label: String) -> Self {
        Nonlinearity { c, rho, b, eps_s, lambda: Arc::new(lambda), g_nodes: Arc::default(), class, label }
    }

    /// `f(u) = C u^{ρ+1}`. `ρ = 0` is admitted so that the Keller–Osserman
    /// test can be exercised on `f(u) = u`; everything past that test
    /// requires `ρ > 0`.
    pub fn pure_power(c: f64, rho: f64) -> Result<Self> {
        check_params(c, rho, 1.0)?;
        Ok(Self::build(
            c,
            rho,
            1.0,
            Arc::new(|_| 0.0),
            Lambda::Closed(Arc::new(|_| 0.0)),
            ClassTag::PurePower,
            format!("{c}*u^{}", rho + 1.0),
        ))
    }

    /// `ε(u) = ℓ⋆ (ln u)^{−τ}` on `[B, ∞)`; needs `B > 1`.
    pub fn log_corrected(c: f64, rho: f64, b: f64, ell_star: f64, tau: f64) -> Result<Self> {
        check_params(c, rho, b)?;
        if !(b > 1.0) || !(tau > 0.0) {
            return Err(Error::InvalidInput(format!("log correction needs B > 1 and τ > 0 (got B={b}, τ={tau})")));
        }
        let lb = b.ln();
        let lam: Fn1 = if tau == 1.0 {
            Arc::new(move |s: f64| if s <= lb { 0.0 } else { ell_star * (s / lb).ln() })
        } else {
            Arc::new(move |s: f64| if s <= lb { 0.0 } else { ell_star * (s.powf(1.0 - tau) - lb.powf(1.0 - tau)) / (1.0 - tau) })
        };
        let f = Self::build(
            c,
            rho,
            b,
            Arc::new(move |s: f64| if s < lb { 0.0 } else { ell_star * s.powf(-tau) }),
            Lambda::Closed(lam),
            ClassTag::Rho0Tau { tau, ell_star },
            format!("{c}*u^{} with eps = {ell_star}*(ln u)^(-{tau}), B = {b}", rho + 1.0),
        );
        f.validate()?;
        Ok(f)
    }

    /// `ε(u) = a u^η` on `[B, ∞)` with `η < 0`.
    pub fn power_decay(c: f64, rho: f64, b: f64, a: f64, eta: f64) -> Result<Self> {
        check_params(c, rho, b)?;
        if !(eta < 0.0) {
            return Err(Error::InvalidInput(format!("power correction needs η < 0, got {eta}")));
        }
        let lb = b.ln();
        let bh = b.powf(eta);
        let f = Self::build(
            c,
            rho,
            b,
            Arc::new(move |s: f64| if s < lb { 0.0 } else { a * (eta * s).exp() }),
            Lambda::Closed(Arc::new(move |s: f64| if s <= lb { 0.0 } else { a * ((eta * s).exp() - bh) / eta })),
            ClassTag::RhoEta { eta },
            format!("{c}*u^{} with eps = {a}*u^{eta}, B = {b}", rho + 1.0),
        );
        f.validate()?;
        Ok(f)
    }

    /// General `ε`, given as a function of `s = ln u`. `Λ` is accumulated
    /// lazily; the declared class is checked against `ε`.
    pub fn make<E: Fn(f64) -> f64 + Send + Sync + 'static>(
        c: f64,
        rho: f64,
        b: f64,
        eps_of_s: E,
        class: ClassTag,
        label: &str,
    ) -> Result<Self> {
        check_params(c, rho, b)?;
        let lb = b.ln();
        let eps: Fn1 = Arc::new(move |s: f64| if s < lb { 0.0 } else { eps_of_s(s) });
        let table = Table { base: lb, eps: eps.clone(), vals: RwLock::new(vec![0.0]) };
        let f = Self::build(c, rho, b, eps, Lambda::Table(table), class, label.to_string());
        f.validate()?;
        f.check_class()?;
        Ok(f)
    }

    /// `ε` as an expression in `u`.
    pub fn parse(c: f64, rho: f64, b: f64, eps: &str, class: ClassTag) -> std::result::Result<Result<Self>, ParseError> {
        let e = crate::expr::parse(eps, "u")?.in_log_variable();
        Ok(Self::make(c, rho, b, move |s| e.eval(s), class, &format!("{c}*u^{} with eps = {eps}, B = {b}", rho + 1.0)))
    }

    /// `ε(e^s)`, zero below `ln B`.
    pub fn eps_s(&self, s: f64) -> f64 {
        (self.eps_s)(s)
    }

    pub fn epsilon(&self, u: f64) -> f64 {
        self.eps_s(u.ln())
    }

    pub fn lambda(&self, s: f64) -> f64 {
        if s <= self.b.ln() {
            return 0.0;
        }
        match &*self.lambda {
            Lambda::Closed(l) => l(s),
            Lambda::Table(t) => t.eval(s),
        }
    }

    pub fn ln_f(&self, s: f64) -> f64 {
        self.c.ln() + (self.rho + 1.0) * s + self.lambda(s)
    }

    pub fn f(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        self.ln_f(u.ln()).exp()
    }

    /// `u f′(u)/f(u) = ρ + 1 + ε(u)`.
    pub fn f_prime(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        self.f(u) / u * (self.rho + 1.0 + self.epsilon(u))
    }

    fn sample_points(&self) -> impl Iterator<Item = f64> + '_ {
        let lb = self.b.ln();
        (0..200).map(move |j| lb + 0.05 * (j as f64).powf(1.6))
    }

    /// `ε → 0` and `f(u)/u` increasing, on samples.
    pub fn validate(&self) -> Result<()> {
        for s in self.sample_points() {
            let e = self.eps_s(s);
            if !e.is_finite() {
                return Err(Error::InvalidInput(format!("ε not finite at u = e^{s}")));
            }
            if !(self.rho + e > 0.0) && !(self.rho == 0.0 && e == 0.0) {
                return Err(Error::Precondition(format!("f(u)/u is not increasing at u = e^{s:.3}: ρ + ε = {:e}", self.rho + e)));
            }
        }
        let lim = limit_extrapolate(&log_samples(|s| self.eps_s(s)), Direction::ToInfinity, 1e-6)?;
        if !(lim.value.abs() < 1e-3) {
            return Err(Error::InvalidInput(format!("ε tends to {:e}, not 0", lim.value)));
        }
        Ok(())
    }

    /// Compares the declared class with the behaviour of `ε`.
    pub fn check_class(&self) -> Result<()> {
        match self.class {
            ClassTag::PurePower => {
                if let Some(s) = self.sample_points().find(|&s| self.eps_s(s) != 0.0) {
                    return Err(Error::Classification(format!("declared pure power but ε(e^{s}) ≠ 0")));
                }
            }
            ClassTag::Rho0Tau { tau, ell_star } => {
                let lim = limit_extrapolate(&log_samples(|s| s.powf(tau) * self.eps_s(s)), Direction::ToInfinity, 1e-6)?;
                if !((lim.value - ell_star).abs() <= 1e-3 * ell_star.abs().max(1.0)) {
                    return Err(Error::Classification(format!("(ln u)^τ ε(u) tends to {:.6}, declared ℓ⋆ = {ell_star}", lim.value)));
                }
            }
            ClassTag::RhoEta { eta } => {
                let e = self.eps_s.clone();
                let z = RegVarFunction::from_log(move |s| e(s).abs().ln(), self.b, Some(eta));
                let start = self.b.max(10.0);
                let idx = rv_index_estimate(&z, &[2.0, 0.5], &Grid::algebraic(2.0 * start, 2.0, 14), 1e-4)?;
                if !((idx.value - eta).abs() <= 1e-2) {
                    return Err(Error::Classification(format!("ε has index {:.4}, declared η = {eta}", idx.value)));
                }
            }
        }
        Ok(())
    }

    fn need_rho(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Precondition(format!("ρ = {} ≤ 0: ∫ F^(−1/2) diverges", self.rho)));
        }
        Ok(())
    }

    /// `G(σ) = F(e^σ) / (C e^{(ρ+2)σ + Λ(σ)})`, which tends to `1/(ρ+2)`.
    ///
    /// Values at the nodes `ln B + j/2` are cached; in between,
    /// `G(σ) = e^{−(ρ+2)d − ΔΛ} G(σ−d) + ∫_0^d e^{−(ρ+2)y + Λ(σ−y) − Λ(σ)} dy`.
    pub fn g_factor(&self, sigma: f64) -> Result<f64> {
        let r2 = self.rho + 2.0;
        let lb = self.b.ln();
        let yb = sigma - lb;
        if yb <= 0.0 || self.class == ClassTag::PurePower {
            return Ok(1.0 / r2);
        }
        let j = (yb / PANEL).floor();
        let node = lb + j * PANEL;
        let key = j as i64;
        let cached = self.g_nodes.read().ok().and_then(|m| m.get(&key).copied());
        let gn = match cached {
            Some(g) => g,
            None => {
                let g = self.g_direct(node)?;
                if let Ok(mut m) = self.g_nodes.write() {
                    m.insert(key, g);
                }
                g
            }
        };
        let d = sigma - node;
        if d == 0.0 {
            return Ok(gn);
        }
        let ls = self.lambda(sigma);
        let carry = (-r2 * d - (ls - self.lambda(node))).exp() * gn;
        let q = integrate(|y| (-r2 * y + self.lambda(sigma - y) - ls).exp(), 0.0, d, Tol { abs: 1e-300, rel: 1e-13 })?;
        Ok(carry + q.value)
    }

    fn g_direct(&self, sigma: f64) -> Result<f64> {
        let r2 = self.rho + 2.0;
        let yb = sigma - self.b.ln();
        if yb <= 0.0 {
            return Ok(1.0 / r2);
        }
        let ls = self.lambda(sigma);
        // Below B the integrand is explicit.
        let below = (-r2 * yb - ls).exp() / r2;
        let g = |y: f64| (-r2 * y + self.lambda(sigma - y) - ls).exp();
        let mut w = (40.0 / r2).min(yb);
        while w < yb && g(w) > 1e-18 {
            w = (2.0 * w).min(yb);
        }
        let q = integrate_panels(g, 0.0, w, 4.0 / r2, Tol { abs: 1e-300, rel: 1e-13 })?;
        // Between w and yb the integrand is below 1e-18 and decays at
        // least like e^{−(ρ+2−sup|ε|)y}; it is dropped.
        Ok(q.value + if w >= yb { below } else { 0.0 })
    }

    /// `ln F(e^s)`.
    pub fn ln_big_f(&self, s: f64) -> Result<f64> {
        Ok(self.c.ln() + (self.rho + 2.0) * s + self.lambda(s) + self.g_factor(s)?.ln())
    }

    pub fn big_f(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.ln_big_f(u.ln())?.exp())
    }

    /// `ln ψ(e^s)` with `ψ(u) = ∫_u^∞ (2F)^{−1/2}`. The tail beyond the
    /// integration window is closed with `(2/ρ)` times the integrand at the
    /// window edge, which is its asymptotic value.
    pub fn ln_psi(&self, s: f64) -> Result<f64> {
        self.need_rho()?;
        let rho = self.rho;
        let ls = self.lambda(s);
        let ln_e0 = -0.5 * (2.0 * self.c).ln() - 0.5 * rho * s - 0.5 * ls;
        let integrand = |y: f64| -> f64 {
            let g = self.g_factor(s + y).map_or(f64::NAN, |g| g.ln());
            (-0.5 * rho * y - 0.5 * (self.lambda(s + y) - ls) - 0.5 * g).exp()
        };
        let tol = Tol { abs: 1e-300, rel: 1e-13 };
        let mut w = 40.0 / rho;
        let mut total = integrate_panels(integrand, 0.0, w, 2.0 / rho, tol)?.value;
        loop {
            let tail = 2.0 / rho * integrand(w);
            if !tail.is_finite() || !total.is_finite() {
                return Err(Error::Quadrature(format!("ψ integrand not finite near u = e^{}", s + w)));
            }
            if tail <= 1e-12 * total {
                total += tail;
                break;
            }
            if w > 1e5 / rho {
                return Err(Error::NonConvergence(format!("ψ tail at u = e^{s} does not settle")));
            }
            total += integrate_panels(integrand, w, 2.0 * w, 2.0 / rho, tol)?.value;
            w *= 2.0;
        }
        Ok(ln_e0 + total.ln())
    }

    pub fn psi(&self, u: f64) -> Result<f64> {
        Ok(self.ln_psi(u.ln())?.exp())
    }

    /// `Ξ(u) = √F / (f ∫_u^∞ F^{−1/2})`, in the variable `s = ln u`.
    pub fn xi_s(&self, s: f64) -> Result<f64> {
        let lf = self.ln_big_f(s)?;
        Ok((0.5 * lf - self.ln_f(s) - 0.5 * 2f64.ln() - self.ln_psi(s)?).exp())
    }

    pub fn xi_functional(&self, u: f64) -> Result<f64> {
        if u < self.b {
            return Err(Error::Domain(format!("u = {u} below B = {}", self.b)));
        }
        self.xi_s(u.ln())
    }

    /// `T₁,τ(e^s) = [ρ/(2(ρ+2)) − Ξ] s^τ`; identically 0 for a pure power.
    pub fn t1_s(&self, tau: f64, s: f64) -> Result<f64> {
        if self.class == ClassTag::PurePower {
            return Ok(0.0);
        }
        let lim = self.rho / (2.0 * (self.rho + 2.0));
        Ok((lim - self.xi_s(s)?) * s.powf(tau))
    }

    /// `T₂,τ(e^s) = [f(ξ₀u)/(ξ₀f(u)) − ξ₀^ρ] s^τ`; identically 0 for a pure power.
    pub fn t2_s(&self, tau: f64, xi0: f64, s: f64) -> Result<f64> {
        if self.class == ClassTag::PurePower {
            return Ok(0.0);
        }
        let d = self.lambda(s + xi0.ln()) - self.lambda(s);
        Ok(xi0.powf(self.rho) * d.exp_m1() * s.powf(tau))
    }

    pub fn t1_functional(&self, tau: f64, u: f64) -> Result<f64> {
        self.t1_s(tau, u.ln())
    }

    pub fn t2_functional(&self, tau: f64, xi0: f64, u: f64) -> Result<f64> {
        self.t2_s(tau, xi0, u.ln())
    }
}

/// `ε(e^s)` sampled at `s = 8·2^j`, as `(s, value)` pairs.
fn log_samples<F: Fn(f64) -> f64>(f: F) -> Vec<(f64, f64)> {
    (0..7)
        .map(|j| {
            let s = 8.0 * 2f64.powi(j);
            (s, f(s))
        })
        .collect()
}

/// `∫_1^T F^{−1/2}` over dyadic blocks `[2^j, 2^{j+1}]`. The integral
/// converges iff the block increments shrink geometrically (ratio `2^{−ρ/2}`
/// for `F ∈ RV_{ρ+2}`).
pub fn keller_osserman_check(f: &Nonlinearity) -> Result<KellerOsserman> {
    let l2 = 2f64.ln();
    let block = |j: i32| -> Result<f64> {
        let a = j as f64 * l2;
        let g = |s: f64| (s - 0.5 * f.ln_big_f(s).unwrap_or(f64::NAN)).exp();
        Ok(integrate_limit(&g, a, a + l2, Tol::rel(1e-12), 200)?.value)
    };
    let mut partial = 0.0;
    let mut incs = Vec::new();
    for j in 0..200 {
        let v = block(j)?;
        partial += v;
        incs.push(v);
        if incs.len() >= 8 {
            let n = incs.len();
            let ratio = incs[n - 1] / incs[n - 2];
            let steady = ((incs[n - 2] / incs[n - 3]) - ratio).abs() < 1e-3;
            if steady {
                if ratio >= 1.0 - 1e-6 {
                    return Ok(KellerOsserman { holds: false, partial, ratio });
                }
                let tail = v * ratio / (1.0 - ratio);
                if tail < 1e-10 * partial {
                    return Ok(KellerOsserman { holds: true, partial: partial + tail, ratio });
                }
            }
        }
    }
    let n = incs.len();
    Ok(KellerOsserman { holds: false, partial, ratio: incs[n - 1] / incs[n - 2] })
}

/// Limit of a function of `s = ln u` along `s = 8·2^j`, `j < n`.
pub fn log_limit<F: Fn(f64) -> Result<f64>>(n: usize, tol: f64, g: F) -> Result<LimitEstimate> {
    Grid::logarithmic(8.0, 2.0, n).limit(Direction::ToInfinity, tol, g)
}
