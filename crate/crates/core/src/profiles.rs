//! Blow-up profiles: `h` solving `ψ(h(t)) = K(t)` and `φ` solving
//! `f(φ)/φ = K^{−2}`, with the asymptotic properties of `h`.

use crate::error::{Error, Result};
use crate::nonlinearity::{keller_osserman_check, Nonlinearity};
use crate::regvar::{gamma_variation_check, invert_increasing, rv_index_estimate, Direction, Grid, LimitEstimate, RegVarFunction, Scale};
use crate::weights::{ClassifyOptions, KRatio, Subclass, WeightClassReport, WeightFunction};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Everything known about `h` at one `t`, in logarithms where magnitudes
/// can be extreme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint {
    pub t: f64,
    pub kr: KRatio,
    /// `ln h(t)`.
    pub s_h: f64,
    pub ln_f_h: f64,
    pub ln_big_f_h: f64,
    pub xi_h: f64,
    /// `h″ / (k² f(h)) = 1 + 2Ξ(h)[(K/k)′ − 1]`.
    pub q: f64,
}

impl HPoint {
    pub fn h(&self) -> f64 {
        self.s_h.exp()
    }
    /// `ln |h′| = ln k + ½ ln 2F(h)`.
    pub fn ln_neg_h1(&self) -> f64 {
        self.kr.ln_k + 0.5 * (2f64.ln() + self.ln_big_f_h)
    }
    pub fn h1(&self) -> f64 {
        -self.ln_neg_h1().exp()
    }
    pub fn ln_h2(&self) -> f64 {
        2.0 * self.kr.ln_k + self.ln_f_h + self.q.ln()
    }
    pub fn h2(&self) -> f64 {
        self.ln_h2().exp()
    }
    /// `h′/h″ = −2Ξ(h)(K/k)/Q`.
    pub fn h1_over_h2(&self) -> f64 {
        -2.0 * self.xi_h * self.kr.k_over / self.q
    }
    /// `h/h″`.
    pub fn h_over_h2(&self) -> f64 {
        (self.s_h - self.ln_h2()).exp()
    }
    /// `h/h′`.
    pub fn h_over_h1(&self) -> f64 {
        -(self.s_h - self.ln_neg_h1()).exp()
    }
}

#[derive(Clone)]
pub struct ProfileEngine {
    pub f: Nonlinearity,
    pub k: WeightFunction,
    memo: Arc<Mutex<HashMap<u64, HPoint>>>,
}

impl std::fmt::Debug for ProfileEngine {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("ProfileEngine").field("f", &self.f).field("k", &self.k).finish()
    }
}

impl ProfileEngine {
    pub fn new(f: Nonlinearity, k: WeightFunction) -> Result<Self> {
        if !(f.rho > 0.0) {
            return Err(Error::Precondition(format!("profiles need ρ > 0, got {}", f.rho)));
        }
        let ko = keller_osserman_check(&f)?;
        if !ko.holds {
            return Err(Error::Precondition("Keller–Osserman condition fails".into()));
        }
        Ok(ProfileEngine { f, k, memo: Arc::new(Mutex::new(HashMap::new())) })
    }

    pub fn psi_transform(&self, u: f64) -> Result<f64> {
        self.f.psi(u)
    }

    pub fn h_point(&self, t: f64) -> Result<HPoint> {
        if let Some(p) = self.memo.lock().ok().and_then(|m| m.get(&t.to_bits()).copied()) {
            return Ok(p);
        }
        let kr = self.k.ratio(t)?;
        let ln_big_k = kr.ln_big_k();
        let lb = self.f.b.ln();
        if ln_big_k >= self.f.ln_psi(lb)? {
            return Err(Error::Domain(format!("K({t:e}) ≥ ψ(B): t is too large, h would fall below B = {}", self.f.b)));
        }
        let (c, rho) = (self.f.c, self.f.rho);
        let guess = (2.0 / rho) * ((2.0 / rho).ln() + 0.5 * ((rho + 2.0) / (2.0 * c)).ln() - ln_big_k);
        let s_h = invert_increasing(|s| self.f.ln_psi(s).map_or(f64::NAN, |v| -v), -ln_big_k, guess.max(lb + 1e-9), 1.0, 1e-15)?;
        let ln_f_h = self.f.ln_f(s_h);
        let ln_big_f_h = self.f.ln_big_f(s_h)?;
        let xi_h = self.f.xi_s(s_h)?;
        let q = 1.0 + 2.0 * xi_h * (kr.deriv - 1.0);
        let p = HPoint { t, kr, s_h, ln_f_h, ln_big_f_h, xi_h, q };
        if let Ok(mut m) = self.memo.lock() {
            m.insert(t.to_bits(), p);
        }
        Ok(p)
    }

    /// `(h, h′, h″)` at `t`.
    pub fn profile_h(&self, t: f64) -> Result<(f64, f64, f64)> {
        let p = self.h_point(t)?;
        Ok((p.h(), p.h1(), p.h2()))
    }

    /// `ln φ(t)`, from `ln(f(φ)/φ) = −2 ln K(t)`.
    pub fn ln_phi(&self, t: f64) -> Result<f64> {
        let kr = self.k.ratio(t)?;
        let y = -2.0 * kr.ln_big_k();
        let lb = self.f.b.ln();
        let j = |s: f64| self.f.ln_f(s) - s;
        if y < j(lb) {
            return Err(Error::Domain(format!("K({t:e})^(−2) is below f(B)/B; t is too large")));
        }
        let guess = (y - self.f.c.ln()) / self.f.rho;
        invert_increasing(j, y, guess.max(lb), 1.0, 1e-15)
    }

    pub fn profile_phi(&self, t: f64) -> Result<f64> {
        Ok(self.ln_phi(t)?.exp())
    }

    /// Largest `t = t₀ 2^{−j}` with `K(t) ≤ ψ(B)/2`, `t₀ = min(ν/2, 1)`.
    pub fn t_max(&self) -> Result<f64> {
        let lim = self.f.ln_psi(self.f.b.ln())? - 2f64.ln();
        let mut t = (0.5 * self.k.nu).min(1.0);
        for _ in 0..200 {
            if self.k.ratio(t)?.ln_big_k() <= lim {
                return Ok(t);
            }
            t *= 0.5;
        }
        Err(Error::Domain("no t with K(t) ≤ ψ(B)/2".into()))
    }

    /// `|ψ(h(t)) − K(t)| / K(t)`.
    pub fn defining_residual(&self, t: f64) -> Result<f64> {
        let p = self.h_point(t)?;
        Ok((self.f.ln_psi(p.s_h)? - p.kr.ln_big_k()).exp_m1().abs())
    }

    /// `|φ^{−1} f(φ) K² − 1|`.
    pub fn phi_residual(&self, t: f64) -> Result<f64> {
        let s = self.ln_phi(t)?;
        let kr = self.k.ratio(t)?;
        Ok((self.f.ln_f(s) - s + 2.0 * kr.ln_big_k()).exp_m1().abs())
    }
}

/// One row of the table of asymptotic properties of `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub item: &'static str,
    pub quantity: String,
    /// `+∞` for divergence rows.
    pub target: f64,
    pub estimate: LimitEstimate,
    pub pass: bool,
}

/// Relative 1% (absolute 1% for a zero target).
pub fn within_one_percent(value: f64, target: f64) -> bool {
    let tol = if target == 0.0 { 1e-2 } else { 1e-2 * target.abs() };
    (value - target).abs() <= tol
}

/// The grid used for limits `t ↘ 0` of profile quantities: logarithmic for
/// power-like weights, algebraic for flat ones (where `e^{−L}` would push
/// `h` past any representable range).
pub fn profile_grid(report: &WeightClassReport, opts: &ClassifyOptions) -> Grid {
    if report.is_flat() {
        opts.alg
    } else {
        opts.log
    }
}

fn divergence_row(item: &'static str, quantity: String, grid: &Grid, ln_vals: &[f64]) -> LemmaRow {
    let pts = grid.log_points(Direction::ToZero);
    let n = ln_vals.len();
    let rising = ln_vals[n - 4..].windows(2).all(|w| w[1] > w[0]);
    let diverges = rising && ln_vals[n - 1] > 1e8f64.ln();
    LemmaRow {
        item,
        quantity,
        target: f64::INFINITY,
        estimate: LimitEstimate {
            value: if diverges { f64::INFINITY } else { ln_vals[n - 1].exp() },
            stderr: 0.0,
            grid: pts.iter().map(|s| s.exp()).collect(),
            converged: diverges,
        },
        pass: diverges,
    }
}

/// Extrapolated limits of the quantities in the asymptotic lemma on `h`,
/// each with its closed-form target.
pub fn lemma_aux_report(eng: &ProfileEngine, report: &WeightClassReport, opts: &ClassifyOptions) -> Result<Vec<LemmaRow>> {
    let grid = profile_grid(report, opts);
    let pts: Vec<HPoint> = grid.log_points(Direction::ToZero).into_iter().map(|s| eng.h_point(s.exp())).collect::<Result<_>>()?;
    let rho = eng.f.rho;
    let l1 = if report.is_flat() { 0.0 } else { report.ell1.value };
    let mut rows = Vec::new();
    let row = |item: &'static str, quantity: String, target: f64, vals: Vec<f64>| -> Result<LemmaRow> {
        let estimate = grid.estimate(&vals, Direction::ToZero, opts.tol)?;
        let pass = within_one_percent(estimate.value, target);
        Ok(LemmaRow { item, quantity, target, estimate, pass })
    };
    for xi in [0.5, 1.0, 2.0] {
        let v = pts.iter().map(|p| p.q * (p.ln_f_h - eng.f.ln_f(p.s_h + f64::ln(xi))).exp()).collect();
        rows.push(row("i", format!("h''/(k^2 f({xi} h))"), (2.0 + rho * l1) / (xi.powf(rho + 1.0) * (2.0 + rho)), v)?);
    }
    let v = pts.iter().map(|p| p.q * (p.s_h + p.ln_f_h - 2f64.ln() - p.ln_big_f_h).exp()).collect();
    rows.push(row("ii", "h h''/h'^2".into(), (2.0 + rho * l1) / 2.0, v)?);
    let v = pts.iter().map(|p| p.kr.ln_k / p.s_h).collect();
    rows.push(row("ii", "ln k / ln h".into(), rho * (l1 - 1.0) / 2.0, v)?);
    let v = pts.iter().map(|p| p.h1_over_h2() / p.t).collect();
    rows.push(row("iii", "h'/(t h'')".into(), -rho * l1 / (2.0 + rho * l1), v)?);
    let v = pts.iter().map(|p| (p.s_h - p.ln_h2() - 2.0 * p.t.ln()).exp()).collect();
    rows.push(row("iii", "h/(t^2 h'')".into(), rho * rho * l1 * l1 / (2.0 * (2.0 + rho * l1)), v)?);
    let v = pts.iter().map(|p| -(p.s_h - p.ln_neg_h1() - p.t.ln()).exp()).collect();
    rows.push(row("iv", "h/(t h')".into(), -rho * l1 / 2.0, v)?);
    let v = pts.iter().map(|p| p.t.ln() / p.s_h).collect();
    rows.push(row("iv", "ln t / ln h".into(), -rho * l1 / 2.0, v)?);
    if report.is_flat() {
        for j in [0.5, 1.0, 2.0] {
            let lv: Vec<f64> = pts.iter().map(|p| j * p.t.ln() + p.s_h).collect();
            rows.push(divergence_row("v", format!("t^{j} h"), &grid, &lv));
        }
        if let (Subclass::K0Zeta, Some(z), Some(ls)) = (report.subclass, report.zeta, report.lstar.as_ref()) {
            let target = -rho * ls.value / (2.0 * (z + 1.0));
            let v = pts.iter().map(|p| 1.0 / (-z * p.t.powf(z) * p.s_h)).collect();
            rows.push(row("v", format!("1/(-{z} t^{z} ln h)"), target, v)?);
            let v = pts.iter().map(|p| p.h1_over_h2() / p.t.powf(z + 1.0)).collect();
            rows.push(row("v", format!("h'/(t^{} h'')", z + 1.0), target, v)?);
        }
    }
    Ok(rows)
}

/// `lim φ/h`, which should equal `[2(ρ+2)/ρ²]^{−1/ρ}`.
pub fn phi_over_h_limit(eng: &ProfileEngine, report: &WeightClassReport, opts: &ClassifyOptions) -> Result<LimitEstimate> {
    let grid = profile_grid(report, opts);
    grid.limit(Direction::ToZero, opts.tol, |s| {
        let t = s.exp();
        Ok((eng.ln_phi(t)? - eng.h_point(t)?.s_h).exp())
    })
}

/// Estimated index of `u ↦ φ(1/u)`; `2/(ρℓ₁)` when `ℓ₁ > 0`.
pub fn phi_index(eng: &ProfileEngine, report: &WeightClassReport, opts: &ClassifyOptions) -> Result<LimitEstimate> {
    if report.is_flat() {
        return Err(Error::Precondition("φ(1/u) is not regularly varying for flat weights".into()));
    }
    let e = eng.clone();
    let z = RegVarFunction::from_log(move |s| e.ln_phi((-s).exp()).unwrap_or(f64::NAN), 1.0, None);
    let grid = match report.ell1_scale {
        Scale::Logarithmic => opts.log,
        Scale::Algebraic => Grid::algebraic(1.0 / opts.alg.start, opts.alg.ratio, opts.alg.n),
    };
    rv_index_estimate(&z, &[2.0, 0.5], &grid, 1e-4)
}

/// Γ-variation of `U(y) = φ(1/y)` with auxiliary `g(y) = ρ y² (K/k)(1/y)/2`.
pub fn phi_gamma_variation(eng: &ProfileEngine, lambda: f64, opts: &ClassifyOptions) -> Result<LimitEstimate> {
    let grid = Grid::algebraic(1.0 / opts.alg.start, opts.alg.ratio, opts.alg.n);
    let rho = eng.f.rho;
    gamma_variation_check(
        |y| eng.ln_phi(1.0 / y).unwrap_or(f64::NAN),
        |y| eng.k.ratio(1.0 / y).map_or(f64::NAN, |r| 0.5 * rho * y * y * r.k_over),
        lambda,
        &grid,
        1e-6,
    )
}
