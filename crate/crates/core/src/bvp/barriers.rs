//! Operator signs of the boundary barriers `ξ^± h(d)` and
//! `ξ₀ h(d)[1 + χ^± (−ln d)^{−τ}]`.

use super::Geometry;
use crate::error::{Error, Result};
use crate::expansion::{xi0, BExpansion};
use crate::profiles::{HPoint, ProfileEngine};
use crate::regvar::{Direction, Grid, LimitEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierSide {
    /// Supersolution: the operator must be negative.
    Plus,
    /// Subsolution: the operator must be positive.
    Minus,
}

impl BarrierSide {
    fn sign(self) -> f64 {
        match self {
            BarrierSide::Plus => 1.0,
            BarrierSide::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierOptions {
    pub eps: f64,
    pub order: Order,
    pub a: f64,
    /// Supplies `Δd`; `None` is the half-line (`Δd = 0`).
    pub geometry: Option<Geometry>,
    pub bexp: BExpansion,
    /// `χ̃` for the second-order barriers.
    pub chi_tilde: f64,
    pub tau: f64,
    /// `ℓ₁` from the weight classification.
    pub ell1: f64,
    pub grid: Grid,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSamples {
    pub d: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub plus: LimitEstimate,
    pub minus: LimitEstimate,
    /// `(−ε/(1−2ε), ε/(1+2ε))` or `(−ρε, ρε)`.
    pub targets: (f64, f64),
    /// Largest grid point below which both signs hold at every grid point.
    pub delta1: Option<f64>,
    /// Largest gap between the expanded and the direct second-order
    /// operator; zero at first order.
    pub form_gap: f64,
    pub pass: bool,
    pub samples: BarrierSamples,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidInput(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    Ok(())
}

fn lap_d(o: &BarrierOptions, d: f64) -> f64 {
    o.geometry.map_or(0.0, |g| g.laplacian_of_distance(d))
}

/// `ξ^± = [(2+ℓ₁ρ)/((1∓2ε)(2+ρ))]^{1/ρ}`.
pub fn xi_pm(rho: f64, ell1: f64, eps: f64, side: BarrierSide) -> f64 {
    ((2.0 + ell1 * rho) / ((1.0 - 2.0 * side.sign() * eps) * (2.0 + rho))).powf(1.0 / rho)
}

/// `B^±(d) = 1 + a h/h″ + Δd h′/h″ − (1∓ε) k² f(ξ^± h)/(ξ^± h″)`.
pub fn b_barrier(eng: &ProfileEngine, p: &HPoint, o: &BarrierOptions, side: BarrierSide) -> f64 {
    let xi = xi_pm(eng.f.rho, o.ell1, o.eps, side);
    let lx = eng.f.ln_f(p.s_h + xi.ln()) - xi.ln() - p.ln_f_h - p.q.ln();
    1.0 + o.a * p.h_over_h2() + lap_d(o, p.t) * p.h1_over_h2() - (1.0 - side.sign() * o.eps) * lx.exp()
}

struct JParts {
    chi: f64,
    /// `(−ln d)^τ`.
    lt: f64,
    big_l: f64,
    /// `ln(k² f(ξ₀h)/(ξ₀h″))`.
    ln_x: f64,
    /// `ln(f(u^±)/f(ξ₀h))`.
    ln_r: f64,
    /// `c̃ ∓ ε` times `d^θ`.
    cd: f64,
}

fn j_parts(eng: &ProfileEngine, p: &HPoint, o: &BarrierOptions, side: BarrierSide) -> Result<JParts> {
    let x0 = xi0(eng.f.rho, o.ell1)?;
    let s = side.sign();
    let chi = o.chi_tilde + s * o.eps;
    let big_l = -p.t.ln();
    let lt = big_l.powf(o.tau);
    let s0 = p.s_h + x0.ln();
    let ln_x = eng.f.ln_f(s0) - x0.ln() - p.ln_f_h - p.q.ln();
    let ln_r = eng.f.ln_f(s0 + (chi / lt).ln_1p()) - eng.f.ln_f(s0);
    let (theta, c) = match o.bexp {
        BExpansion::FirstOrder => (1.0, 0.0),
        BExpansion::TwoTerm { theta, c_tilde } => (theta, c_tilde),
    };
    Ok(JParts { chi, lt, big_l, ln_x, ln_r, cd: (c - s * o.eps) * p.t.powf(theta) })
}

/// `J^±` assembled directly from `u^± = ξ₀ h g` with `g = 1 + χ^± L^{−τ}`.
pub fn j_direct(eng: &ProfileEngine, p: &HPoint, o: &BarrierOptions, side: BarrierSide) -> Result<f64> {
    let JParts { chi, lt, big_l, ln_x, ln_r, cd } = j_parts(eng, p, o, side)?;
    let (d, tau) = (p.t, o.tau);
    let dd = lap_d(o, d);
    let h1h2 = p.h1_over_h2();
    let hh2 = p.h_over_h2();
    // h/(d² h″)
    let hd2 = (p.s_h - p.ln_h2() - 2.0 * d.ln()).exp();
    let g_term = chi - (ln_x + ln_r + cd.ln_1p()).exp_m1() * lt;
    let deriv = 2.0 * h1h2 * chi * tau / (d * big_l) + hd2 * chi * tau * ((tau + 1.0) - big_l) / (big_l * big_l);
    let lap = dd * (h1h2 * (lt + chi) + hh2 * chi * tau / (d * big_l));
    Ok(g_term + deriv + lap + o.a * hh2 * (lt + chi))
}

/// `J^±` as the sum of the named terms, with `k² h f′(Ψ)/h″` taken from the
/// secant of `f` between `ξ₀h` and `u^±`.
pub fn j_expanded(eng: &ProfileEngine, p: &HPoint, o: &BarrierOptions, side: BarrierSide) -> Result<f64> {
    let JParts { chi, lt, big_l, ln_x, ln_r, cd } = j_parts(eng, p, o, side)?;
    let (d, tau) = (p.t, o.tau);
    let dd = lap_d(o, d);
    let ln_d = -big_l;
    let x = ln_x.exp();
    let h1h2 = p.h1_over_h2();
    let hd2 = (p.s_h - p.ln_h2() - 2.0 * d.ln()).exp();
    let secant = if chi != 0.0 {
        lt * x * ln_r.exp_m1() / chi
    } else {
        let s0 = p.s_h + xi0(eng.f.rho, o.ell1)?.ln();
        let del = 1e-7;
        x * (eng.f.ln_f(s0 + del) - eng.f.ln_f(s0)).exp_m1() / del
    };
    let t1 = chi * dd * h1h2;
    let t2 = h1h2 * lt * dd - 2.0 * tau * chi * h1h2 / (d * ln_d);
    let t3 = o.a * p.h_over_h2() * (chi + lt);
    let t4 = tau * chi * hd2 / ln_d * (1.0 + (tau + 1.0) / ln_d - d * dd);
    let t5 = -cd * lt * x;
    let t6 = -cd * chi * secant;
    let script_h = -lt * ln_x.exp_m1();
    let j1 = chi * (1.0 - secant);
    Ok(t1 + t2 + t3 + t4 + t5 + t6 + script_h + j1)
}

/// Samples `B^±` or `J^±` toward the boundary, extrapolates both limits
/// and locates `δ₁`. Passes when both limits are within 2% of their
/// targets and the sign region is nonempty.
pub fn subsupersolution_check(eng: &ProfileEngine, o: &BarrierOptions) -> Result<BarrierReport> {
    check_eps(o.eps)?;
    let rho = eng.f.rho;
    let targets = match o.order {
        Order::First => (-o.eps / (1.0 - 2.0 * o.eps), o.eps / (1.0 + 2.0 * o.eps)),
        Order::Second => (-rho * o.eps, rho * o.eps),
    };
    let pts = o.grid.log_points(Direction::ToZero);
    let (mut d, mut plus, mut minus) = (Vec::new(), Vec::new(), Vec::new());
    let mut form_gap = 0.0f64;
    for s in pts {
        let p = eng.h_point(s.exp())?;
        d.push(p.t);
        match o.order {
            Order::First => {
                plus.push(b_barrier(eng, &p, o, BarrierSide::Plus));
                minus.push(b_barrier(eng, &p, o, BarrierSide::Minus));
            }
            Order::Second => {
                for (side, out) in [(BarrierSide::Plus, &mut plus), (BarrierSide::Minus, &mut minus)] {
                    let a = j_direct(eng, &p, o, side)?;
                    let b = j_expanded(eng, &p, o, side)?;
                    form_gap = form_gap.max((a - b).abs() / (1.0 + a.abs()));
                    out.push(a);
                }
            }
        }
    }
    let pe = o.grid.estimate(&plus, Direction::ToZero, o.tol)?;
    let me = o.grid.estimate(&minus, Direction::ToZero, o.tol)?;
    let n = d.len();
    let first_bad = (0..n).rev().find(|&i| !(plus[i] < 0.0 && minus[i] > 0.0));
    let delta1 = match first_bad {
        None => Some(d[0]),
        Some(i) if i + 1 < n => Some(d[i + 1]),
        Some(_) => None,
    };
    let close = |v: f64, t: f64| (v - t).abs() <= 0.02 * t.abs();
    let pass = close(pe.value, targets.0) && close(me.value, targets.1) && delta1.is_some();
    Ok(BarrierReport { plus: pe, minus: me, targets, delta1, form_gap, pass, samples: BarrierSamples { d, plus, minus } })
}
