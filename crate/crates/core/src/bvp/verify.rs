use super::solve::match_nodes;
use super::{build_mesh, epsb_sensitivity, solve_large_solution, Closure, Geometry, LargeSolution, MeshSpec, RadialProblem};
use crate::error::{Error, Result};
use crate::expansion::{ExpansionPrediction, Rate};
use crate::expr::{parse, Fn1, ParseError};
use crate::nonlinearity::Nonlinearity;
use crate::profiles::ProfileEngine;
use crate::regvar::{limit_extrapolate, Direction, LimitEstimate};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    /// `(d, value)` ordered toward the boundary.
    pub samples: Vec<(f64, f64)>,
    pub estimate: Option<LimitEstimate>,
    pub target: f64,
    pub verdict: Verdict,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Boundary-layer nodes at `d = 2^j ε_b`, `j ≥ j_min`, `d ≤ D/4`, ordered
/// toward the boundary.
fn dyadic_nodes(sol: &LargeSolution, j_min: usize) -> Vec<usize> {
    let dq = 0.25 * sol.geometry.half_width();
    let layer = sol.boundary_layer();
    let per = 5usize << sol.level;
    let mut v: Vec<usize> = layer
        .iter()
        .enumerate()
        .filter(|(k, _)| *k >= j_min.max(1) * per && k % per == 0)
        .map(|(_, &i)| i)
        .filter(|&i| sol.d[i] <= dq * (1.0 + 1e-12))
        .collect();
    v.reverse();
    v
}

fn ratio_samples(sol: &LargeSolution, xi0: f64, eng: &ProfileEngine, j_min: usize) -> Result<Vec<(f64, f64)>> {
    dyadic_nodes(sol, j_min)
        .into_iter()
        .map(|i| {
            let p = eng.h_point(sol.d[i])?;
            Ok((sol.d[i], (sol.w[i] - xi0.ln() - p.s_h).exp()))
        })
        .collect()
}

/// Extrapolates `u/(ξ₀ h(d))` as `d ↘ 0` over `d ≥ 2ε_b`; passes when the
/// limit is within 2% of 1.
pub fn verify_first_order(sol: &LargeSolution, xi0: f64, eng: &ProfileEngine) -> Result<Verification> {
    let samples = ratio_samples(sol, xi0, eng, 1)?;
    if samples.len() < 8 {
        return Ok(Verification {
            verdict: Verdict::Inconclusive(format!("only {} usable boundary-layer nodes", samples.len())),
            samples,
            estimate: None,
            target: 1.0,
        });
    }
    let est = limit_extrapolate(&samples, Direction::ToZero, 1e-3)?;
    let verdict = if (est.value - 1.0).abs() <= 0.02 { Verdict::Pass } else { Verdict::Fail };
    Ok(Verification { samples, estimate: Some(est), target: 1.0, verdict })
}

/// Extrapolates `R(d) = (u/(ξ₀h) − 1)·d^{−ϖ}` or `(u/(ξ₀h) − 1)·(−ln d)^τ`
/// over `d ≥ 2^{j_min} ε_b` and compares with `target` at 10%. A zero target
/// instead needs `|R| < 0.05` at the smallest `d`. The verdict is
/// inconclusive when the extrapolants have not settled to a fifth of the
/// tolerance, which is the usual outcome for logarithmic rates.
pub fn verify_second_order(
    sol: &LargeSolution,
    xi0: f64,
    rate: Rate,
    target: f64,
    eng: &ProfileEngine,
    j_min: usize,
) -> Result<Verification> {
    let raw = ratio_samples(sol, xi0, eng, j_min)?;
    let samples: Vec<(f64, f64)> = raw
        .iter()
        .map(|&(d, r)| {
            let w = match rate {
                Rate::Algebraic { varpi } => d.powf(-varpi),
                Rate::Logarithmic { tau } => (-d.ln()).powf(tau),
            };
            (d, (r - 1.0) * w)
        })
        .collect();
    let decades = samples.first().zip(samples.last()).map_or(0.0, |(a, b)| (a.0 / b.0).log10());
    let inconclusive = |why: String, samples, estimate| Ok(Verification { verdict: Verdict::Inconclusive(why), samples, estimate, target });
    if samples.len() < 6 || decades < 1.5 {
        return inconclusive(format!("boundary layer spans {decades:.2} decades over {} nodes", samples.len()), samples, None);
    }
    if target == 0.0 {
        let last = samples.last().map_or(f64::NAN, |s| s.1);
        let verdict = if last.abs() < 0.05 { Verdict::Pass } else { Verdict::Fail };
        let est = limit_extrapolate(&samples, Direction::ToZero, 1e-2).ok();
        return Ok(Verification { samples, estimate: est, target, verdict });
    }
    let tol = 0.1 * target.abs();
    let est = match limit_extrapolate(&samples, Direction::ToZero, 0.2 * tol) {
        Ok(e) => e,
        Err(e) => return inconclusive(e.to_string(), samples, None),
    };
    if !est.converged {
        let why = format!("extrapolants still move by {:.3e} (need < {:.3e})", est.stderr, 0.2 * tol);
        return inconclusive(why, samples, Some(est));
    }
    let verdict = if (est.value - target).abs() <= tol { Verdict::Pass } else { Verdict::Fail };
    Ok(Verification { samples, estimate: Some(est), target, verdict })
}

/// Second-order check driven by a prediction.
pub fn verify_prediction(sol: &LargeSolution, pred: &ExpansionPrediction, eng: &ProfileEngine, j_min: usize) -> Result<Verification> {
    match (pred.rate, pred.second_coeff) {
        (Some(rate), Some(c)) => verify_second_order(sol, pred.leading, rate, c, eng, j_min),
        _ => Err(Error::Precondition(format!("prediction {} has no second term", pred.case_tag))),
    }
}

/// `u*` with first and second derivatives, as functions of the abscissa or
/// radius.
#[derive(Clone)]
pub struct Manufactured {
    pub u: Fn1,
    pub du: Fn1,
    pub d2u: Fn1,
    pub label: String,
}

impl Manufactured {
    /// Symbolic derivatives of an expression in `x`.
    pub fn parse(src: &str) -> std::result::Result<Self, ParseError> {
        let e = parse(src, "x")?;
        let d1 = e.derivative();
        let d2 = d1.derivative();
        Ok(Manufactured {
            u: Arc::new(move |x| e.eval(x)),
            du: Arc::new(move |x| d1.eval(x)),
            d2u: Arc::new(move |x| d2.eval(x)),
            label: src.to_string(),
        })
    }
}

/// The problem solved exactly by `u*`: `b = (Δu* + a u*)/f(u*)`. Rejects
/// choices where `b` is negative on a fine boundary-graded sample.
pub fn manufactured_problem(m: &Manufactured, geometry: Geometry, a: f64, f: Nonlinearity) -> Result<RadialProblem> {
    geometry.validate()?;
    let n1 = (geometry.dim() - 1) as f64;
    let mm = m.clone();
    let ff = f.clone();
    let numer = move |x: f64| {
        let c = if n1 > 0.0 && x > 0.0 { n1 / x * (mm.du)(x) } else { 0.0 };
        (mm.d2u)(x) + c + a * (mm.u)(x)
    };
    let probe = build_mesh(geometry, MeshSpec { eps_b: 1e-6 * geometry.half_width(), level: 1 })?;
    for &x in &probe.x {
        let v = numer(x);
        let u = (m.u)(x);
        if !(u > 0.0) || v.is_nan() || v < 0.0 {
            return Err(Error::InvalidInput(format!("u* gives b < 0 (or u* ≤ 0) at x = {x}: invalid manufactured choice")));
        }
    }
    let mu = m.u.clone();
    let ln_b: Fn1 = Arc::new(move |x: f64| {
        let u = mu(x);
        numer(x).ln() - ff.ln_f(u.ln())
    });
    let mu = m.u.clone();
    Ok(RadialProblem { geometry, a, ln_b, f, guess: Arc::new(move |x| mu(x).ln()), label: format!("manufactured u* = {}", m.label) })
}

/// Maximum error in `ln u` at the level-`l₀` nodes for levels
/// `l₀ … l₀+n−1`, and the observed order from the last two.
pub fn mesh_convergence_order(p: &RadialProblem, m: &Manufactured, eps_b: f64, l0: u32, n: u32) -> Result<(Vec<f64>, f64)> {
    let exact: Fn1 = {
        let u = m.u.clone();
        Arc::new(move |x| u(x).ln())
    };
    let closure = Closure::Exact(exact.clone());
    let sols: Vec<LargeSolution> =
        (l0..l0 + n).map(|l| solve_large_solution(p, MeshSpec { eps_b, level: l }, &closure)).collect::<Result<_>>()?;
    let base = &sols[0];
    let mut errs = Vec::new();
    for s in &sols {
        let idx = match_nodes(&base.x, &s.x);
        let e = idx.iter().enumerate().filter_map(|(i, j)| j.map(|j| (s.w[j] - exact(base.x[i])).abs())).fold(0.0f64, f64::max);
        errs.push(e);
    }
    let k = errs.len();
    if k < 2 {
        return Err(Error::InvalidInput("need at least two levels".into()));
    }
    Ok((errs.clone(), (errs[k - 2] / errs[k - 1]).log2()))
}

/// Agreement of two closures at the interior nodes `d ≥ D/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub max_diff: f64,
    /// `3(s₁ + s₂) + 2(t₁ + t₂) + 1e-8`, with `s` the interior change of each
    /// closure under halving of `ε_b` and `t` its stopping tolerance (zero
    /// for the asymptotic and exact closures).
    pub tolerance: f64,
    pub pass: bool,
    pub first: LargeSolution,
    pub second: LargeSolution,
}

pub fn closure_agreement(p: &RadialProblem, spec: MeshSpec, c1: &Closure, c2: &Closure) -> Result<Agreement> {
    let s1 = epsb_sensitivity(p, spec, c1)?;
    let s2 = epsb_sensitivity(p, spec, c2)?;
    let (a, b) = (s1.coarse, s2.coarse);
    let max_diff = a.interior().iter().fold(0.0f64, |m, &i| m.max((a.w[i] - b.w[i]).exp_m1().abs()));
    let stop = |c: &Closure| match c {
        Closure::DirichletM { tol, .. } => *tol,
        _ => 0.0,
    };
    let tolerance = 3.0 * (s1.interior_change + s2.interior_change) + 2.0 * (stop(c1) + stop(c2)) + 1e-8;
    Ok(Agreement { max_diff, tolerance, pass: max_diff <= tolerance, first: a, second: b })
}
