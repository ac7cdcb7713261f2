//! Large solutions of `Δu + au = b f(u)` on intervals, balls and annuli,
//! and numerical checks of the predicted boundary behaviour.
//!
//! The unknown is `w = ln u`, so the equation becomes
//! `w″ + w′² + (N−1)w′/r + a = b f(e^w) e^{−w}`, and the right side is
//! evaluated in logarithms. This keeps exponentially flat weights, where
//! `u ~ e^{1/d}`, inside floating point.

mod barriers;
mod solve;
mod verify;

pub use barriers::{
    b_barrier, j_direct, j_expanded, subsupersolution_check, xi_pm, BarrierOptions, BarrierReport, BarrierSamples, BarrierSide, Order,
};
pub use solve::{epsb_sensitivity, richardson, solve_large_solution, Closure, ClosureKind, EpsbSensitivity, LargeSolution};
pub use verify::{
    closure_agreement, manufactured_problem, mesh_convergence_order, verify_first_order, verify_prediction, verify_second_order, Agreement,
    Manufactured, Verdict, Verification,
};

use crate::error::{Error, Result};
use crate::expansion::BExpansion;
use crate::expr::Fn1;
use crate::nonlinearity::Nonlinearity;
use crate::profiles::ProfileEngine;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Interval { l: f64 },
    Ball { n: usize, r: f64 },
    Annulus { n: usize, r0: f64, r: f64 },
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Geometry::Interval { l } => l > 0.0 && l.is_finite(),
            Geometry::Ball { n, r } => n >= 3 && r > 0.0 && r.is_finite(),
            Geometry::Annulus { n, r0, r } => n >= 3 && r0 > 0.0 && r > r0 && r.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad geometry {self:?} (balls and annuli need N ≥ 3)")))
        }
    }

    /// `N`; 1 for the interval.
    pub fn dim(&self) -> usize {
        match *self {
            Geometry::Interval { .. } => 1,
            Geometry::Ball { n, .. } | Geometry::Annulus { n, .. } => n,
        }
    }

    /// Largest distance to the boundary.
    pub fn half_width(&self) -> f64 {
        match *self {
            Geometry::Interval { l } => 0.5 * l,
            Geometry::Ball { r, .. } => r,
            Geometry::Annulus { r0, r, .. } => 0.5 * (r - r0),
        }
    }

    /// Distance to the boundary of the point at abscissa or radius `x`.
    pub fn distance(&self, x: f64) -> f64 {
        match *self {
            Geometry::Interval { l } => x.min(l - x),
            Geometry::Ball { r, .. } => r - x,
            Geometry::Annulus { r0, r, .. } => (x - r0).min(r - x),
        }
    }

    /// `Δd` near the outer boundary (near `x = 0` for the interval), as a
    /// function of `d`.
    pub fn laplacian_of_distance(&self, d: f64) -> f64 {
        match *self {
            Geometry::Interval { .. } => 0.0,
            Geometry::Ball { n, r } | Geometry::Annulus { n, r, .. } => -((n - 1) as f64) / (r - d),
        }
    }
}

/// First Dirichlet eigenvalue of `−Δ`: closed form on intervals, radial
/// shooting on balls.
pub fn eigenvalue_first_dirichlet(g: Geometry) -> Result<f64> {
    g.validate()?;
    match g {
        Geometry::Interval { l } => Ok(PI * PI / (l * l)),
        Geometry::Ball { n, r } => ball_eigenvalue(n as f64, r),
        Geometry::Annulus { .. } => Err(Error::InvalidInput("eigenvalue on an annulus is not supported".into())),
    }
}

/// `u(R)` for `u″ + (N−1)u′/r + λu = 0`, `u(0) = 1`, `u′(0) = 0`.
fn shoot(n: f64, big_r: f64, lambda: f64) -> f64 {
    let r0 = 1e-4 * big_r;
    let mut u = 1.0 - lambda * r0 * r0 / (2.0 * n) + lambda * lambda * r0.powi(4) / (8.0 * n * (n + 2.0));
    let mut v = -lambda * r0 / n + lambda * lambda * r0.powi(3) / (2.0 * n * (n + 2.0));
    let steps = 4000;
    let h = (big_r - r0) / steps as f64;
    let rhs = |r: f64, u: f64, v: f64| (v, -(n - 1.0) / r * v - lambda * u);
    let mut r = r0;
    for _ in 0..steps {
        let (k1u, k1v) = rhs(r, u, v);
        let (k2u, k2v) = rhs(r + 0.5 * h, u + 0.5 * h * k1u, v + 0.5 * h * k1v);
        let (k3u, k3v) = rhs(r + 0.5 * h, u + 0.5 * h * k2u, v + 0.5 * h * k2v);
        let (k4u, k4v) = rhs(r + h, u + h * k3u, v + h * k3v);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        r += h;
    }
    u
}

fn ball_eigenvalue(n: f64, r: f64) -> Result<f64> {
    let step = 0.25 / (r * r);
    let mut lo = 0.0;
    let mut hi = step;
    while shoot(n, r, hi) > 0.0 {
        lo = hi;
        hi += step;
        if hi > 1e4 / (r * r) {
            return Err(Error::NonConvergence("no sign change in the shooting function".into()));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if shoot(n, r, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Δu + au = b f(u)` on a radial domain, with `b` given through `ln b` as a
/// function of the abscissa or radius.
#[derive(Clone)]
pub struct RadialProblem {
    pub geometry: Geometry,
    pub a: f64,
    pub ln_b: Fn1,
    pub f: Nonlinearity,
    /// Starting iterate for `ln u`, as a function of the abscissa or radius.
    pub guess: Fn1,
    pub label: String,
}

impl std::fmt::Debug for RadialProblem {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("RadialProblem")
            .field("label", &self.label)
            .field("geometry", &self.geometry)
            .field("a", &self.a)
            .field("f", &self.f)
            .finish()
    }
}

impl RadialProblem {
    /// `b(x) = k²(d)(1 + c̃ d^θ)` with starting iterate `ln(ξ₀ h(d))`.
    pub fn from_weight(geometry: Geometry, a: f64, eng: &ProfileEngine, xi0: f64, bexp: BExpansion) -> Result<Self> {
        geometry.validate()?;
        let dmax = geometry.half_width();
        let (theta, c) = match bexp {
            BExpansion::FirstOrder => (1.0, 0.0),
            BExpansion::TwoTerm { theta, c_tilde } => (theta, c_tilde),
        };
        if 1.0 + c.min(0.0) * dmax.powf(theta) <= 0.0 {
            return Err(Error::InvalidInput(format!("1 + c̃ d^θ is not positive up to d = {dmax}")));
        }
        let k = eng.k.clone();
        let ln_b: Fn1 = Arc::new(move |x: f64| {
            let d = geometry.distance(x);
            2.0 * k.ln_eval(d) + (c * d.powf(theta)).ln_1p()
        });
        let by_d = profile_guess(eng, xi0, dmax)?;
        let guess: Fn1 = Arc::new(move |x: f64| by_d(geometry.distance(x)));
        let label = match bexp {
            BExpansion::FirstOrder => format!("b = k^2, k = {}, f = {}", eng.k.label, eng.f.label),
            BExpansion::TwoTerm { .. } => format!("b = k^2 (1 + {c} d^{theta}), k = {}, f = {}", eng.k.label, eng.f.label),
        };
        Ok(RadialProblem { geometry, a, ln_b, f: eng.f.clone(), guess, label })
    }
}

/// `ln(ξ₀ h(d))`, evaluated directly where `h` exists. Elsewhere a table at
/// `d = D·2^{−j/2}` is interpolated linearly in `ln d` and held constant
/// beyond its last point.
fn profile_guess(eng: &ProfileEngine, xi0: f64, dmax: f64) -> Result<Fn1> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for j in 0..=90 {
        let d = dmax * 2f64.powf(-0.5 * j as f64);
        if let Ok(p) = eng.h_point(d) {
            pts.push((d.ln(), xi0.ln() + p.s_h));
        }
    }
    if pts.len() < 2 {
        return Err(Error::Domain("h is undefined on the whole domain".into()));
    }
    pts.reverse();
    let eng = eng.clone();
    Ok(Arc::new(move |d: f64| match eng.h_point(d) {
        Ok(p) => xi0.ln() + p.s_h,
        Err(_) => interp(&pts, d.ln()),
    }))
}

fn interp(pts: &[(f64, f64)], x: f64) -> f64 {
    let n = pts.len();
    let i = match pts.iter().position(|p| p.0 > x) {
        Some(0) => 1,
        Some(i) => i,
        None if x > pts[n - 1].0 => return pts[n - 1].1,
        None => n - 1,
    };
    if x > pts[n - 1].0 {
        return pts[n - 1].1;
    }
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Boundary-graded mesh. In each boundary layer `d_j = ε_b q^j` with
/// `q = 2^{1/(5·2^level)}`, so halving `ε_b` or raising `level` gives
/// nested meshes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub eps_b: f64,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    /// `ε_b` after rounding to `D·2^{−j/5}`.
    pub eps_b: f64,
    pub level: u32,
    /// Steps per boundary layer.
    pub steps: usize,
}

pub fn build_mesh(g: Geometry, spec: MeshSpec) -> Result<Mesh> {
    g.validate()?;
    let dmax = g.half_width();
    if !(spec.eps_b > 0.0) || spec.eps_b >= 0.5 * dmax {
        return Err(Error::InvalidInput(format!("ε_b = {} must lie in (0, {})", spec.eps_b, 0.5 * dmax)));
    }
    let fifths = (5.0 * (dmax / spec.eps_b).log2()).round().max(5.0) as usize;
    let per = 1usize << spec.level;
    let steps = fifths * per;
    let eps_b = dmax * 2f64.powf(-(fifths as f64) / 5.0);
    let layer: Vec<f64> = (0..=steps).map(|j| if j == steps { dmax } else { eps_b * 2f64.powf(j as f64 / (5 * per) as f64) }).collect();
    let (x, d): (Vec<f64>, Vec<f64>) = match g {
        Geometry::Interval { l } => {
            let mut x: Vec<f64> = layer.clone();
            x.extend(layer.iter().rev().skip(1).map(|d| l - d));
            let d = x.iter().map(|&x| g.distance(x)).collect();
            (x, d)
        }
        Geometry::Ball { r, .. } => {
            let x: Vec<f64> = layer.iter().rev().map(|d| r - d).collect();
            let mut x = x;
            x[0] = 0.0;
            let d = layer.iter().rev().copied().collect();
            (x, d)
        }
        Geometry::Annulus { r0, r, .. } => {
            let mut x: Vec<f64> = layer.iter().map(|d| r0 + d).collect();
            x.extend(layer.iter().rev().skip(1).map(|d| r - d));
            let d = x.iter().map(|&x| g.distance(x)).collect();
            (x, d)
        }
    };
    Ok(Mesh { x, d, eps_b, level: spec.level, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_eigenvalues() {
        assert!((eigenvalue_first_dirichlet(Geometry::Interval { l: 1.0 }).unwrap() - 9.869_604_401_089_358).abs() < 1e-12);
        assert!((eigenvalue_first_dirichlet(Geometry::Interval { l: 2.0 }).unwrap() - 2.467_401_100_272_339_5).abs() < 1e-12);
    }

    #[test]
    fn ball_eigenvalues_by_shooting() {
        let l3 = eigenvalue_first_dirichlet(Geometry::Ball { n: 3, r: 1.0 }).unwrap();
        assert!((l3 - PI * PI).abs() < 1e-7, "{l3}");
        // first zero of the spherical Bessel function j₁
        let l5 = eigenvalue_first_dirichlet(Geometry::Ball { n: 5, r: 2.0 }).unwrap();
        assert!((l5 - 4.493_409_457_909_064f64.powi(2) / 4.0).abs() < 1e-7, "{l5}");
        assert!(eigenvalue_first_dirichlet(Geometry::Annulus { n: 3, r0: 1.0, r: 2.0 }).is_err());
    }

    #[test]
    fn meshes_are_nested() {
        let g = Geometry::Interval { l: 1.0 };
        let m0 = build_mesh(g, MeshSpec { eps_b: 1e-3, level: 0 }).unwrap();
        let m1 = build_mesh(g, MeshSpec { eps_b: 1e-3, level: 1 }).unwrap();
        assert_eq!(m1.x.len(), 2 * m0.x.len() - 1);
        for (i, x) in m0.x.iter().enumerate() {
            assert!((m1.x[2 * i] - x).abs() < 1e-15);
        }
        let m2 = build_mesh(g, MeshSpec { eps_b: 0.5 * m0.eps_b, level: 0 }).unwrap();
        assert!((m2.eps_b * 2.0 - m0.eps_b).abs() < 1e-18);
        assert!(m0.x.windows(2).all(|w| w[1] > w[0]));
        let b = build_mesh(Geometry::Ball { n: 3, r: 1.0 }, MeshSpec { eps_b: 1e-3, level: 0 }).unwrap();
        assert_eq!(b.x[0], 0.0);
        assert!((b.d.last().unwrap() - b.eps_b).abs() < 1e-15);
    }
}
