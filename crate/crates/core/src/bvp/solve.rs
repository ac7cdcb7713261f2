use super::{build_mesh, Geometry, Mesh, MeshSpec, RadialProblem};
use crate::error::{Error, Result};
use crate::expr::Fn1;
use crate::nonlinearity::{keller_osserman_check, Nonlinearity};

/// How the truncated problem is closed at `d = ε_b`.
#[derive(Clone)]
pub enum Closure {
    /// `ln u(ε_b)` from a prediction, as a function of `d`.
    Asymptotic(Fn1),
    /// Prescribed `ln u` at the end nodes, as a function of the abscissa or
    /// radius.
    Exact(Fn1),
    /// `u(ε_b) = M₀ 2^j`, doubling until interior values (`d ≥ D/4`)
    /// move by less than `tol` in `ln u`.
    DirichletM { ln_m0: f64, tol: f64, max_doublings: usize },
}

impl std::fmt::Debug for Closure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Closure::Asymptotic(_) => f.write_str("Asymptotic"),
            Closure::Exact(_) => f.write_str("Exact"),
            Closure::DirichletM { ln_m0, tol, max_doublings } => {
                f.debug_struct("DirichletM").field("ln_m0", ln_m0).field("tol", tol).field("max_doublings", max_doublings).finish()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosureKind {
    Asymptotic,
    Exact,
    DirichletM { ln_m: f64, doublings: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeSolution {
    pub geometry: Geometry,
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    /// `ln u` at the nodes.
    pub w: Vec<f64>,
    pub eps_b: f64,
    pub level: u32,
    pub closure: ClosureKind,
    /// Largest scaled residual after each Newton or Picard step.
    pub residuals: Vec<f64>,
    pub newton_steps: usize,
    pub picard_used: bool,
}

impl LargeSolution {
    pub fn u(&self, i: usize) -> f64 {
        self.w[i].exp()
    }

    /// Indices of the layer at the outer boundary (`x = 0` for the
    /// interval), ordered from the boundary inward.
    pub fn boundary_layer(&self) -> Vec<usize> {
        let n = self.x.len();
        match self.geometry {
            Geometry::Interval { .. } => (0..n).take_while(|&i| i == 0 || self.d[i] > self.d[i - 1]).collect(),
            Geometry::Ball { .. } => (0..n).rev().collect(),
            Geometry::Annulus { .. } => {
                let mut v: Vec<usize> = (0..n).rev().take_while(|&i| i == n - 1 || self.d[i] > self.d[i + 1]).collect();
                v.dedup();
                v
            }
        }
    }

    /// Nodes with `d ≥ D/4`.
    pub fn interior(&self) -> Vec<usize> {
        let q = 0.25 * self.geometry.half_width();
        (0..self.x.len()).filter(|&i| self.d[i] >= q).collect()
    }
}

struct Disc<'a> {
    x: &'a [f64],
    lnb: Vec<f64>,
    f: &'a Nonlinearity,
    a: f64,
    dim: f64,
    /// Node 0 is the centre of a ball.
    centre: bool,
}

struct Lin {
    r: Vec<f64>,
    scale: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl Disc<'_> {
    fn first(&self) -> usize {
        if self.centre {
            0
        } else {
            1
        }
    }

    /// `b f(e^w) e^{−w}` and its `w`-derivative.
    fn source(&self, i: usize, w: f64) -> (f64, f64) {
        let g = (self.lnb[i] + self.f.ln_f(w) - w).exp();
        (g, g * (self.f.rho + self.f.eps_s(w)))
    }

    /// Residuals and tridiagonal Jacobian over the unknown nodes. `lagged`
    /// drops the linearisation of `w′²` (Picard).
    fn linearise(&self, w: &[f64], lagged: bool) -> Lin {
        let n = self.x.len();
        let i0 = self.first();
        let m = n - 1 - i0;
        let mut l = Lin { r: vec![0.0; m], scale: vec![0.0; m], sub: vec![0.0; m], diag: vec![0.0; m], sup: vec![0.0; m] };
        for (k, i) in (i0..n - 1).enumerate() {
            let (g, dg) = self.source(i, w[i]);
            if self.centre && i == 0 {
                let h = self.x[1];
                let c = 2.0 * self.dim / (h * h);
                let lap = c * (w[1] - w[0]);
                l.r[k] = lap + self.a - g;
                l.scale[k] = lap.abs() + self.a.abs() + g + 1e-300;
                l.diag[k] = -c - dg;
                l.sup[k] = c;
                continue;
            }
            let hm = self.x[i] - self.x[i - 1];
            let hp = self.x[i + 1] - self.x[i];
            let s = hm + hp;
            let (d1m, d1c, d1p) = (-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s));
            let (d2m, d2c, d2p) = (2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s));
            let d1 = d1m * w[i - 1] + d1c * w[i] + d1p * w[i + 1];
            let d2 = d2m * w[i - 1] + d2c * w[i] + d2p * w[i + 1];
            let c = (self.dim - 1.0) / self.x[i];
            l.r[k] = d2 + d1 * d1 + c * d1 + self.a - g;
            l.scale[k] = d2.abs() + d1 * d1 + (c * d1).abs() + self.a.abs() + g + 1e-300;
            let coef = if lagged { d1 + c } else { 2.0 * d1 + c };
            l.sub[k] = d2m + coef * d1m;
            l.diag[k] = d2c + coef * d1c - dg;
            l.sup[k] = d2p + coef * d1p;
        }
        l
    }

    fn merit(&self, w: &[f64]) -> (f64, f64) {
        let l = self.linearise(w, false);
        let mut ss = 0.0;
        let mut mx = 0.0f64;
        for (r, s) in l.r.iter().zip(&l.scale) {
            let q = r / s;
            if !q.is_finite() {
                return (f64::INFINITY, f64::INFINITY);
            }
            ss += q * q;
            mx = mx.max(q.abs());
        }
        ((ss / l.r.len() as f64).sqrt(), mx)
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = diag[0];
    if b == 0.0 {
        return None;
    }
    c[0] = sup[0] / b;
    d[0] = rhs[0] / b;
    for i in 1..n {
        b = diag[i] - sub[i] * c[i - 1];
        if b == 0.0 || !b.is_finite() {
            return None;
        }
        c[i] = sup[i] / b;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

const RES_TOL: f64 = 1e-11;
/// A full Newton direction that no step length improves means the merit is
/// at its rounding floor; that floor is accepted below this level.
const STALL_TOL: f64 = 1e-6;

/// Damped Newton; after three failed line searches a lagged (Picard)
/// sweep, then Newton once more.
fn newton(disc: &Disc, w: &mut [f64], hist: &mut Vec<f64>) -> Result<(usize, bool)> {
    let i0 = disc.first();
    let n = w.len();
    let mut steps = 0;
    let mut fails = 0;
    let mut picard = false;
    let (mut merit, mut mx) = disc.merit(w);
    hist.push(mx);
    for _ in 0..400 {
        if mx < RES_TOL {
            return Ok((steps, picard));
        }
        let lagged = fails >= 3;
        let l = disc.linearise(w, lagged);
        let rhs: Vec<f64> = l.r.iter().map(|r| -r).collect();
        let delta = thomas(&l.sub, &l.diag, &l.sup, &rhs).ok_or_else(|| Error::NonConvergence("singular Newton matrix".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        let mut trial = w.to_vec();
        for _ in 0..30 {
            for (k, i) in (i0..n - 1).enumerate() {
                trial[i] = w[i] + lambda * delta[k];
            }
            let (m2, mx2) = disc.merit(&trial);
            if m2 < merit {
                w.copy_from_slice(&trial);
                merit = m2;
                mx = mx2;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        steps += 1;
        hist.push(mx);
        if accepted {
            if lagged {
                picard = true;
                if mx < 1e-3 {
                    fails = 0;
                }
            }
            continue;
        }
        if !lagged && mx < STALL_TOL {
            return Ok((steps, picard));
        }
        fails += 1;
        if fails > 6 {
            break;
        }
    }
    if mx < 1e-8 {
        return Ok((steps, picard));
    }
    Err(Error::NonConvergence(format!(
        "Newton/Picard did not converge; scaled residual history (last 8): {:?}",
        &hist[hist.len().saturating_sub(8)..]
    )))
}

fn prepare<'a>(p: &'a RadialProblem, mesh: &'a Mesh) -> Result<Disc<'a>> {
    let lnb: Vec<f64> = mesh.x.iter().map(|&x| (p.ln_b)(x)).collect();
    if let Some(i) = lnb.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("b is not positive and finite at x = {}", mesh.x[i])));
    }
    Ok(Disc { x: &mesh.x, lnb, f: &p.f, a: p.a, dim: p.geometry.dim() as f64, centre: matches!(p.geometry, Geometry::Ball { .. }) })
}

fn set_boundary(w: &mut [f64], disc: &Disc, value: impl Fn(f64) -> f64) {
    let n = w.len();
    if !disc.centre {
        w[0] = value(disc.x[0]);
    }
    w[n - 1] = value(disc.x[n - 1]);
}

fn check_problem(p: &RadialProblem) -> Result<()> {
    p.geometry.validate()?;
    if !(p.f.rho > 0.0) || !keller_osserman_check(&p.f)?.holds {
        return Err(Error::Precondition("Keller–Osserman condition fails: no large solution".into()));
    }
    if let Geometry::Annulus { r0, r, .. } = p.geometry {
        if (p.ln_b)(r0 + 0.5 * (r - r0)).is_nan() {
            return Err(Error::InvalidInput("b undefined in the annulus".into()));
        }
    }
    Ok(())
}

/// Solves the truncated problem on `{d ≥ ε_b}`. `b > 0` inside, so every
/// real `a` is admissible.
pub fn solve_large_solution(p: &RadialProblem, spec: MeshSpec, closure: &Closure) -> Result<LargeSolution> {
    check_problem(p)?;
    let mesh = build_mesh(p.geometry, spec)?;
    solve_on(p, &mesh, closure, None)
}

fn solve_on(p: &RadialProblem, mesh: &Mesh, closure: &Closure, start: Option<&[f64]>) -> Result<LargeSolution> {
    let disc = prepare(p, mesh)?;
    let mut w: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => mesh.x.iter().map(|&x| (p.guess)(x)).collect(),
    };
    let mut hist = Vec::new();
    let out = |w: Vec<f64>, hist: Vec<f64>, closure: ClosureKind, steps: usize, picard: bool| LargeSolution {
        geometry: p.geometry,
        x: mesh.x.clone(),
        d: mesh.d.clone(),
        w,
        eps_b: mesh.eps_b,
        level: mesh.level,
        closure,
        residuals: hist,
        newton_steps: steps,
        picard_used: picard,
    };
    match closure {
        Closure::Asymptotic(bv) => {
            set_boundary(&mut w, &disc, |_| bv(mesh.eps_b));
            let (steps, picard) = newton(&disc, &mut w, &mut hist)?;
            Ok(out(w, hist, ClosureKind::Asymptotic, steps, picard))
        }
        Closure::Exact(bv) => {
            set_boundary(&mut w, &disc, |x| bv(x));
            let (steps, picard) = newton(&disc, &mut w, &mut hist)?;
            Ok(out(w, hist, ClosureKind::Exact, steps, picard))
        }
        Closure::DirichletM { ln_m0, tol, max_doublings } => {
            let interior: Vec<usize> = (0..mesh.x.len()).filter(|&i| mesh.d[i] >= 0.25 * p.geometry.half_width()).collect();
            let mut steps = 0;
            let mut picard = false;
            let mut prev: Option<Vec<f64>> = None;
            let mut last_change = f64::NAN;
            for j in 0..=*max_doublings {
                let ln_m = ln_m0 + j as f64 * std::f64::consts::LN_2;
                if j == 0 && start.is_none() {
                    // The guess clipped at M is close to the solution for small M.
                    w.iter_mut().for_each(|v| *v = v.min(ln_m));
                }
                set_boundary(&mut w, &disc, |_| ln_m);
                let (s, pc) = newton(&disc, &mut w, &mut hist)?;
                steps += s;
                picard |= pc;
                if let Some(pw) = &prev {
                    let change = interior.iter().fold(0.0f64, |m, &i| m.max((w[i] - pw[i]).abs()));
                    last_change = change;
                    if change < *tol {
                        return Ok(out(w, hist, ClosureKind::DirichletM { ln_m, doublings: j }, steps, picard));
                    }
                }
                prev = Some(w.clone());
            }
            Err(Error::NonConvergence(format!(
                "interior still moving after {max_doublings} doublings of M (last change {last_change:.3e})"
            )))
        }
    }
}

/// Solutions at `ε_b` and `ε_b/2` on nested meshes, and the largest change
/// of `ln u` at the coarse nodes with `d ≥ 4ε_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsbSensitivity {
    pub change: f64,
    /// The same over `d ≥ D/4`.
    pub interior_change: f64,
    pub coarse: LargeSolution,
    pub fine: LargeSolution,
}

pub fn epsb_sensitivity(p: &RadialProblem, spec: MeshSpec, closure: &Closure) -> Result<EpsbSensitivity> {
    let coarse = solve_large_solution(p, spec, closure)?;
    let fine_spec = MeshSpec { eps_b: 0.5 * coarse.eps_b, level: spec.level };
    // M₀ keeps its offset from the layer value as the layer moves outwards.
    let shifted = match closure {
        Closure::DirichletM { ln_m0, tol, max_doublings } => {
            let at_boundary = |m: &Mesh| {
                let i = (0..m.d.len()).min_by(|&a, &b| m.d[a].total_cmp(&m.d[b])).unwrap_or(0);
                (p.guess)(m.x[i])
            };
            let shift = at_boundary(&build_mesh(p.geometry, fine_spec)?) - at_boundary(&build_mesh(p.geometry, spec)?);
            Closure::DirichletM { ln_m0: ln_m0 + shift.max(0.0), tol: *tol, max_doublings: *max_doublings }
        }
        c => c.clone(),
    };
    let fine = solve_large_solution(p, fine_spec, &shifted)?;
    let idx = match_nodes(&coarse.x, &fine.x);
    let (mut change, mut interior_change) = (0.0f64, 0.0f64);
    let dq = 0.25 * p.geometry.half_width();
    for (i, j) in idx.iter().enumerate() {
        if let Some(j) = j {
            let c = (coarse.w[i] - fine.w[*j]).exp_m1().abs();
            if coarse.d[i] >= 4.0 * coarse.eps_b {
                change = change.max(c);
            }
            if coarse.d[i] >= dq {
                interior_change = interior_change.max(c);
            }
        }
    }
    Ok(EpsbSensitivity { change, interior_change, coarse, fine })
}

/// Combines solutions on nested meshes (levels `ℓ` and `ℓ+1`) into
/// `(4w_fine − w_coarse)/3` at the coarse nodes.
pub fn richardson(coarse: &LargeSolution, fine: &LargeSolution) -> Result<LargeSolution> {
    if fine.level != coarse.level + 1 || (fine.eps_b - coarse.eps_b).abs() > 1e-12 * coarse.eps_b {
        return Err(Error::InvalidInput("Richardson needs consecutive levels with the same ε_b".into()));
    }
    let idx = match_nodes(&coarse.x, &fine.x);
    let mut out = coarse.clone();
    for (i, j) in idx.iter().enumerate() {
        let j = j.ok_or_else(|| Error::InvalidInput("meshes are not nested".into()))?;
        out.w[i] = (4.0 * fine.w[j] - coarse.w[i]) / 3.0;
    }
    Ok(out)
}

/// For each coarse node, the index of the coincident fine node.
pub(crate) fn match_nodes(coarse: &[f64], fine: &[f64]) -> Vec<Option<usize>> {
    coarse
        .iter()
        .map(|&x| {
            let j = fine.partition_point(|&y| y < x);
            [j.wrapping_sub(1), j].into_iter().filter(|&k| k < fine.len()).find(|&k| (fine[k] - x).abs() <= 1e-10 * x.abs().max(1e-6))
        })
        .collect()
}
