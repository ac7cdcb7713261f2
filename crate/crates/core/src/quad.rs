//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The error estimate follows the QUADPACK convention, which is far less
//! pessimistic than the raw |K15 - G7| difference on smooth integrands.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Tol {
    pub const fn rel(rel: f64) -> Self {
        Tol { abs: 0.0, rel }
    }
}

impl Default for Tol {
    fn default() -> Self {
        Tol { abs: 0.0, rel: 1e-13 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    /// Error estimate is the roundoff floor; splitting cannot reduce it.
    floor: bool,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64, bool)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand at {c}")));
    }
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    let mut rabs = rk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand near {} or {}", c - x, c + x)));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        rk += WGK[j] * (f1 + f2);
        rabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * rk;
    let mut rasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        rasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = rk * h;
    let rasc = rasc * h.abs();
    let rabs = rabs * h.abs();
    let mut err = ((rk - rg) * h).abs();
    if rasc != 0.0 && err != 0.0 {
        err = rasc * (200.0 * err / rasc).powf(1.5).min(1.0);
    }
    let mut floor = false;
    if rabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let r = 50.0 * f64::EPSILON * rabs;
        if r >= err {
            err = r;
            floor = true;
        }
    }
    Ok((value, err, floor))
}

/// Adaptive integration of `f` over `[a, b]`, refining the piece with the
/// largest error estimate until the global estimate meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> Result<Quad> {
    integrate_limit(&f, a, b, tol, 2000)
}

pub fn integrate_limit<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tol, max_pieces: usize) -> Result<Quad> {
    let (q, ok) = adapt(f, a, b, tol, max_pieces)?;
    if !ok {
        let target = tol.abs.max(tol.rel * q.value.abs());
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] after {max_pieces} pieces: estimate {:e}, error {:e}, target {target:e}",
            q.value, q.error
        )));
    }
    Ok(q)
}

/// Like [`integrate_limit`] but returns the best estimate when the piece
/// budget runs out; the caller judges the reported error.
pub fn integrate_capped<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tol, max_pieces: usize) -> Result<Quad> {
    adapt(f, a, b, tol, max_pieces).map(|r| r.0)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tol, max_pieces: usize) -> Result<(Quad, bool)> {
    if a == b {
        return Ok((Quad { value: 0.0, error: 0.0 }, true));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Quadrature(format!("infinite endpoint [{a}, {b}]")));
    }
    let (v, e, fl) = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e, floor: fl });
    let mut total = v;
    let mut err = e;
    let mut floor_err = if fl { e } else { 0.0 };
    let mut pieces = 1;
    let mut ok = true;
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if err <= target || err - floor_err <= target {
            break;
        }
        if pieces >= max_pieces {
            ok = false;
            break;
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a.min(p.b) || m >= p.a.max(p.b) {
            // Interval at machine resolution; accept what we have.
            heap.push(p);
            break;
        }
        let (v1, e1, f1) = gk15(f, p.a, m)?;
        let (v2, e2, f2) = gk15(f, m, p.b)?;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        if p.floor {
            floor_err -= p.error;
        }
        if f1 {
            floor_err += e1;
        }
        if f2 {
            floor_err += e2;
        }
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1, floor: f1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2, floor: f2 });
        pieces += 1;
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok((Quad { value, error }, ok))
}

/// Integrates over `[a, b]` split into panels no wider than `width`, so that
/// a narrow feature cannot hide between the nodes of a single wide rule.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, width: f64, tol: Tol) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    let n = (((b - a).abs() / width).ceil() as usize).max(1);
    let step = (b - a) / n as f64;
    let mut out = Quad { value: 0.0, error: 0.0 };
    for i in 0..n {
        let lo = a + step * i as f64;
        let hi = if i + 1 == n { b } else { a + step * (i + 1) as f64 };
        let q = integrate_limit(&f, lo, hi, tol, 2000)?;
        out.value += q.value;
        out.error += q.error;
    }
    Ok(out)
}
