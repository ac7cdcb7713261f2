//! Expansion constants and the choice of asymptotic regime.
//!
//! The leading term is always `ξ₀ h(d)`. A second term exists at rate
//! `d^ϖ` for flat weights with an algebraic rate, and at rate
//! `(−ln d)^{−τ}` for power-like weights with a logarithmic rate.

use crate::error::{Error, Result};
use crate::nonlinearity::{ClassTag, Nonlinearity};
use crate::profiles::{profile_grid, ProfileEngine};
use crate::regvar::{Direction, LimitEstimate};
use crate::weights::{ClassifyOptions, Subclass, WeightClassReport};
use std::fmt;

/// `b = k²(d)(1 + c̃ d^θ + o(d^θ))`, or just `b ~ k²` when first order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BExpansion {
    FirstOrder,
    TwoTerm { theta: f64, c_tilde: f64 },
}

impl BExpansion {
    pub fn two_term(theta: f64, c_tilde: f64) -> Result<Self> {
        if !(theta > 0.0) || !c_tilde.is_finite() {
            return Err(Error::InvalidInput(format!("need θ > 0 and finite c̃ (got θ={theta}, c̃={c_tilde})")));
        }
        Ok(BExpansion::TwoTerm { theta, c_tilde })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubCase {
    I,
    II,
    III,
}

impl fmt::Display for SubCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubCase::I => "i",
            SubCase::II => "ii",
            SubCase::III => "iii",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseTag {
    /// Only the leading term is predicted; the reason says why no second
    /// term is available.
    FirstOrder {
        reason: String,
    },
    Algebraic(SubCase),
    Logarithmic(SubCase),
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseTag::FirstOrder { .. } => f.write_str("first-order"),
            CaseTag::Algebraic(c) => write!(f, "algebraic-{c}"),
            CaseTag::Logarithmic(c) => write!(f, "logarithmic-{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Algebraic { varpi: f64 },
    Logarithmic { tau: f64 },
}

/// Everything the constants were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Inputs {
    pub rho: f64,
    pub ell1: f64,
    pub zeta: Option<f64>,
    pub lstar: Option<f64>,
    pub tau: Option<f64>,
    pub lsharp: Option<f64>,
    pub ell_star: Option<f64>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub c_tilde: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPrediction {
    pub order: u8,
    /// `ξ₀`, the coefficient of `h(d)`.
    pub leading: f64,
    /// `[2(2+ℓ₁ρ)/ρ²]^{1/ρ}`, the coefficient of `φ(d)`.
    pub leading_phi: f64,
    pub rate: Option<Rate>,
    pub second_coeff: Option<f64>,
    pub case_tag: CaseTag,
    pub inputs: Inputs,
    /// Formulas used, written out.
    pub formulas: Vec<String>,
    pub notes: Vec<String>,
}

impl ExpansionPrediction {
    /// Flat key/value record.
    pub fn record(&self) -> Vec<(String, String)> {
        let mut r = vec![
            ("case_tag".to_string(), self.case_tag.to_string()),
            ("order".to_string(), self.order.to_string()),
            ("xi0".to_string(), fmt_num(self.leading)),
            ("phi_coefficient".to_string(), fmt_num(self.leading_phi)),
        ];
        match self.rate {
            Some(Rate::Algebraic { varpi }) => {
                r.push(("rate".into(), "algebraic".into()));
                r.push(("varpi".into(), fmt_num(varpi)));
            }
            Some(Rate::Logarithmic { tau }) => {
                r.push(("rate".into(), "logarithmic".into()));
                r.push(("rate_tau".into(), fmt_num(tau)));
            }
            None => r.push(("rate".into(), "none".into())),
        }
        if let Some(c) = self.second_coeff {
            r.push(("second_coefficient".into(), fmt_num(c)));
        }
        let i = &self.inputs;
        r.push(("rho".into(), fmt_num(i.rho)));
        r.push(("ell1".into(), fmt_num(i.ell1)));
        for (k, v) in [
            ("zeta", i.zeta),
            ("L_star", i.lstar),
            ("tau", i.tau),
            ("L_sharp", i.lsharp),
            ("ell_star", i.ell_star),
            ("eta", i.eta),
            ("theta", i.theta),
            ("c_tilde", i.c_tilde),
        ] {
            r.push((k.into(), v.map_or_else(|| "-".to_string(), fmt_num)));
        }
        if let CaseTag::FirstOrder { reason } = &self.case_tag {
            r.push(("reason".into(), reason.clone()));
        }
        r
    }
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("need ρ > 0, got {rho}")));
    }
    Ok(())
}

/// `ξ₀ = ((2+ℓ₁ρ)/(2+ρ))^{1/ρ}`.
pub fn xi0(rho: f64, ell1: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(0.0..=1.0).contains(&ell1) {
        return Err(Error::InvalidInput(format!("need ℓ₁ ∈ [0, 1], got {ell1}")));
    }
    Ok(((2.0 + ell1 * rho) / (2.0 + rho)).powf(1.0 / rho))
}

/// `[2(2+ℓ₁ρ)/ρ²]^{1/ρ}`.
pub fn phi_coefficient(rho: f64, ell1: f64) -> f64 {
    (2.0 * (2.0 + ell1 * rho) / (rho * rho)).powf(1.0 / rho)
}

/// `lim φ/h = [2(ρ+2)/ρ²]^{−1/ρ}`.
pub fn phi_over_h(rho: f64) -> f64 {
    (2.0 * (rho + 2.0) / (rho * rho)).powf(-1.0 / rho)
}

fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `(ϖ, χ)` for flat weights. At `θ = ζ` both terms of `χ₁` are kept.
pub fn chi_theorem2(rho: f64, theta: f64, c_tilde: f64, zeta: f64, lstar: f64, f_class: ClassTag) -> Result<(f64, f64)> {
    check_rho(rho)?;
    if !(theta > 0.0) || !(zeta > 0.0) {
        return Err(Error::InvalidInput(format!("need θ, ζ > 0 (got {theta}, {zeta})")));
    }
    let varpi = theta.min(zeta);
    let chi1 = 0.5 * lstar * heaviside(theta - zeta) - c_tilde / rho * heaviside(zeta - theta);
    match f_class {
        ClassTag::PurePower => Ok((varpi, chi1)),
        ClassTag::RhoEta { eta } if eta != 0.0 => Ok((varpi, chi1)),
        ClassTag::RhoEta { .. } => Err(Error::Precondition("F_ρη with η = 0 is not covered".into())),
        ClassTag::Rho0Tau { tau, ell_star } => {
            let tau1 = varpi / zeta;
            if (tau - tau1).abs() > 1e-12 {
                return Err(Error::Precondition(format!("case mismatch: f has τ = {tau} but the algebraic case needs τ = ϖ/ζ = {tau1}")));
            }
            let x0 = xi0(rho, 0.0)?;
            let corr = ell_star / rho * (rho * zeta * lstar / (2.0 * (1.0 + zeta))).powf(tau1) * (1.0 / (rho + 2.0) + x0.ln());
            Ok((varpi, chi1 - corr))
        }
    }
}

/// `χ̃` from its formula, without the non-degeneracy gate.
pub fn chi_tilde_formula(rho: f64, ell1: f64, tau: f64, lsharp: f64, ell_star: f64) -> Result<f64> {
    let x0 = xi0(rho, ell1)?;
    let chi2 = lsharp / (2.0 + rho * ell1);
    if ell_star == 0.0 {
        return Ok(chi2);
    }
    let bracket = 2.0 * (1.0 - ell1) / ((rho + 2.0) * (rho * ell1 + 2.0)) + x0.ln();
    Ok(chi2 - ell_star / rho * (rho * ell1 / 2.0).powf(tau) * bracket)
}

/// `χ̃` for power-like weights with a logarithmic rate.
pub fn chi_theorem3(rho: f64, ell1: f64, tau: f64, lsharp: f64, f_class: ClassTag) -> Result<f64> {
    match f_class {
        ClassTag::RhoEta { eta } => {
            if eta * lsharp == 0.0 {
                return Err(Error::Precondition(format!("needs η·L♯ ≠ 0 (η = {eta}, L♯ = {lsharp})")));
            }
            chi_tilde_formula(rho, ell1, tau, lsharp, 0.0)
        }
        ClassTag::PurePower => logarithmic_ii(rho, ell1, tau, lsharp, 0.0),
        ClassTag::Rho0Tau { tau: tf, ell_star } => {
            if (tf - tau).abs() > 1e-12 {
                return Err(Error::Precondition(format!("case mismatch: f has τ = {tf}, weight has τ = {tau}")));
            }
            logarithmic_ii(rho, ell1, tau, lsharp, ell_star)
        }
    }
}

fn logarithmic_ii(rho: f64, ell1: f64, tau: f64, lsharp: f64, ell_star: f64) -> Result<f64> {
    if (ell_star * (ell1 - 1.0)).powi(2) + lsharp * lsharp == 0.0 {
        return Err(Error::Precondition(format!("needs [ℓ⋆(ℓ₁−1)]² + L♯² ≠ 0 (ℓ⋆ = {ell_star}, ℓ₁ = {ell1}, L♯ = {lsharp})")));
    }
    chi_tilde_formula(rho, ell1, tau, lsharp, ell_star)
}

fn class_inputs(f: &Nonlinearity, i: &mut Inputs) {
    match f.class {
        ClassTag::PurePower => {}
        ClassTag::RhoEta { eta } => i.eta = Some(eta),
        ClassTag::Rho0Tau { ell_star, .. } => i.ell_star = Some(ell_star),
    }
}

/// `ℓ₁` as used in the constants: 0 for flat weights.
pub fn effective_ell1(rep: &WeightClassReport) -> f64 {
    if rep.is_flat() {
        0.0
    } else {
        rep.ell1.value.clamp(0.0, 1.0)
    }
}

pub fn predict_first_order(f: &Nonlinearity, rep: &WeightClassReport) -> Result<ExpansionPrediction> {
    if rep.subclass == Subclass::Unclassified {
        return Err(Error::Classification("weight could not be classified".into()));
    }
    let rho = f.rho;
    let ell1 = effective_ell1(rep);
    let leading = xi0(rho, ell1)?;
    let leading_phi = phi_coefficient(rho, ell1);
    let consistency = leading_phi * phi_over_h(rho);
    if !((consistency - leading).abs() <= 1e-10 * leading) {
        return Err(Error::NonConvergence(format!("φ- and h-forms disagree: {consistency} vs {leading}")));
    }
    let mut inputs = Inputs { rho, ell1, ..Default::default() };
    class_inputs(f, &mut inputs);
    Ok(ExpansionPrediction {
        order: 1,
        leading,
        leading_phi,
        rate: None,
        second_coeff: None,
        case_tag: CaseTag::FirstOrder { reason: "first order requested".into() },
        inputs,
        formulas: vec!["u ~ xi0*h(d), xi0 = ((2+l1*rho)/(2+rho))^(1/rho)".into(), "u ~ [2(2+l1*rho)/rho^2]^(1/rho)*phi(d)".into()],
        notes: Vec::new(),
    })
}

/// Picks the regime for `(f, k, b)` and evaluates its constants.
pub fn predict(f: &Nonlinearity, rep: &WeightClassReport, bexp: BExpansion) -> Result<ExpansionPrediction> {
    let mut p = predict_first_order(f, rep)?;
    let rho = f.rho;
    let first = |p: &mut ExpansionPrediction, why: String| {
        p.case_tag = CaseTag::FirstOrder { reason: why };
    };
    let (theta, c_tilde) = match bexp {
        BExpansion::FirstOrder => {
            first(&mut p, "b is only known to leading order".into());
            return Ok(p);
        }
        BExpansion::TwoTerm { theta, c_tilde } => (theta, c_tilde),
    };
    p.inputs.theta = Some(theta);
    p.inputs.c_tilde = Some(c_tilde);
    match rep.subclass {
        Subclass::K0Zeta => {
            let zeta = rep.zeta.expect("K0Zeta carries ζ");
            let lstar = rep.lstar.as_ref().expect("K0Zeta carries L⋆").value;
            p.inputs.zeta = Some(zeta);
            p.inputs.lstar = Some(lstar);
            let sub = match f.class {
                ClassTag::PurePower => SubCase::I,
                ClassTag::RhoEta { eta } if eta != 0.0 => SubCase::II,
                ClassTag::RhoEta { .. } => {
                    first(&mut p, "f has η = 0 without a logarithmic rate".into());
                    return Ok(p);
                }
                ClassTag::Rho0Tau { .. } => SubCase::III,
            };
            match chi_theorem2(rho, theta, c_tilde, zeta, lstar, f.class) {
                Ok((varpi, chi)) => {
                    p.order = 2;
                    p.rate = Some(Rate::Algebraic { varpi });
                    p.second_coeff = Some(chi);
                    p.case_tag = CaseTag::Algebraic(sub);
                    p.formulas.push("u = xi0*h(d)*(1 + chi*d^varpi + o(d^varpi)), varpi = min(theta, zeta)".into());
                    p.formulas.push("chi1 = (L_star/2)*H(theta-zeta) - (c_tilde/rho)*H(zeta-theta)".into());
                    if sub == SubCase::III {
                        p.formulas
                            .push("chi = chi1 - (ell_star/rho)*[rho*zeta*L_star/(2(1+zeta))]^(varpi/zeta)*(1/(rho+2) + ln xi0)".into());
                    }
                    if theta == zeta {
                        p.notes.push("theta = zeta: H(0) = 1, both terms of chi1 kept".into());
                    }
                }
                Err(e) => first(&mut p, e.to_string()),
            }
        }
        Subclass::K01Tau => {
            let tau = rep.tau.expect("K01Tau carries τ");
            let lsharp = rep.lsharp.as_ref().expect("K01Tau carries L♯").value;
            p.inputs.tau = Some(tau);
            p.inputs.lsharp = Some(lsharp);
            let sub = match f.class {
                ClassTag::RhoEta { .. } => SubCase::I,
                _ => SubCase::II,
            };
            match chi_theorem3(rho, p.inputs.ell1, tau, lsharp, f.class) {
                Ok(chi) => {
                    p.order = 2;
                    p.rate = Some(Rate::Logarithmic { tau });
                    p.second_coeff = Some(chi);
                    p.case_tag = CaseTag::Logarithmic(sub);
                    p.formulas.push("u = xi0*h(d)*(1 + chi_tilde*(-ln d)^(-tau) + o(...))".into());
                    p.formulas.push("chi2 = L_sharp/(2+rho*l1)".into());
                    if sub == SubCase::II {
                        p.formulas.push("chi_tilde = chi2 - (ell_star/rho)*(rho*l1/2)^tau*[2(1-l1)/((rho+2)(rho*l1+2)) + ln xi0]".into());
                    }
                }
                Err(e) => first(&mut p, e.to_string()),
            }
        }
        Subclass::K0 => first(&mut p, "flat weight without an algebraic rate ζ".into()),
        Subclass::K01 => first(&mut p, "power-like weight without a logarithmic rate τ".into()),
        Subclass::Unclassified => unreachable!("rejected in predict_first_order"),
    }
    Ok(p)
}

/// Result of the script-H limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptH {
    pub estimate: LimitEstimate,
    /// `ρχ̃` from the formula.
    pub target: f64,
    pub pass: bool,
}

/// `ℋ(t) = (−ln t)^τ (1 − k² f(ξ₀h)/(ξ₀h″))`, which tends to `ρχ̃`.
///
/// The target is computed from the `χ̃` formula without the
/// non-degeneracy gate, so degenerate inputs give target 0. Agreement is
/// 2% relative with an absolute floor of 1e-4.
pub fn script_h_check(eng: &ProfileEngine, rep: &WeightClassReport, tau: f64, opts: &ClassifyOptions) -> Result<ScriptH> {
    if rep.subclass != Subclass::K01Tau && rep.subclass != Subclass::K01 {
        return Err(Error::Precondition("script-H needs a power-like weight".into()));
    }
    let rho = eng.f.rho;
    let ell1 = effective_ell1(rep);
    let x0 = xi0(rho, ell1)?;
    let lsharp = rep.lsharp.as_ref().map_or(0.0, |l| l.value);
    let ell_star = match eng.f.class {
        ClassTag::Rho0Tau { ell_star, .. } => ell_star,
        _ => 0.0,
    };
    let target = rho * chi_tilde_formula(rho, ell1, tau, lsharp, ell_star)?;
    let lx = x0.ln();
    let grid = profile_grid(rep, opts);
    let estimate = grid.limit(Direction::ToZero, opts.tol, |s| {
        let p = eng.h_point(s.exp())?;
        let ln_x = eng.f.ln_f(p.s_h + lx) - eng.f.ln_f(p.s_h) - lx - p.q.ln();
        Ok(-ln_x.exp_m1() * (-s).powf(tau))
    })?;
    let tol = (2e-2 * target.abs()).max(1e-4);
    let pass = (estimate.value - target).abs() <= tol;
    Ok(ScriptH { estimate, target, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarFn;
    use crate::weights::{classify_weight, weight_from_e, Hints, WeightFunction};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn xi0_values() {
        assert_eq!(xi0(2.0, 1.0).unwrap(), 1.0);
        assert!(close(xi0(2.0, 0.5).unwrap(), 3f64.sqrt() / 2.0, 1e-15));
        assert!(close(xi0(2.0, 0.0).unwrap(), 0.5f64.sqrt(), 1e-15));
        assert!(xi0(0.0, 0.5).is_err());
        assert!(xi0(2.0, 1.5).is_err());
    }

    #[test]
    fn phi_and_h_forms_agree() {
        for rho in [0.3, 1.0, 2.0, 3.5, 7.0] {
            for ell1 in [0.0, 0.25, 0.5, 1.0] {
                let lhs = phi_coefficient(rho, ell1) * phi_over_h(rho);
                assert!(close(lhs, xi0(rho, ell1).unwrap(), 1e-10), "{rho} {ell1}");
            }
        }
    }

    #[test]
    fn chi_algebraic_examples() {
        let (w, c) = chi_theorem2(2.0, 2.0, 5.0, 1.0, 2.0, ClassTag::PurePower).unwrap();
        assert_eq!((w, c), (1.0, 1.0));
        let (w, c) = chi_theorem2(2.0, 0.5, 1.0, 1.0, 2.0, ClassTag::PurePower).unwrap();
        assert_eq!((w, c), (0.5, -0.5));
        let (_, c) = chi_theorem2(2.0, 2.0, 5.0, 1.0, 2.0, ClassTag::Rho0Tau { tau: 1.0, ell_star: 1.0 }).unwrap();
        // 1 − ½(¼ − ½ ln 2)
        assert!(close(c, 1.0 - 0.5 * (0.25 - 0.5 * 2f64.ln()), 1e-15));
        assert!(close(c, 1.0482868, 1e-7));
    }

    #[test]
    fn chi_algebraic_tie_keeps_both_terms() {
        let (_, c) = chi_theorem2(2.0, 1.0, 4.0, 1.0, 2.0, ClassTag::PurePower).unwrap();
        assert_eq!(c, 1.0 - 2.0);
    }

    #[test]
    fn chi_algebraic_case_mismatch() {
        let r = chi_theorem2(2.0, 2.0, 5.0, 1.0, 2.0, ClassTag::Rho0Tau { tau: 2.0, ell_star: 1.0 });
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn chi_tilde_examples() {
        let c = chi_theorem3(2.0, 0.5, 1.0, 3.0, ClassTag::RhoEta { eta: -1.0 }).unwrap();
        assert!(close(c, 1.0, 1e-15));
        let c = chi_theorem3(2.0, 0.5, 1.0, 0.0, ClassTag::Rho0Tau { tau: 1.0, ell_star: 1.0 }).unwrap();
        let want = -0.25 * (1.0 / 12.0 + (3f64.sqrt() / 2.0).ln());
        assert!(close(c, want, 1e-15));
        assert!(close(c, 0.0151269, 1e-7));
        let c = chi_theorem3(3.0, 1.0, 2.0, 1.0, ClassTag::Rho0Tau { tau: 2.0, ell_star: 0.0 }).unwrap();
        assert!(close(c, 0.2, 1e-15));
    }

    #[test]
    fn chi_tilde_degeneracy() {
        assert!(chi_theorem3(2.0, 1.0, 1.0, 0.0, ClassTag::Rho0Tau { tau: 1.0, ell_star: 2.0 }).is_err());
        assert!(chi_theorem3(2.0, 0.5, 1.0, 0.0, ClassTag::RhoEta { eta: -1.0 }).is_err());
        assert!(chi_theorem3(2.0, 0.5, 1.0, 0.0, ClassTag::PurePower).is_err());
    }

    #[test]
    fn dispatch_is_total() {
        let o = ClassifyOptions::default();
        let weights = [
            WeightFunction::power(1.0, 2.0).unwrap(),
            WeightFunction::exp_flat(1.0).unwrap(),
            weight_from_e(1.0, 1.0, ScalarFn::parse("1/(-ln(u))", "u").unwrap(), 0.5).unwrap(),
        ];
        let fs = [
            Nonlinearity::pure_power(1.0, 2.0).unwrap(),
            Nonlinearity::power_decay(1.0, 2.0, 2.0, 0.5, -1.0).unwrap(),
            Nonlinearity::log_corrected(1.0, 2.0, 3.0, 1.0, 1.0).unwrap(),
        ];
        let mut tags = Vec::new();
        for k in &weights {
            let rep = classify_weight(k, Hints::default(), &o).unwrap();
            for f in &fs {
                for b in [BExpansion::FirstOrder, BExpansion::two_term(2.0, 5.0).unwrap()] {
                    let p = predict(f, &rep, b).unwrap();
                    assert!(p.leading > 0.0);
                    assert_eq!(p.order == 2, p.second_coeff.is_some());
                    tags.push(p.case_tag.to_string());
                }
            }
        }
        for t in ["algebraic-i", "algebraic-ii", "algebraic-iii", "logarithmic-i", "logarithmic-ii", "first-order"] {
            assert!(tags.iter().any(|x| x == t), "{t} missing from {tags:?}");
        }
    }

    #[test]
    fn second_coefficient_is_reproducible_from_inputs() {
        let o = ClassifyOptions::default();
        let k = WeightFunction::exp_flat(1.0).unwrap();
        let rep = classify_weight(&k, Hints::default(), &o).unwrap();
        let f = Nonlinearity::log_corrected(1.0, 2.0, 3.0, 1.0, 1.0).unwrap();
        let p = predict(&f, &rep, BExpansion::two_term(2.0, 5.0).unwrap()).unwrap();
        let i = p.inputs;
        let (_, chi) = chi_theorem2(i.rho, i.theta.unwrap(), i.c_tilde.unwrap(), i.zeta.unwrap(), i.lstar.unwrap(), f.class).unwrap();
        assert_eq!(chi.to_bits(), p.second_coeff.unwrap().to_bits());
    }

    #[test]
    fn script_h_logarithmic_ii() {
        let o = ClassifyOptions::default();
        let k = WeightFunction::power(1.0, 2.0).unwrap();
        let rep = classify_weight(&k, Hints { tau: Some(1.0), zeta: None }, &o).unwrap();
        let f = Nonlinearity::log_corrected(1.0, 2.0, 3.0, 1.0, 1.0).unwrap();
        let e = ProfileEngine::new(f, k).unwrap();
        let r = script_h_check(&e, &rep, 1.0, &o).unwrap();
        assert!(close(r.target, 0.0302538, 1e-7));
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn script_h_logarithmic_i() {
        let o = ClassifyOptions::default();
        let k = weight_from_e(1.0, 1.0, ScalarFn::parse("1/(-ln(u))", "u").unwrap(), 0.5).unwrap();
        let rep = classify_weight(&k, Hints::default(), &o).unwrap();
        let f = Nonlinearity::power_decay(1.0, 2.0, 2.0, 0.5, -1.0).unwrap();
        let e = ProfileEngine::new(f, k).unwrap();
        let r = script_h_check(&e, &rep, 1.0, &o).unwrap();
        assert!(close(r.target, 2.0 * 0.25 / 3.0, 1e-3));
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn script_h_trivial_cases() {
        let o = ClassifyOptions::default();
        for k in [WeightFunction::power(1.0, 2.0).unwrap(), WeightFunction::constant(1.0).unwrap()] {
            let rep = classify_weight(&k, Hints { tau: Some(1.0), zeta: None }, &o).unwrap();
            let e = ProfileEngine::new(Nonlinearity::pure_power(1.0, 2.0).unwrap(), k).unwrap();
            let r = script_h_check(&e, &rep, 1.0, &o).unwrap();
            assert!(r.target.abs() < 1e-8, "{r:?}");
            assert!(r.estimate.value.abs() < 1e-8 && r.pass, "{r:?}");
        }
    }
}
