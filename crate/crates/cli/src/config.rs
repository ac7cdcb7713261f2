//! Key-value run configuration.
//!
//! ```text
//! # comment
//! [weight]
//! family = power
//! c0 = 1
//! gamma = 2
//!
//! [nonlinearity]
//! family = expr
//! rho = 2
//! eps = "1/ln(u)"
//! ```
//!
//! Expressions are quoted. Parsing reports every problem it finds, each
//! with its line number, instead of stopping at the first one.

use blowup_core::expr::{parse as parse_expr, ScalarFn};
use std::collections::BTreeMap;
use std::fmt;

/// One problem in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub lines: Vec<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ls: Vec<String> = self.lines.iter().map(|l| l.to_string()).collect();
        match ls.len() {
            0 => write!(f, "{}", self.msg),
            1 => write!(f, "line {}: {}", ls[0], self.msg),
            _ => write!(f, "lines {}: {}", ls.join(", "), self.msg),
        }
    }
}

/// Every problem found, in line order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Bare(String),
}

impl Value {
    fn text(&self) -> &str {
        match self {
            Value::Str(s) | Value::Bare(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: Value,
    pub line: usize,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["tol"]),
    ("weight", &["family", "c0", "gamma", "c", "zeta", "expr", "nu", "alpha", "e", "c1", "w", "d0", "d1", "hint_zeta", "hint_tau"]),
    ("nonlinearity", &["family", "c", "rho", "b", "ell_star", "tau", "a", "eta", "eps", "class"]),
    ("b", &["theta", "c_tilde"]),
    ("domain", &["shape", "l", "n", "r", "r0", "a"]),
    ("solver", &["eps_b", "level", "closure", "ln_m0", "m_tol", "max_doublings", "j_min"]),
    ("profile", &["t_min", "t_max", "points"]),
    ("verify", &["manufactured", "levels"]),
];

/// `(section, key) → entry`, after syntax, schema and duplicate checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<(String, String), Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let mut errs = Vec::new();
        let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
        let mut section: Option<String> = None;
        // keys under a rejected header are not reported again
        let mut bad_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    errs.push(issue(line, format!("malformed section header `{body}`")));
                    section = None;
                    bad_header = true;
                    continue;
                };
                let name = name.trim();
                bad_header = !SCHEMA.iter().any(|(s, _)| *s == name);
                if bad_header {
                    errs.push(issue(line, format!("unknown section [{name}]")));
                    section = None;
                } else {
                    section = Some(name.to_string());
                }
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                errs.push(issue(line, format!("expected `key = value`, found `{body}`")));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(sec) = &section else {
                if !bad_header {
                    errs.push(issue(line, format!("key `{k}` outside any section")));
                }
                continue;
            };
            let keys = SCHEMA.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !keys.contains(&k) {
                errs.push(issue(line, format!("unknown key `{k}` in [{sec}]")));
                continue;
            }
            let value = match parse_value(v) {
                Ok(v) => v,
                Err(m) => {
                    errs.push(issue(line, format!("{sec}.{k}: {m}")));
                    continue;
                }
            };
            let key = (sec.clone(), k.to_string());
            if let Some(prev) = entries.get(&key) {
                errs.push(ConfigIssue { lines: vec![prev.line, line], msg: format!("duplicate key {sec}.{k}") });
                continue;
            }
            entries.insert(key, Entry { value, line });
        }
        if errs.is_empty() {
            Ok(RawConfig { entries })
        } else {
            Err(ConfigErrors(errs))
        }
    }

    /// Replaces `section.key` with `value` as if it were written in the file.
    pub fn set(&mut self, dotted: &str, value: &str) -> Result<(), ConfigIssue> {
        let (sec, key) = dotted
            .split_once('.')
            .ok_or_else(|| ConfigIssue { lines: vec![], msg: format!("sweep parameter `{dotted}` must be section.key") })?;
        let known = SCHEMA.iter().find(|(s, _)| *s == sec).is_some_and(|(_, ks)| ks.contains(&key));
        if !known {
            return Err(ConfigIssue { lines: vec![], msg: format!("unknown sweep parameter `{dotted}`") });
        }
        let value = parse_value(value).map_err(|m| ConfigIssue { lines: vec![], msg: format!("{dotted}: {m}") })?;
        let line = self.entries.get(&(sec.to_string(), key.to_string())).map_or(0, |e| e.line);
        self.entries.insert((sec.to_string(), key.to_string()), Entry { value, line });
        Ok(())
    }

    fn has_section(&self, sec: &str) -> bool {
        self.entries.keys().any(|(s, _)| s == sec)
    }
}

fn issue(line: usize, msg: String) -> ConfigIssue {
    ConfigIssue { lines: vec![line], msg }
}

fn strip_comment(s: &str) -> &str {
    let mut quoted = false;
    for (i, c) in s.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &s[..i],
            _ => {}
        }
    }
    s
}

fn parse_value(v: &str) -> Result<Value, String> {
    if let Some(rest) = v.strip_prefix('"') {
        return match rest.strip_suffix('"') {
            Some(inner) if !inner.contains('"') => Ok(Value::Str(inner.to_string())),
            _ => Err(format!("unterminated string {v}")),
        };
    }
    if v.is_empty() {
        return Err("missing value".into());
    }
    if v.contains(char::is_whitespace) {
        return Err(format!("unquoted value `{v}` contains spaces"));
    }
    Ok(Value::Bare(v.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Power { c0: f64, gamma: f64 },
    Constant { c: f64 },
    ExpFlat { zeta: f64 },
    Expr { src: String, nu: f64 },
    EForm { c0: f64, alpha: f64, e: String, c1: f64 },
    WForm { d0: f64, d1: f64, w: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinSpec {
    PurePower { c: f64, rho: f64 },
    LogCorrected { c: f64, rho: f64, b: f64, ell_star: f64, tau: f64 },
    PowerDecay { c: f64, rho: f64, b: f64, a: f64, eta: f64 },
    Expr { c: f64, rho: f64, b: f64, eps: String, class: ClassSpec },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassSpec {
    PurePower,
    RhoEta { eta: f64 },
    Rho0Tau { tau: f64, ell_star: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Interval { l: f64 },
    Ball { n: usize, r: f64 },
    Annulus { n: usize, r0: f64, r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosureSpec {
    Asymptotic,
    DirichletM,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub eps_b: f64,
    pub level: u32,
    pub closure: ClosureSpec,
    /// Default: three below the predicted `ln u` at `ε_b`.
    pub ln_m0: Option<f64>,
    pub m_tol: f64,
    pub max_doublings: usize,
    pub j_min: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tol: Option<f64>,
    pub weight: Option<WeightSpec>,
    pub hint_zeta: Option<f64>,
    pub hint_tau: Option<f64>,
    pub nonlinearity: Option<NonlinSpec>,
    /// `(θ, c̃)`; absent means first order.
    pub b: Option<(f64, f64)>,
    pub shape: Shape,
    pub a: f64,
    pub solver: SolverSpec,
    pub profile: ProfileSpec,
    pub manufactured: Option<String>,
    pub levels: usize,
}

/// Typed access that records every failure instead of returning early.
struct Reader<'a> {
    raw: &'a RawConfig,
    errs: Vec<ConfigIssue>,
}

#[derive(Clone, Copy)]
enum Range {
    Any,
    Positive,
    NonNegative,
}

impl Reader<'_> {
    fn entry(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.raw.entries.get(&(sec.to_string(), key.to_string()))
    }

    fn line(&self, sec: &str) -> usize {
        self.raw.entries.iter().filter(|((s, _), _)| s == sec).map(|(_, e)| e.line).min().unwrap_or(0)
    }

    fn num_opt(&mut self, sec: &str, key: &str, range: Range) -> Option<f64> {
        let e = self.entry(sec, key)?.clone();
        let Ok(x) = e.value.text().parse::<f64>() else {
            self.errs.push(issue(e.line, format!("{sec}.{key}: `{}` is not a number", e.value.text())));
            return None;
        };
        let ok = x.is_finite()
            && match range {
                Range::Any => true,
                Range::Positive => x > 0.0,
                Range::NonNegative => x >= 0.0,
            };
        if !ok {
            let want = match range {
                Range::Any => "finite",
                Range::Positive => "positive",
                Range::NonNegative => "non-negative",
            };
            self.errs.push(issue(e.line, format!("{sec}.{key} = {x} is out of range (must be {want})")));
            return None;
        }
        Some(x)
    }

    fn num(&mut self, sec: &str, key: &str, range: Range, default: Option<f64>) -> f64 {
        if self.entry(sec, key).is_none() {
            return match default {
                Some(d) => d,
                None => {
                    let line = self.line(sec);
                    self.errs.push(issue(line, format!("[{sec}] needs `{key}`")));
                    f64::NAN
                }
            };
        }
        self.num_opt(sec, key, range).unwrap_or(f64::NAN)
    }

    fn int(&mut self, sec: &str, key: &str, lo: usize, hi: usize, default: usize) -> usize {
        let Some(e) = self.entry(sec, key).cloned() else { return default };
        match e.value.text().parse::<usize>() {
            Ok(n) if (lo..=hi).contains(&n) => n,
            Ok(n) => {
                self.errs.push(issue(e.line, format!("{sec}.{key} = {n} is out of range ({lo}..={hi})")));
                default
            }
            Err(_) => {
                self.errs.push(issue(e.line, format!("{sec}.{key}: `{}` is not a non-negative integer", e.value.text())));
                default
            }
        }
    }

    fn word(&mut self, sec: &str, key: &str, allowed: &[&str], default: Option<&str>) -> Option<String> {
        let Some(e) = self.entry(sec, key).cloned() else {
            if default.is_none() && self.raw.has_section(sec) {
                let line = self.line(sec);
                self.errs.push(issue(line, format!("[{sec}] needs `{key}` (one of {})", allowed.join(", "))));
            }
            return default.map(str::to_string);
        };
        let w = e.value.text();
        if allowed.contains(&w) {
            Some(w.to_string())
        } else {
            self.errs.push(issue(e.line, format!("{sec}.{key}: `{w}` is not one of {}", allowed.join(", "))));
            None
        }
    }

    /// A quoted expression in `var`, checked by parsing it.
    fn expr(&mut self, sec: &str, key: &str, var: &str) -> Option<String> {
        let Some(e) = self.entry(sec, key).cloned() else {
            let line = self.line(sec);
            self.errs.push(issue(line, format!("[{sec}] needs the expression `{key}`")));
            return None;
        };
        let Value::Str(src) = &e.value else {
            self.errs.push(issue(e.line, format!("{sec}.{key}: expressions must be quoted")));
            return None;
        };
        match parse_expr(src, var) {
            Ok(_) => Some(src.clone()),
            Err(pe) => {
                self.errs.push(issue(e.line, format!("{sec}.{key}: malformed expression \"{src}\" {pe}")));
                None
            }
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigErrors> {
        use Range::*;
        let mut r = Reader { raw, errs: Vec::new() };
        let tol = r.num_opt("run", "tol", Positive);

        let weight = if raw.has_section("weight") {
            let fam = r.word("weight", "family", &["power", "constant", "exp_flat", "expr", "e_form", "w_form"], None);
            match fam.as_deref() {
                Some("power") => Some(WeightSpec::Power {
                    c0: r.num("weight", "c0", Positive, Some(1.0)),
                    gamma: r.num("weight", "gamma", NonNegative, None),
                }),
                Some("constant") => Some(WeightSpec::Constant { c: r.num("weight", "c", Positive, Some(1.0)) }),
                Some("exp_flat") => Some(WeightSpec::ExpFlat { zeta: r.num("weight", "zeta", Positive, Some(1.0)) }),
                Some("expr") => {
                    let nu = r.num("weight", "nu", Positive, Some(1.0));
                    r.expr("weight", "expr", "t").map(|src| WeightSpec::Expr { src, nu })
                }
                Some("e_form") => {
                    let c0 = r.num("weight", "c0", Positive, Some(1.0));
                    let alpha = r.num("weight", "alpha", NonNegative, None);
                    let c1 = r.num("weight", "c1", Positive, Some(0.5));
                    r.expr("weight", "e", "t").map(|e| WeightSpec::EForm { c0, alpha, e, c1 })
                }
                Some("w_form") => {
                    let d0 = r.num("weight", "d0", Positive, Some(1.0));
                    let d1 = r.num("weight", "d1", Positive, Some(1.0));
                    r.expr("weight", "w", "t").map(|w| WeightSpec::WForm { d0, d1, w })
                }
                _ => None,
            }
        } else {
            None
        };
        let hint_zeta = r.num_opt("weight", "hint_zeta", Positive);
        let hint_tau = r.num_opt("weight", "hint_tau", Positive);

        let nonlinearity = if raw.has_section("nonlinearity") {
            let fam = r.word("nonlinearity", "family", &["pure_power", "log_corrected", "power_decay", "expr"], None);
            let c = r.num("nonlinearity", "c", Positive, Some(1.0));
            let rho = r.num("nonlinearity", "rho", Positive, None);
            match fam.as_deref() {
                Some("pure_power") => Some(NonlinSpec::PurePower { c, rho }),
                Some("log_corrected") => Some(NonlinSpec::LogCorrected {
                    c,
                    rho,
                    b: r.num("nonlinearity", "b", Positive, None),
                    ell_star: r.num("nonlinearity", "ell_star", Any, None),
                    tau: r.num("nonlinearity", "tau", Positive, None),
                }),
                Some("power_decay") => Some(NonlinSpec::PowerDecay {
                    c,
                    rho,
                    b: r.num("nonlinearity", "b", Positive, None),
                    a: r.num("nonlinearity", "a", Any, None),
                    eta: r.num("nonlinearity", "eta", Any, None),
                }),
                Some("expr") => {
                    let b = r.num("nonlinearity", "b", Positive, Some(1.0));
                    let class = match r.word("nonlinearity", "class", &["pure_power", "rho_eta", "rho0_tau"], Some("rho_eta")).as_deref() {
                        Some("pure_power") => Some(ClassSpec::PurePower),
                        Some("rho_eta") => Some(ClassSpec::RhoEta { eta: r.num("nonlinearity", "eta", Any, None) }),
                        Some("rho0_tau") => Some(ClassSpec::Rho0Tau {
                            tau: r.num("nonlinearity", "tau", Positive, None),
                            ell_star: r.num("nonlinearity", "ell_star", Any, None),
                        }),
                        _ => None,
                    };
                    match (r.expr("nonlinearity", "eps", "u"), class) {
                        (Some(eps), Some(class)) => Some(NonlinSpec::Expr { c, rho, b, eps, class }),
                        _ => None,
                    }
                }
                _ => None,
            }
        } else {
            None
        };

        let b = if raw.has_section("b") { Some((r.num("b", "theta", Positive, None), r.num("b", "c_tilde", Any, None))) } else { None };

        let shape = match r.word("domain", "shape", &["interval", "ball", "annulus"], Some("interval")).as_deref() {
            Some("ball") => Shape::Ball { n: r.int("domain", "n", 3, 64, 3), r: r.num("domain", "r", Positive, Some(1.0)) },
            Some("annulus") => {
                let (r0, rr) = (r.num("domain", "r0", Positive, None), r.num("domain", "r", Positive, Some(1.0)));
                if r0 >= rr {
                    let line = r.entry("domain", "r0").map_or(0, |e| e.line);
                    r.errs.push(issue(line, format!("domain.r0 = {r0} must be below domain.r = {rr}")));
                }
                Shape::Annulus { n: r.int("domain", "n", 3, 64, 3), r0, r: rr }
            }
            _ => Shape::Interval { l: r.num("domain", "l", Positive, Some(1.0)) },
        };
        let a = r.num("domain", "a", Any, Some(0.0));

        let eps_b = r.num("solver", "eps_b", Positive, Some(1e-6));
        if eps_b >= 0.1 {
            let line = r.entry("solver", "eps_b").map_or(0, |e| e.line);
            r.errs.push(issue(line, format!("solver.eps_b = {eps_b} is out of range (must be below 0.1)")));
        }
        let level = r.int("solver", "level", 0, 6, 1) as u32;
        let closure = match r.word("solver", "closure", &["asymptotic", "dirichlet_m"], Some("asymptotic")).as_deref() {
            Some("dirichlet_m") => ClosureSpec::DirichletM,
            _ => ClosureSpec::Asymptotic,
        };
        let solver = SolverSpec {
            eps_b,
            level,
            closure,
            ln_m0: r.num_opt("solver", "ln_m0", Any),
            m_tol: r.num("solver", "m_tol", Positive, Some(1e-7)),
            max_doublings: r.int("solver", "max_doublings", 1, 10_000, 80),
            j_min: r.entry("solver", "j_min").is_some().then(|| r.int("solver", "j_min", 1, 30, 1)),
        };

        let t_min = r.num("profile", "t_min", Positive, Some(1e-6));
        let t_max = r.num("profile", "t_max", Positive, Some(1e-1));
        if t_min >= t_max {
            let line = r.entry("profile", "t_min").map_or(0, |e| e.line);
            r.errs.push(issue(line, format!("profile.t_min = {t_min} must be below profile.t_max = {t_max}")));
        }
        let profile = ProfileSpec { t_min, t_max, points: r.int("profile", "points", 2, 100_000, 26) };

        let manufactured = if r.entry("verify", "manufactured").is_some() { r.expr("verify", "manufactured", "x") } else { None };
        let levels = r.int("verify", "levels", 2, 6, 3);

        let mut errs = r.errs;
        if errs.is_empty() {
            Ok(RunConfig { tol, weight, hint_zeta, hint_tau, nonlinearity, b, shape, a, solver, profile, manufactured, levels })
        } else {
            errs.sort_by_key(|e| e.lines.first().copied().unwrap_or(0));
            Err(ConfigErrors(errs))
        }
    }
}

/// `ScalarFn` for a checked expression.
pub fn scalar(src: &str) -> ScalarFn {
    ScalarFn::parse(src, "t").expect("expression checked when the config was read")
}
