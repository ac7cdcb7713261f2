//! The five verbs.

use crate::config::{scalar, ClassSpec, ClosureSpec, NonlinSpec, RunConfig, Shape, WeightSpec};
use crate::output::{num, svg_chart, write_csv, write_text};
use crate::{CliError, CliResult};
use blowup_core::bvp::{
    build_mesh, closure_agreement, manufactured_problem, mesh_convergence_order, richardson, solve_large_solution, verify_first_order,
    verify_prediction, Closure, ClosureKind, Geometry, LargeSolution, Manufactured, MeshSpec, RadialProblem, Verdict, Verification,
};
use blowup_core::expansion::{predict, BExpansion, ExpansionPrediction, Rate};
use blowup_core::nonlinearity::{ClassTag, Nonlinearity};
use blowup_core::profiles::{lemma_aux_report, ProfileEngine};
use blowup_core::regvar::LimitEstimate;
use blowup_core::weights::{classify_weight, weight_from_e, weight_from_w, ClassifyOptions, Hints, WeightClassReport, WeightFunction};
use clap::ValueEnum;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

pub const TOL_ENV: &str = "BLOWUP_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Classify,
    Profile,
    Predict,
    Solve,
    Verify,
}

/// Tolerance from the config, else from `BLOWUP_TOL`, else the library default.
pub fn tolerance(cfg: &RunConfig, env: Option<&str>) -> CliResult<f64> {
    if let Some(t) = cfg.tol {
        return Ok(t);
    }
    match env {
        None => Ok(ClassifyOptions::default().tol),
        Some(s) => match s.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(crate::config::ConfigIssue { lines: vec![], msg: format!("{TOL_ENV} = `{s}` is not a positive number") }.into()),
        },
    }
}

fn need<'a, T>(x: &'a Option<T>, section: &str, verb: Verb) -> CliResult<&'a T> {
    x.as_ref().ok_or_else(|| {
        crate::config::ConfigIssue { lines: vec![], msg: format!("`{}` needs a [{section}] section", format!("{verb:?}").to_lowercase()) }
            .into()
    })
}

pub fn build_weight(w: &WeightSpec) -> CliResult<WeightFunction> {
    Ok(match w {
        WeightSpec::Power { c0, gamma } => WeightFunction::power(*c0, *gamma)?,
        WeightSpec::Constant { c } => WeightFunction::constant(*c)?,
        WeightSpec::ExpFlat { zeta } => WeightFunction::exp_flat(*zeta)?,
        WeightSpec::Expr { src, nu } => {
            let k = WeightFunction::parse(src, *nu).expect("expression checked when the config was read");
            k.validate()?;
            k
        }
        WeightSpec::EForm { c0, alpha, e, c1 } => weight_from_e(*c0, *alpha, scalar(e), *c1)?,
        WeightSpec::WForm { d0, d1, w } => weight_from_w(*d0, *d1, scalar(w))?,
    })
}

pub fn build_nonlinearity(f: &NonlinSpec) -> CliResult<Nonlinearity> {
    Ok(match f {
        NonlinSpec::PurePower { c, rho } => Nonlinearity::pure_power(*c, *rho)?,
        NonlinSpec::LogCorrected { c, rho, b, ell_star, tau } => Nonlinearity::log_corrected(*c, *rho, *b, *ell_star, *tau)?,
        NonlinSpec::PowerDecay { c, rho, b, a, eta } => Nonlinearity::power_decay(*c, *rho, *b, *a, *eta)?,
        NonlinSpec::Expr { c, rho, b, eps, class } => {
            let class = match *class {
                ClassSpec::PurePower => ClassTag::PurePower,
                ClassSpec::RhoEta { eta } => ClassTag::RhoEta { eta },
                ClassSpec::Rho0Tau { tau, ell_star } => ClassTag::Rho0Tau { tau, ell_star },
            };
            Nonlinearity::parse(*c, *rho, *b, eps, class).expect("expression checked when the config was read")?
        }
    })
}

pub fn geometry(cfg: &RunConfig) -> Geometry {
    match cfg.shape {
        Shape::Interval { l } => Geometry::Interval { l },
        Shape::Ball { n, r } => Geometry::Ball { n, r },
        Shape::Annulus { n, r0, r } => Geometry::Annulus { n, r0, r },
    }
}

fn bexp(cfg: &RunConfig) -> CliResult<BExpansion> {
    Ok(match cfg.b {
        Some((theta, c)) => BExpansion::two_term(theta, c)?,
        None => BExpansion::FirstOrder,
    })
}

fn options(tol: f64) -> ClassifyOptions {
    ClassifyOptions { tol, ..ClassifyOptions::default() }
}

struct Pipeline {
    report: WeightClassReport,
    eng: ProfileEngine,
    pred: ExpansionPrediction,
}

fn pipeline(cfg: &RunConfig, verb: Verb, tol: f64) -> CliResult<Pipeline> {
    let k = build_weight(need(&cfg.weight, "weight", verb)?)?;
    let f = build_nonlinearity(need(&cfg.nonlinearity, "nonlinearity", verb)?)?;
    let opts = options(tol);
    let report = classify_weight(&k, Hints { zeta: cfg.hint_zeta, tau: cfg.hint_tau }, &opts)?;
    let pred = predict(&f, &report, bexp(cfg)?)?;
    let eng = ProfileEngine::new(f, k)?;
    Ok(Pipeline { report, eng, pred })
}

/// Runs one verb and writes its artifacts into `out`; returns the report
/// printed on standard output.
pub fn run(verb: Verb, cfg: &RunConfig, out: &Path, tol: f64) -> CliResult<String> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    match verb {
        Verb::Classify => classify(cfg, out, tol),
        Verb::Profile => profile(cfg, out, tol),
        Verb::Predict => predict_verb(cfg, out, tol),
        Verb::Solve => solve(cfg, out, tol),
        Verb::Verify => verify(cfg, out, tol),
    }
}

fn est_row(name: &str, e: Option<&LimitEstimate>) -> Vec<String> {
    match e {
        Some(e) => vec![name.into(), num(e.value), num(e.stderr), e.converged.to_string()],
        None => vec![name.into(), String::new(), String::new(), String::new()],
    }
}

fn classify(cfg: &RunConfig, out: &Path, tol: f64) -> CliResult<String> {
    let k = build_weight(need(&cfg.weight, "weight", Verb::Classify)?)?;
    let r = classify_weight(&k, Hints { zeta: cfg.hint_zeta, tau: cfg.hint_tau }, &options(tol))?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, num);
    let rows = vec![
        est_row("ell0", Some(&r.ell0)),
        est_row("ell1", Some(&r.ell1)),
        vec!["alpha".into(), opt(r.alpha), String::new(), String::new()],
        vec!["subclass".into(), format!("{:?}", r.subclass), String::new(), String::new()],
        vec!["zeta".into(), opt(r.zeta), String::new(), String::new()],
        est_row("L_star", r.lstar.as_ref()),
        vec!["tau".into(), opt(r.tau), String::new(), String::new()],
        est_row("L_sharp", r.lsharp.as_ref()),
        est_row("index_of_k(1/u)", r.index_check.as_ref()),
    ];
    write_csv(&out.join("classification.csv"), &["quantity", "value", "stderr", "converged"], &rows)?;
    let mut s = format!("weight {}\n", k.label);
    for row in &rows {
        if !row[1].is_empty() {
            let _ = writeln!(s, "  {:<18} {}", row[0], row[1]);
        }
    }
    write_text(&out.join("classification.txt"), &s)?;
    Ok(s)
}

fn profile(cfg: &RunConfig, out: &Path, tol: f64) -> CliResult<String> {
    let k = build_weight(need(&cfg.weight, "weight", Verb::Profile)?)?;
    let f = build_nonlinearity(need(&cfg.nonlinearity, "nonlinearity", Verb::Profile)?)?;
    let opts = options(tol);
    let report = classify_weight(&k, Hints { zeta: cfg.hint_zeta, tau: cfg.hint_tau }, &opts)?;
    let eng = ProfileEngine::new(f, k)?;
    let p = &cfg.profile;
    let mut rows = Vec::with_capacity(p.points);
    let ratio = (p.t_min / p.t_max).powf(1.0 / (p.points - 1) as f64);
    for j in 0..p.points {
        let t = if j + 1 == p.points { p.t_min } else { p.t_max * ratio.powi(j as i32) };
        let hp = eng.h_point(t)?;
        let ln_phi = eng.ln_phi(t)?;
        rows.push(vec![
            num(t),
            num(hp.s_h),
            num(hp.h()),
            num(hp.h1()),
            num(hp.h2()),
            num(ln_phi),
            num(ln_phi.exp()),
            num((ln_phi - hp.s_h).exp()),
        ]);
    }
    write_csv(&out.join("profile.csv"), &["t", "ln_h", "h", "h_prime", "h_second", "ln_phi", "phi", "phi_over_h"], &rows)?;
    let mut s = format!("profiles for f = {}, k = {}\n", eng.f.label, eng.k.label);
    for r in lemma_aux_report(&eng, &report, &opts)? {
        let _ = writeln!(
            s,
            "  {} ({}) {} -> {} (target {})",
            if r.pass { "PASS" } else { "FAIL" },
            r.item,
            r.quantity,
            num(r.estimate.value),
            num(r.target)
        );
    }
    write_text(&out.join("profile.txt"), &s)?;
    Ok(s)
}

fn prediction_text(p: &ExpansionPrediction) -> String {
    let mut s = format!("case {}\n", p.case_tag);
    for (k, v) in p.record() {
        let _ = writeln!(s, "  {k:<20} {v}");
    }
    for f in &p.formulas {
        let _ = writeln!(s, "  [{}] {f}", p.case_tag);
    }
    for n in &p.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    s
}

fn predict_verb(cfg: &RunConfig, out: &Path, tol: f64) -> CliResult<String> {
    let k = build_weight(need(&cfg.weight, "weight", Verb::Predict)?)?;
    let f = build_nonlinearity(need(&cfg.nonlinearity, "nonlinearity", Verb::Predict)?)?;
    let report = classify_weight(&k, Hints { zeta: cfg.hint_zeta, tau: cfg.hint_tau }, &options(tol))?;
    let p = predict(&f, &report, bexp(cfg)?)?;
    let rows: Vec<Vec<String>> = p.record().into_iter().map(|(k, v)| vec![k, v]).collect();
    write_csv(&out.join("prediction.csv"), &["key", "value"], &rows)?;
    let s = prediction_text(&p);
    write_text(&out.join("prediction.txt"), &s)?;
    Ok(s)
}

fn asymptotic(eng: &ProfileEngine, xi0: f64) -> Closure {
    let e = eng.clone();
    Closure::Asymptotic(Arc::new(move |d| xi0.ln() + e.h_point(d).map_or(f64::NAN, |p| p.s_h)))
}

fn dirichlet(cfg: &RunConfig, p: &RadialProblem, eng: &ProfileEngine, xi0: f64, spec: MeshSpec) -> CliResult<Closure> {
    let ln_m0 = match cfg.solver.ln_m0 {
        Some(v) => v,
        None => xi0.ln() + eng.h_point(build_mesh(p.geometry, spec)?.eps_b)?.s_h - 3.0,
    };
    Ok(Closure::DirichletM { ln_m0, tol: cfg.solver.m_tol, max_doublings: cfg.solver.max_doublings })
}

/// `(ratio, R)` at node `i`; `R` is the scaled second-order remainder when
/// the prediction has a rate, else `ratio − 1`.
fn ratio_and_r(sol: &LargeSolution, i: usize, eng: &ProfileEngine, pred: &ExpansionPrediction) -> (f64, f64) {
    let d = sol.d[i];
    let Ok(hp) = eng.h_point(d) else { return (f64::NAN, f64::NAN) };
    let ratio = (sol.w[i] - pred.leading.ln() - hp.s_h).exp();
    let r = match pred.rate {
        Some(Rate::Algebraic { varpi }) => (ratio - 1.0) * d.powf(-varpi),
        Some(Rate::Logarithmic { tau }) => (ratio - 1.0) * (-d.ln()).powf(tau),
        None => ratio - 1.0,
    };
    (ratio, r)
}

fn solution_rows(sol: &LargeSolution, eng: &ProfileEngine, pred: &ExpansionPrediction) -> Vec<Vec<String>> {
    (0..sol.x.len())
        .map(|i| {
            let xh = eng.h_point(sol.d[i]).map_or(f64::NAN, |p| pred.leading.ln() + p.s_h);
            let (ratio, r) = ratio_and_r(sol, i, eng, pred);
            vec![num(sol.x[i]), num(sol.d[i]), num(sol.w[i]), num(sol.w[i].exp()), num(xh.exp()), num(ratio), num(r)]
        })
        .collect()
}

const SOLUTION_HEADER: [&str; 7] = ["x", "d", "ln_u", "u", "xi0_h", "ratio", "R"];

fn diagnostics(sol: &LargeSolution) -> String {
    let closure = match sol.closure {
        ClosureKind::Asymptotic => "asymptotic".to_string(),
        ClosureKind::Exact => "exact".to_string(),
        ClosureKind::DirichletM { ln_m, doublings } => format!("dirichlet_m (ln M = {}, {doublings} doublings)", num(ln_m)),
    };
    format!(
        "closure        {closure}\neps_b          {}\nlevel          {}\nnodes          {}\nnewton_steps   {}\npicard_used    {}\nfinal_residual {}\n",
        num(sol.eps_b),
        sol.level,
        sol.x.len(),
        sol.newton_steps,
        sol.picard_used,
        num(sol.residuals.last().copied().unwrap_or(f64::NAN))
    )
}

fn solve(cfg: &RunConfig, out: &Path, tol: f64) -> CliResult<String> {
    let pl = pipeline(cfg, Verb::Solve, tol)?;
    let p = RadialProblem::from_weight(geometry(cfg), cfg.a, &pl.eng, pl.pred.leading, bexp(cfg)?)?;
    let spec = MeshSpec { eps_b: cfg.solver.eps_b, level: cfg.solver.level };
    let closure = match cfg.solver.closure {
        ClosureSpec::Asymptotic => asymptotic(&pl.eng, pl.pred.leading),
        ClosureSpec::DirichletM => dirichlet(cfg, &p, &pl.eng, pl.pred.leading, spec)?,
    };
    let sol = solve_large_solution(&p, spec, &closure)?;
    write_csv(&out.join("solution.csv"), &SOLUTION_HEADER, &solution_rows(&sol, &pl.eng, &pl.pred))?;
    let s = format!("problem {}\ncase {} (xi0 = {})\n{}", p.label, pl.pred.case_tag, num(pl.pred.leading), diagnostics(&sol));
    write_text(&out.join("diagnostics.txt"), &s)?;
    Ok(s)
}

fn verdict_word(v: &Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive(_) => "INCONCLUSIVE",
    }
}

fn verification_line(name: &str, v: &Verification) -> String {
    let est = v.estimate.as_ref().map_or_else(|| "none".into(), |e| num(e.value));
    let why = match &v.verdict {
        Verdict::Inconclusive(w) => format!(" ({w})"),
        _ => String::new(),
    };
    format!("{} {name}: estimate {est}, target {}{why}", verdict_word(&v.verdict), num(v.target))
}

fn verify(cfg: &RunConfig, out: &Path, tol: f64) -> CliResult<String> {
    if let Some(src) = &cfg.manufactured {
        return verify_manufactured(cfg, src, out);
    }
    let pl = pipeline(cfg, Verb::Verify, tol)?;
    let p = RadialProblem::from_weight(geometry(cfg), cfg.a, &pl.eng, pl.pred.leading, bexp(cfg)?)?;
    let spec = MeshSpec { eps_b: cfg.solver.eps_b, level: cfg.solver.level };
    let asym = asymptotic(&pl.eng, pl.pred.leading);
    let sol = solve_large_solution(&p, spec, &asym)?;
    let mut lines = vec![format!("problem {}", p.label), format!("case {} (xi0 = {})", pl.pred.case_tag, num(pl.pred.leading))];
    let mut ok = true;

    let first = verify_first_order(&sol, pl.pred.leading, &pl.eng)?;
    ok &= first.passed();
    lines.push(verification_line(&format!("[{}] first order, lim u/(xi0 h)", pl.pred.case_tag), &first));

    if pl.pred.second_coeff.is_some() {
        // flat weights need the extrapolated pair of meshes
        let (sol2, j_min) = if pl.report.is_flat() {
            let fine = solve_large_solution(&p, MeshSpec { eps_b: spec.eps_b, level: spec.level + 1 }, &asym)?;
            (richardson(&sol, &fine)?, cfg.solver.j_min.unwrap_or(1))
        } else {
            (sol.clone(), cfg.solver.j_min.unwrap_or(4))
        };
        let second = verify_prediction(&sol2, &pl.pred, &pl.eng, j_min)?;
        ok &= second.passed();
        lines.push(verification_line(&format!("[{}] second-order coefficient", pl.pred.case_tag), &second));
    }

    let dm = dirichlet(cfg, &p, &pl.eng, pl.pred.leading, spec)?;
    let ag = closure_agreement(&p, spec, &asym, &dm)?;
    ok &= ag.pass;
    lines.push(format!(
        "{} closure agreement: interior max |u_M/u_asym - 1| = {}, tolerance {}",
        if ag.pass { "PASS" } else { "FAIL" },
        num(ag.max_diff),
        num(ag.tolerance)
    ));

    let mut series = Vec::new();
    let mut rows = Vec::new();
    for i in sol.boundary_layer() {
        let (ratio, r) = ratio_and_r(&sol, i, &pl.eng, &pl.pred);
        series.push((sol.d[i], ratio));
        rows.push(vec![num(sol.d[i]), num(ratio), num(r)]);
    }
    write_csv(&out.join("ratio.csv"), &["d", "ratio", "R"], &rows)?;
    write_csv(&out.join("solution.csv"), &SOLUTION_HEADER, &solution_rows(&sol, &pl.eng, &pl.pred))?;
    write_text(
        &out.join("ratio.svg"),
        &svg_chart(&format!("u/(xi0 h(d)), case {}", pl.pred.case_tag), "d", "ratio", &[("u/(xi0 h)", &series)]),
    )?;
    finish(lines, ok, out)
}

fn verify_manufactured(cfg: &RunConfig, src: &str, out: &Path) -> CliResult<String> {
    let f = build_nonlinearity(need(&cfg.nonlinearity, "nonlinearity", Verb::Verify)?)?;
    let m = Manufactured::parse(src).expect("expression checked when the config was read");
    let p = manufactured_problem(&m, geometry(cfg), cfg.a, f)?;
    let n = cfg.levels as u32;
    let (errs, order) = mesh_convergence_order(&p, &m, cfg.solver.eps_b, 0, n)?;
    let pass = order >= 1.8;
    let mut lines = vec![format!("manufactured u* = {src} on {:?}, a = {}", geometry(cfg), cfg.a)];
    lines.push(format!("{} mesh convergence order {} (needs >= 1.8)", if pass { "PASS" } else { "FAIL" }, num(order)));
    let rows: Vec<Vec<String>> = errs.iter().enumerate().map(|(l, e)| vec![l.to_string(), num(*e)]).collect();
    write_csv(&out.join("convergence.csv"), &["level", "max_error_ln_u"], &rows)?;

    let exact = {
        let u = m.u.clone();
        Closure::Exact(Arc::new(move |x| u(x).ln()))
    };
    let sol = solve_large_solution(&p, MeshSpec { eps_b: cfg.solver.eps_b, level: n - 1 }, &exact)?;
    let mut series = Vec::new();
    let mut rows = Vec::new();
    for i in 0..sol.x.len() {
        let ratio = (sol.w[i] - (m.u)(sol.x[i]).ln()).exp();
        series.push((sol.d[i], ratio));
        rows.push(vec![num(sol.x[i]), num(sol.d[i]), num(ratio)]);
    }
    write_csv(&out.join("ratio.csv"), &["x", "d", "ratio"], &rows)?;
    write_text(&out.join("ratio.svg"), &svg_chart("u/u*", "d", "ratio", &[("u/u*", &series)]))?;
    finish(lines, pass, out)
}

fn finish(lines: Vec<String>, ok: bool, out: &Path) -> CliResult<String> {
    let mut s = lines.join("\n");
    s.push('\n');
    write_text(&out.join("verification.txt"), &s)?;
    if ok {
        Ok(s)
    } else {
        Err(CliError::Verification(s))
    }
}
