use blowup_core::bvp::{build_mesh, xi_pm, BarrierSide, Geometry, MeshSpec};
use blowup_core::expansion::{phi_coefficient, phi_over_h, xi0};
use blowup_core::expr::{parse, Compiled};
use blowup_core::regvar::{invert_increasing, left_inverse, limit_extrapolate, rv_index_estimate, Direction, Grid, RegVarFunction};
use blowup_core::weights::{classify_weight, ClassifyOptions, Hints, WeightFunction};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn phi_and_h_coefficients_agree(rho in 0.05f64..20.0, l1 in 0.0f64..=1.0) {
        let x = xi0(rho, l1).unwrap();
        prop_assert!((phi_coefficient(rho, l1) * phi_over_h(rho) - x).abs() <= 1e-12 * x);
        // ξ₀ ≤ 1 with equality only for ℓ₁ = 1
        prop_assert!(x <= 1.0 + 1e-15);
    }

    #[test]
    fn barrier_coefficients_bracket_xi0(rho in 0.1f64..10.0, l1 in 0.0f64..=1.0, eps in 0.001f64..0.499) {
        let (lo, x, hi) = (xi_pm(rho, l1, eps, BarrierSide::Minus), xi0(rho, l1).unwrap(), xi_pm(rho, l1, eps, BarrierSide::Plus));
        prop_assert!(lo < x && x < hi);
        // ξ^± ρ-th powers are ξ₀^ρ/(1 ∓ 2ε)
        prop_assert!((hi.powf(rho) * (1.0 - 2.0 * eps) / x.powf(rho) - 1.0).abs() < 1e-12);
        prop_assert!((lo.powf(rho) * (1.0 + 2.0 * eps) / x.powf(rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_recovers_power_law_limits(a in -5.0f64..5.0, b in -3.0f64..3.0, p in 0.5f64..2.0) {
        let samples: Vec<(f64, f64)> = (0..10).map(|j| {
            let d = 0.1 * 0.5f64.powi(j);
            (d, a + b * d.powf(p))
        }).collect();
        let e = limit_extrapolate(&samples, Direction::ToZero, 1e-8).unwrap();
        prop_assert!((e.value - a).abs() < 1e-6 * (1.0 + b.abs()), "{} vs {}", e.value, a);
    }

    #[test]
    fn inverse_round_trip(q in 0.2f64..4.0, c in -2.0f64..2.0, y in 5.0f64..200.0) {
        // H(s) = q s + c ln s is increasing for s ≥ 1 when c ≥ −q
        let c = c.max(-q);
        let h = |s: f64| q * s + c * s.ln();
        let s = invert_increasing(h, y, y / q, 1.0, 1e-13).unwrap();
        prop_assert!((h(s) - y).abs() < 1e-9 * y.max(1.0));
        let s2 = left_inverse(h, y, (1.0, 2.0), 1e-13).unwrap();
        prop_assert!((s - s2).abs() < 1e-9 * s);
    }

    #[test]
    fn meshes_are_nested(level in 0u32..4, eps_exp in 2i32..8, shape in 0usize..3) {
        let g = [Geometry::Interval { l: 1.0 }, Geometry::Ball { n: 3, r: 1.0 }, Geometry::Annulus { n: 4, r0: 0.5, r: 2.0 }][shape];
        let eps_b = 10f64.powi(-eps_exp) * g.half_width();
        let coarse = build_mesh(g, MeshSpec { eps_b, level }).unwrap();
        let fine = build_mesh(g, MeshSpec { eps_b, level: level + 1 }).unwrap();
        prop_assert_eq!(coarse.eps_b, fine.eps_b);
        prop_assert!(coarse.x.windows(2).all(|w| w[0] < w[1]));
        for x in &coarse.x {
            prop_assert!(fine.x.iter().any(|y| (x - y).abs() <= 1e-12 * x.abs().max(1e-6)), "{x} missing from the finer mesh");
        }
    }

    #[test]
    fn symbolic_derivative_matches_differences(a in 0.5f64..3.0, b in -2.0f64..2.0, x in 0.2f64..0.8) {
        let e = parse(&format!("{a}*x^3 + {b}*exp(x)/x - ln(1+x)"), "x").unwrap();
        let d = e.derivative();
        let h = 1e-5;
        let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
        prop_assert!((d.eval(x) - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        let c = Compiled::new("x^2 - 1", "x").unwrap();
        prop_assert!((c.eval(x) - (x * x - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn index_of_power_times_slow_factor(q in -3.0f64..3.0, m in -2.0f64..2.0) {
        let z = RegVarFunction::from_log(move |s: f64| q * s + m * s.ln(), 1.0, Some(q));
        let e = rv_index_estimate(&z, &[2.0, 4.0], &Grid::logarithmic(8.0, 2.0, 8), 1e-6).unwrap();
        prop_assert!((e.value - q).abs() < 1e-3, "{} vs {q}", e.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn power_weights_classify(alpha in 0.0f64..4.0, c0 in 0.2f64..5.0) {
        let k = WeightFunction::power(c0, 2.0 * alpha).unwrap();
        let r = classify_weight(&k, Hints::default(), &ClassifyOptions::default()).unwrap();
        prop_assert!((r.ell1.value - 1.0 / (1.0 + alpha)).abs() < 1e-4);
        prop_assert!(r.ell0.value.abs() < 1e-6);
    }
}
