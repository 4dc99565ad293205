use modloc::artifact::RepresentationArtifact;
use modloc::laguerre::{BasisKind, BasisSpec, basis_eval, basis_eval_closed_form, gauss_laguerre};
use modloc::mobius_geometry::{ExtReal, Interval, MoebiusMap};
use modloc::verification::{CheckReport, Meta, SuiteConfig, bound_violations, chain_slack};
use proptest::prelude::*;

fn sl2() -> impl Strategy<Value = MoebiusMap> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_filter("well conditioned", |(a, b, c, d)| (a * d - b * c).abs() > 0.2)
        .prop_map(|(a, b, c, d)| MoebiusMap::new(a, b, c, d).unwrap())
}

fn psl2() -> impl Strategy<Value = MoebiusMap> {
    sl2().prop_map(|g| if g.is_orientation_preserving() { g } else { g.compose(&MoebiusMap::reflection()) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn composition_is_associative(f in sl2(), g in sl2(), h in sl2()) {
        let l = f.compose(&g).compose(&h);
        let r = f.compose(&g.compose(&h));
        prop_assert!(l.approx_eq(&r, 1e-9 * (1.0 + l.a.abs() + l.b.abs() + l.c.abs() + l.d.abs())));
    }

    #[test]
    fn inverse_undoes_the_map(g in sl2()) {
        prop_assert!(g.compose(&g.inverse()).approx_eq(&MoebiusMap::identity(), 1e-10));
    }

    #[test]
    fn action_is_a_homomorphism(g in sl2(), h in sl2(), x in -5.0..5.0f64) {
        let direct = g.compose(&h).act(x);
        let stepwise = g.act_point(h.act(x));
        // near a pole both sides are huge; compare on the circle
        let gap = (direct.angle() - stepwise.angle()).abs();
        prop_assert!(gap.min(std::f64::consts::TAU - gap) < 1e-8, "{direct} vs {stepwise}");
    }

    #[test]
    fn iwasawa_round_trip(g in psl2()) {
        prop_assume!(g.d.abs() > 0.05);
        let f = g.iwasawa().unwrap();
        prop_assert!(f.y > 0.0);
        prop_assert!(f.recompose().approx_eq(&g, 1e-10 / g.d.abs()));
    }

    #[test]
    fn images_of_interior_points_stay_inside(g in psl2(), lo in -4.0..4.0f64, len in 0.1..4.0f64, s in 0.05..0.95f64) {
        let i = Interval::finite(lo, lo + len).unwrap();
        let x = ExtReal::Finite(lo + s * len);
        prop_assert!(i.contains(x));
        let gi = g.act_interval(&i);
        prop_assert!(gi.contains(g.act_point(x)));
        prop_assert!(!gi.complement().contains(g.act_point(x)) || gi.angular_length() > std::f64::consts::TAU - 1e-9);
    }

    #[test]
    fn standard_map_sends_half_line_to_interval(lo in -4.0..4.0f64, len in 0.1..4.0f64) {
        let i = Interval::finite(lo, lo + len).unwrap();
        let g = i.standard_map();
        prop_assert!(g.is_orientation_preserving());
        prop_assert!(g.act(0.0).approx_eq(i.lo, 1e-12));
        prop_assert!(g.act_point(ExtReal::Infinity).approx_eq(i.hi, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recurrence_matches_closed_form(
        n in 0usize..40,
        k in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0]),
        beta in 0.2..3.0f64,
        e in 0.01..6.0f64,
        tilde in any::<bool>(),
    ) {
        let spec = BasisSpec::new(k, beta, 64).unwrap();
        let which = if tilde { BasisKind::Ztilde } else { BasisKind::Z };
        let (r, c) = (basis_eval(&spec, n, e, which), basis_eval_closed_form(&spec, n, e, which));
        prop_assert!((r - c).abs() <= 1e-9 * (1.0 + c.abs()), "{r} vs {c}");
    }

    #[test]
    fn gauss_laguerre_is_exact_on_polynomials(order in 2usize..30, alpha in -0.5..4.0f64, j in 0usize..8) {
        prop_assume!(j < 2 * order);
        let rule = gauss_laguerre(order, alpha).unwrap();
        // ∫x^{α+j}e^{−x} / ∫x^α e^{−x} = (α+1)(α+2)…(α+j)
        let exact: f64 = (1..=j).map(|i| alpha + i as f64).product();
        let got = rule.integrate(|x| x.powi(j as i32)) / rule.integrate(|_| 1.0);
        prop_assert!((got - exact).abs() <= 1e-10 * exact.max(1.0), "{got} vs {exact}");
    }

    #[test]
    fn chain_slack_and_violations_agree(
        lo in -3.0..3.0f64,
        width in 0.1..3.0f64,
        fracs in prop::collection::vec(0.01..0.99f64, 1..20),
    ) {
        let hi = lo + width;
        let v: Vec<f64> = fracs.iter().map(|f| lo + f * width).collect();
        prop_assert!(chain_slack(&v, lo, hi) > 0.0);
        prop_assert_eq!(bound_violations(&v, lo, hi, 0.0), 0);
        prop_assert!(chain_slack(&v, hi, lo) < 0.0);
        prop_assert_eq!(bound_violations(&v, hi, lo, 0.0), v.len());
    }

    #[test]
    fn reports_round_trip_through_json(
        residual in prop_oneof![any::<f64>(), Just(f64::NAN), Just(f64::INFINITY), Just(f64::NEG_INFINITY)],
        measured in prop::collection::btree_map("[a-z_]{1,8}", any::<f64>(), 0..6),
        tol in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let meta = Meta { seed, timestamp: 0 };
        let mut r = CheckReport::new("probe", "group", "spectral", &meta).param("m", 8).judge(residual, tol);
        r.measured = measured;
        let back: CheckReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        prop_assert!(same(back.residual, r.residual));
        prop_assert_eq!(back.measured.len(), r.measured.len());
        for (k, v) in &r.measured {
            prop_assert!(same(back.measured[k], *v));
        }
        prop_assert_eq!(back.status, r.status);
        prop_assert_eq!(back.passed, residual <= tol);
    }

    #[test]
    fn suite_config_round_trips(k in 0.5..4.0f64, m in 8usize..600, seed in any::<u64>(), a in 0.1..5.0f64, w in 0.1..5.0f64) {
        let cfg = SuiteConfig { k, m, seed, intervals: vec![[a, a + w]], ..SuiteConfig::default() };
        prop_assert!(cfg.validate().is_ok());
        let back: SuiteConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn artifacts_are_bit_exact_on_round_trip(m in 8usize..24, beta in 0.5..2.0f64, k in prop::sample::select(vec![1.0, 1.5, 2.0])) {
        let art = RepresentationArtifact::build(&BasisSpec::new(k, beta, m).unwrap(), Some(0.01)).unwrap();
        let bytes = art.to_bytes();
        let back = RepresentationArtifact::read_from(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        let (p, q) = (art.plain().unwrap(), back.plain().unwrap());
        for (x, y) in [(&p.h, &q.h), (&p.d, &q.d), (&p.c, &q.c)] {
            for j in 0..m {
                for i in 0..m {
                    prop_assert_eq!(x[(i, j)].re.to_bits(), y[(i, j)].re.to_bits());
                    prop_assert_eq!(x[(i, j)].im.to_bits(), y[(i, j)].im.to_bits());
                }
            }
        }
    }
}
