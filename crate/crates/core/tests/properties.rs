use iterlab_core::iterates::{
    apply_iterate, iterate_norm_table, l2_norm_by_tensor_quadrature, l2_norm_on_box, seminorm_from_table, BoxRegion,
    TestFunction,
};
use iterlab_core::poly::{MultiIndex, MultiPoly, OperatorSystem};
use iterlab_core::symbol::{estimate_gamma, estimate_h, PlanConfig, SamplingPlan};
use iterlab_core::weight::{young_conjugate, ConjugateTable, WeightFunction, YoungConjugate};
use num_complex::Complex64;
use proptest::prelude::*;

fn system(n: usize, polys: &[&str]) -> OperatorSystem {
    OperatorSystem::with_natural_order(polys.iter().map(|p| MultiPoly::parse_with_vars(p, n).unwrap()).collect())
        .unwrap()
}

fn small_plan(n: usize, seed: u64) -> SamplingPlan {
    let cfg = PlanConfig {
        radii: 24,
        directions: 48,
        seed,
        ..PlanConfig::default()
    };
    SamplingPlan::new(n, cfg).unwrap()
}

/// Terms `(coefficient, exponents)` of a polynomial in two variables.
fn poly2() -> impl Strategy<Value = MultiPoly> {
    prop::collection::vec((-3i64..=3, 0u32..=2, 0u32..=2), 1..4).prop_filter_map("constant polynomial", |terms| {
        let owned: Vec<(Vec<u32>, i64)> = terms.iter().filter(|t| t.0 != 0).map(|&(c, a, b)| (vec![a, b], c)).collect();
        let refs: Vec<(&[u32], i64)> = owned.iter().map(|(e, c)| (e.as_slice(), *c)).collect();
        let p = MultiPoly::from_int_terms(2, &refs).ok()?;
        (p.degree().unwrap_or(0) > 0).then_some(p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plane_waves_are_eigenfunctions(
        p in poly2(),
        q in poly2(),
        b0 in 0u32..4,
        b1 in 0u32..4,
        xi in prop::array::uniform2(-2.5f64..2.5),
        lo in prop::array::uniform2(-1.0f64..1.0),
        w in prop::array::uniform2(0.2f64..2.0),
    ) {
        let sys = OperatorSystem::with_natural_order(vec![p.clone(), q.clone()]).unwrap();
        let k = BoxRegion::new(lo.to_vec(), vec![lo[0] + w[0], lo[1] + w[1]]).unwrap();
        let v = apply_iterate(&sys, &MultiIndex::new(vec![b0, b1]), &TestFunction::plane_wave(xi.to_vec())).unwrap();
        let got = l2_norm_on_box(&v, &k).unwrap();
        let (pv, qv) = (p.eval(&xi).unwrap(), q.eval(&xi).unwrap());
        let want = b0 as f64 * pv.abs().ln() + b1 as f64 * qv.abs().ln() + 0.5 * k.volume().ln();
        if want.is_finite() {
            prop_assert!((got - want).exp_m1().abs() < 1e-10, "{got} vs {want}");
        } else {
            prop_assert_eq!(got, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn iterates_compose(b in 0u32..4, c in 0u32..4, s in 0.3f64..1.5) {
        let p = system(2, &["1 2 0; -1 0 2; 2 1 0"]);
        let u = TestFunction::gaussian(2, s).unwrap();
        let k = BoxRegion::cube(2, -1.0, 0.5).unwrap();
        let once = apply_iterate(&p, &MultiIndex::new(vec![b + c]), &u).unwrap();
        let twice = apply_iterate(&p, &MultiIndex::new(vec![c]), &apply_iterate(&p, &MultiIndex::new(vec![b]), &u).unwrap()).unwrap();
        let (x, y) = (l2_norm_on_box(&once, &k).unwrap(), l2_norm_on_box(&twice, &k).unwrap());
        prop_assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
    }

    #[test]
    fn norm_scales_with_coefficient(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let u = TestFunction::plane_wave(vec![0.7, -0.2])
            .sum(TestFunction::gaussian(2, 0.8).unwrap())
            .unwrap();
        let k = BoxRegion::cube(2, -0.5, 1.5).unwrap();
        let base = l2_norm_on_box(&u, &k).unwrap();
        let scaled = l2_norm_on_box(&u.scaled(Complex64::new(re, im)), &k).unwrap();
        prop_assert!((scaled - base - re.hypot(im).ln()).abs() < 1e-12);
    }

    #[test]
    fn fenchel_young_holds(s in 1.1f64..4.0, y in 0.0f64..40.0, u in 0.0f64..8.0) {
        let w = WeightFunction::gevrey(s).unwrap();
        let conj = young_conjugate(&w, y);
        prop_assert!(conj >= y * u - w.phi(u) - 1e-9 * (1.0 + conj.abs()));
    }

    #[test]
    fn conjugate_of_rescaled_weight(s in 1.1f64..4.0, a in 0.25f64..4.0, y in 0.01f64..30.0) {
        let w = WeightFunction::gevrey(s).unwrap();
        let lhs = young_conjugate(&w.rescale(a).unwrap(), y);
        let rhs = young_conjugate(&w, y / a);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-12));
    }

    #[test]
    fn scaled_conjugate_decreases_in_lambda(s in 1.1f64..4.0, y in 0.1f64..30.0, l in 0.1f64..4.0) {
        let w = WeightFunction::gevrey(s).unwrap();
        let c = YoungConjugate::new(&w);
        prop_assert!(c.scaled(l, y) >= c.scaled(2.0 * l, y) - 1e-9 * c.scaled(l, y).abs());
    }
}

#[test]
fn gaussian_iterates_match_tensor_quadrature() {
    let p = system(2, &["1 2 0; 1 0 2", "1 1 1"]);
    let u = TestFunction::poly_gaussian(&MultiPoly::parse_with_vars("1 0 0; 2 1 0", 2).unwrap(), 0.7).unwrap();
    let k = BoxRegion::new(vec![-1.0, 0.0], vec![0.5, 1.5]).unwrap();
    let table = iterate_norm_table(&p, &u, &k, 6).unwrap();
    for e in &table.entries {
        let v = apply_iterate(&p, &MultiIndex::new(e.beta.clone()), &u).unwrap();
        let oracle = l2_norm_by_tensor_quadrature(&v, &k, 8, 20);
        assert!((e.log_norm - oracle).abs() < 1e-9, "{:?}: {} vs {oracle}", e.beta, e.log_norm);
    }
}

#[test]
fn conjugate_table_invariants_for_gevrey_weights() {
    for s in [1.5, 2.0, 3.0] {
        let w = WeightFunction::gevrey(s).unwrap();
        let table = ConjugateTable::new(&w, &ConjugateTable::log_grid(1e-3, 60.0, 150));
        let c = table.check(1e-9);
        assert!(c.zero_at_origin && c.nonnegative && c.increasing && c.convex && c.ratio_nondecreasing, "s = {s}: {c:?}");
    }
}

#[test]
fn elliptic_diagonal_systems_have_gamma_equal_to_order() {
    for m in 1..=3u32 {
        let p = system(2, &[&format!("1 {m} 0"), &format!("1 0 {m}")]);
        let g = estimate_gamma(&p, &small_plan(2, 7), m).unwrap();
        assert!(g.fit.snapped.is_exactly(m as i64, 1), "m = {m}: {}", g.fit.snapped);
    }
}

#[test]
fn a_system_is_one_weaker_than_its_multiples() {
    let p = system(2, &["1 2 0; 3 0 2; -1 1 1"]);
    let q = system(2, &["-2 2 0; -6 0 2; 2 1 1"]);
    let h = estimate_h(&q, &p, &small_plan(2, 3)).unwrap();
    assert!(h.snapped.is_exactly(1, 1), "{}", h.snapped);
    assert!((h.constant - 2.0).abs() < 0.05, "{}", h.constant);
}

#[test]
fn seminorm_shifts_by_log_of_scalar() {
    let p = system(2, &["1 2 0", "1 0 2"]);
    let k = BoxRegion::cube(2, -1.0, 1.0).unwrap();
    let w = WeightFunction::gevrey(2.0).unwrap();
    let u = TestFunction::plane_wave(vec![1.0, 2.0]);
    let a = iterate_norm_table(&p, &u, &k, 10).unwrap();
    let b = iterate_norm_table(&p, &u.scaled(Complex64::new(0.0, 5.0)), &k, 10).unwrap();
    let sa = seminorm_from_table(&a, &w, 2, 1.0).unwrap();
    let sb = seminorm_from_table(&b, &w, 2, 1.0).unwrap();
    for (x, y) in sa.shell_values.iter().zip(&sb.shell_values) {
        assert!((y - x - 5f64.ln()).abs() < 1e-12);
    }
    assert_eq!(sa.status, sb.status);
}
