use abreu_core::estimates::{chi_value, verify, Status, VerifyConfig, CHECK_IDS};
use abreu_core::forcing::Forcing;
use abreu_core::potential::{canonical_potential, normalize};
use abreu_core::quadrature::Grading;
use abreu_core::Polygon;

#[test]
fn full_suite_passes_on_gold_square() {
    let u = normalize(&canonical_potential(&Polygon::unit_square())).unwrap();
    let r = verify(&u, &Forcing::Constant(4.0), &VerifyConfig::default()).unwrap();
    if let Some(c) = r.failures().first() {
        panic!("{} failed: lhs {} rhs {} {:?}", c.id, c.lhs, c.rhs, c.note);
    }
    assert!(r.checks.iter().any(|c| c.status == Status::Pass));
}

#[test]
fn selected_checks_only() {
    let u = normalize(&canonical_potential(&Polygon::standard_simplex())).unwrap();
    let cfg = VerifyConfig { only: Some(vec!["chi".into(), "s_forms".into()]), ..Default::default() };
    let r = verify(&u, &Forcing::Constant(6.0), &cfg).unwrap();
    assert!(r.all_passed());
    assert!(r.checks.iter().all(|c| c.id == "chi" || c.id == "s_forms"), "{:?}", r.checks.iter().map(|c| &c.id).collect::<Vec<_>>());
    let bad = VerifyConfig { only: Some(vec!["nope".into()]), ..Default::default() };
    assert!(verify(&u, &Forcing::Constant(6.0), &bad).is_err());
    assert!(CHECK_IDS.contains(&"chi"));
}

#[test]
fn chi_on_simplex_is_stable_under_refinement() {
    let poly = Polygon::standard_simplex();
    let u = canonical_potential(&poly);
    for (r, a) in [(12, 12), (16, 16), (20, 20)] {
        let g = Grading { radial_levels: r, angular_levels: a, order: 7 };
        let chi = chi_value(&u, &poly, g).unwrap();
        assert!((chi + 12.0).abs() < 1e-9, "{r}: {chi}");
    }
}
