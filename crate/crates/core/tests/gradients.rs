use eqvit::verify::{grad_audit, grad_check_names, COMPOSED_TOL, PRIMITIVE_TOL};

#[test]
fn every_registered_gradient_agrees_with_central_differences() {
    let results = grad_audit(0).unwrap();
    assert_eq!(results.len(), grad_check_names().len());
    for r in &results {
        let tol = if r.composed { COMPOSED_TOL } else { PRIMITIVE_TOL };
        assert!(r.max_rel_err <= tol, "{}: {:e}", r.name, r.max_rel_err);
        assert!(r.probes > 0);
    }
    assert!(results.iter().any(|r| r.composed));
}

#[test]
fn gradients_hold_on_another_seed() {
    assert!(grad_audit(7).unwrap().iter().all(|r| r.passes()));
}
