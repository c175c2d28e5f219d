use proptest::prelude::*;
use vkstab_core::so3::{circular_orbit, hessian6, integrate_so3, perturb, w_so3};

#[test]
fn circular_orbit_is_a_relative_equilibrium() {
    let s = circular_orbit(1.0, 1.0, 1.0).unwrap();
    let tr = integrate_so3(&s, &s, 1e-3, 100.0, 1000).unwrap();
    assert!(tr.max_distance <= 1e-8, "{}", tr.max_distance);
    assert!(tr.energy_drift <= 1e-8, "{}", tr.energy_drift);
    assert!(tr.momentum_drift <= 1e-10, "{}", tr.momentum_drift);
}

#[test]
fn perturbed_orbit_stays_close() {
    let s = circular_orbit(1.0, 1.0, 1.0).unwrap();
    for seed in 0..4 {
        let u = perturb(&s, 1e-3, seed);
        let tr = integrate_so3(&u, &s, 1e-3, 100.0, 100).unwrap();
        assert!(tr.max_distance <= 1e-2, "{}", tr.max_distance);
        assert!(tr.momentum_drift <= 1e-10, "{}", tr.momentum_drift);
        assert!(tr.energy_drift <= 1e-8, "{}", tr.energy_drift);
    }
}

#[test]
fn doubled_alpha_recomputed() {
    let r = hessian6(&circular_orbit(1.0, 1.0, 2.0).unwrap());
    assert_eq!(
        r.n_neg + r.dim_ker + r.eigenvalues.iter().filter(|v| **v > r.ker_tol).count(),
        6
    );
    assert!(r.kernel_matches_orbit);
    assert!(r.fd_error < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn restricted_index_separates(rho in 0.5f64..2.0, k in 1.05f64..4.0, omega in 0.2f64..3.0) {
        let alpha = k / (2.0 * rho * rho);
        let s = circular_orbit(rho, omega, alpha).unwrap();
        let h = hessian6(&s);
        let xi = (s.xi[0].powi(2) + s.xi[1].powi(2) + s.xi[2].powi(2)).sqrt();
        let w = w_so3(xi, omega, alpha).unwrap();
        prop_assert!(h.fd_error < 1e-6);
        prop_assert_eq!(h.n_neg, 3);
        prop_assert_eq!(w.signature.p, 3);
        prop_assert_eq!(w.p_tilde, 1);
        prop_assert!(w.fd_error < 1e-5 * w.eigenvalues[2].max(1.0));
    }
}
