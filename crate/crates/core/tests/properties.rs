use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex;
use proptest::prelude::*;
use vkstab_core::dynamics::{align_to_orbit, group_action, perturbation, Perturbation};
use vkstab_core::hessian::assemble;
use vkstab_core::linalg::{dot, orthonormalize};
use vkstab_core::model::{apply_generator, lyapunov_gradient};
use vkstab_core::planewave::{
    char_poly, hessian_mode_eigs, linearization_eigs, quartic_roots, LinEigs,
};
use vkstab_core::profiles::{
    boost, coupled_soliton, family_at, plane_wave, soliton_explicit, soliton_solve,
};
use vkstab_core::slope::d2w_fd;
use vkstab_core::{inner, laplacian, CoupledParams, Family, Field, Grid, Profile};

fn line(n: usize) -> Arc<Grid<f64>> {
    Arc::new(Grid::line(20.0, n).unwrap())
}

fn smooth_field(grid: &Arc<Grid<f64>>, m: usize, coefs: &[f64]) -> Field<f64> {
    let r = grid.extent();
    Field::from_fn(grid.clone(), m, |c, x| {
        let env = (-(x * x) / (2.0 * (r / 6.0).powi(2))).exp();
        let mut z = Complex::new(0.0, 0.0);
        for (k, a) in coefs.iter().enumerate() {
            let w = (k as f64 + 1.0 + c as f64) * 0.3;
            z += Complex::new(a * (w * x).cos(), a * 0.5 * (w * x).sin());
        }
        z * env
    })
}

/// `eta . d u_xi / d xi` by centered differences over the family.
fn tangent_along(fam: &Family<f64>, xi: &[f64], eta: &[f64], h: f64) -> Field<f64> {
    let shift = |s: f64| -> Vec<f64> { xi.iter().zip(eta).map(|(x, e)| x + s * h * e).collect() };
    let up = fam.solve(&shift(1.0)).unwrap();
    let dn = fam.solve(&shift(-1.0)).unwrap();
    up.field.sub(&dn.field).scale(0.5 / h)
}

fn quadratic(d2w: &[f64], eta: &[f64]) -> f64 {
    let m = eta.len();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += eta[i] * d2w[i * m + j] * eta[j];
        }
    }
    s
}

fn cases() -> Vec<Profile<f64>> {
    vec![
        boost(&soliton_explicit(-1.0, line(256)).unwrap(), 0.5).unwrap(),
        soliton_solve(-1.0, 4.0, line(256), 1e-11).unwrap(),
        coupled_soliton(-1.0, CoupledParams::new(1.0, 1.0, 2.0), line(256)).unwrap(),
        plane_wave(
            1.0,
            0.8,
            CoupledParams::new(-1.0, -1.0, -0.5),
            Arc::new(Grid::periodic(TAU, 32).unwrap()),
        )
        .unwrap(),
    ]
}

#[test]
fn slope_identities() {
    for prof in cases() {
        let fam = family_at(&prof).unwrap();
        let h = fam.fd_step();
        let slope = d2w_fd(&fam, &prof.xi, h).unwrap();
        assert!(
            slope.asymmetry <= 1e-6,
            "{:?} {}",
            prof.kind,
            slope.asymmetry
        );
        let op = assemble(&prof).unwrap();
        let gens = prof.model.generators(prof.grid());
        let basis: Vec<Vec<f64>> = gens
            .iter()
            .map(|&g| apply_generator(g, &prof.field).to_real_vec())
            .collect();
        let q = orthonormalize(&basis, 1e-10);
        let m = prof.xi.len();
        for k in 0..3 {
            let eta: Vec<f64> = (0..m)
                .map(|i| ((i + 2 * k + 1) as f64 * 0.7).sin())
                .collect();
            let t = tangent_along(&fam, &prof.xi, &eta, h);
            let ht = op.apply(&t);
            let lhs = inner(&t, &ht).unwrap();
            let rhs = -quadratic(&slope.d2w, &eta);
            let rel = (lhs - rhs).abs() / rhs.abs().max(1e-12);
            assert!(rel <= 1e-4, "{:?}: {lhs} vs {rhs}", prof.kind);

            // v in the kernel of DF: orthogonal to every B_g u
            let mut v = smooth_field(
                prof.grid_arc(),
                prof.field.n_components(),
                &[1.0, -0.4, 0.3 * k as f64],
            )
            .to_real_vec();
            for b in &q {
                let c = dot(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
            let v = Field::from_real_vec(prof.grid_arc().clone(), prof.field.n_components(), &v)
                .unwrap();
            let o = inner(&ht, &v).unwrap().abs();
            assert!(
                o <= 1e-6 * v.norm_l2() * t.norm_l2(),
                "{:?}: {o}",
                prof.kind
            );
        }
    }
}

#[test]
fn hessian_matches_gradient_differences() {
    for prof in cases() {
        let op = assemble(&prof).unwrap();
        let v = smooth_field(
            prof.grid_arc(),
            prof.field.n_components(),
            &[0.8, 0.5, -0.2],
        );
        let hv = op.apply(&v);
        let err = |h: f64| {
            let gp = lyapunov_gradient(&prof.model, &prof.xi, &prof.field.axpy(h, &v)).unwrap();
            let gm = lyapunov_gradient(&prof.model, &prof.xi, &prof.field.axpy(-h, &v)).unwrap();
            gp.sub(&gm).scale(0.5 / h).sub(&hv).norm_l2()
        };
        let order = (err(1e-3) / err(1e-4)).log10();
        assert!(order >= 1.9, "{:?}: order {order}", prof.kind);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_is_symmetric(a in prop::collection::vec(-1.0f64..1.0, 3), b in prop::collection::vec(-1.0f64..1.0, 3)) {
        let g = line(128);
        let f = smooth_field(&g, 2, &a);
        let h = smooth_field(&g, 2, &b);
        let l = inner(&f, &laplacian(&h).unwrap()).unwrap();
        let r = inner(&laplacian(&f).unwrap(), &h).unwrap();
        prop_assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs()));
    }

    #[test]
    fn alignment_inverts_group_action(g0 in -3.0f64..3.0, a in -4.0f64..4.0) {
        let p = soliton_explicit(-1.0, line(256)).unwrap();
        let gens = p.model.generators(p.grid());
        let u = group_action(&gens, &[g0, a], &p.field);
        let al = align_to_orbit(&u, &p).unwrap();
        prop_assert!(al.distance < 1e-8);
        prop_assert!((al.g[1] - a).abs() < 1e-8);
    }

    #[test]
    fn alignment_never_exceeds_raw_distance(seed in 0u64..1000, eps in 1e-4f64..0.05) {
        let p = soliton_explicit(-1.0, line(256)).unwrap();
        let v = perturbation(&p, Perturbation::RandomBandLimited { modes: 6 }, seed).unwrap();
        let al = align_to_orbit(&p.field.axpy(eps, &v), &p).unwrap();
        prop_assert!(al.distance <= eps * (1.0 + 1e-9));
    }

    #[test]
    fn mode_eigs_match_quartic(alpha in -2.0f64..-0.2, delta in -3.0f64..-0.1, z in 0.3f64..1.5, n in 1usize..6) {
        let cp = CoupledParams::new(alpha, alpha, delta);
        let e = hessian_mode_eigs(n, &cp, [z, z], TAU);
        prop_assert!(e.iter().all(|x| x.is_finite()));
        if let LinEigs::ClosedForm(lp, lm) = linearization_eigs(n, &cp, [z, z], TAU) {
            let roots = quartic_roots(&char_poly(n, &cp, [z, z], TAU));
            for l2 in [lp, lm] {
                let hit = roots.iter().any(|r| ((r * r).re - l2).abs() <= 1e-8 * (1.0 + l2.abs()) && (r * r).im.abs() <= 1e-8 * (1.0 + l2.abs()));
                prop_assert!(hit, "{l2} not among {:?}", roots);
            }
        }
    }
}
