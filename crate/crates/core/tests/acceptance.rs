//! One line per acceptance criterion; exits non-zero if any fails.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use vkstab_core::certify::{
    certify, coupled_stability_criteria, CertifyOptions, CheckName, Verdict,
};
use vkstab_core::dynamics::{
    evolve, perturbation, stability_experiment, DynamicVerdict, ExperimentOptions, Perturbation,
    Propagator,
};
use vkstab_core::hessian::{all_eigenvalues, assemble};
use vkstab_core::linalg::{dot, orthonormalize};
use vkstab_core::model::{apply_generator, lyapunov_gradient};
use vkstab_core::planewave::{mode_table, torus_spectrum_closed};
use vkstab_core::profiles::{
    boost, coupled_soliton, family_at, plane_wave, soliton_explicit, soliton_solve,
};
use vkstab_core::slope::{closed_form_point, d2w_closed, d2w_fd};
use vkstab_core::so3::{circular_orbit, integrate_so3, perturb, so3_report};
use vkstab_core::{inner, invariants_of, Certificate, CoupledParams, Field, Grid, Profile};

type Outcome = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

fn line(n: usize) -> Arc<Grid<f64>> {
    Arc::new(Grid::line(20.0, n).unwrap())
}

fn torus(n: usize) -> Arc<Grid<f64>> {
    Arc::new(Grid::periodic(TAU, n).unwrap())
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn cert_of(p: &Profile<f64>) -> Result<Certificate, String> {
    let fam = family_at(p).map_err(e)?;
    certify(p, &fam, &CertifyOptions::default()).map_err(e)
}

fn soliton() -> Outcome {
    let p = soliton_solve(-1.0, 3.0, line(512), 1e-11).map_err(e)?;
    let c = cert_of(&p)?;
    let h4 = &c.checks.h4_index_match;
    ensure(c.verdict == Verdict::CertifiedCoercive, c.verdict.label())?;
    ensure(
        h4.n_hessian == Some(1) && h4.p_d2w == Some(1),
        format!("{:?} {:?}", h4.n_hessian, h4.p_d2w),
    )?;
    let dk = c.checks.h2_kernel_equals_orbit.dim_ker;
    ensure(dk == 2, format!("dim ker {dk}"))?;
    let low = c.spectrum.as_ref().ok_or("no spectrum")?.eigenvalues[0];
    ensure(
        (low + 3.0).abs() <= 1e-4,
        format!("lowest eigenvalue {low}"),
    )?;

    let fam = family_at(&p).map_err(e)?;
    let h = 1e-4;
    let mass = |w: f64| -> Result<f64, String> {
        let q = fam.solve(&[w, 0.0]).map_err(e)?;
        Ok(2.0 * invariants_of(&q.field, &q.model).map_err(e)?.f[0])
    };
    let slope = (mass(-1.0 + h)? - mass(-1.0 - h)?) / (2.0 * h);
    ensure((slope + 2.0).abs() <= 1e-3, format!("mass slope {slope}"))?;
    Ok(format!(
        "lowest eigenvalue {low:.7}, mass slope {slope:.7}, {}",
        c.verdict.label()
    ))
}

fn threshold() -> Outcome {
    let mut notes = Vec::new();
    for p in [3.0, 4.0, 4.9, 5.1] {
        let prof = soliton_solve(-1.0, p, line(512), 1e-11).map_err(e)?;
        let closed = d2w_closed(&closed_form_point(&prof).map_err(e)?).map_err(e)?;
        let fam = family_at(&prof).map_err(e)?;
        let fd = d2w_fd(&fam, &prof.xi, fam.fd_step()).map_err(e)?;
        let slope = -2.0 * closed.entry(0, 0);
        ensure(
            (slope < 0.0) == (p < 5.0),
            format!("p = {p}: closed slope {slope}"),
        )?;
        let fd_slope = -2.0 * fd.entry(0, 0);
        ensure(
            (fd_slope < 0.0) == (p < 5.0),
            format!("p = {p}: fd slope {fd_slope}"),
        )?;
        ensure(
            fd.signature == closed.signature,
            format!("p = {p}: signatures differ"),
        )?;
        let rel = (fd_slope - slope).abs() / slope.abs();
        if p <= 4.9 {
            ensure(rel <= 0.05, format!("p = {p}: relative slope error {rel}"))?;
        }
        notes.push(format!(
            "p {p}: slope {slope:.4} fd {fd_slope:.4} sig p {}",
            fd.signature.p
        ));
    }
    Ok(notes.join("; "))
}

fn coupled() -> Outcome {
    let strong = coupled_soliton(-1.0, CoupledParams::new(1.0, 1.0, 2.0), line(256)).map_err(e)?;
    let c = cert_of(&strong)?;
    let crit = coupled_stability_criteria(&strong).map_err(e)?;
    ensure(
        c.checks.h4_index_match.n_hessian == Some(1),
        "delta 2: n != 1",
    )?;
    ensure(
        c.checks.h2_kernel_equals_orbit.dim_ker == 3,
        "delta 2: dim ker != 3",
    )?;
    ensure(crit.vk_integral > 0.0, "delta 2: vk <= 0")?;
    ensure(
        c.verdict == Verdict::CertifiedCoercive,
        format!("delta 2: {}", c.verdict.label()),
    )?;
    ensure(crit.agrees_with(&c), "delta 2: criteria disagree")?;

    let weak = coupled_soliton(-1.0, CoupledParams::new(1.0, 1.0, 0.5), line(256)).map_err(e)?;
    let w = cert_of(&weak)?;
    let wc = coupled_stability_criteria(&weak).map_err(e)?;
    ensure(
        w.checks.h4_index_match.n_hessian == Some(2),
        "delta 0.5: n != 2",
    )?;
    ensure(
        (w.verdict == Verdict::CertifiedCoercive) == (wc.vk_integral < 0.0),
        format!(
            "delta 0.5: {} with vk {}",
            w.verdict.label(),
            wc.vk_integral
        ),
    )?;
    ensure(wc.agrees_with(&w), "delta 0.5: criteria disagree")?;
    Ok(format!(
        "delta 2: vk {:.4} {}; delta 0.5: vk {:.4} {}",
        crit.vk_integral,
        c.verdict.label(),
        wc.vk_integral,
        w.verdict.label()
    ))
}

fn plane_waves() -> Outcome {
    let n = 32;
    let params = CoupledParams::new(-1.0, -1.0, -0.5);
    let stable = plane_wave(1.0, 1.0, params, torus(n)).map_err(e)?;
    let mut assembled = all_eigenvalues(&assemble(&stable).map_err(e)?);
    let mut closed = torus_spectrum_closed(&params, [1.0, 1.0], TAU, n);
    assembled.sort_by(f64::total_cmp);
    closed.sort_by(f64::total_cmp);
    ensure(assembled.len() == closed.len(), "spectrum sizes differ")?;
    let err = assembled
        .iter()
        .zip(&closed)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ensure(err <= 1e-8, format!("closed vs assembled {err:e}"))?;
    let table = mode_table(&params, [1.0, 1.0], TAU, n / 2 - 1).map_err(e)?;
    for r in &table.rows {
        for v in [
            r.lambda_plus_plus,
            r.lambda_plus_minus,
            r.lambda_minus_plus,
            r.lambda_minus_minus,
        ] {
            ensure(
                assembled.iter().any(|a| (a - v).abs() <= 1e-8),
                format!("mode {} value {v} not in the assembled spectrum", r.n),
            )?;
        }
    }
    let c = cert_of(&stable)?;
    let h4 = &c.checks.h4_index_match;
    ensure(
        c.verdict == Verdict::CertifiedCoercive,
        format!("stable: {}", c.verdict.label()),
    )?;
    ensure(
        h4.p_d2w == Some(0) && h4.n_hessian == Some(0),
        "stable: indices",
    )?;
    let calm = stability_experiment(
        &stable,
        &ExperimentOptions {
            eps: 1e-3,
            dt: 1e-3,
            t_end: 50.0,
            stride: 100,
            perturbation: Perturbation::KernelOrthogonal { modes: 4 },
            seed: 1,
            keep_snapshots: false,
        },
    )
    .map_err(e)?;
    ensure(
        calm.verdict == DynamicVerdict::Bounded,
        "stable: distance grew",
    )?;

    let unstable =
        plane_wave(1.0, 1.0, CoupledParams::new(-1.0, -1.0, -2.0), torus(n)).map_err(e)?;
    let u = cert_of(&unstable)?;
    ensure(
        u.verdict == Verdict::Failed(CheckName::H4IndexMatch),
        format!("unstable: {}", u.verdict.label()),
    )?;
    let table = mode_table(&CoupledParams::new(-1.0, -1.0, -2.0), [1.0, 1.0], TAU, 4).map_err(e)?;
    let predicted = table.rows[1]
        .lambda2_plus
        .ok_or("no closed form at n = 1")?
        .sqrt();
    let r = stability_experiment(
        &unstable,
        &ExperimentOptions {
            eps: 1e-5,
            dt: 1e-3,
            t_end: 20.0,
            stride: 50,
            perturbation: Perturbation::FourierMode { n: 1 },
            seed: 2,
            keep_snapshots: false,
        },
    )
    .map_err(e)?;
    let rate = r.growth_rate.ok_or("no growth fit")?;
    ensure(
        (predicted - 1.0).abs() <= 1e-9,
        format!("predicted rate {predicted}"),
    )?;
    ensure(
        (rate - predicted).abs() <= 0.1 * predicted,
        format!("fitted rate {rate}"),
    )?;
    ensure(
        r.verdict == DynamicVerdict::Grew,
        "unstable: distance stayed bounded",
    )?;
    Ok(format!(
        "spectrum error {err:.1e}; stable {} and bounded; unstable {} with rate {rate:.4}",
        c.verdict.label(),
        u.verdict.label()
    ))
}

fn so3() -> Outcome {
    let r = so3_report(1.0, 1.0, 1.0).map_err(e)?;
    ensure(r.hessian.n_neg == 3, format!("n = {}", r.hessian.n_neg))?;
    let mut eig = r.w.eigenvalues.clone();
    eig.sort_by(f64::total_cmp);
    let want = [0.5, 1.0, 1.0];
    let err = eig
        .iter()
        .zip(want)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ensure(err <= 1e-9, format!("closed eigenvalues {eig:?}"))?;
    ensure(r.w.fd_error <= 1e-6, format!("fd error {:e}", r.w.fd_error))?;
    ensure(r.w.signature.p == 3 && r.w.p_tilde == 1, "indices")?;
    let s = circular_orbit(1.0, 1.0, 1.0).map_err(e)?;
    let eps = 1e-3;
    let tr = integrate_so3(&perturb(&s, eps, 0), &s, 1e-3, 100.0, 100).map_err(e)?;
    ensure(
        tr.max_distance <= 10.0 * eps,
        format!("distance {:e}", tr.max_distance),
    )?;
    Ok(format!(
        "n 3, D2W eigenvalues {eig:?}, fd error {:.1e}, p 3 > p~ 1, max distance {:.2e}",
        r.w.fd_error, tr.max_distance
    ))
}

fn smooth_field(grid: &Arc<Grid<f64>>, m: usize, coefs: &[f64]) -> Field<f64> {
    let r = grid.extent();
    Field::from_fn(grid.clone(), m, |c, x| {
        let env = (-(x * x) / (2.0 * (r / 6.0).powi(2))).exp();
        let mut z = num_complex::Complex::new(0.0, 0.0);
        for (k, a) in coefs.iter().enumerate() {
            let w = (k as f64 + 1.0 + c as f64) * 0.3;
            z += num_complex::Complex::new(a * (w * x).cos(), a * 0.5 * (w * x).sin());
        }
        z * env
    })
}

fn properties(certified: &[Certificate]) -> Outcome {
    let cases = vec![
        boost(&soliton_explicit(-1.0, line(256)).map_err(e)?, 0.5).map_err(e)?,
        soliton_solve(-1.0, 4.0, line(256), 1e-11).map_err(e)?,
        coupled_soliton(-1.0, CoupledParams::new(1.0, 1.0, 2.0), line(256)).map_err(e)?,
        plane_wave(1.0, 0.8, CoupledParams::new(-1.0, -1.0, -0.5), torus(32)).map_err(e)?,
    ];
    let (mut asym, mut ident, mut orth, mut order) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for prof in &cases {
        let fam = family_at(prof).map_err(e)?;
        let h = fam.fd_step();
        let slope = d2w_fd(&fam, &prof.xi, h).map_err(e)?;
        asym = asym.max(slope.asymmetry);
        let op = assemble(prof).map_err(e)?;
        let basis: Vec<Vec<f64>> = prof
            .model
            .generators(prof.grid())
            .iter()
            .map(|&g| apply_generator(g, &prof.field).to_real_vec())
            .collect();
        let q = orthonormalize(&basis, 1e-10);
        let m = prof.xi.len();
        let eta: Vec<f64> = (0..m).map(|i| ((i + 1) as f64 * 0.7).sin()).collect();
        let shift = |s: f64| -> Vec<f64> {
            prof.xi
                .iter()
                .zip(&eta)
                .map(|(x, d)| x + s * h * d)
                .collect()
        };
        let up = fam.solve(&shift(1.0)).map_err(e)?;
        let dn = fam.solve(&shift(-1.0)).map_err(e)?;
        let t = up.field.sub(&dn.field).scale(0.5 / h);
        let ht = op.apply(&t);
        let lhs = inner(&t, &ht).map_err(e)?;
        let mut rhs = 0.0;
        for i in 0..m {
            for j in 0..m {
                rhs -= eta[i] * slope.d2w[i * m + j] * eta[j];
            }
        }
        ident = ident.max((lhs - rhs).abs() / rhs.abs().max(1e-12));
        let mut v = smooth_field(
            prof.grid_arc(),
            prof.field.n_components(),
            &[1.0, -0.4, 0.3],
        )
        .to_real_vec();
        for b in &q {
            let c = dot(b, &v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let v = Field::from_real_vec(prof.grid_arc().clone(), prof.field.n_components(), &v)
            .map_err(e)?;
        orth = orth.max(inner(&ht, &v).map_err(e)?.abs() / (v.norm_l2() * t.norm_l2()));

        let w = smooth_field(
            prof.grid_arc(),
            prof.field.n_components(),
            &[0.8, 0.5, -0.2],
        );
        let hw = op.apply(&w);
        let err = |s: f64| -> Result<f64, String> {
            let gp =
                lyapunov_gradient(&prof.model, &prof.xi, &prof.field.axpy(s, &w)).map_err(e)?;
            let gm =
                lyapunov_gradient(&prof.model, &prof.xi, &prof.field.axpy(-s, &w)).map_err(e)?;
            Ok(gp.sub(&gm).scale(0.5 / s).sub(&hw).norm_l2())
        };
        order = order.min((err(1e-3)? / err(1e-4)?).log10());
    }
    ensure(asym <= 1e-6, format!("asymmetry {asym:e}"))?;
    ensure(ident <= 1e-4, format!("slope identity {ident:e}"))?;
    ensure(orth <= 1e-6, format!("orthogonality {orth:e}"))?;
    ensure(order >= 1.9, format!("hessian order {order}"))?;

    let p = soliton_explicit(-1.0, line(256)).map_err(e)?;
    let v = perturbation(&p, Perturbation::RandomBandLimited { modes: 6 }, 5).map_err(e)?;
    let u0 = p.field.axpy(0.1, &v);
    let prop = Propagator::new(p.model, u0.grid_arc().clone()).map_err(e)?;
    let run = |dt: f64| prop.advance(&u0, dt, (1.0 / dt).round() as usize);
    let reference = run(0.01 / 8.0).map_err(e)?;
    let e1 = run(0.01).map_err(e)?.sub(&reference).norm_l2();
    let e2 = run(0.005).map_err(e)?.sub(&reference).norm_l2();
    let ratio = e1 / e2;
    ensure(
        (3.5..=4.5).contains(&ratio),
        format!("strang ratio {ratio}"),
    )?;

    let pw = plane_wave(1.0, 1.0, CoupledParams::new(-1.0, -1.0, -2.0), torus(64)).map_err(e)?;
    let v = perturbation(&pw, Perturbation::RandomBandLimited { modes: 4 }, 9).map_err(e)?;
    let tr = evolve(&pw.field.axpy(0.1, &v), &pw.model, 1e-3, 0.2, 1).map_err(e)?;
    let drift =
        tr.f.windows(2)
            .flat_map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0f64, f64::max);
    ensure(drift <= 1e-10, format!("per-step F drift {drift:e}"))?;

    for c in certified {
        let (pt, pd, n) = (
            c.gss.p_w_tilde,
            c.checks.h4_index_match.p_d2w,
            c.checks.h4_index_match.n_hessian,
        );
        match (pt, pd, n) {
            (Some(pt), Some(pd), Some(n)) => {
                ensure(pt <= pd && pd <= n, format!("chain {pt} {pd} {n}"))?
            }
            _ => return Err("certified case without indices".into()),
        }
    }
    Ok(format!(
        "asymmetry {asym:.1e}, identity {ident:.1e}, orthogonality {orth:.1e}, order {order:.2}, \
         strang {ratio:.3}, F drift {drift:.1e}, chain on {} certificates",
        certified.len()
    ))
}

fn certified_cases() -> Result<Vec<Certificate>, String> {
    let mut out = vec![
        cert_of(&soliton_solve(-1.0, 3.0, line(256), 1e-11).map_err(e)?)?,
        cert_of(&soliton_solve(-1.0, 4.0, line(256), 1e-11).map_err(e)?)?,
        cert_of(
            &boost(
                &soliton_solve(-1.0, 3.0, line(256), 1e-11).map_err(e)?,
                std::f64::consts::PI / 10.0,
            )
            .map_err(e)?,
        )?,
        cert_of(
            &plane_wave(1.0, 1.0, CoupledParams::new(-1.0, -1.0, -0.5), torus(32)).map_err(e)?,
        )?,
        vkstab_core::certify::certify_so3(&so3_report(1.0, 1.0, 1.0).map_err(e)?),
    ];
    out.retain(|c| c.verdict == Verdict::CertifiedCoercive);
    Ok(out)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 5] = [
        ("1 soliton certification", 30.0, soliton),
        ("2 slope threshold crossing", f64::INFINITY, threshold),
        ("3 coupled solitons", 60.0, coupled),
        ("4 torus plane waves", 120.0, plane_waves),
        ("5 rotor example", 10.0, so3),
    ];
    let mut failed = 0;
    let mut report = |name: &str, limit: f64, f: &dyn Fn() -> Outcome| {
        let t0 = Instant::now();
        let r = f();
        let secs = t0.elapsed().as_secs_f64();
        let r = r.and_then(|s| {
            if secs < limit {
                Ok(s)
            } else {
                Err(format!("took {secs:.1} s, limit {limit} s"))
            }
        });
        match r {
            Ok(s) => println!("PASS  {name:<28} {secs:>6.1} s  {s}"),
            Err(s) => {
                failed += 1;
                println!("FAIL  {name:<28} {secs:>6.1} s  {s}");
            }
        }
    };
    for (name, limit, f) in criteria {
        report(name, limit, &f);
    }
    report("6 property suites", f64::INFINITY, &|| {
        properties(&certified_cases()?)
    });
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
