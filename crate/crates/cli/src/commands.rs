use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use vkstab_core::certify::{
    certify as run_certify, certify_so3, coupled_stability_criteria, CertifyOptions, SlopeSource,
};
use vkstab_core::dynamics::{stability_experiment, ExperimentOptions, Perturbation};
use vkstab_core::hessian::{
    assemble, kernel_angles, kernel_matches_orbit, spectrum as low_spectrum,
};
use vkstab_core::planewave::mode_table;
use vkstab_core::profiles::{
    boost, coupled_soliton, coupled_zeta_sq, family_at, plane_wave, polish, soliton_solve,
    DEFAULT_NEWTON_TOL,
};
use vkstab_core::slope::{closed_form_point, d2w_closed, d2w_fd};
use vkstab_core::so3::{integrate_so3, perturb, so3_report};
use vkstab_core::{
    CoupledParams, Grid, GridKind, ModelParams, Profile, ProfileKind, SlopeReport, SpectralReport,
};

use crate::config::{ModelSection, RunConfig};
use crate::io::{emit, json_string, read_profile, to_doc};

/// Print a summary line: stdout when the data went to a file, stderr when
/// stdout carries the data.
fn say(data_on_stdout: bool, line: impl AsRef<str>) {
    if data_on_stdout {
        eprintln!("{}", line.as_ref());
    } else {
        println!("{}", line.as_ref());
    }
}

fn required(v: Option<f64>, name: &str) -> Result<f64> {
    v.with_context(|| format!("model.{name} is required for coupled models"))
}

pub fn model_params(m: &ModelSection) -> Result<ModelParams<f64>> {
    match m.kind.as_deref().unwrap_or("nls") {
        "nls" => {
            let p = m.p.unwrap_or(3.0);
            if !p.is_finite() || p <= 1.0 {
                bail!("model.p must exceed 1");
            }
            Ok(ModelParams::SingleNls {
                p,
                d: m.d.unwrap_or(1),
            })
        }
        "coupled" => {
            let c = CoupledParams::new(
                required(m.alpha, "alpha")?,
                required(m.gamma, "gamma")?,
                required(m.delta, "delta")?,
            )
            .with_beta(m.beta.unwrap_or(1.0))
            .with_k(m.k.unwrap_or(0.0));
            Ok(ModelParams::Coupled(c))
        }
        other => bail!("unknown model kind `{other}` (nls|coupled)"),
    }
}

fn grid(cfg: &RunConfig, default_kind: GridKind) -> Result<Arc<Grid<f64>>> {
    let kind = match &cfg.grid.kind {
        Some(k) => crate::io::grid_kind(k)?,
        None => default_kind,
    };
    let (extent, n) = match kind {
        GridKind::Line => (20.0, 512),
        GridKind::Periodic => (TAU, 32),
    };
    let g = Grid::new(
        kind,
        cfg.grid.extent.unwrap_or(extent),
        cfg.grid.n.unwrap_or(n),
    )?;
    Ok(Arc::new(g))
}

pub fn build_profile(cfg: &RunConfig) -> Result<Profile<f64>> {
    if let Some(path) = &cfg.profile.from {
        return read_profile(Path::new(path));
    }
    let model = model_params(&cfg.model)?;
    let tol = cfg.solver.tol.unwrap_or(DEFAULT_NEWTON_TOL);
    let omega = cfg.profile.omega.unwrap_or(-1.0);
    let prof = match model {
        ModelParams::SingleNls { p, d } => {
            let g = grid(cfg, GridKind::Line)?;
            let mut prof = soliton_solve(omega, p, g, tol)?;
            prof.model = ModelParams::SingleNls { p, d };
            prof
        }
        ModelParams::Coupled(c) => {
            let g = grid(cfg, GridKind::Line)?;
            match g.kind() {
                GridKind::Line => polish(&coupled_soliton(omega, c, g)?, tol)?,
                GridKind::Periodic => plane_wave(
                    cfg.profile.zeta1.unwrap_or(1.0),
                    cfg.profile.zeta2.unwrap_or(1.0),
                    c,
                    g,
                )?,
            }
        }
    };
    match cfg.profile.velocity {
        Some(v) if v != 0.0 => Ok(boost(&prof, v)?),
        _ => Ok(prof),
    }
}

fn certify_options(cfg: &RunConfig) -> Result<CertifyOptions> {
    let s = &cfg.solver;
    let d = CertifyOptions::default();
    Ok(CertifyOptions {
        n_eigs: s.n_eigs.unwrap_or(d.n_eigs),
        slope: match s.slope.as_deref() {
            None | Some("fd") => SlopeSource::FiniteDifference,
            Some("closed") => SlopeSource::ClosedForm,
            Some(o) => bail!("unknown slope source `{o}` (fd|closed)"),
        },
        fd_step: s.fd_step,
        ker_tol: s.ker_tol,
        angle_tol: s.angle_tol.unwrap_or(d.angle_tol),
        refine: s.refine.unwrap_or(d.refine),
        gap_ratio_tol: s.gap_ratio_tol.unwrap_or(d.gap_ratio_tol),
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.9}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn profile(cfg: &RunConfig, out: Option<&Path>) -> Result<i32> {
    let prof = build_profile(cfg)?;
    let doc = to_doc(&prof)?;
    let path = out.unwrap_or(Path::new("profile.json"));
    emit(&json_string(&doc)?, Some(path))?;
    println!("kind      {}", doc.kind);
    println!("xi        {}", fmt_vec(&prof.xi));
    println!("residual  {:.3e}", doc.residual);
    println!("energy    {:.12}", doc.invariants.energy);
    println!("F         {}", fmt_vec(&doc.invariants.f));
    if prof.kind == ProfileKind::CoupledSoliton {
        if let ModelParams::Coupled(c) = prof.model {
            let (z1, z2) = coupled_zeta_sq(&c)?;
            println!("zeta_sq   {z1:.12} {z2:.12}");
        }
    }
    println!("wrote     {}", path.display());
    Ok(0)
}

#[derive(Serialize)]
struct SpectrumOut<'a> {
    #[serde(flatten)]
    report: &'a SpectralReport<f64>,
    kernel_angles: Option<Vec<f64>>,
    kernel_matches_orbit: bool,
    residual: f64,
}

pub fn spectrum(cfg: &RunConfig, out: Option<&Path>) -> Result<i32> {
    let prof = build_profile(cfg)?;
    let op = assemble(&prof)?;
    let opts = certify_options(cfg)?;
    let rep = low_spectrum(&op, opts.n_eigs, opts.ker_tol)?;
    let res = SpectrumOut {
        kernel_angles: kernel_angles(&rep, &op),
        kernel_matches_orbit: kernel_matches_orbit(&rep, &op, opts.angle_tol),
        residual: prof.residual(),
        report: &rep,
    };
    emit(&json_string(&res)?, out)?;
    let so = out.is_none();
    say(
        so,
        format!(
            "n(D2L) {}  dim ker {}  gap {:?}",
            rep.n_neg, rep.dim_ker, rep.gap_pos
        ),
    );
    say(
        so,
        format!("kernel matches orbit {}", res.kernel_matches_orbit),
    );
    Ok(0)
}

#[derive(Serialize)]
struct SlopeOut {
    report: SlopeReport<f64>,
    closed_form: Option<SlopeReport<f64>>,
}

pub fn slope(cfg: &RunConfig, out: Option<&Path>) -> Result<i32> {
    let prof = build_profile(cfg)?;
    let closed = closed_form_point(&prof).and_then(|p| d2w_closed(&p)).ok();
    let report = match certify_options(cfg)?.slope {
        SlopeSource::ClosedForm => closed.clone().context("no closed form for this profile")?,
        SlopeSource::FiniteDifference => {
            let fam = family_at(&prof)?;
            let h = cfg.solver.fd_step.unwrap_or(fam.fd_step());
            d2w_fd(&fam, &prof.xi, h)?
        }
    };
    let so = out.is_none();
    let sig = report.signature;
    say(
        so,
        format!("D2W eigenvalues {}", fmt_vec(&report.eigenvalues)),
    );
    say(so, format!("signature p {} z {} n {}", sig.p, sig.z, sig.n));
    emit(
        &json_string(&SlopeOut {
            report,
            closed_form: closed,
        })?,
        out,
    )?;
    Ok(0)
}

pub fn certify(cfg: &RunConfig, out: Option<&Path>) -> Result<i32> {
    let prof = build_profile(cfg)?;
    let opts = certify_options(cfg)?;
    let mut fam = family_at(&prof)?;
    if let Some(h) = opts.fd_step {
        fam = fam.with_fd_step(h);
    }
    let cert = run_certify(&prof, &fam, &opts)?;
    emit(&json_string(&cert)?, out)?;
    let so = out.is_none();
    for line in cert.text_report().lines() {
        say(so, line);
    }
    if prof.kind == ProfileKind::CoupledSoliton {
        if let Ok(c) = coupled_stability_criteria(&prof) {
            say(
                so,
                format!(
                    "coupled criteria det {:.6e} trace {:.6e} vk {:.6e} holds {} agrees {}",
                    c.det,
                    c.trace,
                    c.vk_integral,
                    c.criterion_holds,
                    c.agrees_with(&cert)
                ),
            );
        }
    }
    Ok(cert.exit_code())
}

pub fn planewave(cfg: &RunConfig, out: Option<&Path>, json: Option<&Path>) -> Result<i32> {
    let mut m = cfg.model.clone();
    m.kind.get_or_insert_with(|| "coupled".into());
    let ModelParams::Coupled(params) = model_params(&m)? else {
        bail!("planewave needs the coupled model");
    };
    if cfg.grid.kind.as_deref().is_some_and(|k| k == "line") {
        bail!("planewave works on the periodic grid");
    }
    let zeta = [
        cfg.profile.zeta1.unwrap_or(1.0),
        cfg.profile.zeta2.unwrap_or(1.0),
    ];
    let length = cfg.grid.extent.unwrap_or(TAU);
    let table = mode_table(&params, zeta, length, cfg.planewave.nmax.unwrap_or(8))?;
    emit(&table.to_csv(), out)?;
    if let Some(j) = json {
        emit(&json_string(&table)?, Some(j))?;
    }
    let so = out.is_none();
    let verdict = serde_json::to_value(table.linearly_stable)?;
    say(so, format!("verdict {}", verdict.as_str().unwrap_or("?")));
    say(so, format!("coercive {}", table.coercive));
    say(
        so,
        format!(
            "p(D2W) {}  n(D2L) {}  zero modes {}",
            table.p_d2w, table.n_neg, table.n_zero
        ),
    );
    say(so, format!("max growth rate {:.9}", table.max_growth_rate));
    Ok(0)
}

pub struct EvolveOutputs<'a> {
    pub distances: Option<&'a Path>,
    pub trajectory: Option<&'a Path>,
    pub binary: Option<&'a Path>,
    pub report: Option<&'a Path>,
}

pub fn evolve(cfg: &RunConfig, outs: &EvolveOutputs) -> Result<i32> {
    let prof = build_profile(cfg)?;
    let e = &cfg.evolve;
    let modes = e.modes.unwrap_or(6);
    let perturbation = match e.perturbation.as_deref().unwrap_or("random") {
        "random" => Perturbation::RandomBandLimited { modes },
        "mode" => Perturbation::FourierMode {
            n: e.mode.unwrap_or(1),
        },
        "kernel" => Perturbation::KernelOrthogonal { modes },
        o => bail!("unknown perturbation `{o}` (random|mode|kernel)"),
    };
    let opts = ExperimentOptions {
        eps: e.eps.unwrap_or(1e-3),
        dt: e.dt.unwrap_or(2e-3),
        t_end: e.tend.unwrap_or(10.0),
        stride: e.stride.unwrap_or(50),
        perturbation,
        seed: cfg.seed(),
        keep_snapshots: outs.binary.is_some(),
    };
    if !opts.t_end.is_finite() || opts.t_end <= 0.0 || opts.stride == 0 {
        bail!("evolve needs tend > 0 and a positive stride");
    }
    let rep = stability_experiment(&prof, &opts)?;
    emit(&rep.series.to_csv(), outs.distances)?;
    if let Some(p) = outs.trajectory {
        emit(&rep.trajectory.to_csv(), Some(p))?;
    }
    if let Some(p) = outs.binary {
        let f = File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
        rep.trajectory.write_binary(BufWriter::new(f))?;
    }
    if let Some(p) = outs.report {
        emit(&json_string(&rep)?, Some(p))?;
    }
    let so = outs.distances.is_none();
    say(so, format!("initial distance {:.6e}", rep.initial_distance));
    say(so, format!("max distance {:.6e}", rep.max_distance));
    match rep.growth_rate {
        Some(g) => say(so, format!("growth rate {g:.6}")),
        None => say(so, "growth rate none"),
    }
    let verdict = serde_json::to_value(rep.verdict)?;
    let note = if rep.empirical_only {
        " (empirical only)"
    } else {
        ""
    };
    say(
        so,
        format!("verdict {}{note}", verdict.as_str().unwrap_or("?")),
    );
    say(
        so,
        format!(
            "energy drift {:.3e}  momentum drift {:.3e}",
            rep.energy_drift, rep.momentum_drift
        ),
    );
    Ok(0)
}

#[derive(Serialize)]
struct So3Dynamics {
    eps: f64,
    seed: u64,
    max_distance: f64,
    energy_drift: f64,
    momentum_drift: f64,
}

pub fn so3(cfg: &RunConfig, out: Option<&Path>, trajectory: Option<&Path>) -> Result<i32> {
    let s = &cfg.so3;
    let report = so3_report(
        s.rho.unwrap_or(1.0),
        s.omega_pot.unwrap_or(1.0),
        s.alpha.unwrap_or(1.0),
    )?;
    let cert = certify_so3(&report);
    let tend = s.tend.unwrap_or(0.0);
    let dynamics = if tend > 0.0 {
        let eps = s.eps.unwrap_or(1e-3);
        let start = perturb(&report.state, eps, cfg.seed());
        let tr = integrate_so3(
            &start,
            &report.state,
            s.dt.unwrap_or(1e-3),
            tend,
            s.stride.unwrap_or(100),
        )?;
        if let Some(p) = trajectory {
            emit(&tr.to_csv(), Some(p))?;
        }
        Some(So3Dynamics {
            eps,
            seed: cfg.seed(),
            max_distance: tr.max_distance,
            energy_drift: tr.energy_drift,
            momentum_drift: tr.momentum_drift,
        })
    } else {
        None
    };
    let doc = serde_json::json!({
        "report": &report,
        "certificate": &cert,
        "dynamics": &dynamics,
    });
    emit(&json_string(&doc)?, out)?;
    let so = out.is_none();
    say(so, format!("n(D2L)    {}", report.hessian.n_neg));
    say(so, format!("dim ker   {}", report.hessian.dim_ker));
    say(so, format!("p(D2W)    {}", report.w.signature.p));
    say(so, format!("p(D2W~)   {}", report.w.p_tilde));
    say(so, format!("D2W eigs  {}", fmt_vec(&report.w.eigenvalues)));
    if let Some(d) = &dynamics {
        say(so, format!("max distance {:.6e}", d.max_distance));
    }
    say(so, format!("verdict   {}", cert.verdict.label()));
    Ok(cert.exit_code())
}
