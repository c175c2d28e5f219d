//! Hypothesis checks and the stability certificate.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hessian::{self, HessOp, SpectralReport};
use crate::linalg::Signature;
use crate::model::ModelParams;
use crate::profiles::{coupled_zeta_sq, refine, Family, Profile, ProfileKind, DEFAULT_NEWTON_TOL};
use crate::scalar::{lit, to_f64, Real};
use crate::slope::{closed_form_point, d2w_closed, d2w_fd, vk_integral, SlopeMethod, SlopeReport};
use crate::so3::So3Report;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeSource {
    /// Finite differences over the family, cross-checked against a closed form
    /// when one exists.
    FiniteDifference,
    ClosedForm,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyOptions {
    pub n_eigs: usize,
    pub slope: SlopeSource,
    /// Finite-difference step; the family default when `None`.
    pub fd_step: Option<f64>,
    /// Kernel zero threshold; relative default when `None`.
    pub ker_tol: Option<f64>,
    pub angle_tol: f64,
    /// Run the N -> 2N comparison for the positive gap.
    pub refine: bool,
    pub gap_ratio_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            n_eigs: 8,
            slope: SlopeSource::FiniteDifference,
            fd_step: None,
            ker_tol: None,
            angle_tol: 1e-4,
            refine: true,
            gap_ratio_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    H1NondegenerateW,
    H2KernelEqualsOrbit,
    H3PositiveGap,
    H4IndexMatch,
}

impl CheckName {
    pub fn short(self) -> &'static str {
        match self {
            CheckName::H1NondegenerateW => "h1",
            CheckName::H2KernelEqualsOrbit => "h2",
            CheckName::H3PositiveGap => "h3",
            CheckName::H4IndexMatch => "h4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "check", rename_all = "snake_case")]
pub enum Verdict {
    CertifiedCoercive,
    Failed(CheckName),
    Indeterminate(CheckName),
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::CertifiedCoercive => 0,
            Verdict::Failed(_) => 3,
            Verdict::Indeterminate(_) => 4,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::CertifiedCoercive => "certified_coercive".into(),
            Verdict::Failed(c) => format!("failed({})", c.short()),
            Verdict::Indeterminate(c) => format!("indeterminate({})", c.short()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct H1 {
    pub pass: bool,
    pub marginal: bool,
    pub eigenvalues: Vec<f64>,
    pub z_tol: f64,
    pub condition: Option<f64>,
    pub method: SlopeMethod,
    /// Largest entrywise gap between the finite-difference and closed-form matrices.
    pub closed_form_gap: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct H2 {
    pub pass: bool,
    pub marginal: bool,
    pub dim_ker: usize,
    pub tangent_dim: usize,
    pub angles: Option<Vec<f64>>,
    pub angle_tol: f64,
    pub ker_tol: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct H3 {
    pub pass: bool,
    pub marginal: bool,
    pub gap: Option<f64>,
    pub gap_refined: Option<f64>,
    pub refinement_ratio: Option<f64>,
    pub ratio_tol: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct H4 {
    pub pass: bool,
    pub marginal: bool,
    pub p_d2w: Option<usize>,
    pub n_hessian: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Checks {
    pub h1_nondegenerate_w: H1,
    pub h2_kernel_equals_orbit: H2,
    pub h3_positive_gap: H3,
    pub h4_index_match: H4,
}

/// Comparison with the restricted slope matrix; never gates the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Gss {
    pub p_w_tilde: Option<usize>,
    pub subalgebra_dim: usize,
    pub applies: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckProvenance {
    pub module: &'static str,
    pub tolerance: f64,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub model: String,
    pub grid: Option<GridInfo>,
    pub h1: CheckProvenance,
    pub h2: CheckProvenance,
    pub h3: CheckProvenance,
    pub h4: CheckProvenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub kind: &'static str,
    pub extent: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub n_neg: usize,
    pub dim_ker: usize,
    pub ker_tol: f64,
    pub dimension: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeSummary {
    pub m: usize,
    pub d2w: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub signature: Signature,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub schema: u32,
    pub xi: Vec<f64>,
    pub checks: Checks,
    pub gss: Gss,
    pub verdict: Verdict,
    pub spectrum: Option<SpectrumSummary>,
    pub slope: Option<SlopeSummary>,
    pub provenance: Provenance,
}

fn f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| to_f64(*x)).collect()
}

fn slope_summary<T: Real>(s: &SlopeReport<T>) -> SlopeSummary {
    SlopeSummary {
        m: s.m,
        d2w: f64s(&s.d2w),
        eigenvalues: f64s(&s.eigenvalues),
        signature: s.signature,
    }
}

fn decide(checks: &Checks) -> Verdict {
    let order = [
        (
            CheckName::H1NondegenerateW,
            checks.h1_nondegenerate_w.marginal,
            checks.h1_nondegenerate_w.pass,
        ),
        (
            CheckName::H2KernelEqualsOrbit,
            checks.h2_kernel_equals_orbit.marginal,
            checks.h2_kernel_equals_orbit.pass,
        ),
        (
            CheckName::H3PositiveGap,
            checks.h3_positive_gap.marginal,
            checks.h3_positive_gap.pass,
        ),
        (
            CheckName::H4IndexMatch,
            checks.h4_index_match.marginal,
            checks.h4_index_match.pass,
        ),
    ];
    if let Some((c, _, _)) = order.iter().find(|x| x.1) {
        return Verdict::Indeterminate(*c);
    }
    match order.iter().find(|x| !x.2) {
        Some((c, _, _)) => Verdict::Failed(*c),
        None => Verdict::CertifiedCoercive,
    }
}

fn slope_for<T: Real>(
    prof: &Profile<T>,
    fam: &Family<T>,
    opts: &CertifyOptions,
) -> Result<(SlopeReport<T>, Option<f64>)> {
    let closed = closed_form_point(prof).and_then(|p| d2w_closed(&p));
    match opts.slope {
        SlopeSource::ClosedForm => Ok((closed?, None)),
        SlopeSource::FiniteDifference => {
            let h = opts.fd_step.map_or(fam.fd_step(), lit);
            let fd = d2w_fd(fam, &prof.xi, h)?;
            let gap = closed.ok().map(|c| {
                fd.d2w
                    .iter()
                    .zip(&c.d2w)
                    .fold(0.0f64, |m, (a, b)| m.max(to_f64(*a - *b).abs()))
            });
            Ok((fd, gap))
        }
    }
}

fn spectral_pass<T: Real>(
    prof: &Profile<T>,
    opts: &CertifyOptions,
) -> Result<(HessOp<T>, SpectralReport<T>)> {
    let op = hessian::assemble(prof)?;
    let rep = hessian::spectrum(&op, opts.n_eigs, opts.ker_tol.map(lit))?;
    Ok((op, rep))
}

fn refined_gap<T: Real>(prof: &Profile<T>, ker_tol: T) -> Result<Option<T>> {
    let fine = refine(prof, lit(DEFAULT_NEWTON_TOL))?;
    let op = hessian::assemble(&fine)?;
    let eigs = hessian::all_eigenvalues(&op);
    Ok(eigs.into_iter().find(|v| *v > ker_tol))
}

fn err_string(e: &Error) -> Option<String> {
    Some(e.to_string())
}

/// Run every hypothesis check for `prof` within `fam`.
pub fn certify<T: Real>(
    prof: &Profile<T>,
    fam: &Family<T>,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    if fam.group_dim() != prof.xi.len() {
        return invalid("profile and family have different group dimensions");
    }
    let (slope, spec) = rayon::join(|| slope_for(prof, fam, opts), || spectral_pass(prof, opts));
    if let Err(e @ Error::NotEquilibrium { .. }) = &spec {
        return Err(e.clone());
    }

    let h1 = match &slope {
        Ok((s, gap)) => H1 {
            pass: s.signature.z == 0,
            marginal: s.marginal > 0,
            eigenvalues: f64s(&s.eigenvalues),
            z_tol: to_f64(s.z_tol),
            condition: s.condition.map(to_f64),
            method: s.method,
            closed_form_gap: *gap,
            error: None,
        },
        Err(e) => H1 {
            pass: false,
            marginal: true,
            eigenvalues: Vec::new(),
            z_tol: 0.0,
            condition: None,
            method: SlopeMethod::FiniteDifference,
            closed_form_gap: None,
            error: err_string(e),
        },
    };

    let (h2, h3_base, n_hess) = match &spec {
        Ok((op, rep)) => {
            let angles = hessian::kernel_angles(rep, op);
            let tol: T = lit(opts.angle_tol);
            let max_angle = angles
                .as_ref()
                .map(|a| a.iter().fold(T::zero(), |m, x| m.max(*x)));
            let pass = max_angle.is_some_and(|a| a <= tol);
            let angle_marginal = max_angle.is_some_and(|a| a > tol && a <= tol * lit(3.0));
            let h2 = H2 {
                pass,
                marginal: rep.marginal > 0 || angle_marginal,
                dim_ker: rep.dim_ker,
                tangent_dim: op.symmetry_tangent().len(),
                angles: angles.map(|a| f64s(&a)),
                angle_tol: opts.angle_tol,
                ker_tol: to_f64(rep.ker_tol),
                error: None,
            };
            (h2, Some(rep), Some(rep.n_neg))
        }
        Err(e) => (
            H2 {
                pass: false,
                marginal: true,
                dim_ker: 0,
                tangent_dim: 0,
                angles: None,
                angle_tol: opts.angle_tol,
                ker_tol: 0.0,
                error: err_string(e),
            },
            None,
            None,
        ),
    };

    let h3 = match h3_base {
        Some(rep) => {
            let gap = rep.gap_pos;
            let gap_marginal = gap.is_some_and(|g| g <= rep.ker_tol * lit(3.0));
            let mut h3 = H3 {
                pass: gap.is_some(),
                marginal: gap_marginal,
                gap: gap.map(to_f64),
                gap_refined: None,
                refinement_ratio: None,
                ratio_tol: opts.gap_ratio_tol,
                error: None,
            };
            if opts.refine && h3.pass {
                match refined_gap(prof, rep.ker_tol) {
                    Ok(Some(g2)) => {
                        let ratio = to_f64(g2) / to_f64(gap.unwrap_or(T::one()));
                        h3.gap_refined = Some(to_f64(g2));
                        h3.refinement_ratio = Some(ratio);
                        h3.pass = (ratio - 1.0).abs() <= opts.gap_ratio_tol;
                    }
                    Ok(None) => h3.pass = false,
                    Err(e) => {
                        h3.marginal = true;
                        h3.error = err_string(&e);
                    }
                }
            }
            h3
        }
        None => H3 {
            pass: false,
            marginal: true,
            gap: None,
            gap_refined: None,
            refinement_ratio: None,
            ratio_tol: opts.gap_ratio_tol,
            error: Some("spectrum unavailable".into()),
        },
    };

    let p_d2w = slope.as_ref().ok().map(|(s, _)| s.signature.p);
    let h4 = H4 {
        pass: p_d2w.is_some() && p_d2w == n_hess,
        marginal: h1.marginal || h2.marginal,
        p_d2w,
        n_hessian: n_hess,
    };

    // phases and translations commute, so the isotropy algebra is everything
    // and the restricted matrix coincides with D^2 W
    let gss = Gss {
        p_w_tilde: p_d2w,
        subalgebra_dim: prof.xi.len(),
        applies: p_d2w.is_some() && p_d2w == n_hess,
    };

    let checks = Checks {
        h1_nondegenerate_w: h1,
        h2_kernel_equals_orbit: h2,
        h3_positive_gap: h3,
        h4_index_match: h4,
    };
    let grid = prof.grid();
    Ok(Certificate {
        schema: SCHEMA_VERSION,
        xi: f64s(&prof.xi),
        verdict: decide(&checks),
        spectrum: spec.as_ref().ok().map(|(_, r)| SpectrumSummary {
            eigenvalues: f64s(&r.eigenvalues),
            n_neg: r.n_neg,
            dim_ker: r.dim_ker,
            ker_tol: to_f64(r.ker_tol),
            dimension: r.dimension,
        }),
        slope: slope.as_ref().ok().map(|(s, _)| slope_summary(s)),
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            model: prof.model.tag().to_string(),
            grid: Some(GridInfo {
                kind: match grid.kind() {
                    crate::GridKind::Line => "line",
                    crate::GridKind::Periodic => "periodic",
                },
                extent: to_f64(grid.extent()),
                n_points: grid.n_points(),
            }),
            h1: CheckProvenance {
                module: "slope",
                tolerance: checks.h1_nondegenerate_w.z_tol,
                note: "zero threshold 1e-6 of the largest slope eigenvalue",
            },
            h2: CheckProvenance {
                module: "hessian",
                tolerance: opts.angle_tol,
                note: "principal angles between kernel and orbit tangent",
            },
            h3: CheckProvenance {
                module: "hessian",
                tolerance: opts.gap_ratio_tol,
                note: "refinement ratio of the first positive eigenvalue under N -> 2N",
            },
            h4: CheckProvenance {
                module: "slope+hessian",
                tolerance: checks.h2_kernel_equals_orbit.ker_tol,
                note: "positive slope index against Morse index",
            },
        },
        checks,
        gss,
    })
}

/// Certificate for the SO(3) example, built from its brute-force report.
pub fn certify_so3(r: &So3Report) -> Certificate {
    let hs = &r.hessian;
    let w = &r.w;
    let w_tol = 1e-6 * w.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w_marginal = w
        .eigenvalues
        .iter()
        .any(|v| v.abs() > w_tol && v.abs() <= 3.0 * w_tol);
    let angle_tol = 1e-6;
    let h1 = H1 {
        pass: w.signature.z == 0,
        marginal: w_marginal,
        eigenvalues: w.eigenvalues.clone(),
        z_tol: w_tol,
        condition: None,
        method: SlopeMethod::ClosedForm,
        closed_form_gap: Some(w.fd_error),
        error: None,
    };
    let h2 = H2 {
        pass: hs.kernel_matches_orbit,
        marginal: hs.marginal > 0,
        dim_ker: hs.dim_ker,
        tangent_dim: hs.tangent_dim,
        angles: hs.kernel_angles.clone(),
        angle_tol,
        ker_tol: hs.ker_tol,
        error: None,
    };
    let gap = hs.eigenvalues.iter().copied().find(|v| *v > hs.ker_tol);
    let h3 = H3 {
        pass: gap.is_some(),
        marginal: gap.is_some_and(|g| g <= 3.0 * hs.ker_tol),
        gap,
        gap_refined: None,
        refinement_ratio: None,
        ratio_tol: 0.0,
        error: None,
    };
    let h4 = H4 {
        pass: w.signature.p == hs.n_neg,
        marginal: h1.marginal || h2.marginal,
        p_d2w: Some(w.signature.p),
        n_hessian: Some(hs.n_neg),
    };
    let checks = Checks {
        h1_nondegenerate_w: h1,
        h2_kernel_equals_orbit: h2,
        h3_positive_gap: h3,
        h4_index_match: h4,
    };
    Certificate {
        schema: SCHEMA_VERSION,
        xi: r.state.xi.to_vec(),
        verdict: decide(&checks),
        gss: Gss {
            p_w_tilde: Some(w.p_tilde),
            subalgebra_dim: 1,
            applies: w.p_tilde == hs.n_neg,
        },
        spectrum: Some(SpectrumSummary {
            eigenvalues: hs.eigenvalues.clone(),
            n_neg: hs.n_neg,
            dim_ker: hs.dim_ker,
            ker_tol: hs.ker_tol,
            dimension: 6,
        }),
        slope: Some(SlopeSummary {
            m: 3,
            d2w: w.d2w.iter().flatten().copied().collect(),
            eigenvalues: w.eigenvalues.clone(),
            signature: w.signature,
        }),
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            model: "so3".into(),
            grid: None,
            h1: CheckProvenance {
                module: "so3",
                tolerance: w_tol,
                note: "closed-form slope matrix, checked against finite differences",
            },
            h2: CheckProvenance {
                module: "so3",
                tolerance: angle_tol,
                note: "6x6 brute-force kernel against the isotropy orbit tangent",
            },
            h3: CheckProvenance {
                module: "so3",
                tolerance: hs.ker_tol,
                note: "finite dimensional, no refinement",
            },
            h4: CheckProvenance {
                module: "so3",
                tolerance: hs.ker_tol,
                note: "positive slope index against Morse index",
            },
        },
        checks,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingCase {
    /// `delta > max(alpha, gamma)`.
    DeltaAboveMax,
    /// `delta < min(alpha, gamma)`.
    DeltaBelowMin,
}

/// The two criteria for the symmetric coupled soliton, from `int u^2` and
/// `int u L_delta^{-1} u`.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledCriteria {
    pub case: CouplingCase,
    pub zeta_sq: [f64; 2],
    pub omega_star: f64,
    pub d: usize,
    pub mass: f64,
    pub vk_integral: f64,
    pub vk_residual: f64,
    /// `det dF/domega` on the phase block.
    pub det: f64,
    /// `trace dF/domega` on the phase block.
    pub trace: f64,
    /// Stability condition for the case (det < 0, or det > 0 with trace < 0).
    pub criterion_holds: bool,
    /// Positive slope index implied by the phase block: 1 when det < 0, 2 when
    /// det > 0 and trace < 0.
    pub expected_p_d2w: Option<usize>,
    /// The d = 1 statement: always for case 1, iff the integral is negative for case 2.
    pub d1_stable: bool,
}

pub fn coupled_stability_criteria<T: Real>(prof: &Profile<T>) -> Result<CoupledCriteria> {
    let params = match prof.model {
        ModelParams::Coupled(cp) if prof.kind == ProfileKind::CoupledSoliton => cp,
        _ => return invalid("coupled criteria need a coupled soliton"),
    };
    let (z1, z2) = coupled_zeta_sq(&params)?;
    let (a, g, dl) = (
        to_f64(params.alpha),
        to_f64(params.gamma),
        to_f64(params.delta),
    );
    let case = if dl > a.max(g) {
        CouplingCase::DeltaAboveMax
    } else if dl < a.min(g) {
        CouplingCase::DeltaBelowMin
    } else {
        return invalid("delta must lie outside [min(alpha, gamma), max(alpha, gamma)]");
    };
    let vk = vk_integral(prof)?;
    let (z1, z2) = (to_f64(z1), to_f64(z2));
    let omega = to_f64(prof.omega[0]);
    let d = 1usize;
    let mass = to_f64(vk.mass);
    let b = to_f64(vk.value);
    let big_a = (1.0 - d as f64 / 2.0) * mass / (2.0 * omega);
    let s = z1 + z2;
    let det = z1 * z2 * big_a * b;
    let trace = (z1 * z1 + z2 * z2) / s * big_a + 2.0 * z1 * z2 / s * b;
    let criterion_holds = match case {
        CouplingCase::DeltaAboveMax => det < 0.0,
        CouplingCase::DeltaBelowMin => det > 0.0 && trace < 0.0,
    };
    let expected_p_d2w = if det < 0.0 {
        Some(1)
    } else if det > 0.0 && trace < 0.0 {
        Some(2)
    } else {
        None
    };
    let d1_stable = match case {
        CouplingCase::DeltaAboveMax => true,
        CouplingCase::DeltaBelowMin => b < 0.0,
    };
    Ok(CoupledCriteria {
        case,
        zeta_sq: [z1, z2],
        omega_star: omega,
        d,
        mass,
        vk_integral: b,
        vk_residual: to_f64(vk.residual),
        det,
        trace,
        criterion_holds,
        expected_p_d2w,
        d1_stable,
    })
}

impl CoupledCriteria {
    /// Whether a generic certificate agrees with these criteria.
    pub fn agrees_with(&self, cert: &Certificate) -> bool {
        let certified = cert.verdict == Verdict::CertifiedCoercive;
        let index_ok = match self.expected_p_d2w {
            Some(p) => cert.checks.h4_index_match.p_d2w == Some(p),
            None => true,
        };
        certified == self.d1_stable && index_ok
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

impl Certificate {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    pub fn text_report(&self) -> String {
        let c = &self.checks;
        let mut s = String::new();
        let _ = writeln!(s, "model    {}", self.provenance.model);
        if let Some(g) = &self.provenance.grid {
            let _ = writeln!(
                s,
                "grid     {} extent {} N {}",
                g.kind, g.extent, g.n_points
            );
        }
        let _ = writeln!(s, "xi       {:?}", self.xi);
        let h1 = &c.h1_nondegenerate_w;
        let _ = writeln!(
            s,
            "h1 nondegenerate W     {:<4} eigenvalues {:?} (tol {:.1e})",
            yes(h1.pass),
            h1.eigenvalues,
            h1.z_tol
        );
        let h2 = &c.h2_kernel_equals_orbit;
        let _ = writeln!(
            s,
            "h2 kernel = orbit      {:<4} dim ker {} vs {} (ker tol {:.1e})",
            yes(h2.pass),
            h2.dim_ker,
            h2.tangent_dim,
            h2.ker_tol
        );
        let h3 = &c.h3_positive_gap;
        let _ = writeln!(
            s,
            "h3 positive gap        {:<4} gap {:?} refined {:?}",
            yes(h3.pass),
            h3.gap,
            h3.gap_refined
        );
        let h4 = &c.h4_index_match;
        let _ = writeln!(
            s,
            "h4 index match         {:<4} p(D2W) {:?} n(D2L) {:?}",
            yes(h4.pass),
            h4.p_d2w,
            h4.n_hessian
        );
        let _ = writeln!(
            s,
            "restricted index       p {:?} over {} generators, stronger hypothesis {}",
            self.gss.p_w_tilde,
            self.gss.subalgebra_dim,
            if self.gss.applies { "holds" } else { "fails" }
        );
        let _ = writeln!(s, "verdict  {}", self.verdict.label());
        s
    }
}
