use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod io;

use config::{Overrides, KEYS_HELP};

/// Relative equilibria and stability certificates for NLS-type systems.
#[derive(Parser, Debug)]
#[command(name = "vkstab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve for an equilibrium profile and write it as JSON.
    #[command(after_help = KEYS_HELP)]
    Profile(FieldArgs),
    /// Low spectrum, Morse index and kernel of the Lyapunov Hessian.
    #[command(after_help = KEYS_HELP)]
    Spectrum(FieldArgs),
    /// Slope matrix D2W and its signature.
    #[command(after_help = KEYS_HELP)]
    Slope(FieldArgs),
    /// Run every check and emit a certificate.
    #[command(after_help = KEYS_HELP)]
    Certify(FieldArgs),
    /// Per-mode table for a plane wave on the torus.
    #[command(after_help = KEYS_HELP)]
    Planewave(PlaneWaveArgs),
    /// Perturb a profile, integrate, and track the orbit distance.
    #[command(after_help = KEYS_HELP)]
    Evolve(EvolveArgs),
    /// Circular orbit of the rotor example with its index report.
    #[command(after_help = KEYS_HELP)]
    So3(So3Args),
}

#[derive(Args, Debug)]
struct Common {
    /// INI or JSON config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Seed for random perturbations.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// nls or coupled.
    #[arg(long = "model", value_name = "KIND")]
    model_kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// line or periodic.
    #[arg(long = "grid", value_name = "KIND")]
    grid_kind: Option<String>,
    /// Half-width on the line, length on the torus.
    #[arg(long, allow_hyphen_values = true)]
    extent: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    fd_step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ker_tol: Option<f64>,
    #[arg(long)]
    n_eigs: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    angle_tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gap_ratio_tol: Option<f64>,
    /// Compare the positive gap against a doubled grid.
    #[arg(long, value_name = "BOOL")]
    refine: Option<bool>,
    /// fd or closed.
    #[arg(long)]
    slope: Option<String>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    velocity: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    zeta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    zeta2: Option<f64>,
    /// Load the profile from a file written by `profile`.
    #[arg(long)]
    from: Option<String>,
}

#[derive(Args, Debug)]
struct FieldArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    profile: ProfileArgs,
}

#[derive(Args, Debug)]
struct PlaneWaveArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long)]
    nmax: Option<usize>,
    /// Also write the table as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tend: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// random, mode or kernel.
    #[arg(long)]
    perturbation: Option<String>,
    #[arg(long)]
    mode: Option<usize>,
    #[arg(long)]
    modes: Option<usize>,
    /// Energy and momentum CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Raw snapshot dump.
    #[arg(long)]
    binary: Option<PathBuf>,
    /// Full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct So3Args {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega_pot: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tend: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// Perturbed-run CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

impl Common {
    fn apply(&self, o: &mut Overrides) {
        o.set("run", "seed", self.seed);
    }
}

impl FieldArgs {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        self.common.apply(&mut o);
        let m = &self.model;
        o.set("model", "kind", m.model_kind.clone());
        o.set("model", "p", m.p);
        o.set("model", "d", m.d);
        o.set("model", "alpha", m.alpha);
        o.set("model", "gamma", m.gamma);
        o.set("model", "delta", m.delta);
        o.set("model", "beta", m.beta);
        o.set("model", "k", m.k);
        let g = &self.grid;
        o.set("grid", "kind", g.grid_kind.clone());
        o.set("grid", "extent", g.extent);
        o.set("grid", "n", g.n);
        let s = &self.solver;
        o.set("solver", "tol", s.tol);
        o.set("solver", "fd_step", s.fd_step);
        o.set("solver", "ker_tol", s.ker_tol);
        o.set("solver", "n_eigs", s.n_eigs);
        o.set("solver", "angle_tol", s.angle_tol);
        o.set("solver", "gap_ratio_tol", s.gap_ratio_tol);
        o.set("solver", "refine", s.refine);
        o.set("solver", "slope", s.slope.clone());
        let p = &self.profile;
        o.set("profile", "omega", p.omega);
        o.set("profile", "velocity", p.velocity);
        o.set("profile", "zeta1", p.zeta1);
        o.set("profile", "zeta2", p.zeta2);
        o.set("profile", "from", p.from.clone());
        o
    }

    fn load(&self, extra: impl FnOnce(&mut Overrides)) -> Result<config::RunConfig> {
        let mut o = self.overrides();
        extra(&mut o);
        config::load(self.common.config.as_deref(), o)
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("VKSTAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .context("VKSTAB_THREADS must be a positive integer")?;
        if n == 0 {
            anyhow::bail!("VKSTAB_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    init_threads()?;
    match cli.cmd {
        Cmd::Profile(a) => commands::profile(&a.load(|_| ())?, a.common.out.as_deref()),
        Cmd::Spectrum(a) => commands::spectrum(&a.load(|_| ())?, a.common.out.as_deref()),
        Cmd::Slope(a) => commands::slope(&a.load(|_| ())?, a.common.out.as_deref()),
        Cmd::Certify(a) => commands::certify(&a.load(|_| ())?, a.common.out.as_deref()),
        Cmd::Planewave(a) => {
            let cfg = a.field.load(|o| o.set("planewave", "nmax", a.nmax))?;
            commands::planewave(&cfg, a.field.common.out.as_deref(), a.json.as_deref())
        }
        Cmd::Evolve(a) => {
            let cfg = a.field.load(|o| {
                o.set("evolve", "eps", a.eps);
                o.set("evolve", "dt", a.dt);
                o.set("evolve", "tend", a.tend);
                o.set("evolve", "stride", a.stride);
                o.set("evolve", "perturbation", a.perturbation.clone());
                o.set("evolve", "mode", a.mode);
                o.set("evolve", "modes", a.modes);
            })?;
            commands::evolve(
                &cfg,
                &commands::EvolveOutputs {
                    distances: a.field.common.out.as_deref(),
                    trajectory: a.trajectory.as_deref(),
                    binary: a.binary.as_deref(),
                    report: a.report.as_deref(),
                },
            )
        }
        Cmd::So3(a) => {
            let mut o = Overrides::default();
            a.common.apply(&mut o);
            o.set("so3", "rho", a.rho);
            o.set("so3", "alpha", a.alpha);
            o.set("so3", "omega_pot", a.omega_pot);
            o.set("so3", "eps", a.eps);
            o.set("so3", "dt", a.dt);
            o.set("so3", "tend", a.tend);
            o.set("so3", "stride", a.stride);
            let cfg = config::load(a.common.config.as_deref(), o)?;
            commands::so3(&cfg, a.common.out.as_deref(), a.trajectory.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
