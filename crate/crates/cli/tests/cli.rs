use std::path::Path;
use std::process::{Command, Output};

fn vkstab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vkstab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"));
    line[key.len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn profile_writes_file_and_reports_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = vkstab(
        dir.path(),
        &["profile", "--model", "nls", "--p", "3", "--omega", "-1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(field(&out, "residual") <= 1e-9, "{out}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("profile.json")).unwrap())
            .unwrap();
    assert_eq!(doc["grid"]["n"], 512);
    assert_eq!(doc["values"][0].as_array().unwrap().len(), 1024);
    assert_eq!(doc["kind"], "soliton");
}

#[test]
fn nonnegative_omega_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = vkstab(dir.path(), &["profile", "--omega", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("omega must be negative"));
}

#[test]
fn coupled_profile_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vkstab(
        dir.path(),
        &[
            "profile", "--model", "coupled", "--alpha", "1", "--gamma", "1", "--delta", "2",
            "--omega", "-1",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("zeta_sq")).unwrap();
    for v in line.split_whitespace().skip(1) {
        assert!((v.parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vkstab(dir.path(), &["certify", "--n", "256", "-o", "cert.json"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("verdict  certified_coercive"));
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cert.json")).unwrap())
            .unwrap();
    assert_eq!(cert["verdict"]["status"], "certified_coercive");

    let torus = [
        "certify", "--model", "coupled", "--grid", "periodic", "--alpha", "-1", "--gamma", "-1",
    ];
    let o = vkstab(dir.path(), &[&torus[..], &["--delta", "-2"]].concat());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("failed(h4)"));
    let o = vkstab(dir.path(), &[&torus[..], &["--delta", "-1.49975"]].concat());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn planewave_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = vkstab(
        dir.path(),
        &[
            "planewave",
            "--alpha",
            "-1",
            "--gamma",
            "-1",
            "--delta",
            "-0.5",
            "--nmax",
            "8",
            "-o",
            "modes.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict stable"));
    let csv = std::fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.starts_with("n,"));
}

#[test]
fn evolve_from_profile_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert!(vkstab(dir.path(), &["profile", "--n", "256"])
        .status
        .success());
    let run = |name: &str| {
        let o = vkstab(
            dir.path(),
            &[
                "evolve",
                "--from",
                "profile.json",
                "--eps",
                "1e-3",
                "--tend",
                "5",
                "--seed",
                "3",
                "-o",
                "d.csv",
                "--trajectory",
                "t.csv",
                "--report",
                name,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        assert!(field(&out, "max distance") <= 1e-2, "{out}");
        std::fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
    let t = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(t.starts_with("t,H,F1"));
}

#[test]
fn so3_report_indices() {
    let dir = tempfile::tempdir().unwrap();
    let o = vkstab(
        dir.path(),
        &["so3", "--rho", "1", "--alpha", "1", "-o", "so3.json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "p(D2W) "), 3.0);
    assert_eq!(field(&out, "p(D2W~)"), 1.0);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("so3.json")).unwrap())
            .unwrap();
    assert_eq!(doc["report"]["w"]["p_tilde"], 1);
}

#[test]
fn config_files_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.ini"),
        "[model]\nkind = nls\np = 4\n[grid]\nn = 256\n[profile]\nomega = -2\n",
    )
    .unwrap();
    let o = vkstab(dir.path(), &["profile", "-c", "run.ini", "--omega", "-1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("xi        [-1.0"));

    std::fs::write(dir.path().join("bad.ini"), "[model]\nomgea = -1\n").unwrap();
    let o = vkstab(dir.path(), &["profile", "-c", "bad.ini"]);
    assert_eq!(o.status.code(), Some(2));

    let o = vkstab(dir.path(), &["profile", "--tol", "-1e-9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("must be positive"));

    std::fs::write(dir.path().join("run.json"), r#"{"grid": {"n": 128}}"#).unwrap();
    let o = vkstab(
        dir.path(),
        &["profile", "-c", "run.json", "-o", "small.json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn help_lists_every_key() {
    let keys = [
        "kind",
        "p,",
        "d,",
        "alpha",
        "gamma",
        "delta",
        "beta",
        "k\n",
        "extent",
        "n\n",
        "tol",
        "fd_step",
        "ker_tol",
        "n_eigs",
        "angle_tol",
        "gap_ratio_tol",
        "refine",
        "slope",
        "omega,",
        "velocity",
        "zeta1",
        "zeta2",
        "from",
        "nmax",
        "eps",
        "dt",
        "tend",
        "stride",
        "perturbation",
        "mode,",
        "modes",
        "rho",
        "omega_pot",
        "seed",
    ];
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        "profile",
        "spectrum",
        "slope",
        "certify",
        "planewave",
        "evolve",
        "so3",
    ] {
        let o = vkstab(dir.path(), &[cmd, "--help"]);
        let h = stdout(&o);
        for k in keys {
            assert!(h.contains(k), "{cmd} help lacks {k:?}");
        }
    }
}
