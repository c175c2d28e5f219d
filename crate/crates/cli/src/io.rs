//! Profile files and report emission.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use vkstab_core::{invariants_of, Field, Grid, GridKind, ModelParams, Profile, ProfileKind};

use crate::config::ModelSection;

pub const PROFILE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub kind: String,
    pub extent: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantsDoc {
    pub energy: f64,
    pub f: Vec<f64>,
}

/// On-disk profile. `values` holds one interleaved `re, im, re, im, ...`
/// array per component.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub schema: u32,
    pub kind: String,
    pub model: ModelSection,
    pub grid: GridDoc,
    pub xi: Vec<f64>,
    pub omega: Vec<f64>,
    pub velocity: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub residual: f64,
    pub invariants: InvariantsDoc,
}

pub fn kind_name(k: ProfileKind) -> &'static str {
    match k {
        ProfileKind::Soliton => "soliton",
        ProfileKind::CoupledSoliton => "coupled_soliton",
        ProfileKind::PlaneWave => "plane_wave",
    }
}

fn kind_from(s: &str) -> Result<ProfileKind> {
    Ok(match s {
        "soliton" => ProfileKind::Soliton,
        "coupled_soliton" => ProfileKind::CoupledSoliton,
        "plane_wave" => ProfileKind::PlaneWave,
        _ => bail!("unknown profile kind `{s}`"),
    })
}

pub fn grid_name(k: GridKind) -> &'static str {
    match k {
        GridKind::Line => "line",
        GridKind::Periodic => "periodic",
    }
}

pub fn grid_kind(s: &str) -> Result<GridKind> {
    Ok(match s {
        "line" => GridKind::Line,
        "periodic" | "torus" => GridKind::Periodic,
        _ => bail!("unknown grid kind `{s}` (line|periodic)"),
    })
}

pub fn model_section(m: &ModelParams<f64>) -> ModelSection {
    match *m {
        ModelParams::SingleNls { p, d } => ModelSection {
            kind: Some("nls".into()),
            p: Some(p),
            d: Some(d),
            ..Default::default()
        },
        ModelParams::Coupled(c) => ModelSection {
            kind: Some("coupled".into()),
            alpha: Some(c.alpha),
            gamma: Some(c.gamma),
            delta: Some(c.delta),
            beta: Some(c.beta),
            k: Some(c.k),
            ..Default::default()
        },
    }
}

pub fn to_doc(p: &Profile<f64>) -> Result<ProfileDoc> {
    let inv = invariants_of(&p.field, &p.model)?;
    let g = p.grid();
    Ok(ProfileDoc {
        schema: PROFILE_SCHEMA,
        kind: kind_name(p.kind).into(),
        model: model_section(&p.model),
        grid: GridDoc {
            kind: grid_name(g.kind()).into(),
            extent: g.extent(),
            n: g.n_points(),
        },
        xi: p.xi.clone(),
        omega: p.omega.clone(),
        velocity: p.velocity.clone(),
        values: p
            .field
            .components()
            .iter()
            .map(|c| c.iter().flat_map(|z| [z.re, z.im]).collect())
            .collect(),
        residual: p.residual(),
        invariants: InvariantsDoc {
            energy: inv.energy,
            f: inv.f,
        },
    })
}

pub fn from_doc(doc: ProfileDoc) -> Result<Profile<f64>> {
    if doc.schema != PROFILE_SCHEMA {
        bail!("unsupported profile schema {}", doc.schema);
    }
    let model = crate::commands::model_params(&doc.model)?;
    let grid = Arc::new(Grid::new(
        grid_kind(&doc.grid.kind)?,
        doc.grid.extent,
        doc.grid.n,
    )?);
    let mut comps = Vec::with_capacity(doc.values.len());
    for v in &doc.values {
        if v.len() != 2 * doc.grid.n {
            bail!(
                "profile values must hold 2 n = {} numbers per component",
                2 * doc.grid.n
            );
        }
        comps.push(v.chunks(2).map(|c| Complex::new(c[0], c[1])).collect());
    }
    let field = Field::new(grid, comps)?;
    if field.n_components() != model.n_components() {
        bail!(
            "profile has {} components, model needs {}",
            field.n_components(),
            model.n_components()
        );
    }
    Ok(Profile {
        field,
        xi: doc.xi,
        omega: doc.omega,
        velocity: doc.velocity,
        model,
        kind: kind_from(&doc.kind)?,
    })
}

pub fn read_profile(path: &Path) -> Result<Profile<f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read profile {}", path.display()))?;
    let doc: ProfileDoc = serde_json::from_str(&text).context("malformed profile file")?;
    from_doc(doc)
}

/// Pretty JSON with sorted keys.
pub fn json_string<S: Serialize>(v: &S) -> Result<String> {
    let v = serde_json::to_value(v)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Write to `out`, or stdout when absent.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
