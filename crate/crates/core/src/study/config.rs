use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{build_lshape, build_unit_square, DirichletSpec, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    UnitSquare,
    LShape,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::UnitSquare => "unit_square",
            Domain::LShape => "l_shape",
        }
    }

    pub fn build(self, n: usize, dirichlet: DirichletSpec) -> Result<Mesh> {
        match self {
            Domain::UnitSquare => build_unit_square(n, dirichlet),
            Domain::LShape => build_lshape(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Markdown,
}

/// One mesh level: `n` cells per unit length, or a coarse `n` with an
/// explicit refinement count for the two-grid method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Cells(usize),
    Pair(LevelPair),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelPair {
    pub coarse: usize,
    pub refinements: usize,
}

impl Level {
    pub fn coarse_cells(self) -> usize {
        match self {
            Level::Cells(n) => n,
            Level::Pair(p) => p.coarse,
        }
    }

    /// Refinement count for level `index` (zero based). Bare `n` entries
    /// pair `H = 1/n` with `index + 1` refinements: 8 -> 16, 16 -> 64, 32 -> 256.
    pub fn refinements(self, index: usize) -> usize {
        match self {
            Level::Cells(_) => index + 1,
            Level::Pair(p) => p.refinements,
        }
    }
}

fn default_young() -> f64 {
    1.0
}
fn default_k() -> usize {
    1
}
fn default_delta() -> f64 {
    0.1
}
fn default_m() -> usize {
    5
}
fn default_tol() -> f64 {
    crate::eigen::DEFAULT_TOL
}
fn default_dirichlet() -> DirichletSpec {
    DirichletSpec::All
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub method: String,
    pub domain: Domain,
    #[serde(default = "default_dirichlet")]
    pub dirichlet_spec: DirichletSpec,
    #[serde(rename = "E", default = "default_young")]
    pub young: f64,
    pub nu: Vec<f64>,
    /// Polynomial degree, WG only.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Stabilizer exponent shift, WG only.
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub levels: Vec<Level>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub format: Format,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Range checks shared by every method.
    pub fn validate(&self) -> Result<()> {
        if self.nu.is_empty() {
            return Err(Error::config("nu list is empty"));
        }
        if let Some(nu) = self.nu.iter().find(|&&nu| !(nu > 0.0 && nu < 0.5)) {
            return Err(Error::config(format!("Poisson ratio {nu} outside (0, 0.5)")));
        }
        if !(self.young > 0.0 && self.young.is_finite()) {
            return Err(Error::config("E must be positive"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if self.m == 0 {
            return Err(Error::config("m must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("tol must lie in (0, 1)"));
        }
        if self.levels.is_empty() {
            return Err(Error::config("levels list is empty"));
        }
        if self.levels.iter().any(|l| l.coarse_cells() == 0) {
            return Err(Error::config("mesh levels need n >= 1"));
        }
        if self.domain == Domain::LShape && self.dirichlet_spec != DirichletSpec::All {
            return Err(Error::config("the L-shape is clamped on the whole boundary"));
        }
        if self.dirichlet_spec == DirichletSpec::Nothing {
            return Err(Error::config("at least one boundary edge must be clamped"));
        }
        Ok(())
    }
}
