use std::collections::BTreeMap;

use super::config::{Level, StudyConfig};
use crate::ecr::{assemble_condensed, EcrSpace};
use crate::eigen::{EigenPair, EigenSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::mesh::DirichletSpec;
use crate::two_grid::{check_lower_bound_pairing, two_grid_eigen};
use crate::wg::{assemble_pencil, lame_parameters, WgParams, WgSpace};

/// One `(nu, level)` cell of a study.
pub struct LevelJob<'a> {
    pub config: &'a StudyConfig,
    pub nu: f64,
    /// Zero-based position in the level list.
    pub index: usize,
    pub level: Level,
    pub solver: &'a dyn EigenSolver,
    pub opts: SolveOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutcome {
    /// Coarse cell size, two-grid only.
    pub coarse_h: Option<f64>,
    pub h: f64,
    pub gammas: Vec<f64>,
    /// Residual of the eigenpair behind each value. For the two-grid method
    /// this is the coarse pair; the corrected function is not an eigenvector.
    pub residuals: Vec<f64>,
    pub lower_bound_regime: Option<bool>,
}

impl LevelOutcome {
    fn direct(h: f64, pairs: &[EigenPair]) -> Self {
        Self {
            coarse_h: None,
            h,
            gammas: pairs.iter().map(|p| p.gamma).collect(),
            residuals: pairs.iter().map(|p| p.residual).collect(),
            lower_bound_regime: None,
        }
    }
}

pub trait EigenMethod: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether `k` and `delta` mean anything to this method.
    fn uses_wg_params(&self) -> bool;

    /// Method-specific checks on top of [`StudyConfig::validate`].
    fn validate(&self, _config: &StudyConfig) -> Result<()> {
        Ok(())
    }

    fn run_level(&self, job: &LevelJob<'_>) -> Result<LevelOutcome>;
}

pub struct WgDirect;
pub struct WgTwoGrid;
pub struct Ecr;

impl EigenMethod for WgDirect {
    fn name(&self) -> &'static str {
        "wg_direct"
    }

    fn uses_wg_params(&self) -> bool {
        true
    }

    fn validate(&self, config: &StudyConfig) -> Result<()> {
        if config.levels.iter().any(|l| matches!(l, Level::Pair(_))) {
            return Err(Error::config("wg_direct takes plain mesh levels, not coarse/refinement pairs"));
        }
        Ok(())
    }

    fn run_level(&self, job: &LevelJob<'_>) -> Result<LevelOutcome> {
        let c = job.config;
        let mesh = c.domain.build(job.level.coarse_cells(), c.dirichlet_spec)?;
        let h = mesh.cell_size();
        let space = WgSpace::new(mesh, c.k)?;
        let params = WgParams::from_material(c.young, job.nu, c.delta)?;
        let pencil = assemble_pencil(&space, &params)?;
        let pairs = job.solver.smallest(&pencil.a, &pencil.b, c.m, &job.opts)?;
        Ok(LevelOutcome::direct(h, &pairs))
    }
}

impl EigenMethod for WgTwoGrid {
    fn name(&self) -> &'static str {
        "wg_two_grid"
    }

    fn uses_wg_params(&self) -> bool {
        true
    }

    fn validate(&self, config: &StudyConfig) -> Result<()> {
        if config.levels.iter().enumerate().any(|(i, l)| l.refinements(i) == 0) {
            return Err(Error::config("two-grid levels need at least one refinement"));
        }
        Ok(())
    }

    fn run_level(&self, job: &LevelJob<'_>) -> Result<LevelOutcome> {
        let c = job.config;
        let coarse = WgSpace::new(c.domain.build(job.level.coarse_cells(), c.dirichlet_spec)?, c.k)?;
        let params = WgParams::from_material(c.young, job.nu, c.delta)?;
        let run = two_grid_eigen(&coarse, job.level.refinements(job.index), &params, c.m, job.solver, &job.opts)?;
        let coarse_h = coarse.mesh().cell_size();
        let h = run.fine_space.mesh().cell_size();
        Ok(LevelOutcome {
            coarse_h: Some(coarse_h),
            h,
            gammas: run.results.iter().map(|r| r.gamma).collect(),
            residuals: run.results.iter().map(|r| r.coarse.residual).collect(),
            lower_bound_regime: Some(check_lower_bound_pairing(c.k, c.delta, c.delta, coarse_h, h)),
        })
    }
}

impl EigenMethod for Ecr {
    fn name(&self) -> &'static str {
        "ecr"
    }

    fn uses_wg_params(&self) -> bool {
        false
    }

    fn validate(&self, config: &StudyConfig) -> Result<()> {
        if config.dirichlet_spec != DirichletSpec::All {
            return Err(Error::config("the ECR method needs the whole boundary clamped"));
        }
        if config.levels.iter().any(|l| matches!(l, Level::Pair(_))) {
            return Err(Error::config("ecr takes plain mesh levels, not coarse/refinement pairs"));
        }
        Ok(())
    }

    fn run_level(&self, job: &LevelJob<'_>) -> Result<LevelOutcome> {
        let c = job.config;
        let mesh = c.domain.build(job.level.coarse_cells(), c.dirichlet_spec)?;
        let h = mesh.cell_size();
        let space = EcrSpace::new(mesh)?;
        let (lambda, mu) = lame_parameters(c.young, job.nu)?;
        let pencil = assemble_condensed(&space, mu, lambda)?;
        let pairs = job.solver.smallest(&pencil.a, &pencil.b, c.m, &job.opts)?;
        Ok(LevelOutcome::direct(h, &pairs))
    }
}

/// Name -> discretization lookup.
pub struct MethodRegistry {
    entries: BTreeMap<&'static str, Box<dyn EigenMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(WgDirect));
        r.register(Box::new(WgTwoGrid));
        r.register(Box::new(Ecr));
        r
    }

    pub fn register(&mut self, method: Box<dyn EigenMethod>) {
        self.entries.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn EigenMethod> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::config(format!("unknown method `{name}` (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
