use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowOptions, MAX_TOL, MIN_TOL};
use crate::generator::{default_domain, GeneratingPerturbation, GeneratorFamily};
use crate::isotopy::IsotopyFamily;
use crate::numerics::bump::BumpProfile;
use crate::suspension::{NormGrids, SuspendedHamiltonian};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Degrees of freedom of the suspended system; maps act on `R^{2d-2}`.
    pub d: usize,
    pub rho: f64,
    /// Energy plateau fraction `ν`.
    pub nu: f64,
    /// Isotopy rise width `ξ`.
    pub xi: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 2,
            rho: 1.0,
            nu: 0.5,
            xi: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub family: GeneratorFamily,
    pub epsilon: f64,
    /// Radius of the cutoff `χ`; `None` means `ρ`.
    pub cutoff_radius: Option<f64>,
    /// Configs with `|ε|` above this are rejected before anything runs.
    pub epsilon_cap: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            family: GeneratorFamily::Cubic,
            epsilon: 0.05,
            cutoff_radius: None,
            epsilon_cap: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Section points per axis, on a tensor grid in the `ρ/2`-ball.
    pub section_points: usize,
    /// Trajectories sampled for energy and closed-form checks.
    pub trajectories: usize,
    /// Random `(α, point)` pairs for the isotopy and `K` checks.
    pub isotopy_samples: usize,
    pub map_points: usize,
    pub block_points: usize,
    pub profile_samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let norms = NormGrids::default();
        GridConfig {
            section_points: 10,
            trajectories: 100,
            isotopy_samples: 1000,
            map_points: norms.map_points,
            block_points: norms.block_points,
            profile_samples: norms.profile_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub tol: f64,
    /// Output samples per trajectory.
    pub samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            tol: 1e-10,
            samples: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilon: Vec<f64>,
    pub rho: Vec<f64>,
    pub nu: Vec<f64>,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub generator: GeneratorConfig,
    pub grids: GridConfig,
    pub integrator: IntegratorConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 20240917,
            output_dir: PathBuf::from("out"),
            model: ModelConfig::default(),
            generator: GeneratorConfig::default(),
            grids: GridConfig::default(),
            integrator: IntegratorConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if !(2..=4).contains(&m.d) {
            return Err(Error::Config(format!("d must be in 2..=4, got {}", m.d)));
        }
        positive("rho", m.rho)?;
        if !(m.nu > 0.0 && m.nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1), got {}", m.nu)));
        }
        if !(m.xi > 0.0 && m.xi <= 1.0) {
            return Err(Error::Config(format!("xi must lie in (0, 1], got {}", m.xi)));
        }
        let g = &self.generator;
        positive("epsilon_cap", g.epsilon_cap)?;
        if !g.epsilon.is_finite() || g.epsilon.abs() > g.epsilon_cap {
            return Err(Error::Config(format!(
                "epsilon {} exceeds the admissibility cap {}",
                g.epsilon, g.epsilon_cap
            )));
        }
        if let Some(r) = g.cutoff_radius {
            positive("cutoff_radius", r)?;
        }
        let t = self.integrator.tol;
        if !(MIN_TOL..=MAX_TOL).contains(&t) {
            return Err(Error::Config(format!(
                "tol must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {t:e}"
            )));
        }
        if self.integrator.samples < 2 {
            return Err(Error::Config("integrator samples must be at least 2".into()));
        }
        let gr = &self.grids;
        for (name, v) in [
            ("section_points", gr.section_points),
            ("trajectories", gr.trajectories),
            ("isotopy_samples", gr.isotopy_samples),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, list) in [
            ("sweep.epsilon", &self.sweep.epsilon),
            ("sweep.rho", &self.sweep.rho),
        ] {
            for v in list {
                positive(name, *v)?;
            }
        }
        for v in &self.sweep.epsilon {
            if *v > g.epsilon_cap {
                return Err(Error::Config(format!(
                    "sweep epsilon {v} exceeds the admissibility cap {}",
                    g.epsilon_cap
                )));
            }
        }
        for v in &self.sweep.nu {
            if !(*v > 0.0 && *v < 1.0) {
                return Err(Error::Config(format!("sweep nu must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn half_dim(&self) -> usize {
        self.model.d - 1
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.generator.cutoff_radius.unwrap_or(self.model.rho)
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            tol: self.integrator.tol,
            samples: self.integrator.samples,
        }
    }

    pub fn norm_grids(&self) -> NormGrids {
        NormGrids {
            map_points: self.grids.map_points,
            block_points: self.grids.block_points,
            profile_samples: self.grids.profile_samples,
        }
    }

    /// Copy with `ε`, `ρ`, `ν` replaced (sweep rows).
    pub fn with_parameters(&self, epsilon: f64, rho: f64, nu: f64) -> Self {
        let mut c = self.clone();
        c.generator.epsilon = epsilon;
        c.model.rho = rho;
        c.model.nu = nu;
        c
    }

    /// Generator, measured against the contraction cap over the `ρ`-ball.
    pub fn perturbation(&self) -> Result<GeneratingPerturbation> {
        let n = self.half_dim();
        let g = &self.generator;
        if g.epsilon == 0.0 {
            return Ok(GeneratingPerturbation::zero(n));
        }
        let field = g
            .family
            .build(n, g.epsilon, self.cutoff_radius(), self.seed)
            .map_err(|e| e.at("generating_isotopy", "build_generator"))?;
        let domain = default_domain(n, self.model.rho.max(self.cutoff_radius()))
            .map_err(|e| e.at("generating_isotopy", "build_generator"))?;
        GeneratingPerturbation::measure(Arc::new(field), &domain)
            .map_err(|e| e.at("generating_isotopy", "check_contraction"))
    }

    pub fn isotopy(&self) -> Result<IsotopyFamily> {
        let v = self.perturbation()?;
        let profile =
            BumpProfile::alpha(self.model.xi).map_err(|e| e.at("core_numerics", "alpha_profile"))?;
        IsotopyFamily::new(v, profile).map_err(|e| e.at("generating_isotopy", "isotopy"))
    }

    pub fn hamiltonian(&self) -> Result<SuspendedHamiltonian> {
        let iso = self.isotopy()?;
        SuspendedHamiltonian::new(iso, self.model.nu, self.model.rho)
            .map_err(|e| e.at("suspension", "suspended_hamiltonian"))
    }
}
