//! Declarative experiment configuration.
//!
//! An experiment is a single TOML document declaring the model, the discount
//! law, the attitude function, the strike, evaluation grids, an optional
//! Monte Carlo block, and the artifacts to write. The schema is strict:
//! unknown keys are rejected so typos surface as parse errors rather than
//! silently ignored settings.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::diffusion::DiffusionSpec;
use crate::error::{Result, SolverError};
use crate::mc::{McConfig, Scheme};
use crate::preference::{AttitudeFunction, DiscountLaw};
use crate::valuation::ValuationContext;

/// Artifact names a config may request.
pub const KNOWN_ARTIFACTS: [&str; 5] =
    ["conditions", "threshold", "verdict", "barrier_map", "mc_check"];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelDecl,
    pub law: LawDecl,
    pub attitude: AttitudeDecl,
    #[serde(default = "default_strike")]
    pub strike: f64,
    #[serde(default)]
    pub grids: GridsDecl,
    #[serde(default)]
    pub mc: Option<McDecl>,
    #[serde(default)]
    pub outputs: OutputsDecl,
    /// Skip precondition checks and fall back to scan-based solvers.
    #[serde(default)]
    pub force: bool,
    /// Accept r = 0 atoms, reading their transforms as the r -> 0 limit.
    #[serde(default)]
    pub zero_rate_transform_limit: bool,
}

fn default_strike() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelDecl {
    Gbm { mu: f64, sigma: f64 },
    Bessel { nu: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawDecl {
    /// Inline (rate, weight) or (exponent, weight) pairs.
    #[serde(default)]
    pub atoms: Option<Vec<(f64, f64)>>,
    /// CSV file of rate, weight rows as an alternative to inline atoms.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Atoms are decreasing-solution exponents f rather than rates (GBM only).
    #[serde(default)]
    pub f_space: bool,
    /// Rescale weights to total mass one instead of requiring it.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttitudeDecl {
    Linear,
    Power { p: f64 },
    Log,
    Capped { alpha: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDecl {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl GridDecl {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.start < self.stop) || self.n < 2 {
            return Err(SolverError::Config(format!(
                "grids.{name}: need start < stop and n >= 2, got start={}, stop={}, n={}",
                self.start, self.stop, self.n
            )));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.start + h * i as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsDecl {
    #[serde(default = "default_x_grid")]
    pub x: GridDecl,
    #[serde(default = "default_a_grid")]
    pub a: GridDecl,
    /// Rates probed by the model-condition checker.
    #[serde(default = "default_r_grid")]
    pub r: GridDecl,
}

fn default_x_grid() -> GridDecl {
    GridDecl { start: 0.01, stop: 2.0, n: 401 }
}

fn default_a_grid() -> GridDecl {
    GridDecl { start: 0.0, stop: 1.0, n: 401 }
}

fn default_r_grid() -> GridDecl {
    GridDecl { start: 0.01, stop: 4.0, n: 40 }
}

impl Default for GridsDecl {
    fn default() -> Self {
        GridsDecl {
            x: default_x_grid(),
            a: default_a_grid(),
            r: default_r_grid(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDecl {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub scheme: SchemeDecl,
    /// Continuity-corrected barrier monitoring (see the mc module docs).
    #[serde(default)]
    pub barrier_correction: bool,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeDecl {
    Euler,
    ExactGbmIncrement,
    ExactBessel3,
}

impl From<SchemeDecl> for Scheme {
    fn from(s: SchemeDecl) -> Scheme {
        match s {
            SchemeDecl::Euler => Scheme::Euler,
            SchemeDecl::ExactGbmIncrement => Scheme::ExactGbmIncrement,
            SchemeDecl::ExactBessel3 => Scheme::ExactBessel3,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsDecl {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_artifacts")]
    pub artifacts: Vec<String>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_artifacts() -> Vec<String> {
    vec!["threshold".into(), "verdict".into()]
}

impl Default for OutputsDecl {
    fn default() -> Self {
        OutputsDecl {
            dir: default_out_dir(),
            artifacts: default_artifacts(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_str_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| SolverError::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SolverError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_str_toml(&text)
    }

    fn validate(&self) -> Result<()> {
        match (&self.law.atoms, &self.law.csv) {
            (Some(_), Some(_)) => {
                return Err(SolverError::Config(
                    "law: declare either inline atoms or a csv file, not both".into(),
                ))
            }
            (None, None) => {
                return Err(SolverError::Config(
                    "law: one of atoms or csv is required".into(),
                ))
            }
            _ => {}
        }
        if self.law.csv.is_some() && self.law.f_space {
            return Err(SolverError::Config(
                "law: csv laws are rate-space; f_space applies to inline atoms only".into(),
            ));
        }
        self.grids.x.validate("x")?;
        self.grids.a.validate("a")?;
        self.grids.r.validate("r")?;
        for name in &self.outputs.artifacts {
            if !KNOWN_ARTIFACTS.contains(&name.as_str()) {
                return Err(SolverError::Config(format!(
                    "outputs.artifacts: unknown artifact {name:?}; known: {KNOWN_ARTIFACTS:?}"
                )));
            }
        }
        if self.outputs.artifacts.contains(&"mc_check".to_string()) && self.mc.is_none() {
            return Err(SolverError::Config(
                "outputs.artifacts requests mc_check but no [mc] block is declared".into(),
            ));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<DiffusionSpec<f64>> {
        match self.model {
            ModelDecl::Gbm { mu, sigma } => DiffusionSpec::gbm(mu, sigma),
            ModelDecl::Bessel { nu } => DiffusionSpec::bessel(nu),
        }
    }

    pub fn build_law(&self) -> Result<DiscountLaw<f64>> {
        if let Some(csv) = &self.law.csv {
            return DiscountLaw::from_csv_path(csv);
        }
        let atoms = self.law.atoms.as_ref().expect("validated");
        if self.law.normalize {
            DiscountLaw::from_atoms_normalized(atoms, self.law.f_space)
        } else {
            DiscountLaw::from_atoms(atoms, self.law.f_space)
        }
    }

    pub fn build_attitude(&self) -> Result<AttitudeFunction<f64>> {
        match self.attitude {
            AttitudeDecl::Linear => Ok(AttitudeFunction::Linear),
            AttitudeDecl::Power { p } => AttitudeFunction::power(p),
            AttitudeDecl::Log => Ok(AttitudeFunction::Log),
            AttitudeDecl::Capped { alpha } => AttitudeFunction::capped(alpha),
        }
    }

    pub fn build_context(&self) -> Result<ValuationContext<f64>> {
        ValuationContext::with_options(
            self.build_model()?,
            self.build_law()?,
            self.build_attitude()?,
            self.strike,
            None,
            self.zero_rate_transform_limit,
        )
    }

    pub fn mc_config(&self) -> Result<Option<McConfig>> {
        match &self.mc {
            None => Ok(None),
            Some(d) => {
                let cfg = McConfig::new(d.n_paths, d.dt, d.horizon, d.seed, d.scheme.into())?;
                Ok(Some(if d.barrier_correction {
                    cfg.with_barrier_correction()
                } else {
                    cfg
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        kind = "gbm"
        mu = 0.02
        sigma = 0.3

        [law]
        atoms = [[1.0, 0.5], [2.0, 0.5]]
        f_space = true

        [attitude]
        kind = "power"
        p = 0.5
    "#;

    #[test]
    fn minimal_config_parses_and_builds() {
        let cfg = ExperimentConfig::from_str_toml(MINIMAL).unwrap();
        assert_eq!(cfg.strike, 1.0);
        assert!(!cfg.force);
        let ctx = cfg.build_context().unwrap();
        assert_eq!(ctx.rate_law().atoms().len(), 2);
        assert_eq!(cfg.grids.x.to_vec().len(), 401);
        assert!(cfg.mc_config().unwrap().is_none());
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let text = MINIMAL.replace("p = 0.5", "p = 0.5\n        typo_key = 1");
        match ExperimentConfig::from_str_toml(&text) {
            Err(SolverError::Config(msg)) => assert!(msg.contains("typo_key"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn law_requires_exactly_one_source() {
        let text = MINIMAL.replace("atoms = [[1.0, 0.5], [2.0, 0.5]]", "");
        assert!(matches!(
            ExperimentConfig::from_str_toml(&text),
            Err(SolverError::Config(_))
        ));
        let text = MINIMAL.replace(
            "f_space = true",
            "csv = \"law.csv\"\n        f_space = false",
        );
        assert!(matches!(
            ExperimentConfig::from_str_toml(&text),
            Err(SolverError::Config(_))
        ));
    }

    #[test]
    fn grid_and_artifact_validation() {
        let text = format!(
            "{MINIMAL}\n[grids]\nx = {{ start = 1.0, stop = 0.5, n = 10 }}\n\
             a = {{ start = 0.0, stop = 1.0, n = 11 }}\n\
             r = {{ start = 0.1, stop = 2.0, n = 5 }}\n"
        );
        match ExperimentConfig::from_str_toml(&text) {
            Err(SolverError::Config(msg)) => assert!(msg.contains("grids.x"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = format!("{MINIMAL}\n[outputs]\nartifacts = [\"nonsense\"]\n");
        match ExperimentConfig::from_str_toml(&text) {
            Err(SolverError::Config(msg)) => assert!(msg.contains("nonsense"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = format!("{MINIMAL}\n[outputs]\nartifacts = [\"mc_check\"]\n");
        assert!(ExperimentConfig::from_str_toml(&text).is_err());
    }

    #[test]
    fn mc_block_maps_to_mc_config() {
        let text = format!(
            "{MINIMAL}\n[mc]\nn_paths = 2000\ndt = 1e-3\nhorizon = 5.0\n\
             scheme = \"exact_gbm_increment\"\n"
        );
        let cfg = ExperimentConfig::from_str_toml(&text).unwrap();
        let mc = cfg.mc_config().unwrap().unwrap();
        assert_eq!(mc.n_paths, 2000);
        assert_eq!(mc.seed, 1);
        assert!(matches!(mc.scheme, Scheme::ExactGbmIncrement));
    }

    #[test]
    fn csv_law_round_trips(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("law.csv");
        std::fs::write(&path, "# rate,weight\n0.5,0.25\n1.5,0.75\n").unwrap();
        let text = MINIMAL
            .replace(
                "atoms = [[1.0, 0.5], [2.0, 0.5]]",
                &format!("csv = {:?}", path.to_str().unwrap()),
            )
            .replace("f_space = true", "f_space = false");
        let cfg = ExperimentConfig::from_str_toml(&text).unwrap();
        let law = cfg.build_law().unwrap();
        assert_eq!(law.atoms().len(), 2);
        assert!((law.rho_star() - 1.5).abs() < 1e-15);
    }
}
