//! Pipeline configuration file.
//!
//! A single TOML document with named sections. Every section except `[grid]`
//! has defaults; see `examples/config/twin.toml` for a complete file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ccr::CcrConfig;
use crate::error::{Error, Result};
use crate::grid::{eight_spot, read_relperm_csv, FluidModel, GridSpec, RelPermTable, WellSpec};
use crate::inversion::LocalizationConfig;
use crate::metrics::SsimConfig;
use crate::prior::PriorConfig;
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RockConfig {
    pub swc: f64,
    pub sor: f64,
    pub corey_water: f64,
    pub corey_oil: f64,
    pub krw_max: f64,
    pub kro_max: f64,
    pub table_points: usize,
    /// Tabulated `sw,krw,kro` CSV replacing the Corey curves.
    pub relperm_csv: Option<PathBuf>,
}

impl Default for RockConfig {
    fn default() -> Self {
        RockConfig {
            swc: 0.2,
            sor: 0.2,
            corey_water: 2.0,
            corey_oil: 2.0,
            krw_max: 1.0,
            kro_max: 1.0,
            table_points: 21,
            relperm_csv: None,
        }
    }
}

impl RockConfig {
    pub fn table(&self) -> Result<RelPermTable> {
        match &self.relperm_csv {
            Some(path) => read_relperm_csv(path, self.swc, self.sor),
            None => RelPermTable::corey(
                self.swc,
                self.sor,
                self.corey_water,
                self.corey_oil,
                self.krw_max,
                self.kro_max,
                self.table_points,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellLayout {
    EightSpot,
    List,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellsConfig {
    pub layout: WellLayout,
    /// Per-injector water rate for the eight-spot layout, STB/day.
    pub injection_rate: f64,
    /// Producer bottom-hole pressure for the eight-spot layout, psia.
    pub producer_bhp: f64,
    /// Explicit wells when `layout = "list"`.
    pub list: Vec<WellSpec>,
}

impl Default for WellsConfig {
    fn default() -> Self {
        WellsConfig {
            layout: WellLayout::EightSpot,
            injection_rate: 500.0,
            producer_bhp: 100.0,
            list: Vec::new(),
        }
    }
}

impl WellsConfig {
    pub fn wells(&self, grid: &GridSpec) -> Result<Vec<WellSpec>> {
        let wells = match self.layout {
            WellLayout::EightSpot => eight_spot(grid, self.injection_rate, self.producer_bhp),
            WellLayout::List => self.list.clone(),
        };
        if wells.is_empty() {
            return Err(Error::Config("no wells configured".into()));
        }
        for w in &wells {
            w.validate(grid)?;
        }
        let mut names: Vec<&str> = wells.iter().map(|w| w.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::Config("well names must be unique".into()));
        }
        Ok(wells)
    }
}

/// Noise model and assimilation window of the synthetic observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    /// Standard deviation as a fraction of the true value.
    pub relative_noise: f64,
    /// Absolute standard deviation floors per quantity.
    pub oil_floor: f64,
    pub water_floor: f64,
    pub water_cut_floor: f64,
    pub bhp_floor: f64,
    /// Fraction of the horizon whose report steps are assimilated.
    pub assimilation_fraction: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            relative_noise: 0.05,
            oil_floor: 1.0,
            water_floor: 1.0,
            water_cut_floor: 0.01,
            bhp_floor: 5.0,
            assimilation_fraction: 2.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardMode {
    /// Rates from the finite-volume simulator.
    Fvm,
    /// Simulator fields, producer rates from the CCR surrogate.
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSection {
    pub members: usize,
    pub max_iter: usize,
    pub localization: LocalizationConfig,
    pub forward: ForwardMode,
}

impl Default for InversionSection {
    fn default() -> Self {
        InversionSection {
            members: 100,
            max_iter: 20,
            localization: LocalizationConfig::default(),
            forward: ForwardMode::Fvm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    /// Simulator runs on fresh prior draws used as training data.
    pub runs: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        SurrogateSection { runs: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub ssim: SsimConfig,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            ssim: SsimConfig::default(),
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub grid: GridSpec,
    #[serde(default)]
    pub rock: RockConfig,
    #[serde(default)]
    pub fluid: FluidModel,
    #[serde(default)]
    pub wells: WellsConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub observations: ObservationConfig,
    #[serde(default)]
    pub ccr: CcrConfig,
    #[serde(default)]
    pub surrogate: SurrogateSection,
    #[serde(default)]
    pub inversion: InversionSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and validate; relative paths inside the file are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(csv) = &cfg.rock.relperm_csv {
            if csv.is_relative() {
                cfg.rock.relperm_csv = Some(base.join(csv));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.fluid.validate()?;
        if let Some(csv) = &self.rock.relperm_csv {
            if !csv.exists() {
                return Err(Error::MissingArtifact(csv.clone()));
            }
        }
        self.rock.table()?;
        self.wells.wells(&self.grid)?;
        self.sim.validate()?;
        self.prior.validate(&self.grid)?;
        self.ccr.validate()?;
        self.metrics.ssim.validate()?;
        let o = &self.observations;
        if !(o.relative_noise >= 0.0)
            || !(o.oil_floor > 0.0 && o.water_floor > 0.0 && o.water_cut_floor > 0.0 && o.bhp_floor > 0.0)
        {
            return Err(Error::Config("noise floors must be positive and relative noise >= 0".into()));
        }
        if !(o.assimilation_fraction > 0.0 && o.assimilation_fraction <= 1.0) {
            return Err(Error::Config("assimilation fraction must lie in (0, 1]".into()));
        }
        if self.assimilation_steps() == 0 {
            return Err(Error::Config("assimilation window contains no report step".into()));
        }
        if self.inversion.members < 2 {
            return Err(Error::Config("inversion needs at least two members".into()));
        }
        if self.inversion.localization.enabled && !(self.inversion.localization.radius > 0.0) {
            return Err(Error::Config("localization radius must be positive".into()));
        }
        if self.surrogate.runs == 0 {
            return Err(Error::Config("surrogate needs at least one training run".into()));
        }
        Ok(())
    }

    /// Report steps inside the assimilation window.
    pub fn assimilation_steps(&self) -> usize {
        let horizon = self.observations.assimilation_fraction * self.sim.total_time;
        ((horizon / self.sim.report_step + 1e-9).floor() as usize).min(self.sim.report_count())
    }

    /// Simulator settings truncated to the assimilation window.
    pub fn assimilation_sim(&self) -> SimConfig {
        SimConfig {
            total_time: self.assimilation_steps() as f64 * self.sim.report_step,
            ..self.sim
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization with the output directory
    /// removed, so moving a run does not change its identity.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        let text = canonical.to_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
