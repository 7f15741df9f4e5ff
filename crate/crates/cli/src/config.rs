//! Run configuration: a TOML file of dotted keys such as `smdp.gamma = 0.8`.
//! Missing keys take the model defaults; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use hybrid_assoc::game::tau_worst_case;
use hybrid_assoc::{
    ApServer, GameConfig, HybridCell, NodebServer, Setup, SimConfig, SmdpConfig, StreamConfig, UmtsModel, UmtsParams,
    UmtsTable, WlanModel, WlanParams,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub setup: Setup,
    /// AP pole capacity used by the decision model.
    pub m_ap: usize,
    /// CSV replacing the built-in NodeB table; relative paths are taken from
    /// the config file's directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    pub wlan: WlanParams,
    pub umts: UmtsParams,
    pub streams: StreamOverrides,
    pub smdp: SmdpConfig,
    pub game: GameSection,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            setup: Setup::default(),
            m_ap: 18,
            table: None,
            wlan: WlanParams::default(),
            umts: UmtsParams::default(),
            streams: StreamOverrides::default(),
            smdp: SmdpConfig::default(),
            game: GameSection::default(),
            sim: SimConfig::default(),
        }
    }
}

/// Stream rates and fees; anything left out takes the default of the
/// configured setup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_first: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_second: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_common: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_first: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_second: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_common_to_first: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_common_to_second: Option<f64>,
}

impl StreamOverrides {
    pub fn resolve(&self, setup: Setup) -> StreamConfig {
        let d = setup.default_streams();
        StreamConfig {
            lambda_first: self.lambda_first.unwrap_or(d.lambda_first),
            lambda_second: self.lambda_second.unwrap_or(d.lambda_second),
            lambda_common: self.lambda_common.unwrap_or(d.lambda_common),
            f_first: self.f_first.unwrap_or(d.f_first),
            f_second: self.f_second.unwrap_or(d.f_second),
            f_common_to_first: self.f_common_to_first.unwrap_or(d.f_common_to_first),
            f_common_to_second: self.f_common_to_second.unwrap_or(d.f_common_to_second),
        }
    }

    fn filled(s: &StreamConfig) -> Self {
        Self {
            lambda_first: Some(s.lambda_first),
            lambda_second: Some(s.lambda_second),
            lambda_common: Some(s.lambda_common),
            f_first: Some(s.f_first),
            f_second: Some(s.f_second),
            f_common_to_first: Some(s.f_common_to_first),
            f_common_to_second: Some(s.f_common_to_second),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauSource {
    /// Use `game.tau` as given.
    #[default]
    Config,
    /// Worst-case NodeB service time from the table and the `umts` section.
    Table,
}

/// Individual-optimality inputs. The defaults reproduce the published
/// staircase setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSection {
    pub lambda_ap: f64,
    pub lambda_ap3g: f64,
    pub m_ap: usize,
    /// Inverse mean file size for the AP service rates, 1/bits.
    pub zeta: f64,
    pub tau: f64,
    pub tau_source: TauSource,
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
}

impl Default for GameSection {
    fn default() -> Self {
        Self {
            lambda_ap: 3.0,
            lambda_ap3g: 1.0,
            m_ap: 10,
            zeta: 1e-5,
            tau: 2.5,
            tau_source: TauSource::Config,
            grid_start: 0.0,
            grid_stop: 20.0,
            grid_step: 0.5,
        }
    }
}

impl GameSection {
    /// `grid_start + k * grid_step` up to `grid_stop` inclusive.
    pub fn grid(&self) -> Vec<f64> {
        let span = (self.grid_stop - self.grid_start) / self.grid_step;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.grid_start + k as f64 * self.grid_step).collect()
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        let mut cfg = Self::from_toml_str(&text).map_err(|source| CliError::Parse { path: path.to_owned(), source })?;
        if let (Some(table), Some(dir)) = (&cfg.table, path.parent()) {
            if table.is_relative() {
                cfg.table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    /// Same configuration with every setup-dependent default written out.
    pub fn effective(&self) -> Self {
        Self { streams: StreamOverrides::filled(&self.streams()), ..self.clone() }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is always representable as TOML")
    }

    pub fn validate(&self) -> hybrid_assoc::Result<()> {
        use hybrid_assoc::Error;
        self.wlan.validate()?;
        self.umts.validate()?;
        self.streams().validate()?;
        self.smdp.validate()?;
        self.sim.validate()?;
        if self.m_ap == 0 {
            return Err(Error::Config("m_ap must be positive".into()));
        }
        let g = &self.game;
        if !(g.zeta > 0.0 && g.zeta.is_finite()) {
            return Err(Error::Config("game.zeta must be positive".into()));
        }
        if !(g.grid_step > 0.0 && g.grid_start >= 0.0 && g.grid_stop >= g.grid_start) {
            return Err(Error::Config("game grid needs step > 0 and 0 <= start <= stop".into()));
        }
        Ok(())
    }

    pub fn streams(&self) -> StreamConfig {
        self.streams.resolve(self.setup)
    }

    pub fn wlan_model(&self) -> WlanModel {
        WlanModel::new(self.wlan.clone())
    }

    pub fn umts_table(&self) -> hybrid_assoc::Result<UmtsTable> {
        match &self.table {
            Some(path) => UmtsTable::from_path(path),
            None => Ok(UmtsTable::builtin()),
        }
    }

    pub fn umts_model(&self) -> hybrid_assoc::Result<UmtsModel> {
        UmtsModel::new(self.umts.clone(), self.umts_table()?)
    }

    pub fn cell(&self) -> hybrid_assoc::Result<HybridCell> {
        let ap = || ApServer::new(&self.wlan_model(), self.m_ap);
        Ok(match self.setup {
            Setup::ApAp => HybridCell::new(ap()?, ap()?),
            Setup::ApNodeb => HybridCell::new(ap()?, NodebServer::new(&self.umts_model()?)),
            Setup::NodebNodeb => {
                let umts = self.umts_model()?;
                HybridCell::new(NodebServer::new(&umts), NodebServer::new(&umts))
            }
        })
    }

    pub fn tau(&self) -> hybrid_assoc::Result<f64> {
        match self.game.tau_source {
            TauSource::Config => Ok(self.game.tau),
            TauSource::Table => Ok(tau_worst_case(&self.umts_model()?)),
        }
    }

    pub fn game_config(&self) -> hybrid_assoc::Result<GameConfig> {
        let g = &self.game;
        GameConfig::from_wlan(&self.wlan_model(), g.zeta, g.m_ap, g.lambda_ap, g.lambda_ap3g, self.tau()?)
    }
}
