//! Scenario documents (JSON) and their validation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{PathLossModel, Scenario};
use crate::error::{Error, Result};

/// On-disk scenario schema. Every key is optional; omitted keys take the values of
/// [`Scenario::canonical`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pt_mw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pc_mw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_density_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_is_total: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antenna_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pathloss: Option<PathLossDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hap_xy: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_xy: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relays_xy: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l0_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_ref_m: Option<f64>,
}

impl ScenarioDoc {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            k: Some(s.antennas),
            n: Some(s.relays.len()),
            pt_mw: Some(s.pt_mw),
            eta: Some(s.eta),
            gamma_max: Some(s.gamma_max),
            pc_mw: Some(s.pc_mw),
            noise_density_dbm: Some(s.noise_density_dbm),
            noise_is_total: Some(s.noise_is_total),
            bandwidth_hz: Some(s.bandwidth_hz),
            antenna_gain_db: Some(s.antenna_gain_db),
            pathloss: Some(PathLossDoc {
                l0_db: Some(s.pathloss.l0_db),
                alpha: Some(s.pathloss.alpha),
                d_ref_m: Some(s.pathloss.d_ref),
            }),
            hap_xy: Some(s.hap),
            rx_xy: Some(s.receiver),
            relays_xy: Some(s.relays.clone()),
            seed: Some(s.seed),
        }
    }

    /// Fill defaults and validate.
    pub fn into_scenario(self) -> Result<Scenario> {
        let d = Scenario::canonical();
        let relays = match (self.relays_xy, self.n) {
            (Some(r), Some(n)) if r.len() != n => {
                return Err(Error::invalid(
                    "n",
                    format!("declares {n} relays but relays_xy lists {}", r.len()),
                ))
            }
            (Some(r), _) => r,
            (None, Some(n)) if n != d.relays.len() => {
                return Err(Error::invalid(
                    "relays_xy",
                    format!("required when n differs from the default of {}", d.relays.len()),
                ))
            }
            (None, _) => d.relays.clone(),
        };
        let pl = self.pathloss.unwrap_or_default();
        let s = Scenario {
            antennas: self.k.unwrap_or(d.antennas),
            hap: self.hap_xy.unwrap_or(d.hap),
            receiver: self.rx_xy.unwrap_or(d.receiver),
            relays,
            pt_mw: self.pt_mw.unwrap_or(d.pt_mw),
            eta: self.eta.unwrap_or(d.eta),
            gamma_max: self.gamma_max.unwrap_or(d.gamma_max),
            pc_mw: self.pc_mw.unwrap_or(d.pc_mw),
            noise_density_dbm: self.noise_density_dbm.unwrap_or(d.noise_density_dbm),
            noise_is_total: self.noise_is_total.unwrap_or(d.noise_is_total),
            bandwidth_hz: self.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            antenna_gain_db: self.antenna_gain_db.unwrap_or(d.antenna_gain_db),
            pathloss: PathLossModel {
                l0_db: pl.l0_db.unwrap_or(d.pathloss.l0_db),
                alpha: pl.alpha.unwrap_or(d.pathloss.alpha),
                d_ref: pl.d_ref_m.unwrap_or(d.pathloss.d_ref),
            },
            seed: self.seed.unwrap_or(d.seed),
        };
        s.validate()?;
        Ok(s)
    }
}

/// Deserialize `text`, reporting the dotted path of the first offending key.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().to_string();
        let key = if path == "." || path == "?" { "document".to_string() } else { path };
        Error::invalid(key, msg)
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_json::<ScenarioDoc>(text)?.into_scenario()
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    parse_scenario(&read_text(path.as_ref())?)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(&ScenarioDoc::from_scenario(s)).expect("plain data");
    out.push('\n');
    out
}
