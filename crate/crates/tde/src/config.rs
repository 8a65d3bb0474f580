use std::path::Path;

use serde::{Deserialize, Serialize};
use tde_core::{ArcModel, ChirpSpec, L1SolverConfig, SceneDrawSpec};

use crate::error::{HarnessError, Result};
use crate::estimator::Estimator;

/// Everything that determines an experiment's output, seed included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chirp: ChirpSpec,
    /// Scene distribution; derived from `chirp` and `pulses` when absent.
    pub draw: Option<SceneDrawSpec>,
    pub pulses: usize,
    /// Snap drawn delays to the nearest grid point.
    pub on_grid: bool,
    /// Subsampling ratios swept by the κ experiment.
    pub kappas: Vec<f64>,
    /// SNR points (dB) swept by the SNR experiment.
    pub snr_db: Vec<f64>,
    /// Fixed ratio used by the SNR experiment.
    pub snr_kappa: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<Estimator>,
    /// Record per-estimator wall-clock time.
    pub timing: bool,
    pub l1: L1SolverConfig,
    pub arc_model: ArcModel,
    pub grid_oversampling: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            chirp: ChirpSpec::default(),
            draw: None,
            pulses: 3,
            on_grid: false,
            kappas: sweep(0.05, 0.05, 1.0),
            snr_db: sweep(-5.0, 2.5, 30.0),
            snr_kappa: 0.5,
            trials: 100,
            master_seed: 1,
            estimators: Estimator::ALL.to_vec(),
            timing: false,
            l1: L1SolverConfig::default(),
            arc_model: ArcModel::default(),
            grid_oversampling: 20,
        }
    }
}

/// Round sweep values so that e.g. the 10th step of 0.05 is exactly 0.5.
pub fn tidy(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Inclusive arithmetic sweep `start, start+step, …, stop`.
pub fn sweep(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| tidy(start + i as f64 * step)).collect()
}

/// `start:step:stop` or a comma separated list.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let bad = || {
        HarnessError::Config(format!(
            "cannot parse sweep `{s}` (use start:step:stop or a comma list)"
        ))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
            let (a, d, b) = (num(start)?, num(step)?, num(stop)?);
            if !(d > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
                return Err(bad());
            }
            sweep(a, d, b)
        }
        [_] => s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map(tidy).map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn scene_spec(&self) -> SceneDrawSpec {
        self.draw
            .unwrap_or_else(|| SceneDrawSpec::for_chirp(&self.chirp, self.pulses))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: tde_core::Error| HarnessError::Config(e.to_string());
        self.chirp.validate().map_err(cfg)?;
        let draw = self.scene_spec();
        draw.validate().map_err(cfg)?;
        if draw.pulses == 0 {
            return Err(HarnessError::Config("at least one pulse is required".into()));
        }
        self.l1.validate().map_err(cfg)?;
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        for &k in self.kappas.iter().chain(std::iter::once(&self.snr_kappa)) {
            tde_core::sensing::measurement_count(self.chirp.len, k).map_err(cfg)?;
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(HarnessError::Config("SNR values must be finite".into()));
        }
        if self.estimators.is_empty() {
            return Err(HarnessError::Config("no estimators selected".into()));
        }
        if self.grid_oversampling == 0 {
            return Err(HarnessError::Config("grid_oversampling must be at least 1".into()));
        }
        Ok(())
    }
}
