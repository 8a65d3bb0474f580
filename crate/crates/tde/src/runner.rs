//! Monte Carlo trials and their aggregation.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tde_core::baseline::music_config;
use tde_core::sensing::{downsample, measurement_count, NoiseSpec};
use tde_core::{
    add_noise, downsample_music, draw_scene, ibomp_compressed, random_demodulator, synthesize, tau_mse, tde_music,
    CVector, Dictionary, DownsampledDictionary, EstimationResult, IbompConfig, L1Mode, L1SolverConfig, MusicConfig,
    Waveform,
};

use crate::config::{tidy, ExperimentConfig};
use crate::error::Result;
use crate::estimator::Estimator;

/// Independent random streams drawn for every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scene = 1,
    Measurement = 2,
    Noise = 3,
    DownsampleNoise = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one stream of one trial. Scene and measurement streams ignore the
/// SNR so every SNR point (and the noise-free sweep at the same κ) sees the
/// same scenes and matrices.
pub fn derive_seed(master: u64, stream: Stream, kappa: f64, snr_db: Option<f64>, trial: u64) -> u64 {
    let snr_bits = match stream {
        Stream::Scene | Stream::Measurement => u64::MAX,
        _ => snr_db.map_or(u64::MAX, |s| tidy(s).to_bits()),
    };
    [stream as u64, tidy(kappa).to_bits(), snr_bits, trial]
        .iter()
        .fold(splitmix64(master), |h, &w| splitmix64(h ^ w))
}

fn rng(master: u64, stream: Stream, kappa: f64, snr_db: Option<f64>, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, kappa, snr_db, trial))
}

/// One estimator on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub estimator: Estimator,
    /// K-averaged squared delay error (μs²); `None` when the estimator failed.
    pub tau_mse: Option<f64>,
    pub runtime_ns: Option<u128>,
    pub error: Option<String>,
}

impl Outcome {
    pub fn failed(&self) -> bool {
        self.tau_mse.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub kappa: f64,
    pub snr_db: Option<f64>,
    pub outcomes: Vec<Outcome>,
}

/// Shared, read-only state for all trials at one subsampling ratio.
pub struct KappaContext {
    pub kappa: f64,
    pub measurements: usize,
    downsampled: Option<DownsampledDictionary>,
}

/// Dictionary and estimator settings built once per experiment.
pub struct Harness {
    cfg: ExperimentConfig,
    estimators: Vec<Estimator>,
    dict: Dictionary,
    music: MusicConfig,
}

impl Harness {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let dict = Dictionary::build(&cfg.chirp)?;
        let pulses = cfg.scene_spec().pulses;
        let music = MusicConfig {
            grid_oversampling: cfg.grid_oversampling,
            ..music_config(&dict, pulses)?
        };
        Ok(Harness {
            estimators: Estimator::canonical(&cfg.estimators),
            cfg,
            dict,
            music,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn estimators(&self) -> &[Estimator] {
        &self.estimators
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn context(&self, kappa: f64) -> Result<KappaContext> {
        let kappa = tidy(kappa);
        let measurements = measurement_count(self.dict.len(), kappa)?;
        let downsampled = if self.estimators.contains(&Estimator::DsMusic) {
            Some(DownsampledDictionary::new(&self.dict, measurements)?)
        } else {
            None
        };
        Ok(KappaContext {
            kappa,
            measurements,
            downsampled,
        })
    }

    /// Draw, measure and estimate one trial. Every estimator sees the same
    /// scene, measurement matrix and noise.
    pub fn run_trial(&self, ctx: &KappaContext, snr_db: Option<f64>, trial: u64) -> Result<TrialRecord> {
        let seed = self.cfg.master_seed;
        let kappa = ctx.kappa;
        let mut scene = draw_scene(
            &self.cfg.scene_spec(),
            &mut rng(seed, Stream::Scene, kappa, None, trial),
        )?;
        if self.cfg.on_grid {
            let delta = self.dict.delta();
            for p in &mut scene.pulses {
                p.delay = (p.delay / delta).round() * delta;
            }
        }
        let waveform: &dyn Waveform = self.dict.waveform().as_ref();
        let f = synthesize(waveform, &scene)?;
        let phi = random_demodulator(
            self.dict.len(),
            kappa,
            &mut rng(seed, Stream::Measurement, kappa, None, trial),
        )?;
        let noise = snr_db.map_or(NoiseSpec::disabled(), NoiseSpec::snr);

        let clean = phi.apply(&f)?;
        let variance = noise.variance(&clean)?;
        let y = add_noise(&clean, &noise, &mut rng(seed, Stream::Noise, kappa, snr_db, trial))?;
        let compressed = if self.estimators.iter().any(|e| *e != Estimator::DsMusic) {
            Some(self.dict.compress(&phi)?)
        } else {
            None
        };
        let truth = scene.delays();

        let outcomes = self
            .estimators
            .iter()
            .map(|&estimator| {
                let start = Instant::now();
                let result: tde_core::Result<EstimationResult> = match estimator.interpolation() {
                    Some(kind) => {
                        let ib = IbompConfig {
                            arc_model: self.cfg.arc_model,
                            ..IbompConfig::new(truth.len(), kind)
                        };
                        ibomp_compressed(&y, &phi, &self.dict, compressed.as_ref().expect("compressed"), ib)
                    }
                    None if estimator == Estimator::TdeMusic => {
                        let l1 = if noise.enabled {
                            L1SolverConfig {
                                mode: L1Mode::Denoising,
                                epsilon: L1SolverConfig::discrepancy_epsilon(y.len(), variance),
                                ..self.cfg.l1
                            }
                        } else {
                            L1SolverConfig {
                                mode: L1Mode::Equality,
                                ..self.cfg.l1
                            }
                        };
                        tde_music(
                            &y,
                            &phi,
                            &self.dict,
                            compressed.as_ref().expect("compressed"),
                            &l1,
                            &self.music,
                        )
                    }
                    None => self.downsample_estimate(ctx, &f, &noise, snr_db, trial),
                };
                let elapsed = start.elapsed().as_nanos();
                let (tau_mse, error) = match result.and_then(|r| tau_mse(&truth, &r.delays)) {
                    Ok(v) if v.is_finite() => (Some(v), None),
                    Ok(v) => (None, Some(format!("non-finite error {v}"))),
                    Err(e) => (None, Some(e.to_string())),
                };
                Outcome {
                    estimator,
                    tau_mse,
                    runtime_ns: self.cfg.timing.then_some(elapsed),
                    error,
                }
            })
            .collect();
        Ok(TrialRecord {
            trial,
            kappa,
            snr_db,
            outcomes,
        })
    }

    fn downsample_estimate(
        &self,
        ctx: &KappaContext,
        f: &CVector,
        noise: &NoiseSpec,
        snr_db: Option<f64>,
        trial: u64,
    ) -> tde_core::Result<EstimationResult> {
        let ds = ctx.downsampled.as_ref().expect("downsampled dictionary");
        let low = downsample(f, ctx.measurements)?;
        let mut r = rng(self.cfg.master_seed, Stream::DownsampleNoise, ctx.kappa, snr_db, trial);
        let low = add_noise(&low, noise, &mut r)?;
        downsample_music(&low, ds, &self.music)
    }

    /// All trials at one sweep point, in trial order.
    pub fn run_point(&self, kappa: f64, snr_db: Option<f64>) -> Result<Vec<TrialRecord>> {
        let ctx = self.context(kappa)?;
        (0..self.cfg.trials as u64)
            .map(|t| self.run_trial(&ctx, snr_db, t))
            .collect()
    }
}

/// Aggregated result of one estimator at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep: f64,
    pub estimator: Estimator,
    /// `NaN` when no trial succeeded.
    pub mean_tau_mse: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub mean_runtime_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub rows: Vec<Row>,
}

impl Table {
    pub fn get(&self, sweep: f64, estimator: Estimator) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.sweep == tidy(sweep) && r.estimator == estimator)
    }

    pub fn failed_trials(&self) -> usize {
        self.rows.iter().map(|r| r.trials_failed).sum()
    }

    /// Sort rows by sweep value, then estimator name.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.sweep
                .total_cmp(&b.sweep)
                .then_with(|| a.estimator.name().cmp(b.estimator.name()))
        });
    }
}

/// Collapse trial records into one row per estimator. Order independent:
/// records are summed in trial order whatever order they arrive in.
pub fn aggregate(sweep: f64, estimators: &[Estimator], records: &[TrialRecord]) -> Vec<Row> {
    let mut by_trial: BTreeMap<u64, &TrialRecord> = BTreeMap::new();
    for r in records {
        by_trial.insert(r.trial, r);
    }
    Estimator::canonical(estimators)
        .into_iter()
        .map(|estimator| {
            let outcomes: Vec<&Outcome> = by_trial
                .values()
                .filter_map(|r| r.outcomes.iter().find(|o| o.estimator == estimator))
                .collect();
            let ok: Vec<f64> = outcomes.iter().filter_map(|o| o.tau_mse).collect();
            let times: Vec<u128> = outcomes.iter().filter_map(|o| o.runtime_ns).collect();
            Row {
                sweep: tidy(sweep),
                estimator,
                mean_tau_mse: if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().sum::<f64>() / ok.len() as f64
                },
                trials_ok: ok.len(),
                trials_failed: outcomes.len() - ok.len(),
                mean_runtime_ns: (!times.is_empty())
                    .then(|| times.iter().map(|&t| t as f64).sum::<f64>() / times.len() as f64),
            }
        })
        .collect()
}

/// Noise-free τ-MSE versus subsampling ratio.
pub fn run_experiment_kappa(cfg: &ExperimentConfig) -> Result<Table> {
    let harness = Harness::new(cfg.clone())?;
    let mut table = Table::default();
    for &kappa in &cfg.kappas {
        let records = harness.run_point(kappa, None)?;
        table.rows.extend(aggregate(kappa, harness.estimators(), &records));
    }
    table.sort();
    Ok(table)
}

/// τ-MSE versus SNR at the fixed ratio `cfg.snr_kappa`.
pub fn run_experiment_snr(cfg: &ExperimentConfig) -> Result<Table> {
    let harness = Harness::new(cfg.clone())?;
    let mut table = Table::default();
    for &snr in &cfg.snr_db {
        let records = harness.run_point(cfg.snr_kappa, Some(snr))?;
        table.rows.extend(aggregate(snr, harness.estimators(), &records));
    }
    table.sort();
    Ok(table)
}
