//! Run configuration: flat `key = value` text with dotted section prefixes.
//! Precedence is defaults, then file, then command-line flags; every command
//! echoes the fully resolved configuration next to its outputs so a run can
//! be reproduced bit-for-bit from the echo alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datasets::DatasetKind;
use crate::dynamics::LangevinConfig;
use crate::error::{Error, Result};
use crate::evaluation::ModeSpec;
use crate::io::{atomic_write, read_to_string};
use crate::training::{EbmTrainConfig, VaeTrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data_kind: DatasetKind,
    pub data_n: usize,
    pub data_sigma: f64,
    pub data_noise: f64,
    /// Input CSV for commands that consume data; recorded for the echo.
    pub data_path: Option<PathBuf>,
    pub arch_hidden: Vec<usize>,
    pub arch_latent_dim: usize,
    pub vae_epochs: usize,
    pub vae_batch_size: usize,
    pub vae_lr: f64,
    pub vae_obs_noise_sigma: f64,
    pub ebm_steps: u64,
    pub ebm_batch_size: usize,
    pub ebm_lr: f64,
    pub ebm_alpha: f64,
    pub ebm_eval_every: u64,
    pub ebm_patience: usize,
    pub ebm_eval_samples: usize,
    /// Base-model checkpoint consumed by train-ebm / sample.
    pub ebm_base: Option<PathBuf>,
    pub ebm_checkpoint: Option<PathBuf>,
    pub langevin_epsilon: f64,
    pub langevin_train_steps: usize,
    pub langevin_sample_steps: usize,
    pub langevin_noise_scale: f64,
    pub metric_sigma: f64,
    pub metric_radius_multiplier: f64,
    pub metric_min_count: usize,
    pub sample_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data_kind: DatasetKind::Gaussians25,
            data_n: 10_000,
            data_sigma: 0.05,
            data_noise: 0.05,
            data_path: None,
            arch_hidden: vec![64, 64],
            arch_latent_dim: 2,
            vae_epochs: 512,
            vae_batch_size: 128,
            vae_lr: 1e-3,
            vae_obs_noise_sigma: 0.2,
            ebm_steps: 1000,
            ebm_batch_size: 128,
            ebm_lr: 1e-4,
            ebm_alpha: 0.1,
            ebm_eval_every: 50,
            ebm_patience: 3,
            ebm_eval_samples: 2000,
            ebm_base: None,
            ebm_checkpoint: None,
            langevin_epsilon: 0.01,
            langevin_train_steps: 60,
            langevin_sample_steps: 100,
            langevin_noise_scale: 1.0,
            metric_sigma: 0.05,
            metric_radius_multiplier: 4.0,
            metric_min_count: 20,
            sample_n: 10_000,
        }
    }
}

impl RunConfig {
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("key '{key}': bad {what} '{value}'"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "data.kind" => self.data_kind = DatasetKind::parse(value)?,
            "data.n" => self.data_n = value.parse().map_err(|_| bad("integer"))?,
            "data.sigma" => self.data_sigma = value.parse().map_err(|_| bad("number"))?,
            "data.noise" => self.data_noise = value.parse().map_err(|_| bad("number"))?,
            "data.path" => self.data_path = Some(PathBuf::from(value)),
            "arch.hidden" => {
                self.arch_hidden = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| bad("size list")))
                    .collect::<Result<_>>()?;
            }
            "arch.latent_dim" => self.arch_latent_dim = value.parse().map_err(|_| bad("integer"))?,
            "vae.epochs" => self.vae_epochs = value.parse().map_err(|_| bad("integer"))?,
            "vae.batch_size" => self.vae_batch_size = value.parse().map_err(|_| bad("integer"))?,
            "vae.lr" => self.vae_lr = value.parse().map_err(|_| bad("number"))?,
            "vae.obs_noise_sigma" => {
                self.vae_obs_noise_sigma = value.parse().map_err(|_| bad("number"))?
            }
            "ebm.steps" => self.ebm_steps = value.parse().map_err(|_| bad("integer"))?,
            "ebm.batch_size" => self.ebm_batch_size = value.parse().map_err(|_| bad("integer"))?,
            "ebm.lr" => self.ebm_lr = value.parse().map_err(|_| bad("number"))?,
            "ebm.alpha" => self.ebm_alpha = value.parse().map_err(|_| bad("number"))?,
            "ebm.eval_every" => self.ebm_eval_every = value.parse().map_err(|_| bad("integer"))?,
            "ebm.patience" => self.ebm_patience = value.parse().map_err(|_| bad("integer"))?,
            "ebm.eval_samples" => {
                self.ebm_eval_samples = value.parse().map_err(|_| bad("integer"))?
            }
            "ebm.base" => self.ebm_base = Some(PathBuf::from(value)),
            "ebm.checkpoint" => self.ebm_checkpoint = Some(PathBuf::from(value)),
            "langevin.epsilon" => self.langevin_epsilon = value.parse().map_err(|_| bad("number"))?,
            "langevin.train_steps" => {
                self.langevin_train_steps = value.parse().map_err(|_| bad("integer"))?
            }
            "langevin.sample_steps" => {
                self.langevin_sample_steps = value.parse().map_err(|_| bad("integer"))?
            }
            "langevin.noise_scale" => {
                self.langevin_noise_scale = value.parse().map_err(|_| bad("number"))?
            }
            "metric.sigma" => self.metric_sigma = value.parse().map_err(|_| bad("number"))?,
            "metric.radius_multiplier" => {
                self.metric_radius_multiplier = value.parse().map_err(|_| bad("number"))?
            }
            "metric.min_count" => {
                self.metric_min_count = value.parse().map_err(|_| bad("integer"))?
            }
            "sample.n" => self.sample_n = value.parse().map_err(|_| bad("integer"))?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.merge_str(text)?;
        Ok(cfg)
    }

    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", idx + 1)));
            };
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_str(&read_to_string(path)?)
    }

    pub fn merge_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.merge_str(&read_to_string(path)?)
    }

    /// Fully resolved text form; parsing it back reproduces this config.
    pub fn to_resolved_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "data.kind = {}", self.data_kind.as_str());
        let _ = writeln!(s, "data.n = {}", self.data_n);
        let _ = writeln!(s, "data.sigma = {}", self.data_sigma);
        let _ = writeln!(s, "data.noise = {}", self.data_noise);
        if let Some(p) = &self.data_path {
            let _ = writeln!(s, "data.path = {}", p.display());
        }
        let hidden: Vec<String> = self.arch_hidden.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(s, "arch.hidden = {}", hidden.join(","));
        let _ = writeln!(s, "arch.latent_dim = {}", self.arch_latent_dim);
        let _ = writeln!(s, "vae.epochs = {}", self.vae_epochs);
        let _ = writeln!(s, "vae.batch_size = {}", self.vae_batch_size);
        let _ = writeln!(s, "vae.lr = {}", self.vae_lr);
        let _ = writeln!(s, "vae.obs_noise_sigma = {}", self.vae_obs_noise_sigma);
        let _ = writeln!(s, "ebm.steps = {}", self.ebm_steps);
        let _ = writeln!(s, "ebm.batch_size = {}", self.ebm_batch_size);
        let _ = writeln!(s, "ebm.lr = {}", self.ebm_lr);
        let _ = writeln!(s, "ebm.alpha = {}", self.ebm_alpha);
        let _ = writeln!(s, "ebm.eval_every = {}", self.ebm_eval_every);
        let _ = writeln!(s, "ebm.patience = {}", self.ebm_patience);
        let _ = writeln!(s, "ebm.eval_samples = {}", self.ebm_eval_samples);
        if let Some(p) = &self.ebm_base {
            let _ = writeln!(s, "ebm.base = {}", p.display());
        }
        if let Some(p) = &self.ebm_checkpoint {
            let _ = writeln!(s, "ebm.checkpoint = {}", p.display());
        }
        let _ = writeln!(s, "langevin.epsilon = {}", self.langevin_epsilon);
        let _ = writeln!(s, "langevin.train_steps = {}", self.langevin_train_steps);
        let _ = writeln!(s, "langevin.sample_steps = {}", self.langevin_sample_steps);
        let _ = writeln!(s, "langevin.noise_scale = {}", self.langevin_noise_scale);
        let _ = writeln!(s, "metric.sigma = {}", self.metric_sigma);
        let _ = writeln!(s, "metric.radius_multiplier = {}", self.metric_radius_multiplier);
        let _ = writeln!(s, "metric.min_count = {}", self.metric_min_count);
        let _ = writeln!(s, "sample.n = {}", self.sample_n);
        s
    }

    pub fn save_resolved(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path, self.to_resolved_string().as_bytes())
    }

    // ---- views into module configs ------------------------------------

    pub fn vae_train_config(&self) -> VaeTrainConfig {
        VaeTrainConfig {
            epochs: self.vae_epochs,
            batch_size: self.vae_batch_size,
            learning_rate: self.vae_lr,
            latent_dim: self.arch_latent_dim,
            hidden: self.arch_hidden.clone(),
            obs_noise_sigma: self.vae_obs_noise_sigma,
            seed: self.seed,
        }
    }

    pub fn train_langevin(&self) -> LangevinConfig {
        LangevinConfig {
            epsilon: self.langevin_epsilon,
            steps: self.langevin_train_steps,
            noise_scale: self.langevin_noise_scale,
            record_trajectory: false,
        }
    }

    pub fn sample_langevin(&self) -> LangevinConfig {
        LangevinConfig {
            epsilon: self.langevin_epsilon,
            steps: self.langevin_sample_steps,
            noise_scale: self.langevin_noise_scale,
            record_trajectory: false,
        }
    }

    pub fn ebm_train_config(&self) -> EbmTrainConfig {
        EbmTrainConfig {
            steps: self.ebm_steps,
            batch_size: self.ebm_batch_size,
            learning_rate: self.ebm_lr,
            reg_coefficient: self.ebm_alpha,
            langevin: self.train_langevin(),
            sample_langevin: self.sample_langevin(),
            eval_every: self.ebm_eval_every,
            patience: self.ebm_patience,
            eval_samples: self.ebm_eval_samples,
            seed: self.seed,
        }
    }

    pub fn mode_spec(&self) -> Result<ModeSpec> {
        let mut spec = match self.data_kind {
            DatasetKind::Gaussians25 => ModeSpec::gaussians25(self.metric_sigma)?,
            DatasetKind::SwissRoll => ModeSpec::swiss_roll(self.metric_sigma)?,
        };
        spec.quality_radius_multiplier = self.metric_radius_multiplier;
        spec.min_count = self.metric_min_count;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = 42;
        cfg.ebm_steps = 777;
        cfg.data_path = Some(PathBuf::from("runs/data.csv"));
        cfg.arch_hidden = vec![32, 16];
        let text = cfg.to_resolved_string();
        let parsed = RunConfig::parse_str(&text).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn file_overrides_defaults_in_place() {
        let mut cfg = RunConfig::default();
        cfg.merge_str("ebm.steps = 5\n# comment\n\nseed = 9\n").unwrap();
        assert_eq!(cfg.ebm_steps, 5);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.vae_batch_size, RunConfig::default().vae_batch_size);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.merge_str("nope.key = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn malformed_line_rejected() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.merge_str("just words\n"), Err(Error::Config(_))));
        assert!(matches!(cfg.merge_str("ebm.steps = not_a_number\n"), Err(Error::Config(_))));
    }
}
