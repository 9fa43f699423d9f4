use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polyloom::codegen::WORKERS_ENV;
use polyloom::sparse::{default_densities, ConvShape};
use serde::Deserialize;

/// Optional settings read from a TOML file. Every key may be omitted.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub densities: Option<Vec<f64>>,
    pub conv: Option<ConvSection>,
    pub lstm: Option<LstmSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSection {
    pub batch: Option<usize>,
    pub in_features: Option<usize>,
    pub out_features: Option<usize>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub k: Option<usize>,
    pub density: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmSection {
    pub layers: Option<usize>,
    pub steps: Option<usize>,
    pub hidden: Option<usize>,
    pub input_dim: Option<usize>,
    pub density: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Conv geometry by output size: the input is padded so the output is
/// `height x width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvSize {
    pub batch: usize,
    pub in_features: usize,
    pub out_features: usize,
    pub height: usize,
    pub width: usize,
    pub k: usize,
}

impl ConvSize {
    pub fn shape(&self) -> Result<ConvShape> {
        Ok(ConvShape::same(self.batch, self.in_features, self.out_features, self.height, self.width, self.k)?)
    }

    pub fn describe(&self) -> String {
        format!(
            "b={} fin={} fout={} {}x{} k={}",
            self.batch, self.in_features, self.out_features, self.height, self.width, self.k
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LstmSize {
    pub layers: usize,
    pub steps: usize,
    pub hidden: usize,
    pub input_dim: usize,
    /// Fraction of gate weights kept; `None` for dense gates.
    pub density: Option<f64>,
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub densities: Vec<f64>,
    pub conv: ConvSize,
    /// Weight density for the single-shape `conv` command.
    pub conv_density: f64,
    pub lstm: LstmSize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 7,
            trials: 30,
            workers: 1,
            out_dir: PathBuf::from("polyloom-out"),
            densities: default_densities(),
            conv: ConvSize { batch: 1, in_features: 16, out_features: 32, height: 32, width: 32, k: 3 },
            conv_density: 0.2,
            lstm: LstmSize { layers: 4, steps: 100, hidden: 256, input_dim: 256, density: None },
        }
    }
}

/// Values given on the command line; they win over everything else.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub densities: Option<Vec<f64>>,
    pub batch: Option<usize>,
    pub in_features: Option<usize>,
    pub out_features: Option<usize>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub k: Option<usize>,
    pub conv_density: Option<f64>,
    pub layers: Option<usize>,
    pub steps: Option<usize>,
    pub hidden: Option<usize>,
    pub input_dim: Option<usize>,
    pub lstm_density: Option<f64>,
}

fn env_workers(raw: Option<String>) -> Result<Option<usize>> {
    match raw {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => bail!("{WORKERS_ENV}={s:?} is not a positive integer"),
        },
    }
}

impl BenchConfig {
    /// Flags, then the workers environment variable, then the file, then
    /// defaults. The result is validated.
    pub fn resolve(file: Option<&FileConfig>, env: Option<String>, o: &Overrides) -> Result<Self> {
        let d = BenchConfig::default();
        let f = file.cloned().unwrap_or_default();
        let fc = f.conv.unwrap_or_default();
        let fl = f.lstm.unwrap_or_default();
        let cfg = BenchConfig {
            seed: o.seed.or(f.seed).unwrap_or(d.seed),
            trials: o.trials.or(f.trials).unwrap_or(d.trials),
            workers: o.workers.or(env_workers(env)?).or(f.workers).unwrap_or(d.workers),
            out_dir: o.out_dir.clone().or(f.out_dir).unwrap_or(d.out_dir),
            densities: o.densities.clone().or(f.densities).unwrap_or(d.densities),
            conv: ConvSize {
                batch: o.batch.or(fc.batch).unwrap_or(d.conv.batch),
                in_features: o.in_features.or(fc.in_features).unwrap_or(d.conv.in_features),
                out_features: o.out_features.or(fc.out_features).unwrap_or(d.conv.out_features),
                height: o.height.or(fc.height).unwrap_or(d.conv.height),
                width: o.width.or(fc.width).unwrap_or(d.conv.width),
                k: o.k.or(fc.k).unwrap_or(d.conv.k),
            },
            conv_density: o.conv_density.or(fc.density).unwrap_or(d.conv_density),
            lstm: LstmSize {
                layers: o.layers.or(fl.layers).unwrap_or(d.lstm.layers),
                steps: o.steps.or(fl.steps).unwrap_or(d.lstm.steps),
                hidden: o.hidden.or(fl.hidden).unwrap_or(d.lstm.hidden),
                input_dim: o.input_dim.or(fl.input_dim).unwrap_or(d.lstm.input_dim),
                density: o.lstm_density.or(fl.density).or(d.lstm.density),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.densities.is_empty() {
            bail!("density list is empty");
        }
        for &x in self.densities.iter().chain([&self.conv_density]).chain(self.lstm.density.as_ref()) {
            if !(x > 0.0 && x <= 1.0) {
                bail!("density {x} outside (0, 1]");
            }
        }
        self.conv.shape().context("conv shape")?;
        let l = &self.lstm;
        if l.layers == 0 || l.steps == 0 || l.hidden == 0 || l.input_dim == 0 {
            bail!("LSTM sizes must be positive: L={} T={} H={} D={}", l.layers, l.steps, l.hidden, l.input_dim);
        }
        Ok(())
    }
}
