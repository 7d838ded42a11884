use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::LatentSpec;
use crate::loss::LossWeights;

/// Which loss terms are active. `L_y` is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossSwitches {
    pub use_lx: bool,
    pub use_lt: bool,
    pub use_lz: bool,
}

impl Default for LossSwitches {
    fn default() -> Self {
        LossSwitches {
            use_lx: true,
            use_lt: true,
            use_lz: true,
        }
    }
}

impl LossSwitches {
    pub const Y_ONLY: LossSwitches = LossSwitches {
        use_lx: false,
        use_lt: false,
        use_lz: false,
    };
    pub const Y_X: LossSwitches = LossSwitches {
        use_lx: true,
        use_lt: false,
        use_lz: false,
    };
    pub const Y_X_T: LossSwitches = LossSwitches {
        use_lx: true,
        use_lt: true,
        use_lz: false,
    };
}

/// How forward-pass and inverse-pass gradients are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternation {
    /// Both passes per record, accumulated into every update.
    Within,
    /// Even updates use only forward-pass losses, odd updates only inverse-pass losses.
    Across,
}

impl FromStr for Alternation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "within" => Ok(Alternation::Within),
            "across" => Ok(Alternation::Across),
            other => Err(Error::InvalidInput(format!("unknown alternation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub clip_norm: f64,
    pub weights: LossWeights,
    /// Latent `z`; `None` trains without one.
    pub latent: Option<LatentSpec>,
    /// When set, τ moves linearly from `latent.tau` to this value over training.
    pub tau_final: Option<f64>,
    pub blocks: usize,
    pub hidden: usize,
    /// Affine layers per coupling subnetwork.
    pub subnet_depth: usize,
    pub seed: u64,
    /// Records per gradient evaluation.
    pub batch_size: usize,
    /// Gradient evaluations averaged into one optimizer update.
    pub accumulation: usize,
    pub switches: LossSwitches,
    pub alternation: Alternation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.001,
            plateau_factor: 0.3,
            plateau_patience: 5,
            early_stop_patience: 10,
            clip_norm: 5.0,
            weights: LossWeights::default(),
            latent: Some(LatentSpec {
                d: 2,
                cat: 3,
                tau: 1.0,
            }),
            tau_final: None,
            blocks: 3,
            hidden: 128,
            subnet_depth: 2,
            seed: 1,
            batch_size: 1,
            accumulation: 32,
            switches: LossSwitches::default(),
            alternation: Alternation::Within,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value `{value}` for `{key}`"),
    })
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau_factor must lie in (0, 1)");
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if self.blocks == 0 || self.hidden == 0 || self.subnet_depth == 0 {
            return bad("blocks, hidden and subnet_depth must be at least 1");
        }
        if self.batch_size == 0 || self.accumulation == 0 {
            return bad("batch_size and accumulation must be at least 1");
        }
        if let Some(t) = self.tau_final {
            if !(t > 0.0 && t.is_finite()) {
                return bad("tau_final must be positive");
            }
        }
        self.weights.validate()?;
        if let Some(l) = &self.latent {
            l.validate()?;
        }
        Ok(())
    }

    /// Records consumed per optimizer update.
    pub fn update_size(&self) -> usize {
        self.batch_size * self.accumulation
    }

    /// Temperature for a zero-based epoch.
    pub fn tau_at(&self, epoch: usize) -> f64 {
        let start = self.latent.as_ref().map_or(1.0, |l| l.tau);
        match self.tau_final {
            Some(end) if self.epochs > 1 => start + (end - start) * epoch as f64 / (self.epochs - 1) as f64,
            Some(end) => end,
            None => start,
        }
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let latent = || LatentSpec {
            d: 2,
            cat: 3,
            tau: 1.0,
        };
        match key {
            "epochs" => self.epochs = parse_value(key, value, line)?,
            "learning_rate" => self.learning_rate = parse_value(key, value, line)?,
            "plateau_factor" => self.plateau_factor = parse_value(key, value, line)?,
            "plateau_patience" => self.plateau_patience = parse_value(key, value, line)?,
            "early_stop_patience" => self.early_stop_patience = parse_value(key, value, line)?,
            "clip_norm" => self.clip_norm = parse_value(key, value, line)?,
            "alpha_x" => self.weights.alpha_x = parse_value(key, value, line)?,
            "alpha_t" => self.weights.alpha_t = parse_value(key, value, line)?,
            "alpha_y" => self.weights.alpha_y = parse_value(key, value, line)?,
            "alpha_z" => self.weights.alpha_z = parse_value(key, value, line)?,
            "latent" if value == "none" => self.latent = None,
            "latent_d" => {
                let d: usize = parse_value(key, value, line)?;
                if d == 0 {
                    self.latent = None;
                } else {
                    self.latent.get_or_insert_with(latent).d = d;
                }
            }
            "latent_cat" => self.latent.get_or_insert_with(latent).cat = parse_value(key, value, line)?,
            "tau" => self.latent.get_or_insert_with(latent).tau = parse_value(key, value, line)?,
            "tau_final" => {
                self.tau_final = if value == "none" {
                    None
                } else {
                    Some(parse_value(key, value, line)?)
                }
            }
            "blocks" => self.blocks = parse_value(key, value, line)?,
            "hidden" => self.hidden = parse_value(key, value, line)?,
            "subnet_depth" => self.subnet_depth = parse_value(key, value, line)?,
            "seed" => self.seed = parse_value(key, value, line)?,
            "batch_size" => self.batch_size = parse_value(key, value, line)?,
            "accumulation" => self.accumulation = parse_value(key, value, line)?,
            "use_lx" => self.switches.use_lx = parse_value(key, value, line)?,
            "use_lt" => self.switches.use_lt = parse_value(key, value, line)?,
            "use_lz" => self.switches.use_lz = parse_value(key, value, line)?,
            "alternation" => self.alternation = parse_value(key, value, line)?,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown setting `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Parse flat `key = value` text over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            if let Some((k, v)) = split_setting(raw, i + 1)? {
                cfg.set(k, v, i + 1)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &self.weights;
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "plateau_factor = {}", self.plateau_factor);
        let _ = writeln!(s, "plateau_patience = {}", self.plateau_patience);
        let _ = writeln!(s, "early_stop_patience = {}", self.early_stop_patience);
        let _ = writeln!(s, "clip_norm = {}", self.clip_norm);
        let _ = writeln!(s, "alpha_x = {}", w.alpha_x);
        let _ = writeln!(s, "alpha_t = {}", w.alpha_t);
        let _ = writeln!(s, "alpha_y = {}", w.alpha_y);
        let _ = writeln!(s, "alpha_z = {}", w.alpha_z);
        match &self.latent {
            Some(l) => {
                let _ = writeln!(s, "latent_d = {}", l.d);
                let _ = writeln!(s, "latent_cat = {}", l.cat);
                let _ = writeln!(s, "tau = {}", l.tau);
            }
            None => {
                let _ = writeln!(s, "latent = none");
            }
        }
        if let Some(t) = self.tau_final {
            let _ = writeln!(s, "tau_final = {t}");
        }
        let _ = writeln!(s, "blocks = {}", self.blocks);
        let _ = writeln!(s, "hidden = {}", self.hidden);
        let _ = writeln!(s, "subnet_depth = {}", self.subnet_depth);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "accumulation = {}", self.accumulation);
        let _ = writeln!(s, "use_lx = {}", self.switches.use_lx);
        let _ = writeln!(s, "use_lt = {}", self.switches.use_lt);
        let _ = writeln!(s, "use_lz = {}", self.switches.use_lz);
        let _ = writeln!(
            s,
            "alternation = {}",
            match self.alternation {
                Alternation::Within => "within",
                Alternation::Across => "across",
            }
        );
        s
    }

    /// Stable 64-bit FNV-1a hash of the canonical text form.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}", fnv1a(self.to_text().as_bytes()))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// `Some((key, value))` for a setting line, `None` for blank/comment lines.
pub(crate) fn split_setting(raw: &str, line: usize) -> Result<Option<(&str, &str)>> {
    let text = raw.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let (k, v) = text.split_once('=').ok_or_else(|| Error::Parse {
        line,
        message: format!("expected `key = value`, found `{text}`"),
    })?;
    Ok(Some((k.trim(), v.trim())))
}
