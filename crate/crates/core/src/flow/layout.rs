use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::LatentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Inflection,
    Lemmatization,
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inflection" | "inf" => Ok(Task::Inflection),
            "lemmatization" | "lem" => Ok(Task::Lemmatization),
            other => Err(Error::InvalidInput(format!("unknown task `{other}`"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Inflection => "inflection",
            Task::Lemmatization => "lemmatization",
        })
    }
}

/// How task variables are laid out on the two sides of the network.
///
/// The input side holds `x` (`[lemma; tags]` for inflection, the surface
/// vector for lemmatization), the output side holds `[y; z]`. The narrower
/// side is zero-padded at the end up to the common width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoLayout {
    pub task: Task,
    pub word_dim: usize,
    pub tag_count: usize,
    pub x_dim: usize,
    pub y_dim: usize,
    pub z_dim: usize,
    pub z_cat: usize,
}

impl IoLayout {
    pub fn inflection(word_dim: usize, tag_count: usize, latent: Option<&LatentSpec>) -> Self {
        let (z_dim, z_cat) = latent.map_or((0, 0), |l| (l.d, l.cat));
        IoLayout {
            task: Task::Inflection,
            word_dim,
            tag_count,
            x_dim: word_dim + tag_count,
            y_dim: word_dim,
            z_dim,
            z_cat,
        }
    }

    pub fn lemmatization(word_dim: usize, latent: Option<&LatentSpec>) -> Self {
        let (z_dim, z_cat) = latent.map_or((0, 0), |l| (l.d, l.cat));
        IoLayout {
            task: Task::Lemmatization,
            word_dim,
            tag_count: 0,
            x_dim: word_dim,
            y_dim: word_dim,
            z_dim,
            z_cat,
        }
    }

    pub fn for_task(task: Task, word_dim: usize, tag_count: usize, latent: Option<&LatentSpec>) -> Self {
        match task {
            Task::Inflection => Self::inflection(word_dim, tag_count, latent),
            Task::Lemmatization => Self::lemmatization(word_dim, latent),
        }
    }

    /// Layout with free dimensions, mostly for tests.
    pub fn raw(x_dim: usize, y_dim: usize, z_dim: usize, z_cat: usize) -> Self {
        IoLayout {
            task: Task::Lemmatization,
            word_dim: x_dim.min(y_dim),
            tag_count: 0,
            x_dim,
            y_dim,
            z_dim,
            z_cat,
        }
    }

    pub fn z_len(&self) -> usize {
        self.z_dim * self.z_cat
    }

    pub fn width(&self) -> usize {
        self.x_dim.max(self.y_dim + self.z_len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.width() < 2 {
            return Err(Error::InvalidInput("network width must be at least 2".into()));
        }
        if (self.z_dim == 0) != (self.z_cat == 0) {
            return Err(Error::InvalidInput(
                "latent dimension and category count must both be zero or both positive".into(),
            ));
        }
        if self.z_dim > 0 && self.z_cat < 2 {
            return Err(Error::InvalidInput("latent categories must be at least 2".into()));
        }
        if self.task == Task::Inflection && self.x_dim != self.word_dim + self.tag_count {
            return Err(Error::InvalidInput("inflection input must be [lemma; tags]".into()));
        }
        Ok(())
    }

    pub fn latent(&self, tau: f64) -> Option<LatentSpec> {
        (self.z_dim > 0).then(|| LatentSpec {
            d: self.z_dim,
            cat: self.z_cat,
            tau,
        })
    }
}
