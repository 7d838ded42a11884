//! Records, tag indexing, the TSV dataset format, splitting, and a seeded
//! synthetic agglutinative language.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::{norm, DenseVector};

pub type TagSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MorphRecord {
    pub lemma: String,
    pub tags: TagSet,
    pub surface: String,
}

impl MorphRecord {
    pub fn new<I, S>(lemma: impl Into<String>, surface: impl Into<String>, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MorphRecord {
            lemma: lemma.into(),
            surface: surface.into(),
            tags: tags.into_iter().map(Into::into).collect(),
        }
    }
}

/// Parse `lemma TAB surface [TAB tag;tag;...]` lines. Blank lines are skipped.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Vec<MorphRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line).map_err(|message| Error::Parse { line: i + 1, message })?);
    }
    Ok(out)
}

fn parse_line(line: &str) -> std::result::Result<MorphRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if !(2..=3).contains(&fields.len()) {
        return Err(format!("expected 2 or 3 tab-separated fields, found {}", fields.len()));
    }
    let (lemma, surface) = (fields[0].trim(), fields[1].trim());
    if lemma.is_empty() {
        return Err("empty lemma".into());
    }
    if surface.is_empty() {
        return Err("empty surface form".into());
    }
    let tags = fields
        .get(2)
        .map(|t| t.split(';').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    Ok(MorphRecord {
        lemma: lemma.to_string(),
        surface: surface.to_string(),
        tags,
    })
}

pub fn write_dataset<W: Write>(records: &[MorphRecord], mut writer: W) -> Result<()> {
    for r in records {
        let bad = |s: &str| s.is_empty() || s.contains(['\t', '\n', '\r']);
        if bad(&r.lemma) || bad(&r.surface) || r.tags.iter().any(|t| bad(t) || t.contains(';')) {
            return Err(Error::InvalidInput(format!(
                "record {} / {} cannot be written as TSV",
                r.lemma, r.surface
            )));
        }
        write!(writer, "{}\t{}", r.lemma, r.surface)?;
        if !r.tags.is_empty() {
            let joined: Vec<&str> = r.tags.iter().map(String::as_str).collect();
            write!(writer, "\t{}", joined.join(";"))?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Sorted tag vocabulary of a training split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagIndex {
    tags: Vec<String>,
}

impl TagIndex {
    pub fn build(train: &[MorphRecord]) -> Self {
        let all: BTreeSet<&String> = train.iter().flat_map(|r| r.tags.iter()).collect();
        TagIndex {
            tags: all.into_iter().cloned().collect(),
        }
    }

    pub fn from_tags<I: IntoIterator<Item = String>>(tags: I) -> Self {
        let set: BTreeSet<String> = tags.into_iter().collect();
        TagIndex {
            tags: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).ok()
    }

    pub fn tag(&self, i: usize) -> Option<&str> {
        self.tags.get(i).map(String::as_str)
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Indicator vector of `tags`, plus the number of tags that were not in
    /// the index and had to be dropped.
    pub fn vector(&self, tags: &TagSet) -> (DenseVector, usize) {
        let mut v = DenseVector::zeros(self.len());
        let mut dropped = 0;
        for t in tags {
            match self.index_of(t) {
                Some(i) => v[i] = 1.0,
                None => dropped += 1,
            }
        }
        (v, dropped)
    }

    /// Tags whose entries satisfy `keep`.
    pub fn decode(&self, values: &[f64], keep: impl Fn(f64) -> bool) -> TagSet {
        self.tags
            .iter()
            .zip(values)
            .filter(|(_, &v)| keep(v))
            .map(|(t, _)| t.clone())
            .collect()
    }
}

pub fn build_tag_index(train: &[MorphRecord]) -> TagIndex {
    TagIndex::build(train)
}

pub fn tag_vector(tags: &TagSet, index: &TagIndex) -> (DenseVector, usize) {
    let (v, dropped) = index.vector(tags);
    if dropped > 0 {
        log::debug!("dropped {dropped} tag(s) missing from the training index");
    }
    (v, dropped)
}

/// Seeded shuffle followed by a contiguous train/dev/test split.
pub fn split_dataset(
    records: &[MorphRecord],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<MorphRecord>, Vec<MorphRecord>, Vec<MorphRecord>)> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("split ratios {r:?} must be positive and sum to 1")));
    }
    let n = records.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("cannot split {n} record(s) into 3 partitions")));
    }
    let mut sizes = [(n as f64 * r[0]).round() as usize, (n as f64 * r[1]).round() as usize, 0];
    sizes[0] = sizes[0].clamp(1, n - 2);
    sizes[1] = sizes[1].clamp(1, n - sizes[0] - 1);
    sizes[2] = n - sizes[0] - sizes[1];
    let mut shuffled = records.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = shuffled.split_off(sizes[0] + sizes[1]);
    let dev = shuffled.split_off(sizes[0]);
    Ok((shuffled, dev, test))
}

/// Parameters of the synthetic language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyLangConfig {
    pub lemma_count: usize,
    pub suffix_slots: usize,
    pub tags_per_slot: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for ToyLangConfig {
    fn default() -> Self {
        ToyLangConfig {
            lemma_count: 200,
            suffix_slots: 3,
            tags_per_slot: 2,
            embedding_dim: 100,
            seed: 1,
        }
    }
}

const CONSONANTS: &[u8] = b"bdgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SLOT_LABELS: &[&str] = &["Num", "Case", "Pers", "Tns", "Mood", "Asp"];
const OFFSET_NORM: f64 = 0.6;
const NOISE_SCALE: f64 = 0.005;

fn syllable<R: Rng>(rng: &mut R) -> String {
    let c = CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char;
    let v = VOWELS[rng.random_range(0..VOWELS.len())] as char;
    format!("{c}{v}")
}

fn slot_label(slot: usize) -> String {
    SLOT_LABELS
        .get(slot)
        .map_or_else(|| format!("Slot{slot}"), |s| s.to_string())
}

fn gaussian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| { let g: f64 = StandardNormal.sample(rng); scale * g }).collect()
}

fn unit<R: Rng>(rng: &mut R, dim: usize, length: f64) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim, 1.0);
        let n = norm(&v);
        if n > 1e-9 {
            return v.into_iter().map(|x| x * length / n).collect();
        }
    }
}

/// One record per (lemma, tag combination), in lemma-major order, with a
/// table holding every lemma and surface.
///
/// Lemmas are three random CV syllables; each slot maps each of its tags to a
/// distinct one-syllable suffix. A lemma vector is a random unit direction; a
/// surface vector adds one fixed offset per (slot, tag). Both get small noise.
pub fn generate_toy_language(cfg: &ToyLangConfig) -> Result<(Vec<MorphRecord>, EmbeddingTable)> {
    if cfg.lemma_count == 0 || cfg.suffix_slots == 0 || cfg.tags_per_slot == 0 {
        return Err(Error::InvalidInput("toy language counts must be at least 1".into()));
    }
    if cfg.embedding_dim < cfg.suffix_slots + 1 {
        return Err(Error::InvalidInput(format!(
            "embedding dimension {} leaves no room for {} slot offsets",
            cfg.embedding_dim, cfg.suffix_slots
        )));
    }
    let syllables = CONSONANTS.len() * VOWELS.len();
    if cfg.tags_per_slot > syllables {
        return Err(Error::InvalidInput(format!("at most {syllables} tags per slot are supported")));
    }
    let combos = cfg
        .tags_per_slot
        .checked_pow(cfg.suffix_slots as u32)
        .filter(|c| c.checked_mul(cfg.lemma_count).is_some_and(|n| n <= 50_000_000))
        .ok_or_else(|| Error::InvalidInput("toy corpus would be too large".into()))?;
    if cfg.lemma_count > syllables.pow(3) / 2 {
        return Err(Error::InvalidInput("too many lemmas for three-syllable stems".into()));
    }

    let dim = cfg.embedding_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut seen = HashSet::new();
    let mut lemmas = Vec::with_capacity(cfg.lemma_count);
    while lemmas.len() < cfg.lemma_count {
        let l: String = (0..3).map(|_| syllable(&mut rng)).collect();
        if seen.insert(l.clone()) {
            lemmas.push(l);
        }
    }

    // suffixes[slot][tag], offsets[slot][tag]
    let mut suffixes = Vec::with_capacity(cfg.suffix_slots);
    let mut tag_names = Vec::with_capacity(cfg.suffix_slots);
    for slot in 0..cfg.suffix_slots {
        let mut used = HashSet::new();
        let mut row = Vec::with_capacity(cfg.tags_per_slot);
        while row.len() < cfg.tags_per_slot {
            let s = syllable(&mut rng);
            if used.insert(s.clone()) {
                row.push(s);
            }
        }
        suffixes.push(row);
        let label = slot_label(slot);
        tag_names.push((0..cfg.tags_per_slot).map(|t| format!("{label}{t}")).collect::<Vec<_>>());
    }
    let offsets: Vec<Vec<Vec<f64>>> = (0..cfg.suffix_slots)
        .map(|_| (0..cfg.tags_per_slot).map(|_| unit(&mut rng, dim, OFFSET_NORM)).collect())
        .collect();

    let mut table = EmbeddingTable::new(dim);
    let mut records = Vec::with_capacity(cfg.lemma_count * combos);
    let mut choice = vec![0usize; cfg.suffix_slots];
    for lemma in &lemmas {
        let base = unit(&mut rng, dim, 1.0);
        let noisy: Vec<f64> = base.iter().zip(gaussian(&mut rng, dim, NOISE_SCALE)).map(|(a, b)| a + b).collect();
        table.insert(lemma.clone(), &noisy)?;
        for combo in 0..combos {
            let mut rest = combo;
            for c in choice.iter_mut().rev() {
                *c = rest % cfg.tags_per_slot;
                rest /= cfg.tags_per_slot;
            }
            let mut surface = lemma.clone();
            let mut vector = base.clone();
            let mut tags = TagSet::new();
            for (slot, &t) in choice.iter().enumerate() {
                surface.push_str(&suffixes[slot][t]);
                tags.insert(tag_names[slot][t].clone());
                for (v, o) in vector.iter_mut().zip(&offsets[slot][t]) {
                    *v += o;
                }
            }
            for (v, e) in vector.iter_mut().zip(gaussian(&mut rng, dim, NOISE_SCALE)) {
                *v += e;
            }
            table.insert(surface.clone(), &vector)?;
            records.push(MorphRecord {
                lemma: lemma.clone(),
                tags,
                surface,
            });
        }
    }
    Ok((records, table))
}

/// Tags of the toy language grouped by slot, for inspection.
pub fn tags_by_slot(records: &[MorphRecord]) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in records.iter().flat_map(|r| &r.tags) {
        let label: String = t.chars().take_while(|c| !c.is_ascii_digit()).collect();
        out.entry(label).or_default().insert(t.clone());
    }
    out
}
