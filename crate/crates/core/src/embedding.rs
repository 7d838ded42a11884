//! Word-vector space: text-format IO, subword composition and exact cosine
//! nearest-neighbour decoding.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, DenseVector};

/// Ordered token → vector table.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    /// Row-major, one row per token.
    values: Vec<f64>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
    subwords: Option<Box<EmbeddingTable>>,
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.tokens == other.tokens && self.values == other.values && self.subwords == other.subwords
    }
}

/// A ranked nearest-neighbour hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub token: String,
    pub similarity: f64,
}

/// Rows smaller than this are scanned on the calling thread.
const PARALLEL_SCAN_MIN: usize = 4096;

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), self.row(i)))
    }

    pub fn subwords(&self) -> Option<&EmbeddingTable> {
        self.subwords.as_deref()
    }

    /// Attach a subword vocabulary used by [`EmbeddingTable::compose_word_vector`].
    pub fn with_subwords(mut self, subwords: EmbeddingTable) -> Result<Self> {
        if subwords.dim != self.dim {
            return Err(Error::dim("subword vector", self.dim, subwords.dim));
        }
        self.subwords = Some(Box::new(subwords));
        Ok(self)
    }

    /// Add a new token. Tokens must be unique, whitespace-free, and their
    /// vectors finite, non-zero and of the table's dimension.
    pub fn insert(&mut self, token: impl Into<String>, vector: &[f64]) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::dim("embedding vector", self.dim, vector.len()));
        }
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("invalid token `{token}`")));
        }
        if self.index.contains_key(&token) {
            return Err(Error::InvalidInput(format!("duplicate token `{token}`")));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite vector for `{token}`")));
        }
        let n = norm(vector);
        if n == 0.0 {
            return Err(Error::InvalidInput(format!("zero vector for `{token}`")));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.values.extend_from_slice(vector);
        self.norms.push(n);
        Ok(())
    }

    /// Union with `extra`. Existing tokens keep their vectors; re-adding a
    /// token with a different vector is an error.
    pub fn extend_vocabulary<I, S>(mut self, extra: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        for (token, vector) in extra {
            let token = token.into();
            if vector.len() != self.dim {
                return Err(Error::dim("distractor vector", self.dim, vector.len()));
            }
            match self.get(&token) {
                Some(existing) if existing == vector.as_slice() => {}
                Some(_) => {
                    return Err(Error::InvalidInput(format!(
                        "token `{token}` already present with a different vector"
                    )))
                }
                None => self.insert(token, &vector)?,
            }
        }
        Ok(self)
    }

    /// Whole-word vector if present, otherwise the sum of a greedy
    /// longest-match segmentation over the subword vocabulary.
    pub fn compose_word_vector(&self, word: &str) -> Result<DenseVector> {
        if let Some(v) = self.get(word) {
            return Ok(DenseVector(v.to_vec()));
        }
        let sub = self
            .subwords
            .as_deref()
            .ok_or_else(|| Error::Unresolvable(word.to_string()))?;
        let pieces = sub.segment(word)?;
        let mut out = vec![0.0; self.dim];
        for p in pieces {
            for (o, v) in out.iter_mut().zip(sub.get(p).expect("segment yields known pieces")) {
                *o += v;
            }
        }
        Ok(DenseVector(out))
    }

    /// Greedy longest-match split of `word` into tokens of this table.
    pub fn segment<'w>(&self, word: &'w str) -> Result<Vec<&'w str>> {
        let bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).chain([word.len()]).collect();
        let mut pieces = Vec::new();
        let mut start = 0;
        while start + 1 < bounds.len() {
            let from = bounds[start];
            let end = (start + 1..bounds.len())
                .rev()
                .find(|&e| self.contains(&word[from..bounds[e]]))
                .ok_or_else(|| Error::Unresolvable(format!("{word} (no subword covers `{}`)", &word[from..])))?;
            pieces.push(&word[from..bounds[end]]);
            start = end;
        }
        if pieces.is_empty() {
            return Err(Error::Unresolvable(word.to_string()));
        }
        Ok(pieces)
    }

    fn check_query(&self, query: &[f64], k: usize) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        if query.len() != self.dim {
            return Err(Error::dim("nearest-neighbour query", self.dim, query.len()));
        }
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        let qn = norm(query);
        if qn == 0.0 || !qn.is_finite() {
            return Err(Error::InvalidInput("nearest-neighbour query must be non-zero and finite".into()));
        }
        Ok(qn)
    }

    #[inline]
    fn similarity(&self, query: &[f64], qn: f64, i: usize) -> f64 {
        dot(query, self.row(i)) / (qn * self.norms[i])
    }

    /// Exact top-`k` tokens by cosine similarity, best first; ties are broken
    /// by lexicographic token order.
    pub fn nearest_word(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        let qn = self.check_query(query, k)?;
        let best = if self.len() >= PARALLEL_SCAN_MIN {
            let chunk = self.len().div_ceil(rayon::current_num_threads().max(1));
            (0..self.len())
                .collect::<Vec<_>>()
                .par_chunks(chunk)
                .map(|rows| self.top_k(query, qn, k, rows.iter().copied()))
                .reduce(Vec::new, |mut a, b| {
                    a.extend(b);
                    a
                })
        } else {
            self.top_k(query, qn, k, 0..self.len())
        };
        let mut best: Vec<Candidate> = best;
        best.sort_by(|a, b| self.rank(b, a));
        best.truncate(k);
        Ok(best
            .into_iter()
            .map(|c| Neighbor {
                token: self.tokens[c.row].clone(),
                similarity: c.similarity,
            })
            .collect())
    }

    /// Reference implementation: score every row, sort everything.
    pub fn nearest_word_bruteforce(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.check_query(query, k)?;
        let qn = norm(query);
        let mut all: Vec<Neighbor> = self
            .iter()
            .map(|(t, v)| Neighbor {
                token: t.to_string(),
                similarity: dot(query, v) / (qn * norm(v)),
            })
            .collect();
        all.sort_by(|a, b| {
            b.similarity
                .partial_cmp(&a.similarity)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.token.cmp(&b.token))
        });
        all.truncate(k);
        Ok(all)
    }

    /// Top-1 token for each query, in query order.
    pub fn decode_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<String>> {
        queries
            .par_iter()
            .map(|q| Ok(self.nearest_word(q, 1)?.remove(0).token))
            .collect()
    }

    /// `Greater` when `a` ranks ahead of `b`.
    fn rank(&self, a: &Candidate, b: &Candidate) -> Ordering {
        a.similarity
            .partial_cmp(&b.similarity)
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.tokens[b.row].cmp(&self.tokens[a.row]))
    }

    fn top_k(&self, query: &[f64], qn: f64, k: usize, rows: impl Iterator<Item = usize>) -> Vec<Candidate> {
        // Min-heap on rank: the root is the weakest candidate kept so far.
        let mut heap: BinaryHeap<HeapEntry<'_>> = BinaryHeap::with_capacity(k + 1);
        for row in rows {
            let cand = Candidate {
                row,
                similarity: self.similarity(query, qn, row),
            };
            if heap.len() < k {
                heap.push(HeapEntry { table: self, cand });
            } else if let Some(worst) = heap.peek() {
                if self.rank(&cand, &worst.cand) == Ordering::Greater {
                    heap.pop();
                    heap.push(HeapEntry { table: self, cand });
                }
            }
        }
        heap.into_iter().map(|e| e.cand).collect()
    }

    /// Parse the text vector format: a `count dim` header, then one token
    /// followed by `dim` space-separated floats per line.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (count, dim) = loop {
            match lines.next() {
                None => return Err(Error::Parse { line: 1, message: "missing header".into() }),
                Some((i, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let parts: Vec<&str> = line.split_whitespace().collect();
                    let parse = |s: &str| {
                        s.parse::<usize>().map_err(|_| Error::Parse {
                            line: i + 1,
                            message: format!("bad header `{line}`, expected `count dim`"),
                        })
                    };
                    if parts.len() != 2 {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("bad header `{line}`, expected `count dim`"),
                        });
                    }
                    break (parse(parts[0])?, parse(parts[1])?);
                }
            }
        };
        if dim == 0 {
            return Err(Error::Parse { line: 1, message: "dimension must be positive".into() });
        }
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 1;
            let mut parts = line.split(' ').filter(|s| !s.is_empty());
            let token = parts.next().expect("non-empty line has a token");
            let values: Vec<f64> = parts
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("`{s}` is not a number"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {dim} values for `{token}`, found {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { line: lineno, message: format!("non-finite value for `{token}`") });
            }
            if table.len() == count {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("more entries than the {count} declared in the header"),
                });
            }
            table
                .insert(token, &values)
                .map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        }
        if table.len() != count {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {count} entries, found {}", table.len()),
            });
        }
        Ok(table)
    }

    pub fn save<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (token, v) in self.iter() {
            write!(writer, "{token}")?;
            for x in v {
                write!(writer, " {x}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

/// `count` seeded Gaussian vectors named `<distractor-N>`.
pub fn random_distractors(count: usize, dim: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            (format!("<distractor-{i}>"), v)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    row: usize,
    similarity: f64,
}

struct HeapEntry<'a> {
    table: &'a EmbeddingTable,
    cand: Candidate,
}

impl PartialEq for HeapEntry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry<'_> {}

impl PartialOrd for HeapEntry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry<'_> {
    // Reversed so that BinaryHeap (a max-heap) keeps the weakest entry on top.
    fn cmp(&self, other: &Self) -> Ordering {
        self.table.rank(&other.cand, &self.cand)
    }
}
