//! Reference structure-aware cross-entropy over ScreenTag target sequences.
//!
//! Given per-position log-probabilities of the target tokens, the loss is
//! `sum_t w(y_t) * -log p(y_t)` with `w = lambda_tag` on tag tokens (element
//! tags and the document delimiters), `lambda_loc` on location tokens and 1
//! on everything else.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::screentag::{Token, TokenClass, TokenSeq};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("shape mismatch: {tokens} tokens but {logprobs} log-probabilities")]
    Shape { tokens: usize, logprobs: usize },
    #[error("log-probability at position {position} is {value}; expected a finite value <= 0")]
    InvalidLogProb { position: usize, value: f64 },
    #[error("weights must be positive and finite (lambda_tag {tag}, lambda_loc {loc})")]
    InvalidWeight { tag: f64, loc: f64 },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("reading scored tokens: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct WeightSpec<T = f64> {
    pub lambda_tag: T,
    pub lambda_loc: T,
}

impl<T: Scalar> Default for WeightSpec<T> {
    fn default() -> Self {
        Self {
            lambda_tag: T::from_f64_lossy(2.0),
            lambda_loc: T::from_f64_lossy(2.0),
        }
    }
}

impl<T: Scalar> WeightSpec<T> {
    pub fn new(lambda_tag: T, lambda_loc: T) -> Result<Self, LossError> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if ok(lambda_tag) && ok(lambda_loc) {
            Ok(Self { lambda_tag, lambda_loc })
        } else {
            Err(LossError::InvalidWeight {
                tag: lambda_tag.to_f64_lossy(),
                loc: lambda_loc.to_f64_lossy(),
            })
        }
    }

    /// Every weight 1: the plain cross-entropy.
    pub fn uniform() -> Self {
        Self {
            lambda_tag: T::one(),
            lambda_loc: T::one(),
        }
    }

    pub fn weight(&self, class: TokenClass) -> T {
        match class {
            TokenClass::Tag => self.lambda_tag,
            TokenClass::Loc => self.lambda_loc,
            TokenClass::Other => T::one(),
        }
    }
}

pub fn token_weights<T: Scalar>(seq: &TokenSeq, spec: &WeightSpec<T>) -> Vec<T> {
    seq.tokens().iter().map(|t| spec.weight(t.class())).collect()
}

/// Number of positions that fall in the tag or location buckets.
pub fn structural_positions(seq: &TokenSeq) -> usize {
    seq.tokens()
        .iter()
        .filter(|t| t.class() != TokenClass::Other)
        .count()
}

/// A target sequence with the model's log-probability of each target token.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence<T = f64> {
    tokens: TokenSeq,
    logprobs: Vec<T>,
}

impl<T: Scalar> ScoredSequence<T> {
    pub fn new(tokens: TokenSeq, logprobs: Vec<T>) -> Result<Self, LossError> {
        if tokens.len() != logprobs.len() {
            return Err(LossError::Shape {
                tokens: tokens.len(),
                logprobs: logprobs.len(),
            });
        }
        if let Some((position, v)) = logprobs
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v > T::zero())
        {
            return Err(LossError::InvalidLogProb {
                position,
                value: v.to_f64_lossy(),
            });
        }
        Ok(Self { tokens, logprobs })
    }

    pub fn tokens(&self) -> &TokenSeq {
        &self.tokens
    }

    pub fn logprobs(&self) -> &[T] {
        &self.logprobs
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue<T = f64> {
    pub sum: T,
    /// `sum / T`; zero for an empty sequence.
    pub mean: T,
    pub tokens: usize,
}

pub fn weighted_ce<T: Scalar>(scored: &ScoredSequence<T>, spec: &WeightSpec<T>) -> LossValue<T> {
    let sum = scored
        .tokens
        .tokens()
        .iter()
        .zip(&scored.logprobs)
        .fold(T::zero(), |acc, (t, lp)| acc + spec.weight(t.class()) * -*lp);
    let n = scored.len();
    let mean = if n == 0 {
        T::zero()
    } else {
        sum / T::from_f64_lossy(n as f64)
    };
    LossValue { sum, mean, tokens: n }
}

/// Unweighted cross-entropy.
pub fn plain_ce<T: Scalar>(scored: &ScoredSequence<T>) -> LossValue<T> {
    weighted_ce(scored, &WeightSpec::uniform())
}

#[derive(Deserialize)]
struct JsonSequence {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

/// Reads scored sequences from tab-separated text: one `surface<TAB>logprob`
/// row per token, blank lines separating sequences. The last tab on a row
/// splits the columns, so surfaces may themselves contain tabs. Surfaces that
/// are not special tokens are taken as text pieces verbatim.
pub fn read_tsv<T: Scalar>(reader: impl BufRead) -> Result<Vec<ScoredSequence<T>>, LossError> {
    let mut out = Vec::new();
    let mut toks = Vec::new();
    let mut lps = Vec::new();
    let flush = |toks: &mut Vec<Token>, lps: &mut Vec<T>, out: &mut Vec<ScoredSequence<T>>| {
        if toks.is_empty() {
            return Ok(());
        }
        out.push(ScoredSequence::new(TokenSeq(std::mem::take(toks)), std::mem::take(lps))?);
        Ok::<(), LossError>(())
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LossError::Io(e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            flush(&mut toks, &mut lps, &mut out)?;
            continue;
        }
        let (surface, lp) = line.rsplit_once('\t').ok_or_else(|| LossError::Parse {
            line: i + 1,
            reason: "expected `surface<TAB>logprob`".into(),
        })?;
        let v: f64 = lp.trim().parse().map_err(|_| LossError::Parse {
            line: i + 1,
            reason: format!("`{lp}` is not a number"),
        })?;
        toks.push(Token::from_surface(surface));
        lps.push(T::from_f64_lossy(v));
    }
    flush(&mut toks, &mut lps, &mut out)?;
    Ok(out)
}

/// Reads scored sequences from JSON lines, one
/// `{"tokens": [surface, ...], "logprobs": [...]}` object per sequence.
pub fn read_jsonl<T: Scalar>(reader: impl BufRead) -> Result<Vec<ScoredSequence<T>>, LossError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LossError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: JsonSequence = serde_json::from_str(&line).map_err(|e| LossError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let toks = seq.tokens.iter().map(|s| Token::from_surface(s)).collect();
        let lps = seq.logprobs.into_iter().map(T::from_f64_lossy).collect();
        out.push(ScoredSequence::new(TokenSeq(toks), lps)?);
    }
    Ok(out)
}
