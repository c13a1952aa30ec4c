//! Scene graph <-> token sequence conversion and the nucleus sampler used
//! when generating sequences.
//!
//! Each relationship becomes five tokens
//! `(subject class, subject instance, object class, object instance, predicate)`
//! and a sequence ends with a stop token. Token integers are laid out as
//! contiguous ranges: classes, predicates, instance indices, then START and
//! STOP.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClassId, EntityInstance, PredicateId, Quintuple, SceneGraph, Vocabulary};

/// Decoded meaning of one token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Token {
    Class(ClassId),
    Predicate(PredicateId),
    Instance(u32),
    Start,
    Stop,
}

/// Integer layout of the token vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenSpace {
    classes: u32,
    predicates: u32,
    instances: u32,
}

impl TokenSpace {
    pub fn new(vocab: &Vocabulary) -> Self {
        Self {
            classes: vocab.num_classes(),
            predicates: vocab.num_predicates(),
            instances: vocab.max_instance_count(),
        }
    }

    pub fn size(&self) -> u32 {
        self.classes + self.predicates + self.instances + 2
    }

    pub fn start(&self) -> u32 {
        self.classes + self.predicates + self.instances
    }

    pub fn stop(&self) -> u32 {
        self.start() + 1
    }

    pub fn encode(&self, token: Token) -> Result<u32> {
        match token {
            Token::Class(c) if c.0 < self.classes => Ok(c.0),
            Token::Predicate(p) if p.0 < self.predicates => Ok(self.classes + p.0),
            Token::Instance(i) if i < self.instances => Ok(self.classes + self.predicates + i),
            Token::Start => Ok(self.start()),
            Token::Stop => Ok(self.stop()),
            Token::Class(c) => Err(Error::IndexOutOfRange { kind: "class", index: c.0 }),
            Token::Predicate(p) => Err(Error::IndexOutOfRange { kind: "predicate", index: p.0 }),
            Token::Instance(i) => Err(Error::IndexOutOfRange { kind: "instance", index: i }),
        }
    }

    pub fn decode(&self, token: u32) -> Option<Token> {
        let pred_start = self.classes;
        let inst_start = pred_start + self.predicates;
        let start = self.start();
        Some(match token {
            t if t < pred_start => Token::Class(ClassId(t)),
            t if t < inst_start => Token::Predicate(PredicateId(t - pred_start)),
            t if t < start => Token::Instance(t - inst_start),
            t if t == start => Token::Start,
            t if t == start + 1 => Token::Stop,
            _ => return None,
        })
    }
}

/// A list of in-range token integers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>, space: &TokenSpace) -> Result<Self> {
        if let Some(bad) = tokens.iter().find(|&&t| t >= space.size()) {
            return Err(Error::IndexOutOfRange { kind: "token", index: *bad });
        }
        Ok(Self { tokens })
    }

    /// Parses whitespace-separated integers. `line` is only used for the
    /// error message.
    pub fn parse(text: &str, space: &TokenSpace, line: usize) -> Result<Self> {
        let tokens = text
            .split_whitespace()
            .map(|s| {
                s.parse::<u32>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{s}` is not a token id"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tokens, space).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Encodes `g` as five tokens per quintuple followed by STOP. With a seed the
/// quintuples are first put in a uniformly random order; instance indices
/// are then reassigned by first appearance.
pub fn encode(g: &SceneGraph, vocab: &Vocabulary, shuffle_seed: Option<u64>) -> Result<TokenSequence> {
    vocab.check_graph(g)?;
    let mut shuffled = g.clone();
    if let Some(seed) = shuffle_seed {
        shuffled.quintuples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let canonical = shuffled.canonicalize(vocab)?;

    let space = TokenSpace::new(vocab);
    let mut tokens = Vec::with_capacity(canonical.len() * 5 + 1);
    for q in &canonical.quintuples {
        tokens.push(space.encode(Token::Class(q.sub.cls))?);
        tokens.push(space.encode(Token::Instance(q.sub.idx))?);
        tokens.push(space.encode(Token::Class(q.obj.cls))?);
        tokens.push(space.encode(Token::Instance(q.obj.idx))?);
        tokens.push(space.encode(Token::Predicate(q.pred))?);
    }
    tokens.push(space.stop());
    Ok(TokenSequence { tokens })
}

/// What [`decode`] had to skip.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub decoded: usize,
    /// Five-token blocks whose token kinds did not fit the quintuple pattern.
    pub malformed: usize,
    /// Incomplete trailing blocks (cut by STOP or end of input).
    pub truncated: usize,
    /// Whether decoding ended at a STOP token.
    pub stopped: bool,
}

/// Reads quintuples until STOP, end of input, or `max_quintuples` accepted
/// quintuples. Never fails: grammar violations are skipped and counted.
pub fn decode(seq: &TokenSequence, space: &TokenSpace, max_quintuples: usize) -> (SceneGraph, DecodeReport) {
    let mut report = DecodeReport::default();
    let mut quintuples = Vec::new();
    let mut rest: &[u32] = &seq.tokens;
    if rest.first().is_some_and(|&t| space.decode(t) == Some(Token::Start)) {
        rest = &rest[1..];
    }

    while quintuples.len() < max_quintuples && !rest.is_empty() {
        let block = &rest[..rest.len().min(5)];
        if let Some(pos) = block.iter().position(|&t| t == space.stop()) {
            if pos > 0 {
                report.truncated += 1;
            }
            report.stopped = true;
            break;
        }
        if block.len() < 5 {
            report.truncated += 1;
            break;
        }
        rest = &rest[5..];
        let kinds: Vec<Option<Token>> = block.iter().map(|&t| space.decode(t)).collect();
        match kinds[..] {
            [Some(Token::Class(sc)), Some(Token::Instance(si)), Some(Token::Class(oc)), Some(Token::Instance(oi)), Some(Token::Predicate(p))] => {
                quintuples.push(Quintuple {
                    sub: EntityInstance { cls: sc, idx: si },
                    obj: EntityInstance { cls: oc, idx: oi },
                    pred: p,
                    score: None,
                });
            }
            _ => report.malformed += 1,
        }
    }

    report.decoded = quintuples.len();
    let graph = SceneGraph::new(String::new(), quintuples).canonical();
    (graph, report)
}

/// The first `k` pairwise-distinct quintuples in rank order.
pub fn top_k_unique(g: &SceneGraph, k: usize) -> SceneGraph {
    let mut seen = std::collections::HashSet::new();
    let quintuples = g
        .quintuples
        .iter()
        .filter(|q| seen.insert(q.key()))
        .take(k)
        .copied()
        .collect();
    SceneGraph {
        image_id: g.image_id.clone(),
        quintuples,
    }
}

/// Nucleus sampling settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub p_value: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { p_value: 0.95, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_value > 0.0 && self.p_value <= 1.0) {
            return Err(Error::InvalidConfig(format!("p_value {} is outside (0, 1]", self.p_value)));
        }
        Ok(())
    }
}

const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

fn check_distribution(probs: &[f64]) -> Result<()> {
    if let Some(bad) = probs.iter().find(|p| p.is_nan() || **p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidDistribution(format!("entry {bad} is not a non-negative number")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {sum}")));
    }
    Ok(())
}

/// Smallest prefix of tokens, by descending probability with ties on the
/// lower id, whose mass reaches `p_value`.
pub fn nucleus(probs: &[f64], p_value: f64) -> Result<Vec<usize>> {
    check_distribution(probs)?;
    let mut ranked: Vec<usize> = (0..probs.len()).collect();
    ranked.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut len = ranked.len();
    for (i, &t) in ranked.iter().enumerate() {
        mass += probs[t];
        if mass >= p_value - 1e-12 {
            len = i + 1;
            break;
        }
    }
    ranked.truncate(len);
    Ok(ranked)
}

/// Draws one token from the renormalized nucleus.
pub fn nucleus_sample<R: Rng + ?Sized>(probs: &[f64], p_value: f64, rng: &mut R) -> Result<usize> {
    let set = nucleus(probs, p_value)?;
    let mass: f64 = set.iter().map(|&t| probs[t]).sum();
    let target = rng.gen::<f64>() * mass;
    let mut acc = 0.0;
    for &t in &set {
        acc += probs[t];
        if target < acc {
            return Ok(t);
        }
    }
    // Rounding left `target` at the very top; return the last token with mass.
    Ok(*set.iter().rev().find(|&&t| probs[t] > 0.0).unwrap_or(&set[0]))
}

/// A seeded decode stream.
#[derive(Clone, Debug)]
pub struct NucleusSampler {
    p_value: f64,
    rng: ChaCha8Rng,
}

impl NucleusSampler {
    pub fn new(cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            p_value: cfg.p_value,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    pub fn sample(&mut self, probs: &[f64]) -> Result<usize> {
        nucleus_sample(probs, self.p_value, &mut self.rng)
    }
}
