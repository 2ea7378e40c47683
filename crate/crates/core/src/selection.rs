//! Variable-node reliability rankings: the permutation that orders VNs from
//! least to most reliable, under interchangeable rules.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bp::BpOutcome;
use crate::channel::LlrFrame;
use crate::code::ParityCheckCode;
use crate::error::{Error, Result};
use crate::nn::{InputKind, ModelWeights};

/// Which end of the score range is least reliable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LowestFirst,
    HighestFirst,
}

/// `order[t]` is the (t+1)-th least reliable VN (0-indexed VN ids).
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRanking {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
}

impl ReliabilityRanking {
    /// Sorts VN indices by score in the given direction, ties by ascending index.
    pub fn from_scores(scores: Vec<f64>, direction: Direction) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            let ord = match direction {
                Direction::LowestFirst => scores[a].total_cmp(&scores[b]),
                Direction::HighestFirst => scores[b].total_cmp(&scores[a]),
            };
            ord.then(a.cmp(&b))
        });
        ReliabilityRanking { order, scores }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The `t` least reliable VNs.
    pub fn least_reliable(&self, t: usize) -> &[usize] {
        &self.order[..t.min(self.order.len())]
    }
}

/// Ascending `|L^ch|`.
pub fn rank_by_channel_magnitude(l_ch: &[f64]) -> ReliabilityRanking {
    ReliabilityRanking::from_scores(l_ch.iter().map(|v| v.abs()).collect(), Direction::LowestFirst)
}

/// Ascending `|L^app|` of a (failed) BP run.
pub fn rank_by_app_magnitude(outcome: &BpOutcome) -> ReliabilityRanking {
    ReliabilityRanking::from_scores(outcome.l_app.iter().map(|v| v.abs()).collect(), Direction::LowestFirst)
}

/// Sign mismatches between each incoming CN→VN message and the VN's APP LLR,
/// summed over incident edges and all traced iterations. Largest count first.
pub fn rank_by_nsmea(code: &ParityCheckCode, outcome: &BpOutcome) -> Result<ReliabilityRanking> {
    let trace = outcome.trace.as_ref().ok_or(Error::MissingTrace)?;
    if trace.n() != code.n() || trace.num_edges() != code.num_edges() {
        return Err(Error::DimensionMismatch(format!(
            "trace is for n = {}, {} edges; code has n = {}, {} edges",
            trace.n(),
            trace.num_edges(),
            code.n(),
            code.num_edges()
        )));
    }
    let scores = (0..code.n())
        .map(|i| {
            let mut count = 0usize;
            for it in 0..trace.iterations() {
                let app = trace.app_negative(it, i);
                count += code
                    .var_edges(i)
                    .iter()
                    .filter(|&&e| trace.ext_negative(it, e) != app)
                    .count();
            }
            count as f64
        })
        .collect();
    Ok(ReliabilityRanking::from_scores(scores, Direction::HighestFirst))
}

/// Largest predicted perturbation probability first.
pub fn rank_by_model(weights: &ModelWeights, code: &ParityCheckCode, frame: &LlrFrame) -> Result<ReliabilityRanking> {
    let input = model_input(weights, code, frame)?;
    if weights.output_dim() != code.n() {
        return Err(Error::DimensionMismatch(format!(
            "model outputs {} values but the code has n = {}",
            weights.output_dim(),
            code.n()
        )));
    }
    let prediction = weights.forward(&input)?;
    Ok(ReliabilityRanking::from_scores(prediction.b_hat, Direction::HighestFirst))
}

/// Builds the network input for `frame`: `y` for D1 models, `(|L^ch|, s^ch)` for D2 models.
pub fn model_input(weights: &ModelWeights, code: &ParityCheckCode, frame: &LlrFrame) -> Result<Vec<f64>> {
    let input = match weights.input_kind() {
        InputKind::D1 => frame.y.clone(),
        InputKind::D2 => frame.syndrome_features(),
    };
    let expected = match weights.input_kind() {
        InputKind::D1 => code.n(),
        InputKind::D2 => code.n() + code.m(),
    };
    if weights.input_dim() != expected || input.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} inputs, {:?} input for this code has {expected}",
            weights.input_dim(),
            weights.input_kind()
        )));
    }
    Ok(input)
}

/// A VN selection rule usable by the multi-round decoder.
pub trait SelectionRule: Send + Sync {
    fn name(&self) -> &str;

    /// Whether the initial BP run must record a trace for this rule.
    fn needs_trace(&self) -> bool {
        false
    }

    fn rank(&self, code: &ParityCheckCode, frame: &LlrFrame, outcome: &BpOutcome) -> Result<ReliabilityRanking>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ChannelMagnitude;

impl SelectionRule for ChannelMagnitude {
    fn name(&self) -> &str {
        "chmag"
    }

    fn rank(&self, _: &ParityCheckCode, frame: &LlrFrame, _: &BpOutcome) -> Result<ReliabilityRanking> {
        Ok(rank_by_channel_magnitude(&frame.l_ch))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AppMagnitude;

impl SelectionRule for AppMagnitude {
    fn name(&self) -> &str {
        "appmag"
    }

    fn rank(&self, _: &ParityCheckCode, _: &LlrFrame, outcome: &BpOutcome) -> Result<ReliabilityRanking> {
        Ok(rank_by_app_magnitude(outcome))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Nsmea;

impl SelectionRule for Nsmea {
    fn name(&self) -> &str {
        "nsmea"
    }

    fn needs_trace(&self) -> bool {
        true
    }

    fn rank(&self, code: &ParityCheckCode, _: &LlrFrame, outcome: &BpOutcome) -> Result<ReliabilityRanking> {
        rank_by_nsmea(code, outcome)
    }
}

#[derive(Debug, Clone)]
pub struct NeuralRule {
    weights: Arc<ModelWeights>,
}

impl NeuralRule {
    pub fn new(weights: Arc<ModelWeights>) -> Self {
        NeuralRule { weights }
    }
}

impl SelectionRule for NeuralRule {
    fn name(&self) -> &str {
        "nn"
    }

    fn rank(&self, code: &ParityCheckCode, frame: &LlrFrame, _: &BpOutcome) -> Result<ReliabilityRanking> {
        rank_by_model(&self.weights, code, frame)
    }
}

/// A predetermined ordering, independent of the frame.
#[derive(Debug, Clone)]
pub struct FixedOrder(pub Vec<usize>);

impl SelectionRule for FixedOrder {
    fn name(&self) -> &str {
        "fixed"
    }

    fn rank(&self, code: &ParityCheckCode, _: &LlrFrame, _: &BpOutcome) -> Result<ReliabilityRanking> {
        let n = code.n();
        let mut seen = vec![false; n];
        for &v in &self.0 {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidArgument(format!("fixed order entry {v} is out of range or repeated")));
            }
        }
        Ok(ReliabilityRanking {
            order: self.0.clone(),
            scores: vec![0.0; n],
        })
    }
}

/// Rule names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Chmag,
    Appmag,
    Nsmea,
    Nn,
}

impl RuleKind {
    /// Instantiates the rule; `Nn` requires `weights`.
    pub fn build(self, weights: Option<Arc<ModelWeights>>) -> Result<Arc<dyn SelectionRule>> {
        Ok(match self {
            RuleKind::Chmag => Arc::new(ChannelMagnitude),
            RuleKind::Appmag => Arc::new(AppMagnitude),
            RuleKind::Nsmea => Arc::new(Nsmea),
            RuleKind::Nn => Arc::new(NeuralRule::new(weights.ok_or_else(|| {
                Error::InvalidArgument("rule nn requires model weights".into())
            })?)),
        })
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chmag" => Ok(RuleKind::Chmag),
            "appmag" => Ok(RuleKind::Appmag),
            "nsmea" => Ok(RuleKind::Nsmea),
            "nn" => Ok(RuleKind::Nn),
            other => Err(Error::InvalidArgument(format!(
                "unknown rule {other:?} (expected chmag, appmag, nsmea or nn)"
            ))),
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Chmag => "chmag",
            RuleKind::Appmag => "appmag",
            RuleKind::Nsmea => "nsmea",
            RuleKind::Nn => "nn",
        })
    }
}
