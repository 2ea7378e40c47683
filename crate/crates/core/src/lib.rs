//! Multi-round belief propagation (MRBP) decoding of short LDPC codes.
//!
//! When flooding BP fails, the decoder ranks variable nodes by a reliability
//! rule, flips and saturates the channel LLR of each of the `T` least reliable
//! ones, re-runs BP on every perturbed vector and returns the most likely
//! converged codeword. Rules range from channel or APP magnitudes and the
//! nSMEA oscillation count to a learned MLP or stacked-GRU predictor.
//!
//! The crate also generates labeled BP-failure datasets for training such
//! predictors and runs reproducible Monte-Carlo FER sweeps.

pub mod bits;
pub mod bp;
pub mod channel;
pub mod code;
pub mod codes;
pub mod dataset;
pub mod error;
pub mod mrbp;
pub mod nn;
pub mod rng;
pub mod selection;
pub mod sim;

pub use bits::BitVector;
pub use bp::{bp_decode, bp_decode_traced, BpDecoder, BpOutcome, BpTrace, CheckRule};
pub use channel::{modulate, sigma2_from_ebn0, transmit, LlrFrame, SnrSpec};
pub use code::ParityCheckCode;
pub use error::{Error, Result};
pub use mrbp::{mrbp_decode, perturb, CandidateList, MrbpConfig, MrbpResult};
pub use nn::{load_weights, ModelWeights, Prediction};
pub use rng::StreamRng;
pub use selection::{ReliabilityRanking, RuleKind, SelectionRule};
