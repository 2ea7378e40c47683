//! Monte-Carlo FER/BER estimation over Eb/N0 sweeps.
//!
//! Frame `f` of SNR point `p` always draws its codeword and noise from stream
//! `sweep_stream(p, f)` of the configured seed. Frames are evaluated in fixed
//! batches and accumulated in frame order, so counts (and the emitted CSV) do
//! not depend on the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::bp::{BpDecoder, CheckRule, DEFAULT_LLR_MAX};
use crate::channel::{modulate, transmit, SnrSpec};
use crate::code::{squared_distance, Generator, ParityCheckCode};
use crate::dataset::{draw_codeword, CodewordSource};
use crate::error::{Error, Result};
use crate::mrbp::{mrbp_decode, MrbpConfig, DEFAULT_SAT};
use crate::nn::ModelWeights;
use crate::rng::{sweep_stream, StreamRng};
use crate::selection::{RuleKind, SelectionRule};

const BATCH: u64 = 1024;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

pub const CSV_HEADER: &str = "snr_db,frames,frame_errors,fer,ber,undetected,mean_rounds,mean_iters";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Bp,
    Mrbp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Echoed into outputs; the code itself is passed to [`Simulator::new`].
    pub code_path: String,
    pub decoder: DecoderKind,
    pub rule: RuleKind,
    pub rounds: usize,
    pub l0: usize,
    pub l1: usize,
    pub sat: f64,
    pub snr_db: Vec<f64>,
    pub max_frames: u64,
    pub target_errors: u64,
    pub seed: u64,
    pub workers: usize,
    #[serde(default)]
    pub weights_path: Option<String>,
    #[serde(default)]
    pub source: CodewordSource,
    #[serde(default)]
    pub check_rule: CheckRule,
    #[serde(default = "default_llr_max")]
    pub llr_max: f64,
    /// Count frames where the list decision is farther from `y` than a listed transmitted codeword.
    #[serde(default)]
    pub genie_check: bool,
}

fn default_llr_max() -> f64 {
    DEFAULT_LLR_MAX
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            code_path: String::new(),
            decoder: DecoderKind::Bp,
            rule: RuleKind::Nsmea,
            rounds: 5,
            l0: 20,
            l1: 20,
            sat: DEFAULT_SAT,
            snr_db: vec![3.0],
            max_frames: 1_000_000,
            target_errors: 100,
            seed: 1,
            workers: 1,
            weights_path: None,
            source: CodewordSource::AllZero,
            check_rule: CheckRule::SumProduct,
            llr_max: DEFAULT_LLR_MAX,
            genie_check: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_errors == 0 {
            return Err(Error::InvalidArgument("target frame errors must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::InvalidArgument("SNR list is empty".into()));
        }
        if self.max_frames == 0 || self.l0 == 0 || self.workers == 0 {
            return Err(Error::InvalidArgument("max frames, l0 and workers must be at least 1".into()));
        }
        if self.decoder == DecoderKind::Mrbp {
            self.mrbp_config().validate()?;
        }
        Ok(())
    }

    pub fn mrbp_config(&self) -> MrbpConfig {
        MrbpConfig {
            rounds: self.rounds,
            l0: self.l0,
            l1: self.l1,
            sat: self.sat,
            llr_max: self.llr_max,
            check_rule: self.check_rule,
            parallel_rounds: false,
        }
    }
}

/// Statistics of one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub snr_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    /// Frame errors whose decision is a valid but wrong codeword.
    pub undetected: u64,
    pub mean_rounds: f64,
    pub mean_iters: f64,
    /// Wilson 95% interval on the FER.
    pub fer_ci95: (f64, f64),
    pub genie_violations: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSummary {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub code: CodeSummary,
    pub points: Vec<PointResult>,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Per-frame outcome relevant to the counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameStats {
    pub error: bool,
    pub bit_errors: u64,
    pub undetected: bool,
    pub rounds: u64,
    pub iters: u64,
    pub genie_violation: bool,
}

pub struct Simulator<'a> {
    code: &'a ParityCheckCode,
    config: SimConfig,
    rule: Option<Arc<dyn SelectionRule>>,
    generator: Option<Generator>,
}

impl<'a> Simulator<'a> {
    pub fn new(code: &'a ParityCheckCode, config: SimConfig, weights: Option<Arc<ModelWeights>>) -> Result<Self> {
        config.validate()?;
        let rule = match config.decoder {
            DecoderKind::Bp => None,
            DecoderKind::Mrbp => Some(config.rule.build(weights)?),
        };
        Ok(Self::assemble(code, config, rule))
    }

    /// Uses an arbitrary rule implementation for MRBP.
    pub fn with_rule(code: &'a ParityCheckCode, config: SimConfig, rule: Arc<dyn SelectionRule>) -> Result<Self> {
        config.validate()?;
        Ok(Self::assemble(code, config, Some(rule)))
    }

    fn assemble(code: &'a ParityCheckCode, config: SimConfig, rule: Option<Arc<dyn SelectionRule>>) -> Self {
        let generator = (config.source == CodewordSource::Random).then(|| code.generator());
        Simulator {
            code,
            config,
            rule,
            generator,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Simulates frame `frame` of point `point`.
    pub fn run_frame(&self, point: usize, frame: u64, snr: &SnrSpec) -> Result<FrameStats> {
        let code = self.code;
        let mut rng = StreamRng::new(self.config.seed, sweep_stream(point, frame));
        let transmitted = draw_codeword(code.n(), self.config.source, self.generator.as_ref(), &mut rng)?;
        let frame = transmit(code, &modulate(&transmitted), snr.sigma2, &mut rng)?;

        let (decision, rounds, iters, genie_violation): (BitVector, usize, usize, bool) = match &self.rule {
            None => {
                let out = BpDecoder::with_options(code, self.config.llr_max, self.config.check_rule).decode(
                    &frame.l_ch,
                    self.config.l0,
                    false,
                );
                (out.c_hat, 0, out.iterations_used, false)
            }
            Some(rule) => {
                let r = mrbp_decode(code, &frame, rule.as_ref(), &self.config.mrbp_config())?;
                let violation = self.config.genie_check
                    && r.candidates.entries().iter().any(|c| c.codeword == transmitted)
                    && squared_distance(&frame.y, &r.c_hat) > squared_distance(&frame.y, &transmitted);
                (r.c_hat, r.rounds_run, r.bp_iterations_total, violation)
            }
        };
        let bit_errors = decision.distance(&transmitted) as u64;
        let error = bit_errors > 0;
        Ok(FrameStats {
            error,
            bit_errors,
            undetected: error && code.is_codeword_unchecked(decision.as_slice()),
            rounds: rounds as u64,
            iters: iters as u64,
            genie_violation,
        })
    }

    /// Per-frame statistics of frames `0..count` at point `point`, on the current thread pool.
    pub fn frame_stats(&self, point: usize, count: u64) -> Result<Vec<FrameStats>> {
        let snr = SnrSpec::for_code(self.config.snr_db[point], self.code)?;
        (0..count).into_par_iter().map(|f| self.run_frame(point, f, &snr)).collect()
    }

    fn run_point_inner(&self, point: usize) -> Result<PointResult> {
        let start = Instant::now();
        let snr_db = self.config.snr_db[point];
        let snr = SnrSpec::for_code(snr_db, self.code)?;
        let cfg = &self.config;
        let (mut frames, mut errors, mut undetected, mut genie) = (0u64, 0u64, 0u64, 0u64);
        let (mut bits, mut rounds, mut iters) = (0u64, 0u64, 0u64);
        'outer: while frames < cfg.max_frames && errors < cfg.target_errors {
            let end = (frames + BATCH).min(cfg.max_frames);
            let batch: Vec<FrameStats> = (frames..end)
                .into_par_iter()
                .map(|f| self.run_frame(point, f, &snr))
                .collect::<Result<_>>()?;
            for s in batch {
                frames += 1;
                errors += s.error as u64;
                undetected += s.undetected as u64;
                genie += s.genie_violation as u64;
                bits += s.bit_errors;
                rounds += s.rounds;
                iters += s.iters;
                if errors >= cfg.target_errors {
                    break 'outer;
                }
            }
        }
        let f = frames as f64;
        Ok(PointResult {
            snr_db,
            frames,
            frame_errors: errors,
            bit_errors: bits,
            fer: errors as f64 / f,
            ber: bits as f64 / (f * self.code.n() as f64),
            undetected,
            mean_rounds: rounds as f64 / f,
            mean_iters: iters as f64 / f,
            fer_ci95: wilson_interval(errors, frames),
            genie_violations: genie,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))
    }

    /// Simulates SNR point `point` (index into `config.snr_db`).
    pub fn run_point(&self, point: usize) -> Result<PointResult> {
        if point >= self.config.snr_db.len() {
            return Err(Error::InvalidArgument(format!("no SNR point {point}")));
        }
        self.pool()?.install(|| self.run_point_inner(point))
    }

    pub fn run_sweep(&self) -> Result<SimResult> {
        let pool = self.pool()?;
        let points = (0..self.config.snr_db.len())
            .map(|p| pool.install(|| self.run_point_inner(p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimResult {
            config: self.config.clone(),
            code: CodeSummary {
                n: self.code.n(),
                m: self.code.m(),
                k: self.code.k(),
                hash: self.code.identity_hash(),
            },
            points,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// `.json` selects JSON; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

impl SimResult {
    /// CSV with the fixed column order of [`CSV_HEADER`]; floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.snr_db, p.frames, p.frame_errors, p.fer, p.ber, p.undetected, p.mean_rounds, p.mean_iters
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn emit(&self, format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
        let text = match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json()?,
        };
        fs::write(path, text)?;
        Ok(())
    }
}

/// Parses `a:b:step` (inclusive), a comma-separated list, or a single value.
pub fn parse_snr_list(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse SNR list {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}
