//! Labeled training data from BP failures.
//!
//! Each retained frame failed the initial `l0`-iteration BP attempt. Its label
//! vector has `b_i = 1` iff re-decoding with VN `i` flipped and saturated
//! succeeds within `l1` iterations.
//!
//! File layout: magic `MRBPDS\x01`, `u64` LE record count, `u32` LE JSON
//! header length, the JSON [`DatasetHeader`], then fixed-size records. A D2
//! record is `|L^ch|` as `n` LE `f32`, the syndrome packed LSB-first into
//! `ceil(m/8)` bytes and the labels packed into `ceil(n/8)` bytes. D1 records
//! prepend `y` as `n` LE `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::bp::{BpDecoder, BpOutcome, CheckRule, DEFAULT_LLR_MAX};
use crate::channel::{modulate, transmit, LlrFrame, SnrSpec};
use crate::code::{Generator, ParityCheckCode};
use crate::error::{Error, Result};
use crate::mrbp::perturb;
use crate::rng::StreamRng;

pub const DATASET_MAGIC: &[u8; 7] = b"MRBPDS\x01";
pub const FORMAT_VERSION: u32 = 1;

/// Attempts evaluated per parallel batch; fixed so output never depends on the thread count.
const BATCH: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    D1,
    D2,
}

/// What counts as a successful re-decode when labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    /// Converges to the transmitted codeword.
    #[default]
    TransmittedCodeword,
    /// Converges to any codeword.
    AnyCodeword,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodewordSource {
    #[default]
    AllZero,
    Random,
}

/// Draws the transmitted codeword for one frame from the head of its stream.
pub fn draw_codeword(n: usize, source: CodewordSource, generator: Option<&Generator>, rng: &mut StreamRng) -> Result<BitVector> {
    match source {
        CodewordSource::AllZero => Ok(BitVector::zeros(n)),
        CodewordSource::Random => {
            let g = generator.ok_or_else(|| {
                Error::InvalidArgument("random codewords need a generator basis".into())
            })?;
            let message: BitVector = (0..g.k()).map(|_| rng.bit()).collect();
            g.encode(&message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub kind: DatasetKind,
    pub code_hash: String,
    pub n: usize,
    pub m: usize,
    /// Stored in the fixed-width prefix, not in the JSON block.
    #[serde(skip)]
    pub record_count: u64,
    pub eb_n0_db: f64,
    pub l0: usize,
    pub l1: usize,
    pub sat: f64,
    pub seed: u64,
    #[serde(default)]
    pub label_policy: LabelPolicy,
    #[serde(default)]
    pub source: CodewordSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub abs_l_ch: Vec<f32>,
    pub s_ch: BitVector,
    pub labels: BitVector,
    /// Present in D1 datasets only.
    pub y: Option<Vec<f32>>,
}

impl TrainingRecord {
    pub fn from_frame(frame: &LlrFrame, labels: BitVector, kind: DatasetKind) -> Self {
        TrainingRecord {
            abs_l_ch: frame.l_ch.iter().map(|v| v.abs() as f32).collect(),
            s_ch: frame.s_ch.clone(),
            labels,
            y: (kind == DatasetKind::D1).then(|| frame.y.iter().map(|&v| v as f32).collect()),
        }
    }
}

fn record_size(kind: DatasetKind, n: usize, m: usize) -> usize {
    let floats = if kind == DatasetKind::D1 { 2 * n } else { n };
    4 * floats + m.div_ceil(8) + n.div_ceil(8)
}

/// Parameters of a failure-collection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub snr: SnrSpec,
    pub l0: usize,
    pub l1: usize,
    pub sat: f64,
    pub count: usize,
    pub seed: u64,
    pub source: CodewordSource,
    pub kind: DatasetKind,
    pub label_policy: LabelPolicy,
    pub llr_max: f64,
    pub check_rule: CheckRule,
}

impl GenerationConfig {
    pub fn new(snr: SnrSpec, count: usize, seed: u64) -> Self {
        GenerationConfig {
            snr,
            l0: 20,
            l1: 20,
            sat: crate::mrbp::DEFAULT_SAT,
            count,
            seed,
            source: CodewordSource::AllZero,
            kind: DatasetKind::D2,
            label_policy: LabelPolicy::TransmittedCodeword,
            llr_max: DEFAULT_LLR_MAX,
            check_rule: CheckRule::SumProduct,
        }
    }

    pub fn header(&self, code: &ParityCheckCode, record_count: u64) -> DatasetHeader {
        DatasetHeader {
            format_version: FORMAT_VERSION,
            kind: self.kind,
            code_hash: code.identity_hash(),
            n: code.n(),
            m: code.m(),
            record_count,
            eb_n0_db: self.snr.eb_n0_db,
            l0: self.l0,
            l1: self.l1,
            sat: self.sat,
            seed: self.seed,
            label_policy: self.label_policy,
            source: self.source,
        }
    }
}

/// One frame whose initial BP attempt failed.
#[derive(Debug, Clone)]
pub struct FailureSample {
    /// Index of the channel realization (and of its random stream).
    pub attempt: u64,
    pub transmitted: BitVector,
    pub frame: LlrFrame,
    pub outcome: BpOutcome,
}

/// Simulates attempt `attempt` and keeps it if BP fails.
pub fn simulate_attempt(
    code: &ParityCheckCode,
    generator: Option<&Generator>,
    config: &GenerationConfig,
    attempt: u64,
    trace: bool,
) -> Result<Option<FailureSample>> {
    let mut rng = StreamRng::new(config.seed, attempt);
    let transmitted = draw_codeword(code.n(), config.source, generator, &mut rng)?;
    let frame = transmit(code, &modulate(&transmitted), config.snr.sigma2, &mut rng)?;
    let outcome = BpDecoder::with_options(code, config.llr_max, config.check_rule).decode(&frame.l_ch, config.l0, trace);
    Ok((!outcome.converged).then_some(FailureSample {
        attempt,
        transmitted,
        frame,
        outcome,
    }))
}

/// Sequential stream of exactly `config.count` BP failures.
pub fn generate_failures<'a>(
    code: &'a ParityCheckCode,
    config: &'a GenerationConfig,
) -> Result<impl Iterator<Item = Result<FailureSample>> + 'a> {
    if config.count == 0 || config.l0 == 0 {
        return Err(Error::InvalidArgument("count and l0 must be at least 1".into()));
    }
    let generator = match config.source {
        CodewordSource::Random => Some(code.generator()),
        CodewordSource::AllZero => None,
    };
    Ok((0u64..)
        .map(move |a| simulate_attempt(code, generator.as_ref(), config, a, false))
        .filter_map(|r| r.transpose())
        .take(config.count))
}

/// Perturbs every VN in turn and re-decodes with `l1` iterations.
pub fn label_frame(
    code: &ParityCheckCode,
    frame: &LlrFrame,
    transmitted: &BitVector,
    config: &GenerationConfig,
) -> Result<BitVector> {
    let mut decoder = BpDecoder::with_options(code, config.llr_max, config.check_rule);
    let mut labels = BitVector::zeros(code.n());
    for i in 0..code.n() {
        let out = decoder.decode(&perturb(&frame.l_ch, i, config.sat)?, config.l1, false);
        let ok = out.converged
            && match config.label_policy {
                LabelPolicy::TransmittedCodeword => out.c_hat == *transmitted,
                LabelPolicy::AnyCodeword => true,
            };
        labels.set(i, ok);
    }
    Ok(labels)
}

#[derive(Debug, Clone)]
pub struct LabeledFailure {
    pub sample: FailureSample,
    pub labels: BitVector,
}

/// Collects and labels `config.count` failures on the current rayon pool.
///
/// Output order follows the attempt index, so results do not depend on the
/// number of worker threads.
pub fn generate_labeled(code: &ParityCheckCode, config: &GenerationConfig) -> Result<Vec<LabeledFailure>> {
    let mut out = Vec::with_capacity(config.count);
    for_each_labeled(code, config, |lf| {
        out.push(lf);
        Ok(())
    })?;
    Ok(out)
}

/// Streaming form of [`generate_labeled`]: hands each labeled failure to `sink`
/// in attempt order, one batch at a time.
pub fn for_each_labeled(
    code: &ParityCheckCode,
    config: &GenerationConfig,
    mut sink: impl FnMut(LabeledFailure) -> Result<()>,
) -> Result<()> {
    if config.count == 0 || config.l0 == 0 || config.l1 == 0 {
        return Err(Error::InvalidArgument("count, l0 and l1 must be at least 1".into()));
    }
    let generator = match config.source {
        CodewordSource::Random => Some(code.generator()),
        CodewordSource::AllZero => None,
    };
    let mut done = 0;
    let mut start = 0u64;
    while done < config.count {
        let need = config.count - done;
        let failures: Vec<FailureSample> = (start..start + BATCH)
            .into_par_iter()
            .map(|a| simulate_attempt(code, generator.as_ref(), config, a, false))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .take(need)
            .collect();
        let labeled: Vec<LabeledFailure> = failures
            .into_par_iter()
            .map(|sample| {
                let labels = label_frame(code, &sample.frame, &sample.transmitted, config)?;
                Ok(LabeledFailure { sample, labels })
            })
            .collect::<Result<_>>()?;
        done += labeled.len();
        labeled.into_iter().try_for_each(&mut sink)?;
        start += BATCH;
    }
    Ok(())
}

/// Streaming writer; the record count is patched on [`DatasetWriter::finish`].
pub struct DatasetWriter {
    out: BufWriter<File>,
    header: DatasetHeader,
    written: u64,
}

impl DatasetWriter {
    pub fn create(path: impl AsRef<Path>, header: DatasetHeader) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let json = serde_json::to_vec(&header)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
        out.write_all(DATASET_MAGIC)?;
        out.write_all(&0u64.to_le_bytes())?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(&json)?;
        Ok(DatasetWriter { out, header, written: 0 })
    }

    pub fn write(&mut self, record: &TrainingRecord) -> Result<()> {
        let h = &self.header;
        let check = |got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(Error::LengthMismatch { expected, got })
            }
        };
        check(record.abs_l_ch.len(), h.n)?;
        check(record.labels.len(), h.n)?;
        check(record.s_ch.len(), h.m)?;
        match (h.kind, &record.y) {
            (DatasetKind::D1, Some(y)) => {
                check(y.len(), h.n)?;
                for v in y {
                    self.out.write_all(&v.to_le_bytes())?;
                }
            }
            (DatasetKind::D1, None) => {
                return Err(Error::InvalidArgument("D1 records must carry y".into()))
            }
            (DatasetKind::D2, _) => {}
        }
        for v in &record.abs_l_ch {
            self.out.write_all(&v.to_le_bytes())?;
        }
        self.out.write_all(&record.s_ch.to_packed())?;
        self.out.write_all(&record.labels.to_packed())?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<DatasetHeader> {
        self.out.flush()?;
        let mut file = self.out.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(DATASET_MAGIC.len() as u64))?;
        file.write_all(&self.written.to_le_bytes())?;
        file.sync_all()?;
        self.header.record_count = self.written;
        Ok(self.header)
    }
}

pub fn write_dataset(path: impl AsRef<Path>, header: &DatasetHeader, records: &[TrainingRecord]) -> Result<DatasetHeader> {
    let mut w = DatasetWriter::create(path, header.clone())?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<TrainingRecord>)> {
    let file = File::open(path)?;
    let total = file.metadata()?.len();
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 7];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated dataset magic".into()))?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format("bad dataset magic or version".into()));
    }
    let mut u64buf = [0u8; 8];
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u64buf).map_err(|_| Error::Format("truncated record count".into()))?;
    let count = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u32buf).map_err(|_| Error::Format("truncated header length".into()))?;
    let json_len = u32::from_le_bytes(u32buf) as u64;
    let prefix = 7 + 8 + 4 + json_len;
    if total < prefix {
        return Err(Error::Format("truncated dataset header".into()));
    }
    let mut json = vec![0u8; json_len as usize];
    r.read_exact(&mut json)?;
    let mut header: DatasetHeader = serde_json::from_slice(&json)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "dataset format version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    header.record_count = count;

    let (n, m) = (header.n, header.m);
    let size = record_size(header.kind, n, m) as u64;
    let body = total - prefix;
    if body != count * size {
        return Err(Error::Format(format!(
            "header declares {count} records of {size} bytes but the file holds {body} bytes"
        )));
    }
    let floats = |bytes: &[u8]| -> Vec<f32> {
        bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()
    };
    let mut buf = vec![0u8; size as usize];
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let mut rest = &buf[..];
        let y = if header.kind == DatasetKind::D1 {
            let (yb, tail) = rest.split_at(4 * n);
            rest = tail;
            Some(floats(yb))
        } else {
            None
        };
        let (lb, tail) = rest.split_at(4 * n);
        let (sb, lab) = tail.split_at(m.div_ceil(8));
        records.push(TrainingRecord {
            abs_l_ch: floats(lb),
            s_ch: BitVector::from_packed(sb, m)?,
            labels: BitVector::from_packed(lab, n)?,
            y,
        });
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::qc_96_48;

    fn config(count: usize) -> GenerationConfig {
        let code = qc_96_48();
        GenerationConfig::new(SnrSpec::for_code(2.0, &code).unwrap(), count, 77)
    }

    #[test]
    fn failure_stream_properties() {
        let code = qc_96_48();
        let cfg = config(20);
        let a: Vec<FailureSample> = generate_failures(&code, &cfg).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(a.len(), 20);
        assert!(a.iter().all(|s| !s.outcome.converged && s.transmitted.is_zero()));
        assert!(a.iter().all(|s| !s.frame.s_ch.is_zero()));
        let b: Vec<FailureSample> = generate_failures(&code, &cfg).unwrap().collect::<Result<_>>().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.attempt, y.attempt);
            assert_eq!(x.frame, y.frame);
        }
        assert!(generate_failures(&code, &config(0)).is_err());
    }

    #[test]
    fn random_codewords_are_codewords() {
        let code = qc_96_48();
        let cfg = GenerationConfig { source: CodewordSource::Random, ..config(5) };
        for s in generate_failures(&code, &cfg).unwrap() {
            let s = s.unwrap();
            assert!(code.is_codeword(&s.transmitted).unwrap());
        }
    }

    #[test]
    fn labels_match_direct_redecodes_in_any_order() {
        let code = qc_96_48();
        let cfg = config(6);
        for lf in generate_labeled(&code, &cfg).unwrap() {
            let reversed: BitVector = {
                let mut v = BitVector::zeros(96);
                for i in (0..96).rev() {
                    let out = crate::bp::bp_decode(&code, &perturb(&lf.sample.frame.l_ch, i, cfg.sat).unwrap(), cfg.l1);
                    v.set(i, out.converged && out.c_hat.is_zero());
                }
                v
            };
            assert_eq!(reversed, lf.labels);
        }
    }

    // Transmitting c with noise w ∘ (-1)^c yields the same (|L^ch|, s^ch) and the same labels as
    // transmitting the all-zero word with noise w.
    #[test]
    fn d2_inputs_and_labels_do_not_depend_on_the_codeword() {
        let code = qc_96_48();
        let g = code.generator();
        let cfg = config(8);
        let mut rng = StreamRng::new(5, 5);
        for s in generate_failures(&code, &cfg).unwrap() {
            let s = s.unwrap();
            let c = draw_codeword(96, CodewordSource::Random, Some(&g), &mut rng).unwrap();
            let x = modulate(&c);
            let y: Vec<f64> = s.frame.y.iter().zip(&x).map(|(yi, xi)| yi * xi).collect();
            let frame = LlrFrame::from_received(&code, y, s.frame.sigma2).unwrap();
            let zero_labels = label_frame(&code, &s.frame, &s.transmitted, &cfg).unwrap();
            let c_labels = label_frame(&code, &frame, &c, &cfg).unwrap();
            let a = TrainingRecord::from_frame(&s.frame, zero_labels, DatasetKind::D2);
            let b = TrainingRecord::from_frame(&frame, c_labels, DatasetKind::D2);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn parallel_generation_is_deterministic() {
        let code = qc_96_48();
        let cfg = config(12);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate_labeled(&code, &cfg)).unwrap();
        let b = four.install(|| generate_labeled(&code, &cfg)).unwrap();
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sample.attempt, y.sample.attempt);
            assert_eq!(x.labels, y.labels);
        }
        let seq: Vec<u64> = generate_failures(&code, &cfg).unwrap().map(|s| s.unwrap().attempt).collect();
        assert_eq!(seq, a.iter().map(|x| x.sample.attempt).collect::<Vec<_>>());
    }

    #[test]
    fn dataset_round_trip_and_corruption() {
        let code = qc_96_48();
        let dir = tempfile::tempdir().unwrap();
        for kind in [DatasetKind::D1, DatasetKind::D2] {
            let cfg = GenerationConfig { kind, ..config(30) };
            let records: Vec<TrainingRecord> = generate_labeled(&code, &cfg)
                .unwrap()
                .iter()
                .map(|lf| TrainingRecord::from_frame(&lf.sample.frame, lf.labels.clone(), kind))
                .collect();
            let path = dir.path().join(format!("{kind:?}.bin"));
            let written = write_dataset(&path, &cfg.header(&code, 0), &records).unwrap();
            assert_eq!(written.record_count, 30);
            let (header, back) = read_dataset(&path).unwrap();
            assert_eq!(header, written);
            assert_eq!(back, records);

            let bytes = std::fs::read(&path).unwrap();
            std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
            assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
            let mut bad = bytes.clone();
            bad[0] = b'X';
            std::fs::write(&path, &bad).unwrap();
            assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
            let mut miscounted = bytes.clone();
            miscounted[7] = 31;
            std::fs::write(&path, &miscounted).unwrap();
            assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
        }
    }

    #[test]
    fn empty_dataset_round_trips() {
        let code = qc_96_48();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        let header = config(1).header(&code, 0);
        write_dataset(&path, &header, &[]).unwrap();
        let (h, r) = read_dataset(&path).unwrap();
        assert_eq!(h, header);
        assert!(r.is_empty());
    }

    #[test]
    fn writer_rejects_wrong_shapes() {
        let code = qc_96_48();
        let dir = tempfile::tempdir().unwrap();
        let mut w = DatasetWriter::create(dir.path().join("x.bin"), config(1).header(&code, 0)).unwrap();
        let rec = TrainingRecord {
            abs_l_ch: vec![0.0; 95],
            s_ch: BitVector::zeros(48),
            labels: BitVector::zeros(96),
            y: None,
        };
        assert!(w.write(&rec).is_err());
    }
}
