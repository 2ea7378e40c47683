//! Multi-round BP: on an initial failure, re-decode `T` single-VN
//! flip-and-saturate perturbations and keep the most likely converged codeword.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::bp::{BpDecoder, BpOutcome, CheckRule, DEFAULT_LLR_MAX};
use crate::channel::LlrFrame;
use crate::code::{squared_distance, ParityCheckCode};
use crate::error::{Error, Result};
use crate::selection::{ReliabilityRanking, SelectionRule};

/// Default saturation magnitude standing in for an infinite LLR.
pub const DEFAULT_SAT: f64 = 1e6;

/// Replaces `l_ch[vn]` by `-sat * sign(l_ch[vn])`, with `sign(0) = +1`.
pub fn perturb(l_ch: &[f64], vn: usize, sat: f64) -> Result<Vec<f64>> {
    if vn >= l_ch.len() {
        return Err(Error::InvalidArgument(format!("VN {vn} out of range for n = {}", l_ch.len())));
    }
    if !(sat > 0.0) {
        return Err(Error::InvalidArgument(format!("saturation must be positive, got {sat}")));
    }
    let mut out = l_ch.to_vec();
    out[vn] = if l_ch[vn] < 0.0 { sat } else { -sat };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrbpConfig {
    /// Number of perturbation rounds `T`.
    pub rounds: usize,
    /// Iteration budget of the initial BP attempt.
    pub l0: usize,
    /// Iteration budget of each perturbed attempt.
    pub l1: usize,
    pub sat: f64,
    pub llr_max: f64,
    pub check_rule: CheckRule,
    /// Execute the rounds on the rayon pool instead of sequentially; results are identical.
    pub parallel_rounds: bool,
}

impl Default for MrbpConfig {
    fn default() -> Self {
        MrbpConfig {
            rounds: 5,
            l0: 20,
            l1: 20,
            sat: DEFAULT_SAT,
            llr_max: DEFAULT_LLR_MAX,
            check_rule: CheckRule::SumProduct,
            parallel_rounds: false,
        }
    }
}

impl MrbpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if self.l1 == 0 || self.l1 > self.l0 {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= l1 <= l0, got l0 = {}, l1 = {}",
                self.l0, self.l1
            )));
        }
        if !(self.sat > 0.0) || !(self.llr_max > 0.0) {
            return Err(Error::InvalidArgument("sat and llr_max must be positive".into()));
        }
        Ok(())
    }
}

/// A converged codeword and the 1-based round that first produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub codeword: BitVector,
    pub round: usize,
}

/// Distinct converged codewords in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateList {
    entries: Vec<Candidate>,
}

impl CandidateList {
    /// Adds `codeword` unless already present. Rounds must be pushed in increasing order.
    pub fn push(&mut self, codeword: BitVector, round: usize) {
        if !self.entries.iter().any(|c| c.codeword == codeword) {
            self.entries.push(Candidate { codeword, round });
        }
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The candidate minimizing `||y - (-1)^c||`; ties keep the earliest round.
    pub fn most_likely(&self, y: &[f64]) -> Option<&Candidate> {
        let mut best: Option<(f64, &Candidate)> = None;
        for c in &self.entries {
            let d = squared_distance(y, &c.codeword);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        best.map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrbpResult {
    pub success: bool,
    pub c_hat: BitVector,
    /// Perturbation rounds executed (0 when the initial attempt converged).
    pub rounds_run: usize,
    /// 1-based round of the selected candidate.
    pub winning_round: Option<usize>,
    /// Latency in BP iterations with rounds running in parallel:
    /// initial iterations plus the longest round.
    pub bp_iterations_total: usize,
    /// Iterations summed over the initial attempt and every round.
    pub bp_iterations_sum: usize,
    pub candidates: CandidateList,
    /// Ranking used for the rounds, when any were run.
    pub ranking: Option<ReliabilityRanking>,
}

/// Runs the multi-round decoder on one frame.
pub fn mrbp_decode(
    code: &ParityCheckCode,
    frame: &LlrFrame,
    rule: &dyn SelectionRule,
    config: &MrbpConfig,
) -> Result<MrbpResult> {
    config.validate()?;
    if frame.l_ch.len() != code.n() {
        return Err(Error::LengthMismatch {
            expected: code.n(),
            got: frame.l_ch.len(),
        });
    }
    let mut decoder = BpDecoder::with_options(code, config.llr_max, config.check_rule);
    let initial = decoder.decode(&frame.l_ch, config.l0, rule.needs_trace());
    mrbp_continue(code, frame, rule, config, initial)
}

/// Continues from an already computed initial BP outcome.
pub(crate) fn mrbp_continue(
    code: &ParityCheckCode,
    frame: &LlrFrame,
    rule: &dyn SelectionRule,
    config: &MrbpConfig,
    initial: BpOutcome,
) -> Result<MrbpResult> {
    if initial.converged {
        return Ok(MrbpResult {
            success: true,
            c_hat: initial.c_hat,
            rounds_run: 0,
            winning_round: None,
            bp_iterations_total: initial.iterations_used,
            bp_iterations_sum: initial.iterations_used,
            candidates: CandidateList::default(),
            ranking: None,
        });
    }

    let ranking = rule.rank(code, frame, &initial)?;
    let targets = ranking.least_reliable(config.rounds).to_vec();
    let run_round = |vn: usize| -> Result<BpOutcome> {
        let l = perturb(&frame.l_ch, vn, config.sat)?;
        Ok(BpDecoder::with_options(code, config.llr_max, config.check_rule).decode(&l, config.l1, false))
    };
    let outcomes: Vec<BpOutcome> = if config.parallel_rounds {
        targets.par_iter().map(|&vn| run_round(vn)).collect::<Result<_>>()?
    } else {
        targets.iter().map(|&vn| run_round(vn)).collect::<Result<_>>()?
    };

    let mut candidates = CandidateList::default();
    let mut longest = 0;
    let mut sum = initial.iterations_used;
    for (t, out) in outcomes.into_iter().enumerate() {
        longest = longest.max(out.iterations_used);
        sum += out.iterations_used;
        if out.converged {
            candidates.push(out.c_hat, t + 1);
        }
    }

    let (success, c_hat, winning_round) = match candidates.most_likely(&frame.y) {
        Some(best) => (true, best.codeword.clone(), Some(best.round)),
        None => (false, frame.z.clone(), None),
    };
    Ok(MrbpResult {
        success,
        c_hat,
        rounds_run: targets.len(),
        winning_round,
        bp_iterations_total: initial.iterations_used + longest,
        bp_iterations_sum: sum,
        candidates,
        ranking: Some(ranking),
    })
}

/// True iff any of the first `t` ranked VNs carries a positive label.
pub fn mrbp_success_given_labels(labels: &BitVector, order: &[usize], t: usize) -> bool {
    order.iter().take(t).any(|&vn| labels.get(vn) == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{transmit, SnrSpec};
    use crate::codes::qc_96_48;
    use crate::rng::StreamRng;
    use crate::selection::{FixedOrder, Nsmea};

    #[test]
    fn perturb_examples() {
        assert_eq!(perturb(&[2.5, -0.3, 1.1], 1, 1e6).unwrap(), vec![2.5, 1e6, 1.1]);
        assert_eq!(perturb(&[4.0, -0.3, 1.1], 0, 1e6).unwrap(), vec![-1e6, -0.3, 1.1]);
        assert_eq!(perturb(&[0.0, 1.0], 0, 7.0).unwrap(), vec![-7.0, 1.0]);
        assert!(perturb(&[1.0], 1, 1e6).is_err());
        assert!(perturb(&[1.0], 0, 0.0).is_err());
    }

    #[test]
    fn eq3_selection_by_distance() {
        let y = [0.9, -1.1, 0.8];
        let mut list = CandidateList::default();
        list.push(BitVector::parse("000").unwrap(), 1);
        list.push(BitVector::parse("010").unwrap(), 2);
        list.push(BitVector::parse("000").unwrap(), 3);
        assert_eq!(list.len(), 2);
        let d1 = squared_distance(&y, &BitVector::parse("010").unwrap());
        let d0 = squared_distance(&y, &BitVector::parse("000").unwrap());
        assert!((d1 - 0.06).abs() < 1e-12 && (d0 - 4.46).abs() < 1e-12);
        assert_eq!(list.most_likely(&y).unwrap().codeword, BitVector::parse("010").unwrap());
    }

    #[test]
    fn ties_keep_the_earliest_round() {
        let mut list = CandidateList::default();
        list.push(BitVector::parse("01").unwrap(), 2);
        list.push(BitVector::parse("10").unwrap(), 4);
        assert_eq!(list.most_likely(&[0.0, 0.0]).unwrap().round, 2);
    }

    #[test]
    fn label_oracle_examples() {
        let labels = BitVector::parse("010").unwrap();
        assert!(mrbp_success_given_labels(&labels, &[1, 0, 2], 1));
        assert!(!mrbp_success_given_labels(&BitVector::zeros(3), &[0, 1, 2], 3));
        assert!(mrbp_success_given_labels(&labels, &[0, 2, 1], 3));
        assert!(!mrbp_success_given_labels(&labels, &[0, 2, 1], 2));
    }

    #[test]
    fn config_validation() {
        let mut c = MrbpConfig::default();
        assert!(c.validate().is_ok());
        c.rounds = 0;
        assert!(c.validate().is_err());
        let c = MrbpConfig { l1: 21, ..MrbpConfig::default() };
        assert!(c.validate().is_err());
    }

    fn failures(count: usize, db: f64) -> Vec<LlrFrame> {
        let code = qc_96_48();
        let snr = SnrSpec::for_code(db, &code).unwrap();
        let x = vec![1.0; 96];
        let mut out = Vec::new();
        let mut f = 0;
        while out.len() < count {
            let mut rng = StreamRng::new(1234, f);
            f += 1;
            let frame = transmit(&code, &x, snr.sigma2, &mut rng).unwrap();
            if !crate::bp::bp_decode(&code, &frame.l_ch, 20).converged {
                out.push(frame);
            }
        }
        out
    }

    #[test]
    fn converged_frames_exit_early() {
        let code = qc_96_48();
        let frame = LlrFrame::from_received(&code, vec![1.0; 96], 0.5).unwrap();
        let r = mrbp_decode(&code, &frame, &Nsmea, &MrbpConfig::default()).unwrap();
        assert!(r.success && r.rounds_run == 0 && r.candidates.is_empty());
        assert!(r.c_hat.is_zero());
    }

    #[test]
    fn parallel_and_sequential_rounds_agree_and_latency_is_bounded() {
        let code = qc_96_48();
        let seq = MrbpConfig { rounds: 10, ..MrbpConfig::default() };
        let par = MrbpConfig { parallel_rounds: true, ..seq.clone() };
        for frame in failures(15, 2.0) {
            let a = mrbp_decode(&code, &frame, &Nsmea, &seq).unwrap();
            let b = mrbp_decode(&code, &frame, &Nsmea, &par).unwrap();
            assert_eq!(a, b);
            assert!(a.bp_iterations_total <= seq.l0 + seq.l1);
            assert_eq!(a.rounds_run, 10);
            if a.success {
                assert!(code.is_codeword(&a.c_hat).unwrap());
                let best = squared_distance(&frame.y, &a.c_hat);
                for c in a.candidates.entries() {
                    assert!(best <= squared_distance(&frame.y, &c.codeword));
                }
            } else {
                assert_eq!(a.c_hat, frame.z);
            }
        }
    }

    #[test]
    fn candidate_lists_grow_with_t() {
        let code = qc_96_48();
        for frame in failures(10, 2.5) {
            let order: Vec<usize> = (0..96).rev().collect();
            let mut prev: Option<CandidateList> = None;
            for t in [1, 2, 5, 10] {
                let cfg = MrbpConfig { rounds: t, ..MrbpConfig::default() };
                let r = mrbp_decode(&code, &frame, &FixedOrder(order.clone()), &cfg).unwrap();
                if let Some(p) = &prev {
                    for c in p.entries() {
                        assert!(r.candidates.entries().contains(c));
                    }
                }
                prev = Some(r.candidates);
            }
        }
    }
}
