//! Flooding-schedule belief propagation on the Tanner graph.
//!
//! One iteration updates every VN→CN message, then every CN→VN message, then
//! the APP LLRs, and finally tests the hard decision against the syndrome. The
//! hard decision of the channel LLRs is tested once before the first iteration.

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::code::ParityCheckCode;

/// Default magnitude bound on every LLR inside the decoder.
pub const DEFAULT_LLR_MAX: f64 = 1e6;

/// Bound on the product of `tanh` terms before `atanh`.
pub const ATANH_CLIP: f64 = 1.0 - 1e-12;

/// Check-node update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckRule {
    /// Exact `2 atanh(prod tanh(x/2))`.
    #[default]
    SumProduct,
    MinSum,
}

/// Per-iteration message signs. A sign bit is set when the value is `<= 0`,
/// the same convention as the hard decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpTrace {
    n: usize,
    num_edges: usize,
    iterations: usize,
    ext_negative: Vec<bool>,
    app_negative: Vec<bool>,
}

impl BpTrace {
    fn new(n: usize, num_edges: usize) -> Self {
        BpTrace {
            n,
            num_edges,
            iterations: 0,
            ext_negative: Vec::new(),
            app_negative: Vec::new(),
        }
    }

    /// Builds a trace from raw per-iteration sign arrays (`true` = non-positive).
    ///
    /// `ext` holds `iterations × num_edges` CN→VN signs, `app` holds `iterations × n` APP signs.
    pub fn from_signs(n: usize, num_edges: usize, ext: Vec<bool>, app: Vec<bool>) -> Option<Self> {
        if num_edges == 0 && n == 0 {
            return None;
        }
        let iterations = app.len().checked_div(n).or(ext.len().checked_div(num_edges))?;
        if ext.len() != iterations * num_edges || app.len() != iterations * n {
            return None;
        }
        Some(BpTrace {
            n,
            num_edges,
            iterations,
            ext_negative: ext,
            app_negative: app,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sign bit of the CN→VN message on edge `e` after iteration `it` (0-based).
    pub fn ext_negative(&self, it: usize, e: usize) -> bool {
        self.ext_negative[it * self.num_edges + e]
    }

    /// Sign bit of the APP LLR of VN `i` after iteration `it` (0-based).
    pub fn app_negative(&self, it: usize, i: usize) -> bool {
        self.app_negative[it * self.n + i]
    }

    pub fn ext_signs(&self) -> &[bool] {
        &self.ext_negative
    }

    pub fn app_signs(&self) -> &[bool] {
        &self.app_negative
    }
}

/// Result of one BP run.
#[derive(Debug, Clone, PartialEq)]
pub struct BpOutcome {
    pub converged: bool,
    pub c_hat: BitVector,
    pub l_app: Vec<f64>,
    /// Message-passing iterations executed; 0 when the channel hard decision is already a codeword.
    pub iterations_used: usize,
    pub trace: Option<BpTrace>,
}

/// A BP decoder bound to one code, owning its message buffers.
#[derive(Debug, Clone)]
pub struct BpDecoder<'a> {
    code: &'a ParityCheckCode,
    llr_max: f64,
    rule: CheckRule,
    stop_on_codeword: bool,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> BpDecoder<'a> {
    pub fn new(code: &'a ParityCheckCode) -> Self {
        Self::with_options(code, DEFAULT_LLR_MAX, CheckRule::SumProduct)
    }

    pub fn with_options(code: &'a ParityCheckCode, llr_max: f64, rule: CheckRule) -> Self {
        assert!(llr_max > 0.0, "llr_max must be positive");
        let e = code.num_edges();
        BpDecoder {
            code,
            llr_max,
            rule,
            stop_on_codeword: true,
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            scratch: Vec::new(),
        }
    }

    pub fn code(&self) -> &'a ParityCheckCode {
        self.code
    }

    #[cfg(test)]
    pub(crate) fn without_early_stop(mut self) -> Self {
        self.stop_on_codeword = false;
        self
    }

    /// Decodes channel LLRs `l_ch` with at most `max_iters` iterations.
    ///
    /// # Panics
    ///
    /// Panics if `l_ch.len() != n` or `max_iters == 0`.
    pub fn decode(&mut self, l_ch: &[f64], max_iters: usize, trace: bool) -> BpOutcome {
        let code = self.code;
        let n = code.n();
        assert_eq!(l_ch.len(), n, "channel LLR length does not match the code");
        assert!(max_iters >= 1, "max_iters must be at least 1");
        let lim = self.llr_max;
        let clamp = |x: f64| x.clamp(-lim, lim);

        let prior: Vec<f64> = l_ch.iter().map(|&x| clamp(x)).collect();
        let mut l_app = prior.clone();
        let mut hard: Vec<u8> = l_app.iter().map(|&x| u8::from(x <= 0.0)).collect();
        let mut trace_buf = trace.then(|| BpTrace::new(n, code.num_edges()));

        let mut converged = code.is_codeword_unchecked(&hard);
        let mut iterations_used = 0;
        if !(converged && self.stop_on_codeword) {
            self.c2v.iter_mut().for_each(|m| *m = 0.0);
            for it in 1..=max_iters {
                // VN -> CN
                for i in 0..n {
                    let edges = code.var_edges(i);
                    let total: f64 = prior[i] + edges.iter().map(|&e| self.c2v[e]).sum::<f64>();
                    for &e in edges {
                        self.v2c[e] = clamp(total - self.c2v[e]);
                    }
                }
                // CN -> VN
                for j in 0..code.m() {
                    let range = code.check_edge_range(j);
                    match self.rule {
                        CheckRule::SumProduct => self.update_check_tanh(range),
                        CheckRule::MinSum => self.update_check_min_sum(range),
                    }
                }
                // APP and hard decision
                for i in 0..n {
                    let sum: f64 = code.var_edges(i).iter().map(|&e| self.c2v[e]).sum();
                    l_app[i] = clamp(prior[i] + sum);
                    hard[i] = u8::from(l_app[i] <= 0.0);
                }
                if let Some(t) = trace_buf.as_mut() {
                    t.ext_negative.extend(self.c2v.iter().map(|&m| m <= 0.0));
                    t.app_negative.extend(hard.iter().map(|&b| b == 1));
                    t.iterations += 1;
                }
                iterations_used = it;
                converged = code.is_codeword_unchecked(&hard);
                if converged && self.stop_on_codeword {
                    break;
                }
            }
        }

        BpOutcome {
            converged,
            c_hat: BitVector::from_bits(hard).expect("hard decisions are binary"),
            l_app,
            iterations_used,
            trace: trace_buf,
        }
    }

    fn update_check_tanh(&mut self, range: std::ops::Range<usize>) {
        let lim = self.llr_max;
        let d = range.len();
        let t = &mut self.scratch;
        t.clear();
        t.extend(self.v2c[range.clone()].iter().map(|&v| (0.5 * v).tanh()));
        // Exclusive products via forward sweep then backward sweep.
        let mut fwd = 1.0;
        for k in 0..d {
            self.c2v[range.start + k] = fwd;
            fwd *= t[k];
        }
        let mut bwd = 1.0;
        for k in (0..d).rev() {
            let p = (self.c2v[range.start + k] * bwd).clamp(-ATANH_CLIP, ATANH_CLIP);
            self.c2v[range.start + k] = (2.0 * p.atanh()).clamp(-lim, lim);
            bwd *= t[k];
        }
    }

    fn update_check_min_sum(&mut self, range: std::ops::Range<usize>) {
        let msgs = &self.v2c[range.clone()];
        let mut sign_neg = false;
        let (mut min1, mut min2, mut argmin) = (f64::INFINITY, f64::INFINITY, usize::MAX);
        for (k, &v) in msgs.iter().enumerate() {
            sign_neg ^= v < 0.0;
            let a = v.abs();
            if a < min1 {
                min2 = min1;
                min1 = a;
                argmin = k;
            } else if a < min2 {
                min2 = a;
            }
        }
        for k in 0..msgs.len() {
            let v = self.v2c[range.start + k];
            let mag = if k == argmin { min2 } else { min1 };
            let neg = sign_neg ^ (v < 0.0);
            let mag = if mag.is_finite() { mag.min(self.llr_max) } else { 0.0 };
            self.c2v[range.start + k] = if neg { -mag } else { mag };
        }
    }
}

/// Sum-product decoding without trace.
pub fn bp_decode(code: &ParityCheckCode, l_ch: &[f64], max_iters: usize) -> BpOutcome {
    BpDecoder::new(code).decode(l_ch, max_iters, false)
}

/// Sum-product decoding recording a [`BpTrace`].
pub fn bp_decode_traced(code: &ParityCheckCode, l_ch: &[f64], max_iters: usize) -> BpOutcome {
    BpDecoder::new(code).decode(l_ch, max_iters, true)
}
