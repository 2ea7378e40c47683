//! BPSK over the binary-input AWGN channel.

use crate::bits::BitVector;
use crate::code::ParityCheckCode;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Noise variance `N0/2` for unit-energy BPSK at the given Eb/N0 and code rate.
pub fn sigma2_from_ebn0(eb_n0_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("rate {rate} not in (0, 1]")));
    }
    Ok(1.0 / (2.0 * rate * 10f64.powf(eb_n0_db / 10.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SnrSpec {
    pub eb_n0_db: f64,
    pub rate: f64,
    pub sigma2: f64,
}

impl SnrSpec {
    pub fn new(eb_n0_db: f64, rate: f64) -> Result<Self> {
        Ok(SnrSpec {
            eb_n0_db,
            rate,
            sigma2: sigma2_from_ebn0(eb_n0_db, rate)?,
        })
    }

    pub fn for_code(eb_n0_db: f64, code: &ParityCheckCode) -> Result<Self> {
        Self::new(eb_n0_db, code.rate())
    }
}

/// `x = (-1)^c`.
pub fn modulate(c: &BitVector) -> Vec<f64> {
    c.iter().map(|b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Channel observation of one frame and everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub y: Vec<f64>,
    pub l_ch: Vec<f64>,
    /// Hard decision, `z_i = 1` iff `y_i <= 0`.
    pub z: BitVector,
    pub s_ch: BitVector,
    pub sigma2: f64,
}

impl LlrFrame {
    pub fn from_received(code: &ParityCheckCode, y: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
        }
        if y.len() != code.n() {
            return Err(Error::LengthMismatch {
                expected: code.n(),
                got: y.len(),
            });
        }
        let l_ch = y.iter().map(|&v| 2.0 * v / sigma2).collect();
        let z: BitVector = y.iter().map(|&v| v <= 0.0).collect();
        let s_ch = code.syndrome_unchecked(z.as_slice());
        Ok(LlrFrame { y, l_ch, z, s_ch, sigma2 })
    }

    /// Concatenation `(|L^ch|, s^ch)` with the syndrome as 0.0/1.0 values.
    pub fn syndrome_features(&self) -> Vec<f64> {
        self.l_ch
            .iter()
            .map(|v| v.abs())
            .chain(self.s_ch.iter().map(f64::from))
            .collect()
    }
}

/// Adds i.i.d. `N(0, sigma2)` noise to `x` and derives the frame.
pub fn transmit(code: &ParityCheckCode, x: &[f64], sigma2: f64, rng: &mut StreamRng) -> Result<LlrFrame> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }
    let sigma = sigma2.sqrt();
    let y = x.iter().map(|&xi| xi + sigma * rng.gaussian()).collect();
    LlrFrame::from_received(code, y, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::hamming_7_4;

    #[test]
    fn sigma2_examples() {
        assert_eq!(sigma2_from_ebn0(0.0, 1.0).unwrap(), 0.5);
        assert!((sigma2_from_ebn0(3.0, 0.5).unwrap() - 0.50119).abs() < 1e-5);
        assert!(sigma2_from_ebn0(4.0, 0.5).unwrap() < sigma2_from_ebn0(3.0, 0.5).unwrap());
        assert!(sigma2_from_ebn0(1.0, 0.0).is_err());
        assert!(sigma2_from_ebn0(1.0, 1.5).is_err());
    }

    #[test]
    fn modulation_examples() {
        assert_eq!(modulate(&BitVector::parse("00").unwrap()), vec![1.0, 1.0]);
        assert_eq!(modulate(&BitVector::parse("101").unwrap()), vec![-1.0, 1.0, -1.0]);
    }

    #[test]
    fn llr_arithmetic() {
        let code = ParityCheckCode::from_dense(&[vec![1]]).unwrap();
        let f = LlrFrame::from_received(&code, vec![1.0], 0.5).unwrap();
        assert_eq!(f.l_ch, vec![4.0]);
        assert_eq!(f.z, BitVector::zeros(1));
    }

    #[test]
    fn hard_decision_treats_zero_as_one() {
        let code = ParityCheckCode::from_dense(&[vec![1, 1]]).unwrap();
        let f = LlrFrame::from_received(&code, vec![0.0, 0.3], 1.0).unwrap();
        assert_eq!(f.z, BitVector::parse("10").unwrap());
        assert_eq!(f.s_ch, BitVector::parse("1").unwrap());
    }

    #[test]
    fn vanishing_noise_recovers_codeword() {
        let code = hamming_7_4();
        let mut rng = StreamRng::new(5, 0);
        for c in code.enumerate_codewords(16).unwrap() {
            let f = transmit(&code, &modulate(&c), 1e-12, &mut rng).unwrap();
            assert_eq!(f.z, c);
            assert!(f.s_ch.is_zero());
        }
    }

    #[test]
    fn rejects_non_positive_variance() {
        let code = hamming_7_4();
        let mut rng = StreamRng::new(5, 0);
        assert!(transmit(&code, &[1.0; 7], 0.0, &mut rng).is_err());
        assert!(transmit(&code, &[1.0; 7], -1.0, &mut rng).is_err());
    }

    #[test]
    fn noise_moments_match_variance() {
        let code = ParityCheckCode::from_dense(&[vec![1; 1000]]).unwrap();
        let sigma2 = 0.7;
        let x = vec![1.0; 1000];
        let mut rng = StreamRng::new(42, 0);
        let (mut sum, mut sumsq, mut count) = (0.0, 0.0, 0.0);
        for _ in 0..1000 {
            let f = transmit(&code, &x, sigma2, &mut rng).unwrap();
            for (yi, xi) in f.y.iter().zip(&x) {
                let e = yi - xi;
                sum += e;
                sumsq += e * e;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let var = sumsq / count - mean * mean;
        // 1% of sigma2 as an absolute bound on the mean; sampling sd of the mean is ~8e-4.
        assert!(mean.abs() < 0.01 * sigma2, "mean {mean}");
        assert!((var - sigma2).abs() < 0.01 * sigma2, "var {var}");
    }
}
