use mrbp_core::code::squared_distance;
use mrbp_core::codes::{hamming_7_4, qc_96_48};
use mrbp_core::dataset::{generate_labeled, GenerationConfig, LabelPolicy};
use mrbp_core::mrbp::mrbp_success_given_labels;
use mrbp_core::sim::{DecoderKind, SimConfig, Simulator};
use mrbp_core::*;

/// Dense sum-product decoder with its own noise source, sharing nothing with the crate.
struct ReferenceSim {
    h: Vec<Vec<u8>>,
    state: u64,
    spare: Option<f64>,
}

impl ReferenceSim {
    fn next(&mut self) -> f64 {
        // xorshift64*
        self.state ^= self.state >> 12;
        self.state ^= self.state << 25;
        self.state ^= self.state >> 27;
        let v = self.state.wrapping_mul(0x2545_f491_4f6c_dd1d);
        ((v >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    fn normal(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        let (u, v) = (self.next(), self.next());
        let r = (-2.0 * u.ln()).sqrt();
        self.spare = Some(r * (std::f64::consts::TAU * v).sin());
        r * (std::f64::consts::TAU * v).cos()
    }

    fn frame_fails(&mut self, sigma2: f64, iters: usize) -> bool {
        let (m, n) = (self.h.len(), self.h[0].len());
        let l: Vec<f64> = (0..n).map(|_| 2.0 * (1.0 + sigma2.sqrt() * self.normal()) / sigma2).collect();
        let mut c2v = vec![vec![0.0; n]; m];
        let mut hard: Vec<u8> = l.iter().map(|&v| u8::from(v <= 0.0)).collect();
        let ok = |hard: &[u8]| self.h.iter().all(|row| row.iter().zip(hard).filter(|(&a, &b)| a == 1 && b == 1).count() % 2 == 0);
        for _ in 0..iters {
            if ok(&hard) {
                break;
            }
            let app: Vec<f64> = (0..n).map(|i| l[i] + (0..m).map(|j| c2v[j][i]).sum::<f64>()).collect();
            for j in 0..m {
                let row: Vec<f64> = (0..n)
                    .map(|i| {
                        if self.h[j][i] == 0 {
                            return 0.0;
                        }
                        let p: f64 = (0..n)
                            .filter(|&k| k != i && self.h[j][k] == 1)
                            .map(|k| ((app[k] - c2v[j][k]) / 2.0).tanh())
                            .product();
                        2.0 * p.clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh()
                    })
                    .collect();
                c2v[j] = row;
            }
            hard = (0..n).map(|i| u8::from(l[i] + (0..m).map(|j| c2v[j][i]).sum::<f64>() <= 0.0)).collect();
        }
        hard.iter().any(|&b| b == 1)
    }
}

#[test]
fn bp_fer_matches_an_independent_simulator() {
    const FRAMES: u64 = 20_000;
    let code = hamming_7_4();
    let cfg = SimConfig {
        decoder: DecoderKind::Bp,
        snr_db: vec![5.0],
        max_frames: FRAMES,
        target_errors: FRAMES,
        ..SimConfig::default()
    };
    let ours = Simulator::new(&code, cfg, None).unwrap().run_point(0).unwrap();
    assert_eq!(ours.frames, FRAMES);

    let h: Vec<Vec<u8>> = (0..code.m())
        .map(|j| (0..code.n()).map(|i| u8::from(code.row(j).contains(&i))).collect())
        .collect();
    let mut reference = ReferenceSim { h, state: 0x9e37_79b9_7f4a_7c15, spare: None };
    let sigma2 = SnrSpec::for_code(5.0, &code).unwrap().sigma2;
    let ref_errors = (0..FRAMES).filter(|_| reference.frame_fails(sigma2, 20)).count();

    let (p1, p2) = (ours.fer, ref_errors as f64 / FRAMES as f64);
    let se = (p1 * (1.0 - p1) / FRAMES as f64 + p2 * (1.0 - p2) / FRAMES as f64).sqrt();
    assert!((p1 - p2).abs() <= 3.0 * se, "ours {p1}, reference {p2}, 3se {}", 3.0 * se);
}

#[test]
fn fer_does_not_increase_with_rounds() {
    let code = qc_96_48();
    let fer = |decoder, rounds| {
        let cfg = SimConfig {
            decoder,
            rounds,
            snr_db: vec![2.5],
            max_frames: 1500,
            target_errors: 1500,
            seed: 8,
            ..SimConfig::default()
        };
        Simulator::new(&code, cfg, None).unwrap().run_point(0).unwrap().frame_errors
    };
    let counts = [fer(DecoderKind::Bp, 1), fer(DecoderKind::Mrbp, 1), fer(DecoderKind::Mrbp, 3), fer(DecoderKind::Mrbp, 8)];
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    assert!(counts[3] < counts[0], "{counts:?}");
}

#[test]
fn list_success_follows_labels_for_every_rule() {
    let code = qc_96_48();
    let snr = SnrSpec::for_code(3.0, &code).unwrap();
    let config = GenerationConfig {
        label_policy: LabelPolicy::AnyCodeword,
        ..GenerationConfig::new(snr, 60, 5)
    };
    let labeled = generate_labeled(&code, &config).unwrap();
    let mrbp = MrbpConfig {
        rounds: 4,
        ..MrbpConfig::default()
    };
    for kind in [RuleKind::Chmag, RuleKind::Appmag, RuleKind::Nsmea] {
        let rule = kind.build(None).unwrap();
        for lf in &labeled {
            let r = mrbp_decode(&code, &lf.sample.frame, rule.as_ref(), &mrbp).unwrap();
            let order = &r.ranking.as_ref().unwrap().order;
            assert_eq!(r.success, mrbp_success_given_labels(&lf.labels, order, 4), "{kind} attempt {}", lf.sample.attempt);
            for (t, &vn) in order.iter().take(4).enumerate() {
                let listed = r.candidates.entries().iter().any(|c| c.round == t + 1);
                // Rounds that do not converge never contribute a candidate.
                if lf.labels.get(vn) == 0 {
                    assert!(!listed);
                }
            }
        }
    }
}

#[test]
fn decision_is_the_closest_candidate_and_latency_is_bounded() {
    let code = qc_96_48();
    let snr = SnrSpec::for_code(2.0, &code).unwrap();
    let rule = RuleKind::Appmag.build(None).unwrap();
    let cfg = MrbpConfig {
        rounds: 10,
        ..MrbpConfig::default()
    };
    let mut multi = 0;
    for f in 0..400 {
        let mut rng = StreamRng::new(21, f);
        let frame = transmit(&code, &modulate(&BitVector::zeros(96)), snr.sigma2, &mut rng).unwrap();
        let r = mrbp_decode(&code, &frame, rule.as_ref(), &cfg).unwrap();
        assert!(r.bp_iterations_total <= cfg.l0 + cfg.l1);
        assert!(r.bp_iterations_sum >= r.bp_iterations_total);
        if r.success {
            assert!(code.is_codeword(&r.c_hat).unwrap());
        }
        let best = squared_distance(&frame.y, &r.c_hat);
        for c in r.candidates.entries() {
            assert!(code.is_codeword(&c.codeword).unwrap());
            assert!(squared_distance(&frame.y, &c.codeword) >= best);
        }
        multi += (r.candidates.len() > 1) as usize;
    }
    assert!(multi > 0, "no frame produced more than one candidate");
}
