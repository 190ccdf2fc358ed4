mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikeq::encoding::{
    build_frame, frame_width, ternary_encode, DriveMode, TernaryEncoder, TernaryEncoderConfig,
};
use spikeq::equalizers::{
    classical_dfe, lmmse_equalizer, map_detector, zf_equalizer, DfeArchitecture, ErrorCount, FeedbackMode,
    NeuralDfe,
};
use spikeq::harness::{point_seeds, simulate_point, wilson_interval, ExperimentConfig, Receiver};
use spikeq::link::{
    add_awgn_with, apply_channel, generate_bits, gray_demap, gray_map, sigma2_for, transmit, Constellation,
    FirChannel,
};
use spikeq::snn::checkpoint::Checkpoint;
use spikeq::snn::{
    softmax, softmax_ce_batch, CellKind, Dynamics, LayerParams, LifParams, Network, Stimulus, SurrogateSpec,
};
use spikeq::C64;

fn c64() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn constellation(qam: bool) -> Constellation {
    if qam {
        Constellation::qam16()
    } else {
        Constellation::qpsk()
    }
}

// ---------------------------------------------------------------- link

proptest! {
    #[test]
    fn channel_is_linear(
        taps in prop::collection::vec(c64(), 1..8),
        x in prop::collection::vec((c64(), c64()), 0..40),
        a in c64(),
        b in c64(),
    ) {
        prop_assume!(taps.iter().any(|t| t.norm() > 0.0));
        let h = FirChannel::new("t", taps).unwrap();
        let x1: Vec<C64> = x.iter().map(|p| p.0).collect();
        let x2: Vec<C64> = x.iter().map(|p| p.1).collect();
        let mixed: Vec<C64> = x.iter().map(|p| a * p.0 + b * p.1).collect();
        let lhs = apply_channel(&mixed, &h);
        let (y1, y2) = (apply_channel(&x1, &h), apply_channel(&x2, &h));
        prop_assert_eq!(lhs.len(), x.len());
        for k in 0..x.len() {
            let rhs = a * y1[k] + b * y2[k];
            prop_assert!((lhs[k] - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()), "k={} {} vs {}", k, lhs[k], rhs);
        }
    }

    #[test]
    fn channel_matches_direct_convolution(
        taps in prop::collection::vec(c64(), 1..8),
        x in prop::collection::vec(c64(), 0..40),
    ) {
        prop_assume!(taps.iter().any(|t| t.norm() > 0.0));
        let h = FirChannel::new("t", taps.clone()).unwrap();
        let y = apply_channel(&x, &h);
        for (k, yk) in y.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (l, t) in taps.iter().enumerate() {
                if l <= k {
                    acc += t * x[k - l];
                }
            }
            prop_assert!((acc - yk).norm() <= 1e-12);
        }
    }

    #[test]
    fn stochastic_ops_are_pure(seed in any::<u64>(), n in 0usize..500, sigma2 in 0.0..2.0f64) {
        prop_assert_eq!(generate_bits(n, seed), generate_bits(n, seed));
        let x = vec![C64::new(1.0, -1.0); n];
        let a = add_awgn_with(&x, sigma2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = add_awgn_with(&x, sigma2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gray_round_trip(qam in any::<bool>(), seed in any::<u64>(), n in 0usize..64) {
        let c = constellation(qam);
        let bits = generate_bits(n * c.bits_per_symbol(), seed);
        let symbols = gray_map(&bits, &c).unwrap();
        prop_assert_eq!(gray_demap(&symbols, &c), bits);
    }

    #[test]
    fn noise_variance_convention(ebn0 in -10.0..30.0f64, qam in any::<bool>()) {
        let bps = constellation(qam).bits_per_symbol() as f64;
        let expect = (1.0 / bps) / 10f64.powf(ebn0 / 10.0);
        let got = sigma2_for(ebn0, bps as usize);
        prop_assert!(got > 0.0);
        prop_assert!((got - expect).abs() <= 1e-14 * expect);
    }
}

#[test]
fn nearest_neighbours_differ_in_one_bit() {
    for c in [Constellation::qpsk(), Constellation::qam16()] {
        let pts = c.points();
        let dmin = (0..pts.len())
            .flat_map(|i| (0..pts.len()).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| (pts[i] - pts[j]).norm())
            .fold(f64::INFINITY, f64::min);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if i != j && (pts[i] - pts[j]).norm() < dmin * (1.0 + 1e-9) {
                    let d = (c.labels()[i] ^ c.labels()[j]).count_ones();
                    assert_eq!(d, 1, "{} points {i} and {j}", c.name());
                }
            }
        }
        let energy: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
        assert!((energy - 1.0).abs() < 1e-12);
    }
}

#[test]
fn channel_output_energy_matches_taps() {
    let mut data = ChaCha8Rng::seed_from_u64(11);
    let mut noise = ChaCha8Rng::seed_from_u64(12);
    for (h, c) in [
        (FirChannel::proakis_a(), Constellation::qam16()),
        (FirChannel::proakis_b(), Constellation::qpsk()),
        (FirChannel::proakis_c(), Constellation::qpsk()),
    ] {
        let b = transmit(&c, &h, 0.0, 100_000, &mut data, &mut noise).unwrap();
        let power = b.received.iter().map(|y| y.norm_sqr()).sum::<f64>() / b.received.len() as f64;
        let energy: f64 = h.taps().iter().map(|t| t.norm_sqr()).sum();
        assert!((power / energy - 1.0).abs() < 0.01, "{}: {power} vs {energy}", h.name());
    }
}

// ------------------------------------------------------------ encoding

fn encoder_cfg() -> impl Strategy<Value = TernaryEncoderConfig> {
    (1u32..=12, 0.1..10.0f64).prop_map(|(m, y)| TernaryEncoderConfig::new(m, y).unwrap())
}

/// Value of a code, most significant bit first.
fn code_value(code: &[i8], cfg: &TernaryEncoderConfig) -> f64 {
    let m = code.len();
    code.iter()
        .enumerate()
        .map(|(b, &s)| f64::from(s) * 2f64.powi((m - 1 - b) as i32))
        .sum::<f64>()
        * cfg.resolution()
}

proptest! {
    #[test]
    fn encoding_is_monotone(cfg in encoder_cfg(), u1 in 0.0..=1.0f64, u2 in 0.0..=1.0f64) {
        let (y1, y2) = (u1.min(u2) * cfg.y_max, u1.max(u2) * cfg.y_max);
        let d1 = code_value(&ternary_encode(y1, &cfg), &cfg);
        let d2 = code_value(&ternary_encode(y2, &cfg), &cfg);
        prop_assert!(d1 <= d2);
    }

    #[test]
    fn encoding_is_antisymmetric(cfg in encoder_cfg(), y in -20.0..20.0f64) {
        let pos = ternary_encode(y, &cfg);
        let neg: Vec<i8> = ternary_encode(-y, &cfg).iter().map(|s| -s).collect();
        prop_assert_eq!(pos, neg);
    }

    #[test]
    fn encoding_is_ternary_and_bounded(cfg in encoder_cfg(), u in -1.0..1.0f64) {
        let levels = 2f64.powi(cfg.m_bits as i32);
        let y = u * (levels - 0.5) * cfg.resolution();
        let code = ternary_encode(y, &cfg);
        prop_assert_eq!(code.len(), cfg.m_bits as usize);
        prop_assert!(code.iter().all(|s| [-1, 0, 1].contains(s)));
        prop_assert!(code.iter().all(|&s| s == 0 || f64::from(s) == y.signum()));
        prop_assert!((code_value(&code, &cfg) - y).abs() <= cfg.resolution() / 2.0 + 1e-12);
    }

    #[test]
    fn saturation_gives_all_ones(cfg in encoder_cfg(), k in 1.0..5.0f64) {
        prop_assert!(ternary_encode(k * cfg.y_max, &cfg).iter().all(|&s| s == 1));
    }

    #[test]
    fn frame_layout(
        m in 1u32..6,
        n in 1usize..6,
        fb in prop::collection::vec(0usize..4, 0..5),
        window in prop::collection::vec(c64(), 1..6),
        qam in any::<bool>(),
    ) {
        let size = if qam { 16 } else { 4 };
        let window = &window[..n.min(window.len())];
        let enc = TernaryEncoder::new(TernaryEncoderConfig::new(m, 2.0).unwrap()).unwrap();
        let width = 2 * m as usize * window.len() + size * fb.len();
        prop_assert_eq!(frame_width(m, window.len(), size, fb.len()), width);
        let frame = build_frame(window, &fb, &enc, size, width, 3).unwrap();
        prop_assert_eq!(frame.width(), width);
        let tail = &frame.pattern()[2 * m as usize * window.len()..];
        for (chunk, &a) in tail.chunks(size).zip(&fb) {
            prop_assert_eq!(chunk.iter().map(|&x| i32::from(x)).sum::<i32>(), 1);
            prop_assert_eq!(chunk[a], 1);
        }
        prop_assert!(build_frame(window, &fb, &enc, size, width + 1, 3).is_err());
    }
}

// ---------------------------------------------------------------- snn

fn small_net(seed: u64, n_in: usize, n_hid: usize, n_out: usize, steps: usize, w: f64, v_th: f64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l1 = LayerParams::new(
        common::uniform(&mut rng, n_in, n_hid, w),
        Some(common::uniform(&mut rng, n_hid, n_hid, w)),
        CellKind::Lif,
    )
    .unwrap();
    let l2 = LayerParams::new(common::uniform(&mut rng, n_hid, n_out, w), None, CellKind::Li).unwrap();
    let hidden = LifParams {
        v_th,
        ..LifParams::HIDDEN
    };
    Network::new(vec![l1, l2], vec![hidden, LifParams::READOUT], Dynamics::default(), steps).unwrap()
}

fn drive_mode(impulse: bool) -> DriveMode {
    if impulse {
        DriveMode::Impulse
    } else {
        DriveMode::Constant
    }
}

proptest! {
    #[test]
    fn surrogate_in_unit_interval(slope in 0.01..1000.0f64, u in -1e3..1e3f64) {
        let g = SurrogateSpec { slope }.grad(u);
        prop_assert!(g > 0.0 && g <= 1.0);
        prop_assert_eq!(SurrogateSpec { slope }.grad(0.0), 1.0);
    }

    #[test]
    fn decay_factors_in_unit_interval(tau_m in 0.01..1e4f64, tau_s in 0.01..1e4f64, dt in 0.001..10.0f64) {
        let p = LifParams { tau_m, tau_s, dt, ..LifParams::HIDDEN };
        prop_assert!(p.alpha() > 0.0 && p.alpha() < 1.0);
        prop_assert!(p.beta() > 0.0 && p.beta() < 1.0);
    }

    #[test]
    fn linear_regime_matches_closed_form(
        seed in any::<u64>(),
        steps in 1usize..12,
        impulse in any::<bool>(),
        tau_m in 1.0..200.0f64,
        tau_s in 0.5..20.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_in, n_hid, n_out, batch) = (3, 4, 2, 2);
        let hidden = LifParams { v_th: f64::INFINITY, tau_m, tau_s, ..LifParams::HIDDEN };
        let w1 = common::uniform(&mut rng, n_in, n_hid, 1.0);
        let l1 = LayerParams::new(w1.clone(), Some(common::uniform(&mut rng, n_hid, n_hid, 1.0)), CellKind::Lif).unwrap();
        let l2 = LayerParams::new(common::uniform(&mut rng, n_hid, n_out, 1.0), None, CellKind::Li).unwrap();
        let w_li = common::uniform(&mut rng, n_in, n_out, 1.0);
        let x = common::uniform(&mut rng, batch, n_in, 1.0);
        let mode = drive_mode(impulse);
        let stim = Stimulus::new(x.clone(), mode);
        let active = |k: usize| !impulse || k == 0;

        let net = Network::new(vec![l1, l2], vec![hidden, LifParams::READOUT], Dynamics::default(), steps).unwrap();
        let (out, tape) = net.forward(&stim).unwrap();
        prop_assert!(out.iter().all(|&v| v == 0.0));
        let d = x.dot(&w1);
        for (k, v) in tape.membrane(0).iter().enumerate() {
            for ((b, j), &got) in v.indexed_iter() {
                let drive: Vec<f64> = (0..steps).map(|l| if active(l) { d[[b, j]] } else { 0.0 }).collect();
                let expect = common::linear_membrane(hidden.alpha(), hidden.beta(), &drive, k);
                prop_assert!((got - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "k={} {} vs {}", k, got, expect);
            }
        }

        let r = LifParams { tau_m, tau_s, ..LifParams::READOUT };
        let li = Network::new(vec![LayerParams::new(w_li.clone(), None, CellKind::Li).unwrap()], vec![r], Dynamics::default(), steps).unwrap();
        let out = li.infer(&stim).unwrap();
        let d = x.dot(&w_li);
        for ((b, j), &got) in out.indexed_iter() {
            let drive: Vec<f64> = (0..steps).map(|l| if active(l) { d[[b, j]] } else { 0.0 }).collect();
            let expect = common::linear_membrane(r.alpha(), r.beta(), &drive, steps);
            prop_assert!((got - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn states_stay_within_geometric_bounds(
        seed in any::<u64>(),
        w in 0.01..3.0f64,
        v_th in 0.05..5.0f64,
        steps in 1usize..30,
    ) {
        let (n_in, n_hid, n_out) = (5, 6, 3);
        let net = small_net(seed, n_in, n_hid, n_out, steps, w, v_th);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let stim = Stimulus::new(common::uniform(&mut rng, 4, n_in, 1.0), DriveMode::Constant);
        let (out, tape) = net.forward(&stim).unwrap();
        let p = net.neuron_params();
        let (_, v1) = common::state_bounds(&p[0], (n_in + n_hid) as f64 * w);
        let (_, v2) = common::state_bounds(&p[1], n_hid as f64 * w);
        for v in tape.membrane(0) {
            prop_assert!(v.iter().all(|x| x.abs() <= v1 * (1.0 + 1e-12)));
        }
        for v in tape.membrane(1).iter().chain(std::iter::once(&out)) {
            prop_assert!(v.iter().all(|x| x.is_finite() && x.abs() <= v2 * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn spiking_neurons_reset_to_rest(seed in any::<u64>(), v_th in 0.01..0.5f64, steps in 2usize..15) {
        let net = small_net(seed, 4, 8, 2, steps, 2.0, v_th);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let stim = Stimulus::new(common::uniform(&mut rng, 3, 4, 1.0), DriveMode::Constant);
        let (_, tape) = net.forward(&stim).unwrap();
        let (s, v) = (tape.spikes(0), tape.membrane(0));
        for k in 0..steps {
            prop_assert!(s[k].iter().all(|&x| x == 0.0 || x == 1.0));
            for ((idx, &sk), &vk) in s[k].indexed_iter().zip(v[k].iter()) {
                prop_assert_eq!(sk == 1.0, vk > v_th);
                if sk == 1.0 && k + 1 < steps {
                    prop_assert_eq!(v[k + 1][idx], 0.0);
                }
            }
        }
    }

    #[test]
    fn forward_and_backward_are_pure(seed in any::<u64>(), steps in 1usize..10, impulse in any::<bool>()) {
        let net = small_net(seed, 4, 5, 3, steps, 1.0, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let stim = Stimulus::new(common::uniform(&mut rng, 3, 4, 1.0), drive_mode(impulse));
        let targets: Vec<usize> = (0..3).map(|_| rng.random_range(0..3)).collect();
        let (o1, t1) = net.forward(&stim).unwrap();
        let (o2, t2) = net.forward(&stim).unwrap();
        prop_assert_eq!(&o1, &o2);
        prop_assert!(t1.replay(&net));
        let (_, d) = softmax_ce_batch(o1.view(), &targets).unwrap();
        let g1 = net.backward(&t1, d.view()).unwrap();
        let g2 = net.backward(&t2, d.view()).unwrap();
        prop_assert_eq!(g1.tensors(), g2.tensors());
        let zero = net.backward(&t1, Array2::zeros(d.raw_dim()).view()).unwrap();
        prop_assert!(zero.is_zero());
    }

    #[test]
    fn checkpoint_round_trip(seed in any::<u64>()) {
        let net = small_net(seed, 4, 5, 3, 6, 1.0, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let stim = Stimulus::new(common::uniform(&mut rng, 2, 4, 1.0), DriveMode::Constant);
        let back = Network::from_checkpoint(&Checkpoint::from_bytes(&net.to_checkpoint(None).to_bytes()).unwrap()).unwrap();
        prop_assert_eq!(net.infer(&stim).unwrap(), back.infer(&stim).unwrap());
    }

    #[test]
    fn softmax_ce_gradient_identity(z in prop::collection::vec(-5.0..5.0f64, 2..8), t in any::<prop::sample::Index>()) {
        let t = t.index(z.len());
        let logits = Array2::from_shape_vec((1, z.len()), z.clone()).unwrap();
        let (_, g) = softmax_ce_batch(logits.view(), &[t]).unwrap();
        let p = softmax(&z);
        for j in 0..z.len() {
            let expect = p[j] - if j == t { 1.0 } else { 0.0 };
            prop_assert!((g[[0, j]] - expect).abs() < 1e-12);
            // Central difference of -ln softmax_t, computed from scratch.
            let ce = |dz: f64| {
                let mut zz = z.clone();
                zz[j] += dz;
                let m = zz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + zz.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
                lse - zz[t]
            };
            let fd = (ce(1e-5) - ce(-1e-5)) / 2e-5;
            prop_assert!((g[[0, j]] - fd).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// BPTT on the soft-gated toy net against an O(eps^4) oracle.
    #[test]
    fn bptt_matches_extrapolated_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (err, gap) = common::richardson_check(&mut rng, 5, 1e-4);
        prop_assume!(gap > 1e-3);
        prop_assert!(err <= 1e-5, "relative error {:e}", err);
    }
}

// ---------------------------------------------------------- equalizers

fn noiseless(h: &FirChannel, c: &Constellation, n: usize, seed: u64) -> (Vec<usize>, Vec<C64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = transmit(c, h, 0.0, n, &mut rng, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    (b.indices, b.received)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classical_receivers_recover_isi_free_channels(
        seed in any::<u64>(),
        delay in 0usize..4,
        gain in 0.5..2.0f64,
        qam in any::<bool>(),
    ) {
        let c = constellation(qam);
        let mut taps = vec![C64::new(0.0, 0.0); delay + 1];
        taps[delay] = C64::new(gain, 0.0);
        let h = FirChannel::new("delay", taps).unwrap();
        let (tx, y) = noiseless(&h, &c, 300, seed);
        let sigma2 = 1e-9;
        let outs = [
            zf_equalizer(&h, 31).unwrap().equalize(&y, &c),
            lmmse_equalizer(&h, 31, sigma2).unwrap().equalize(&y, &c),
            classical_dfe(&h, 28, 3, sigma2).unwrap().equalize(&y, &c),
        ];
        for out in outs {
            prop_assert_eq!(out.len(), y.len());
            let e = ErrorCount::compare(&out, &tx, &c);
            prop_assert!(e.symbols as usize + out.decision_delay == y.len());
            prop_assert_eq!(e.symbol_errors, 0, "delay {}", out.decision_delay);
        }
        if delay == 0 {
            let out = map_detector(&y, &h, &c, sigma2).unwrap();
            prop_assert_eq!(ErrorCount::compare(&out, &tx, &c).symbol_errors, 0);
        }
    }

    #[test]
    fn error_counts_match_bitwise_comparison(seed in any::<u64>(), qam in any::<bool>(), ebn0 in 0.0..8.0f64) {
        let c = constellation(qam);
        let h = FirChannel::proakis_b();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = transmit(&c, &h, sigma2_for(ebn0, c.bits_per_symbol()), 400, &mut rng, &mut ChaCha8Rng::seed_from_u64(seed ^ 5)).unwrap();
        let out = lmmse_equalizer(&h, 31, sigma2_for(ebn0, c.bits_per_symbol())).unwrap().equalize(&b.received, &c);
        let e = ErrorCount::compare(&out, &b.indices, &c);
        let d = out.decision_delay;
        let bps = c.bits_per_symbol();
        prop_assert_eq!(out.bits.len(), out.symbol_indices.len() * bps);
        let est = &out.bits[d * bps..];
        let sent = &b.bits[..est.len()];
        let bit_errors = est.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
        prop_assert_eq!(e.bit_errors, bit_errors);
        prop_assert_eq!(e.bits, est.len() as u64);
        prop_assert_eq!(e.ber(), bit_errors as f64 / est.len() as f64);
    }

    #[test]
    fn neural_dfe_structure(seed in any::<u64>(), n_ff in 1usize..6, m_fb in 0usize..4, qam in any::<bool>()) {
        let c = constellation(qam);
        let arch = DfeArchitecture { n_ff, m_fb, m_bits: 3, alphabet_size: c.size(), n_hidden: 7, steps: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eq = NeuralDfe::random_snn(
            arch, c.clone(), TernaryEncoderConfig::new(3, 2.0).unwrap(),
            LifParams::HIDDEN, LifParams::READOUT, Dynamics::default(), &mut rng,
        ).unwrap();
        prop_assert_eq!(eq.input_width(), 6 * n_ff + c.size() * m_fb);
        prop_assert_eq!(eq.decision_delay(), n_ff - 1);
        let (_, y) = noiseless(&FirChannel::proakis_b(), &c, 50, seed);
        let a = eq.equalize(&y, FeedbackMode::Decision).unwrap();
        prop_assert_eq!(a.len(), y.len());
        prop_assert_eq!(a.decision_delay, n_ff - 1);
        prop_assert_eq!(a, eq.equalize(&y, FeedbackMode::Decision).unwrap());
    }
}

// ------------------------------------------------------------- harness

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn config_round_trips_through_toml(
        seed in any::<u64>(),
        epochs in 1usize..100_000,
        grid in prop::collection::vec(-5.0..30.0f64, 1..6),
        channel in prop::sample::select(vec!["proakis-a", "proakis-b", "proakis-c"]),
    ) {
        let mut cfg = ExperimentConfig::preset(channel).unwrap();
        cfg.seed = seed;
        cfg.training.epochs = epochs;
        cfg.sweep.ebn0_db = grid;
        let back = ExperimentConfig::from_toml(&cfg.to_toml(), "t.toml", None).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn stopping_rule_and_ber_estimator(
        seed in any::<u64>(),
        ebn0 in 0.0..12.0f64,
        min_errors in 1u64..400,
        max_bits in 1000u64..40_000,
        burst in 50usize..400,
        per_round in 1usize..4,
    ) {
        let mut cfg = ExperimentConfig::preset("proakis-b").unwrap();
        cfg.equalizer = spikeq::equalizers::EqualizerKind::Lmmse;
        cfg.seed = seed;
        let mut sweep = cfg.sweep.clone();
        sweep.min_bit_errors = min_errors;
        sweep.max_bits = max_bits;
        sweep.burst_symbols = burst;
        sweep.bursts_per_round = per_round;
        let rx = Receiver::Classical(cfg.equalizer);
        let p = simulate_point(&rx, &cfg, &sweep, ebn0, &point_seeds(seed, ebn0)).unwrap();
        prop_assert_eq!(p.ber, p.bit_errors as f64 / p.bits as f64);
        prop_assert!(p.bit_errors >= min_errors || p.bits >= max_bits);
        let again = simulate_point(&rx, &cfg, &sweep, ebn0, &point_seeds(seed, ebn0)).unwrap();
        prop_assert_eq!((p.bit_errors, p.bits), (again.bit_errors, again.bits));
        let (lo, hi) = wilson_interval(p.bit_errors, p.bits, 1.96);
        prop_assert!(0.0 <= lo && lo <= p.ber && p.ber <= hi && hi <= 1.0);
    }
}
