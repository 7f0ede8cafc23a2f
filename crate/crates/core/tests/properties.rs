//! Statistical properties of the simulator checked against independent
//! oracles computed directly from the generating traces.

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use superbunch::detection::{beam_split, sample_arrivals, DetectorParams, PhotonStream};
use superbunch::experiment::{calibrate, presets, run_table1, table1_row};
use superbunch::light::{gen_speckle_intensity, CorrelationShape, IntensityTrace, MixParams, SpeckleParams};
use superbunch::stats::{
    coincidence_histogram, count_windows, fit_two_timescale, g2_from_histogram, CorrelationFunction, FitGuess,
};

const SEED: u64 = 77;

fn speckle(tau: f64) -> SpeckleParams {
    SpeckleParams {
        coherence_time: tau,
        mean_intensity: 1.0,
        shape: CorrelationShape::Gaussian,
    }
}

#[test]
fn speckle_intensity_is_exponential() {
    // 2e6 samples over 2e5 coherence times.
    let t = gen_speckle_intensity(&speckle(1.0), 2e5, 0.1, SEED).unwrap();
    let mean = t.mean();
    let mut xs = t.samples().to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let cdf = 1.0 - (-x / mean).exp();
            (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn speckle_correlation_time_is_recovered() {
    let dt = 0.1;
    let t = gen_speckle_intensity(&speckle(1.0), 2000.0, dt, SEED).unwrap();
    let c0 = t.autocorrelation(0).unwrap() - 1.0;
    let lag = (1..200)
        .find(|&k| t.autocorrelation(k).unwrap() - 1.0 < c0 / std::f64::consts::E)
        .unwrap();
    let tau = lag as f64 * dt;
    assert!((tau - 1.0).abs() <= 0.1, "1/e lag {tau}");
}

#[test]
fn thinning_counts_are_poisson_per_segment() {
    // Piecewise-constant trace: 4 levels, each segment 1 s long.
    let levels = [5.0, 20.0, 50.0, 2.0];
    let per_segment = 1000usize;
    let dt = 1.0 / per_segment as f64;
    let n_segments = 2000;
    let samples: Vec<f64> = (0..n_segments)
        .flat_map(|s| std::iter::repeat_n(levels[s % levels.len()], per_segment))
        .collect();
    let trace = IntensityTrace::new(dt, 0.0, samples).unwrap();
    let efficiency = 0.5;
    let stream = sample_arrivals(&trace, efficiency, SEED).unwrap();
    let ts = stream.timestamps();
    for (li, level) in levels.iter().enumerate() {
        let mean = efficiency * level;
        let mut counts = Vec::new();
        for s in (li..n_segments).step_by(levels.len()) {
            let (lo, hi) = (s as f64, s as f64 + 1.0);
            let a = ts.partition_point(|t| *t < lo);
            let b = ts.partition_point(|t| *t < hi);
            counts.push(b - a);
        }
        // Pearson test on bins pooled to >= 5 expected.
        let pois = Poisson::new(mean).unwrap();
        let total = counts.len() as f64;
        let max = *counts.iter().max().unwrap() + 1;
        let mut bins: Vec<(f64, f64)> = Vec::new();
        let (mut o, mut e) = (0.0, 0.0);
        for k in 0..max {
            o += counts.iter().filter(|c| **c == k).count() as f64;
            e += total * pois.pmf(k as u64);
            if e >= 5.0 {
                bins.push((o, e));
                o = 0.0;
                e = 0.0;
            }
        }
        let tail = total * (1.0 - pois.cdf(max as u64 - 1)) + e;
        if let Some(last) = bins.last_mut() {
            last.0 += o;
            last.1 += tail;
        }
        let chi2: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
        let dof = bins.len() - 1;
        let p = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(chi2);
        assert!(p > 1e-3, "level {level}: chi2 {chi2} dof {dof} p {p}");
    }
}

fn speckle_stream(rate: f64, seed: u64) -> (IntensityTrace, PhotonStream) {
    let tau = 4.63e-6;
    let params = SpeckleParams {
        mean_intensity: 1e7,
        ..speckle(tau)
    };
    let trace = gen_speckle_intensity(&params, 0.5, tau / 10.0, seed).unwrap();
    let stream = sample_arrivals(&trace, rate / trace.mean(), seed).unwrap();
    (trace, stream)
}

#[test]
fn splitting_preserves_g2() {
    let window = 4.63e-6 / 20.0;
    let (_, stream) = speckle_stream(0.2 / window, SEED);
    let n_windows = (stream.span_length() / window).floor() as u64;
    let whole = g2_from_histogram(&count_windows(&stream, window, n_windows).unwrap()).unwrap();
    let (a, b) = beam_split(&stream, 0.5, SEED).unwrap();
    for half in [a, b] {
        let g = g2_from_histogram(&count_windows(&half, window, n_windows).unwrap()).unwrap();
        let combined = g.stderr.hypot(whole.stderr);
        assert!((g.value - whole.value).abs() <= 3.0 * combined, "{g:?} vs {whole:?}");
    }
}

/// `<I(t) I(t + lag)> / <I>^2` of the generating trace, averaged across one
/// coincidence bin. A piecewise-constant trace correlates linearly between
/// grid lags.
fn trace_oracle(trace: &IntensityTrace, lag: f64, bin: f64) -> f64 {
    let dt = trace.dt();
    let at = |x: f64| {
        let k = (x.abs() / dt).floor();
        let f = x.abs() / dt - k;
        let c0 = trace.autocorrelation(k as usize).unwrap();
        let c1 = trace.autocorrelation(k as usize + 1).unwrap();
        (1.0 - f) * c0 + f * c1
    };
    let points = 16;
    (0..points)
        .map(|i| at(lag - bin / 2.0 + bin * (i as f64 + 0.5) / points as f64))
        .sum::<f64>()
        / points as f64
}

#[test]
fn hbt_of_speckle_matches_trace_autocorrelation() {
    let (trace, stream) = speckle_stream(4e5, SEED);
    let (a, b) = beam_split(&stream, 0.5, SEED).unwrap();
    let bin = 250e-9;
    let cf = coincidence_histogram(&a, &b, bin, 25e-6).unwrap();
    let (g0, se) = cf.zero_lag_estimate(1);
    assert!((g0 - 2.0).abs() <= 0.1, "zero lag {g0} ± {se}");
    // Bin-by-bin agreement with the trace, within 4 sigma of counting noise.
    let oracle = trace_oracle(&trace, 0.0, 3.0 * bin);
    assert!((g0 - oracle).abs() <= 4.0 * se, "{g0} vs trace {oracle}");
    let far: Vec<f64> = cf
        .lags
        .iter()
        .zip(&cf.values)
        .filter(|(l, _)| l.abs() > 15e-6)
        .map(|(_, v)| *v)
        .collect();
    let far_mean = far.iter().sum::<f64>() / far.len() as f64;
    assert!((far_mean - 1.0).abs() < 0.01, "far-lag level {far_mean}");
    for (i, lag) in cf.lags.iter().enumerate().step_by(10) {
        let o = trace_oracle(&trace, *lag, bin);
        assert!((cf.values[i] - o).abs() <= 5.0 * cf.stderr[i], "lag {lag}: {} vs {o}", cf.values[i]);
    }
}

#[test]
fn independent_poisson_streams_are_flat() {
    let trace = IntensityTrace::constant(2e5, 1e-6, 1_000_000).unwrap();
    let s1 = sample_arrivals(&trace, 1.0, 1).unwrap().with_channel(1);
    let s2 = sample_arrivals(&trace, 1.0, 2).unwrap().with_channel(2);
    let cf = coincidence_histogram(&s1, &s2, 1e-6, 10e-6).unwrap();
    assert_eq!(cf.len(), 21);
    for (v, s) in cf.values.iter().zip(&cf.stderr) {
        assert!((v - 1.0).abs() <= 3.0 * s, "{v} ± {s}");
    }
}

#[test]
fn fit_recovers_parameters_within_reported_errors() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let truth = [0.27, 0.89, 1.28e-6, 4.63e-6];
    let bin = 100e-9;
    let lags: Vec<f64> = (-200..=200).map(|k| k as f64 * bin).collect();
    let sd = 0.02;
    let clean: Vec<f64> = lags
        .iter()
        .map(|t| superbunch::stats::fit::model(CorrelationShape::Gaussian, truth, *t))
        .collect();
    let seeds = 100;
    let mut covered = [0usize; 4];
    for seed in 0..seeds {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sd).unwrap();
        let cf = CorrelationFunction {
            lag_bin_width: bin,
            lags: lags.clone(),
            values: clean.iter().map(|v| v + noise.sample(&mut rng)).collect(),
            stderr: vec![sd; lags.len()],
            counts: vec![1; lags.len()],
            normalization: vec![1.0 / sd; lags.len()],
        };
        let fit = fit_two_timescale(&cf, FitGuess::from_curve(&cf)).unwrap();
        let est = [fit.a, fit.b, fit.tau_m, fit.tau_g];
        let se = [fit.stderr.a, fit.stderr.b, fit.stderr.tau_m, fit.stderr.tau_g];
        for i in 0..4 {
            if (est[i] - truth[i]).abs() <= 3.0 * se[i] {
                covered[i] += 1;
            }
        }
    }
    for (i, c) in covered.iter().enumerate() {
        assert!(*c as f64 >= 0.95 * seeds as f64, "parameter {i}: {c}/{seeds} within 3 sigma");
    }
}

#[test]
fn pure_speckle_table_levels_agree() {
    let mut c = presets::pseudothermal();
    c.mix = MixParams::default();
    c.coincidence.bin = 0.5e-6;
    let row = table1_row(&c).unwrap();
    for i in 0..row.g2_c.len() {
        for j in i + 1..row.g2_c.len() {
            let (x, y) = (row.g2_c[i].g2_c, row.g2_c[j].g2_c);
            assert!(
                (x.value - y.value).abs() <= 3.0 * x.stderr.hypot(y.stderr),
                "{x:?} vs {y:?}"
            );
        }
    }
}

#[test]
fn calibrated_ladder_is_monotone() {
    let cals = calibrate(&presets::table1_base(), &presets::TABLE1_TARGETS).unwrap();
    let configs: Vec<_> = cals.into_iter().map(|c| c.config).collect();
    let table = run_table1(&configs).unwrap();
    for w in table.rows.windows(2) {
        assert!(w[1].g2_m.value > w[0].g2_m.value, "{} !> {}", w[1].g2_m.value, w[0].g2_m.value);
    }
}

#[test]
fn dead_time_leaves_long_window_counts_nearly_unchanged() {
    let window = 5e-6;
    let (_, stream) = speckle_stream(0.1 / window, SEED);
    let detected = DetectorParams::default().detect(&stream, SEED).unwrap();
    let n = 90_000;
    let ideal = g2_from_histogram(&count_windows(&stream, window, n).unwrap()).unwrap();
    let real = g2_from_histogram(&count_windows(&detected, window, n).unwrap()).unwrap();
    // 35 ns of dead time removes about 2 x 35 ns / 5 us of close pairs.
    assert!(real.value <= ideal.value);
    assert!(ideal.value - real.value < 0.05, "{ideal:?} {real:?}");
}

/// All-pairs count of `round((a - b) / bin)`.
fn naive(t1: &[f64], t2: &[f64], bin: f64, half: i64) -> Vec<u64> {
    let mut c = vec![0u64; (2 * half + 1) as usize];
    for a in t1 {
        for b in t2 {
            let k = ((a - b) / bin).round() as i64;
            if k.abs() <= half {
                c[(k + half) as usize] += 1;
            }
        }
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn coincidence_matches_all_pairs(
        mut a in proptest::collection::vec(0.0f64..1.0, 1..300),
        mut b in proptest::collection::vec(0.0f64..1.0, 1..300),
        bin in 1e-3f64..2e-2,
        bins in 10i64..40,
    ) {
        a.sort_by(f64::total_cmp);
        a.dedup();
        b.sort_by(f64::total_cmp);
        b.dedup();
        let s1 = PhotonStream::new(a.clone(), 1, (0.0, 1.0)).unwrap();
        let s2 = PhotonStream::new(b.clone(), 2, (0.0, 1.0)).unwrap();
        let max_lag = bins as f64 * bin;
        let cf = coincidence_histogram(&s1, &s2, bin, max_lag).unwrap();
        let half = (max_lag / bin).round() as i64;
        prop_assert_eq!(cf.counts, naive(&a, &b, bin, half));
        prop_assert!(cf.values.iter().all(|v| *v >= 0.0));
    }
}
