use stabsim::sources::{validate_spec, SourceSpec, SourceStream};

fn samples(spec: SourceSpec, n: usize) -> Vec<f64> {
    SourceStream::new(&validate_spec(spec).unwrap(), 10_000).take(n).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn lag_correlation(v: &[f64], lag: usize) -> f64 {
    let m = mean(v);
    let num: f64 = v.windows(lag + 1).map(|w| (w[0] - m) * (w[lag] - m)).sum();
    let den: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    num / den
}

const N: usize = 1_000_000;

#[test]
fn iid_mean_and_variance() {
    let v = samples(SourceSpec::iid(2.0, 1).with_mean_shift(0.5), N);
    let se = 2.0 / (N as f64).sqrt();
    assert!((mean(&v) - 0.5).abs() < 5.0 * se, "{}", mean(&v));
    // sd of the sample variance ≈ σ² sqrt(2/N)
    assert!((variance(&v) - 4.0).abs() < 5.0 * 4.0 * (2.0 / N as f64).sqrt());
    assert!(lag_correlation(&v, 1).abs() < 5.0 / (N as f64).sqrt());
}

#[test]
fn ar1_lag_correlation_and_variance() {
    let phi: f64 = 0.7;
    let v = samples(SourceSpec::ar(vec![phi], 1.0, 2), N);
    // Stationary variance 1 / (1 - φ²); the AR(1) sample mean has variance
    // σ² / ((1 - φ)² N).
    let se = 1.0 / ((1.0 - phi) * (N as f64).sqrt());
    assert!(mean(&v).abs() < 5.0 * se);
    let var = 1.0 / (1.0 - phi * phi);
    assert!((variance(&v) - var).abs() / var < 0.02, "{}", variance(&v));
    assert!((lag_correlation(&v, 1) - phi).abs() < 0.01);
    assert!((lag_correlation(&v, 2) - phi * phi).abs() < 0.01);
}

#[test]
fn ma_autocorrelation_cuts_off() {
    // X = W_k + 0.5 W_{k-1}: ρ(1) = 0.5 / 1.25, ρ(2) = 0.
    let v = samples(SourceSpec::ma(vec![1.0, 0.5], 1.0, 3), N);
    assert!((variance(&v) - 1.25).abs() < 0.02);
    assert!((lag_correlation(&v, 1) - 0.4).abs() < 0.01);
    assert!(lag_correlation(&v, 2).abs() < 0.01);
}

#[test]
fn streams_are_reproducible_per_seed() {
    let a = samples(SourceSpec::ar(vec![0.5, 0.2], 1.0, 42), 1_000);
    let b = samples(SourceSpec::ar(vec![0.5, 0.2], 1.0, 42), 1_000);
    let c = samples(SourceSpec::ar(vec![0.5, 0.2], 1.0, 43), 1_000);
    assert_eq!(a, b);
    assert_ne!(a, c);
}
