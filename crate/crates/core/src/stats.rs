//! Means, autocorrelation-corrected standard errors and effective sample sizes.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum series length accepted by the estimators.
pub const MIN_SAMPLES: usize = 100;

/// Window factor of the self-consistent truncation.
pub const WINDOW_C: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocorrTime {
    pub tau: f64,
    /// Lag at which the sum was truncated.
    pub window: usize,
    /// The series had zero variance; `tau` is reported as 0.5.
    pub constant: bool,
}

/// Normalized autocorrelation rho(t), t = 0..n-1, by zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = series.iter().map(|x| Complex64::new(x - mean, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return vec![1.0; n];
    }
    buf[..n].iter().map(|z| z.re / c0).collect()
}

/// Integrated autocorrelation time with the self-consistent window:
/// tau(W) = 1/2 + sum_{t=1}^{W} rho(t), W the smallest lag with W >= c tau(W).
pub fn autocorrelation_time(series: &[f64]) -> Result<AutocorrTime> {
    check_len(series)?;
    if is_constant(series) {
        return Ok(AutocorrTime {
            tau: 0.5,
            window: 0,
            constant: true,
        });
    }
    let rho = autocorrelation(series);
    let mut tau = 0.5;
    let mut window = rho.len() - 1;
    for (t, r) in rho.iter().enumerate().skip(1) {
        tau += r;
        if t as f64 >= WINDOW_C * tau {
            window = t;
            break;
        }
    }
    Ok(AutocorrTime {
        tau: tau.max(0.5),
        window,
        constant: false,
    })
}

fn check_len(series: &[f64]) -> Result<()> {
    if series.len() < MIN_SAMPLES {
        return Err(Error::invalid(
            "series",
            format!("{} samples, need at least {MIN_SAMPLES}", series.len()),
        ));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("series", "non-finite sample"));
    }
    Ok(())
}

fn is_constant(series: &[f64]) -> bool {
    series.iter().all(|&x| x == series[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub tau: f64,
    pub ess: f64,
    pub constant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

/// Mean with standard error sqrt(2 tau var / N) and, given a reference, a z-score.
pub fn estimate(name: &str, series: &[f64], reference: Option<f64>) -> Result<EstimateReport> {
    let ac = autocorrelation_time(series)?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let stderr = (2.0 * ac.tau * var / n).sqrt();
    let z = reference.map(|r| {
        let diff = mean - r;
        if stderr > 0.0 {
            diff / stderr
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    });
    Ok(EstimateReport {
        name: name.to_string(),
        samples: series.len(),
        mean,
        stderr,
        tau: ac.tau,
        ess: n / (2.0 * ac.tau),
        constant: ac.constant,
        reference,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller
        let u: f64 = rng.random::<f64>().max(1e-300);
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    #[test]
    fn iid_series_has_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000).map(|_| normal(&mut rng)).collect();
        let ac = autocorrelation_time(&xs).unwrap();
        assert!((ac.tau - 0.5).abs() <= 0.1, "{}", ac.tau);
    }

    #[test]
    fn ar1_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = 0.9;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = phi * x + normal(&mut rng);
                x
            })
            .collect();
        let expected = (1.0 + phi) / (2.0 * (1.0 - phi));
        let tau = autocorrelation_time(&xs).unwrap().tau;
        assert!((tau - expected).abs() <= 0.15 * expected, "{tau}");
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let rho = autocorrelation(&xs);
        let m = xs.iter().sum::<f64>() / 300.0;
        let c = |t: usize| (0..300 - t).map(|i| (xs[i] - m) * (xs[i + t] - m)).sum::<f64>();
        for t in [0, 1, 5, 50] {
            assert!((rho[t] - c(t) / c(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_series_is_flagged() {
        let xs = vec![2.5; 500];
        let ac = autocorrelation_time(&xs).unwrap();
        assert_eq!((ac.tau, ac.constant), (0.5, true));
        let e = estimate("c", &xs, Some(2.5)).unwrap();
        assert_eq!((e.mean, e.stderr, e.z), (2.5, 0.0, Some(0.0)));
    }

    #[test]
    fn short_series_rejected() {
        assert!(autocorrelation_time(&[1.0; 99]).is_err());
        assert!(estimate("x", &[f64::NAN; 200], None).is_err());
    }

    #[test]
    fn uniform_mean_within_three_stderr() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
        let e = estimate("u", &xs, Some(0.5)).unwrap();
        assert!(e.z.unwrap().abs() <= 3.0);
        assert!(e.ess >= 1.0);
        assert!((e.stderr - (1.0f64 / 12.0 / 1e5).sqrt()).abs() < 2e-4);
    }
}
