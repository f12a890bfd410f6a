//! Goodness-of-fit tests used by the statistical checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Bins are merged until each expects at least this many counts.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of `observed` counts against cell probabilities
/// `probs`. Adjacent cells are pooled left to right until each expects at
/// least 5 counts; any probability mass beyond `probs` belongs to the last
/// cell.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::param(
            "probs",
            "must be nonempty and match the observed cells",
        ));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let n = total as f64;
    let covered: f64 = probs.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (i, (&o, &p)) in observed.iter().zip(probs).enumerate() {
        obs += o as f64;
        exp += n * p;
        if i + 1 == observed.len() {
            exp += n * (1.0 - covered).max(0.0);
        }
        if exp >= MIN_EXPECTED {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if obs > 0.0 || exp > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if cells.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two cells after pooling".into(),
        ));
    }
    let statistic = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidState(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// Chi-square of positive integer samples against `Geometric(q)` on
/// `{1, 2, ...}`.
pub fn geometric_chi_square(
    samples: impl IntoIterator<Item = u64>,
    q: f64,
) -> Result<ChiSquareResult> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param("q", format!("must lie in (0, 1], got {q}")));
    }
    let mut counts: Vec<u64> = Vec::new();
    for k in samples {
        if k == 0 {
            return Err(Error::param("samples", "geometric support starts at 1"));
        }
        let i = k as usize - 1;
        if i >= counts.len() {
            counts.resize(i + 1, 0);
        }
        counts[i] += 1;
    }
    let probs: Vec<f64> = (0..counts.len())
        .map(|i| q * (1.0 - q).powi(i as i32))
        .collect();
    chi_square_gof(&counts, &probs)
}

/// Asymptotic Kolmogorov tail `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d
            .max(((i + 1) as f64 / n - f).abs())
            .max((f - i as f64 / n).abs());
    }
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "both samples must be nonempty".into(),
        ));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, n * m / (n + m)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::stream_rng;
    use rand::Rng;

    #[test]
    fn chi_square_accepts_exact_counts() {
        let r = chi_square_gof(&[50, 30, 20], &[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_rejects_wrong_law() {
        let r = chi_square_gof(&[80, 10, 10], &[0.34, 0.33, 0.33]).unwrap();
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn chi_square_known_value() {
        // statistic 4/50 + 4/30 + 0 ... checked by hand: (52-50)^2/50 + (28-30)^2/30
        let r = chi_square_gof(&[52, 28, 20], &[0.5, 0.3, 0.2]).unwrap();
        assert!((r.statistic - (4.0 / 50.0 + 4.0 / 30.0)).abs() < 1e-12);
        // sf of chi-square(2) is exp(-x/2)
        assert!((r.p_value - (-r.statistic / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn geometric_samples_pass() {
        let mut rng = stream_rng(3, 0);
        let q = 0.3;
        let draws: Vec<u64> = (0..20_000)
            .map(|_| {
                let mut k = 1;
                while !rng.random_bool(q) {
                    k += 1;
                }
                k
            })
            .collect();
        assert!(
            geometric_chi_square(draws.iter().copied(), q)
                .unwrap()
                .p_value
                > 0.001
        );
        assert!(
            geometric_chi_square(draws.iter().copied(), 0.35)
                .unwrap()
                .p_value
                < 1e-6
        );
    }

    #[test]
    fn kolmogorov_reference_values() {
        // P(K > 1.36) ~ 0.049, P(K > 1.63) ~ 0.0098
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 5e-4);
    }

    #[test]
    fn ks_uniform() {
        let mut rng = stream_rng(4, 0);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 0.001);
        assert!(
            ks_one_sample(&xs, |x| x.clamp(0.0, 1.0).powi(2))
                .unwrap()
                .p_value
                < 1e-6
        );
        let ys: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&xs, &ys).unwrap().p_value > 0.001);
        let zs: Vec<f64> = ys.iter().map(|y| y * 0.9).collect();
        assert!(ks_two_sample(&xs, &zs).unwrap().p_value < 1e-6);
    }
}
