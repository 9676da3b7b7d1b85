//! Deterministic statistical kernels: seeded random streams, quantiles,
//! Gaussian KDE and the two-sample Kolmogorov-Smirnov statistic.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no samples")]
    EmptySamples,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("quantile {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("KDE needs at least 16 grid points, got {0}")]
    TooFewGridPoints(usize),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLIT_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based 64-bit generator.
///
/// Output `k` (1-based) is `mix64(seed + k * 0x9E3779B97F4A7C15)` with
/// wrapping arithmetic, which is the SplitMix64 stream. Floats take the top
/// 53 bits. `split(i)` seeds a child with `mix64(seed ^ mix64(i + 0xD1B54A32D192ED03))`
/// and does not depend on how far the parent has advanced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
    counter: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn split(&self, index: u64) -> SeededRng {
        SeededRng::new(mix64(self.seed ^ mix64(index.wrapping_add(SPLIT_SALT))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_uniform() < p
    }

    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (1.0 - self.next_uniform()).ln()
    }

    /// Standard normal via Box-Muller; consumes two uniforms.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_uniform();
        let u2 = self.next_uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn lognormal(&mut self, mu: f64, sigma: f64) -> f64 {
        (mu + sigma * self.standard_normal()).exp()
    }

    /// Index drawn with probability proportional to `weights`; `None` when
    /// no weight is positive.
    pub fn choose_weighted(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if !(total > 0.0) {
            return None;
        }
        let target = self.next_uniform() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = Some(i);
                if target < acc {
                    return Some(i);
                }
            }
        }
        last
    }

    /// `k` distinct indices from `0..n` in draw order (partial Fisher-Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        let k = k.min(n);
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// Linear-interpolation quantiles (`h = (n-1)q`).
pub fn quantiles(samples: &[f64], qs: &[f64]) -> Result<Vec<f64>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySamples);
    }
    if let Some(&q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(StatsError::InvalidQuantile(q));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(qs.iter().map(|&q| quantile_sorted(&sorted, q)).collect())
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Sample standard deviation (n - 1 denominator); 0 for a single sample.
pub fn std_dev(samples: &[f64]) -> Option<f64> {
    let m = mean(samples)?;
    if samples.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = samples.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (samples.len() - 1) as f64).sqrt())
}

pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// Silverman's rule `0.9 min(sigma, IQR/1.349) n^(-1/5)`, falling back to
/// `1.06 sigma n^(-1/5)` when the IQR is zero and to [`BANDWIDTH_FLOOR`]
/// when the samples are constant.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64, StatsError> {
    let sigma = std_dev(samples).ok_or(StatsError::EmptySamples)?;
    if sigma == 0.0 {
        return Ok(BANDWIDTH_FLOOR);
    }
    let q = quantiles(samples, &[0.25, 0.75])?;
    let iqr = q[1] - q[0];
    let n_factor = (samples.len() as f64).powf(-0.2);
    if iqr == 0.0 {
        Ok(1.06 * sigma * n_factor)
    } else {
        Ok(0.9 * sigma.min(iqr / 1.349) * n_factor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub clip: Option<(f64, f64)>,
}

impl KdeCurve {
    /// Trapezoidal area under the curve.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `(1 / (n h)) * sum phi((x - x_i) / h)`.
pub fn kde_density(samples: &[f64], bandwidth: f64, x: f64) -> f64 {
    let norm = 1.0 / ((2.0 * PI).sqrt() * bandwidth * samples.len() as f64);
    samples
        .iter()
        .map(|s| {
            let z = (x - s) / bandwidth;
            (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * norm
}

pub fn clip_samples(samples: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    samples.iter().map(|x| x.clamp(lo, hi)).collect()
}

/// Gaussian KDE on an evenly spaced grid spanning four bandwidths past the
/// (clipped) sample range. Each curve is a density in its own right; curves
/// are never scaled against each other.
pub fn gaussian_kde(
    samples: &[f64],
    bandwidth: Option<f64>,
    grid_points: usize,
    clip: Option<(f64, f64)>,
) -> Result<KdeCurve, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if grid_points < 16 {
        return Err(StatsError::TooFewGridPoints(grid_points));
    }
    let data = match clip {
        Some((lo, hi)) => clip_samples(samples, lo, hi),
        None => samples.to_vec(),
    };
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(StatsError::InvalidBandwidth(h)),
        None => silverman_bandwidth(&data)?,
    };
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let step = (hi - lo) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| lo + step * i as f64).collect();
    let density = grid.iter().map(|&g| kde_density(&data, h, g)).collect();
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
        clip,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySamples);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Large-sample two-sided critical value `c(alpha) sqrt((n + m) / (n m))`
/// with `c(alpha) = sqrt(-ln(alpha / 2) / 2)`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rng_is_reproducible_and_splits_independently_of_position() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let fresh = SeededRng::new(42);
        assert_eq!(a.split(3), fresh.split(3));
        assert_ne!(fresh.split(3), fresh.split(4));
    }

    #[test]
    fn rng_reference_stream() {
        // SplitMix64 reference outputs for seed 0.
        let mut r = SeededRng::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn uniform_range() {
        let mut r = SeededRng::new(1);
        for _ in 0..10_000 {
            let u = r.next_uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn sample_indices_are_distinct() {
        let mut r = SeededRng::new(5);
        let mut idx = r.sample_indices(20, 20);
        idx.sort();
        assert_eq!(idx, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn choose_weighted_skips_zero_weights() {
        let mut r = SeededRng::new(9);
        for _ in 0..1000 {
            assert_eq!(r.choose_weighted(&[0.0, 2.0, 0.0]), Some(1));
        }
        assert_eq!(r.choose_weighted(&[0.0, 0.0]), None);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantiles(&[7.0, 7.0, 7.0], &[0.0, 0.3, 1.0]).unwrap(), vec![7.0; 3]);
        assert_eq!(quantiles(&[4.0, 1.0, 3.0, 2.0], &[0.25]).unwrap(), vec![1.75]);
        assert_eq!(quantiles(&[], &[0.5]), Err(StatsError::EmptySamples));
        assert_eq!(quantiles(&[1.0], &[1.5]), Err(StatsError::InvalidQuantile(1.5)));
    }

    #[test]
    fn kde_duplicated_sample_peak() {
        let curve = gaussian_kde(&[0.0, 0.0], Some(1.0), 17, None).unwrap();
        // Grid is symmetric around 0 with 17 points, so index 8 is 0.
        assert!(curve.grid[8].abs() < 1e-12);
        assert!((curve.density[8] - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn kde_errors_and_fallbacks() {
        assert!(matches!(
            gaussian_kde(&[1.0], None, 32, None),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert_eq!(
            gaussian_kde(&[1.0, 2.0], None, 8, None),
            Err(StatsError::TooFewGridPoints(8))
        );
        assert_eq!(silverman_bandwidth(&[3.0, 3.0, 3.0]).unwrap(), BANDWIDTH_FLOOR);
        // IQR zero, sigma positive.
        let xs = [0.0, 0.0, 0.0, 0.0, 0.0, 10.0];
        let sigma = std_dev(&xs).unwrap();
        let expect = 1.06 * sigma * 6f64.powf(-0.2);
        assert!((silverman_bandwidth(&xs).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn kde_clip_moves_mass_to_bounds() {
        let curve = gaussian_kde(&[-50.0, 10.0, 500.0], Some(5.0), 64, Some((0.0, 200.0))).unwrap();
        assert!((curve.grid[0] - (0.0 - 20.0)).abs() < 1e-12);
        assert!((curve.grid[63] - 220.0).abs() < 1e-12);
        assert!((curve.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[], &[1.0]), Err(StatsError::EmptySamples));
        assert!((ks_critical_value(0.01, 100, 100) - 1.627_6 * (0.02f64).sqrt()).abs() < 1e-4);
    }
}
