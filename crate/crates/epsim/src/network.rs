//! Classical-latency statistics and the optical link loss model.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{row}: expected a positive latency in ms, got {value:?}")]
    BadRow {
        path: String,
        row: usize,
        value: String,
    },
    #[error("{path}: missing or wrong header, expected \"latency_ms\"")]
    BadHeader { path: String },
    #[error("{path}: no latency samples")]
    Empty { path: String },
}

/// Empirical one-way classical latency samples in milliseconds.
#[derive(Debug, Clone)]
pub struct LatencyDistribution {
    sorted: Vec<f64>,
}

impl LatencyDistribution {
    /// Build from raw samples; all must be positive and finite.
    pub fn new(samples: Vec<f64>) -> Result<Self, NetworkError> {
        if samples.is_empty() {
            return Err(NetworkError::Empty {
                path: "<memory>".into(),
            });
        }
        for (i, &s) in samples.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(NetworkError::BadRow {
                    path: "<memory>".into(),
                    row: i + 1,
                    value: s.to_string(),
                });
            }
        }
        let mut sorted = samples;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Inverse empirical CDF with linear interpolation between order
    /// statistics; `q` in [0, 1] maps min to max.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let n = self.sorted.len();
        if n == 1 {
            return self.sorted[0];
        }
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = pos - lo as f64;
        self.sorted[lo] * (1.0 - frac) + self.sorted[hi] * frac
    }

    /// Histogram with the given bin width in ms, starting at the sample min.
    pub fn histogram(&self, bin_width_ms: f64) -> Vec<(f64, usize)> {
        assert!(bin_width_ms > 0.0);
        let lo = self.min();
        let nbins = ((self.max() - lo) / bin_width_ms).floor() as usize + 1;
        let mut bins = vec![0usize; nbins];
        for &s in &self.sorted {
            let i = (((s - lo) / bin_width_ms) as usize).min(nbins - 1);
            bins[i] += 1;
        }
        bins.into_iter()
            .enumerate()
            .map(|(i, count)| (lo + (i as f64 + 0.5) * bin_width_ms, count))
            .collect()
    }
}

/// One latency draw via the inverse empirical CDF.
pub fn sample_latency<R: Rng + ?Sized>(dist: &LatencyDistribution, rng: &mut R) -> f64 {
    dist.quantile(rng.gen::<f64>())
}

/// Load the CSV format: one header line `latency_ms`, one positive decimal
/// per following row.
pub fn load_latency_csv(path: impl AsRef<Path>) -> Result<LatencyDistribution, NetworkError> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(&path).map_err(|source| NetworkError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header.trim() == "latency_ms" => {}
        Some((_, Ok(_))) | None => {
            return Err(NetworkError::BadHeader { path: path_str });
        }
        Some((_, Err(source))) => {
            return Err(NetworkError::Io {
                path: path_str,
                source,
            });
        }
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|source| NetworkError::Io {
            path: path_str.clone(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| NetworkError::BadRow {
            path: path_str.clone(),
            row: idx + 1,
            value: trimmed.to_string(),
        })?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(NetworkError::BadRow {
                path: path_str.clone(),
                row: idx + 1,
                value: trimmed.to_string(),
            });
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(NetworkError::Empty { path: path_str });
    }
    LatencyDistribution::new(samples)
}

/// Write samples in the same CSV format (full float round-trip precision).
pub fn write_latency_csv(path: impl AsRef<Path>, samples: &[f64]) -> Result<(), NetworkError> {
    let path_str = path.as_ref().display().to_string();
    let io_err = |source| NetworkError::Io {
        path: path_str.clone(),
        source,
    };
    let mut file = std::fs::File::create(&path).map_err(io_err)?;
    let mut buf = String::from("latency_ms\n");
    for s in samples {
        // ryu-style shortest round-trip formatting via Display
        buf.push_str(&format!("{s}\n"));
    }
    file.write_all(buf.as_bytes())
        .map_err(|source| NetworkError::Io {
            path: path_str.clone(),
            source,
        })
}

/// Synthetic log-normal latency samples (stand-in for an empirical metro
/// dataset).
pub fn synthetic_lognormal<R: Rng + ?Sized>(
    mu_log_ms: f64,
    sigma_log: f64,
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let dist = LogNormal::new(mu_log_ms, sigma_log).expect("sigma must be finite and positive");
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// Source rate and dB-loss topology determining the base pair rate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    /// Entangled-photon generation rate at the source, pairs/s.
    pub source_rate: f64,
    pub fiber_length_a_km: f64,
    pub fiber_length_b_km: f64,
    pub intermediate_nodes_a: u32,
    pub intermediate_nodes_b: u32,
    /// Loss per traversed intermediate node, dB.
    pub loss_intermediate_db: f64,
    /// Loss charged at the source node and again at each memory node, dB.
    pub loss_endpoint_db: f64,
    pub fiber_atten_db_per_km: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            source_rate: 1.3e6,
            fiber_length_a_km: 0.0,
            fiber_length_b_km: 0.0,
            intermediate_nodes_a: 0,
            intermediate_nodes_b: 0,
            loss_intermediate_db: 8.0,
            loss_endpoint_db: 4.0,
            fiber_atten_db_per_km: 0.2,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !self.source_rate.is_finite() || self.source_rate <= 0.0 {
            return Err(format!(
                "source_rate must be positive, got {}",
                self.source_rate
            ));
        }
        for (name, v) in [
            ("fiber_length_a_km", self.fiber_length_a_km),
            ("fiber_length_b_km", self.fiber_length_b_km),
            ("loss_intermediate_db", self.loss_intermediate_db),
            ("loss_endpoint_db", self.loss_endpoint_db),
            ("fiber_atten_db_per_km", self.fiber_atten_db_per_km),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    fn arm_transmittance(&self, length_km: f64, intermediates: u32) -> f64 {
        let db = 2.0 * self.loss_endpoint_db
            + intermediates as f64 * self.loss_intermediate_db
            + self.fiber_atten_db_per_km * length_km;
        10f64.powf(-db / 10.0)
    }
}

/// Base entangled-pair rate R_pair = source_rate · t_a · t_b, where each arm
/// transmittance folds in endpoint losses (source + that arm's memory node),
/// intermediate-node losses, and fiber attenuation.
pub fn pair_rate(link: &LinkConfig) -> f64 {
    let ta = link.arm_transmittance(link.fiber_length_a_km, link.intermediate_nodes_a);
    let tb = link.arm_transmittance(link.fiber_length_b_km, link.intermediate_nodes_b);
    link.source_rate * ta * tb
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distribution_basic_stats() {
        let d = LatencyDistribution::new(vec![15.0, 5.0, 10.0]).unwrap();
        assert_abs_diff_eq!(d.min(), 5.0);
        assert_abs_diff_eq!(d.max(), 15.0);
        assert_abs_diff_eq!(d.mean(), 10.0);
    }

    #[test]
    fn quantile_boundaries() {
        let d = LatencyDistribution::new(vec![5.0, 10.0, 15.0]).unwrap();
        assert_abs_diff_eq!(d.quantile(0.0), 5.0);
        assert_abs_diff_eq!(d.quantile(1.0), 15.0);
        assert_abs_diff_eq!(d.quantile(0.5), 10.0);
    }

    #[test]
    fn single_sample_is_constant() {
        let d = LatencyDistribution::new(vec![7.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_abs_diff_eq!(sample_latency(&d, &mut rng), 7.0);
        }
    }

    #[test]
    fn sampling_stays_in_range_and_matches_mean() {
        let d = LatencyDistribution::new(vec![5.0, 10.0, 15.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1 << 14;
        let mut acc = 0.0;
        for _ in 0..n {
            let s = sample_latency(&d, &mut rng);
            assert!((5.0..=15.0).contains(&s));
            acc += s;
        }
        let mean = acc / n as f64;
        // interpolated inverse CDF of {5,10,15} has sd sqrt(25/3)-ish; 3 sigma band
        let sigma = (25.0 / 3.0f64 / n as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lat.csv");
        std::fs::write(&path, "latency_ms\n5.0\n10.0\n15.0\n").unwrap();
        let d = load_latency_csv(&path).unwrap();
        assert_eq!(d.len(), 3);
        assert_abs_diff_eq!(d.mean(), 10.0);

        std::fs::write(&path, "latency_ms\n5.0\n-3.0\n").unwrap();
        let err = load_latency_csv(&path).unwrap_err();
        assert!(err.to_string().contains(":3:"), "line not named: {err}");

        std::fs::write(&path, "").unwrap();
        assert!(load_latency_csv(&path).is_err());

        std::fs::write(&path, "latency_ms\nabc\n").unwrap();
        assert!(load_latency_csv(&path).is_err());

        // generator output round-trips exactly
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = synthetic_lognormal(2.3, 0.5, 100, &mut rng);
        write_latency_csv(&path, &samples).unwrap();
        let back = load_latency_csv(&path).unwrap();
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(back.samples(), &sorted[..]);
    }

    #[test]
    fn lognormal_ks_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mu, sigma) = (2.3, 0.5);
        let samples = synthetic_lognormal(mu, sigma, 10_000, &mut rng);
        let d = LatencyDistribution::new(samples).unwrap();
        // KS distance against the generator CDF Φ((ln x − μ)/σ)
        let phi = |x: f64| 0.5 * (1.0 + erf((x.ln() - mu) / (sigma * std::f64::consts::SQRT_2)));
        let n = d.len() as f64;
        let mut ks = 0.0f64;
        for (i, &x) in d.samples().iter().enumerate() {
            let f = phi(x);
            ks = ks
                .max((f - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - f).abs());
        }
        assert!(ks < 0.03, "KS distance {ks}");
    }

    // Abramowitz-Stegun 7.1.26, |err| < 1.5e-7; plenty for a 0.03 KS bound.
    fn erf(x: f64) -> f64 {
        let sign = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp();
        sign * y
    }

    #[test]
    fn pair_rate_examples() {
        let lossless = LinkConfig {
            source_rate: 2.0e6,
            loss_endpoint_db: 0.0,
            loss_intermediate_db: 0.0,
            fiber_atten_db_per_km: 0.0,
            ..LinkConfig::default()
        };
        assert_abs_diff_eq!(pair_rate(&lossless), 2.0e6);

        // endpoint 4 dB at source + 4 dB at memory per arm, nothing else
        let endpoint_only = LinkConfig::default();
        let expected = 1.3e6 * 10f64.powf(-1.6);
        assert_abs_diff_eq!(pair_rate(&endpoint_only), expected, epsilon = 1.0);
        assert!((pair_rate(&endpoint_only) - 3.266e4).abs() < 50.0);

        // one intermediate node on arm a multiplies by 10^{-0.8}
        let with_node = LinkConfig {
            intermediate_nodes_a: 1,
            ..LinkConfig::default()
        };
        assert_abs_diff_eq!(
            pair_rate(&with_node),
            pair_rate(&endpoint_only) * 10f64.powf(-0.8),
            epsilon = 1e-6
        );
    }

    proptest::proptest! {
        #[test]
        fn quantile_monotone_and_bounded(
            mut samples in proptest::collection::vec(0.001f64..1e4, 1..64),
            q1 in 0.0f64..=1.0,
            q2 in 0.0f64..=1.0,
        ) {
            samples.iter_mut().for_each(|s| *s = s.abs());
            let d = LatencyDistribution::new(samples).unwrap();
            let (lo, hi) = (q1.min(q2), q1.max(q2));
            let (vlo, vhi) = (d.quantile(lo), d.quantile(hi));
            proptest::prop_assert!(vlo <= vhi);
            proptest::prop_assert!(d.min() <= vlo && vhi <= d.max());
        }

        #[test]
        fn pair_rate_never_exceeds_source(
            rate in 1.0f64..1e7,
            len_a in 0.0f64..100.0,
            len_b in 0.0f64..100.0,
            nodes_a in 0u32..4,
            endpoint in 0.0f64..10.0,
        ) {
            let link = LinkConfig {
                source_rate: rate,
                fiber_length_a_km: len_a,
                fiber_length_b_km: len_b,
                intermediate_nodes_a: nodes_a,
                loss_endpoint_db: endpoint,
                ..LinkConfig::default()
            };
            let r = pair_rate(&link);
            proptest::prop_assert!(r > 0.0 && r <= rate);
        }
    }

    #[test]
    fn pair_rate_monotone_in_losses() {
        let base = LinkConfig::default();
        let r0 = pair_rate(&base);
        for cfg in [
            LinkConfig {
                fiber_length_a_km: 10.0,
                ..base.clone()
            },
            LinkConfig {
                fiber_length_b_km: 10.0,
                ..base.clone()
            },
            LinkConfig {
                intermediate_nodes_a: 1,
                ..base.clone()
            },
            LinkConfig {
                loss_endpoint_db: 5.0,
                ..base.clone()
            },
            LinkConfig {
                loss_intermediate_db: 9.0,
                intermediate_nodes_a: 1,
                ..base.clone()
            },
            LinkConfig {
                fiber_atten_db_per_km: 0.3,
                fiber_length_a_km: 5.0,
                ..base.clone()
            },
        ] {
            assert!(pair_rate(&cfg) <= r0, "{cfg:?}");
        }
    }
}
