//! Kernel density estimation of a sample's distribution function.
//!
//! The smoothed CDF is `F_hat(x) = (1/N) sum_i Phi((x - x_i) / h)` with a
//! zero-centred, standardised kernel CDF `Phi` and explicit bandwidth `h`.
//! The normalized kernel weights
//!
//! ```text
//!     w_ij = Phi'((x_i - x_j)/h) / sum_k Phi'((x_i - x_k)/h)
//! ```
//!
//! carry the quantile-derivative ratio `grad F_hat / f_hat` that appears in
//! the gradient estimators.

use crate::error::{Error, Result};
use rayon::prelude::*;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.3989422804014327;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Kernel distribution function, non-decreasing from 0 to 1.
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Kernel::Gaussian => 0.5 * (1.0 + libm::erf(z / SQRT_2)),
            Kernel::Epanechnikov => {
                if z <= -1.0 {
                    0.0
                } else if z >= 1.0 {
                    1.0
                } else {
                    0.5 + 0.75 * z - 0.25 * z * z * z
                }
            }
        }
    }

    /// Kernel density, nonnegative and integrating to one.
    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * z * z).exp(),
            Kernel::Epanechnikov => {
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    0.75 * (1.0 - z * z)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// `h = 1.06 * sigma_hat * N^(-1/5)` with the sample standard deviation.
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeSpec {
    pub kernel: Kernel,
    pub bandwidth: BandwidthRule,
}

impl KdeSpec {
    pub fn gaussian_silverman() -> Self {
        Self {
            kernel: Kernel::Gaussian,
            bandwidth: BandwidthRule::Silverman,
        }
    }

    pub fn fixed(kernel: Kernel, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidSpec {
                what: "KDE bandwidth",
                why: format!("fixed bandwidth must be positive, got {h}"),
            });
        }
        Ok(Self {
            kernel,
            bandwidth: BandwidthRule::Fixed(h),
        })
    }
}

/// Resolve the bandwidth for a sample under the given rule.
pub fn bandwidth(points: &[f64], rule: &BandwidthRule) -> Result<f64> {
    match rule {
        BandwidthRule::Fixed(h) => {
            if *h > 0.0 {
                Ok(*h)
            } else {
                Err(Error::InvalidSpec {
                    what: "KDE bandwidth",
                    why: format!("fixed bandwidth must be positive, got {h}"),
                })
            }
        }
        BandwidthRule::Silverman => {
            if points.len() < 2 {
                return Err(Error::EmptySample("Silverman bandwidth needs N >= 2"));
            }
            let n = points.len() as f64;
            let mean = points.iter().sum::<f64>() / n;
            let var = points.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if sd <= 0.0 {
                return Err(Error::DegenerateBandwidth);
            }
            Ok(1.06 * sd * n.powf(-0.2))
        }
    }
}

/// Smoothed CDF `F_hat(x)` of the sample at a single point.
pub fn cdf_hat(points: &[f64], x: f64, spec: &KdeSpec) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySample("cdf_hat"));
    }
    let h = bandwidth(points, &spec.bandwidth)?;
    let acc: f64 = points.iter().map(|p| spec.kernel.cdf((x - p) / h)).sum();
    Ok(acc / points.len() as f64)
}

/// Smoothed CDF evaluated at every sample point: `u_i = F_hat(x_i)`.
///
/// These are the smoothed ranks used by the gradient estimators. Rows are
/// computed in parallel; assembly order is by index, so the result is
/// deterministic.
pub fn self_cdf(points: &[f64], spec: &KdeSpec) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptySample("self_cdf"));
    }
    let h = bandwidth(points, &spec.bandwidth)?;
    let n = points.len() as f64;
    match spec.kernel {
        Kernel::Epanechnikov => Ok(self_cdf_compact(points, h)),
        Kernel::Gaussian => Ok((0..points.len())
            .into_par_iter()
            .map(|i| {
                let x = points[i];
                points
                    .iter()
                    .map(|p| spec.kernel.cdf((x - p) / h))
                    .sum::<f64>()
                    / n
            })
            .collect()),
    }
}

/// Compact-support kernels only touch neighbours within `h`; a sorted sweep
/// evaluates all N self-CDF values in O(N log N + N * neighbours).
fn self_cdf_compact(points: &[f64], h: f64) -> Vec<f64> {
    let n = points.len();
    let order = crate::risk::argsort(points);
    let sorted: Vec<f64> = order.iter().map(|&i| points[i]).collect();
    let mut out = vec![0.0; n];
    let mut lo = 0usize;
    let mut hi = 0usize;
    for (rank, &x) in sorted.iter().enumerate() {
        // points strictly below x - h contribute exactly 1
        while lo < n && sorted[lo] <= x - h {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < n && sorted[hi] < x + h {
            hi += 1;
        }
        let mut acc = lo as f64;
        for &p in &sorted[lo..hi] {
            acc += Kernel::Epanechnikov.cdf((x - p) / h);
        }
        out[order[rank]] = acc / n as f64;
    }
    out
}

/// Normalized kernel weights for row `i`, plus whether the all-zero fallback
/// fired (possible only for compact kernels under extreme data).
#[derive(Debug, Clone)]
pub struct KernelWeights {
    pub weights: Vec<f64>,
    pub used_fallback: bool,
}

/// Row `i` of the normalized kernel weight matrix.
pub fn kernel_weights(points: &[f64], i: usize, spec: &KdeSpec) -> Result<KernelWeights> {
    if points.is_empty() {
        return Err(Error::EmptySample("kernel_weights"));
    }
    if i >= points.len() {
        return Err(Error::ShapeMismatch {
            what: "kernel_weights row index",
            expected: points.len(),
            got: i,
        });
    }
    let h = bandwidth(points, &spec.bandwidth)?;
    let x = points[i];
    let mut weights: Vec<f64> = points.iter().map(|p| spec.kernel.pdf((x - p) / h)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        weights.iter_mut().for_each(|w| *w = 0.0);
        weights[i] = 1.0;
        return Ok(KernelWeights {
            weights,
            used_fallback: true,
        });
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(KernelWeights {
        weights,
        used_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gauss_fixed(h: f64) -> KdeSpec {
        KdeSpec::fixed(Kernel::Gaussian, h).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let spec = gauss_fixed(1.0);
        assert!((cdf_hat(&[0.0], 0.0, &spec).unwrap() - 0.5).abs() < 1e-15);
        assert!((cdf_hat(&[0.0], 40.0, &spec).unwrap() - 1.0).abs() < 1e-12);
        assert!(cdf_hat(&[0.0], -40.0, &spec).unwrap() < 1e-12);
        assert!((cdf_hat(&[-1.0, 1.0], 0.0, &spec).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cdf_monotone_on_grid() {
        let pts = [-0.3, 1.2, 0.4, 2.0, -1.5];
        for kernel in [Kernel::Gaussian, Kernel::Epanechnikov] {
            let spec = KdeSpec {
                kernel,
                bandwidth: BandwidthRule::Silverman,
            };
            let mut prev = 0.0;
            for k in 0..200 {
                let x = -4.0 + 8.0 * k as f64 / 199.0;
                let c = cdf_hat(&pts, x, &spec).unwrap();
                assert!(c >= prev - 1e-15);
                prev = c;
            }
        }
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(bandwidth(&[1.0, 2.0], &BandwidthRule::Fixed(0.2)).unwrap(), 0.2);

        // two points {0, 1}: sd over N-1 is sqrt(0.5)
        let h = bandwidth(&[0.0, 1.0], &BandwidthRule::Silverman).unwrap();
        let expected = 1.06 * 0.5f64.sqrt() * 2.0f64.powf(-0.2);
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.6525).abs() < 1e-3);

        assert!(matches!(
            bandwidth(&[3.0, 3.0, 3.0], &BandwidthRule::Silverman),
            Err(Error::DegenerateBandwidth)
        ));
        assert!(bandwidth(&[1.0], &BandwidthRule::Silverman).is_err());
    }

    #[test]
    fn weight_examples() {
        let spec = gauss_fixed(1.0);
        let w = kernel_weights(&[0.7], 0, &spec).unwrap();
        assert_eq!(w.weights, vec![1.0]);
        assert!(!w.used_fallback);

        let w = kernel_weights(&[2.0, 2.0], 0, &spec).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-15);
        assert!((w.weights[1] - 0.5).abs() < 1e-15);

        // a point 10 bandwidths away is weightless
        let spec = gauss_fixed(0.1);
        let w = kernel_weights(&[0.0, 1.0], 0, &spec).unwrap();
        assert!((w.weights[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn self_cdf_matches_pointwise() {
        let pts = [0.3, -1.0, 2.5, 0.9, 0.3, -0.2];
        for kernel in [Kernel::Gaussian, Kernel::Epanechnikov] {
            let spec = KdeSpec {
                kernel,
                bandwidth: BandwidthRule::Silverman,
            };
            let batch = self_cdf(&pts, &spec).unwrap();
            for (i, &x) in pts.iter().enumerate() {
                let single = cdf_hat(&pts, x, &spec).unwrap();
                assert!(
                    (batch[i] - single).abs() < 1e-12,
                    "{kernel:?} i={i}: {} vs {}",
                    batch[i],
                    single
                );
            }
        }
    }

    #[test]
    fn cdf_gradient_matches_finite_differences() {
        // d/dx_j F_hat(x) = -(1/(N h)) Phi'((x - x_j)/h)
        let mut pts = vec![0.3, -1.0, 2.5, 0.9, -0.2];
        let x = 0.5;
        let h = 0.8;
        for kernel in [Kernel::Gaussian, Kernel::Epanechnikov] {
            let spec = KdeSpec::fixed(kernel, h).unwrap();
            let n = pts.len() as f64;
            for j in 0..pts.len() {
                let analytic = -(1.0 / (n * h)) * kernel.pdf((x - pts[j]) / h);
                let d = 1e-6;
                let orig = pts[j];
                pts[j] = orig + d;
                let up = cdf_hat(&pts, x, &spec).unwrap();
                pts[j] = orig - d;
                let dn = cdf_hat(&pts, x, &spec).unwrap();
                pts[j] = orig;
                let fd = (up - dn) / (2.0 * d);
                let scale = analytic.abs().max(1e-3);
                assert!(
                    ((analytic - fd) / scale).abs() < 1e-6,
                    "{kernel:?} j={j}: analytic {analytic} fd {fd}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn weights_are_probability_rows(
            pts in prop::collection::vec(-5.0f64..5.0, 1..20),
            i in 0usize..20,
        ) {
            let i = i % pts.len();
            for kernel in [Kernel::Gaussian, Kernel::Epanechnikov] {
                let spec = KdeSpec::fixed(kernel, 0.5).unwrap();
                let w = kernel_weights(&pts, i, &spec).unwrap();
                let total: f64 = w.weights.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(w.weights.iter().all(|&v| v >= 0.0));
                prop_assert!(w.weights[i] > 0.0);
            }
        }

        #[test]
        fn silverman_tracks_formula(
            pts in prop::collection::vec(-5.0f64..5.0, 2..50),
        ) {
            prop_assume!(pts.iter().any(|&x| x != pts[0]));
            let h = bandwidth(&pts, &BandwidthRule::Silverman).unwrap();
            let n = pts.len() as f64;
            let mean = pts.iter().sum::<f64>() / n;
            let sd = (pts.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!((h - 1.06 * sd * n.powf(-0.2)).abs() < 1e-12);
        }
    }
}
