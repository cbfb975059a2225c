//! Stationary covariance kernels for Gaussian-process function sampling.
//!
//! Eight kernels cover the rough/smooth/periodic spectrum of temporal
//! behaviors the generator draws from. Length scales, periods and point
//! coordinates are all expressed in control frames, never seconds, so the
//! same spec means the same thing at every sample rate.

use crate::error::{Error, Result};

/// The eight kernel families. The discriminant order is fixed: kernel class
/// labels in the codebook are indices into this enum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum KernelKind {
    SquaredExponential,
    Matern12,
    Matern32,
    Matern52,
    RationalQuadratic,
    Periodic,
    LocallyPeriodic,
    Cosine,
}

pub const KERNEL_KINDS: [KernelKind; 8] = [
    KernelKind::SquaredExponential,
    KernelKind::Matern12,
    KernelKind::Matern32,
    KernelKind::Matern52,
    KernelKind::RationalQuadratic,
    KernelKind::Periodic,
    KernelKind::LocallyPeriodic,
    KernelKind::Cosine,
];

impl KernelKind {
    pub fn index(self) -> usize {
        KERNEL_KINDS.iter().position(|&k| k == self).unwrap()
    }

    pub fn from_index(i: usize) -> Result<Self> {
        KERNEL_KINDS
            .get(i)
            .copied()
            .ok_or_else(|| Error::Range(format!("kernel index {i} out of 0..8")))
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::SquaredExponential => "squared_exponential",
            KernelKind::Matern12 => "matern12",
            KernelKind::Matern32 => "matern32",
            KernelKind::Matern52 => "matern52",
            KernelKind::RationalQuadratic => "rational_quadratic",
            KernelKind::Periodic => "periodic",
            KernelKind::LocallyPeriodic => "locally_periodic",
            KernelKind::Cosine => "cosine",
        }
    }

    /// True for kinds whose covariance depends on a period.
    pub fn uses_period(self) -> bool {
        matches!(
            self,
            KernelKind::Periodic | KernelKind::LocallyPeriodic | KernelKind::Cosine
        )
    }

    pub fn uses_alpha(self) -> bool {
        matches!(self, KernelKind::RationalQuadratic)
    }
}

/// One kernel with its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Output scale sigma^2; zero collapses samples onto the mean.
    pub variance: f64,
    /// In control frames.
    pub length_scale: f64,
    /// In control frames; required by the periodic kinds.
    pub period: Option<f64>,
    /// Shape of the rational-quadratic tail; required by that kind only.
    pub alpha: Option<f64>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, variance: f64, length_scale: f64) -> Self {
        KernelSpec {
            kind,
            variance,
            length_scale,
            period: None,
            alpha: None,
        }
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.variance.is_finite() || self.variance < 0.0 {
            return Err(Error::Parameter(format!(
                "kernel variance must be finite and >= 0, got {}",
                self.variance
            )));
        }
        if !self.length_scale.is_finite() || self.length_scale <= 0.0 {
            return Err(Error::Parameter(format!(
                "kernel length scale must be finite and > 0, got {}",
                self.length_scale
            )));
        }
        if self.kind.uses_period() {
            match self.period {
                Some(p) if p.is_finite() && p > 0.0 => {}
                other => {
                    return Err(Error::Parameter(format!(
                        "{} kernel needs a finite period > 0, got {:?}",
                        self.kind.name(),
                        other
                    )))
                }
            }
        }
        if self.kind.uses_alpha() {
            match self.alpha {
                Some(a) if a.is_finite() && a > 0.0 => {}
                other => {
                    return Err(Error::Parameter(format!(
                        "rational-quadratic kernel needs a finite alpha > 0, got {:?}",
                        other
                    )))
                }
            }
        }
        Ok(())
    }

    /// Covariance between two points.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let r = (x - y).abs();
        let ell = self.length_scale;
        let corr = match self.kind {
            KernelKind::SquaredExponential => (-0.5 * (r / ell).powi(2)).exp(),
            KernelKind::Matern12 => (-r / ell).exp(),
            KernelKind::Matern32 => {
                let s = 3.0_f64.sqrt() * r / ell;
                (1.0 + s) * (-s).exp()
            }
            KernelKind::Matern52 => {
                let s = 5.0_f64.sqrt() * r / ell;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelKind::RationalQuadratic => {
                let a = self.alpha.unwrap_or(1.0);
                (1.0 + r * r / (2.0 * a * ell * ell)).powf(-a)
            }
            KernelKind::Periodic => periodic_corr(r, ell, self.period.unwrap_or(1.0)),
            KernelKind::LocallyPeriodic => {
                (-0.5 * (r / ell).powi(2)).exp()
                    * periodic_corr(r, ell, self.period.unwrap_or(1.0))
            }
            KernelKind::Cosine => {
                (2.0 * std::f64::consts::PI * r / self.period.unwrap_or(1.0)).cos()
            }
        };
        self.variance * corr
    }
}

fn periodic_corr(r: f64, ell: f64, period: f64) -> f64 {
    let s = (std::f64::consts::PI * r / period).sin();
    (-2.0 * s * s / (ell * ell)).exp()
}

/// Evaluates the kernel matrix between two point sets; entry `(i, j)` is
/// `k(xs[i], ys[j])`. When the two sets are identical the result is filled
/// symmetrically so it equals its own transpose exactly.
pub fn eval_kernel(spec: &KernelSpec, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Parameter("kernel evaluation points must be finite".into()));
    }
    let (n, m) = (xs.len(), ys.len());
    let mut out = vec![0.0; n * m];
    let same = n == m && xs == ys;
    if same {
        for i in 0..n {
            for j in 0..=i {
                let v = spec.value(xs[i], xs[j]);
                out[i * m + j] = v;
                out[j * m + i] = v;
            }
        }
    } else {
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] = spec.value(xs[i], ys[j]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn se(variance: f64, ell: f64) -> KernelSpec {
        KernelSpec::new(KernelKind::SquaredExponential, variance, ell)
    }

    #[test]
    fn kernel_at_zero_lag_equals_variance() {
        for kind in KERNEL_KINDS {
            let spec = KernelSpec::new(kind, 1.0, 1.0).with_period(3.0).with_alpha(1.5);
            assert_eq!(spec.value(2.0, 2.0), 1.0, "{:?}", kind);
        }
    }

    #[test]
    fn se_closed_form_matches_hand_computation() {
        // sigma^2 = 2, ell = 3, lag 3 -> 2 * exp(-0.5)
        let k = se(2.0, 3.0).value(0.0, 3.0);
        let expected = 2.0 * (-0.5_f64).exp();
        assert!((k - expected).abs() < 1e-12, "{k} vs {expected}");
        assert!((k - 1.2131).abs() < 1e-4);
    }

    #[test]
    fn same_points_give_exactly_symmetric_matrix() {
        let pts: Vec<f64> = (0..7).map(|i| i as f64 * 1.3).collect();
        for kind in KERNEL_KINDS {
            let spec = KernelSpec::new(kind, 1.7, 4.0).with_period(5.0).with_alpha(0.8);
            let m = eval_kernel(&spec, &pts, &pts).unwrap();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    assert_eq!(m[i * pts.len() + j], m[j * pts.len() + i]);
                }
            }
        }
    }

    #[test]
    fn rectangular_evaluation_has_requested_shape() {
        let m = eval_kernel(&se(1.0, 1.0), &[0.0, 1.0, 2.0], &[0.5, 1.5]).unwrap();
        assert_eq!(m.len(), 6);
        assert!((m[0] - se(1.0, 1.0).value(0.0, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(se(-1.0, 1.0).validate().is_err());
        assert!(se(1.0, 0.0).validate().is_err());
        assert!(KernelSpec::new(KernelKind::Periodic, 1.0, 1.0).validate().is_err());
        assert!(KernelSpec::new(KernelKind::RationalQuadratic, 1.0, 1.0)
            .validate()
            .is_err());
        assert!(eval_kernel(&se(1.0, 1.0), &[f64::NAN], &[0.0]).is_err());
    }
}
