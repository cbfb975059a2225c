//! Gaussian-process samplers: single-output draws, correlated two-output
//! draws through a coregionalization matrix, and separable time-frequency
//! random fields.
//!
//! All draws are `mean + L z` with `L` a Cholesky factor and `z` standard
//! normals consumed from the caller's stream in row-major order. That fixed
//! consumption order is part of the determinism contract.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, KernelSpec};

/// Jitter ladder tried in order when factorizing a covariance matrix.
/// Long length scales routinely make kernel matrices numerically singular;
/// resampling hyperparameters after `1e-4` fails preserves the sampling
/// distribution better than ever-larger jitter would.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

/// One sampled function: values at ordered control-frame indices.
#[derive(Clone, Debug, PartialEq)]
pub struct GpSample {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

impl GpSample {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.values.len() {
            return Err(Error::Parameter("GpSample points/values length mismatch".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("GpSample contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Joint prior over a harmonic-volume track and a noise-volume track,
/// coupled through a 2x2 coregionalization matrix `B`: the stacked pair is
/// Gaussian with covariance `B (x) K` (Kronecker product over outputs and
/// points).
#[derive(Clone, Debug)]
pub struct CoregionalizationSpec {
    /// Mean of the first (harmonic) output, in log-gain units.
    pub mean_a: f64,
    /// Mean of the second (noise) output, in log-gain units.
    pub mean_b: f64,
    /// Symmetric positive-semidefinite 2x2 output-coupling matrix.
    pub b_matrix: [[f64; 2]; 2],
    pub base_kernel: KernelSpec,
}

impl CoregionalizationSpec {
    pub fn validate(&self) -> Result<()> {
        let b = &self.b_matrix;
        let finite = b.iter().flatten().all(|v| v.is_finite())
            && self.mean_a.is_finite()
            && self.mean_b.is_finite();
        if !finite {
            return Err(Error::Parameter("coregionalization spec must be finite".into()));
        }
        if (b[0][1] - b[1][0]).abs() > 1e-12 * (1.0 + b[0][1].abs()) {
            return Err(Error::Parameter("B matrix must be symmetric".into()));
        }
        if b[0][0] <= 0.0 || b[1][1] <= 0.0 {
            return Err(Error::Parameter("B diagonal entries must be > 0".into()));
        }
        if b[0][0] * b[1][1] - b[0][1] * b[1][0] < -1e-12 {
            return Err(Error::Parameter("B matrix must be positive semidefinite".into()));
        }
        self.base_kernel.validate()
    }
}

/// A lower-triangular Cholesky factor plus the jitter that made it succeed.
#[derive(Clone, Debug)]
pub struct CholFactor {
    pub n: usize,
    /// Row-major lower triangle (full n*n storage, upper part zero).
    pub l: Vec<f64>,
    /// The epsilon from [`JITTER_LADDER`] actually used.
    pub jitter: f64,
}

impl CholFactor {
    /// y = L z
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(z.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = &self.l[i * n..i * n + i + 1];
            let mut acc = 0.0;
            for (j, &lij) in row.iter().enumerate() {
                acc += lij * z[j];
            }
            out[i] = acc;
        }
        out
    }
}

fn cholesky_attempt(m: &[f64], n: usize, eps: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[i * n + j];
            if i == j {
                sum += eps;
            }
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Factorizes `m + eps I = L L^T` with the smallest epsilon from the ladder
/// that succeeds. The epsilon used is recorded on the returned factor.
pub fn cholesky_with_jitter(m: &[f64], n: usize) -> Result<CholFactor> {
    if m.len() != n * n {
        return Err(Error::Parameter(format!(
            "matrix storage {} does not match dimension {n}",
            m.len()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("matrix must be finite".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (m[i * n + j], m[j * n + i]);
            if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::Parameter("matrix must be symmetric".into()));
            }
        }
    }
    for &eps in &JITTER_LADDER {
        if let Some(l) = cholesky_attempt(m, n, eps) {
            return Ok(CholFactor { n, l, jitter: eps });
        }
    }
    Err(Error::Numerical(format!(
        "Cholesky failed at jitter {:e}; resample hyperparameters",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

pub(crate) fn draw_standard_normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws one function from `GP(mean, k)` at the given points.
///
/// A kernel with `variance == 0` yields the mean exactly (the jitter ladder
/// is bypassed so no spurious noise leaks in); the normal draws are still
/// consumed so stream positions do not depend on the variance.
pub fn sample_gp<R: Rng>(
    spec: &KernelSpec,
    points: &[f64],
    mean: f64,
    rng: &mut R,
) -> Result<GpSample> {
    spec.validate()?;
    let n = points.len();
    if n == 0 {
        return Ok(GpSample {
            points: Vec::new(),
            values: Vec::new(),
        });
    }
    let z = draw_standard_normals(rng, n);
    if spec.variance == 0.0 {
        return Ok(GpSample {
            points: points.to_vec(),
            values: vec![mean; n],
        });
    }
    let k = eval_kernel(spec, points, points)?;
    let factor = cholesky_with_jitter(&k, n)?;
    let mut values = factor.mul_vec(&z);
    for v in &mut values {
        *v += mean;
    }
    let sample = GpSample {
        points: points.to_vec(),
        values,
    };
    sample.validate()?;
    Ok(sample)
}

/// Internal fast path: sample using a precomputed unit-variance factor,
/// scaling by `sigma`. Used by the event pipeline for its fixed kernels,
/// where the factor is cached across events.
pub(crate) fn sample_with_factor<R: Rng>(
    factor: &CholFactor,
    sigma: f64,
    mean: f64,
    rng: &mut R,
) -> Vec<f64> {
    let z = draw_standard_normals(rng, factor.n);
    if sigma == 0.0 {
        return vec![mean; factor.n];
    }
    let mut values = factor.mul_vec(&z);
    for v in &mut values {
        *v = mean + sigma * *v;
    }
    values
}

/// Draws a correlated (harmonic, noise) volume-track pair from the
/// two-output prior `N((mean_a 1, mean_b 1), B (x) K)`.
///
/// Sampling is factorized: with `L_B = chol(B)` and `L_K = chol(K)`, the
/// row-major draw `V = L_B Z L_K^T` (Z being 2 x n standard normals drawn
/// row by row) has exactly the Kronecker covariance, so the 2n x 2n matrix
/// is never materialized.
pub fn sample_icm_pair<R: Rng>(
    spec: &CoregionalizationSpec,
    points: &[f64],
    rng: &mut R,
) -> Result<(GpSample, GpSample)> {
    spec.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(Error::Parameter("ICM sampling needs at least one point".into()));
    }

    // chol(B) for the 2x2 coupling, with the same ladder semantics.
    let b = spec.b_matrix;
    let bm = [b[0][0], b[0][1], b[1][0], b[1][1]];
    let lb = cholesky_with_jitter(&bm, 2)?;
    let (lb00, lb10, lb11) = (lb.l[0], lb.l[2], lb.l[3]);

    let z0 = draw_standard_normals(rng, n);
    let z1 = draw_standard_normals(rng, n);

    let (u0, u1) = if spec.base_kernel.variance == 0.0 {
        (vec![0.0; n], vec![0.0; n])
    } else {
        let k = eval_kernel(&spec.base_kernel, points, points)?;
        let lk = cholesky_with_jitter(&k, n)?;
        (lk.mul_vec(&z0), lk.mul_vec(&z1))
    };

    let har: Vec<f64> = u0.iter().map(|&u| spec.mean_a + lb00 * u).collect();
    let noise: Vec<f64> = u0
        .iter()
        .zip(&u1)
        .map(|(&a, &b)| spec.mean_b + lb10 * a + lb11 * b)
        .collect();

    let har = GpSample {
        points: points.to_vec(),
        values: har,
    };
    let noise = GpSample {
        points: points.to_vec(),
        values: noise,
    };
    har.validate()?;
    noise.validate()?;
    Ok((har, noise))
}

/// Draws an `n_frames x n_bins` zero-mean random field whose covariance is
/// the product `K_time[t1,t2] * K_freq[f1,f2]`.
///
/// Computed as `L_time Z L_freq^T` with `Z` drawn row-major (frame-major),
/// which matches Cholesky sampling of the explicit Kronecker covariance on
/// the row-major flattened grid draw for draw.
pub fn sample_separable_field<R: Rng>(
    time_kernel: &KernelSpec,
    freq_kernel: &KernelSpec,
    n_frames: usize,
    n_bins: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    time_kernel.validate()?;
    freq_kernel.validate()?;
    if n_frames == 0 || n_bins == 0 {
        return Err(Error::Parameter("field dimensions must be >= 1".into()));
    }
    let z: Vec<f64> = draw_standard_normals(rng, n_frames * n_bins);
    if time_kernel.variance == 0.0 || freq_kernel.variance == 0.0 {
        return Ok(vec![0.0; n_frames * n_bins]);
    }
    let t_pts: Vec<f64> = (0..n_frames).map(|i| i as f64).collect();
    let f_pts: Vec<f64> = (0..n_bins).map(|i| i as f64).collect();
    let kt = eval_kernel(time_kernel, &t_pts, &t_pts)?;
    let kf = eval_kernel(freq_kernel, &f_pts, &f_pts)?;
    let lt = cholesky_with_jitter(&kt, n_frames)?;
    let lf = cholesky_with_jitter(&kf, n_bins)?;
    Ok(apply_separable_factors(&lt, &lf, &z, n_frames, n_bins))
}

/// `L_t Z L_f^T` for row-major `z` of shape `n_frames x n_bins`.
pub(crate) fn apply_separable_factors(
    lt: &CholFactor,
    lf: &CholFactor,
    z: &[f64],
    n_frames: usize,
    n_bins: usize,
) -> Vec<f64> {
    debug_assert_eq!(lt.n, n_frames);
    debug_assert_eq!(lf.n, n_bins);
    debug_assert_eq!(z.len(), n_frames * n_bins);
    // tmp = Z L_f^T  (each row of Z transformed by L_f)
    let mut tmp = vec![0.0; n_frames * n_bins];
    for t in 0..n_frames {
        let zrow = &z[t * n_bins..(t + 1) * n_bins];
        let out = &mut tmp[t * n_bins..(t + 1) * n_bins];
        for i in 0..n_bins {
            let lrow = &lf.l[i * n_bins..i * n_bins + i + 1];
            let mut acc = 0.0;
            for (j, &lij) in lrow.iter().enumerate() {
                acc += lij * zrow[j];
            }
            out[i] = acc;
        }
    }
    // out = L_t tmp  (each column transformed by L_t)
    let mut out = vec![0.0; n_frames * n_bins];
    for i in 0..n_frames {
        let lrow = &lt.l[i * n_frames..i * n_frames + i + 1];
        let orow = &mut out[i * n_bins..(i + 1) * n_bins];
        for (j, &lij) in lrow.iter().enumerate() {
            if lij == 0.0 {
                continue;
            }
            let trow = &tmp[j * n_bins..(j + 1) * n_bins];
            for (o, &tv) in orow.iter_mut().zip(trow) {
                *o += lij * tv;
            }
        }
    }
    out
}
