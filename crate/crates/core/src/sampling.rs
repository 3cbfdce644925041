//! Deterministic sampling helpers shared by the curvature audits, the
//! volume-ratio estimator and the normal-fiber sweeps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded RNG used everywhere; ChaCha8 is stable across platforms, so
/// identical seeds reproduce identical sample streams.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard-normal vector of length `n`.
pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Gram-Schmidt with respect to the inner product `⟨a,b⟩ = aᵀ G b`.
///
/// Columns of the result are G-orthonormal; returns `None` when the input
/// columns are numerically dependent (pivot below `1e-12` of the column
/// norm).
pub fn gram_schmidt(metric: &DMatrix<f64>, seeds: &[DVector<f64>]) -> Option<Vec<DVector<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let mut v = seed.clone();
        for b in &basis {
            let c = b.dot(&(metric * &v));
            v -= b * c;
        }
        let norm2 = v.dot(&(metric * &v));
        let scale = seed.dot(&(metric * seed)).max(1.0);
        if norm2 <= 1e-24 * scale {
            return None;
        }
        basis.push(v / norm2.sqrt());
    }
    Some(basis)
}

/// Completes `fixed` (assumed G-orthonormal already) to a full G-orthonormal
/// basis of dimension `n`, using coordinate seeds in deterministic order.
pub fn complete_frame(
    metric: &DMatrix<f64>,
    fixed: &[DVector<f64>],
    n: usize,
) -> Vec<DVector<f64>> {
    let mut frame: Vec<DVector<f64>> = fixed.to_vec();
    let mut axis = 0;
    while frame.len() < n {
        assert!(axis < n, "coordinate seeds exhausted while completing frame");
        let mut v: DVector<f64> = DVector::zeros(n);
        v[axis] = 1.0;
        axis += 1;
        for b in &frame {
            let c = b.dot(&(metric * &v));
            v -= b * c;
        }
        let norm2 = v.dot(&(metric * &v));
        if norm2 > 1e-16 {
            frame.push(v / norm2.sqrt());
        }
    }
    frame
}

/// Random G-orthonormal frame of `count` vectors, drawn from seeded
/// Gaussians; retries dependent draws.
pub fn random_frame(
    rng: &mut ChaCha8Rng,
    metric: &DMatrix<f64>,
    count: usize,
) -> Vec<DVector<f64>> {
    let n = metric.nrows();
    loop {
        let seeds: Vec<DVector<f64>> = (0..count).map(|_| gaussian_vector(rng, n)).collect();
        if let Some(frame) = gram_schmidt(metric, &seeds) {
            return frame;
        }
    }
}

/// Uniform point in an axis-aligned box.
pub fn uniform_in_box(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| a + (b - a) * rng.random::<f64>())
        .collect()
}

/// Deterministic low-discrepancy points in the unit ball of dimension `m`.
///
/// For `m = 1` a symmetric lattice, for `m = 2` a Fibonacci spiral, and for
/// higher dimensions a Halton-driven radial/spherical product rule. Scaled
/// copies sample the normal fiber disks over the submanifold.
pub fn unit_ball_points(m: usize, count: usize) -> Vec<DVector<f64>> {
    match m {
        0 => vec![DVector::zeros(0); count.min(1)],
        1 => (0..count)
            .map(|j| {
                let u = (j as f64 + 0.5) / count as f64;
                DVector::from_vec(vec![2.0 * u - 1.0])
            })
            .collect(),
        2 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..count)
                .map(|j| {
                    let r = (((j as f64) + 0.5) / count as f64).sqrt();
                    let th = golden * j as f64;
                    DVector::from_vec(vec![r * th.cos(), r * th.sin()])
                })
                .collect()
        }
        _ => (0..count)
            .map(|j| {
                let r = halton(j as u64 + 1, 2).powf(1.0 / m as f64);
                let mut dir = DVector::zeros(m);
                for (i, x) in dir.iter_mut().enumerate() {
                    // inverse-normal via rational approximation keeps the
                    // sequence deterministic without an RNG
                    let u = halton(j as u64 + 1, PRIMES[i + 1]);
                    *x = inverse_normal_cdf(u);
                }
                let norm = dir.norm();
                if norm < 1e-12 {
                    dir[0] = 1.0;
                } else {
                    dir /= norm;
                }
                dir * r
            })
            .collect(),
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Acklam's rational approximation of the standard normal quantile; ~1e-9
/// absolute accuracy, ample for direction generation.
fn inverse_normal_cdf(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_orthonormality() {
        let mut rng = rng_from_seed(3);
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 2.0]));
        let frame = random_frame(&mut rng, &g, 3);
        for i in 0..3 {
            for j in 0..3 {
                let d = frame[i].dot(&(&g * &frame[j]));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_points_inside_unit_ball() {
        for m in 1..=4 {
            for p in unit_ball_points(m, 32) {
                assert!(p.norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn ball_points_deterministic() {
        let a = unit_ball_points(2, 16);
        let b = unit_ball_points(2, 16);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }
}
