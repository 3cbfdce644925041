//! Monte Carlo estimate of the asymptotic volume ratio: geodesic-ball
//! volume from radial Jacobi determinants over sampled unit directions,
//! normalized by the Euclidean ball (`θ`) or by the h-model ball (`θ_h`).

use super::{random_unit_vector, TransportError};
use crate::geometry::{curvature_packet_unchecked, unit_ball_volume, MetricChart};
use crate::ode::{solve_h, theta_h_normalizer};
use crate::profile::AsymptoticProfile;
use crate::sampling;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub enum AvrMode<'a> {
    /// Normalize by `|B^N| r^N`.
    Theta,
    /// Normalize by `N |B^N| ∫₀^r h^{N-1}`, `h'' = λ h`.
    ThetaH { profile: &'a AsymptoticProfile },
}

#[derive(Debug, Clone)]
pub struct AvrEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_dirs: usize,
    pub radius: f64,
    /// Directions truncated at a conjugate point before the radius.
    pub truncated_dirs: usize,
    /// Conjugacy, not the cut locus, is what the Jacobi data detects; on
    /// charts where the cut locus comes first the estimate is an upper bound.
    pub cut_locus_caveat: bool,
}

struct RadialState {
    x: DVector<f64>,
    v: DVector<f64>,
    e: DMatrix<f64>,
    j: DMatrix<f64>,
    jp: DMatrix<f64>,
}

impl RadialState {
    fn combine(base: &RadialState, parts: &[(&RadialState, f64)]) -> RadialState {
        let mut out = RadialState {
            x: base.x.clone(),
            v: base.v.clone(),
            e: base.e.clone(),
            j: base.j.clone(),
            jp: base.jp.clone(),
        };
        for (s, c) in parts {
            out.x += &s.x * *c;
            out.v += &s.v * *c;
            out.e += &s.e * *c;
            out.j += &s.j * *c;
            out.jp += &s.jp * *c;
        }
        out
    }
}

/// Ball-volume ratio at `base` of radius `r` from `n_dirs` sampled unit
/// directions (deterministic given `seed`); per direction the transverse
/// Jacobi block `J(0) = 0`, `J'(0) = I` is integrated and `∫ det J dt` is
/// accumulated up to the first conjugate point.
pub fn avr_estimate(
    chart: &MetricChart,
    base: &[f64],
    r: f64,
    n_dirs: usize,
    dt: f64,
    seed: u64,
    mode: AvrMode<'_>,
) -> Result<AvrEstimate, TransportError> {
    if n_dirs < 100 {
        return Err(TransportError::TooFewDirections(n_dirs));
    }
    let n = chart.dim;
    let g0 = chart.metric_at(base)?;

    let steps = (r / dt).ceil().max(1.0) as usize;
    let h_step = r / steps as f64;
    let mut rng = sampling::rng_from_seed(seed);

    let rate = |state: &RadialState| -> Result<RadialState, TransportError> {
        if !chart.region.contains(state.x.as_slice()) {
            return Err(TransportError::RadiusExceedsChart { r });
        }
        let packet = curvature_packet_unchecked(chart, state.x.as_slice());
        let mut acc = DVector::zeros(n);
        for k in 0..n {
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    sum += packet.gamma(k, i, j) * state.v[i] * state.v[j];
                }
            }
            acc[k] = -sum;
        }
        let cols = n - 1;
        let mut de = DMatrix::zeros(n, cols);
        for a in 0..cols {
            for k in 0..n {
                let mut sum = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        sum += packet.gamma(k, i, j) * state.v[i] * state.e[(j, a)];
                    }
                }
                de[(k, a)] = -sum;
            }
        }
        let tidal = packet.jacobi_operator(&state.v);
        let s_perp = state.e.transpose() * tidal * &state.e;
        Ok(RadialState {
            x: state.v.clone(),
            v: acc,
            e: de,
            j: state.jp.clone(),
            jp: -(&state.j * s_perp),
        })
    };

    let mut per_dir = Vec::with_capacity(n_dirs);
    let mut truncated = 0usize;
    for _ in 0..n_dirs {
        let dir = random_unit_vector(&mut rng, &g0);
        // complete to a g-orthonormal frame; drop the radial vector itself
        let frame = sampling::complete_frame(&g0, &[dir.clone()], n);
        let mut e = DMatrix::zeros(n, n - 1);
        for a in 1..n {
            e.set_column(a - 1, &frame[a]);
        }
        let mut state = RadialState {
            x: DVector::from_column_slice(base),
            v: dir,
            e,
            j: DMatrix::zeros(n - 1, n - 1),
            jp: DMatrix::identity(n - 1, n - 1),
        };
        let mut integral = 0.0;
        let mut prev_det = 0.0;
        for _ in 0..steps {
            let k1 = rate(&state)?;
            let s2 = RadialState::combine(&state, &[(&k1, 0.5 * h_step)]);
            let k2 = rate(&s2)?;
            let s3 = RadialState::combine(&state, &[(&k2, 0.5 * h_step)]);
            let k3 = rate(&s3)?;
            let s4 = RadialState::combine(&state, &[(&k3, h_step)]);
            let k4 = rate(&s4)?;
            state = RadialState::combine(
                &state,
                &[
                    (&k1, h_step / 6.0),
                    (&k2, h_step / 3.0),
                    (&k3, h_step / 3.0),
                    (&k4, h_step / 6.0),
                ],
            );
            let det = state.j.clone().lu().determinant();
            if det <= 0.0 {
                truncated += 1;
                break;
            }
            integral += 0.5 * (prev_det + det) * h_step;
            prev_det = det;
        }
        per_dir.push(integral);
    }

    let ball = unit_ball_volume(n).expect("dim >= 1");
    // per-direction: vol = N·|B^N|·mean(∫det J), so θ = N·mean(∫det J)/r^N
    let normalizer = match mode {
        AvrMode::Theta => r.powi(n as i32) / n as f64,
        AvrMode::ThetaH { profile } => {
            let h = solve_h(profile, r * 1.001 + 1.0e-6, 1.0e-3)
                .map_err(|_| TransportError::Unconverged { estimate: f64::NAN })?;
            theta_h_normalizer(&h, n, r).expect("radius inside grid") / (n as f64 * ball)
        }
    };

    let values: Vec<f64> = per_dir.iter().map(|v| v / normalizer).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (values.len().saturating_sub(1).max(1)) as f64;
    Ok(AvrEstimate {
        value: mean,
        std_err: (var / values.len() as f64).sqrt(),
        n_dirs,
        radius: r,
        truncated_dirs: truncated,
        cut_locus_caveat: truncated > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        euclidean_chart, sphere_flat_product_chart, stereographic_sphere_chart,
        warped_profile_chart,
    };

    #[test]
    fn flat_space_volume_ratio_is_one() {
        let chart = euclidean_chart(4, 6.0, None);
        let est = avr_estimate(&chart, &[0.0; 4], 4.0, 120, 0.02, 7, AvrMode::Theta).unwrap();
        assert!((est.value - 1.0).abs() < 1e-4, "θ = {}", est.value);
        assert!(est.std_err < 1e-10, "flat directions all identical");
        assert_eq!(est.truncated_dirs, 0);
    }

    #[test]
    fn deterministic_and_seed_stable() {
        let chart = euclidean_chart(3, 4.0, None);
        let a = avr_estimate(&chart, &[0.1, 0.0, -0.2], 2.0, 100, 0.02, 3, AvrMode::Theta).unwrap();
        let b = avr_estimate(&chart, &[0.1, 0.0, -0.2], 2.0, 100, 0.02, 3, AvrMode::Theta).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = avr_estimate(&chart, &[0.1, 0.0, -0.2], 2.0, 100, 0.02, 4, AvrMode::Theta).unwrap();
        let band = (a.std_err + c.std_err).max(1e-9);
        assert!((a.value - c.value).abs() <= band + 1e-9);
    }

    #[test]
    fn product_chart_small_ball_expansion() {
        // ball-volume expansion: θ(r) = 1 - Scal·r²/(6(N+2)) + O(r⁴), Scal = 2
        let chart = sphere_flat_product_chart(1.0, 2, 3.0);
        let est = avr_estimate(&chart, &[0.0; 4], 0.1, 150, 0.002, 11, AvrMode::Theta).unwrap();
        assert!((est.value - 1.0).abs() < 0.005, "θ = {}", est.value);
        let correction = 1.0 - 2.0 * 0.1 * 0.1 / (6.0 * 6.0);
        assert!((est.value - correction).abs() < 5e-4);
    }

    #[test]
    fn warped_model_theta_h_is_one() {
        let profile = AsymptoticProfile::power(0.3, 3.0).unwrap();
        let chart = warped_profile_chart(&profile, 3, 8.0);
        let est = avr_estimate(
            &chart,
            &[0.0; 3],
            6.0,
            120,
            0.02,
            5,
            AvrMode::ThetaH { profile: &profile },
        )
        .unwrap();
        assert!(
            (est.value - 1.0).abs() < 0.02,
            "θ_h = {} (model built from h)",
            est.value
        );
    }

    #[test]
    fn sphere_ball_volume_matches_closed_form() {
        // vol of a geodesic ball of radius ρ in S³(1): 4π(ρ/2 - sin(2ρ)/4)
        let chart = stereographic_sphere_chart(3, 1.0, 60.0);
        let rho: f64 = 2.5;
        let est = avr_estimate(&chart, &[0.0; 3], rho, 100, 0.01, 9, AvrMode::Theta).unwrap();
        let vol = 4.0 * std::f64::consts::PI * (rho / 2.0 - (2.0 * rho).sin() / 4.0);
        let theta = vol / (unit_ball_volume(3).unwrap() * rho.powi(3));
        assert!(
            (est.value - theta).abs() / theta < 0.01,
            "θ = {} vs closed form {theta}",
            est.value
        );
        assert_eq!(est.truncated_dirs, 0);
    }

    #[test]
    fn preconditions_enforced() {
        let chart = euclidean_chart(3, 2.0, None);
        assert!(matches!(
            avr_estimate(&chart, &[0.0; 3], 1.0, 50, 0.02, 1, AvrMode::Theta),
            Err(TransportError::TooFewDirections(50))
        ));
        assert!(matches!(
            avr_estimate(&chart, &[0.0; 3], 10.0, 100, 0.02, 1, AvrMode::Theta),
            Err(TransportError::RadiusExceedsChart { .. })
        ));
    }
}
