//! Per-vehicle saturated-innovation observer.
//!
//! One observer step is strictly: [`time_update`] → [`innovation`] →
//! [`saturation_gains`] → [`adjust_gains`] → [`measurement_update`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::platoon::{PlatoonParams, Vec2, VehicleId};
use crate::sensing::{StackedMeasurement, Vec6};

/// Predicted estimate, updated estimate and saturation threshold of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub x_hat: Vec2,
    pub x_bar: Vec2,
    pub beta: f64,
}

/// Diagonal of the 6×6 observer gain, in (position, velocity) pairs matching
/// the stacked-measurement labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainDiagonal(pub [f64; 6]);

impl GainDiagonal {
    pub const ONES: GainDiagonal = GainDiagonal([1.0; 6]);

    pub fn pair(&self, m: usize) -> [f64; 2] {
        [self.0[2 * m], self.0[2 * m + 1]]
    }
}

/// Which rule produced the gains of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainCase {
    Saturated,
    /// A confirmed attacker's measurements are excluded.
    Isolated,
    /// Both members of every doubted pair are excluded.
    Doubted,
    /// Conventional observer: every gain is one.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedGains {
    pub gains: GainDiagonal,
    pub case: GainCase,
    /// More than one confirmed attacker, outside the single-attacker model.
    /// All of them are isolated.
    pub model_violation: bool,
}

/// `x̄(t) = A x̂(t-1) + [0, T u(t-1)]`.
pub fn time_update(x_hat_prev: Vec2, u_prev: f64, params: &PlatoonParams) -> Vec2 {
    params.transition() * x_hat_prev + Vec2::new(0.0, params.sampling_time() * u_prev)
}

/// `η = z - C x̄`.
pub fn innovation(z: &StackedMeasurement, x_bar: Vec2) -> Vec6 {
    let mut eta = z.z;
    for m in 0..3 {
        eta[2 * m] -= x_bar[0];
        eta[2 * m + 1] -= x_bar[1];
    }
    eta
}

/// Componentwise `k = 1` if `|η| <= β`, else `β / |η|`.
pub fn saturation_gains(eta: &Vec6, beta: f64) -> GainDiagonal {
    let mut k = [1.0; 6];
    for (ki, e) in k.iter_mut().zip(eta.iter()) {
        let mag = e.abs();
        if mag > beta {
            *ki = beta / mag;
        }
    }
    GainDiagonal(k)
}

/// Overrides saturation gains once the detection sets are non-empty.
///
/// A non-empty `gamma` zeroes the pairs of its members and sets every other
/// pair to one. Otherwise a non-empty `theta` does the same for its
/// members. With both empty the saturation gains pass through.
pub fn adjust_gains(
    k: GainDiagonal,
    gamma: &BTreeSet<VehicleId>,
    theta: &BTreeSet<VehicleId>,
    labels: &[VehicleId; 3],
) -> AdjustedGains {
    let (excluded, case) = if !gamma.is_empty() {
        (gamma, GainCase::Isolated)
    } else if !theta.is_empty() {
        (theta, GainCase::Doubted)
    } else {
        return AdjustedGains {
            gains: k,
            case: GainCase::Saturated,
            model_violation: false,
        };
    };
    let mut out = [1.0; 6];
    for (m, label) in labels.iter().enumerate() {
        if excluded.contains(label) {
            out[2 * m] = 0.0;
            out[2 * m + 1] = 0.0;
        }
    }
    AdjustedGains {
        gains: GainDiagonal(out),
        case,
        model_violation: gamma.len() > 1,
    }
}

/// `x̂ = x̄ + ½ Cᵀ K η`.
pub fn measurement_update(x_bar: Vec2, k: &GainDiagonal, eta: &Vec6) -> Vec2 {
    let mut corr = Vec2::zeros();
    for m in 0..3 {
        corr[0] += k.0[2 * m] * eta[2 * m];
        corr[1] += k.0[2 * m + 1] * eta[2 * m + 1];
    }
    x_bar + 0.5 * corr
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    fn params(t: f64) -> PlatoonParams {
        PlatoonParams::new(5, t).unwrap()
    }

    fn ids(v: &[usize]) -> BTreeSet<VehicleId> {
        v.iter().copied().map(VehicleId).collect()
    }

    fn stacked(blocks: [Vec2; 3]) -> StackedMeasurement {
        let mut z = Vec6::zeros();
        for m in 0..3 {
            z[2 * m] = blocks[m][0];
            z[2 * m + 1] = blocks[m][1];
        }
        StackedMeasurement {
            owner: VehicleId(3),
            z,
            labels: [VehicleId(2), VehicleId(3), VehicleId(4)],
        }
    }

    #[test]
    fn time_update_examples() {
        assert_eq!(time_update(Vec2::new(10.0, 2.0), 0.0, &params(1.0)), Vec2::new(12.0, 2.0));
        assert_eq!(time_update(Vec2::zeros(), 1.0, &params(0.5)), Vec2::new(0.0, 0.5));
        assert_relative_eq!(
            time_update(Vec2::new(60.2, 7.9), -0.3, &params(1.0)),
            Vec2::new(68.1, 7.6),
            epsilon = 1e-12
        );
    }

    #[test]
    fn innovation_blocks() {
        let xb = Vec2::new(5.0, 1.0);
        assert_eq!(innovation(&stacked([xb; 3]), xb), Vec6::zeros());
        let eta = innovation(&stacked([xb, xb + Vec2::new(80.0, 12.0), xb]), xb);
        assert_eq!(eta, Vec6::new(0.0, 0.0, 80.0, 12.0, 0.0, 0.0));
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturation_gains(&Vec6::repeat(0.5), 1.0), GainDiagonal::ONES);
        let k = saturation_gains(&Vec6::new(4.0, 0.0, 0.0, 0.0, 0.0, 0.0), 1.0);
        assert_eq!(k.0[0], 0.25);
        assert_eq!(k.0[0] * 4.0, 1.0);
        let k = saturation_gains(&Vec6::new(2.0, -0.5, 8.0, 1.0, -4.0, 0.1), 1.0);
        assert_eq!(k.0, [0.5, 1.0, 0.125, 1.0, 0.25, 1.0]);
    }

    #[test]
    fn saturation_with_zero_threshold() {
        let k = saturation_gains(&Vec6::new(0.0, 3.0, 0.0, -1.0, 0.0, 0.0), 0.0);
        assert_eq!(k.0, [1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn adjust_examples() {
        let labels = [VehicleId(2), VehicleId(3), VehicleId(4)];
        let sat = GainDiagonal([0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);

        let a = adjust_gains(sat, &ids(&[3]), &BTreeSet::new(), &labels);
        assert_eq!(a.gains.0, [1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(a.case, GainCase::Isolated);
        assert!(!a.model_violation);

        let a = adjust_gains(sat, &BTreeSet::new(), &ids(&[2, 3]), &labels);
        assert_eq!(a.gains.0, [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(a.case, GainCase::Doubted);

        let a = adjust_gains(sat, &BTreeSet::new(), &BTreeSet::new(), &labels);
        assert_eq!(a.gains, sat);
        assert_eq!(a.case, GainCase::Saturated);

        // gamma wins over theta
        let a = adjust_gains(sat, &ids(&[4]), &ids(&[2, 3, 4]), &labels);
        assert_eq!(a.gains.0, [1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);

        // attacker outside the neighborhood: everything trusted
        let a = adjust_gains(sat, &ids(&[7]), &BTreeSet::new(), &labels);
        assert_eq!(a.gains, GainDiagonal::ONES);

        let a = adjust_gains(sat, &ids(&[2, 4]), &BTreeSet::new(), &labels);
        assert!(a.model_violation);
        assert_eq!(a.gains.0, [0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn measurement_update_examples() {
        let xb = Vec2::new(10.0, 2.0);
        assert_eq!(measurement_update(xb, &GainDiagonal::ONES, &Vec6::zeros()), xb);
        let k = GainDiagonal([1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let eta = Vec6::new(1.0, 0.0, 5.0, 5.0, -1.0, 0.0);
        assert_eq!(measurement_update(xb, &k, &eta), xb);
        assert_eq!(measurement_update(xb, &GainDiagonal([0.0; 6]), &Vec6::repeat(9.0)), xb);
    }

    #[test]
    fn noise_free_error_recursion_is_minus_half_a() {
        // z = C x with x = A x_prev; all gains one
        let p = params(1.0);
        let a = p.transition();
        let x_prev = Vec2::new(40.0, 6.0);
        let x_hat_prev = Vec2::new(35.0, 7.5);
        let x = a * x_prev;
        let x_bar = time_update(x_hat_prev, 0.0, &p);
        let z = stacked([x; 3]);
        let eta = innovation(&z, x_bar);
        let x_hat = measurement_update(x_bar, &saturation_gains(&eta, f64::INFINITY), &eta);
        let expected = -0.5 * a * (x_hat_prev - x_prev);
        assert_relative_eq!(x_hat - x, expected, epsilon = 1e-12);
    }

    /// Largest singular value of a 2x2 matrix by power iteration on MᵀM.
    fn power_norm(m: Matrix2<f64>) -> f64 {
        let g = m.transpose() * m;
        let mut v = Vec2::new(1.0, 0.3);
        for _ in 0..500 {
            v = (g * v).normalize();
        }
        (g * v).norm().sqrt()
    }

    #[test]
    fn half_a_norm_below_one() {
        let n = power_norm(0.5 * params(1.0).transition());
        assert_relative_eq!(n, (1.0 + 5f64.sqrt()) / 4.0, epsilon = 1e-12);
        assert!(n < 1.0);
    }

    proptest! {
        #[test]
        fn saturated_components_hit_threshold(eta in proptest::array::uniform6(-100.0..100.0f64), beta in 0.0..10.0f64) {
            let eta = Vec6::from_row_slice(&eta);
            let k = saturation_gains(&eta, beta);
            for (ki, e) in k.0.iter().zip(eta.iter()) {
                prop_assert!((0.0..=1.0).contains(ki));
                if *ki < 1.0 {
                    prop_assert!((ki * e.abs() - beta).abs() <= 1e-12 * beta.max(1.0));
                } else {
                    prop_assert!(e.abs() <= beta);
                }
            }
        }
    }
}
