//! Two-area linear Gaussian measurement model.
//!
//! Each area `m` owns a unit-variance state `X_m` and observes
//!
//! ```text
//! Y₁ = X₁ + α·X₂ + Z₁,   Z₁ ~ N(0, σ₁²)
//! Y₂ = β·X₁ + X₂ + Z₂,   Z₂ ~ N(0, σ₂²)
//! ```
//!
//! with all of `X₁, X₂, Z₁, Z₂` independent. The shared description `U_m`
//! sent by area `m` is modelled as the forward test channel `U_m = Y_m + Q_m`
//! with `Q_m ~ N(0, s_m)` independent of everything else.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{RdlError, Result};
use crate::gauss::GaussianSpec;

/// Column of `X₁` in an assembled joint.
pub const X1: usize = 0;
/// Column of `X₂` in an assembled joint.
pub const X2: usize = 1;
/// Column of `Y₁` in an assembled joint.
pub const Y1: usize = 2;
/// Column of `Y₂` in an assembled joint.
pub const Y2: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Gain of `X₂` in area 1's measurement.
    pub alpha: f64,
    /// Gain of `X₁` in area 2's measurement.
    pub beta: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

impl SystemParams {
    /// Strongly asymmetric operating point used for the reference sweeps.
    pub const ILLUSTRATION: SystemParams = SystemParams {
        alpha: 1.0,
        beta: 8.0,
        sigma1_sq: 0.05,
        sigma2_sq: 1.0,
    };

    pub fn new(alpha: f64, beta: f64, sigma1_sq: f64, sigma2_sq: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            sigma1_sq,
            sigma2_sq,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let gain = |field, v: f64| {
            if !v.is_finite() || v < 0.0 {
                Err(RdlError::InvalidParams {
                    field,
                    reason: format!("must be a finite value >= 0, got {v}"),
                })
            } else {
                Ok(())
            }
        };
        let noise = |field, v: f64| {
            if !v.is_finite() || v <= 0.0 {
                Err(RdlError::InvalidParams {
                    field,
                    reason: format!("must be a finite value > 0, got {v}"),
                })
            } else {
                Ok(())
            }
        };
        gain("alpha", self.alpha)?;
        gain("beta", self.beta)?;
        noise("sigma1_sq", self.sigma1_sq)?;
        noise("sigma2_sq", self.sigma2_sq)
    }

    /// Relabels the two areas: `α ↔ β`, `σ₁² ↔ σ₂²`.
    pub fn swapped(&self) -> Self {
        Self {
            alpha: self.beta,
            beta: self.alpha,
            sigma1_sq: self.sigma2_sq,
            sigma2_sq: self.sigma1_sq,
        }
    }
}

/// Closed-form quantities of the measurement model. Leakage bounds are in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub v1: f64,
    pub v2: f64,
    pub e: f64,
    pub det: f64,
    /// `E[X₁ | Y₁, Y₂] = k1·Y₁ + k2·Y₂`
    pub k1: f64,
    pub k2: f64,
    /// `E[X₂ | Y₁, Y₂] = l1·Y₁ + l2·Y₂`
    pub l1: f64,
    pub l2: f64,
    pub d_min_1: f64,
    pub d_min_2: f64,
    pub d_max_1: f64,
    pub d_max_2: f64,
    /// `I(X₁; Y₂)`
    pub l1_min: f64,
    /// `I(X₁; Y₁, Y₂)`
    pub l1_max: f64,
    /// `I(X₂; Y₁)`
    pub l2_min: f64,
    /// `I(X₂; Y₁, Y₂)`
    pub l2_max: f64,
}

impl DerivedQuantities {
    /// The same quantities with the area labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            v1: self.v2,
            v2: self.v1,
            e: self.e,
            det: self.det,
            k1: self.l2,
            k2: self.l1,
            l1: self.k2,
            l2: self.k1,
            d_min_1: self.d_min_2,
            d_min_2: self.d_min_1,
            d_max_1: self.d_max_2,
            d_max_2: self.d_max_1,
            l1_min: self.l2_min,
            l1_max: self.l2_max,
            l2_min: self.l1_min,
            l2_max: self.l1_max,
        }
    }
}

pub fn derive(params: &SystemParams) -> Result<DerivedQuantities> {
    params.validate()?;
    let SystemParams {
        alpha,
        beta,
        sigma1_sq,
        sigma2_sq,
    } = *params;

    let v1 = 1.0 + alpha * alpha + sigma1_sq;
    let v2 = 1.0 + beta * beta + sigma2_sq;
    let e = alpha + beta;
    let det = v1 * v2 - e * e;

    let k1 = (v2 - beta * e) / det;
    let k2 = (beta * v1 - e) / det;
    let l1 = (alpha * v2 - e) / det;
    let l2 = (v1 - alpha * e) / det;

    let d_max_1 = 1.0 - 1.0 / v1;
    let d_max_2 = 1.0 - 1.0 / v2;
    // When the cross coefficient vanishes the interval collapses to a point;
    // the min keeps rounding from inverting it.
    let d_min_1 = (1.0 - (beta * beta * v1 + v2 - 2.0 * beta * e) / det).min(d_max_1);
    let d_min_2 = (1.0 - (v1 + alpha * alpha * v2 - 2.0 * alpha * e) / det).min(d_max_2);

    let joint = assemble_joint(params, None, None)?.spec;
    let l1_min = joint.mutual_information(&[X1], &[Y2])?;
    let l1_max = joint.mutual_information(&[X1], &[Y1, Y2])?;
    let l2_min = joint.mutual_information(&[X2], &[Y1])?;
    let l2_max = joint.mutual_information(&[X2], &[Y1, Y2])?;

    Ok(DerivedQuantities {
        v1,
        v2,
        e,
        det,
        k1,
        k2,
        l1,
        l2,
        d_min_1,
        d_min_2,
        d_max_1,
        d_max_2,
        l1_min,
        l1_max,
        l2_min,
        l2_max,
    })
}

/// Joint law of `(X₁, X₂, Y₁, Y₂[, U₁][, U₂])` plus where the optional
/// descriptions landed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementJoint {
    pub spec: GaussianSpec,
    pub u1: Option<usize>,
    pub u2: Option<usize>,
}

impl MeasurementJoint {
    pub fn u1(&self) -> Result<usize> {
        self.u1
            .ok_or_else(|| RdlError::InvalidInput("joint has no U1 column".into()))
    }

    pub fn u2(&self) -> Result<usize> {
        self.u2
            .ok_or_else(|| RdlError::InvalidInput("joint has no U2 column".into()))
    }
}

/// Assembles the zero-mean joint covariance by direct expansion of the model.
///
/// `s1`/`s2` are the test-channel noise variances; `None` leaves the
/// corresponding `U` out. `U₁` (if present) is column 4 and `U₂` follows it.
pub fn assemble_joint(params: &SystemParams, s1: Option<f64>, s2: Option<f64>) -> Result<MeasurementJoint> {
    params.validate()?;
    for (field, s) in [("s1", s1), ("s2", s2)] {
        if let Some(s) = s {
            if !s.is_finite() || s < 0.0 {
                return Err(RdlError::InvalidParams {
                    field,
                    reason: format!("quantization variance must be finite and >= 0, got {s}"),
                });
            }
        }
    }

    let SystemParams {
        alpha,
        beta,
        sigma1_sq,
        sigma2_sq,
    } = *params;
    let v1 = 1.0 + alpha * alpha + sigma1_sq;
    let v2 = 1.0 + beta * beta + sigma2_sq;
    let e = alpha + beta;

    #[rustfmt::skip]
    let base = [
        // X₁    X₂     Y₁     Y₂
        1.0,    0.0,   1.0,   beta,
        0.0,    1.0,   alpha, 1.0,
        1.0,    alpha, v1,    e,
        beta,   1.0,   e,     v2,
    ];

    // Each U copies its Y's covariances and adds its own noise on the diagonal.
    let extra: Vec<(usize, f64)> = [(Y1, s1), (Y2, s2)]
        .into_iter()
        .filter_map(|(y, s)| s.map(|s| (y, s)))
        .collect();
    let dim = 4 + extra.len();
    let source = |i: usize| if i < 4 { i } else { extra[i - 4].0 };
    let cov = DMatrix::from_fn(dim, dim, |i, j| {
        let c = base[source(i) * 4 + source(j)];
        if i == j && i >= 4 {
            c + extra[i - 4].1
        } else {
            c
        }
    });

    let u1 = s1.map(|_| 4);
    let u2 = s2.map(|_| if s1.is_some() { 5 } else { 4 });
    Ok(MeasurementJoint {
        spec: GaussianSpec::zero_mean(cov)?,
        u1,
        u2,
    })
}

/// Maps the six independent standard normals `(X₁, X₂, Z₁/σ₁, Z₂/σ₂, Q₁/√s₁, Q₂/√s₂)`
/// onto the columns of [`assemble_joint`] with the same `s1`/`s2`.
///
/// `L·Lᵀ` equals the assembled covariance.
pub fn loading_matrix(params: &SystemParams, s1: Option<f64>, s2: Option<f64>) -> Result<DMatrix<f64>> {
    let joint = assemble_joint(params, s1, s2)?;
    let dim = joint.spec.dim();
    let mut l = DMatrix::zeros(dim, 6);
    let (sd1, sd2) = (params.sigma1_sq.sqrt(), params.sigma2_sq.sqrt());
    l[(X1, 0)] = 1.0;
    l[(X2, 1)] = 1.0;
    for (row, (a, b, sd_col, sd)) in [(Y1, (1.0, params.alpha, 2, sd1)), (Y2, (params.beta, 1.0, 3, sd2))] {
        l[(row, 0)] = a;
        l[(row, 1)] = b;
        l[(row, sd_col)] = sd;
    }
    for (u, y, s, q_col) in [(joint.u1, Y1, s1, 4), (joint.u2, Y2, s2, 5)] {
        if let (Some(u), Some(s)) = (u, s) {
            let y_row = l.row(y).into_owned();
            l.row_mut(u).copy_from(&y_row);
            l[(u, q_col)] = s.sqrt();
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn illustration() -> DerivedQuantities {
        derive(&SystemParams::ILLUSTRATION).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        for (p, field) in [
            (SystemParams { alpha: -1.0, ..SystemParams::ILLUSTRATION }, "alpha"),
            (SystemParams { beta: f64::NAN, ..SystemParams::ILLUSTRATION }, "beta"),
            (SystemParams { sigma1_sq: 0.0, ..SystemParams::ILLUSTRATION }, "sigma1_sq"),
            (SystemParams { sigma2_sq: -0.5, ..SystemParams::ILLUSTRATION }, "sigma2_sq"),
        ] {
            match derive(&p) {
                Err(RdlError::InvalidParams { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected InvalidParams for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn decoupled_areas() {
        let q = derive(&SystemParams::new(0.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!((q.v1, q.v2, q.e), (2.0, 2.0, 0.0));
        assert_abs_diff_eq!(q.d_min_1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q.d_max_1, 0.5, epsilon = 1e-15);
        assert_eq!(q.k2, 0.0);
        assert_eq!(q.l1, 0.0);
        assert_abs_diff_eq!(q.l1_min, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.l2_min, 0.0, epsilon = 1e-15);
    }

    // Reference values computed independently at 30-digit precision (mpmath).
    #[test]
    #[allow(clippy::excessive_precision)]
    fn illustration_fixtures() {
        let q = illustration();
        assert_eq!((q.v1, q.v2, q.e), (2.05, 66.0, 9.0));
        assert_abs_diff_eq!(q.det, 54.3, epsilon = 1e-12);
        assert_abs_diff_eq!(q.k1, -0.11049723756906077348, epsilon = 1e-14);
        assert_abs_diff_eq!(q.k2, 0.13627992633517495396, epsilon = 1e-14);
        assert_abs_diff_eq!(q.l1, 1.0497237569060773481, epsilon = 1e-14);
        assert_abs_diff_eq!(q.l2, -0.12799263351749539595, epsilon = 1e-14);
        assert_abs_diff_eq!(q.d_min_1, 0.020257826887661141805, epsilon = 1e-13);
        assert_abs_diff_eq!(q.d_min_2, 0.078268876611418047882, epsilon = 1e-13);
        assert_abs_diff_eq!(q.d_max_1, 0.5121951219512195122, epsilon = 1e-14);
        assert_abs_diff_eq!(q.d_max_2, 0.98484848484848484848, epsilon = 1e-14);
        assert_abs_diff_eq!(q.l1_min, 2.5221970596792267188, epsilon = 1e-12);
        assert_abs_diff_eq!(q.l1_max, 2.8126883845835321429, epsilon = 1e-12);
        assert_abs_diff_eq!(q.l2_min, 0.48261729091966170214, epsilon = 1e-12);
        assert_abs_diff_eq!(q.l2_max, 1.8377087258333298929, epsilon = 1e-12);
    }

    #[test]
    fn illustration_bounds_match_conditioning() {
        let q = illustration();
        let joint = assemble_joint(&SystemParams::ILLUSTRATION, None, None).unwrap().spec;
        let var = |t, g: &[usize]| joint.condition(&[t], g).unwrap().covariance[(0, 0)];
        assert_abs_diff_eq!(var(X1, &[Y1, Y2]), q.d_min_1, epsilon = 1e-12);
        assert_abs_diff_eq!(var(X2, &[Y1, Y2]), q.d_min_2, epsilon = 1e-12);
        assert_abs_diff_eq!(var(X1, &[Y1]), q.d_max_1, epsilon = 1e-12);
        assert_abs_diff_eq!(var(X2, &[Y2]), q.d_max_2, epsilon = 1e-12);
        let mi = joint.mutual_information(&[X1], &[Y2]).unwrap();
        assert_abs_diff_eq!(mi, 0.5 * (q.v2 / (q.v2 - 64.0)).log2(), epsilon = 1e-12);
    }

    #[test]
    fn joint_without_descriptions() {
        let p = SystemParams::ILLUSTRATION;
        let j = assemble_joint(&p, None, None).unwrap();
        assert_eq!(j.spec.dim(), 4);
        assert_eq!((j.u1, j.u2), (None, None));
        let c = j.spec.cov();
        assert_eq!((c[(Y1, Y1)], c[(Y2, Y2)], c[(Y1, Y2)]), (2.05, 66.0, 9.0));
    }

    #[test]
    fn noiseless_description_copies_measurement() {
        let j = assemble_joint(&SystemParams::ILLUSTRATION, Some(0.0), None).unwrap();
        let u = j.u1().unwrap();
        let c = j.spec.cov();
        for k in 0..4 {
            assert_eq!(c[(u, k)], c[(Y1, k)]);
        }
        assert_eq!(c[(u, u)], c[(Y1, Y1)]);
        assert!(j.u2().is_err());
    }

    #[test]
    fn description_indices() {
        let p = SystemParams::ILLUSTRATION;
        let j = assemble_joint(&p, None, Some(1.0)).unwrap();
        assert_eq!((j.u1, j.u2), (None, Some(4)));
        let j = assemble_joint(&p, Some(1.0), Some(2.0)).unwrap();
        assert_eq!((j.u1, j.u2), (Some(4), Some(5)));
        assert_eq!(j.spec.cov()[(4, 5)], 9.0);
        assert!(assemble_joint(&p, Some(-1.0), None).is_err());
    }

    #[test]
    fn side_information_substitution() {
        // Var(X₁ | Y₁, U₂) is the enhanced-system expression with V₂ → V₂ + s₂.
        let p = SystemParams::ILLUSTRATION;
        let s2 = 3.7;
        let j = assemble_joint(&p, None, Some(s2)).unwrap();
        let via_condition = j.spec.condition(&[X1], &[Y1, j.u2().unwrap()]).unwrap().covariance[(0, 0)];
        let (v1, v2, e, b) = (2.05, 66.0 + s2, 9.0, 8.0);
        let closed = 1.0 - (b * b * v1 + v2 - 2.0 * b * e) / (v1 * v2 - e * e);
        assert_abs_diff_eq!(via_condition, closed, epsilon = 1e-12);
    }

    #[test]
    fn loading_matrix_reproduces_covariance() {
        let p = SystemParams::ILLUSTRATION;
        for (s1, s2) in [(None, None), (Some(0.8), None), (None, Some(26.0)), (Some(0.0), Some(2.5))] {
            let l = loading_matrix(&p, s1, s2).unwrap();
            let cov = assemble_joint(&p, s1, s2).unwrap().spec.cov().clone();
            let rebuilt = &l * l.transpose();
            for (a, b) in rebuilt.iter().zip(cov.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn leakage_floor_decreases_with_noise() {
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let p = SystemParams::new(1.0, 2.0, 0.3, 0.05 + 0.25 * k as f64).unwrap();
            let q = derive(&p).unwrap();
            assert!(q.l1_min < prev);
            prev = q.l1_min;
        }
    }

    fn params() -> impl Strategy<Value = SystemParams> {
        (0.0f64..10.0, 0.0f64..10.0, 0.01f64..10.0, 0.01f64..10.0)
            .prop_map(|(a, b, s1, s2)| SystemParams::new(a, b, s1, s2).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_forms_match_conditioning(p in params()) {
            let q = derive(&p).unwrap();
            let joint = assemble_joint(&p, None, None).unwrap().spec;
            let var = |t, g: &[usize]| joint.condition(&[t], g).unwrap().covariance[(0, 0)];
            prop_assert!((var(X1, &[Y1, Y2]) - q.d_min_1).abs() < 1e-12);
            prop_assert!((var(X2, &[Y1, Y2]) - q.d_min_2).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn derived_invariants(p in params()) {
            let q = derive(&p).unwrap();
            prop_assert!(q.det > 0.0);
            prop_assert!(q.d_min_1 <= q.d_max_1 && q.d_max_1 < 1.0);
            prop_assert!(q.d_min_2 <= q.d_max_2 && q.d_max_2 < 1.0);
            prop_assert!(0.0 <= q.l1_min && q.l1_min <= q.l1_max + 1e-12);
            prop_assert!(0.0 <= q.l2_min && q.l2_min <= q.l2_max + 1e-12);
            prop_assert!((q.l1_max - 0.5 * (1.0 / q.d_min_1).log2()).abs() < 1e-12);
            prop_assert!((q.l2_max - 0.5 * (1.0 / q.d_min_2).log2()).abs() < 1e-12);
            // Normal equations of the MMSE coefficients.
            prop_assert!((q.k1 * q.v1 + q.k2 * q.e - 1.0).abs() < 1e-12);
            prop_assert!((q.k1 * q.e + q.k2 * q.v2 - p.beta).abs() < 1e-12 * p.beta.max(1.0));
            prop_assert!((q.l1 * q.v1 + q.l2 * q.e - p.alpha).abs() < 1e-12 * p.alpha.max(1.0));
            prop_assert!((q.l1 * q.e + q.l2 * q.v2 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn swap_symmetry(p in params()) {
            let q = derive(&p).unwrap();
            let qs = derive(&p.swapped()).unwrap().swapped();
            let (a, b) = (serde_json::to_value(q).unwrap(), serde_json::to_value(qs).unwrap());
            for (k, va) in a.as_object().unwrap() {
                let (x, y) = (va.as_f64().unwrap(), b[k].as_f64().unwrap());
                prop_assert!((x - y).abs() < 1e-12, "{k}: {x} vs {y}");
            }
        }
    }
}
