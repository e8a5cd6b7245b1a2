//! Closed-form rate-distortion-leakage tradeoff for the two-area exchange.
//!
//! Area 1's rate `R₁` and the leakage `L₁` of its state are governed only by
//! the distortion `D₂` that area 2 asks for, and symmetrically for `R₂`,
//! `L₂` and `D₁`. Everything is expressed through a [`Direction`] so the two
//! mirror images share one implementation.
//!
//! For a transmitting area `t` and receiving area `r` with `D_r` strictly
//! inside `(D_min,r, D_max,r)`:
//!
//! ```text
//! R_t = ½ log₂( det·c_r² / (V_r (D_r − D_min,r)) )
//! L_t = ½ log₂( c_r² / (c_r² D_min,t + c_t² (D_r − D_min,r)) )
//! ```
//!
//! where `c_r` is the weight of `Y_t` in the receiver's enhanced-system
//! estimate of `X_r` and `c_t` its weight in the estimate of `X_t`. At and
//! beyond `D_max,r` nothing is sent and `L_t = ½ log₂(V_r / (V_r − g²))`, `g`
//! being the gain of `X_t` in `Y_r`. That is `I(X_t; Y_r)`, the
//! continuous extension of the interior formula.

use serde::{Deserialize, Serialize};

use crate::error::{RdlError, Result};
use crate::model::{derive, DerivedQuantities, SystemParams};

/// Which area transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Area 1 describes `Y₁` to area 2; governed by `D₂`.
    OneToTwo,
    /// Area 2 describes `Y₂` to area 1; governed by `D₁`.
    TwoToOne,
}

/// Which branch of the tradeoff applies to one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Requested distortion is below `D_min`.
    Infeasible,
    /// Requested distortion equals `D_min`; only an infinite rate reaches it.
    InfiniteRate,
    Interior,
    /// Requested distortion is at or above `D_max`; nothing needs to be sent.
    ZeroRate,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Infeasible => "infeasible",
            Regime::InfiniteRate => "infinite_rate",
            Regime::Interior => "interior",
            Regime::ZeroRate => "zero_rate",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The per-direction slice of [`DerivedQuantities`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionTerms {
    pub det: f64,
    /// Variance of the receiver's own measurement.
    pub v_receiver: f64,
    /// Weight of the transmitted measurement in the receiver's MMSE estimate.
    pub receiver_weight: f64,
    /// Weight of the transmitted measurement in the estimate of the sender's state.
    pub sender_weight: f64,
    /// Gain of the sender's state in the receiver's measurement.
    pub cross_gain: f64,
    pub d_min_receiver: f64,
    pub d_max_receiver: f64,
    pub d_min_sender: f64,
    pub leak_floor: f64,
    pub leak_ceiling: f64,
}

impl DirectionTerms {
    pub fn new(q: &DerivedQuantities, params: &SystemParams, direction: Direction) -> Self {
        match direction {
            Direction::OneToTwo => Self {
                det: q.det,
                v_receiver: q.v2,
                receiver_weight: q.l1,
                sender_weight: q.k1,
                cross_gain: params.beta,
                d_min_receiver: q.d_min_2,
                d_max_receiver: q.d_max_2,
                d_min_sender: q.d_min_1,
                leak_floor: q.l1_min,
                leak_ceiling: q.l1_max,
            },
            Direction::TwoToOne => Self {
                det: q.det,
                v_receiver: q.v1,
                receiver_weight: q.k2,
                sender_weight: q.l2,
                cross_gain: params.alpha,
                d_min_receiver: q.d_min_1,
                d_max_receiver: q.d_max_1,
                d_min_sender: q.d_min_2,
                leak_floor: q.l2_min,
                leak_ceiling: q.l2_max,
            },
        }
    }

    pub fn classify(&self, d: f64) -> Regime {
        if d >= self.d_max_receiver {
            Regime::ZeroRate
        } else if d > self.d_min_receiver {
            Regime::Interior
        } else if d == self.d_min_receiver {
            Regime::InfiniteRate
        } else {
            Regime::Infeasible
        }
    }

    /// Rate in bits per sample needed for the receiver to reach distortion `d`.
    pub fn rate(&self, d: f64) -> Result<f64> {
        check_distortion(d)?;
        match self.classify(d) {
            Regime::ZeroRate => Ok(0.0),
            Regime::InfiniteRate => Ok(f64::INFINITY),
            Regime::Interior => Ok(self.interior_rate(d)),
            Regime::Infeasible => Err(self.infeasible(d)),
        }
    }

    /// Leakage in bits per sample of the sender's state when the receiver
    /// reaches distortion `d`.
    pub fn leakage(&self, d: f64) -> Result<f64> {
        check_distortion(d)?;
        match self.classify(d) {
            Regime::ZeroRate => Ok(self.zero_rate_leakage()),
            Regime::Interior | Regime::InfiniteRate => Ok(self.interior_leakage(d)),
            Regime::Infeasible => Err(self.infeasible(d)),
        }
    }

    /// Test-channel noise variance `s` for which the receiver's MMSE from its
    /// own measurement and `U = Y + Q` is exactly `d`.
    ///
    /// `0` at `D_min` and `+∞` from `D_max` upward.
    pub fn calibrate_noise(&self, d: f64) -> Result<f64> {
        check_distortion(d)?;
        match self.classify(d) {
            Regime::ZeroRate => Ok(f64::INFINITY),
            Regime::InfiniteRate => Ok(0.0),
            Regime::Interior => {
                // Var(Y_t | Y_r) · (d − D_min) / (D_max − d)
                let residual = self.det / self.v_receiver;
                Ok(residual * (d - self.d_min_receiver) / (self.d_max_receiver - d))
            }
            Regime::Infeasible => Err(self.infeasible(d)),
        }
    }

    /// Interior rate expression, evaluated without branch selection.
    pub fn interior_rate(&self, d: f64) -> f64 {
        let w = self.receiver_weight;
        0.5 * (self.det * w * w / (self.v_receiver * (d - self.d_min_receiver))).log2()
    }

    /// Interior leakage expression, evaluated without branch selection.
    pub fn interior_leakage(&self, d: f64) -> f64 {
        let (w, c) = (self.receiver_weight, self.sender_weight);
        let w2 = w * w;
        0.5 * (w2 / (w2 * self.d_min_sender + c * c * (d - self.d_min_receiver))).log2()
    }

    /// `½ log₂(V_r / (V_r − g²))`, the leakage when nothing is sent.
    pub fn zero_rate_leakage(&self) -> f64 {
        let g2 = self.cross_gain * self.cross_gain;
        0.5 * (self.v_receiver / (self.v_receiver - g2)).log2()
    }

    fn infeasible(&self, d: f64) -> RdlError {
        RdlError::InfeasibleDistortion {
            target: "distortion",
            requested: d,
            minimum: self.d_min_receiver,
        }
    }
}

fn check_distortion(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(RdlError::InvalidInput(format!(
            "distortion must be finite and > 0, got {d}"
        )))
    }
}

fn label(err: RdlError, target: &'static str) -> RdlError {
    match err {
        RdlError::InfeasibleDistortion {
            requested, minimum, ..
        } => RdlError::InfeasibleDistortion {
            target,
            requested,
            minimum,
        },
        other => other,
    }
}

pub fn rate_1(q: &DerivedQuantities, params: &SystemParams, d2: f64) -> Result<f64> {
    DirectionTerms::new(q, params, Direction::OneToTwo)
        .rate(d2)
        .map_err(|e| label(e, "d2"))
}

pub fn leakage_1(q: &DerivedQuantities, params: &SystemParams, d2: f64) -> Result<f64> {
    DirectionTerms::new(q, params, Direction::OneToTwo)
        .leakage(d2)
        .map_err(|e| label(e, "d2"))
}

pub fn rate_2(q: &DerivedQuantities, params: &SystemParams, d1: f64) -> Result<f64> {
    DirectionTerms::new(q, params, Direction::TwoToOne)
        .rate(d1)
        .map_err(|e| label(e, "d1"))
}

pub fn leakage_2(q: &DerivedQuantities, params: &SystemParams, d1: f64) -> Result<f64> {
    DirectionTerms::new(q, params, Direction::TwoToOne)
        .leakage(d1)
        .map_err(|e| label(e, "d1"))
}

/// Noise variance `s1` of area 1's test channel for target `d2`.
pub fn calibrate_noise_1(q: &DerivedQuantities, params: &SystemParams, d2: f64) -> Result<f64> {
    DirectionTerms::new(q, params, Direction::OneToTwo)
        .calibrate_noise(d2)
        .map_err(|e| label(e, "d2"))
}

/// Noise variance `s2` of area 2's test channel for target `d1`.
pub fn calibrate_noise_2(q: &DerivedQuantities, params: &SystemParams, d1: f64) -> Result<f64> {
    DirectionTerms::new(q, params, Direction::TwoToOne)
        .calibrate_noise(d1)
        .map_err(|e| label(e, "d1"))
}

/// Target MSE per area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionRequest {
    pub d1: f64,
    pub d2: f64,
}

impl DistortionRequest {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        check_distortion(d1)?;
        check_distortion(d2)?;
        Ok(Self { d1, d2 })
    }
}

/// Outcome for one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionPoint {
    pub regime: Regime,
    /// `None` when infeasible; `+∞` at `D_min`.
    pub rate: Option<f64>,
    /// `None` when infeasible.
    pub leakage: Option<f64>,
    /// Calibrated noise variance; present only in the interior.
    pub noise: Option<f64>,
}

impl DirectionPoint {
    pub fn evaluate(terms: &DirectionTerms, d: f64) -> Result<Self> {
        check_distortion(d)?;
        let regime = terms.classify(d);
        if regime == Regime::Infeasible {
            return Ok(Self {
                regime,
                rate: None,
                leakage: None,
                noise: None,
            });
        }
        Ok(Self {
            regime,
            rate: Some(terms.rate(d)?),
            leakage: Some(terms.leakage(d)?),
            noise: match regime {
                Regime::Interior => Some(terms.calibrate_noise(d)?),
                _ => None,
            },
        })
    }
}

/// Full `(R₁, R₂, L₁, L₂)` tuple for a requested `(D₁, D₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub d1: f64,
    pub d2: f64,
    #[serde(with = "serde_bits")]
    pub r1: Option<f64>,
    #[serde(with = "serde_bits")]
    pub r2: Option<f64>,
    pub leak1: Option<f64>,
    pub leak2: Option<f64>,
    pub regime1: Regime,
    pub regime2: Regime,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
}

impl TradeoffPoint {
    pub fn any_infeasible(&self) -> bool {
        self.regime1 == Regime::Infeasible || self.regime2 == Regime::Infeasible
    }

    pub fn direction(&self, direction: Direction) -> DirectionPoint {
        match direction {
            Direction::OneToTwo => DirectionPoint {
                regime: self.regime1,
                rate: self.r1,
                leakage: self.leak1,
                noise: self.s1,
            },
            Direction::TwoToOne => DirectionPoint {
                regime: self.regime2,
                rate: self.r2,
                leakage: self.leak2,
                noise: self.s2,
            },
        }
    }
}

/// Evaluates both directions. Direction 1 (`r1`, `leak1`, `s1`) reads only
/// `req.d2`; direction 2 reads only `req.d1`. An infeasible direction is
/// reported through its regime rather than failing the call.
pub fn tradeoff(params: &SystemParams, req: &DistortionRequest) -> Result<TradeoffPoint> {
    let q = derive(params)?;
    tradeoff_with(&q, params, req)
}

pub fn tradeoff_with(q: &DerivedQuantities, params: &SystemParams, req: &DistortionRequest) -> Result<TradeoffPoint> {
    let one = DirectionPoint::evaluate(&DirectionTerms::new(q, params, Direction::OneToTwo), req.d2)?;
    let two = DirectionPoint::evaluate(&DirectionTerms::new(q, params, Direction::TwoToOne), req.d1)?;
    Ok(TradeoffPoint {
        d1: req.d1,
        d2: req.d2,
        r1: one.rate,
        r2: two.rate,
        leak1: one.leakage,
        leak2: two.leakage,
        regime1: one.regime,
        regime2: two.regime,
        s1: one.noise,
        s2: two.noise,
    })
}

/// Rates serialize as numbers, with `"inf"` standing in for `+∞`.
pub mod serde_bits {
    use serde::de::{self, Deserializer};
    use serde::{Deserialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if *x == f64::INFINITY => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Str(s)) if s == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Str(s)) => Err(de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}
