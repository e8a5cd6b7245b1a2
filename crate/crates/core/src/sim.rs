//! Seeded Monte Carlo of the one-round exchange.
//!
//! Each run draws `n` joint samples of `(X₁, X₂, Y₁, Y₂[, U₁][, U₂])`, decodes
//! each state with the linear MMSE estimator from the receiving area's own
//! measurement and the description it was sent, and compares the empirical
//! MSE and plug-in leakage with the closed-form targets.
//!
//! # Random streams
//!
//! Samples are produced in chunks of [`CHUNK_SIZE`] rows. Chunk `c` of stream
//! `k` uses `ChaCha20Rng::seed_from_u64(seed)` with `set_stream((k << 32) | c)`:
//!
//! * stream 0 ([`SOURCE_STREAM`]): `X₁, X₂, Z₁/σ₁, Z₂/σ₂`, four normals per row
//! * stream 1 ([`Q1_STREAM`]): `Q₁/√s₁`, one normal per row when `U₁` is sent
//! * stream 2 ([`Q2_STREAM`]): `Q₂/√s₂`, one normal per row when `U₂` is sent
//!
//! Chunks are generated in parallel and concatenated in order, so output does
//! not depend on the thread count. Changing `s₂` leaves the source and `Q₁`
//! draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RdlError, Result};
use crate::gauss::{plugin_mi, GaussianSpec, SampleMatrix};
use crate::model::{assemble_joint, derive, loading_matrix, MeasurementJoint, SystemParams, X1, X2, Y1, Y2};
use crate::tradeoff::{tradeoff_with, Direction, DirectionTerms, DistortionRequest, Regime, TradeoffPoint};

pub const CHUNK_SIZE: usize = 8192;
pub const SOURCE_STREAM: u64 = 0;
pub const Q1_STREAM: u64 = 1;
pub const Q2_STREAM: u64 = 2;
pub const MIN_SAMPLES: usize = 100;

/// Which descriptions are exchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    #[default]
    Both,
    OneToTwo,
    TwoToOne,
    None,
}

impl Directions {
    pub fn includes(self, direction: Direction) -> bool {
        matches!(
            (self, direction),
            (Directions::Both, _)
                | (Directions::OneToTwo, Direction::OneToTwo)
                | (Directions::TwoToOne, Direction::TwoToOne)
        )
    }
}

impl std::str::FromStr for Directions {
    type Err = RdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Directions::Both),
            "one_to_two" | "1to2" => Ok(Directions::OneToTwo),
            "two_to_one" | "2to1" => Ok(Directions::TwoToOne),
            "none" => Ok(Directions::None),
            other => Err(RdlError::InvalidInput(format!(
                "unknown directions {other:?} (expected both, one_to_two, two_to_one or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    pub request: DistortionRequest,
    pub n: usize,
    pub seed: u64,
    pub directions: Directions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub empirical_d1: f64,
    pub empirical_d2: f64,
    pub empirical_leak1: f64,
    pub empirical_leak2: f64,
    pub std_err_d1: f64,
    pub std_err_d2: f64,
    /// Closed-form targets. `d1`/`d2` here are the distortions the scheme
    /// is expected to reach, which is `D_max` for a direction that sends nothing.
    pub analytic: TradeoffPoint,
    pub n: usize,
    pub seed: u64,
    pub directions: Directions,
}

/// Test channels and targets resolved from a [`SimConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangePlan {
    pub params: SystemParams,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub joint: MeasurementJoint,
    pub analytic: TradeoffPoint,
}

impl ExchangePlan {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let params = config.params;
        let q = derive(&params)?;
        let resolve = |direction: Direction, d: f64, target: &'static str| -> Result<(Option<f64>, f64)> {
            let terms = DirectionTerms::new(&q, &params, direction);
            if !config.directions.includes(direction) {
                return Ok((None, terms.d_max_receiver));
            }
            match terms.classify(d) {
                Regime::Infeasible => Err(RdlError::InfeasibleDistortion {
                    target,
                    requested: d,
                    minimum: terms.d_min_receiver,
                }),
                Regime::ZeroRate => Ok((None, terms.d_max_receiver)),
                Regime::Interior | Regime::InfiniteRate => Ok((Some(terms.calibrate_noise(d)?), d)),
            }
        };
        let (s1, d2) = resolve(Direction::OneToTwo, config.request.d2, "d2")?;
        let (s2, d1) = resolve(Direction::TwoToOne, config.request.d1, "d1")?;
        let analytic = tradeoff_with(&q, &params, &DistortionRequest::new(d1, d2)?)?;
        Ok(Self {
            params,
            s1,
            s2,
            joint: assemble_joint(&params, s1, s2)?,
            analytic,
        })
    }

    /// MMSE decoder of `X₁` at area 1 from `Y₁` and, if sent, `U₂`.
    pub fn decoder_1(&self) -> Result<LinearDecoder> {
        let inputs: Vec<usize> = std::iter::once(Y1).chain(self.joint.u2).collect();
        LinearDecoder::mmse(&self.joint.spec, X1, &inputs)
    }

    /// MMSE decoder of `X₂` at area 2 from `Y₂` and, if sent, `U₁`.
    pub fn decoder_2(&self) -> Result<LinearDecoder> {
        let inputs: Vec<usize> = std::iter::once(Y2).chain(self.joint.u1).collect();
        LinearDecoder::mmse(&self.joint.spec, X2, &inputs)
    }

    /// Columns area 2 holds after the exchange: `U₁` (if sent) and `Y₂`.
    pub fn view_of_area_2(&self) -> Vec<usize> {
        self.joint.u1.into_iter().chain(std::iter::once(Y2)).collect()
    }

    /// Columns area 1 holds after the exchange: `U₂` (if sent) and `Y₁`.
    pub fn view_of_area_1(&self) -> Vec<usize> {
        self.joint.u2.into_iter().chain(std::iter::once(Y1)).collect()
    }

    pub fn draw(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        draw_exchange(&self.params, self.s1, self.s2, n, seed)
    }
}

/// Linear estimate `x̂ = Σ cᵢ·inputᵢ` of one column from others.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecoder {
    pub target: usize,
    pub inputs: Vec<usize>,
    pub coefficients: Vec<f64>,
}

/// Sample MSE and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mse: f64,
    pub std_err: f64,
}

impl LinearDecoder {
    pub fn mmse(joint: &GaussianSpec, target: usize, inputs: &[usize]) -> Result<Self> {
        let cond = joint.condition(&[target], inputs)?;
        Ok(Self {
            target,
            inputs: inputs.to_vec(),
            coefficients: cond.coefficients.row(0).iter().copied().collect(),
        })
    }

    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            ..self.clone()
        }
    }

    pub fn estimate(&self, row: &[f64]) -> f64 {
        self.inputs
            .iter()
            .zip(&self.coefficients)
            .map(|(&i, c)| c * row[i])
            .sum()
    }

    /// MSE over the rows, with the standard error taken from the sample
    /// variance of the per-row squared errors.
    pub fn error_stats(&self, samples: &SampleMatrix) -> ErrorStats {
        let n = samples.n() as f64;
        let sq: Vec<f64> = samples
            .rows()
            .map(|r| {
                let e = r[self.target] - self.estimate(r);
                e * e
            })
            .collect();
        let mse = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (n - 1.0);
        ErrorStats {
            mse,
            std_err: (var / n).sqrt(),
        }
    }
}

fn chunk_rng(seed: u64, stream: u64, chunk: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | chunk as u64);
    rng
}

/// Draws `n` rows laid out like [`assemble_joint`] with the same `s1`/`s2`.
pub fn draw_exchange(
    params: &SystemParams,
    s1: Option<f64>,
    s2: Option<f64>,
    n: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    let loading = loading_matrix(params, s1, s2)?;
    let dim = loading.nrows();
    let chunks = n.div_ceil(CHUNK_SIZE);
    let data: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK_SIZE.min(n - c * CHUNK_SIZE);
            let mut source = chunk_rng(seed, SOURCE_STREAM, c);
            let mut q1 = chunk_rng(seed, Q1_STREAM, c);
            let mut q2 = chunk_rng(seed, Q2_STREAM, c);
            let mut out = Vec::with_capacity(rows * dim);
            let mut z = [0.0f64; 6];
            for _ in 0..rows {
                for zi in &mut z[..4] {
                    *zi = StandardNormal.sample(&mut source);
                }
                z[4] = if s1.is_some() { StandardNormal.sample(&mut q1) } else { 0.0 };
                z[5] = if s2.is_some() { StandardNormal.sample(&mut q2) } else { 0.0 };
                for i in 0..dim {
                    out.push((0..6).map(|k| loading[(i, k)] * z[k]).sum());
                }
            }
            out
        })
        .collect();
    SampleMatrix::from_rows(n, dim, data.concat())
}

pub fn run(config: &SimConfig) -> Result<SimReport> {
    if config.n < MIN_SAMPLES {
        return Err(RdlError::InvalidInput(format!(
            "n must be at least {MIN_SAMPLES}, got {}",
            config.n
        )));
    }
    let plan = ExchangePlan::new(config)?;
    let samples = plan.draw(config.n, config.seed)?;
    let e1 = plan.decoder_1()?.error_stats(&samples);
    let e2 = plan.decoder_2()?.error_stats(&samples);
    let leak1 = plugin_mi(&samples, &[X1], &plan.view_of_area_2())?;
    let leak2 = plugin_mi(&samples, &[X2], &plan.view_of_area_1())?;
    Ok(SimReport {
        empirical_d1: e1.mse,
        empirical_d2: e2.mse,
        empirical_leak1: leak1,
        empirical_leak2: leak2,
        std_err_d1: e1.std_err,
        std_err_d2: e2.std_err,
        analytic: plan.analytic,
        n: config.n,
        seed: config.seed,
        directions: config.directions,
    })
}

/// Seed used for the `index`-th entry of a convergence grid; index 0 keeps
/// the configured seed.
pub fn grid_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One [`run`] per sample count in `n_grid` (which must be ascending).
pub fn convergence_study(config: &SimConfig, n_grid: &[usize]) -> Result<Vec<SimReport>> {
    if n_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(RdlError::InvalidInput("n_grid must be ascending".into()));
    }
    n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            run(&SimConfig {
                n,
                seed: grid_seed(config.seed, i),
                ..*config
            })
        })
        .collect()
}
