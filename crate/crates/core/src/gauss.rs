//! Small dense multivariate Gaussian toolkit.
//!
//! Everything here is sized for the handful of jointly Gaussian variables in
//! the two-area measurement model (at most 6 or so). Index sets are plain
//! slices of column indices into a [`GaussianSpec`]. Information quantities
//! are reported in bits.
//!
//! Sampling uses ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`) and the
//! ziggurat standard normal from `rand_distr`, so draws are reproducible from
//! a 64-bit seed on any platform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{RdlError, Result};

/// Elementwise symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues down to `-PSD_TOL` are treated as zero.
pub const PSD_TOL: f64 = 1e-10;
/// A conditioning block whose smallest eigenvalue falls below this is singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Mean vector and covariance matrix of a jointly Gaussian vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Law of a target block given an observed block.
///
/// `E[A | B = b] = offset + coefficients * b` and `Cov(A | B) = covariance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub coefficients: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl Conditional {
    /// Conditional law as a standalone spec, centred on the posterior mean at `given`.
    pub fn at(&self, given: &DVector<f64>) -> Result<GaussianSpec> {
        GaussianSpec::new(&self.offset + &self.coefficients * given, self.covariance.clone())
    }
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(RdlError::InvalidInput("empty Gaussian".into()));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(RdlError::InvalidInput(format!(
                "covariance is {}x{} but mean has length {dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(RdlError::InvalidInput("non-finite mean or covariance entry".into()));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(RdlError::InvalidInput(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = min_eigenvalue(&cov);
        if min_eig < -PSD_TOL {
            return Err(RdlError::FactorizationFailure {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn zero_mean(cov: DMatrix<f64>) -> Result<Self> {
        Self::new(DVector::zeros(cov.nrows()), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Marginal law of the variables in `idx`, in the order given.
    pub fn marginal(&self, idx: &[usize]) -> Result<GaussianSpec> {
        self.check_indices(idx, "marginal")?;
        Ok(GaussianSpec {
            mean: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i])),
            cov: self.block(idx, idx),
        })
    }

    /// Conditions the `target` block on the `given` block via the Schur complement.
    pub fn condition(&self, target: &[usize], given: &[usize]) -> Result<Conditional> {
        self.check_indices(target, "target")?;
        self.check_indices(given, "given")?;
        check_disjoint(target, given)?;

        let s_aa = self.block(target, target);
        let s_ab = self.block(target, given);
        let s_bb = self.block(given, given);

        let min_eig = min_eigenvalue(&s_bb);
        if min_eig < SINGULAR_TOL {
            return Err(RdlError::SingularConditioning {
                min_eigenvalue: min_eig,
            });
        }
        let chol = s_bb
            .clone()
            .cholesky()
            .ok_or(RdlError::SingularConditioning {
                min_eigenvalue: min_eig,
            })?;
        // Σ_BB⁻¹ Σ_BA, transposed gives Σ_AB Σ_BB⁻¹.
        let coefficients = chol.solve(&s_ab.transpose()).transpose();
        let mut covariance = s_aa - &coefficients * s_ab.transpose();
        symmetrize(&mut covariance);

        let mean_a = DVector::from_iterator(target.len(), target.iter().map(|&i| self.mean[i]));
        let mean_b = DVector::from_iterator(given.len(), given.iter().map(|&i| self.mean[i]));
        let offset = mean_a - &coefficients * mean_b;

        Ok(Conditional {
            coefficients,
            offset,
            covariance,
        })
    }

    /// `I(A; B)` in bits: ½ log₂(det Σ_AA · det Σ_BB / det Σ_(A∪B)).
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        self.conditional_mutual_information(a, b, &[])
    }

    /// `I(A; B | C)` in bits. An empty `c` gives the unconditional information.
    pub fn conditional_mutual_information(&self, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
        self.check_indices(a, "first")?;
        self.check_indices(b, "second")?;
        check_disjoint(a, b)?;
        if !c.is_empty() {
            self.check_indices(c, "conditioning")?;
            check_disjoint(a, c)?;
            check_disjoint(b, c)?;
        }

        let ac = sorted_union(&[a, c]);
        let bc = sorted_union(&[b, c]);
        let abc = sorted_union(&[a, b, c]);
        let c_sorted = sorted_union(&[c]);

        let ld_abc = self.log_det(&abc)?;
        let numerator = self.log_det(&ac)? + self.log_det(&bc)?;
        let ld_c = if c.is_empty() { 0.0 } else { self.log_det(&c_sorted)? };
        let nats = 0.5 * (numerator - ld_c - ld_abc);
        Ok((nats / std::f64::consts::LN_2).max(0.0))
    }

    /// `n` i.i.d. draws through the eigen square root of the covariance.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        let factor = sqrt_factor(&self.cov)?;
        let dim = self.dim();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n * dim);
        let mut z = DVector::<f64>::zeros(dim);
        for _ in 0..n {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let x = &self.mean + &factor * &z;
            data.extend(x.iter());
        }
        SampleMatrix::from_rows(n, dim, data)
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.cov[(rows[i], cols[j])])
    }

    fn log_det(&self, idx: &[usize]) -> Result<f64> {
        let block = self.block(idx, idx);
        let min_eig = min_eigenvalue(&block);
        if min_eig < SINGULAR_TOL {
            return Err(RdlError::SingularConditioning {
                min_eigenvalue: min_eig,
            });
        }
        let chol = block.cholesky().ok_or(RdlError::SingularConditioning {
            min_eigenvalue: min_eig,
        })?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    fn check_indices(&self, idx: &[usize], what: &str) -> Result<()> {
        if idx.is_empty() {
            return Err(RdlError::InvalidIndex(format!("{what} index set is empty")));
        }
        for (k, &i) in idx.iter().enumerate() {
            if i >= self.dim() {
                return Err(RdlError::InvalidIndex(format!(
                    "{what} index {i} out of range for dimension {}",
                    self.dim()
                )));
            }
            if idx[..k].contains(&i) {
                return Err(RdlError::InvalidIndex(format!("{what} index {i} repeated")));
            }
        }
        Ok(())
    }
}

/// Row-major matrix of joint draws: one row per sample, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_rows(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * dim {
            return Err(RdlError::InvalidInput(format!(
                "sample buffer has {} values, expected {n}x{dim}",
                data.len()
            )));
        }
        Ok(Self { n, dim, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut mean = DVector::zeros(self.dim);
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean / self.n as f64
    }

    /// Unbiased sample covariance (denominator `n - 1`).
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if self.n < 2 {
            return Err(RdlError::InvalidInput(format!(
                "sample covariance needs at least 2 rows, got {}",
                self.n
            )));
        }
        let mean = self.mean();
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        let mut centred = vec![0.0; self.dim];
        for row in self.rows() {
            for (c, (v, m)) in centred.iter_mut().zip(row.iter().zip(mean.iter())) {
                *c = v - m;
            }
            for i in 0..self.dim {
                for j in i..self.dim {
                    cov[(i, j)] += centred[i] * centred[j];
                }
            }
        }
        for i in 0..self.dim {
            for j in 0..i {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        Ok(cov / (self.n - 1) as f64)
    }
}

/// Gaussian plug-in estimate of `I(A; B)` in bits from joint samples.
pub fn plugin_mi(samples: &SampleMatrix, a: &[usize], b: &[usize]) -> Result<f64> {
    if samples.n() < samples.dim() + 2 {
        return Err(RdlError::InvalidInput(format!(
            "plug-in estimate needs n >= dim + 2 ({}), got {}",
            samples.dim() + 2,
            samples.n()
        )));
    }
    let cov = samples.covariance()?;
    // Sample covariance is PSD by construction; only singular blocks can fail below.
    let spec = GaussianSpec {
        mean: samples.mean(),
        cov,
    };
    spec.mutual_information(a, b)
}

/// Symmetric square root `F` with `F Fᵀ = cov`, clipping eigenvalues in
/// `[-PSD_TOL, 0)` to zero.
pub fn sqrt_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(cov.clone());
    let min_eig = eig.eigenvalues.min();
    if min_eig < -PSD_TOL {
        return Err(RdlError::FactorizationFailure {
            min_eigenvalue: min_eig,
        });
    }
    let scales = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let mut factor = eig.eigenvectors;
    for (j, s) in scales.iter().enumerate() {
        factor.column_mut(j).scale_mut(*s);
    }
    Ok(factor)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn check_disjoint(a: &[usize], b: &[usize]) -> Result<()> {
    match a.iter().find(|i| b.contains(i)) {
        Some(i) => Err(RdlError::InvalidIndex(format!("index {i} appears in both sets"))),
        None => Ok(()),
    }
}

fn sorted_union(sets: &[&[usize]]) -> Vec<usize> {
    let mut out: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bivariate(rho: f64) -> GaussianSpec {
        GaussianSpec::zero_mean(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap()
    }

    /// Conditional covariance read off the inverse of the joint precision,
    /// `Cov(A | B) = ((Σ⁻¹)_AA)⁻¹`, using a plain LU inverse.
    fn precision_route(cov: &DMatrix<f64>, target: &[usize], given: &[usize]) -> DMatrix<f64> {
        let idx: Vec<usize> = target.iter().chain(given).copied().collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| cov[(idx[i], idx[j])]);
        let prec = sub.try_inverse().unwrap();
        let k = target.len();
        prec.view((0, 0), (k, k)).into_owned().try_inverse().unwrap()
    }

    #[test]
    fn independent_pair_conditions_to_prior() {
        let g = bivariate(0.0);
        let c = g.condition(&[0], &[1]).unwrap();
        assert_abs_diff_eq!(c.covariance[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.coefficients[(0, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn bivariate_conditioning_identity() {
        let rho = 0.6;
        let c = bivariate(rho).condition(&[0], &[1]).unwrap();
        assert_abs_diff_eq!(c.covariance[(0, 0)], 1.0 - rho * rho, epsilon = 1e-15);
        assert_abs_diff_eq!(c.coefficients[(0, 0)], rho, epsilon = 1e-15);
    }

    #[test]
    fn conditional_mean_uses_offset() {
        let g = GaussianSpec::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 4.0]),
        )
        .unwrap();
        let c = g.condition(&[0], &[1]).unwrap();
        let post = c.at(&DVector::from_vec(vec![2.0])).unwrap();
        // 1 + (1/4)(2 - (-2)) = 2
        assert_abs_diff_eq!(post.mean()[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(post.cov()[(0, 0)], 2.0 - 0.25, epsilon = 1e-14);
    }

    #[test]
    fn singular_given_block_is_rejected() {
        let g = GaussianSpec::zero_mean(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, 0.5, 0.5, 1.0, 1.0, 0.5, 1.0, 1.0],
        ))
        .unwrap();
        assert!(matches!(
            g.condition(&[0], &[1, 2]),
            Err(RdlError::SingularConditioning { .. })
        ));
        assert!(matches!(
            g.mutual_information(&[1], &[2]),
            Err(RdlError::SingularConditioning { .. })
        ));
    }

    #[test]
    fn index_sets_are_validated() {
        let g = bivariate(0.2);
        assert!(matches!(g.condition(&[0], &[0]), Err(RdlError::InvalidIndex(_))));
        assert!(matches!(g.condition(&[0], &[2]), Err(RdlError::InvalidIndex(_))));
        assert!(matches!(g.mutual_information(&[], &[1]), Err(RdlError::InvalidIndex(_))));
        assert!(matches!(g.marginal(&[1, 1]), Err(RdlError::InvalidIndex(_))));
    }

    #[test]
    fn construction_rejects_bad_covariances() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(GaussianSpec::zero_mean(asym), Err(RdlError::InvalidInput(_))));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianSpec::zero_mean(indefinite),
            Err(RdlError::FactorizationFailure { .. })
        ));
    }

    #[test]
    fn mutual_information_closed_forms() {
        assert_abs_diff_eq!(bivariate(0.0).mutual_information(&[0], &[1]).unwrap(), 0.0, epsilon = 1e-15);
        let expected = 0.5 * (1.0f64 / 0.75).log2();
        assert_abs_diff_eq!(bivariate(0.5).mutual_information(&[0], &[1]).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.2075187496, epsilon = 1e-9);
    }

    #[test]
    fn conditional_mi_chain_rule() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.7, 0.3, 0.7, 1.5, 0.4, 0.3, 0.4, 1.0]);
        let g = GaussianSpec::zero_mean(cov).unwrap();
        // I(A; B, C) = I(A; C) + I(A; B | C)
        let lhs = g.mutual_information(&[0], &[1, 2]).unwrap();
        let rhs = g.mutual_information(&[0], &[2]).unwrap()
            + g.conditional_mutual_information(&[0], &[1], &[2]).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-14);
    }

    #[test]
    fn zero_covariance_samples_equal_mean() {
        let g = GaussianSpec::new(DVector::from_vec(vec![1.5, -3.0]), DMatrix::zeros(2, 2)).unwrap();
        let s = g.sample(1000, 9).unwrap();
        assert!(s.rows().all(|r| r == [1.5, -3.0]));
    }

    #[test]
    fn identity_samples_pass_sanity_band() {
        let g = GaussianSpec::zero_mean(DMatrix::identity(3, 3)).unwrap();
        let s = g.sample(100_000, 42).unwrap();
        let cov = s.covariance().unwrap();
        for i in 0..3 {
            assert!((cov[(i, i)] - 1.0).abs() < 0.05);
            for j in 0..i {
                let corr = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
                assert!(corr.abs() < 0.02, "corr({i},{j}) = {corr}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = bivariate(0.3);
        assert_eq!(g.sample(500, 7).unwrap(), g.sample(500, 7).unwrap());
        assert_ne!(g.sample(500, 7).unwrap(), g.sample(500, 8).unwrap());
    }

    #[test]
    fn boundary_covariance_is_sampleable() {
        // Rank one: second coordinate duplicates the first.
        let g = GaussianSpec::zero_mean(DMatrix::from_element(2, 2, 1.0)).unwrap();
        let s = g.sample(100, 3).unwrap();
        assert!(s.rows().all(|r| (r[0] - r[1]).abs() < 1e-12));
    }

    #[test]
    fn plugin_mi_tracks_closed_form() {
        let indep = bivariate(0.0).sample(100_000, 11).unwrap();
        assert!(plugin_mi(&indep, &[0], &[1]).unwrap().abs() < 0.01);
        let corr = bivariate(0.5).sample(100_000, 12).unwrap();
        assert!((plugin_mi(&corr, &[0], &[1]).unwrap() - 0.2075187496).abs() < 0.01);
    }

    #[test]
    fn plugin_mi_needs_enough_rows() {
        let s = bivariate(0.5).sample(3, 1).unwrap();
        assert!(matches!(plugin_mi(&s, &[0], &[1]), Err(RdlError::InvalidInput(_))));
    }

    fn random_pd(dim: usize, entries: &[f64], ridge: f64) -> DMatrix<f64> {
        let a = DMatrix::from_fn(dim, dim, |i, j| entries[i * dim + j]);
        &a * a.transpose() + DMatrix::identity(dim, dim) * ridge
    }

    fn split(dim: usize, mask: u8) -> (Vec<usize>, Vec<usize>) {
        let (mut a, mut b) = (vec![], vec![]);
        for i in 0..dim {
            if mask & (1 << i) != 0 {
                a.push(i)
            } else {
                b.push(i)
            }
        }
        (a, b)
    }

    proptest! {
        #[test]
        fn conditioning_matches_precision_route(
            dim in 2usize..6,
            entries in prop::collection::vec(-2.0f64..2.0, 36),
            ridge in 0.05f64..1.0,
            mask in 1u8..31,
        ) {
            let (a, b) = split(dim, mask);
            prop_assume!(!a.is_empty() && !b.is_empty());
            let cov = random_pd(dim, &entries, ridge);
            let g = GaussianSpec::zero_mean(cov.clone()).unwrap();
            let c = g.condition(&a, &b).unwrap();
            let oracle = precision_route(&cov, &a, &b);
            for (x, y) in c.covariance.iter().zip(oracle.iter()) {
                prop_assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }

        #[test]
        fn mi_is_nonnegative_and_symmetric(
            dim in 2usize..6,
            entries in prop::collection::vec(-2.0f64..2.0, 36),
            ridge in 0.05f64..1.0,
            mask in 1u8..31,
        ) {
            let (a, b) = split(dim, mask);
            prop_assume!(!a.is_empty() && !b.is_empty());
            let g = GaussianSpec::zero_mean(random_pd(dim, &entries, ridge)).unwrap();
            let ab = g.mutual_information(&a, &b).unwrap();
            let ba = g.mutual_information(&b, &a).unwrap();
            prop_assert!(ab >= -1e-12);
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }

    // Heavier statistical properties: a handful of fixed random specs at n = 10⁶.
    #[test]
    fn large_sample_covariance_and_plugin_mi() {
        let specs = [
            DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 2.0]),
            DMatrix::from_row_slice(3, 3, &[2.0, 0.7, 0.3, 0.7, 1.5, 0.4, 0.3, 0.4, 1.0]),
            random_pd(4, &[0.3, -1.1, 0.5, 0.9, 1.4, 0.2, -0.6, 0.1, -0.8, 0.7, 1.2, -0.3, 0.4, 0.6, -0.2, 1.0], 0.2),
        ];
        for (k, cov) in specs.into_iter().enumerate() {
            let dim = cov.nrows();
            let g = GaussianSpec::zero_mean(cov.clone()).unwrap();
            let s = g.sample(1_000_000, 100 + k as u64).unwrap();
            let est = s.covariance().unwrap();
            for (x, y) in est.iter().zip(cov.iter()) {
                if y.abs() > 0.05 {
                    assert!(((x - y) / y).abs() < 0.01, "spec {k}: {x} vs {y}");
                }
            }
            let a: Vec<usize> = (0..dim / 2).collect();
            let b: Vec<usize> = (dim / 2..dim).collect();
            let exact = g.mutual_information(&a, &b).unwrap();
            let plug = plugin_mi(&s, &a, &b).unwrap();
            assert!((exact - plug).abs() < 0.01, "spec {k}: {plug} vs {exact}");
        }
    }
}
