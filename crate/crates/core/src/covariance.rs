//! Variance-covariance matrices of emissivity samples, greedy super-channel
//! reduction, and factored inverses for the quadratic cost terms.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_json, write_lines};
use crate::profiles::ProfileSet;

/// Relative symmetry tolerance.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue, relative to the trace.
pub const PSD_TOL: f64 = 1e-10;
/// Channels with variance below this are dropped before channel reduction.
pub const ZERO_VARIANCE: f64 = 1e-15;
/// Diagonal jitter, relative to `trace / n`, used when a factorization fails.
pub const JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    channels: Vec<f64>,
    s: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates symmetry, nonnegative diagonal and positive semidefiniteness.
    pub fn new(channels: Vec<f64>, s: DMatrix<f64>) -> Result<Self> {
        let m = Self::from_parts(channels, s)?;
        m.check_psd()?;
        Ok(m)
    }

    /// Checks shape, symmetry and diagonal only.
    fn from_parts(channels: Vec<f64>, s: DMatrix<f64>) -> Result<Self> {
        let n = channels.len();
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::Alignment(format!(
                "{}x{} matrix for {n} channels",
                s.nrows(),
                s.ncols()
            )));
        }
        let scale = s.amax();
        for i in 0..n {
            if !(s[(i, i)] >= 0.0) {
                return Err(Error::invalid(
                    "covariance",
                    format!("diagonal entry {i} is {}", s[(i, i)]),
                ));
            }
            for j in 0..i {
                if (s[(i, j)] - s[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::invalid(
                        "covariance",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(Self { channels, s })
    }

    pub fn check_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -PSD_TOL * self.trace() {
            return Err(Error::invalid(
                "covariance",
                format!("smallest eigenvalue {min:e} below -{PSD_TOL:e} * trace"),
            ));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.s.clone()).eigenvalues.min()
    }

    pub fn channels(&self) -> &[f64] {
        &self.channels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn trace(&self) -> f64 {
        self.s.trace()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    /// Correlation coefficients; zero-variance rows/columns are reported as 0.
    pub fn correlation(&self) -> DMatrix<f64> {
        let n = self.dim();
        let sd: Vec<f64> = (0..n).map(|i| self.s[(i, i)].sqrt()).collect();
        DMatrix::from_fn(n, n, |i, j| {
            if sd[i] == 0.0 || sd[j] == 0.0 {
                0.0
            } else {
                self.s[(i, j)] / (sd[i] * sd[j])
            }
        })
    }

    /// Principal submatrix on the given indices, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::Range(format!(
                "channel index {bad} for a {}-channel matrix",
                self.dim()
            )));
        }
        let s = DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
            self.s[(indices[a], indices[b])]
        });
        let channels = indices.iter().map(|&i| self.channels[i]).collect();
        Ok(Self { channels, s })
    }

    /// Indices of `wanted` channels in this matrix, matching to 1e-9 relative.
    pub fn channel_indices(&self, wanted: &[f64]) -> Result<Vec<usize>> {
        wanted
            .iter()
            .map(|&nu| {
                self.channels
                    .iter()
                    .position(|&c| (c - nu).abs() <= 1e-9 * c.abs().max(1.0))
                    .ok_or_else(|| {
                        Error::Alignment(format!("channel {nu} not in covariance matrix"))
                    })
            })
            .collect()
    }

    /// CSV with a channel header row and a channel first column.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        save_matrix_csv(&self.channels, &self.s, path)
    }
}

/// A square matrix as CSV with a channel header row and first column.
pub fn save_matrix_csv(channels: &[f64], m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let header = std::iter::once("wavenumber".to_owned())
        .chain(channels.iter().map(|&c| fmt_f64(c)))
        .collect::<Vec<_>>()
        .join(",");
    let rows = (0..channels.len()).map(|i| {
        std::iter::once(fmt_f64(channels[i]))
            .chain((0..channels.len()).map(|j| fmt_f64(m[(i, j)])))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path.as_ref(), std::iter::once(header).chain(rows))
}

/// Population (1/N) covariance of equal-length sample vectors.
pub fn sample_vcm(channels: &[f64], samples: &[Vec<f64>]) -> Result<CovarianceMatrix> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} samples, need at least 2"
        )));
    }
    let dim = channels.len();
    if let Some((k, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != dim) {
        return Err(Error::Alignment(format!(
            "sample {k} has {} values for {dim} channels",
            s.len()
        )));
    }
    let x = DMatrix::from_fn(n, dim, |k, i| samples[k][i]);
    let mean = x.row_mean();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let mut s = centered.transpose() * &centered / n as f64;
    // exact symmetry
    for i in 0..dim {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    CovarianceMatrix::from_parts(channels.to_vec(), s)
}

/// Covariance across the profiles of a set, one channel per grid node.
pub fn profile_vcm(set: &ProfileSet) -> Result<CovarianceMatrix> {
    let samples: Vec<Vec<f64>> = set.profiles().iter().map(|p| p.values().to_vec()).collect();
    if samples.len() < 2 {
        let n = set.grid().len();
        return CovarianceMatrix::from_parts(set.grid().values().to_vec(), DMatrix::zeros(n, n));
    }
    sample_vcm(set.grid().values(), &samples)
}

/// Super channels picked by greedy decorrelation, in pick order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSelection {
    pub indices: Vec<usize>,
    pub wavenumbers: Vec<f64>,
    pub threshold: f64,
    /// Zero-variance channels removed before the greedy loop.
    #[serde(default)]
    pub dropped_zero_variance: Vec<usize>,
}

impl ChannelSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        crate::io::read_json(path.as_ref())
    }
}

/// Greedy super-channel reduction.
///
/// Repeatedly picks the remaining channel with the largest variance and
/// discards every remaining channel `l` with
/// `|S_jl| >= c * sqrt(S_jj * S_ll)`, the pick included.
pub fn reduce_channels(s: &CovarianceMatrix, c: f64) -> Result<ChannelSelection> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Range(format!(
            "correlation threshold {c} outside (0, 1)"
        )));
    }
    let m = s.matrix();
    let (mut remaining, dropped): (Vec<usize>, Vec<usize>) =
        (0..s.dim()).partition(|&l| m[(l, l)] >= ZERO_VARIANCE);
    if !dropped.is_empty() {
        log::warn!(
            "dropping {} zero-variance channels before reduction",
            dropped.len()
        );
    }
    let mut picks = Vec::new();
    while !remaining.is_empty() {
        // max variance, lowest index on ties (remaining is ascending)
        let j = remaining
            .iter()
            .copied()
            .reduce(|best, l| if m[(l, l)] > m[(best, best)] { l } else { best })
            .expect("non-empty");
        picks.push(j);
        let sjj = m[(j, j)];
        remaining.retain(|&l| l != j && m[(j, l)].abs() < c * (sjj * m[(l, l)]).sqrt());
    }
    Ok(ChannelSelection {
        wavenumbers: picks.iter().map(|&i| s.channels()[i]).collect(),
        indices: picks,
        threshold: c,
        dropped_zero_variance: dropped,
    })
}

/// The `L x L` principal submatrix on the selected channels.
pub fn restrict(s: &CovarianceMatrix, sel: &ChannelSelection) -> Result<CovarianceMatrix> {
    s.submatrix(&sel.indices)
}

/// An inverse covariance `W` stored as a whitening operator `Z` with
/// `W = Zᵀ Z`, so that `rᵀ W r = |Z r|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precision {
    whitener: DMatrix<f64>,
    jitter: f64,
}

impl Precision {
    /// Factors `S = L Lᵀ` and whitens with `L⁻¹`. Retries once with diagonal
    /// jitter `JITTER * trace / n` when the factorization fails.
    pub fn from_covariance(s: &CovarianceMatrix) -> Result<Self> {
        let n = s.dim();
        if n == 0 {
            return Ok(Self {
                whitener: DMatrix::zeros(0, 0),
                jitter: 0.0,
            });
        }
        let mut jitter = 0.0;
        let chol = match Cholesky::new(s.matrix().clone()) {
            Some(c)
                if c.l_dirty()
                    .diagonal()
                    .iter()
                    .all(|d| *d > 0.0 && d.is_finite()) =>
            {
                c
            }
            _ => {
                jitter = JITTER * s.trace() / n as f64;
                if !(jitter > 0.0) {
                    return Err(Error::Numerical(
                        "cannot invert a zero covariance matrix".into(),
                    ));
                }
                log::debug!("covariance factorization failed, adding jitter {jitter:e}");
                let shifted = s.matrix() + DMatrix::identity(n, n) * jitter;
                Cholesky::new(shifted).ok_or_else(|| {
                    Error::Numerical("covariance not factorizable after jitter".into())
                })?
            }
        };
        let l = chol.l();
        let whitener = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        Ok(Self { whitener, jitter })
    }

    /// From an explicit symmetric positive-definite inverse `W`.
    pub fn from_inverse(w: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(w.clone())
            .ok_or_else(|| Error::Numerical("precision matrix is not positive definite".into()))?;
        Ok(Self {
            whitener: chol.l().transpose(),
            jitter: 0.0,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            whitener: DMatrix::identity(n, n),
            jitter: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.whitener.ncols()
    }

    /// Jitter added to the diagonal of the covariance, 0 if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    pub fn whiten(&self, r: &DVector<f64>) -> DVector<f64> {
        &self.whitener * r
    }

    /// `rᵀ W r`.
    pub fn quad_form(&self, r: &[f64]) -> f64 {
        let r = DVector::from_column_slice(r);
        self.whiten(&r).norm_squared()
    }

    /// The explicit inverse `Zᵀ Z`.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.whitener.transpose() * &self.whitener
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{EmissivityProfile, WavenumberGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook two-pass covariance with explicit loops.
    fn two_pass(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = samples.len() as f64;
        let d = samples[0].len();
        let mean: Vec<f64> = (0..d)
            .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / n)
            .collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        samples
                            .iter()
                            .map(|s| (s[i] - mean[i]) * (s[j] - mean[j]))
                            .sum::<f64>()
                            / n
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identical_samples_give_zero_matrix() {
        let s = sample_vcm(&[1.0, 2.0, 3.0], &vec![vec![0.9, 0.8, 0.7]; 5]).unwrap();
        assert!(s.matrix().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_point_samples() {
        let s = sample_vcm(&[1.0, 2.0], &[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert!(s.matrix().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            sample_vcm(&[1.0], &[vec![0.5]]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            sample_vcm(&[1.0, 2.0], &[vec![0.5, 0.1], vec![0.5]]),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn random_samples_match_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let channels: Vec<f64> = (0..9).map(|i| 600.0 + 50.0 * i as f64).collect();
        let samples: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..9).map(|_| rng.random_range(0.8..1.0)).collect())
            .collect();
        let s = sample_vcm(&channels, &samples).unwrap();
        let o = two_pass(&samples);
        for (i, row) in o.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((s.get(i, j) - v).abs() <= 1e-13);
            }
        }
        s.check_psd().unwrap();
    }

    fn two_constant_set(a: f64, b: f64) -> ProfileSet {
        let grid = WavenumberGrid::uniform(100.0, 5.0, 8).unwrap();
        ProfileSet::new(vec![
            EmissivityProfile::constant(grid.clone(), a, "A").unwrap(),
            EmissivityProfile::constant(grid, b, "B").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn profile_vcm_examples() {
        let s = profile_vcm(&two_constant_set(0.8, 1.0)).unwrap();
        assert!(s.matrix().iter().all(|v| (v - 0.01).abs() < 1e-15));
        let z = profile_vcm(&two_constant_set(0.9, 0.9)).unwrap();
        assert!(z.matrix().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn diagonal_matrix_keeps_every_channel() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0, 5.0]));
        let s = CovarianceMatrix::new(vec![1.0, 2.0, 3.0, 4.0], d).unwrap();
        let sel = reduce_channels(&s, 0.9).unwrap();
        assert_eq!(sel.indices, vec![3, 0, 2, 1]);
    }

    #[test]
    fn rank_one_matrix_keeps_one_channel() {
        let v = DVector::from_vec(vec![0.3, -0.1, 0.2, 0.05, -0.4]);
        let s = CovarianceMatrix::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], &v * v.transpose()).unwrap();
        let sel = reduce_channels(&s, 0.9).unwrap();
        assert_eq!(sel.indices, vec![4]);
    }

    #[test]
    fn zero_variance_channels_are_dropped() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 2.0]));
        let s = CovarianceMatrix::new(vec![1.0, 2.0, 3.0], d).unwrap();
        let sel = reduce_channels(&s, 0.5).unwrap();
        assert_eq!(sel.indices, vec![2, 0]);
        assert_eq!(sel.dropped_zero_variance, vec![1]);
        assert!(reduce_channels(&s, 1.0).is_err());
        assert!(reduce_channels(&s, 0.0).is_err());
    }

    #[test]
    fn variance_ties_go_to_lowest_index() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 2.0]));
        let s = CovarianceMatrix::new(vec![1.0, 2.0, 3.0], d).unwrap();
        assert_eq!(reduce_channels(&s, 0.9).unwrap().indices, vec![1, 2, 0]);
    }

    #[test]
    fn restrict_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
            .collect();
        let s = sample_vcm(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &samples).unwrap();
        let full = ChannelSelection {
            indices: (0..6).collect(),
            wavenumbers: s.channels().to_vec(),
            threshold: 0.9,
            dropped_zero_variance: vec![],
        };
        assert_eq!(restrict(&s, &full).unwrap(), s);
        let sel = ChannelSelection {
            indices: vec![4, 1, 3],
            wavenumbers: vec![5.0, 2.0, 4.0],
            threshold: 0.9,
            dropped_zero_variance: vec![],
        };
        let r = restrict(&s, &sel).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(r.get(a, b), s.get(sel.indices[a], sel.indices[b]));
            }
        }
        assert_eq!(r.channels(), &[5.0, 2.0, 4.0]);
        r.check_psd().unwrap();
        let single = restrict(
            &s,
            &ChannelSelection {
                indices: vec![2],
                ..sel.clone()
            },
        )
        .unwrap();
        assert_eq!(single.matrix()[(0, 0)], s.get(2, 2));
        assert!(restrict(
            &s,
            &ChannelSelection {
                indices: vec![7],
                ..sel
            }
        )
        .is_err());
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(CovarianceMatrix::new(vec![1.0, 2.0], asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(CovarianceMatrix::new(vec![1.0, 2.0], indefinite).is_err());
        let neg_diag = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(CovarianceMatrix::new(vec![1.0], neg_diag).is_err());
    }

    #[test]
    fn precision_inverts_and_falls_back_to_jitter() {
        let s = CovarianceMatrix::new(
            vec![1.0, 2.0],
            DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]),
        )
        .unwrap();
        let p = Precision::from_covariance(&s).unwrap();
        assert_eq!(p.jitter(), 0.0);
        let prod = s.matrix() * p.matrix();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-14);

        // rank-deficient covariance needs the jitter
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let singular = CovarianceMatrix::new(vec![1.0, 2.0], &v * v.transpose()).unwrap();
        let p = Precision::from_covariance(&singular).unwrap();
        assert!(p.jitter() > 0.0);
        // residuals in the range of S keep finite weight
        assert!(p.quad_form(&[1.0, 1.0]).is_finite());

        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = Precision::from_inverse(&w).unwrap();
        let r = [0.3, -0.7];
        let direct = 2.0 * 0.09 + 2.0 * 0.5 * 0.3 * -0.7 + 0.49;
        assert!((q.quad_form(&r) - direct).abs() < 1e-15);
    }

    #[test]
    fn json_and_csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let sel = ChannelSelection {
            indices: vec![3, 0],
            wavenumbers: vec![65.0, 50.0],
            threshold: 0.9,
            dropped_zero_variance: vec![],
        };
        let p = dir.path().join("sel.json");
        sel.save_json(&p).unwrap();
        assert_eq!(ChannelSelection::load_json(&p).unwrap(), sel);
        let s = sample_vcm(&[1.0, 2.0], &[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let c = dir.path().join("s.csv");
        s.save_csv(&c).unwrap();
        let text = std::fs::read_to_string(c).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("wavenumber,1.0000000000000000e0,2.0000000000000000e0"));
    }

    fn arb_samples() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..30, 1usize..12).prop_flat_map(|(n, d)| {
            proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, d), n)
        })
    }

    proptest! {
        #[test]
        fn sample_vcm_is_psd(samples in arb_samples()) {
            let d = samples[0].len();
            let channels: Vec<f64> = (1..=d).map(|i| i as f64).collect();
            let s = sample_vcm(&channels, &samples).unwrap();
            prop_assert!(s.check_psd().is_ok());
        }

        #[test]
        fn later_picks_are_decorrelated_from_earlier(samples in arb_samples(), c in 0.3f64..0.99) {
            let d = samples[0].len();
            let channels: Vec<f64> = (1..=d).map(|i| i as f64).collect();
            let s = sample_vcm(&channels, &samples).unwrap();
            let sel = reduce_channels(&s, c).unwrap();
            let corr = s.correlation();
            for a in 0..sel.len() {
                for b in a + 1..sel.len() {
                    prop_assert!(corr[(sel.indices[a], sel.indices[b])].abs() < c);
                }
            }
            let r = restrict(&s, &sel).unwrap();
            prop_assert!(r.check_psd().is_ok());
            let mut uniq = sel.indices.clone();
            uniq.sort_unstable();
            uniq.dedup();
            prop_assert_eq!(uniq.len(), sel.len());
        }

        #[test]
        fn selection_follows_channels_under_permutation(samples in arb_samples(), rot in 0usize..12) {
            let d = samples[0].len();
            let rot = rot % d;
            let channels: Vec<f64> = (1..=d).map(|i| i as f64).collect();
            // distinct variances avoid tie-break dependence on order
            let samples: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().enumerate().map(|(i, v)| v * (1.0 + 0.37 * i as f64)).collect()).collect();
            let s = sample_vcm(&channels, &samples).unwrap();
            let mut perm: Vec<usize> = (0..d).collect();
            perm.rotate_left(rot);
            let ps: Vec<Vec<f64>> = samples.iter().map(|s| perm.iter().map(|&i| s[i]).collect()).collect();
            let pc: Vec<f64> = perm.iter().map(|&i| channels[i]).collect();
            let sp = sample_vcm(&pc, &ps).unwrap();
            let a = reduce_channels(&s, 0.8).unwrap();
            let b = reduce_channels(&sp, 0.8).unwrap();
            prop_assert_eq!(a.wavenumbers, b.wavenumbers);
        }
    }
}
