//! The Bayesian cost functional over simplex weights and its minimization.
//!
//! `J(p) = (e(n_C) - e_C)ᵀ S_C⁻¹ (e(n_C) - e_C) + (e(n_R) - e_R)ᵀ S_R⁻¹ (e(n_R) - e_R)`
//! with `e = Σ p_i H_i`, minimized over the simplex restricted to the
//! support of the a-priori weights.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ancillary::HingeRecord;
use crate::covariance::{ChannelSelection, CovarianceMatrix, Precision};
use crate::error::{Error, Result};
use crate::profiles::{ProfileSet, SimplexWeights};
use crate::qp::solve_simplex_lsq;

/// Weights at or below this are outside the a-priori support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Observed values at a set of channels and the inverse covariance of their
/// errors.
#[derive(Debug, Clone)]
pub struct Observation {
    pub channels: Vec<f64>,
    pub values: Vec<f64>,
    pub precision: Precision,
}

impl Observation {
    pub fn new(channels: Vec<f64>, values: Vec<f64>, precision: Precision) -> Result<Self> {
        if channels.len() != values.len() || precision.dim() != channels.len() {
            return Err(Error::Alignment(format!(
                "{} channels, {} values, {}-dimensional precision",
                channels.len(),
                values.len(),
                precision.dim()
            )));
        }
        Ok(Self {
            channels,
            values,
            precision,
        })
    }
}

#[derive(Debug, Clone)]
struct Term {
    obs: Observation,
    /// `basis[c][i] = H_i(channels[c])`
    basis: Vec<Vec<f64>>,
}

impl Term {
    fn new(set: &ProfileSet, obs: Observation) -> Result<Self> {
        let basis = set.sample_at(&obs.channels)?;
        Ok(Self { obs, basis })
    }

    fn residual(&self, w: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .zip(&self.obs.values)
            .map(|(row, &target)| row.iter().zip(w).map(|(h, p)| h * p).sum::<f64>() - target)
            .collect()
    }

    /// Whitened residual columns `Z (H_i(n) - target)` for `i` in `support`.
    /// Since the weights sum to one, `Z r(p) = Σ p_i` of these columns.
    fn design(&self, support: &[usize]) -> DMatrix<f64> {
        let g = DMatrix::from_fn(self.basis.len(), support.len(), |c, k| {
            self.basis[c][support[k]] - self.obs.values[c]
        });
        self.obs.precision.whitener() * g
    }
}

/// A fully assembled cost functional.
#[derive(Debug, Clone)]
pub struct BayesProblem {
    n_profiles: usize,
    camel: Option<Term>,
    prior: Term,
    support: Vec<usize>,
}

impl BayesProblem {
    /// `camel = None` gives a prior-only problem.
    pub fn new(
        set: &ProfileSet,
        camel: Option<Observation>,
        prior: Observation,
        support: Vec<usize>,
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("problem", "empty support"));
        }
        if support.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "problem",
                "support indices must be strictly increasing",
            ));
        }
        if let Some(&bad) = support.iter().find(|&&i| i >= set.len()) {
            return Err(Error::Range(format!(
                "support index {bad} for {} profiles",
                set.len()
            )));
        }
        Ok(Self {
            n_profiles: set.len(),
            camel: camel.map(|o| Term::new(set, o)).transpose()?,
            prior: Term::new(set, prior)?,
            support,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn n_profiles(&self) -> usize {
        self.n_profiles
    }

    pub fn has_camel(&self) -> bool {
        self.camel.is_some()
    }
}

/// The cost and its two quadratic forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub total: f64,
    pub camel: f64,
    pub prior: f64,
}

pub fn evaluate_cost(problem: &BayesProblem, w: &SimplexWeights) -> Result<Cost> {
    if w.len() != problem.n_profiles {
        return Err(Error::Alignment(format!(
            "{} weights for {} profiles",
            w.len(),
            problem.n_profiles
        )));
    }
    let camel = problem.camel.as_ref().map_or(0.0, |t| {
        t.obs.precision.quad_form(&t.residual(w.as_slice()))
    });
    let prior = problem
        .prior
        .obs
        .precision
        .quad_form(&problem.prior.residual(w.as_slice()));
    Ok(Cost {
        total: camel + prior,
        camel,
        prior,
    })
}

/// Diagnostics attached to a fit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// No hinge data was available; only the prior term was minimized.
    pub prior_only: bool,
    /// The minimizer is not unique.
    pub flat_directions: bool,
    /// Hinge channels missing from the record.
    pub missing_channels: usize,
}

impl FitFlags {
    /// `|`-separated flag names, empty when nothing is set.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.prior_only {
            parts.push("prior_only".to_owned());
        }
        if self.flat_directions {
            parts.push("flat".to_owned());
        }
        if self.missing_channels > 0 {
            parts.push(format!("missing_{}", self.missing_channels));
        }
        parts.join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesFit {
    pub weights: SimplexWeights,
    pub cost: f64,
    pub cost_camel_term: f64,
    pub cost_prior_term: f64,
    pub kkt_residual: f64,
    pub flags: FitFlags,
}

/// Global minimizer of the cost over the restricted simplex.
pub fn solve(problem: &BayesProblem) -> Result<BayesFit> {
    let support = &problem.support;
    let prior = problem.prior.design(support);
    let a = match &problem.camel {
        Some(t) => {
            let c = t.design(support);
            let mut a = DMatrix::zeros(c.nrows() + prior.nrows(), support.len());
            a.rows_mut(0, c.nrows()).copy_from(&c);
            a.rows_mut(c.nrows(), prior.nrows()).copy_from(&prior);
            a
        }
        None => prior,
    };
    let b = DVector::zeros(a.nrows());
    let sol = solve_simplex_lsq(&a, &b);
    if sol.flat_directions {
        log::debug!("non-unique minimizer on support {support:?}");
    }
    let mut full = vec![0.0; problem.n_profiles];
    for (&i, &v) in support.iter().zip(&sol.x) {
        full[i] = v;
    }
    let weights = SimplexWeights::new(full)?;
    let cost = evaluate_cost(problem, &weights)?;
    Ok(BayesFit {
        weights,
        cost: cost.total,
        cost_camel_term: cost.camel,
        cost_prior_term: cost.prior,
        kkt_residual: sol.kkt_residual,
        flags: FitFlags {
            prior_only: problem.camel.is_none(),
            flat_directions: sol.flat_directions,
            missing_channels: 0,
        },
    })
}

/// Read-only state shared by all grid points of a batch: the profile set,
/// both covariance matrices and their factorizations.
#[derive(Debug)]
pub struct FitContext {
    set: ProfileSet,
    camel_cov: CovarianceMatrix,
    camel_full: Arc<Precision>,
    reduced_channels: Vec<f64>,
    /// `[c][i]` profile values at the reduced channels
    reduced_basis: Vec<Vec<f64>>,
    prior_precision: Precision,
    partial: Mutex<HashMap<Vec<usize>, Arc<Precision>>>,
}

impl FitContext {
    /// `s_r` carries the reduced channels in its channel labels.
    pub fn new(set: ProfileSet, s_c: CovarianceMatrix, s_r: &CovarianceMatrix) -> Result<Self> {
        let camel_full = Arc::new(Precision::from_covariance(&s_c)?);
        if camel_full.jitter() > 0.0 {
            log::warn!(
                "hinge covariance needed diagonal jitter {:e}",
                camel_full.jitter()
            );
        }
        let prior_precision = Precision::from_covariance(s_r)?;
        if prior_precision.jitter() > 0.0 {
            log::info!(
                "reduced profile covariance regularized with jitter {:e}",
                prior_precision.jitter()
            );
        }
        let reduced_channels = s_r.channels().to_vec();
        let reduced_basis = set.sample_at(&reduced_channels)?;
        Ok(Self {
            set,
            camel_cov: s_c,
            camel_full,
            reduced_channels,
            reduced_basis,
            prior_precision,
            partial: Mutex::new(HashMap::new()),
        })
    }

    pub fn set(&self) -> &ProfileSet {
        &self.set
    }

    pub fn camel_channels(&self) -> &[f64] {
        self.camel_cov.channels()
    }

    pub fn reduced_channels(&self) -> &[f64] {
        &self.reduced_channels
    }

    fn camel_precision(&self, idx: &[usize]) -> Result<Arc<Precision>> {
        if idx.len() == self.camel_cov.dim() && idx.iter().enumerate().all(|(k, &i)| k == i) {
            return Ok(self.camel_full.clone());
        }
        let mut cache = self.partial.lock().expect("cache lock poisoned");
        if let Some(p) = cache.get(idx) {
            return Ok(p.clone());
        }
        let p = Arc::new(Precision::from_covariance(&self.camel_cov.submatrix(idx)?)?);
        cache.insert(idx.to_vec(), p.clone());
        Ok(p)
    }

    /// Assembles the problem for one grid point.
    pub fn problem(
        &self,
        camel: Option<&HingeRecord>,
        apriori: &SimplexWeights,
    ) -> Result<(BayesProblem, FitFlags)> {
        if apriori.len() != self.set.len() {
            return Err(Error::Alignment(format!(
                "{} a-priori weights for {} profiles",
                apriori.len(),
                self.set.len()
            )));
        }
        let support = apriori.support(SUPPORT_THRESHOLD);
        let e_r: Vec<f64> = self
            .reduced_basis
            .iter()
            .map(|row| row.iter().zip(apriori.as_slice()).map(|(h, a)| h * a).sum())
            .collect();
        let prior = Observation::new(
            self.reduced_channels.clone(),
            e_r,
            self.prior_precision.clone(),
        )?;
        let mut flags = FitFlags::default();
        let camel_obs = match camel {
            Some(rec) if !rec.is_empty() => {
                let idx = self.camel_cov.channel_indices(&rec.wavenumbers)?;
                flags.missing_channels = self.camel_cov.dim() - idx.len();
                let precision = (*self.camel_precision(&idx)?).clone();
                Some(Observation::new(
                    rec.wavenumbers.clone(),
                    rec.emissivities.clone(),
                    precision,
                )?)
            }
            _ => {
                flags.prior_only = true;
                None
            }
        };
        Ok((
            BayesProblem::new(&self.set, camel_obs, prior, support)?,
            flags,
        ))
    }

    pub fn fit(&self, camel: Option<&HingeRecord>, apriori: &SimplexWeights) -> Result<BayesFit> {
        let (problem, flags) = self.problem(camel, apriori)?;
        let mut fit = solve(&problem)?;
        fit.flags.missing_channels = flags.missing_channels;
        Ok(fit)
    }
}

/// One-shot fit of a single grid point. Batch callers should build a
/// [`FitContext`] once instead.
pub fn fit_grid_point(
    set: &ProfileSet,
    camel_record: Option<&HingeRecord>,
    apriori: &SimplexWeights,
    s_c: &CovarianceMatrix,
    s_r: &CovarianceMatrix,
    selection: &ChannelSelection,
) -> Result<BayesFit> {
    if s_r.channels() != selection.wavenumbers.as_slice() {
        return Err(Error::Alignment(
            "reduced covariance channels differ from the channel selection".into(),
        ));
    }
    FitContext::new(set.clone(), s_c.clone(), s_r)?.fit(camel_record, apriori)
}
