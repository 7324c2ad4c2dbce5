//! Spectral emissivity profiles on a wavenumber grid, and their convex
//! combinations.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_error, csv_reader, fmt_f64, parse_f64, write_lines};

/// Tolerance on the weight sum accepted by [`SimplexWeights::new`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Strictly increasing, positive wavenumbers in cm⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberGrid {
    values: Arc<[f64]>,
}

/// Position of a wavenumber between two grid nodes.
///
/// The interpolated value of `v` is `w_lo * v[lo] + w_hi * v[hi]`; at a node
/// `lo == hi` and `w_lo == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub lo: usize,
    pub hi: usize,
    pub w_lo: f64,
    pub w_hi: f64,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        if self.lo == self.hi {
            values[self.lo]
        } else {
            self.w_lo * values[self.lo] + self.w_hi * values[self.hi]
        }
    }
}

impl WavenumberGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("wavenumber grid", "empty"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(
                "wavenumber grid",
                format!("non-positive or non-finite value {v}"),
            ));
        }
        if let Some(k) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "wavenumber grid",
                format!(
                    "not strictly increasing at index {} ({} -> {})",
                    k + 1,
                    values[k],
                    values[k + 1]
                ),
            ));
        }
        Ok(Self {
            values: values.into(),
        })
    }

    /// Uniform grid `start, start + step, ...` with `count` nodes.
    pub fn uniform(start: f64, step: f64, count: usize) -> Result<Self> {
        Self::new((0..count).map(|k| start + step * k as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn contains(&self, nu: f64) -> bool {
        nu >= self.min() && nu <= self.max()
    }

    /// Index of an exact grid node, if `nu` is one.
    pub fn node_index(&self, nu: f64) -> Option<usize> {
        self.values.binary_search_by(|v| v.total_cmp(&nu)).ok()
    }

    pub fn stencil(&self, nu: f64) -> Result<Stencil> {
        if !self.contains(nu) {
            return Err(Error::Range(format!(
                "wavenumber {nu} outside grid span [{}, {}]",
                self.min(),
                self.max()
            )));
        }
        // first node strictly greater than nu
        let upper = self.values.partition_point(|&v| v <= nu);
        let lo = upper - 1;
        if self.values[lo] == nu || upper == self.values.len() {
            return Ok(Stencil {
                lo,
                hi: lo,
                w_lo: 1.0,
                w_hi: 0.0,
            });
        }
        let (x0, x1) = (self.values[lo], self.values[upper]);
        let w_hi = (nu - x0) / (x1 - x0);
        Ok(Stencil {
            lo,
            hi: upper,
            w_lo: 1.0 - w_hi,
            w_hi,
        })
    }
}

/// Emissivity values on a grid; every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissivityProfile {
    grid: WavenumberGrid,
    values: Vec<f64>,
    label: String,
}

impl EmissivityProfile {
    pub fn new(grid: WavenumberGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.len() != grid.len() {
            return Err(Error::Alignment(format!(
                "profile {label}: {} values for a grid of {} wavenumbers",
                values.len(),
                grid.len()
            )));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Range(format!(
                "profile {label}: emissivity {v} at {} cm-1 outside [0, 1]",
                grid.values()[k]
            )));
        }
        Ok(Self {
            grid,
            values,
            label,
        })
    }

    /// Constant profile, mostly useful for tests and baselines.
    pub fn constant(grid: WavenumberGrid, value: f64, label: impl Into<String>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n], label)
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Piecewise-linear value at one wavenumber.
    pub fn value_at(&self, nu: f64) -> Result<f64> {
        Ok(self.grid.stencil(nu)?.apply(&self.values))
    }
}

/// Piecewise-linear interpolation of `profile` at each target wavenumber.
pub fn interpolate_profile(profile: &EmissivityProfile, targets: &[f64]) -> Result<Vec<f64>> {
    targets.iter().map(|&nu| profile.value_at(nu)).collect()
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights {
    weights: Vec<f64>,
}

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("simplex weights", "empty"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::invalid(
                "simplex weights",
                format!("weight {i} is {w}"),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::invalid(
                "simplex weights",
                format!("sum is {sum}, expected 1"),
            ));
        }
        Ok(Self { weights })
    }

    /// Clamps negatives to zero and rescales to unit sum.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::invalid(
                "simplex weights",
                format!("cannot normalize, sum is {sum}"),
            ));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Self::new(weights)
    }

    pub fn unit(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::Range(format!(
                "unit index {index} for {len} weights"
            )));
        }
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        Self::new(w)
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::normalized(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices whose weight exceeds `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.weights
    }
}

/// Ordered reference profiles sharing one grid, with unique labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: Vec<EmissivityProfile>,
}

impl ProfileSet {
    pub fn new(profiles: Vec<EmissivityProfile>) -> Result<Self> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::invalid("profile set", "no profiles"))?;
        let mut seen = HashSet::new();
        for p in &profiles {
            if p.grid() != first.grid() {
                return Err(Error::Alignment(format!(
                    "profile {} is on a different grid than {}",
                    p.label(),
                    first.label()
                )));
            }
            if !seen.insert(p.label().to_owned()) {
                return Err(Error::invalid(
                    "profile set",
                    format!("duplicate label {}", p.label()),
                ));
            }
        }
        Ok(Self { profiles })
    }

    pub fn grid(&self) -> &WavenumberGrid {
        self.profiles[0].grid()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[EmissivityProfile] {
        &self.profiles
    }

    pub fn profile(&self, i: usize) -> &EmissivityProfile {
        &self.profiles[i]
    }

    pub fn labels(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.label()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.label() == label)
    }

    pub fn by_label(&self, label: &str) -> Option<&EmissivityProfile> {
        self.index_of(label).map(|i| &self.profiles[i])
    }

    /// `values[c][i]`: profile `i` interpolated at `channels[c]`.
    pub fn sample_at(&self, channels: &[f64]) -> Result<Vec<Vec<f64>>> {
        channels
            .iter()
            .map(|&nu| {
                let st = self.grid().stencil(nu)?;
                Ok(self.profiles.iter().map(|p| st.apply(p.values())).collect())
            })
            .collect()
    }
}

/// `Σ_i w_i H_i` evaluated on the common grid.
pub fn convex_combination(set: &ProfileSet, w: &SimplexWeights) -> Result<EmissivityProfile> {
    if w.len() != set.len() {
        return Err(Error::Alignment(format!(
            "{} weights for {} profiles",
            w.len(),
            set.len()
        )));
    }
    let mut values = vec![0.0; set.grid().len()];
    for (p, &wi) in set.profiles().iter().zip(w.as_slice()) {
        if wi == 0.0 {
            continue;
        }
        for (acc, &h) in values.iter_mut().zip(p.values()) {
            *acc += wi * h;
        }
    }
    // the weight sum is 1 only to SIMPLEX_SUM_TOL
    values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    EmissivityProfile::new(set.grid().clone(), values, "combination")
}

/// Reads a profile-set CSV: header `wavenumber,<label1>,<label2>,...`.
pub fn load_profile_set(path: impl AsRef<Path>) -> Result<ProfileSet> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || !headers[0].eq_ignore_ascii_case("wavenumber") {
        return Err(Error::parse(
            path,
            1,
            "header must be `wavenumber,<label>,...`",
        ));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let mut grid = Vec::new();
    let mut columns = vec![Vec::new(); labels.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(Error::parse(
                path,
                row,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let nu = parse_f64(path, row, &rec[0], "wavenumber")?;
        if let Some(&prev) = grid.last() {
            if nu <= prev {
                return Err(Error::parse(
                    path,
                    row,
                    format!("wavenumber {nu} not greater than {prev}"),
                ));
            }
        }
        if nu <= 0.0 {
            return Err(Error::parse(
                path,
                row,
                format!("wavenumber {nu} must be positive"),
            ));
        }
        grid.push(nu);
        for (col, (field, label)) in columns.iter_mut().zip(rec.iter().skip(1).zip(&labels)) {
            let v = parse_f64(path, row, field, label)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::parse(
                    path,
                    row,
                    format!("{label}: emissivity {v} outside [0, 1]"),
                ));
            }
            col.push(v);
        }
    }
    let grid = WavenumberGrid::new(grid).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let profiles = labels
        .into_iter()
        .zip(columns)
        .map(|(label, values)| EmissivityProfile::new(grid.clone(), values, label))
        .collect::<Result<Vec<_>>>()?;
    ProfileSet::new(profiles)
}

/// Writes a single profile in the profile-set CSV layout.
pub fn save_profile(profile: &EmissivityProfile, path: impl AsRef<Path>) -> Result<()> {
    save_columns(profile.grid(), &[profile], path.as_ref())
}

pub fn save_profile_set(set: &ProfileSet, path: impl AsRef<Path>) -> Result<()> {
    let refs: Vec<&EmissivityProfile> = set.profiles().iter().collect();
    save_columns(set.grid(), &refs, path.as_ref())
}

fn save_columns(grid: &WavenumberGrid, profiles: &[&EmissivityProfile], path: &Path) -> Result<()> {
    let header = std::iter::once("wavenumber".to_owned())
        .chain(profiles.iter().map(|p| p.label().to_owned()))
        .collect::<Vec<_>>()
        .join(",");
    let rows = grid.values().iter().enumerate().map(|(k, &nu)| {
        std::iter::once(fmt_f64(nu))
            .chain(profiles.iter().map(|p| fmt_f64(p.values()[k])))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path, std::iter::once(header).chain(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_50_1650() -> WavenumberGrid {
        WavenumberGrid::uniform(50.0, 5.0, 321).unwrap()
    }

    #[test]
    fn constant_profile_interpolates_to_constant() {
        let p = EmissivityProfile::constant(grid_50_1650(), 0.9, "C").unwrap();
        assert_eq!(p.value_at(884.96).unwrap(), 0.9);
    }

    #[test]
    fn linear_interpolation_between_nodes() {
        let grid = WavenumberGrid::new(vec![875.0, 880.0, 885.0, 890.0]).unwrap();
        let p = EmissivityProfile::new(grid, vec![0.7, 0.8, 0.9, 0.95], "L").unwrap();
        assert!((p.value_at(884.0).unwrap() - 0.88).abs() < 1e-15);
    }

    #[test]
    fn nodes_are_reproduced_exactly() {
        let grid = grid_50_1650();
        let values: Vec<f64> = (0..grid.len())
            .map(|k| 0.5 + 0.4 * ((k as f64) * 0.37).sin().abs())
            .collect();
        let p = EmissivityProfile::new(grid.clone(), values.clone(), "S").unwrap();
        for (k, &nu) in grid.values().iter().enumerate() {
            assert_eq!(p.value_at(nu).unwrap().to_bits(), values[k].to_bits());
        }
    }

    #[test]
    fn out_of_span_target_is_a_range_error() {
        let p = EmissivityProfile::constant(grid_50_1650(), 0.9, "C").unwrap();
        assert!(matches!(p.value_at(49.9), Err(Error::Range(_))));
        assert!(matches!(p.value_at(1650.1), Err(Error::Range(_))));
        assert!(interpolate_profile(&p, &[100.0, 2000.0]).is_err());
    }

    #[test]
    fn grid_and_profile_invariants() {
        assert!(WavenumberGrid::new(vec![1.0, 1.0]).is_err());
        assert!(WavenumberGrid::new(vec![0.0, 1.0]).is_err());
        assert!(WavenumberGrid::new(vec![]).is_err());
        let g = WavenumberGrid::new(vec![1.0, 2.0]).unwrap();
        assert!(EmissivityProfile::new(g.clone(), vec![0.5], "x").is_err());
        assert!(EmissivityProfile::new(g, vec![0.5, 1.01], "x").is_err());
    }

    #[test]
    fn simplex_weight_invariants() {
        assert!(SimplexWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexWeights::new(vec![0.5, 0.5 + 1e-11]).is_err());
        assert!(SimplexWeights::new(vec![1.5, -0.5]).is_err());
        let w = SimplexWeights::normalized(vec![2.0, 0.0, 2.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.0, 0.5]);
        assert_eq!(w.support(1e-12), vec![0, 2]);
    }

    #[test]
    fn profile_set_rejects_mixed_grids_and_duplicate_labels() {
        let g1 = WavenumberGrid::new(vec![1.0, 2.0]).unwrap();
        let g2 = WavenumberGrid::new(vec![1.0, 3.0]).unwrap();
        let a = EmissivityProfile::constant(g1.clone(), 0.9, "A").unwrap();
        let b = EmissivityProfile::constant(g2, 0.9, "B").unwrap();
        assert!(matches!(
            ProfileSet::new(vec![a.clone(), b]),
            Err(Error::Alignment(_))
        ));
        let a2 = EmissivityProfile::constant(g1, 0.8, "A").unwrap();
        assert!(ProfileSet::new(vec![a, a2]).is_err());
    }

    #[test]
    fn unit_weights_reproduce_member_profile() {
        let grid = grid_50_1650();
        let set = ProfileSet::new(
            (0..4)
                .map(|i| {
                    let v = (0..grid.len())
                        .map(|k| 0.8 + 0.05 * ((k + i) as f64 * 0.1).cos())
                        .collect();
                    EmissivityProfile::new(grid.clone(), v, format!("P{i}")).unwrap()
                })
                .collect(),
        )
        .unwrap();
        for i in 0..4 {
            let e = convex_combination(&set, &SimplexWeights::unit(4, i).unwrap()).unwrap();
            assert_eq!(e.values(), set.profile(i).values());
        }
    }

    #[test]
    fn two_constant_profiles_average() {
        let grid = grid_50_1650();
        let set = ProfileSet::new(vec![
            EmissivityProfile::constant(grid.clone(), 0.8, "A").unwrap(),
            EmissivityProfile::constant(grid, 1.0, "B").unwrap(),
        ])
        .unwrap();
        let e = convex_combination(&set, &SimplexWeights::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert!(e.values().iter().all(|v| (v - 0.9).abs() < 1e-15));
        assert!(convex_combination(&set, &SimplexWeights::uniform(3).unwrap()).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = WavenumberGrid::uniform(100.0, 5.0, 40).unwrap();
        let set = ProfileSet::new(
            ["DES", "D&G", "WAT"]
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let v = (0..grid.len())
                        .map(|k| 0.7 + 0.29 * ((k * (i + 1)) as f64 / 7.0).sin().abs())
                        .collect();
                    EmissivityProfile::new(grid.clone(), v, *l).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let path = dir.path().join("set.csv");
        save_profile_set(&set, &path).unwrap();
        assert_eq!(load_profile_set(&path).unwrap(), set);

        let single = dir.path().join("one.csv");
        save_profile(set.profile(1), &single).unwrap();
        let back = load_profile_set(&single).unwrap();
        assert_eq!(back.profile(0), set.profile(1));
    }

    #[test]
    fn malformed_csv_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("wavenumber,A\n100,0.9\n100,0.9\n", 3),
            ("wavenumber,A\n100,0.9\n105,1.2\n", 3),
            ("wavenumber,A\n100,0.9\n105,abc\n", 3),
        ];
        for (text, row) in cases {
            let path = dir.path().join("bad.csv");
            std::fs::write(&path, text).unwrap();
            match load_profile_set(&path) {
                Err(Error::Parse { row: r, .. }) => assert_eq!(r, row, "{text}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn combination_stays_in_pointwise_hull(raw in proptest::collection::vec(0.0f64..1.0, 5), seed in 0u64..1000) {
            let grid = WavenumberGrid::uniform(600.0, 5.0, 60).unwrap();
            let set = ProfileSet::new((0..5).map(|i| {
                let v = (0..grid.len()).map(|k| 0.6 + 0.39 * (((k as u64 * 31 + i as u64 * 17 + seed) % 97) as f64 / 97.0)).collect();
                EmissivityProfile::new(grid.clone(), v, format!("P{i}")).unwrap()
            }).collect()).unwrap();
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let w = SimplexWeights::normalized(raw).unwrap();
            let e = convex_combination(&set, &w).unwrap();
            for k in 0..grid.len() {
                let col = set.profiles().iter().map(|p| p.values()[k]);
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(e.values()[k] >= lo - 1e-15 && e.values()[k] <= hi + 1e-15);
            }
        }

        #[test]
        fn interpolation_stays_between_adjacent_nodes(a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0) {
            let grid = WavenumberGrid::new(vec![800.0, 805.0]).unwrap();
            let p = EmissivityProfile::new(grid, vec![a, b], "x").unwrap();
            let v = p.value_at(800.0 + 5.0 * t).unwrap();
            prop_assert!(v >= a.min(b) - 1e-16 && v <= a.max(b) + 1e-16);
        }
    }
}
