//! Validation against independent reference measurements: coincidence
//! matching, per-point RMSE, summary reports and Welch's t-test.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::ancillary::{rms_difference, HingeRecord};
use crate::error::{Error, Result};
use crate::io::{csv_error, csv_reader, fmt_f64, parse_f64, write_json, write_lines};
use crate::landcover::GridPoint;
use crate::profiles::{EmissivityProfile, WavenumberGrid};

pub const DEFAULT_TOLERANCE_DEG: f64 = 0.05;

/// A geolocated measurement at a few channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    pub lat: f64,
    pub lon: f64,
    pub channels: Vec<f64>,
    pub values: Vec<f64>,
}

/// Reads `lat,lon,<wavenumber>,...`.
pub fn load_reference_csv(path: impl AsRef<Path>) -> Result<Vec<ReferenceRecord>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 3 || &headers[0] != "lat" || &headers[1] != "lon" {
        return Err(Error::parse(
            path,
            1,
            "header must be `lat,lon,<wavenumber>,...`",
        ));
    }
    let channels = headers
        .iter()
        .skip(2)
        .map(|h| parse_f64(path, 1, h, "channel wavenumber"))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let values = rec
            .iter()
            .skip(2)
            .map(|f| parse_f64(path, row, f, "emissivity"))
            .collect::<Result<Vec<_>>>()?;
        out.push(ReferenceRecord {
            lat: parse_f64(path, row, &rec[0], "lat")?,
            lon: parse_f64(path, row, &rec[1], "lon")?,
            channels: channels.clone(),
            values,
        });
    }
    Ok(out)
}

pub fn save_reference_csv(records: &[ReferenceRecord], path: impl AsRef<Path>) -> Result<()> {
    let Some(first) = records.first() else {
        return write_lines(path.as_ref(), ["lat,lon".to_owned()]);
    };
    let header = ["lat".to_owned(), "lon".to_owned()]
        .into_iter()
        .chain(first.channels.iter().map(|&c| fmt_f64(c)))
        .collect::<Vec<_>>()
        .join(",");
    let rows = records.iter().map(|r| {
        [fmt_f64(r.lat), fmt_f64(r.lon)]
            .into_iter()
            .chain(r.values.iter().map(|&v| fmt_f64(v)))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path.as_ref(), std::iter::once(header).chain(rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidencePair {
    pub grid_index: usize,
    pub grid_point: GridPoint,
    pub reference_index: usize,
    pub reference_point: GridPoint,
    pub reference_channels: Vec<f64>,
    pub reference_values: Vec<f64>,
}

/// Pairs every reference with its nearest grid point (Euclidean in degrees,
/// lowest grid index on ties) among those within `tol_deg` in both latitude
/// and longitude. Longitudes do not wrap at the dateline.
pub fn match_coincidences(
    grid: &[GridPoint],
    refs: &[ReferenceRecord],
    tol_deg: f64,
) -> Result<Vec<CoincidencePair>> {
    if !(tol_deg > 0.0) || !tol_deg.is_finite() {
        return Err(Error::Range(format!(
            "coincidence tolerance {tol_deg} must be positive"
        )));
    }
    let key = |lat: f64, lon: f64| {
        (
            (lat / tol_deg).floor() as i64,
            (lon / tol_deg).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, g) in grid.iter().enumerate() {
        buckets.entry(key(g.lat, g.lon)).or_default().push(i);
    }
    let mut out = Vec::new();
    for (ri, r) in refs.iter().enumerate() {
        let (ky, kx) = key(r.lat, r.lon);
        let mut best: Option<(f64, usize)> = None;
        // ±2 buckets absorbs rounding in the bucket keys
        for dy in -2..=2 {
            for dx in -2..=2 {
                let Some(cands) = buckets.get(&(ky + dy, kx + dx)) else {
                    continue;
                };
                for &gi in cands {
                    let g = &grid[gi];
                    let (dlat, dlon) = (g.lat - r.lat, g.lon - r.lon);
                    if dlat.abs() > tol_deg || dlon.abs() > tol_deg {
                        continue;
                    }
                    let d2 = dlat * dlat + dlon * dlon;
                    if best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && gi < bi)) {
                        best = Some((d2, gi));
                    }
                }
            }
        }
        if let Some((_, gi)) = best {
            out.push(CoincidencePair {
                grid_index: gi,
                grid_point: grid[gi],
                reference_index: ri,
                reference_point: GridPoint {
                    lat: r.lat,
                    lon: r.lon,
                },
                reference_channels: r.channels.clone(),
                reference_values: r.values.clone(),
            });
        }
    }
    Ok(out)
}

/// RMSE of the interpolated estimate against the reference values.
pub fn pointwise_rmse(estimate: &EmissivityProfile, pair: &CoincidencePair) -> Result<f64> {
    rms_difference(estimate, &pair.reference_channels, &pair.reference_values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub label: String,
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub count: usize,
}

impl RmseReport {
    pub fn new(label: impl Into<String>, per_point: Vec<f64>) -> Self {
        let count = per_point.len();
        let mean = if count == 0 {
            f64::NAN
        } else {
            per_point.iter().sum::<f64>() / count as f64
        };
        Self {
            label: label.into(),
            per_point,
            mean,
            count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    /// `P(T ≤ t)`: small when the mean of the first sample is clearly lower.
    pub p_value: f64,
    pub dof: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Student t cumulative distribution.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(dof / 2.0, 0.5, dof / (dof + t * t));
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Welch's unequal-variance test with the one-sided p-value `P(T ≤ t)`,
/// `t = (mean(a) - mean(b)) / se`.
pub fn two_sample_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let t = if ma == mb {
            0.0
        } else {
            (ma - mb) * f64::INFINITY
        };
        let p = if ma == mb { 0.5 } else { student_t_cdf(t, 1.0) };
        return Ok(TTestResult {
            t_statistic: t,
            p_value: p,
            dof: na + nb - 2.0,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(TTestResult {
        t_statistic: t,
        p_value: student_t_cdf(t, dof),
        dof,
    })
}

/// Piecewise-linear interpolation through hinge values, constant beyond the
/// outermost hinges.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl HingeSpline {
    pub fn new(record: &HingeRecord) -> Result<Self> {
        if record.is_empty() {
            return Err(Error::InsufficientData(
                "hinge record without channels".into(),
            ));
        }
        Ok(Self {
            knots: record.wavenumbers.clone(),
            values: record.emissivities.clone(),
        })
    }

    pub fn value_at(&self, nu: f64) -> f64 {
        let k = &self.knots;
        if nu <= k[0] {
            return self.values[0];
        }
        if nu >= k[k.len() - 1] {
            return self.values[k.len() - 1];
        }
        let hi = k.partition_point(|&x| x <= nu);
        let lo = hi - 1;
        let w = (nu - k[lo]) / (k[hi] - k[lo]);
        self.values[lo] + w * (self.values[hi] - self.values[lo])
    }

    pub fn to_profile(&self, grid: &WavenumberGrid) -> Result<EmissivityProfile> {
        let values = grid.values().iter().map(|&nu| self.value_at(nu)).collect();
        EmissivityProfile::new(grid.clone(), values, "spline")
    }
}

pub const BAYES_REF: &str = "BAYES-REF";
pub const CAMEL_REF: &str = "CAMEL-REF";
pub const CAMEL_BAYES: &str = "CAMEL-BAYES";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub bayes_ref: RmseReport,
    pub camel_ref: RmseReport,
    pub camel_bayes: RmseReport,
    /// Tests whether the Bayesian errors are smaller than the spline errors.
    pub ttest: Option<TTestResult>,
}

/// RMSE reports for both estimates against the references and against each
/// other, plus the t-test between the two error samples. `bayes[k]` and
/// `splines[k]` are the estimates at `pairs[k]`.
pub fn compare_methods(
    bayes: &[EmissivityProfile],
    splines: &[EmissivityProfile],
    pairs: &[CoincidencePair],
) -> Result<Comparison> {
    if bayes.len() != pairs.len() || splines.len() != pairs.len() {
        return Err(Error::Alignment(format!(
            "{} Bayesian estimates and {} splines for {} coincidences",
            bayes.len(),
            splines.len(),
            pairs.len()
        )));
    }
    let mut br = Vec::with_capacity(pairs.len());
    let mut cr = Vec::with_capacity(pairs.len());
    let mut cb = Vec::with_capacity(pairs.len());
    for ((b, s), pair) in bayes.iter().zip(splines).zip(pairs) {
        br.push(pointwise_rmse(b, pair)?);
        cr.push(pointwise_rmse(s, pair)?);
        let at_b = crate::profiles::interpolate_profile(b, &pair.reference_channels)?;
        cb.push(rms_difference(s, &pair.reference_channels, &at_b)?);
    }
    let ttest = if pairs.len() >= 2 {
        Some(two_sample_ttest(&br, &cr)?)
    } else {
        None
    };
    Ok(Comparison {
        bayes_ref: RmseReport::new(BAYES_REF, br),
        camel_ref: RmseReport::new(CAMEL_REF, cr),
        camel_bayes: RmseReport::new(CAMEL_BAYES, cb),
        ttest,
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    comparisons: Vec<SummaryRow<'a>>,
    t_statistic: Option<f64>,
    p_value: Option<f64>,
    dof: Option<f64>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    label: &'a str,
    mean_rmse: f64,
    count: usize,
}

impl Comparison {
    fn reports(&self) -> [&RmseReport; 3] {
        [&self.bayes_ref, &self.camel_ref, &self.camel_bayes]
    }

    /// One row per comparison, then the test statistics.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut lines = vec!["comparison,mean_rmse,count".to_owned()];
        for r in self.reports() {
            lines.push(format!("{},{},{}", r.label, fmt_f64(r.mean), r.count));
        }
        if let Some(t) = &self.ttest {
            lines.push(String::new());
            lines.push("t_statistic,p_value,dof".to_owned());
            lines.push(format!(
                "{},{},{}",
                fmt_f64(t.t_statistic),
                fmt_f64(t.p_value),
                fmt_f64(t.dof)
            ));
        }
        write_lines(path.as_ref(), lines)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let summary = Summary {
            comparisons: self
                .reports()
                .iter()
                .map(|r| SummaryRow {
                    label: &r.label,
                    mean_rmse: r.mean,
                    count: r.count,
                })
                .collect(),
            t_statistic: self.ttest.map(|t| t.t_statistic),
            p_value: self.ttest.map(|t| t.p_value),
            dof: self.ttest.map(|t| t.dof),
        };
        write_json(path.as_ref(), &summary)
    }

    /// Per-coincidence errors next to the locations.
    pub fn save_points_csv(&self, pairs: &[CoincidencePair], path: impl AsRef<Path>) -> Result<()> {
        let header = "grid_lat,grid_lon,ref_lat,ref_lon,bayes_ref,camel_ref,camel_bayes".to_owned();
        let rows = pairs.iter().enumerate().map(|(k, p)| {
            [
                p.grid_point.lat,
                p.grid_point.lon,
                p.reference_point.lat,
                p.reference_point.lon,
                self.bayes_ref.per_point[k],
                self.camel_ref.per_point[k],
                self.camel_bayes.per_point[k],
            ]
            .iter()
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(",")
        });
        write_lines(path.as_ref(), std::iter::once(header).chain(rows))
    }
}
