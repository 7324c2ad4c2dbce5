//! Land-cover derived a-priori weights: footprint class fractions on a
//! land-cover raster, mapped to profile weights through a row-stochastic
//! correspondence matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_error, parse_f64, read_json};
use crate::profiles::{
    convex_combination, EmissivityProfile, ProfileSet, SimplexWeights, SIMPLEX_SUM_TOL,
};

pub const N_CLASSES: usize = 17;
pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_FOV_RADIUS_KM: f64 = 7.5;

const DEFAULT_MATRIX_JSON: &str = include_str!("../data/correspondence_v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GridPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Range(format!("latitude {lat} outside [-90, 90]")));
        }
        if !(-180.0..180.0).contains(&lon) {
            return Err(Error::Range(format!("longitude {lon} outside [-180, 180)")));
        }
        Ok(Self { lat, lon })
    }
}

/// Great-circle distance on the spherical Earth.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Regular lat/lon raster of land-cover class ids `1..=17`.
///
/// Cell `(r, c)` is centred at `(lat0 + r * step, lon0 + c * step)`; storage
/// is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LandCoverGrid {
    lat0: f64,
    lon0: f64,
    step: f64,
    nrows: usize,
    ncols: usize,
    classes: Vec<u8>,
}

impl LandCoverGrid {
    pub fn new(
        lat0: f64,
        lon0: f64,
        step: f64,
        nrows: usize,
        ncols: usize,
        classes: Vec<u8>,
    ) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid(
                "land-cover grid",
                format!("step {step} must be positive"),
            ));
        }
        if !(lat0.is_finite() && lon0.is_finite()) {
            return Err(Error::invalid("land-cover grid", "non-finite origin"));
        }
        if classes.len() != nrows * ncols {
            return Err(Error::Alignment(format!(
                "{} class cells for a {nrows}x{ncols} raster",
                classes.len()
            )));
        }
        if let Some((k, c)) = classes
            .iter()
            .enumerate()
            .find(|(_, c)| !(1..=N_CLASSES as u8).contains(*c))
        {
            return Err(Error::Range(format!(
                "class id {c} at cell {k} outside 1..=17"
            )));
        }
        Ok(Self {
            lat0,
            lon0,
            step,
            nrows,
            ncols,
            classes,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.lat0, self.lon0)
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn class_at(&self, row: usize, col: usize) -> u8 {
        self.classes[row * self.ncols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.lat0 + row as f64 * self.step,
            self.lon0 + col as f64 * self.step,
        )
    }

    fn is_global(&self) -> bool {
        self.ncols as f64 * self.step >= 360.0 - 1e-9
    }

    /// Reads the flat binary layout: little-endian `f64` lat0, lon0, step,
    /// `u32` nrows, ncols, then one class byte per cell, row-major.
    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 32 {
            return Err(Error::parse(path, 0, "truncated header"));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (lat0, lon0, step, nrows, ncols) = (f(0), f(8), f(16), u(24), u(28));
        let body = &bytes[32..];
        if body.len() != nrows * ncols {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "expected {} class bytes, found {}",
                    nrows * ncols,
                    body.len()
                ),
            ));
        }
        Self::new(lat0, lon0, step, nrows, ncols, body.to_vec())
            .map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::with_capacity(32 + self.classes.len());
        out.extend_from_slice(&self.lat0.to_le_bytes());
        out.extend_from_slice(&self.lon0.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.nrows as u32).to_le_bytes());
        out.extend_from_slice(&(self.ncols as u32).to_le_bytes());
        out.extend_from_slice(&self.classes);
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads the CSV layout: header `lat0,lon0,step,nrows,ncols`, one line of
    /// those values, then `nrows` lines of `ncols` class ids.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut records = rdr.records();
        let head = records
            .next()
            .ok_or_else(|| Error::parse(path, 2, "missing raster header values"))?
            .map_err(|e| csv_error(path, e))?;
        if head.len() != 5 {
            return Err(Error::parse(path, 2, "expected lat0,lon0,step,nrows,ncols"));
        }
        let lat0 = parse_f64(path, 2, &head[0], "lat0")?;
        let lon0 = parse_f64(path, 2, &head[1], "lon0")?;
        let step = parse_f64(path, 2, &head[2], "step")?;
        let dim = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(path, 2, format!("{what}: cannot parse {s:?}")))
        };
        let nrows = dim(&head[3], "nrows")?;
        let ncols = dim(&head[4], "ncols")?;
        let mut classes = Vec::with_capacity(nrows * ncols);
        for rec in records {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != ncols {
                return Err(Error::parse(
                    path,
                    row,
                    format!("expected {ncols} cells, found {}", rec.len()),
                ));
            }
            for field in rec.iter() {
                let c: u8 = field
                    .parse()
                    .map_err(|_| Error::parse(path, row, format!("bad class id {field:?}")))?;
                classes.push(c);
            }
        }
        Self::new(lat0, lon0, step, nrows, ncols, classes)
            .map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    /// Dispatches on extension: `.csv` is text, anything else binary.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::load_csv(path),
            _ => Self::load_binary(path),
        }
    }
}

/// Fractions of the 17 land-cover classes; nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFractions([f64; N_CLASSES]);

impl ClassFractions {
    pub fn new(t: [f64; N_CLASSES]) -> Result<Self> {
        if t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "class fractions",
                "negative or non-finite fraction",
            ));
        }
        let s: f64 = t.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::invalid("class fractions", format!("sum is {s}")));
        }
        Ok(Self(t))
    }

    /// All weight on class `id` (1-based).
    pub fn unit(id: u8) -> Result<Self> {
        if !(1..=N_CLASSES as u8).contains(&id) {
            return Err(Error::Range(format!("class id {id}")));
        }
        let mut t = [0.0; N_CLASSES];
        t[id as usize - 1] = 1.0;
        Self::new(t)
    }

    pub fn as_array(&self) -> &[f64; N_CLASSES] {
        &self.0
    }

    /// Fraction of class `id` (1-based).
    pub fn get(&self, id: u8) -> f64 {
        self.0[id as usize - 1]
    }
}

/// Class fractions over the cells whose centres lie within `radius_km`
/// great-circle distance of `center`.
pub fn fov_fractions(
    map: &LandCoverGrid,
    center: GridPoint,
    radius_km: f64,
) -> Result<ClassFractions> {
    if !(radius_km.is_finite() && radius_km > 0.0) {
        return Err(Error::Range(format!(
            "footprint radius {radius_km} km must be positive"
        )));
    }
    let dlat = (radius_km / EARTH_RADIUS_KM).to_degrees();
    let r_lo = ((center.lat - dlat - map.lat0) / map.step).floor() - 1.0;
    let r_hi = ((center.lat + dlat - map.lat0) / map.step).ceil() + 1.0;
    let r_lo = r_lo.max(0.0) as usize;
    let r_hi = (r_hi.min(map.nrows as f64 - 1.0)).max(-1.0);
    let mut counts = [0usize; N_CLASSES];
    let mut total = 0usize;
    if r_hi >= 0.0 {
        let r_hi = r_hi as usize;
        let polar = center.lat.abs() + dlat >= 89.0;
        let cols: Vec<usize> = if polar {
            (0..map.ncols).collect()
        } else {
            let dlon = dlat / (center.lat.abs() + dlat).to_radians().cos();
            let c_lo = ((center.lon - dlon - map.lon0) / map.step).floor() as i64 - 1;
            let c_hi = ((center.lon + dlon - map.lon0) / map.step).ceil() as i64 + 1;
            if map.is_global() {
                let n = map.ncols as i64;
                let span = (c_hi - c_lo + 1).min(n);
                (0..span)
                    .map(|k| (c_lo + k).rem_euclid(n) as usize)
                    .collect()
            } else {
                let lo = c_lo.max(0);
                let hi = c_hi.min(map.ncols as i64 - 1);
                (lo..=hi).map(|c| c as usize).collect()
            }
        };
        for row in r_lo..=r_hi {
            for &col in &cols {
                let (lat, lon) = map.cell_center(row, col);
                if haversine_km(center.lat, center.lon, lat, lon) <= radius_km {
                    counts[map.class_at(row, col) as usize - 1] += 1;
                    total += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyFootprint {
            lat: center.lat,
            lon: center.lon,
            radius_km,
        });
    }
    let mut t = [0.0; N_CLASSES];
    for (ti, &c) in t.iter_mut().zip(&counts) {
        *ti = c as f64 / total as f64;
    }
    ClassFractions::new(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRow {
    id: u8,
    #[serde(default)]
    name: String,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixDoc {
    version: u32,
    #[serde(default)]
    description: String,
    labels: Vec<String>,
    classes: Vec<MatrixRow>,
}

/// 17 × NP row-stochastic map from land-cover classes to profile labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMatrix {
    labels: Vec<String>,
    class_names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CorrespondenceMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let names = (1..=N_CLASSES).map(|i| format!("class {i}")).collect();
        Self::with_names(labels, names, rows)
    }

    fn with_names(
        labels: Vec<String>,
        class_names: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != N_CLASSES {
            return Err(Error::invalid(
                "correspondence matrix",
                format!("{} rows, expected 17", rows.len()),
            ));
        }
        for (l, row) in rows.iter().enumerate() {
            if row.len() != labels.len() {
                return Err(Error::Alignment(format!(
                    "correspondence row {} has {} entries for {} labels",
                    l + 1,
                    row.len(),
                    labels.len()
                )));
            }
            if row.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return Err(Error::invalid(
                    "correspondence matrix",
                    format!("row {} has a negative entry", l + 1),
                ));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
                return Err(Error::invalid(
                    "correspondence matrix",
                    format!("row {} sums to {s}", l + 1),
                ));
            }
        }
        Ok(Self {
            labels,
            class_names,
            rows,
        })
    }

    /// The class-to-profile table shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json_str(DEFAULT_MATRIX_JSON).expect("bundled correspondence matrix is valid")
    }

    fn from_doc(doc: MatrixDoc) -> Result<Self> {
        let mut classes = doc.classes;
        classes.sort_by_key(|c| c.id);
        if classes
            .iter()
            .enumerate()
            .any(|(i, c)| c.id as usize != i + 1)
        {
            return Err(Error::invalid(
                "correspondence matrix",
                "class ids must be exactly 1..=17",
            ));
        }
        let names = classes.iter().map(|c| c.name.clone()).collect();
        let rows = classes.into_iter().map(|c| c.weights).collect();
        Self::with_names(doc.labels, names, rows)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: MatrixDoc = serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<inline>".into(),
            source,
        })?;
        Self::from_doc(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_doc(read_json(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = MatrixDoc {
            version: 1,
            description: String::new(),
            labels: self.labels.clone(),
            classes: self
                .rows
                .iter()
                .enumerate()
                .map(|(i, w)| MatrixRow {
                    id: i as u8 + 1,
                    name: self.class_names[i].clone(),
                    weights: w.clone(),
                })
                .collect(),
        };
        crate::io::write_json(path.as_ref(), &doc)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Row for class `id` (1-based).
    pub fn row(&self, id: u8) -> &[f64] {
        &self.rows[id as usize - 1]
    }

    /// Reorders the columns to follow `set`'s label order.
    pub fn aligned_to(&self, set: &ProfileSet) -> Result<Self> {
        if set.len() != self.labels.len() {
            return Err(Error::Alignment(format!(
                "matrix has {} labels, profile set {}",
                self.labels.len(),
                set.len()
            )));
        }
        let perm = set
            .labels()
            .iter()
            .map(|l| {
                self.labels.iter().position(|m| m == l).ok_or_else(|| {
                    Error::Alignment(format!("profile {l} missing from correspondence matrix"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| perm.iter().map(|&j| r[j]).collect())
            .collect();
        Self::with_names(
            set.labels().iter().map(|s| s.to_string()).collect(),
            self.class_names.clone(),
            rows,
        )
    }
}

/// `a_i = Σ_l t_l m_li`.
pub fn apriori_weights(t: &ClassFractions, m: &CorrespondenceMatrix) -> Result<SimplexWeights> {
    let mut a = vec![0.0; m.labels.len()];
    for (tl, row) in t.as_array().iter().zip(&m.rows) {
        if *tl == 0.0 {
            continue;
        }
        for (ai, mli) in a.iter_mut().zip(row) {
            *ai += tl * mli;
        }
    }
    SimplexWeights::new(a)
}

/// `H_a(ν) = Σ_i a_i H_i(ν)`.
pub fn apriori_profile(a: &SimplexWeights, set: &ProfileSet) -> Result<EmissivityProfile> {
    Ok(convex_combination(set, a)?.with_label("apriori"))
}
