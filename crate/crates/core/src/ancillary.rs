//! Profile selection from ancillary constraints (snow cover, skin
//! temperature, soil humidity) followed by a minimum-RMS pick against
//! hinge-point emissivities.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_error, csv_reader, fmt_f64, parse_f64, read_json, write_json, write_lines};
use crate::profiles::{EmissivityProfile, ProfileSet};

/// Default snow-fraction threshold above which snow/ice profiles apply.
pub const DEFAULT_SNOW_THRESHOLD: f64 = 0.5;

const DEFAULT_TABLE_JSON: &str = include_str!("../data/constraints_v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceClass {
    Land,
    Water,
}

impl SurfaceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceClass::Land => "land",
            SurfaceClass::Water => "water",
        }
    }
}

impl std::str::FromStr for SurfaceClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "land" => Ok(SurfaceClass::Land),
            "water" => Ok(SurfaceClass::Water),
            other => Err(format!("unknown surface class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncillaryRecord {
    /// Snow-cover fraction in `[0, 1]`; ignored over water.
    pub snow_fraction: f64,
    /// Skin temperature in °C.
    pub skin_temperature: f64,
    /// Soil humidity in percent, `[0, 100]`; ignored over water.
    pub soil_humidity: f64,
    pub surface: SurfaceClass,
}

impl AncillaryRecord {
    pub fn new(
        snow_fraction: f64,
        skin_temperature: f64,
        soil_humidity: f64,
        surface: SurfaceClass,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&snow_fraction) {
            return Err(Error::Range(format!(
                "snow fraction {snow_fraction} outside [0, 1]"
            )));
        }
        if !(0.0..=100.0).contains(&soil_humidity) {
            return Err(Error::Range(format!(
                "soil humidity {soil_humidity} outside [0, 100]"
            )));
        }
        if !skin_temperature.is_finite() {
            return Err(Error::invalid(
                "ancillary record",
                "non-finite skin temperature",
            ));
        }
        Ok(Self {
            snow_fraction,
            skin_temperature,
            soil_humidity,
            surface,
        })
    }

    pub fn land(snow_fraction: f64, skin_temperature: f64, soil_humidity: f64) -> Result<Self> {
        Self::new(
            snow_fraction,
            skin_temperature,
            soil_humidity,
            SurfaceClass::Land,
        )
    }

    pub fn water(skin_temperature: f64) -> Result<Self> {
        Self::new(0.0, skin_temperature, 0.0, SurfaceClass::Water)
    }
}

/// Admissibility rule for one profile label. Bounds are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRule {
    pub label: String,
    /// Whether the label requires snow cover above the threshold.
    pub snow: bool,
    pub temp_min_c: Option<f64>,
    pub temp_max_c: Option<f64>,
    pub humidity_min_pct: Option<f64>,
    pub humidity_max_pct: Option<f64>,
    /// Whether the label may be chosen over water.
    #[serde(default)]
    pub over_water: bool,
}

fn within(x: f64, lo: Option<f64>, hi: Option<f64>) -> bool {
    lo.is_none_or(|lo| x >= lo) && hi.is_none_or(|hi| x <= hi)
}

impl ConstraintRule {
    pub fn admits(&self, rec: &AncillaryRecord, snow_threshold: f64) -> bool {
        let temp_ok = within(rec.skin_temperature, self.temp_min_c, self.temp_max_c);
        match rec.surface {
            SurfaceClass::Water => self.over_water && temp_ok,
            SurfaceClass::Land => {
                let snowy = rec.snow_fraction > snow_threshold;
                self.snow == snowy
                    && temp_ok
                    && within(
                        rec.soil_humidity,
                        self.humidity_min_pct,
                        self.humidity_max_pct,
                    )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTable {
    pub version: u32,
    #[serde(default)]
    pub description: String,
    pub rules: Vec<ConstraintRule>,
}

impl ConstraintTable {
    /// The rule set shipped with the crate.
    pub fn builtin() -> Self {
        serde_json::from_str(DEFAULT_TABLE_JSON).expect("bundled constraint table is valid JSON")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let table: Self = read_json(path.as_ref())?;
        table.validate()?;
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut labels: Vec<&str> = self.rules.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "constraint table",
                format!("duplicate rule for {}", w[0]),
            ));
        }
        Ok(())
    }

    pub fn rule(&self, label: &str) -> Option<&ConstraintRule> {
        self.rules.iter().find(|r| r.label == label)
    }

    /// Checks that every profile label has exactly one rule.
    pub fn check_aligned(&self, set: &ProfileSet) -> Result<()> {
        self.validate()?;
        for label in set.labels() {
            if self.rule(label).is_none() {
                return Err(Error::Alignment(format!(
                    "no constraint rule for profile {label}"
                )));
            }
        }
        Ok(())
    }
}

/// Geolocated monthly emissivities at hinge wavenumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeRecord {
    pub wavenumbers: Vec<f64>,
    pub emissivities: Vec<f64>,
    pub lat: f64,
    pub lon: f64,
    pub month: u8,
}

impl HingeRecord {
    pub fn new(
        wavenumbers: Vec<f64>,
        emissivities: Vec<f64>,
        lat: f64,
        lon: f64,
        month: u8,
    ) -> Result<Self> {
        if wavenumbers.len() != emissivities.len() {
            return Err(Error::Alignment(format!(
                "{} hinge wavenumbers but {} emissivities",
                wavenumbers.len(),
                emissivities.len()
            )));
        }
        if wavenumbers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "hinge record",
                "wavenumbers not strictly increasing",
            ));
        }
        if let Some(e) = emissivities.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Range(format!("hinge emissivity {e} outside [0, 1]")));
        }
        if !(1..=12).contains(&month) {
            return Err(Error::Range(format!("month {month} outside 1..=12")));
        }
        Ok(Self {
            wavenumbers,
            emissivities,
            lat,
            lon,
            month,
        })
    }

    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumbers.is_empty()
    }
}

/// Root-mean-square difference between a profile and values at `channels`.
pub fn rms_difference(
    profile: &EmissivityProfile,
    channels: &[f64],
    values: &[f64],
) -> Result<f64> {
    if channels.len() != values.len() {
        return Err(Error::Alignment(format!(
            "{} channels, {} values",
            channels.len(),
            values.len()
        )));
    }
    if channels.is_empty() {
        return Err(Error::InsufficientData("no channels to compare".into()));
    }
    let mut sum = 0.0;
    for (&nu, &v) in channels.iter().zip(values) {
        let d = profile.value_at(nu)? - v;
        sum += d * d;
    }
    Ok((sum / channels.len() as f64).sqrt())
}

pub fn rms_to_hinges(profile: &EmissivityProfile, hinge: &HingeRecord) -> Result<f64> {
    rms_difference(profile, &hinge.wavenumbers, &hinge.emissivities)
}

/// Labels of `table` admitted by the record, in table order. May be empty.
pub fn admissible_labels<'t>(
    rec: &AncillaryRecord,
    table: &'t ConstraintTable,
    snow_threshold: f64,
) -> Vec<&'t str> {
    table
        .rules
        .iter()
        .filter(|r| r.admits(rec, snow_threshold))
        .map(|r| r.label.as_str())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub label: String,
    pub index: usize,
    /// RMS against the hinge record, when one was supplied.
    pub rms: Option<f64>,
}

/// Picks the admissible profile with minimal RMS to the hinge data.
///
/// Without hinge data (e.g. over water) the first admissible profile in set
/// order is chosen, which over water is decided by the temperature gates
/// alone. Ties go to the lowest set index.
pub fn select_profile(
    rec: &AncillaryRecord,
    hinge: Option<&HingeRecord>,
    set: &ProfileSet,
    table: &ConstraintTable,
    snow_threshold: f64,
) -> Result<Selection> {
    table.check_aligned(set)?;
    let mut best: Option<(usize, Option<f64>)> = None;
    for (i, p) in set.profiles().iter().enumerate() {
        let rule = table.rule(p.label()).expect("checked alignment");
        if !rule.admits(rec, snow_threshold) {
            continue;
        }
        let rms = hinge.map(|h| rms_to_hinges(p, h)).transpose()?;
        let better = match (&best, rms) {
            (None, _) => true,
            (Some((_, Some(b))), Some(r)) => r < *b,
            _ => false,
        };
        if better {
            best = Some((i, rms));
        }
    }
    let (index, rms) = best.ok_or_else(|| {
        Error::NoSelection(format!(
            "{:?} record at T={} C, snow={}, humidity={} admits no profile",
            rec.surface, rec.skin_temperature, rec.snow_fraction, rec.soil_humidity
        ))
    })?;
    Ok(Selection {
        label: set.profile(index).label().to_owned(),
        index,
        rms,
    })
}

/// An ancillary record tied to a grid location.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatedAncillary {
    pub lat: f64,
    pub lon: f64,
    pub record: AncillaryRecord,
}

/// Reads `lat,lon,surface,snow_fraction,skin_temperature,soil_humidity`.
pub fn load_ancillary_csv(path: impl AsRef<Path>) -> Result<Vec<LocatedAncillary>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = [
        "lat",
        "lon",
        "surface",
        "snow_fraction",
        "skin_temperature",
        "soil_humidity",
    ];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            path,
            1,
            format!("header must be `{}`", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let surface: SurfaceClass = rec[2]
            .parse()
            .map_err(|e: String| Error::parse(path, row, e))?;
        let record = AncillaryRecord::new(
            parse_f64(path, row, &rec[3], "snow_fraction")?,
            parse_f64(path, row, &rec[4], "skin_temperature")?,
            parse_f64(path, row, &rec[5], "soil_humidity")?,
            surface,
        )
        .map_err(|e| Error::parse(path, row, e.to_string()))?;
        out.push(LocatedAncillary {
            lat: parse_f64(path, row, &rec[0], "lat")?,
            lon: parse_f64(path, row, &rec[1], "lon")?,
            record,
        });
    }
    Ok(out)
}

pub fn save_ancillary_csv(records: &[LocatedAncillary], path: impl AsRef<Path>) -> Result<()> {
    let header = "lat,lon,surface,snow_fraction,skin_temperature,soil_humidity".to_owned();
    let rows = records.iter().map(|r| {
        format!(
            "{},{},{},{},{},{}",
            fmt_f64(r.lat),
            fmt_f64(r.lon),
            r.record.surface.as_str(),
            fmt_f64(r.record.snow_fraction),
            fmt_f64(r.record.skin_temperature),
            fmt_f64(r.record.soil_humidity)
        )
    });
    write_lines(path.as_ref(), std::iter::once(header).chain(rows))
}

/// Writes hinge records against the union of their channels; channels a
/// record lacks are left empty.
pub fn save_hinge_csv(records: &[HingeRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut channels: Vec<f64> = records
        .iter()
        .flat_map(|r| r.wavenumbers.iter().copied())
        .collect();
    channels.sort_by(f64::total_cmp);
    channels.dedup();
    let header = ["lat".to_owned(), "lon".to_owned(), "month".to_owned()]
        .into_iter()
        .chain(channels.iter().map(|&c| fmt_f64(c)))
        .collect::<Vec<_>>()
        .join(",");
    let rows = records.iter().map(|r| {
        let mut fields = vec![fmt_f64(r.lat), fmt_f64(r.lon), r.month.to_string()];
        for &c in &channels {
            fields.push(match r.wavenumbers.iter().position(|&w| w == c) {
                Some(k) => fmt_f64(r.emissivities[k]),
                None => String::new(),
            });
        }
        fields.join(",")
    });
    write_lines(path.as_ref(), std::iter::once(header).chain(rows))
}

/// Reads hinge records: `lat,lon,month,<wavenumber>,...`. Empty cells mark
/// missing channels, which are left out of that record.
pub fn load_hinge_csv(path: impl AsRef<Path>) -> Result<Vec<HingeRecord>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 4 || &headers[0] != "lat" || &headers[1] != "lon" || &headers[2] != "month" {
        return Err(Error::parse(
            path,
            1,
            "header must be `lat,lon,month,<wavenumber>,...`",
        ));
    }
    let channels = headers
        .iter()
        .skip(3)
        .map(|h| parse_f64(path, 1, h, "channel wavenumber"))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let lat = parse_f64(path, row, &rec[0], "lat")?;
        let lon = parse_f64(path, row, &rec[1], "lon")?;
        let month: u8 = rec[2]
            .parse()
            .map_err(|_| Error::parse(path, row, format!("month: cannot parse {:?}", &rec[2])))?;
        let mut wn = Vec::new();
        let mut em = Vec::new();
        for (field, &nu) in rec.iter().skip(3).zip(&channels) {
            if field.is_empty() {
                continue;
            }
            wn.push(nu);
            em.push(parse_f64(path, row, field, "emissivity")?);
        }
        out.push(
            HingeRecord::new(wn, em, lat, lon, month)
                .map_err(|e| Error::parse(path, row, e.to_string()))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{SimplexWeights, WavenumberGrid};
    use proptest::prelude::*;

    /// Rule-by-rule transcription of the admissibility table, written
    /// independently of the JSON rules.
    fn table_oracle(label: &str, rec: &AncillaryRecord, threshold: f64) -> bool {
        let t = rec.skin_temperature;
        let h = rec.soil_humidity;
        if rec.surface == SurfaceClass::Water {
            return match label {
                "WAT" => t >= -6.0,
                "ICE" => t <= -6.0,
                _ => false,
            };
        }
        let snow = rec.snow_fraction > threshold;
        match label {
            "DES" => !snow && t >= 20.0 && h <= 20.0,
            "D&G" => !snow && t >= 0.0 && h <= 25.0,
            "GRS" => !snow && (10.0..=45.0).contains(&h),
            "DGR" => !snow && h <= 35.0,
            "DEC" => !snow && (10.0..=35.0).contains(&h),
            "CON" => !snow && (20.0..=45.0).contains(&h),
            "WAT" => !snow && t >= -6.0,
            "FSN" | "MSN" | "CSN" => snow,
            "ICE" => snow && t <= -6.0,
            "FOR" => !snow && t >= 4.0 && h >= 40.0,
            _ => unreachable!(),
        }
    }

    fn labels() -> [&'static str; 12] {
        [
            "DES", "D&G", "GRS", "DGR", "DEC", "CON", "WAT", "FSN", "MSN", "CSN", "ICE", "FOR",
        ]
    }

    fn test_set() -> ProfileSet {
        let grid = WavenumberGrid::uniform(600.0, 5.0, 161).unwrap();
        ProfileSet::new(
            labels()
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let v = (0..grid.len())
                        .map(|k| {
                            0.85 + 0.01 * i as f64
                                + 0.02 * ((k as f64) * 0.05 * (i + 1) as f64).sin()
                        })
                        .collect();
                    EmissivityProfile::new(grid.clone(), v, *l).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn snowy_cold_land_admits_snow_and_ice() {
        let t = ConstraintTable::builtin();
        let rec = AncillaryRecord::land(0.6, -10.0, 30.0).unwrap();
        assert_eq!(
            admissible_labels(&rec, &t, 0.5),
            vec!["FSN", "MSN", "CSN", "ICE"]
        );
    }

    #[test]
    fn cold_water_admits_only_ice() {
        let t = ConstraintTable::builtin();
        assert_eq!(
            admissible_labels(&AncillaryRecord::water(-10.0).unwrap(), &t, 0.5),
            vec!["ICE"]
        );
        assert_eq!(
            admissible_labels(&AncillaryRecord::water(10.0).unwrap(), &t, 0.5),
            vec!["WAT"]
        );
        // inclusive bounds: both gates open at exactly -6 C
        assert_eq!(
            admissible_labels(&AncillaryRecord::water(-6.0).unwrap(), &t, 0.5),
            vec!["WAT", "ICE"]
        );
    }

    #[test]
    fn warm_dry_land_matches_rule_by_rule_check() {
        let t = ConstraintTable::builtin();
        let rec = AncillaryRecord::land(0.0, 25.0, 15.0).unwrap();
        let got = admissible_labels(&rec, &t, 0.5);
        let expected: Vec<&str> = labels()
            .into_iter()
            .filter(|l| table_oracle(l, &rec, 0.5))
            .collect();
        assert_eq!(got, expected);
        for l in ["DES", "DGR", "GRS"] {
            assert!(got.contains(&l));
        }
        for l in ["FOR", "CON", "FSN", "MSN", "CSN", "ICE"] {
            assert!(!got.contains(&l));
        }
    }

    #[test]
    fn snow_threshold_is_strict() {
        let t = ConstraintTable::builtin();
        let rec = AncillaryRecord::land(0.5, -10.0, 30.0).unwrap();
        assert!(!admissible_labels(&rec, &t, 0.5).contains(&"FSN"));
    }

    #[test]
    fn rms_examples() {
        let grid = WavenumberGrid::uniform(600.0, 5.0, 161).unwrap();
        let p = EmissivityProfile::constant(grid, 0.99, "C").unwrap();
        let h = HingeRecord::new(vec![669.3, 884.96, 1098.9], vec![0.97; 3], 0.0, 0.0, 1).unwrap();
        assert!((rms_to_hinges(&p, &h).unwrap() - 0.02).abs() < 1e-15);
        let exact = HingeRecord::new(vec![669.3, 884.96], vec![0.99, 0.99], 0.0, 0.0, 1).unwrap();
        assert_eq!(rms_to_hinges(&p, &exact).unwrap(), 0.0);
        let far = HingeRecord::new(vec![1500.0], vec![0.9], 0.0, 0.0, 1).unwrap();
        assert!(matches!(rms_to_hinges(&p, &far), Err(Error::Range(_))));
    }

    #[test]
    fn rms_matches_direct_formula() {
        let set = test_set();
        let p = set.profile(4);
        let wn = vec![
            669.3, 826.45, 884.96, 925.93, 943.4, 1098.9, 1162.79, 1204.82, 1315.79,
        ];
        let em: Vec<f64> = wn
            .iter()
            .enumerate()
            .map(|(i, _)| 0.9 + 0.007 * i as f64)
            .collect();
        let h = HingeRecord::new(wn.clone(), em.clone(), 1.0, 2.0, 7).unwrap();
        // direct evaluation with an inline linear interpolation
        let g = p.grid().values();
        let mut s = 0.0;
        for (nu, e) in wn.iter().zip(&em) {
            let k = ((nu - g[0]) / 5.0).floor() as usize;
            let t = (nu - g[k]) / (g[k + 1] - g[k]);
            let v = p.values()[k] * (1.0 - t) + p.values()[k + 1] * t;
            s += (v - e).powi(2);
        }
        let direct = (s / wn.len() as f64).sqrt();
        assert!((rms_to_hinges(p, &h).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn water_selection_by_temperature() {
        let set = test_set();
        let t = ConstraintTable::builtin();
        let s =
            select_profile(&AncillaryRecord::water(10.0).unwrap(), None, &set, &t, 0.5).unwrap();
        assert_eq!(s.label, "WAT");
        let s =
            select_profile(&AncillaryRecord::water(-20.0).unwrap(), None, &set, &t, 0.5).unwrap();
        assert_eq!(s.label, "ICE");
    }

    #[test]
    fn zero_rms_profile_wins() {
        let set = test_set();
        let t = ConstraintTable::builtin();
        let rec = AncillaryRecord::land(0.0, 2.0, 30.0).unwrap();
        let adm = admissible_labels(&rec, &t, 0.5);
        assert!(adm.contains(&"GRS") && adm.contains(&"DGR"));
        let grs = set.by_label("GRS").unwrap();
        let wn = vec![669.3, 884.96, 943.4, 1098.9, 1162.79, 1204.82];
        let em = wn.iter().map(|&nu| grs.value_at(nu).unwrap()).collect();
        let h = HingeRecord::new(wn, em, 0.0, 0.0, 7).unwrap();
        let s = select_profile(&rec, Some(&h), &set, &t, 0.5).unwrap();
        assert_eq!(s.label, "GRS");
        assert_eq!(s.rms, Some(0.0));
    }

    #[test]
    fn empty_admissible_set_is_an_error() {
        let set = test_set();
        let t = ConstraintTable::builtin();
        // snow-free land at -20 C with humidity 50: only FOR needs >= 4 C, CON/GRS need <= 45 %
        let rec = AncillaryRecord::land(0.0, -20.0, 50.0).unwrap();
        assert!(admissible_labels(&rec, &t, 0.5).is_empty());
        assert!(matches!(
            select_profile(&rec, None, &set, &t, 0.5),
            Err(Error::NoSelection(_))
        ));
    }

    #[test]
    fn brute_force_selection_over_record_grid() {
        let set = test_set();
        let t = ConstraintTable::builtin();
        let wn = vec![
            669.3, 826.45, 884.96, 925.93, 943.4, 1098.9, 1162.79, 1204.82, 1315.79,
        ];
        let mix = crate::profiles::convex_combination(
            &set,
            &SimplexWeights::new(vec![1.0 / 12.0; 12]).unwrap(),
        )
        .unwrap();
        for snow in [0.0, 0.3, 0.7] {
            for temp in [-30.0, -6.0, 0.0, 3.0, 10.0, 25.0] {
                for hum in [0.0, 12.0, 22.0, 38.0, 60.0] {
                    for surface in [SurfaceClass::Land, SurfaceClass::Water] {
                        let rec = AncillaryRecord::new(snow, temp, hum, surface).unwrap();
                        let em: Vec<f64> = wn
                            .iter()
                            .map(|&nu| mix.value_at(nu).unwrap() - 0.001 * hum / 10.0)
                            .collect();
                        let h = HingeRecord::new(wn.clone(), em, 0.0, 0.0, 1).unwrap();
                        // exhaustive oracle
                        let mut best: Option<(usize, f64)> = None;
                        for (i, l) in labels().iter().enumerate() {
                            if !table_oracle(l, &rec, 0.5) {
                                continue;
                            }
                            let p = set.profile(i);
                            let r = (wn
                                .iter()
                                .zip(&h.emissivities)
                                .map(|(&nu, e)| (p.value_at(nu).unwrap() - e).powi(2))
                                .sum::<f64>()
                                / wn.len() as f64)
                                .sqrt();
                            if best.is_none_or(|(_, b)| r < b) {
                                best = Some((i, r));
                            }
                        }
                        match (best, select_profile(&rec, Some(&h), &set, &t, 0.5)) {
                            (Some((i, _)), Ok(s)) => assert_eq!(s.index, i, "{rec:?}"),
                            (None, Err(Error::NoSelection(_))) => {}
                            (b, s) => panic!("{rec:?}: oracle {b:?} vs {s:?}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn hinge_csv_with_missing_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("camel.csv");
        std::fs::write(
            &path,
            "lat,lon,month,669.3,884.96,1098.9\n10.0,20.0,7,0.95,,0.91\n",
        )
        .unwrap();
        let recs = load_hinge_csv(&path).unwrap();
        assert_eq!(recs[0].wavenumbers, vec![669.3, 1098.9]);
        assert_eq!(recs[0].emissivities, vec![0.95, 0.91]);

        let full = HingeRecord::new(
            vec![669.3, 884.96, 1098.9],
            vec![0.9, 0.8, 0.7],
            -5.5,
            1.25,
            2,
        )
        .unwrap();
        let written = vec![recs[0].clone(), full];
        save_hinge_csv(&written, &path).unwrap();
        assert_eq!(load_hinge_csv(&path).unwrap(), written);
    }

    #[test]
    fn ancillary_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("anc.csv");
        let recs = vec![
            LocatedAncillary {
                lat: 1.0,
                lon: 2.5,
                record: AncillaryRecord::land(0.3, 12.5, 33.0).unwrap(),
            },
            LocatedAncillary {
                lat: -1.0 / 3.0,
                lon: 0.1,
                record: AncillaryRecord::water(-8.0).unwrap(),
            },
        ];
        save_ancillary_csv(&recs, &path).unwrap();
        assert_eq!(load_ancillary_csv(&path).unwrap(), recs);
        let t = ConstraintTable::builtin();
        t.save(dir.path().join("t.json")).unwrap();
        assert_eq!(ConstraintTable::load(dir.path().join("t.json")).unwrap(), t);
    }

    #[test]
    fn ancillary_csv_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("anc.csv");
        std::fs::write(
            &path,
            "lat,lon,surface,snow_fraction,skin_temperature,soil_humidity\n0,0,land,0.2,10,30\n0,0.25,land,1.5,10,30\n",
        )
        .unwrap();
        assert!(matches!(
            load_ancillary_csv(&path),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    fn arb_record() -> impl Strategy<Value = AncillaryRecord> {
        (0.0f64..=1.0, -40.0f64..45.0, 0.0f64..=100.0, any::<bool>()).prop_map(|(s, t, h, land)| {
            AncillaryRecord::new(
                s,
                t,
                h,
                if land {
                    SurfaceClass::Land
                } else {
                    SurfaceClass::Water
                },
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn widening_ranges_never_removes_labels(rec in arb_record(), widen in 0.0f64..20.0) {
            let t = ConstraintTable::builtin();
            let mut wide = t.clone();
            for r in &mut wide.rules {
                r.temp_min_c = r.temp_min_c.map(|v| v - widen);
                r.temp_max_c = r.temp_max_c.map(|v| v + widen);
                r.humidity_min_pct = r.humidity_min_pct.map(|v| v - widen);
                r.humidity_max_pct = r.humidity_max_pct.map(|v| v + widen);
            }
            let narrow = admissible_labels(&rec, &t, 0.5);
            let wide = admissible_labels(&rec, &wide, 0.5);
            for l in narrow {
                prop_assert!(wide.contains(&l));
            }
        }

        #[test]
        fn selection_is_admissible(rec in arb_record(), offset in -0.05f64..0.05) {
            let set = test_set();
            let t = ConstraintTable::builtin();
            let wn = vec![669.3, 884.96, 1098.9];
            let h = HingeRecord::new(wn, vec![0.9 + offset; 3], 0.0, 0.0, 1).unwrap();
            let adm = admissible_labels(&rec, &t, 0.5);
            match select_profile(&rec, Some(&h), &set, &t, 0.5) {
                Ok(s) => prop_assert!(adm.contains(&s.label.as_str())),
                Err(_) => prop_assert!(adm.is_empty()),
            }
        }

        #[test]
        fn rms_is_permutation_invariant(shift in 0usize..9) {
            let set = test_set();
            let wn = [669.3, 826.45, 884.96, 925.93, 943.4, 1098.9, 1162.79, 1204.82, 1315.79];
            let em: Vec<f64> = (0..9).map(|i| 0.88 + 0.01 * i as f64).collect();
            let direct = rms_difference(set.profile(3), &wn, &em).unwrap();
            let mut wn2 = wn.to_vec();
            let mut em2 = em.clone();
            wn2.rotate_left(shift);
            em2.rotate_left(shift);
            let rotated = rms_difference(set.profile(3), &wn2, &em2).unwrap();
            prop_assert!((direct - rotated).abs() <= 1e-15);
        }
    }
}
