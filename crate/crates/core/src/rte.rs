//! Clear-sky layered radiative transfer at nadir.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64, write_lines};
use crate::profiles::{load_profile_set, EmissivityProfile};

/// First radiation constant, W m⁻² sr⁻¹ (cm⁻¹)⁻⁴.
pub const C1: f64 = 1.191042972e-8;
/// Second radiation constant, K cm.
pub const C2: f64 = 1.438776877;

/// Blackbody spectral radiance in W m⁻² sr⁻¹ (cm⁻¹)⁻¹.
pub fn planck(wavenumber: f64, temperature: f64) -> Result<f64> {
    if !(wavenumber > 0.0) || !wavenumber.is_finite() {
        return Err(Error::Range(format!(
            "wavenumber {wavenumber} must be positive"
        )));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Range(format!(
            "temperature {temperature} K must be positive"
        )));
    }
    Ok(C1 * wavenumber.powi(3) / (C2 * wavenumber / temperature).exp_m1())
}

/// Radiance after crossing one homogeneous layer.
pub fn layer_step(i0: f64, tau: f64, temperature: f64, wavenumber: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::Range(format!(
            "optical depth {tau} must be nonnegative"
        )));
    }
    let t = (-tau).exp();
    Ok(i0 * t + planck(wavenumber, temperature)? * -(-tau).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub optical_depth: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceEmissivity {
    Scalar(f64),
    Profile(EmissivityProfile),
}

impl SurfaceEmissivity {
    pub fn at(&self, wavenumber: f64) -> Result<f64> {
        match self {
            Self::Scalar(e) => Ok(*e),
            Self::Profile(p) => p.value_at(wavenumber),
        }
    }
}

/// Layers ordered bottom to top.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmosphericColumn {
    layers: Vec<Layer>,
    surface_temperature: f64,
    emissivity: SurfaceEmissivity,
}

/// The pieces of the column solution at one wavenumber:
/// `I = ε B_E τ + (1 - ε) D τ + U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnTerms {
    pub surface_planck: f64,
    /// Downwelling radiance reaching the surface.
    pub downwelling: f64,
    /// Atmospheric emission reaching the top.
    pub upwelling: f64,
    /// Transmittance of the whole column.
    pub transmittance: f64,
}

impl AtmosphericColumn {
    pub fn new(
        layers: Vec<Layer>,
        surface_temperature: f64,
        emissivity: SurfaceEmissivity,
    ) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if !(l.optical_depth >= 0.0) || !l.optical_depth.is_finite() {
                return Err(Error::Range(format!(
                    "layer {i}: optical depth {} must be finite and >= 0",
                    l.optical_depth
                )));
            }
            if !(l.temperature > 0.0) || !l.temperature.is_finite() {
                return Err(Error::Range(format!(
                    "layer {i}: temperature {} K must be positive",
                    l.temperature
                )));
            }
        }
        if !(surface_temperature > 0.0) || !surface_temperature.is_finite() {
            return Err(Error::Range(format!(
                "surface temperature {surface_temperature} K must be positive"
            )));
        }
        if let SurfaceEmissivity::Scalar(e) = emissivity {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Range(format!("emissivity {e} outside [0, 1]")));
            }
        }
        Ok(Self {
            layers,
            surface_temperature,
            emissivity,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn surface_temperature(&self) -> f64 {
        self.surface_temperature
    }

    pub fn emissivity(&self) -> &SurfaceEmissivity {
        &self.emissivity
    }

    pub fn with_emissivity(mut self, emissivity: SurfaceEmissivity) -> Result<Self> {
        if let SurfaceEmissivity::Scalar(e) = emissivity {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Range(format!("emissivity {e} outside [0, 1]")));
            }
        }
        self.emissivity = emissivity;
        Ok(self)
    }

    pub fn terms(&self, wavenumber: f64) -> Result<ColumnTerms> {
        let surface_planck = planck(wavenumber, self.surface_temperature)?;
        let mut sources = Vec::with_capacity(self.layers.len());
        let mut total_tau = 0.0;
        for l in &self.layers {
            sources.push((
                planck(wavenumber, l.temperature)?,
                (-l.optical_depth).exp(),
                -(-l.optical_depth).exp_m1(),
            ));
            total_tau += l.optical_depth;
        }
        let upwelling = sources.iter().fold(0.0, |acc, &(b, t, a)| acc * t + b * a);
        let downwelling = sources
            .iter()
            .rev()
            .fold(0.0, |acc, &(b, t, a)| acc * t + b * a);
        Ok(ColumnTerms {
            surface_planck,
            downwelling,
            upwelling,
            transmittance: (-total_tau).exp(),
        })
    }
}

fn surface_emissivity(col: &AtmosphericColumn, wavenumber: f64) -> Result<f64> {
    let e = col.emissivity.at(wavenumber)?;
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::Range(format!("emissivity {e} outside [0, 1]")));
    }
    Ok(e)
}

/// Top-of-column radiance.
pub fn column_radiance(col: &AtmosphericColumn, wavenumber: f64) -> Result<f64> {
    let e = surface_emissivity(col, wavenumber)?;
    let t = col.terms(wavenumber)?;
    let base = t.downwelling * t.transmittance + t.upwelling;
    Ok(base + e * (t.surface_planck - t.downwelling) * t.transmittance)
}

/// `∂I/∂ε`; exact because the radiance is affine in the emissivity.
pub fn emissivity_jacobian(col: &AtmosphericColumn, wavenumber: f64) -> Result<f64> {
    let t = col.terms(wavenumber)?;
    Ok((t.surface_planck - t.downwelling) * t.transmittance)
}

/// Radiance at each wavenumber.
pub fn spectrum(col: &AtmosphericColumn, wavenumbers: &[f64]) -> Result<Vec<f64>> {
    wavenumbers
        .iter()
        .map(|&nu| column_radiance(col, nu))
        .collect()
}

pub fn save_spectrum(wavenumbers: &[f64], radiance: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let lines = std::iter::once("wavenumber,radiance".to_owned()).chain(
        wavenumbers
            .iter()
            .zip(radiance)
            .map(|(&n, &r)| format!("{},{}", fmt_f64(n), fmt_f64(r))),
    );
    write_lines(path.as_ref(), lines)
}

/// Where the surface emissivity of a column file comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmissivitySource {
    Scalar(f64),
    /// A profile CSV, optionally naming one of its columns.
    File {
        path: PathBuf,
        label: Option<String>,
    },
}

impl EmissivitySource {
    /// A number, or `path[#label]` resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Self {
        if let Ok(v) = text.trim().parse::<f64>() {
            return Self::Scalar(v);
        }
        let (path, label) = match text.trim().rsplit_once('#') {
            Some((p, l)) => (p, Some(l.to_owned())),
            None => (text.trim(), None),
        };
        Self::File {
            path: base.join(path),
            label,
        }
    }

    pub fn resolve(&self) -> Result<SurfaceEmissivity> {
        match self {
            Self::Scalar(v) => Ok(SurfaceEmissivity::Scalar(*v)),
            Self::File { path, label } => {
                let set = load_profile_set(path)?;
                let profile = match label {
                    Some(l) => set.by_label(l).ok_or_else(|| {
                        Error::invalid(
                            "emissivity",
                            format!("no profile {l:?} in {}", path.display()),
                        )
                    })?,
                    None if set.len() == 1 => set.profile(0),
                    None => {
                        return Err(Error::invalid(
                            "emissivity",
                            format!(
                                "{} holds {} profiles; name one with #label",
                                path.display(),
                                set.len()
                            ),
                        ))
                    }
                };
                Ok(SurfaceEmissivity::Profile(profile.clone()))
            }
        }
    }
}

/// A column file: `surface_temperature,<K>` and `emissivity,<number|path[#label]>`
/// lines, then a `tau,temperature` header and one row per layer, bottom to top.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnFile {
    pub layers: Vec<Layer>,
    pub surface_temperature: f64,
    pub emissivity: Option<EmissivitySource>,
}

impl ColumnFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut surface_temperature = None;
        let mut emissivity = None;
        let mut layers = Vec::new();
        let mut in_layers = false;
        for (n, line) in text.lines().enumerate() {
            let row = n + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if in_layers {
                if fields.len() != 2 {
                    return Err(Error::parse(path, row, "layer rows need `tau,temperature`"));
                }
                layers.push(Layer {
                    optical_depth: parse_f64(path, row, fields[0], "tau")?,
                    temperature: parse_f64(path, row, fields[1], "temperature")?,
                });
                continue;
            }
            match fields.as_slice() {
                ["surface_temperature", v] => {
                    surface_temperature = Some(parse_f64(path, row, v, "surface_temperature")?)
                }
                ["emissivity", v] => emissivity = Some(EmissivitySource::parse(v, base)),
                ["tau", "temperature"] => in_layers = true,
                _ => return Err(Error::parse(path, row, format!("unexpected line {line:?}"))),
            }
        }
        let surface_temperature = surface_temperature
            .ok_or_else(|| Error::parse(path, 0, "missing surface_temperature"))?;
        if !in_layers {
            return Err(Error::parse(
                path,
                0,
                "missing `tau,temperature` layer table",
            ));
        }
        Ok(Self {
            layers,
            surface_temperature,
            emissivity,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut lines = vec![format!(
            "surface_temperature,{}",
            fmt_f64(self.surface_temperature)
        )];
        match &self.emissivity {
            Some(EmissivitySource::Scalar(v)) => lines.push(format!("emissivity,{}", fmt_f64(*v))),
            Some(EmissivitySource::File { path, label }) => lines.push(format!(
                "emissivity,{}{}",
                path.display(),
                label.as_ref().map(|l| format!("#{l}")).unwrap_or_default()
            )),
            None => {}
        }
        lines.push("tau,temperature".to_owned());
        lines.extend(
            self.layers
                .iter()
                .map(|l| format!("{},{}", fmt_f64(l.optical_depth), fmt_f64(l.temperature))),
        );
        write_lines(path.as_ref(), lines)
    }

    /// Builds the column, with `override_source` taking precedence over the
    /// file's own emissivity line.
    pub fn column(&self, override_source: Option<&EmissivitySource>) -> Result<AtmosphericColumn> {
        let source = override_source
            .or(self.emissivity.as_ref())
            .ok_or_else(|| Error::invalid("column", "no surface emissivity given"))?;
        AtmosphericColumn::new(
            self.layers.clone(),
            self.surface_temperature,
            source.resolve()?,
        )
    }
}
