//! Spectral width bookkeeping.
//!
//! Widths are quoted in several conventions: intensity FWHM in nanometres at a
//! carrier wavelength, intensity FWHM or standard deviation in angular frequency,
//! or the standard deviation of a Gaussian *amplitude* `exp(-nu^2 / (2 sigma^2))`.
//! Internally every width is carried as an intensity-level standard deviation in
//! rad/s; [`convert_width`] moves between conventions at the boundary.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ratio FWHM / sigma for a Gaussian intensity profile, `2 sqrt(2 ln 2)`.
pub fn fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * LN_2).sqrt()
}

/// Angular-frequency interval corresponding to a wavelength interval around `lambda0`,
/// linearized to first order: `2 pi c dlambda / lambda0^2`.
pub fn nm_to_rad_s(delta_nm: f64, lambda0_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * (delta_nm * 1e-9) / (lambda0_nm * 1e-9).powi(2)
}

/// Inverse of [`nm_to_rad_s`].
pub fn rad_s_to_nm(delta_omega: f64, lambda0_nm: f64) -> f64 {
    delta_omega * (lambda0_nm * 1e-9).powi(2) / (2.0 * PI * SPEED_OF_LIGHT) * 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "convention", rename_all = "snake_case")]
pub enum WidthConvention {
    /// Intensity FWHM in nm at carrier wavelength `lambda0_nm`.
    FwhmIntensityNm { lambda0_nm: f64 },
    FwhmIntensityRadS,
    SigmaIntensityRadS,
    /// Standard deviation of a Gaussian amplitude `exp(-nu^2/(2 sigma^2))`.
    SigmaAmplitudeRadS,
}

impl WidthConvention {
    pub fn name(&self) -> &'static str {
        match self {
            WidthConvention::FwhmIntensityNm { .. } => "fwhm_intensity_nm",
            WidthConvention::FwhmIntensityRadS => "fwhm_intensity_rad_s",
            WidthConvention::SigmaIntensityRadS => "sigma_intensity_rad_s",
            WidthConvention::SigmaAmplitudeRadS => "sigma_amplitude_rad_s",
        }
    }

    /// Parse a convention name; nm-based conventions need a carrier wavelength.
    pub fn parse(name: &str, lambda0_nm: Option<f64>) -> Result<Self> {
        match name.trim() {
            "fwhm_intensity_nm" => match lambda0_nm {
                Some(l) => {
                    require_positive("lambda0_nm", l)?;
                    Ok(WidthConvention::FwhmIntensityNm { lambda0_nm: l })
                }
                None => Err(Error::InvalidParameter {
                    name: "lambda0_nm",
                    reason: "nm-based width needs a carrier wavelength".into(),
                }),
            },
            "fwhm_intensity_rad_s" => Ok(WidthConvention::FwhmIntensityRadS),
            "sigma_intensity_rad_s" => Ok(WidthConvention::SigmaIntensityRadS),
            "sigma_amplitude_rad_s" => Ok(WidthConvention::SigmaAmplitudeRadS),
            other => Err(Error::InvalidParameter {
                name: "convention",
                reason: format!(
                    "unknown width convention `{other}` (expected fwhm_intensity_nm, \
                     fwhm_intensity_rad_s, sigma_intensity_rad_s or sigma_amplitude_rad_s)"
                ),
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        if let WidthConvention::FwhmIntensityNm { lambda0_nm } = self {
            require_positive("lambda0_nm", *lambda0_nm)?;
        }
        Ok(())
    }
}

impl fmt::Display for WidthConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WidthConvention::FwhmIntensityNm { lambda0_nm } => {
                write!(f, "fwhm_intensity_nm@{lambda0_nm}")
            }
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for WidthConvention {
    type Err = Error;

    /// Accepts `name` or `name@lambda0_nm`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('@') {
            Some((name, l0)) => {
                let l0: f64 = l0.trim().parse().map_err(|_| Error::InvalidParameter {
                    name: "lambda0_nm",
                    reason: format!("cannot parse `{l0}` as a wavelength"),
                })?;
                WidthConvention::parse(name, Some(l0))
            }
            None => WidthConvention::parse(s, None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSpec {
    pub value: f64,
    #[serde(flatten)]
    pub convention: WidthConvention,
}

impl WidthSpec {
    pub fn new(value: f64, convention: WidthConvention) -> Result<Self> {
        require_positive("width", value)?;
        convention.validate()?;
        Ok(WidthSpec { value, convention })
    }

    pub fn fwhm_nm(value: f64, lambda0_nm: f64) -> Result<Self> {
        WidthSpec::new(value, WidthConvention::FwhmIntensityNm { lambda0_nm })
    }

    pub fn sigma_intensity(value: f64) -> Result<Self> {
        WidthSpec::new(value, WidthConvention::SigmaIntensityRadS)
    }

    pub fn sigma_amplitude(value: f64) -> Result<Self> {
        WidthSpec::new(value, WidthConvention::SigmaAmplitudeRadS)
    }

    /// Intensity-level standard deviation in rad/s.
    pub fn sigma_intensity_rad_s(&self) -> Result<f64> {
        require_positive("width", self.value)?;
        self.convention.validate()?;
        let sigma = match self.convention {
            WidthConvention::FwhmIntensityNm { lambda0_nm } => {
                nm_to_rad_s(self.value, lambda0_nm) / fwhm_per_sigma()
            }
            WidthConvention::FwhmIntensityRadS => self.value / fwhm_per_sigma(),
            WidthConvention::SigmaIntensityRadS => self.value,
            WidthConvention::SigmaAmplitudeRadS => self.value / 2f64.sqrt(),
        };
        Ok(sigma)
    }

    /// Amplitude-level standard deviation in rad/s (`sqrt(2)` times the intensity sigma).
    pub fn sigma_amplitude_rad_s(&self) -> Result<f64> {
        Ok(self.sigma_intensity_rad_s()? * 2f64.sqrt())
    }

    pub fn to(&self, target: WidthConvention) -> Result<WidthSpec> {
        convert_width(self, target)
    }
}

impl fmt::Display for WidthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.convention)
    }
}

impl FromStr for WidthSpec {
    type Err = Error;

    /// Accepts `<value> <convention>` or `<value>:<convention>`, e.g. `1.0 fwhm_intensity_nm@796`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (value, convention) = s
            .split_once(|c: char| c.is_whitespace() || c == ':')
            .ok_or_else(|| Error::InvalidParameter {
                name: "width",
                reason: format!("expected `<value> <convention>`, got `{s}`"),
            })?;
        let value: f64 = value.trim().parse().map_err(|_| Error::InvalidParameter {
            name: "width",
            reason: format!("cannot parse `{value}` as a number"),
        })?;
        WidthSpec::new(value, convention.trim().parse()?)
    }
}

/// Express `spec` in the `target` convention.
pub fn convert_width(spec: &WidthSpec, target: WidthConvention) -> Result<WidthSpec> {
    target.validate()?;
    let sigma = spec.sigma_intensity_rad_s()?;
    let value = match target {
        WidthConvention::FwhmIntensityNm { lambda0_nm } => {
            rad_s_to_nm(sigma * fwhm_per_sigma(), lambda0_nm)
        }
        WidthConvention::FwhmIntensityRadS => sigma * fwhm_per_sigma(),
        WidthConvention::SigmaIntensityRadS => sigma,
        WidthConvention::SigmaAmplitudeRadS => sigma * 2f64.sqrt(),
    };
    Ok(WidthSpec {
        value,
        convention: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    #[allow(clippy::approx_constant)]
    fn one_nm_at_796_in_rad_s() {
        // Hand computation: 2*pi*299792458*1e-9 / (796e-9)^2
        let hand = 2.0 * 3.141_592_653_589_793 * 299_792_458.0 * 1e-9 / (796e-9 * 796e-9);
        let w = WidthSpec::fwhm_nm(1.0, 796.0).unwrap();
        let out = w.to(WidthConvention::FwhmIntensityRadS).unwrap();
        assert_relative_eq!(out.value, hand, max_relative = 1e-12);
        assert!((out.value - 2.975e12).abs() < 1e-3 * 2.975e12, "{}", out.value);
    }

    #[test]
    fn two_nm_at_398_in_rad_s() {
        let w = WidthSpec::fwhm_nm(2.0, 398.0).unwrap();
        let out = w.to(WidthConvention::FwhmIntensityRadS).unwrap();
        assert!((out.value - 2.380e13).abs() < 1e-3 * 2.380e13, "{}", out.value);
        assert_relative_eq!(out.value, 2.378_287_880_746_5e13, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_fwhm_of_unit_sigma() {
        let w = WidthSpec::sigma_intensity(1.0).unwrap();
        let out = w.to(WidthConvention::FwhmIntensityRadS).unwrap();
        assert!((out.value - 2.3548).abs() < 1e-4);
    }

    #[test]
    fn amplitude_sigma_halves_variance() {
        let w = WidthSpec::sigma_amplitude(2.0).unwrap();
        assert_relative_eq!(w.sigma_intensity_rad_s().unwrap(), 2.0 / 2f64.sqrt());
        // Pump convention: intensity FWHM = 2 sigma_amp sqrt(ln 2).
        let fwhm = w.to(WidthConvention::FwhmIntensityRadS).unwrap().value;
        assert_relative_eq!(fwhm, 2.0 * 2.0 * LN_2.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn nm_round_trip() {
        let w = WidthSpec::fwhm_nm(0.8, 796.0).unwrap();
        let back = w
            .to(WidthConvention::SigmaAmplitudeRadS)
            .unwrap()
            .to(WidthConvention::FwhmIntensityNm { lambda0_nm: 796.0 })
            .unwrap();
        assert_relative_eq!(back.value, 0.8, max_relative = 1e-13);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(WidthSpec::fwhm_nm(-1.0, 796.0).is_err());
        assert!(WidthSpec::fwhm_nm(1.0, 0.0).is_err());
        assert!(WidthSpec::sigma_intensity(0.0).is_err());
        assert!(WidthConvention::parse("fwhm_intensity_nm", None).is_err());
        assert!(WidthConvention::parse("furlongs", None).is_err());
        let w = WidthSpec::sigma_intensity(1.0).unwrap();
        assert!(w
            .to(WidthConvention::FwhmIntensityNm { lambda0_nm: -3.0 })
            .is_err());
    }

    #[test]
    fn parses_anchor_suffix() {
        let c: WidthConvention = "fwhm_intensity_nm@398".parse().unwrap();
        assert_eq!(c, WidthConvention::FwhmIntensityNm { lambda0_nm: 398.0 });
        let c: WidthConvention = "sigma_amplitude_rad_s".parse().unwrap();
        assert_eq!(c, WidthConvention::SigmaAmplitudeRadS);
        let w: WidthSpec = "1.0 fwhm_intensity_nm@796".parse().unwrap();
        assert_eq!(w, WidthSpec::fwhm_nm(1.0, 796.0).unwrap());
        assert_eq!(w.to_string().parse::<WidthSpec>().unwrap(), w);
        assert_eq!("2e12:sigma_intensity_rad_s".parse::<WidthSpec>().unwrap().value, 2e12);
        assert!("1.0".parse::<WidthSpec>().is_err());
        assert!("1.0 fwhm_intensity_nm".parse::<WidthSpec>().is_err());
    }
}
