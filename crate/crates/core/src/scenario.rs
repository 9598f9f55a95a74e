//! Scenario configuration and the forward simulation pipeline
//! (source -> heralded density -> dip -> report).
//!
//! Configs are flat `key = value` text with dotted keys:
//!
//! ```text
//! # scenario I
//! pump.width_nm = 2.0            # intensity FWHM, converted at pump.lambda0_nm (default 398)
//! phase_matching.width_nm = 0.8  # default anchor 796 nm
//! phase_matching.theta_deg = 55
//! filters.signal.width_nm = 1.0
//! filters.idler = open
//! reference.width_nm = 1.0
//! ```
//!
//! Any width may instead be given as `<section>.width = <value>` plus
//! `<section>.convention = <name>[@lambda0_nm]`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::estimator::{analyze, dip_width_analytic, fitted_sigma_from_delta, AnalysisInput, DipSamples, PurityReport, SpectrumInput};
use crate::grid::DelayGrid;
use crate::hom::{coincidence_curve, interference_profile, visibility, CoincidenceCurve, DipCurve, PhotonStatistics};
use crate::pdc::{
    auto_grids, build_jsa, heralded_density, pm_from_material, GaussianFilter, GridPolicy, JointSpectralAmplitude,
    PhaseMatchingSpec, PumpEnvelope,
};
use crate::spectral::{gaussian_reference, marginal_spectrum, purity_direct, ComplexSpectrum, MarginalSpectrum, SpectralDensity};
use crate::width::{WidthConvention, WidthSpec};

pub const PUMP_LAMBDA0_NM: f64 = 398.0;
pub const PAIR_LAMBDA0_NM: f64 = 796.0;
pub const DEFAULT_DELAY_POINTS: usize = 401;
/// Auto delay range, in fitted-sigma units of the expected dip.
pub const DELAY_HALF_SPAN_SIGMAS: f64 = 10.0;
/// Largest `I(tau)` left on the outer delays before the auto range is widened.
pub const DELAY_EDGE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}field `{field}`: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Parsed `key = value` entries with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (k, raw_line) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::new(Some(line), content, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::new(Some(line), key, "malformed key"));
            }
            if value.is_empty() {
                return Err(ConfigError::new(Some(line), key, "missing value"));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (line, value.to_string())) {
                return Err(ConfigError::new(Some(line), key, format!("duplicate key (first set on line {first})")));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Override (or add) an entry; used by parameter sweeps.
    pub fn set(&mut self, key: &str, value: &str) {
        let line = self.entries.get(key).map(|(l, _)| *l).unwrap_or(0);
        self.entries.insert(key.to_string(), (line, value.to_string()));
    }

    /// Canonical `key = value` lines in key order.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, (_, v))| format!("{k} = {v}\n")).collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

struct Reader {
    entries: BTreeMap<String, (usize, String)>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &str) -> std::result::Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| ConfigError::new(Some(line), key, format!("`{v}` is not a number"))),
        }
    }

    fn usize(&mut self, key: &str) -> std::result::Result<Option<usize>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| ConfigError::new(Some(line), key, format!("`{v}` is not a positive integer"))),
        }
    }

    fn bool(&mut self, key: &str) -> std::result::Result<Option<bool>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(ConfigError::new(Some(line), key, format!("`{v}` is not a boolean"))),
            },
        }
    }

    fn width(&mut self, section: &str, default_lambda0: f64) -> std::result::Result<Option<WidthSpec>, ConfigError> {
        let nm_key = format!("{section}.width_nm");
        let value_key = format!("{section}.width");
        let conv_key = format!("{section}.convention");
        let l0_key = format!("{section}.lambda0_nm");
        let nm = self.f64(&nm_key)?;
        let value = self.f64(&value_key)?;
        let conv = self.take(&conv_key);
        let lambda0 = self.f64(&l0_key)?;
        let invalid = |key: &str, e: Error| ConfigError::new(None, key, e.to_string());
        match (nm, value) {
            (Some(_), Some(_)) => Err(ConfigError::new(None, &nm_key, format!("conflicts with `{value_key}`"))),
            (Some(w), None) => {
                if let Some((line, _)) = conv {
                    return Err(ConfigError::new(Some(line), &conv_key, format!("not allowed with `{nm_key}`")));
                }
                WidthSpec::fwhm_nm(w, lambda0.unwrap_or(default_lambda0))
                    .map(Some)
                    .map_err(|e| invalid(&nm_key, e))
            }
            (None, Some(w)) => {
                let Some((line, name)) = conv else {
                    return Err(ConfigError::new(None, &conv_key, format!("required with `{value_key}`")));
                };
                let parsed = if name.trim() == "fwhm_intensity_nm" {
                    WidthConvention::parse(&name, Some(lambda0.unwrap_or(default_lambda0)))
                } else {
                    name.parse()
                };
                let convention = parsed.map_err(|e| ConfigError::new(Some(line), &conv_key, e.to_string()))?;
                WidthSpec::new(w, convention).map(Some).map_err(|e| invalid(&value_key, e))
            }
            (None, None) => {
                if let Some((line, _)) = conv {
                    return Err(ConfigError::new(Some(line), &conv_key, format!("set without `{value_key}`")));
                }
                Ok(None)
            }
        }
    }

    fn filter(&mut self, section: &str) -> std::result::Result<Option<WidthSpec>, ConfigError> {
        let open = match self.take(section) {
            None => false,
            Some((_, v)) if v.eq_ignore_ascii_case("open") || v.eq_ignore_ascii_case("none") => true,
            Some((line, v)) => {
                return Err(ConfigError::new(
                    Some(line),
                    section,
                    format!("`{v}` is not `open`; give `{section}.width_nm` for a filter"),
                ))
            }
        };
        let spec = self.width(section, PAIR_LAMBDA0_NM)?;
        if open && spec.is_some() {
            return Err(ConfigError::new(None, section, "declared open but also given a width"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchingConfig {
    pub theta_deg: Option<f64>,
    pub width: Option<WidthSpec>,
    pub kappa_s: Option<f64>,
    pub kappa_i: Option<f64>,
    pub length_m: Option<f64>,
    pub side_lobes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub pump: WidthSpec,
    pub phase_matching: PhaseMatchingConfig,
    pub filter_signal: Option<WidthSpec>,
    pub filter_idler: Option<WidthSpec>,
    pub reference: WidthSpec,
    pub grids: GridPolicy,
    pub delay_points: usize,
    /// Full delay span (s); automatic when absent.
    pub delay_span_s: Option<f64>,
    pub statistics: Option<PhotonStatistics>,
    pub gaussian_pm: bool,
    pub conditioned: bool,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        ScenarioConfig::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> std::result::Result<Self, ConfigError> {
        let mut r = Reader {
            entries: raw.entries.clone(),
        };
        let pump = r
            .width("pump", PUMP_LAMBDA0_NM)?
            .ok_or_else(|| ConfigError::new(None, "pump.width_nm", "pump width is required"))?;
        let pm = PhaseMatchingConfig {
            theta_deg: r.f64("phase_matching.theta_deg")?,
            width: r.width("phase_matching", PAIR_LAMBDA0_NM)?,
            kappa_s: r.f64("phase_matching.kappa_s")?,
            kappa_i: r.f64("phase_matching.kappa_i")?,
            length_m: r.f64("phase_matching.length_m")?,
            side_lobes: r.f64("phase_matching.side_lobes")?,
        };
        let filter_signal = r.filter("filters.signal")?;
        let filter_idler = r.filter("filters.idler")?;
        let reference = r
            .width("reference", PAIR_LAMBDA0_NM)?
            .ok_or_else(|| ConfigError::new(None, "reference.width_nm", "reference width is required"))?;

        let defaults = GridPolicy::default();
        let min_points_signal = r.usize("grids.n_points")?.unwrap_or(defaults.min_points_signal);
        let min_points_idler = r.usize("grids.n_points_idler")?.unwrap_or(defaults.min_points_idler);
        let sigmas = r.f64("grids.span_multiplier")?.unwrap_or(defaults.sigmas);
        if min_points_signal < crate::grid::MIN_FREQUENCY_POINTS || min_points_idler < crate::grid::MIN_FREQUENCY_POINTS {
            return Err(ConfigError::new(None, "grids.n_points", "grids need at least 16 points"));
        }
        if !(sigmas >= 3.0) {
            return Err(ConfigError::new(None, "grids.span_multiplier", "must be at least 3"));
        }
        let delay_points = r.usize("delays.n")?.unwrap_or(DEFAULT_DELAY_POINTS);
        if delay_points < 16 {
            return Err(ConfigError::new(None, "delays.n", "need at least 16 delays"));
        }
        let delay_span_s = r.f64("delays.span_s")?;
        if let Some(s) = delay_span_s {
            if !(s > 0.0) {
                return Err(ConfigError::new(None, "delays.span_s", "must be > 0"));
            }
        }

        let stats = [
            r.f64("statistics.p0")?,
            r.f64("statistics.p1")?,
            r.f64("statistics.p2")?,
            r.f64("statistics.beta_sq")?,
        ];
        let statistics = match stats {
            [None, None, None, None] => None,
            [Some(p0), Some(p1), Some(p2), Some(b)] => Some(
                PhotonStatistics::new(p0, p1, p2, b)
                    .map_err(|e| ConfigError::new(None, "statistics", e.to_string()))?,
            ),
            _ => {
                return Err(ConfigError::new(
                    None,
                    "statistics",
                    "give all of p0, p1, p2 and beta_sq, or none",
                ))
            }
        };
        let gaussian_pm = r.bool("toggles.gaussian_pm")?.unwrap_or(false);
        let conditioned = r.bool("toggles.conditioned")?.unwrap_or(true);

        if let Some((key, (line, _))) = r.entries.into_iter().next() {
            return Err(ConfigError::new(Some(line), key, "unknown field"));
        }

        let config = ScenarioConfig {
            pump,
            phase_matching: pm,
            filter_signal,
            filter_idler,
            reference,
            grids: GridPolicy {
                min_points_signal,
                min_points_idler,
                sigmas,
            },
            delay_points,
            delay_span_s,
            statistics,
            gaussian_pm,
            conditioned,
        };
        config.phase_matching_spec()?;
        Ok(config)
    }

    pub fn pump_envelope(&self) -> Result<PumpEnvelope> {
        PumpEnvelope::from_width(&self.pump)
    }

    pub fn phase_matching_spec(&self) -> std::result::Result<PhaseMatchingSpec, ConfigError> {
        let c = &self.phase_matching;
        let field_err = |field: &str, e: Error| ConfigError::new(None, field, e.to_string());
        let mut pm = match (c.kappa_s, c.kappa_i, c.length_m) {
            (Some(ks), Some(ki), Some(l)) => {
                if c.width.is_some() || c.theta_deg.is_some() {
                    return Err(ConfigError::new(
                        None,
                        "phase_matching",
                        "give either (theta_deg, width) or (kappa_s, kappa_i, length_m), not both",
                    ));
                }
                pm_from_material(ks, ki, l).map_err(|e| field_err("phase_matching.kappa_s", e))?
            }
            (None, None, None) => {
                let theta = c
                    .theta_deg
                    .ok_or_else(|| ConfigError::new(None, "phase_matching.theta_deg", "required"))?;
                let width = c
                    .width
                    .ok_or_else(|| ConfigError::new(None, "phase_matching.width_nm", "required"))?;
                PhaseMatchingSpec::from_width(theta, &width).map_err(|e| field_err("phase_matching.theta_deg", e))?
            }
            _ => {
                return Err(ConfigError::new(
                    None,
                    "phase_matching",
                    "kappa_s, kappa_i and length_m must be given together",
                ))
            }
        };
        pm = pm.with_gaussian(self.gaussian_pm);
        if let Some(n) = c.side_lobes {
            pm = pm.with_side_lobes(n).map_err(|e| field_err("phase_matching.side_lobes", e))?;
        }
        Ok(pm)
    }

    pub fn filters(&self) -> Result<(GaussianFilter, GaussianFilter)> {
        let make = |w: &Option<WidthSpec>| match w {
            None => Ok(GaussianFilter::Open),
            Some(w) => GaussianFilter::from_width(w),
        };
        Ok((make(&self.filter_signal)?, make(&self.filter_idler)?))
    }

    pub fn sigma_beta(&self) -> Result<f64> {
        self.reference.sigma_intensity_rad_s()
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pump {}, reference {}", self.pump, self.reference)
    }
}

/// Everything produced by one forward run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub jsa: JointSpectralAmplitude,
    pub density: SpectralDensity,
    pub reference: ComplexSpectrum,
    pub marginal: MarginalSpectrum,
    pub dip: DipCurve,
    pub coincidences: Option<CoincidenceCurve>,
    /// Numerical overlap, the peak of `I(tau)`.
    pub overlap: f64,
    pub report: PurityReport,
}

pub fn simulate(config: &ScenarioConfig) -> Result<Simulation> {
    let pump = config.pump_envelope()?;
    let pm = config
        .phase_matching_spec()
        .map_err(|e| Error::InvalidParameter {
            name: "phase_matching",
            reason: e.to_string(),
        })?;
    let (filter_s, filter_i) = config.filters()?;
    let filter_i = if config.conditioned { filter_i } else { GaussianFilter::Open };
    let sigma_beta = config.sigma_beta()?;

    let (grid_s, grid_i) = auto_grids(&pump, &pm, &filter_s, &filter_i, Some(sigma_beta), &config.grids)?;
    let jsa = build_jsa(&pump, &pm, &grid_s, &grid_i)?;
    let density = heralded_density(&jsa, &filter_s, &filter_i, config.conditioned)?;
    let p_direct = purity_direct(&density)?;
    let reference = gaussian_reference(&grid_s, sigma_beta)?;
    let marginal = marginal_spectrum(&density)?;
    let sigma_g1 = marginal.sigma_g1();

    let center = pm.dip_center();
    let dip = match config.delay_span_s {
        Some(span) => interference_profile(&density, &reference, &DelayGrid::new(center, span, config.delay_points)?)?,
        None => {
            let delta = dip_width_analytic(p_direct * sigma_g1, sigma_beta)?;
            let mut half_span = DELAY_HALF_SPAN_SIGMAS * fitted_sigma_from_delta(delta);
            let mut attempt = 0;
            loop {
                let delays = DelayGrid::new(center, 2.0 * half_span, config.delay_points)?;
                let dip = interference_profile(&density, &reference, &delays)?;
                if dip.plateau_residual() <= DELAY_EDGE_TOLERANCE || attempt == 3 {
                    break dip;
                }
                half_span *= 2.0;
                attempt += 1;
            }
        }
    };
    let overlap = dip.peak();

    let coincidences = match &config.statistics {
        Some(stats) => Some(coincidence_curve(&dip, stats)?),
        None => None,
    };
    let measured_visibility = match &coincidences {
        Some(c) => Some(visibility(c)?.ratio_form),
        None => None,
    };
    let delays = dip.delay_points();
    let report = analyze(&AnalysisInput {
        dip: DipSamples::Interference {
            delay_s: &delays,
            values: dip.values(),
        },
        spectrum: SpectrumInput::Sigma(sigma_g1),
        sigma_beta,
        statistics: config.statistics,
        visibility: measured_visibility,
        p_direct: Some(p_direct),
    })?;

    Ok(Simulation {
        jsa,
        density,
        reference,
        marginal,
        dip,
        coincidences,
        overlap,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
pump.width_nm = 2.0
phase_matching.width_nm = 0.8
phase_matching.theta_deg = 55   # ridge slope
filters.signal.width_nm = 1.0
filters.idler = open
reference.width_nm = 1.0
";

    #[test]
    fn parses_with_default_anchors() {
        let c = ScenarioConfig::parse(BASE).unwrap();
        assert_eq!(c.pump.convention, WidthConvention::FwhmIntensityNm { lambda0_nm: 398.0 });
        assert_eq!(c.reference.convention, WidthConvention::FwhmIntensityNm { lambda0_nm: 796.0 });
        assert!(c.filter_idler.is_none());
        assert!(c.conditioned && !c.gaussian_pm);
        assert_eq!(c.delay_points, DEFAULT_DELAY_POINTS);
    }

    #[test]
    fn explicit_convention() {
        let text = BASE.replace("pump.width_nm = 2.0", "pump.width = 1.4e13\npump.convention = sigma_amplitude_rad_s");
        let c = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(c.pump.convention, WidthConvention::SigmaAmplitudeRadS);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let text = BASE.replace("pump.width_nm = 2.0", "pump.width_nm = 2.0nm");
        let e = ScenarioConfig::parse(&text).unwrap_err();
        assert_eq!(e.field, "pump.width_nm");
        assert_eq!(e.line, Some(1));
        let text = format!("{BASE}pump.colour = blue\n");
        let e = ScenarioConfig::parse(&text).unwrap_err();
        assert_eq!(e.field, "pump.colour");
        let text = BASE.replace("pump.width_nm = 2.0", "pump.width = 2\npump.convention = furlongs");
        let e = ScenarioConfig::parse(&text).unwrap_err();
        assert_eq!(e.field, "pump.convention");
        assert!(e.to_string().contains("line 2"));
        let e = ScenarioConfig::parse(&format!("{BASE}reference.width_nm = 2\n")).unwrap_err();
        assert!(e.message.contains("duplicate"));
        let e = ScenarioConfig::parse(&format!("{BASE}statistics.p0 = 0.9\n")).unwrap_err();
        assert_eq!(e.field, "statistics");
    }

    #[test]
    fn material_or_angle_not_both() {
        let text = format!("{BASE}phase_matching.kappa_s = 1e-10\nphase_matching.kappa_i = 1e-10\nphase_matching.length_m = 0.01\n");
        assert!(ScenarioConfig::parse(&text).is_err());
    }

    #[test]
    fn raw_override() {
        let mut raw = RawConfig::parse(BASE).unwrap();
        raw.set("phase_matching.width_nm", "1.2");
        let c = ScenarioConfig::from_raw(&raw).unwrap();
        assert_eq!(c.phase_matching.width.unwrap().value, 1.2);
        assert!(raw.canonical().starts_with("filters.idler = open\n"));
    }
}
