use approx::assert_relative_eq;

use hom_purity::estimator::{coherence_time_scale, dip_width_analytic, overlap_analytic, overlap_from_visibility};
use hom_purity::hom::BackgroundTerms;
use hom_purity::pdc::{pm_from_material, GaussianFilter, PhaseMatchingSpec, PumpEnvelope};
use hom_purity::scenario::{simulate, ScenarioConfig, Simulation};
use hom_purity::{
    background_terms, build_jsa, gaussian_model_density, gaussian_reference, heralded_density, marginal_spectrum,
    overlap_at_zero, purity_direct, temporal_correlation, DelayGrid, FrequencyGrid, PhotonStatistics, WidthSpec,
};

const SCENARIO_I: &str = include_str!("../../../scenarios/scenario_i.conf");
const SCENARIO_I_IDLER: &str = include_str!("../../../scenarios/scenario_i_idler_filter.conf");

fn run(text: &str) -> Simulation {
    simulate(&ScenarioConfig::parse(text).unwrap()).unwrap()
}

fn model_grid(s1: f64, s2: f64) -> FrequencyGrid {
    let half = 8.0 * s1;
    let step = s2 / 3.0;
    FrequencyGrid::centered(half, (2.0 * half / step).ceil() as usize + 1).unwrap()
}

#[test]
fn gaussian_model_purity_is_width_ratio() {
    for ratio in [0.1, 0.25, 0.5, 0.9, 1.0] {
        let g = gaussian_model_density(&model_grid(1.0, ratio), 1.0, ratio, 0.0).unwrap();
        assert_relative_eq!(purity_direct(&g).unwrap(), ratio, epsilon = 1e-3);
        let m = marginal_spectrum(&g).unwrap();
        assert_relative_eq!(m.sigma_g1(), 1.0, max_relative = 0.01);
    }
}

#[test]
fn numeric_overlap_matches_closed_form() {
    // sigma_g1 = sigma_beta, P = 0.5.
    let (s, sb) = (1.0e12, 1.0e12);
    let grid = model_grid(s, 0.5 * s);
    let g = gaussian_model_density(&grid, s, 0.5 * s, 0.0).unwrap();
    let u = gaussian_reference(&grid, sb).unwrap();
    let numeric = overlap_at_zero(&g, &u).unwrap();
    let delta = dip_width_analytic(0.5 * s, sb).unwrap();
    let closed = overlap_analytic(s, sb, delta).unwrap();
    assert_relative_eq!(numeric, closed, epsilon = 1e-3);
    assert_relative_eq!(closed, (0.4f64).sqrt(), epsilon = 1e-3);
}

#[test]
fn consistency_triangle_over_family() {
    for (s1, p, sb) in [(1.0e12, 0.3, 1.5e12), (1.5e12, 0.7, 0.9e12), (0.9e12, 1.0, 0.9e12)] {
        let grid = FrequencyGrid::centered(8.0 * f64::max(s1, sb), 1201).unwrap();
        let g = gaussian_model_density(&grid, s1, s1 * p, 0.0).unwrap();
        let u = gaussian_reference(&grid, sb).unwrap();
        let delta = dip_width_analytic(s1 * p, sb).unwrap();
        let t = overlap_analytic(s1, sb, delta).unwrap();
        assert_relative_eq!(t, overlap_at_zero(&g, &u).unwrap(), epsilon = 1e-3);
    }
}

#[test]
fn swapping_roles_transposes_the_jsa() {
    let pump = PumpEnvelope::new(1.2).unwrap();
    let grid_s = FrequencyGrid::centered(8.0, 161).unwrap();
    let grid_i = FrequencyGrid::centered(7.0, 141).unwrap();
    for pm in [
        PhaseMatchingSpec::new(55.0, 0.9).unwrap(),
        PhaseMatchingSpec::new(-45.0, 1.5).unwrap(),
        pm_from_material(0.3, 0.8, 2.0).unwrap(),
    ] {
        let a = build_jsa(&pump, &pm, &grid_s, &grid_i).unwrap().transposed();
        let b = build_jsa(&pump, &pm.swapped(), &grid_i, &grid_s).unwrap();
        let diff = (a.values() - b.values()).mapv(|v| v.norm()).fold(0.0f64, |m, &v| m.max(v));
        assert!(diff < 1e-12, "max difference {diff}");
    }
}

#[test]
fn open_idler_conditioning_is_irrelevant() {
    let pump = PumpEnvelope::new(1.0).unwrap();
    let pm = PhaseMatchingSpec::new(55.0, 0.8).unwrap();
    let grid = FrequencyGrid::centered(8.0, 161).unwrap();
    let jsa = build_jsa(&pump, &pm, &grid, &grid).unwrap();
    let f = GaussianFilter::gaussian(1.0).unwrap();
    let a = heralded_density(&jsa, &f, &GaussianFilter::Open, true).unwrap();
    let b = heralded_density(&jsa, &f, &GaussianFilter::Open, false).unwrap();
    assert_eq!(a, b);
}

#[test]
fn density_carries_signal_phase_slope() {
    let pm = pm_from_material(0.6, 0.4, 3.0).unwrap();
    let (slope_s, _) = pm.phase_slopes();
    assert_relative_eq!(slope_s, 0.9);
    let pump = PumpEnvelope::new(1.0).unwrap();
    let grid = FrequencyGrid::centered(8.0, 201).unwrap();
    let jsa = build_jsa(&pump, &pm, &grid, &grid).unwrap();
    let f = GaussianFilter::gaussian(1.5).unwrap();
    let g = heralded_density(&jsa, &f, &GaussianFilter::Open, true).unwrap();
    // Removing exp(i slope_s (nu - nu')) leaves a real matrix.
    let stripped = g.with_linear_phase(-slope_s);
    let peak = g.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let imag = stripped.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    assert!(imag < 1e-12 * peak, "residual imaginary part {imag}");
    let kept = g.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    assert!(kept > 1e-3 * peak);
}

#[test]
fn idler_filter_narrows_and_purifies() {
    let plain = run(SCENARIO_I);
    let filtered = run(SCENARIO_I_IDLER);
    assert!(filtered.report.sigma_g1 < plain.report.sigma_g1);
    assert!(filtered.report.p_direct.unwrap() > plain.report.p_direct.unwrap());
}

#[test]
fn gaussian_phase_matching_at_ninety_degrees_ignores_idler_filter() {
    let base = "pump.width_nm = 1.8\nphase_matching.width_nm = 1.0\nphase_matching.theta_deg = 90\n\
                filters.signal = open\nreference.width_nm = 10\ntoggles.gaussian_pm = true\n";
    let open = run(&format!("{base}filters.idler = open\n"));
    let filtered = run(&format!("{base}filters.idler.width_nm = 1.0\n"));
    let change = (filtered.report.dip_fwhm_s / open.report.dip_fwhm_s - 1.0).abs();
    assert!(change < 0.01, "dip width changed by {change}");
}

#[test]
fn unconditional_filtered_spectrum_follows_filter() {
    let sigma_f = WidthSpec::fwhm_nm(1.0, 796.0).unwrap().sigma_intensity_rad_s().unwrap();
    let sim = run(
        "pump.width_nm = 2.0\nphase_matching.width_nm = 8.0\nphase_matching.theta_deg = 55\n\
         filters.signal.width_nm = 1.0\nfilters.idler = open\nreference.width_nm = 1.0\n\
         toggles.conditioned = false\n",
    );
    assert_relative_eq!(sim.report.sigma_g1, sigma_f, max_relative = 0.02);
}

#[test]
fn coherence_time_tracks_width_difference() {
    for (s1, s2) in [(1.0, 0.5), (1.0, 0.25), (2.0, 1.0)] {
        let grid = model_grid(s1, s2);
        let g = gaussian_model_density(&grid, s1, s2, 0.0).unwrap();
        let tc = coherence_time_scale(s1, s2).unwrap();
        let times = DelayGrid::symmetric(3.0 * tc, 121).unwrap();
        let fitted = temporal_correlation(&g, &times).unwrap().coherence_time().unwrap().unwrap();
        assert_relative_eq!(fitted, tc, max_relative = 0.01);
    }
    assert!(coherence_time_scale(1.0, 1.0).is_none());
    let g = gaussian_model_density(&model_grid(1.0, 1.0), 1.0, 1.0, 0.0).unwrap();
    let times = DelayGrid::symmetric(3.0, 61).unwrap();
    assert!(temporal_correlation(&g, &times).unwrap().coherence_time().unwrap().is_none());
}

#[test]
fn visibility_arithmetic_for_signal_statistics() {
    let stats = PhotonStatistics::new(0.997015, 0.002978, 0.000006, 0.0030).unwrap();
    let BackgroundTerms { s, b } = background_terms(&stats);
    assert_relative_eq!(s / (b + s), 0.460, epsilon = 5e-4);
    let v = 0.46 * s / (b + s);
    assert_relative_eq!(v, 0.212, epsilon = 5e-4);
    assert_relative_eq!(overlap_from_visibility(v, &stats).unwrap(), 0.46, epsilon = 1e-12);
}
