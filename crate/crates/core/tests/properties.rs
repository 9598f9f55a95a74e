use num_complex::Complex64;
use proptest::prelude::*;

use hom_purity::estimator::{dip_width_analytic, overlap_analytic, purity_from_width};
use hom_purity::pdc::{build_jsa, heralded_density, GaussianFilter, PhaseMatchingSpec, PumpEnvelope};
use hom_purity::{
    gaussian_model_density, gaussian_reference, interference_profile, purity_direct, DelayGrid, FrequencyGrid,
    SpectralDensity,
};
use ndarray::Array2;

fn model_grid(s1: f64, s2: f64, sb: f64) -> FrequencyGrid {
    let half = 8.0 * s1.max(sb);
    let step = (s2 / 2.5).min(sb / 4.5);
    FrequencyGrid::centered(half, (2.0 * half / step).ceil() as usize + 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heralded_density_is_hermitian_and_normalized(
        sigma_p in 0.6f64..2.0,
        sigma_phi in 0.6f64..2.0,
        theta in -85.0f64..85.0,
        sigma_f in 0.8f64..2.0,
        idler_open in any::<bool>(),
    ) {
        let pump = PumpEnvelope::new(sigma_p).unwrap();
        let pm = PhaseMatchingSpec::new(theta, sigma_phi).unwrap();
        let grid = FrequencyGrid::centered(8.0, 161).unwrap();
        let jsa = build_jsa(&pump, &pm, &grid, &grid).unwrap();
        let f = GaussianFilter::gaussian(sigma_f).unwrap();
        let fi = if idler_open { GaussianFilter::Open } else { f };
        let g = heralded_density(&jsa, &f, &fi, true).unwrap();
        prop_assert!(g.hermitian_asymmetry() <= 1e-12);
        prop_assert!((g.trace() - 1.0).abs() <= 1e-9);
        let p = purity_direct(&g).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0 + 1e-9);
    }

    #[test]
    fn dip_lies_between_zero_and_overlap(
        s1 in 0.8e12f64..2.0e12,
        ratio in 0.2f64..1.0,
        sb in 0.8e12f64..2.0e12,
    ) {
        let s2 = s1 * ratio;
        let grid = model_grid(s1, s2, sb);
        let g = gaussian_model_density(&grid, s1, s2, 0.0).unwrap();
        let u = gaussian_reference(&grid, sb).unwrap();
        let delta = dip_width_analytic(s2, sb).unwrap();
        let dip = interference_profile(&g, &u, &DelayGrid::symmetric(4.0 * delta, 81).unwrap()).unwrap();
        let t = dip.peak();
        prop_assert!(t <= 1.0 + 1e-9);
        for &i in dip.values() {
            prop_assert!(i >= -1e-12 && i <= t + 1e-12);
        }
        prop_assert!(dip.imag_residue() <= 1e-9);
    }

    #[test]
    fn random_hermitian_density_gives_real_dip(seed in 0u64..1000) {
        let grid = FrequencyGrid::centered(6.0, 97).unwrap();
        let n = grid.len();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Array2::from_shape_fn((n, 3), |_| Complex64::new(next(), next()));
        let m = a.dot(&a.t().mapv(|v| v.conj()));
        let g = SpectralDensity::hermitized(grid.clone(), m).unwrap();
        let u = gaussian_reference(&grid, 1.0).unwrap();
        let dip = interference_profile(&g, &u, &DelayGrid::symmetric(0.3, 21).unwrap()).unwrap();
        prop_assert!(dip.imag_residue() <= 1e-9);
    }

    #[test]
    fn width_purity_is_consistent(
        s1 in 0.5e12f64..3.0e12,
        ratio in 0.1f64..1.0,
        sb in 0.5e12f64..3.0e12,
    ) {
        let s2 = s1 * ratio;
        let delta = dip_width_analytic(s2, sb).unwrap();
        let p = purity_from_width(s1, sb, delta).unwrap();
        prop_assert!((p.value - ratio).abs() <= 1e-9 * ratio.max(1.0));
        prop_assert!(!p.clamped || ratio > 1.0 - 1e-9);
        let t = overlap_analytic(s1, sb, delta).unwrap();
        prop_assert!(t > 0.0 && t <= 1.0 + 1e-12);
    }

    #[test]
    fn wider_dip_means_lower_purity(
        s1 in 0.5e12f64..3.0e12,
        sb in 0.5e12f64..3.0e12,
        d1 in 0.2f64..1.0,
        bump in 1.01f64..2.0,
    ) {
        let d_min = dip_width_analytic(s1, sb).unwrap();
        let a = purity_from_width(s1, sb, d_min / d1.sqrt()).unwrap().value;
        let b = purity_from_width(s1, sb, bump * d_min / d1.sqrt()).unwrap().value;
        prop_assert!(b < a);
    }

    #[test]
    fn linear_phase_leaves_purity_and_diagonal(kappa in -2.0e-12f64..2.0e-12) {
        let grid = model_grid(1.0e12, 0.6e12, 1.0e12);
        let g = gaussian_model_density(&grid, 1.0e12, 0.6e12, 0.0).unwrap();
        let h = g.with_linear_phase(kappa);
        prop_assert!((purity_direct(&g).unwrap() - purity_direct(&h).unwrap()).abs() < 1e-12);
        for (a, b) in g.diagonal().iter().zip(h.diagonal()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}
