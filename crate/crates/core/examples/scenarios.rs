//! Print purity figures for one or more scenario configs: `cargo run --release --example scenarios -- scenarios/*.conf`.

use hom_purity::scenario::{simulate, ScenarioConfig};
use std::time::Instant;

fn main() {
    for path in std::env::args().skip(1) {
        let text = std::fs::read_to_string(&path).expect("read");
        let config = ScenarioConfig::parse(&text).expect("config");
        let t0 = Instant::now();
        match simulate(&config) {
            Ok(sim) => {
                let r = &sim.report;
                println!(
                    "{path}: P_direct {:.4} P_width {:.4} T {:.4} fwhm {:.3e} grids {}x{} flags {:?} ({:.2?})",
                    r.p_direct.unwrap(),
                    r.p_width.unwrap_or(f64::NAN),
                    sim.overlap,
                    r.dip_fwhm_s,
                    sim.jsa.grid_s().len(),
                    sim.jsa.grid_i().len(),
                    r.flags,
                    t0.elapsed()
                );
            }
            Err(e) => println!("{path}: error {e}"),
        }
    }
}
