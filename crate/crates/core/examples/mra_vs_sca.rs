//! Minimum-redundancy array against an SCA of similar size.
//!
//!     cargo run --example mra_vs_sca [positions-file]

use std::sync::Arc;

use arraylab::beamforming::{composite_pattern, ScanGrid};
use arraylab::geometry::{compute_coarray, load_mra, parse_positions, ArraySpec, BUNDLED_MRA_17};
use arraylab::metrics::measure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let positions = match std::env::args().nth(1) {
        Some(path) => parse_positions(&std::fs::read_to_string(path)?)?,
        None => BUNDLED_MRA_17.to_vec(),
    };
    let mra = load_mra(&positions)?;
    let sca = ArraySpec::Sca { m: 3, n: 4, p: 2, q: 2 }.build()?;
    let grid = Arc::new(ScanGrid::default());

    for g in [&mra, &sca] {
        let coarray = compute_coarray(g);
        let m = measure(&composite_pattern(g, &grid, 0.0)?)?;
        println!(
            "{}: {} sensors, aperture {}, hole-free coarray {}, MLW {:.5}, PSL {:.2} dB",
            g.spec(),
            g.num_sensors(),
            g.aperture(),
            coarray.is_hole_free(),
            m.main_lobe_width,
            m.psl_db
        );
    }
    Ok(())
}
