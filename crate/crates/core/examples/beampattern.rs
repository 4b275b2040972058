//! Writes subarray, composite and reference ULA patterns as CSV.
//!
//!     cargo run --example beampattern -- out/

use std::path::PathBuf;
use std::sync::Arc;

use arraylab::beamforming::{composite_pattern, subarray_responses, ScanGrid};
use arraylab::geometry::ArraySpec;
use arraylab::metrics::measure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/beampattern".into()));
    std::fs::create_dir_all(&dir)?;
    let grid = Arc::new(ScanGrid::default());

    let sca = ArraySpec::Sca { m: 3, n: 4, p: 2, q: 2 }.build()?;
    for (i, r) in subarray_responses(&sca, &grid, 0.0).iter().enumerate() {
        std::fs::write(dir.join(format!("sca_sub{}.csv", i + 1)), r.to_pattern().to_csv())?;
    }

    for (name, spec) in [
        ("sca", ArraySpec::Sca { m: 3, n: 4, p: 2, q: 2 }),
        ("ula48", ArraySpec::Ula { k: 48 }),
        ("csa", ArraySpec::BasicCsa { m: 4, n: 5 }),
    ] {
        let pattern = composite_pattern(&spec.build()?, &grid, 0.0)?;
        let m = measure(&pattern)?;
        println!(
            "{spec}: MLW {:.5}, PSL {:.2} dB, grating lobes {:?}",
            m.main_lobe_width, m.psl_db, m.grating_lobes
        );
        std::fs::write(dir.join(format!("{name}.csv")), pattern.to_csv())?;
    }
    println!("CSV files in {}", dir.display());
    Ok(())
}
