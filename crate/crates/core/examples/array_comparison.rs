//! Savings ratios and measured pattern metrics for 32-sensor arrays.
//!
//!     cargo run --release --example array_comparison

use std::sync::Arc;

use arraylab::beamforming::{composite_pattern, ScanGrid};
use arraylab::cli::equal_sensor_configs;
use arraylab::metrics::{counted_ratio, measure, savings_ratio};

fn main() -> arraylab::Result<()> {
    let grid = Arc::new(ScanGrid::default());
    println!("{:<28} {:>3} {:>5} {:>8} {:>8} {:>9} {:>8}", "array", "L", "ULA", "ratio", "counted", "MLW", "PSL dB");
    for spec in equal_sensor_configs() {
        let geometry = spec.build()?;
        let ratio = savings_ratio(&spec)?.ratio;
        let counted = counted_ratio(&geometry).map_or("-".into(), |r| r.to_string());
        let m = measure(&composite_pattern(&geometry, &grid, 0.0)?)?;
        println!(
            "{:<28} {:>3} {:>5} {:>8} {:>8} {:>9.5} {:>8.2}",
            spec.to_string(),
            geometry.num_sensors(),
            geometry.equivalent_ula_sensors().unwrap_or(0),
            ratio.to_string(),
            counted,
            m.main_lobe_width,
            m.psl_db
        );
    }
    Ok(())
}
