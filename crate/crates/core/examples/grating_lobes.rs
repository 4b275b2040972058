//! Each SCA subarray alone has grating lobes; the min combiner removes them.

use std::sync::Arc;

use arraylab::beamforming::{composite_pattern, subarray_pattern, ScanGrid};
use arraylab::geometry::ArraySpec;
use arraylab::metrics::{grating_lobe_report, DEFAULT_GRATING_THRESHOLD_DB};

fn main() -> arraylab::Result<()> {
    let grid = Arc::new(ScanGrid::default());
    let spec = ArraySpec::Sca { m: 3, n: 4, p: 2, q: 2 };
    let sca = spec.build()?;
    println!("{spec}");
    for (i, sub) in sca.subarrays().iter().enumerate() {
        let lobes = grating_lobe_report(&subarray_pattern(sub, &grid, 0.0).to_pattern(), DEFAULT_GRATING_THRESHOLD_DB)?;
        let shown: Vec<String> = lobes.iter().map(|u| format!("{u:+.3}")).collect();
        println!("  subarray {}: {} lobes at [{}]", i + 1, lobes.len(), shown.join(", "));
    }
    let composite = grating_lobe_report(&composite_pattern(&sca, &grid, 0.0)?, DEFAULT_GRATING_THRESHOLD_DB)?;
    println!("  composite: {} lobes", composite.len());
    Ok(())
}
