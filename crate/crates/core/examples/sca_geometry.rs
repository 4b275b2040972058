//! Builds a symmetric coprime array and prints its layout and coarray.
//!
//!     cargo run --example sca_geometry -- 3 4 2 2

use arraylab::geometry::{build_sca, compute_coarray};

fn main() -> arraylab::Result<()> {
    let args: Vec<u32> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let [m, n, p, q] = match args.as_slice() {
        [m, n, p, q] => [*m, *n, *p, *q],
        _ => [3, 4, 2, 2],
    };
    let sca = build_sca(m, n, p, q)?;
    println!("{}", sca.spec());
    for (i, sub) in sca.subarrays().iter().enumerate() {
        println!(
            "  subarray {}: {} sensors, spacing {}, aperture {}",
            i + 1,
            sub.num_sensors,
            sub.spacing,
            sub.aperture()
        );
    }
    println!("  positions: {:?}", sca.positions());
    println!(
        "  {} physical sensors for the resolution of a {}-sensor ULA",
        sca.num_sensors(),
        sca.equivalent_ula_sensors().unwrap()
    );

    let coarray = compute_coarray(&sca);
    println!(
        "  coarray: max lag {}, contiguous up to {}",
        coarray.max_lag(),
        coarray.hole_free_up_to
    );
    Ok(())
}
