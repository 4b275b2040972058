//! Dense-scene direction finding with several arrays of equal sensor count.
//!
//!     cargo run --release --example doa_experiment -- [seed] [spectrum-dir]

use arraylab::geometry::ArraySpec;
use arraylab::simulation::{DoaExperiment, SourceScene};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    let out_dir = args.next();
    let scene = SourceScene::uniform(54, 0.95)?;

    let sca = ArraySpec::Sca { m: 3, n: 4, p: 5, q: 3 };
    let tol = 1.0 / 90.0;
    for (name, spec) in [
        ("sca", sca),
        ("ula", ArraySpec::Ula { k: 32 }),
        ("csa", ArraySpec::BasicCsa { m: 16, n: 17 }),
        ("nsa", ArraySpec::Nsa { m: 10, n: 23 }),
    ] {
        let mut exp = DoaExperiment::new(spec.build()?, scene.clone());
        exp.tol_u = tol;
        let run = exp.run(seed)?;
        println!(
            "{spec}: {} of {} sources found, {} false alarms",
            run.report.hits,
            scene.len(),
            run.report.false_alarms
        );
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(format!("{dir}/doa_{name}.csv"), run.spectrum.to_csv())?;
        }
    }
    Ok(())
}
