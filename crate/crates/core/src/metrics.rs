//! Pattern measurements and sensor-savings ratios.
//!
//! Patterns are treated as circular over the unique grid points: the last
//! grid point (`u = 1`) is the same pattern sample as the first (`u = -1`).

use num_rational::Ratio;
use serde::Serialize;

use crate::beamforming::BeamPattern;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ArrayKind, ArraySpec};

/// Null-to-null main lobe located on a pattern's grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MainLobe {
    pub peak_index: usize,
    /// Grid steps from the peak to the left and right nulls.
    pub left_steps: usize,
    pub right_steps: usize,
    /// Null positions in unwrapped `u` (may fall outside `[-1, 1]`).
    pub left_u: f64,
    pub right_u: f64,
    pub width: f64,
}

impl MainLobe {
    fn contains(&self, index: usize, unique: usize) -> bool {
        let offset = (index + unique - self.peak_index) % unique;
        offset <= self.right_steps || unique - offset <= self.left_steps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternMetrics {
    pub main_lobe_width: f64,
    pub psl_db: f64,
    pub psl_location: f64,
    pub grating_lobes: Vec<f64>,
}

fn unique_len(pattern: &BeamPattern) -> usize {
    pattern.len().saturating_sub(1).max(1)
}

/// Walks outward from the grid point nearest the steering direction to the
/// first local minimum on each side.
pub fn main_lobe(pattern: &BeamPattern) -> Result<MainLobe> {
    let unique = unique_len(pattern);
    let m = &pattern.magnitude;
    let peak_index = pattern.grid.nearest_index(pattern.steer) % unique;

    let walk = |step: &dyn Fn(usize) -> usize, side: &'static str| -> Result<usize> {
        let mut at = peak_index;
        let mut steps = 0;
        loop {
            let next = step(at);
            if m[next] > m[at] {
                return Ok(steps);
            }
            at = next;
            steps += 1;
            if steps >= unique {
                return Err(Error::NoNullFound { side });
            }
        }
    };
    let right_steps = walk(&|i| (i + 1) % unique, "right")?;
    let left_steps = walk(&|i| (i + unique - 1) % unique, "left")?;
    if left_steps + right_steps > unique {
        return Err(Error::NoNullFound { side: "either" });
    }

    let step = pattern.grid.step();
    let peak_u = pattern.grid.u_values()[peak_index];
    Ok(MainLobe {
        peak_index,
        left_steps,
        right_steps,
        left_u: peak_u - left_steps as f64 * step,
        right_u: peak_u + right_steps as f64 * step,
        width: (left_steps + right_steps) as f64 * step,
    })
}

pub fn main_lobe_width(pattern: &BeamPattern) -> Result<f64> {
    main_lobe(pattern).map(|lobe| lobe.width)
}

/// Highest level outside the null-to-null main lobe, as `(dB, u)`.
pub fn peak_sidelobe_db(pattern: &BeamPattern) -> Result<(f64, f64)> {
    let lobe = main_lobe(pattern)?;
    let unique = unique_len(pattern);
    (0..unique)
        .filter(|&i| !lobe.contains(i, unique))
        .map(|i| (pattern.magnitude_db[i], pattern.grid.u_values()[i]))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(Error::NoSidelobeRegion)
}

/// Local maxima outside the main lobe at or above `threshold_db`.
pub fn grating_lobe_report(pattern: &BeamPattern, threshold_db: f64) -> Result<Vec<f64>> {
    let lobe = main_lobe(pattern)?;
    let unique = unique_len(pattern);
    let m = &pattern.magnitude;
    Ok((0..unique)
        .filter(|&i| {
            let prev = m[(i + unique - 1) % unique];
            let next = m[(i + 1) % unique];
            m[i] > prev && m[i] >= next
        })
        .filter(|&i| !lobe.contains(i, unique) && pattern.magnitude_db[i] >= threshold_db)
        .map(|i| pattern.grid.u_values()[i])
        .collect())
}

pub const DEFAULT_GRATING_THRESHOLD_DB: f64 = -3.0;

pub fn measure(pattern: &BeamPattern) -> Result<PatternMetrics> {
    let main_lobe_width = main_lobe_width(pattern)?;
    let (psl_db, psl_location) = peak_sidelobe_db(pattern)?;
    Ok(PatternMetrics {
        main_lobe_width,
        psl_db,
        psl_location,
        grating_lobes: grating_lobe_report(pattern, DEFAULT_GRATING_THRESHOLD_DB)?,
    })
}

/// Sensor count relative to the full ULA of equal resolution, from the
/// closed-form expression for the array family.
#[derive(Clone, Debug, PartialEq)]
pub struct SavingsRatio {
    pub spec: ArraySpec,
    pub ratio: Ratio<u64>,
    pub matches_ula_psl: bool,
}

impl SavingsRatio {
    pub fn family(&self) -> ArrayKind {
        self.spec.kind()
    }
}

fn two_over(n: u32) -> Ratio<u64> {
    Ratio::new(2, n as u64)
}

/// Closed-form savings ratio of a family.
///
/// | family | ratio |
/// |---|---|
/// | SCA | `(2/N) (PM + (Q-1)/2) / (PQM)` |
/// | ECSA | `(2/N) (13M + 6) / (13M + 11)` |
/// | basic CSA, MCSA, NSA | `2/N` |
///
/// The SCA and NSA expressions equal the counted ratio when `N = M + 1`;
/// basic CSAs must satisfy `N = M + 1`. ULA is 1 and an MRA uses its counted
/// ratio.
pub fn savings_ratio(spec: &ArraySpec) -> Result<SavingsRatio> {
    let geometry = spec.build()?;
    let (ratio, matches_ula_psl) = match *spec {
        ArraySpec::Ula { .. } => (Ratio::from_integer(1), true),
        ArraySpec::Sca { m, n, p, q } => {
            let (m, p, q) = (m as u64, p as u64, q as u64);
            (two_over(n) * Ratio::new(2 * p * m + q - 1, 2 * p * q * m), true)
        }
        ArraySpec::Ecsa { m, .. } => {
            let m64 = m as u64;
            (two_over(m + 1) * Ratio::new(13 * m64 + 6, 13 * m64 + 11), true)
        }
        ArraySpec::BasicCsa { m, n } => {
            if n != m + 1 {
                return Err(Error::InvalidParam(format!(
                    "coprime ratio assumes N = M + 1 (got M={m}, N={n})"
                )));
            }
            (two_over(n), false)
        }
        ArraySpec::Mcsa { m } => (two_over(m + 1), true),
        ArraySpec::Nsa { n, .. } => (two_over(n), false),
        ArraySpec::Mra { .. } => {
            let ratio = counted_ratio(&geometry).ok_or_else(|| {
                Error::InvalidParam("MRA coarray has holes; equivalent ULA undefined".into())
            })?;
            (ratio, false)
        }
    };
    Ok(SavingsRatio {
        spec: spec.clone(),
        ratio,
        matches_ula_psl,
    })
}

/// `|positions| / equivalent ULA size` from the constructed geometry.
pub fn counted_ratio(geometry: &ArrayGeometry) -> Option<Ratio<u64>> {
    geometry
        .equivalent_ula_sensors()
        .map(|eq| Ratio::new(geometry.num_sensors() as u64, eq))
}

/// General nested-array ratio `(M + N - 1) / (MN)`; equals `2/N` only when `N = M + 1`.
pub fn nsa_general_ratio(m: u32, n: u32) -> Ratio<u64> {
    Ratio::new((m + n - 1) as u64, m as u64 * n as u64)
}
