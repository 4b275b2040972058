//! Conventional beamforming of subarrays and min/product combination.
//!
//! Responses are evaluated over a grid of direction cosines `u = cos(theta)`.
//! With integer half-wavelength positions every response is periodic in `u`
//! with period 2, so the grid `[-1, 1]` covers exactly one period and its two
//! endpoints describe the same point of the pattern.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Combiner, Subarray};

pub const DEFAULT_GRID_POINTS: usize = 8192;

/// Magnitudes below this are clamped to [`DB_FLOOR`].
pub const MAGNITUDE_FLOOR: f64 = 1e-8;
pub const DB_FLOOR: f64 = -160.0;

/// Uniform grid of direction cosines on `[-1, 1]`, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanGrid {
    u_values: Vec<f64>,
}

impl ScanGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::GridTooSmall(resolution));
        }
        let last = (resolution - 1) as f64;
        // (2i - last) / last is exactly antisymmetric: u[i] == -u[last - i]
        let u_values = (0..resolution)
            .map(|i| (2.0 * i as f64 - last) / last)
            .collect();
        Ok(Self { u_values })
    }

    pub fn u_values(&self) -> &[f64] {
        &self.u_values
    }

    pub fn resolution(&self) -> usize {
        self.u_values.len()
    }

    pub fn step(&self) -> f64 {
        2.0 / (self.resolution() - 1) as f64
    }

    /// Index of the grid point closest to `u`.
    pub fn nearest_index(&self, u: f64) -> usize {
        let raw = ((u + 1.0) / self.step()).round();
        raw.clamp(0.0, (self.resolution() - 1) as f64) as usize
    }
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self::new(DEFAULT_GRID_POINTS).expect("default grid is valid")
    }
}

/// Normalised geometric sum `(1/K) sum_i exp(j pi (u - u0) spacing i)`.
///
/// Equals 1 at `u == u0` and is periodic in `u - u0` with period `2 / spacing`.
pub fn steering_response(sub: &Subarray, u: f64, u0: f64) -> Complex64 {
    let delta = u - u0;
    let phase = std::f64::consts::PI * delta;
    let sum: Complex64 = sub
        .positions()
        .map(|p| Complex64::from_polar(1.0, phase * p as f64))
        .sum();
    sum / sub.num_sensors as f64
}

/// Uniformly weighted conventional beamformer response of an arbitrary set of positions.
pub fn array_response(positions: &[u32], u: f64, u0: f64) -> Complex64 {
    let phase = std::f64::consts::PI * (u - u0);
    let sum: Complex64 = positions
        .iter()
        .map(|&p| Complex64::from_polar(1.0, phase * p as f64))
        .sum();
    sum / positions.len() as f64
}

#[derive(Clone, Debug)]
pub struct SubarrayResponse {
    pub subarray: Subarray,
    pub steer: f64,
    pub grid: Arc<ScanGrid>,
    pub values: Vec<Complex64>,
}

impl SubarrayResponse {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Magnitude pattern of this subarray alone, in 20 log10 dB.
    pub fn to_pattern(&self) -> BeamPattern {
        BeamPattern::new(
            Arc::clone(&self.grid),
            self.steer,
            Combiner::Single,
            self.magnitudes(),
        )
    }
}

pub fn subarray_pattern(sub: &Subarray, grid: &Arc<ScanGrid>, u0: f64) -> SubarrayResponse {
    let values = grid
        .u_values()
        .par_iter()
        .map(|&u| steering_response(sub, u, u0))
        .collect();
    SubarrayResponse {
        subarray: *sub,
        steer: u0,
        grid: Arc::clone(grid),
        values,
    }
}

/// Composite magnitude pattern over a scan grid.
///
/// Min and single-array patterns are amplitude patterns and use
/// `20 log10`; a product pattern `|r1 conj(r2)|` is quadratic in the field
/// and uses `10 log10`, which puts both on the same power scale.
#[derive(Clone, Debug, Serialize)]
pub struct BeamPattern {
    #[serde(skip)]
    pub grid: Arc<ScanGrid>,
    pub steer: f64,
    pub combiner: Combiner,
    pub magnitude: Vec<f64>,
    pub magnitude_db: Vec<f64>,
}

/// dB multiplier for a combiner's magnitude.
pub fn db_scale(combiner: Combiner) -> f64 {
    match combiner {
        Combiner::Product => 10.0,
        Combiner::Min | Combiner::Single => 20.0,
    }
}

pub fn to_db(magnitude: f64, combiner: Combiner) -> f64 {
    if magnitude < MAGNITUDE_FLOOR {
        DB_FLOOR
    } else {
        (db_scale(combiner) * magnitude.log10()).max(DB_FLOOR)
    }
}

impl BeamPattern {
    pub fn new(grid: Arc<ScanGrid>, steer: f64, combiner: Combiner, magnitude: Vec<f64>) -> Self {
        let magnitude_db = magnitude.iter().map(|&m| to_db(m, combiner)).collect();
        Self {
            grid,
            steer,
            combiner,
            magnitude,
            magnitude_db,
        }
    }

    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }

    /// CSV with header `u,magnitude,magnitude_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,magnitude,magnitude_db\n");
        for ((u, m), db) in self
            .grid
            .u_values()
            .iter()
            .zip(&self.magnitude)
            .zip(&self.magnitude_db)
        {
            out.push_str(&format!("{u},{m},{db}\n"));
        }
        out
    }
}

fn check_compatible(responses: &[SubarrayResponse]) -> Result<()> {
    let first = &responses[0];
    let same = responses[1..].iter().all(|r| {
        (Arc::ptr_eq(&r.grid, &first.grid) || r.grid == first.grid)
            && r.steer == first.steer
            && r.values.len() == first.values.len()
    });
    if same {
        Ok(())
    } else {
        Err(Error::MismatchedResponses)
    }
}

pub fn combine_min(responses: &[SubarrayResponse]) -> Result<BeamPattern> {
    if responses.len() < 2 {
        return Err(Error::WrongResponseCount {
            combiner: "min",
            expected: "at least 2",
            got: responses.len(),
        });
    }
    check_compatible(responses)?;
    let magnitude = (0..responses[0].values.len())
        .map(|i| {
            responses
                .iter()
                .map(|r| r.values[i].norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(BeamPattern::new(
        Arc::clone(&responses[0].grid),
        responses[0].steer,
        Combiner::Min,
        magnitude,
    ))
}

pub fn combine_product(responses: &[SubarrayResponse]) -> Result<BeamPattern> {
    let [a, b] = responses else {
        return Err(Error::WrongResponseCount {
            combiner: "product",
            expected: "exactly 2",
            got: responses.len(),
        });
    };
    check_compatible(responses)?;
    let magnitude = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x * y.conj()).norm())
        .collect();
    Ok(BeamPattern::new(
        Arc::clone(&a.grid),
        a.steer,
        Combiner::Product,
        magnitude,
    ))
}

/// Responses of each subarray of `geometry`; empty for arrays without a
/// subarray decomposition (MRA).
pub fn subarray_responses(
    geometry: &ArrayGeometry,
    grid: &Arc<ScanGrid>,
    u0: f64,
) -> Vec<SubarrayResponse> {
    geometry
        .subarrays()
        .iter()
        .map(|s| subarray_pattern(s, grid, u0))
        .collect()
}

/// Composite pattern of a geometry, using the combiner of its family:
/// SCA and MCSA take the min, basic/extended CSA and NSA the product, and
/// ULA/MRA a single full-array beamformer.
pub fn composite_pattern(geometry: &ArrayGeometry, grid: &Arc<ScanGrid>, u0: f64) -> Result<BeamPattern> {
    match geometry.combiner() {
        Combiner::Min => combine_min(&subarray_responses(geometry, grid, u0)),
        Combiner::Product => combine_product(&subarray_responses(geometry, grid, u0)),
        Combiner::Single => {
            let positions = geometry.positions();
            let magnitude = grid
                .u_values()
                .par_iter()
                .map(|&u| array_response(positions, u, u0).norm())
                .collect();
            Ok(BeamPattern::new(Arc::clone(grid), u0, Combiner::Single, magnitude))
        }
    }
}

/// Composite magnitude at a single direction, off any grid.
pub fn composite_response_at(geometry: &ArrayGeometry, u: f64, u0: f64) -> f64 {
    let subs = geometry.subarrays();
    match geometry.combiner() {
        Combiner::Min => subs
            .iter()
            .map(|s| steering_response(s, u, u0).norm())
            .fold(f64::INFINITY, f64::min),
        Combiner::Product => {
            (steering_response(&subs[0], u, u0) * steering_response(&subs[1], u, u0).conj()).norm()
        }
        Combiner::Single => array_response(geometry.positions(), u, u0).norm(),
    }
}
