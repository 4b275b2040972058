//! Narrowband snapshot simulation and direction-of-arrival spectra.
//!
//! Sensor `l` at integer position `p_l` (half wavelengths) receives
//! `sum_k s_k(t) exp(j pi u_k p_l) + n_l(t)`, with circular complex Gaussian
//! source amplitudes and spatially white circular complex Gaussian noise.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::beamforming::ScanGrid;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Combiner};

/// Generator recorded in run metadata.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Far-field sources in direction-cosine space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceScene {
    directions: Vec<f64>,
    source_power: f64,
}

impl SourceScene {
    pub fn new(directions: Vec<f64>, source_power: f64) -> Result<Self> {
        if let Some(&bad) = directions.iter().find(|u| u.is_nan() || u.abs() >= 1.0) {
            return Err(Error::DirectionOutOfRange(bad));
        }
        if directions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(
                "source directions must be strictly increasing".into(),
            ));
        }
        if !(source_power.is_finite() && source_power > 0.0) {
            return Err(Error::InvalidParam(format!(
                "source power must be positive (got {source_power})"
            )));
        }
        Ok(Self {
            directions,
            source_power,
        })
    }

    /// `count` unit-power sources evenly spaced over `[-span, span]`; a single
    /// source sits at broadside.
    pub fn uniform(count: usize, span: f64) -> Result<Self> {
        let directions = match count {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..count)
                .map(|i| -span + 2.0 * span * i as f64 / (count - 1) as f64)
                .collect(),
        };
        Self::new(directions, 1.0)
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn source_power(&self) -> f64 {
        self.source_power
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Sensor data, one row per sensor (in geometry position order) and one
/// column per snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    pub data: Array2<Complex64>,
    pub noise_power: f64,
    pub snr_db: f64,
    pub seed: u64,
}

impl SnapshotMatrix {
    pub fn num_sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.data.ncols()
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Simulates `num_snapshots` snapshots. `snr_db` is per source per sensor;
/// `f64::INFINITY` disables noise. Output is a pure function of the inputs.
pub fn generate_snapshots(
    geometry: &ArrayGeometry,
    scene: &SourceScene,
    num_snapshots: usize,
    snr_db: f64,
    seed: u64,
) -> Result<SnapshotMatrix> {
    if num_snapshots == 0 {
        return Err(Error::ParamTooSmall {
            name: "snapshots",
            min: 1,
            value: 0,
        });
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidParam("SNR must be a number".into()));
    }
    let noise_power = scene.source_power / 10f64.powf(snr_db / 10.0);
    let positions = geometry.positions();
    let steering: Vec<Vec<Complex64>> = scene
        .directions
        .iter()
        .map(|&u| {
            positions
                .iter()
                .map(|&p| Complex64::from_polar(1.0, std::f64::consts::PI * u * p as f64))
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::zeros((positions.len(), num_snapshots));
    let mut amplitudes = vec![Complex64::default(); scene.len()];
    for t in 0..num_snapshots {
        for a in amplitudes.iter_mut() {
            *a = complex_gaussian(&mut rng, scene.source_power);
        }
        for (l, cell) in data.column_mut(t).iter_mut().enumerate() {
            let signal: Complex64 = steering
                .iter()
                .zip(&amplitudes)
                .map(|(a, s)| a[l] * s)
                .sum();
            let noise = if noise_power > 0.0 {
                complex_gaussian(&mut rng, noise_power)
            } else {
                Complex64::default()
            };
            *cell = signal + noise;
        }
    }
    Ok(SnapshotMatrix {
        data,
        noise_power,
        snr_db,
        seed,
    })
}

/// Per-snapshot beamformer outputs at one scan direction.
#[derive(Clone, Debug)]
pub struct SnapshotOutputs {
    /// `y_i(t) = w_i^H x_i(t)` for each subarray (or the full array).
    pub subarrays: Vec<Vec<Complex64>>,
    /// Combined magnitude per snapshot: `min_i |y_i|`, `|y_1 conj(y_2)|` or `|y|`.
    pub combined: Vec<f64>,
}

fn sensor_groups(geometry: &ArrayGeometry) -> Vec<Vec<usize>> {
    match geometry.combiner() {
        Combiner::Single => vec![(0..geometry.num_sensors()).collect()],
        Combiner::Min | Combiner::Product => geometry.subarray_indices(),
    }
}

fn check_dimensions(geometry: &ArrayGeometry, snapshots: &SnapshotMatrix) -> Result<()> {
    if snapshots.num_sensors() != geometry.num_sensors() {
        return Err(Error::DimensionMismatch {
            expected: geometry.num_sensors(),
            got: snapshots.num_sensors(),
        });
    }
    Ok(())
}

fn outputs_at(
    geometry: &ArrayGeometry,
    groups: &[Vec<usize>],
    snapshots: &SnapshotMatrix,
    u: f64,
) -> SnapshotOutputs {
    let positions = geometry.positions();
    let num_snapshots = snapshots.num_snapshots();
    let subarrays: Vec<Vec<Complex64>> = groups
        .iter()
        .map(|rows| {
            let mut y = vec![Complex64::default(); num_snapshots];
            let norm = 1.0 / rows.len() as f64;
            for &l in rows {
                let w_conj =
                    Complex64::from_polar(norm, -std::f64::consts::PI * u * positions[l] as f64);
                for (acc, x) in y.iter_mut().zip(snapshots.data.row(l)) {
                    *acc += w_conj * x;
                }
            }
            y
        })
        .collect();
    let combined = (0..num_snapshots)
        .map(|t| match geometry.combiner() {
            Combiner::Min => subarrays
                .iter()
                .map(|y| y[t].norm())
                .fold(f64::INFINITY, f64::min),
            Combiner::Product => (subarrays[0][t] * subarrays[1][t].conj()).norm(),
            Combiner::Single => subarrays[0][t].norm(),
        })
        .collect();
    SnapshotOutputs {
        subarrays,
        combined,
    }
}

pub fn snapshot_outputs(
    geometry: &ArrayGeometry,
    snapshots: &SnapshotMatrix,
    u: f64,
) -> Result<SnapshotOutputs> {
    check_dimensions(geometry, snapshots)?;
    Ok(outputs_at(geometry, &sensor_groups(geometry), snapshots, u))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub u: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct DoASpectrum {
    pub grid: Arc<ScanGrid>,
    pub values: Vec<f64>,
    /// Every strict interior local maximum, strongest first.
    pub peaks: Vec<Peak>,
}

impl DoASpectrum {
    pub fn from_values(grid: Arc<ScanGrid>, values: Vec<f64>) -> Self {
        let u = grid.u_values();
        let mut peaks: Vec<Peak> = (1..values.len().saturating_sub(1))
            .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
            .map(|i| Peak {
                u: u[i],
                value: values[i],
            })
            .collect();
        peaks.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.u.total_cmp(&b.u)));
        Self {
            grid,
            values,
            peaks,
        }
    }

    /// CSV `u,value,value_db`; `value_db` is `10 log10` relative to the spectrum maximum.
    pub fn to_csv(&self) -> String {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        let mut out = String::from("u,value,value_db\n");
        for (u, v) in self.grid.u_values().iter().zip(&self.values) {
            let db = if max > 0.0 && *v > 0.0 {
                (10.0 * (v / max).log10()).max(crate::beamforming::DB_FLOOR)
            } else {
                crate::beamforming::DB_FLOOR
            };
            out.push_str(&format!("{u},{v},{db}\n"));
        }
        out
    }
}

/// Spatial spectrum `(1/T) sum_t |y_t|^2`, where `y_t` is the per-snapshot
/// combined output of the family's processor steered to each grid direction.
pub fn doa_spectrum(
    geometry: &ArrayGeometry,
    snapshots: &SnapshotMatrix,
    grid: &Arc<ScanGrid>,
) -> Result<DoASpectrum> {
    check_dimensions(geometry, snapshots)?;
    let groups = sensor_groups(geometry);
    let inv_t = 1.0 / snapshots.num_snapshots() as f64;
    let values = grid
        .u_values()
        .par_iter()
        .map(|&u| {
            let out = outputs_at(geometry, &groups, snapshots, u);
            out.combined.iter().map(|y| y * y).sum::<f64>() * inv_t
        })
        .collect();
    Ok(DoASpectrum::from_values(Arc::clone(grid), values))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    /// True when fewer than the requested number of maxima exist.
    pub shortfall: bool,
}

pub fn detect_peaks(spectrum: &DoASpectrum, k: usize) -> Result<PeakSet> {
    if k == 0 {
        return Err(Error::ParamTooSmall {
            name: "peak count",
            min: 1,
            value: 0,
        });
    }
    Ok(PeakSet {
        peaks: spectrum.peaks.iter().take(k).copied().collect(),
        shortfall: spectrum.peaks.len() < k,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatchedPair {
    pub peak_u: f64,
    pub truth_u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub matched_pairs: Vec<MatchedPair>,
    pub tol_u: f64,
    pub seed: Option<u64>,
}

/// Greedy one-to-one matching: peaks in descending value order (ties by
/// lower `u`) each take the nearest unmatched true direction within `tol_u`.
pub fn evaluate_detection(peaks: &[Peak], truth: &SourceScene, tol_u: f64) -> Result<DetectionReport> {
    if tol_u.is_nan() || tol_u <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "match tolerance must be positive (got {tol_u})"
        )));
    }
    let mut order: Vec<&Peak> = peaks.iter().collect();
    order.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.u.total_cmp(&b.u)));

    let mut taken = vec![false; truth.len()];
    let mut matched_pairs = Vec::new();
    for peak in order {
        let best = truth
            .directions
            .iter()
            .enumerate()
            .filter(|&(j, &d)| !taken[j] && (d - peak.u).abs() <= tol_u)
            .min_by(|a, b| (a.1 - peak.u).abs().total_cmp(&(b.1 - peak.u).abs()));
        if let Some((j, &d)) = best {
            taken[j] = true;
            matched_pairs.push(MatchedPair {
                peak_u: peak.u,
                truth_u: d,
            });
        }
    }
    let hits = matched_pairs.len();
    Ok(DetectionReport {
        hits,
        misses: truth.len() - hits,
        false_alarms: peaks.len() - hits,
        matched_pairs,
        tol_u,
        seed: None,
    })
}

/// Half the null-to-null main lobe width of the equivalent full ULA, `2 / K_eq`.
pub fn default_tolerance(geometry: &ArrayGeometry) -> f64 {
    let equivalent = geometry
        .equivalent_ula_sensors()
        .unwrap_or(geometry.aperture() as u64 + 1);
    2.0 / equivalent as f64
}

/// One end-to-end DoA run: snapshots, spectrum, peak picking, matching.
#[derive(Clone, Debug)]
pub struct DoaExperiment {
    pub geometry: ArrayGeometry,
    pub scene: SourceScene,
    pub num_snapshots: usize,
    pub snr_db: f64,
    pub grid: Arc<ScanGrid>,
    pub num_peaks: usize,
    pub tol_u: f64,
}

#[derive(Clone, Debug)]
pub struct DoaRun {
    pub spectrum: DoASpectrum,
    pub peaks: PeakSet,
    pub report: DetectionReport,
}

impl DoaExperiment {
    pub fn new(geometry: ArrayGeometry, scene: SourceScene) -> Self {
        let tol_u = default_tolerance(&geometry);
        let num_peaks = scene.len().max(1);
        Self {
            geometry,
            scene,
            num_snapshots: 100,
            snr_db: 0.0,
            grid: Arc::new(ScanGrid::default()),
            num_peaks,
            tol_u,
        }
    }

    pub fn run(&self, seed: u64) -> Result<DoaRun> {
        let snapshots =
            generate_snapshots(&self.geometry, &self.scene, self.num_snapshots, self.snr_db, seed)?;
        let spectrum = doa_spectrum(&self.geometry, &snapshots, &self.grid)?;
        let peaks = detect_peaks(&spectrum, self.num_peaks)?;
        let mut report = evaluate_detection(&peaks.peaks, &self.scene, self.tol_u)?;
        report.seed = Some(seed);
        Ok(DoaRun {
            spectrum,
            peaks,
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sca, build_ula};

    #[test]
    fn scene_validation() {
        assert!(SourceScene::new(vec![0.1, 0.1], 1.0).is_err());
        assert!(SourceScene::new(vec![0.2, 0.1], 1.0).is_err());
        assert_eq!(
            SourceScene::new(vec![1.0], 1.0),
            Err(Error::DirectionOutOfRange(1.0))
        );
        assert!(SourceScene::new(vec![0.0], 0.0).is_err());
        let s = SourceScene::uniform(54, 0.95).unwrap();
        assert_eq!(s.len(), 54);
        assert_eq!(s.directions()[0], -0.95);
        assert!((s.directions()[53] - 0.95).abs() < 1e-15);
        assert_eq!(SourceScene::uniform(1, 0.95).unwrap().directions(), &[0.0]);
    }

    #[test]
    fn noiseless_broadside_source_is_constant_across_sensors() {
        let g = build_sca(3, 4, 2, 2).unwrap();
        let scene = SourceScene::new(vec![0.0], 1.0).unwrap();
        let x = generate_snapshots(&g, &scene, 5, f64::INFINITY, 1).unwrap();
        assert_eq!(x.noise_power, 0.0);
        for column in x.data.columns() {
            assert!(column.iter().all(|v| *v == column[0]));
        }
    }

    #[test]
    fn snapshot_shape_and_determinism() {
        let g = build_sca(3, 4, 5, 3).unwrap();
        let scene = SourceScene::uniform(54, 0.95).unwrap();
        let a = generate_snapshots(&g, &scene, 100, 0.0, 7).unwrap();
        let b = generate_snapshots(&g, &scene, 100, 0.0, 7).unwrap();
        assert_eq!(a.data.dim(), (32, 100));
        assert_eq!(a, b);
        let c = generate_snapshots(&g, &scene, 100, 0.0, 8).unwrap();
        assert_ne!(a.data, c.data);
        assert!(generate_snapshots(&g, &scene, 0, 0.0, 7).is_err());
    }

    #[test]
    fn single_source_peak() {
        let g = build_ula(32).unwrap();
        let scene = SourceScene::new(vec![0.5], 1.0).unwrap();
        let x = generate_snapshots(&g, &scene, 50, 30.0, 3).unwrap();
        let grid = Arc::new(ScanGrid::new(2048).unwrap());
        let s = doa_spectrum(&g, &x, &grid).unwrap();
        assert!((s.peaks[0].u - 0.5).abs() <= grid.step());
    }

    #[test]
    fn dimension_mismatch() {
        let scene = SourceScene::new(vec![0.0], 1.0).unwrap();
        let x = generate_snapshots(&build_ula(4).unwrap(), &scene, 3, 10.0, 0).unwrap();
        let grid = Arc::new(ScanGrid::new(16).unwrap());
        assert_eq!(
            doa_spectrum(&build_ula(5).unwrap(), &x, &grid).unwrap_err(),
            Error::DimensionMismatch {
                expected: 5,
                got: 4
            }
        );
    }

    fn spectrum_of(values: Vec<f64>) -> DoASpectrum {
        let grid = Arc::new(ScanGrid::new(values.len()).unwrap());
        DoASpectrum::from_values(grid, values)
    }

    #[test]
    fn peak_detection() {
        let s = spectrum_of(vec![0.0, 1.0, 3.0, 1.0, 0.0]);
        let p = detect_peaks(&s, 1).unwrap();
        assert_eq!(p.peaks, vec![Peak { u: 0.0, value: 3.0 }]);
        assert!(!p.shortfall);

        let s = spectrum_of(vec![0.0, 2.0, 0.0, 5.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let p = detect_peaks(&s, 2).unwrap();
        assert_eq!(p.peaks.iter().map(|p| p.value).collect::<Vec<_>>(), vec![5.0, 2.0]);

        let s = spectrum_of((0..10).map(f64::from).collect());
        let p = detect_peaks(&s, 3).unwrap();
        assert!(p.peaks.is_empty() && p.shortfall);
        assert!(detect_peaks(&s, 0).is_err());
    }

    #[test]
    fn detection_matching() {
        let truth = SourceScene::new(vec![-0.5, 0.0, 0.5], 1.0).unwrap();
        let exact: Vec<Peak> = truth
            .directions()
            .iter()
            .map(|&u| Peak { u, value: 1.0 })
            .collect();
        let r = evaluate_detection(&exact, &truth, 0.01).unwrap();
        assert_eq!((r.hits, r.misses, r.false_alarms), (3, 0, 0));

        // the stronger peak claims the shared source; the weaker one is a false alarm
        let peaks = vec![
            Peak { u: 0.004, value: 1.0 },
            Peak { u: -0.003, value: 2.0 },
            Peak { u: 0.9, value: 3.0 },
        ];
        let r = evaluate_detection(&peaks, &truth, 0.01).unwrap();
        assert_eq!((r.hits, r.misses, r.false_alarms), (1, 2, 2));
        assert_eq!(r.matched_pairs[0].peak_u, -0.003);
        assert!(evaluate_detection(&peaks, &truth, 0.0).is_err());
    }

    #[test]
    fn noise_only_spectrum_is_flat() {
        let g = build_ula(8).unwrap();
        let scene = SourceScene::new(Vec::new(), 1.0).unwrap();
        let x = generate_snapshots(&g, &scene, 200, 0.0, 11).unwrap();
        let grid = Arc::new(ScanGrid::new(512).unwrap());
        let s = doa_spectrum(&g, &x, &grid).unwrap();
        let mean = s.values.iter().sum::<f64>() / s.values.len() as f64;
        let max = s.values.iter().copied().fold(0.0, f64::max);
        // white noise through an 8-sensor beamformer: mean power 1/8, and no
        // direction stands out by the array gain
        assert!((mean - 0.125).abs() < 0.02, "{mean}");
        assert!(max < 8.0 * mean);
    }

    #[test]
    fn experiment_tolerance() {
        let g = build_sca(3, 4, 5, 3).unwrap();
        assert!((default_tolerance(&g) - 1.0 / 90.0).abs() < 1e-15);
    }
}
