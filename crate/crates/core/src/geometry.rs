//! Sparse linear array construction.
//!
//! Every geometry lives on an integer lattice: positions are in units of half a
//! wavelength and the first sensor sits at 0. Arrays built from interleaved
//! uniform subarrays keep their subarray decomposition, because the beamformers
//! process each subarray separately.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extension factor that lets a uniformly shaded extended coprime array reach
/// the -13 dB sidelobe level of a full ULA.
pub const UNIFORM_EXTENSION_FACTOR: f64 = 6.5;

/// 17-sensor minimum-redundancy array, aperture 101 (Wichmann ruler W(2,6),
/// spacings 1,1,3,5,5,11x6,6,6,6,1,1). Validated hole-free when loaded.
pub const BUNDLED_MRA_17: [u32; 17] = [
    0, 1, 2, 5, 10, 15, 26, 37, 48, 59, 70, 81, 87, 93, 99, 100, 101,
];

/// A uniform linear subarray: `num_sensors` sensors, `spacing` apart, starting at `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subarray {
    pub num_sensors: u32,
    pub spacing: u32,
    pub offset: u32,
}

impl Subarray {
    pub fn new(num_sensors: u32, spacing: u32) -> Result<Self> {
        if num_sensors < 1 {
            return Err(Error::ParamTooSmall {
                name: "subarray sensor count",
                min: 1,
                value: num_sensors,
            });
        }
        if spacing < 1 {
            return Err(Error::ParamTooSmall {
                name: "subarray spacing",
                min: 1,
                value: spacing,
            });
        }
        Ok(Self {
            num_sensors,
            spacing,
            offset: 0,
        })
    }

    pub fn positions(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.num_sensors).map(move |i| self.offset + i * self.spacing)
    }

    pub fn aperture(&self) -> u32 {
        (self.num_sensors - 1) * self.spacing
    }
}

/// Array family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Ula,
    Sca,
    BasicCsa,
    Ecsa,
    Mcsa,
    Nsa,
    Mra,
}

impl ArrayKind {
    pub fn name(self) -> &'static str {
        match self {
            ArrayKind::Ula => "ula",
            ArrayKind::Sca => "sca",
            ArrayKind::BasicCsa => "basic_csa",
            ArrayKind::Ecsa => "ecsa",
            ArrayKind::Mcsa => "mcsa",
            ArrayKind::Nsa => "nsa",
            ArrayKind::Mra => "mra",
        }
    }

    /// How the subarray outputs of this family are combined.
    pub fn combiner(self) -> Combiner {
        match self {
            ArrayKind::Sca | ArrayKind::Mcsa => Combiner::Min,
            ArrayKind::BasicCsa | ArrayKind::Ecsa | ArrayKind::Nsa => Combiner::Product,
            ArrayKind::Ula | ArrayKind::Mra => Combiner::Single,
        }
    }
}

impl fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Subarray combination rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    /// Pointwise minimum of subarray magnitudes.
    Min,
    /// `r1 * conj(r2)` of exactly two subarrays.
    Product,
    /// Conventional beamforming over every sensor.
    Single,
}

/// The defining parameters of an array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ArraySpec {
    Ula { k: u32 },
    Sca { m: u32, n: u32, p: u32, q: u32 },
    BasicCsa { m: u32, n: u32 },
    Ecsa { m: u32, c: f64 },
    Mcsa { m: u32 },
    Nsa { m: u32, n: u32 },
    Mra { positions: Vec<u32> },
}

impl ArraySpec {
    pub fn ecsa(m: u32) -> Self {
        ArraySpec::Ecsa {
            m,
            c: UNIFORM_EXTENSION_FACTOR,
        }
    }

    pub fn bundled_mra() -> Self {
        ArraySpec::Mra {
            positions: BUNDLED_MRA_17.to_vec(),
        }
    }

    pub fn kind(&self) -> ArrayKind {
        match self {
            ArraySpec::Ula { .. } => ArrayKind::Ula,
            ArraySpec::Sca { .. } => ArrayKind::Sca,
            ArraySpec::BasicCsa { .. } => ArrayKind::BasicCsa,
            ArraySpec::Ecsa { .. } => ArrayKind::Ecsa,
            ArraySpec::Mcsa { .. } => ArrayKind::Mcsa,
            ArraySpec::Nsa { .. } => ArrayKind::Nsa,
            ArraySpec::Mra { .. } => ArrayKind::Mra,
        }
    }

    pub fn build(&self) -> Result<ArrayGeometry> {
        match *self {
            ArraySpec::Ula { k } => build_ula(k),
            ArraySpec::Sca { m, n, p, q } => build_sca(m, n, p, q),
            ArraySpec::BasicCsa { m, n } => build_basic_csa(m, n),
            ArraySpec::Ecsa { m, c } => build_ecsa(m, c),
            ArraySpec::Mcsa { m } => build_mcsa(m),
            ArraySpec::Nsa { m, n } => build_nsa(m, n),
            ArraySpec::Mra { ref positions } => load_mra(positions),
        }
    }

    /// Compact `key=value` list without commas, for CSV cells.
    pub fn params_string(&self) -> String {
        match self {
            ArraySpec::Ula { k } => format!("k={k}"),
            ArraySpec::Sca { m, n, p, q } => format!("m={m};n={n};p={p};q={q}"),
            ArraySpec::BasicCsa { m, n } | ArraySpec::Nsa { m, n } => format!("m={m};n={n}"),
            ArraySpec::Ecsa { m, c } => format!("m={m};c={c}"),
            ArraySpec::Mcsa { m } => format!("m={m}"),
            ArraySpec::Mra { positions } => format!("sensors={}", positions.len()),
        }
    }
}

impl fmt::Display for ArraySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArraySpec::Ula { k } => write!(f, "ULA(K={k})"),
            ArraySpec::Sca { m, n, p, q } => write!(f, "SCA(M={m}, N={n}, P={p}, Q={q})"),
            ArraySpec::BasicCsa { m, n } => write!(f, "CSA(M={m}, N={n})"),
            ArraySpec::Ecsa { m, c } => write!(f, "ECSA(M={m}, c={c})"),
            ArraySpec::Mcsa { m } => write!(f, "MCSA(M={m})"),
            ArraySpec::Nsa { m, n } => write!(f, "NSA(M={m}, N={n})"),
            ArraySpec::Mra { positions } => write!(f, "MRA({} sensors)", positions.len()),
        }
    }
}

/// A constructed array: sorted, deduplicated sensor positions plus the
/// subarrays they came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArrayGeometry {
    #[serde(flatten)]
    spec: ArraySpec,
    positions: Vec<u32>,
    subarrays: Vec<Subarray>,
    /// `None` for an MRA whose coarray has holes.
    equivalent_ula_sensors: Option<u64>,
    /// False when the array deviates from the reference construction
    /// (an ECSA with a non-uniform-shading extension factor).
    standard: bool,
}

#[derive(Deserialize)]
struct GeometryRecord {
    #[serde(flatten)]
    spec: ArraySpec,
    positions: Vec<u32>,
}

impl ArrayGeometry {
    fn from_subarrays(spec: ArraySpec, subarrays: Vec<Subarray>, equivalent: u64) -> Self {
        let positions: BTreeSet<u32> = subarrays.iter().flat_map(|s| s.positions()).collect();
        Self {
            spec,
            positions: positions.into_iter().collect(),
            subarrays,
            equivalent_ula_sensors: Some(equivalent),
            standard: true,
        }
    }

    pub fn spec(&self) -> &ArraySpec {
        &self.spec
    }

    pub fn kind(&self) -> ArrayKind {
        self.spec.kind()
    }

    pub fn combiner(&self) -> Combiner {
        self.kind().combiner()
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    pub fn subarrays(&self) -> &[Subarray] {
        &self.subarrays
    }

    pub fn num_sensors(&self) -> usize {
        self.positions.len()
    }

    pub fn equivalent_ula_sensors(&self) -> Option<u64> {
        self.equivalent_ula_sensors
    }

    pub fn is_standard(&self) -> bool {
        self.standard
    }

    pub fn aperture(&self) -> u32 {
        self.positions.last().copied().unwrap_or(0)
    }

    /// Number of positions common to the first two subarrays.
    pub fn shared_sensors(&self) -> usize {
        match self.subarrays.as_slice() {
            [a, b, ..] => {
                let first: BTreeSet<u32> = a.positions().collect();
                b.positions().filter(|p| first.contains(p)).count()
            }
            _ => 0,
        }
    }

    /// Row indices into [`positions`](Self::positions) for each subarray's sensors.
    pub fn subarray_indices(&self) -> Vec<Vec<usize>> {
        self.subarrays
            .iter()
            .map(|s| {
                s.positions()
                    .map(|p| {
                        self.positions
                            .binary_search(&p)
                            .expect("subarray position is part of the union")
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }

    /// Parses a serialized geometry, rebuilding it from its parameters and
    /// checking the stored positions against the rebuilt ones.
    pub fn from_json(text: &str) -> Result<Self> {
        let record: GeometryRecord =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let geometry = record.spec.build()?;
        if geometry.positions != record.positions {
            return Err(Error::InvalidParam(
                "stored positions do not match the array parameters".into(),
            ));
        }
        Ok(geometry)
    }
}

pub fn validate_coprime(m: u32, n: u32) -> bool {
    m.gcd(&n) == 1
}

fn require_at_least(name: &'static str, value: u32, min: u32) -> Result<()> {
    if value < min {
        Err(Error::ParamTooSmall { name, min, value })
    } else {
        Ok(())
    }
}

fn require_coprime(m: u32, n: u32) -> Result<()> {
    require_at_least("M", m, 1)?;
    require_at_least("N", n, 1)?;
    if validate_coprime(m, n) {
        Ok(())
    } else {
        Err(Error::NotCoprime { m, n, gcd: m.gcd(&n) })
    }
}

pub fn build_ula(k: u32) -> Result<ArrayGeometry> {
    require_at_least("K", k, 1)?;
    Ok(ArrayGeometry::from_subarrays(
        ArraySpec::Ula { k },
        vec![Subarray::new(k, 1)?],
        k as u64,
    ))
}

/// Semi-coprime array: `PM` sensors at spacing `QN`, `PN` sensors at spacing
/// `QM`, and a `Q`-sensor standard ULA, all starting at 0.
pub fn build_sca(m: u32, n: u32, p: u32, q: u32) -> Result<ArrayGeometry> {
    require_coprime(m, n)?;
    require_at_least("P", p, 2)?;
    require_at_least("Q", q, 2)?;
    let subarrays = vec![
        Subarray::new(p * m, q * n)?,
        Subarray::new(p * n, q * m)?,
        Subarray::new(q, 1)?,
    ];
    let equivalent = (p as u64) * (q as u64) * (m as u64) * (n as u64);
    Ok(ArrayGeometry::from_subarrays(
        ArraySpec::Sca { m, n, p, q },
        subarrays,
        equivalent,
    ))
}

pub fn build_basic_csa(m: u32, n: u32) -> Result<ArrayGeometry> {
    require_at_least("M", m, 2)?;
    require_at_least("N", n, 2)?;
    require_coprime(m, n)?;
    Ok(ArrayGeometry::from_subarrays(
        ArraySpec::BasicCsa { m, n },
        vec![Subarray::new(m, n)?, Subarray::new(n, m)?],
        m as u64 * n as u64,
    ))
}

/// Extended coprime array with `N = M + 1`: `ceil(cN) - 1` sensors at spacing
/// `N` and `ceil(cN)` sensors at spacing `M`.
pub fn build_ecsa(m: u32, c: f64) -> Result<ArrayGeometry> {
    require_at_least("M", m, 2)?;
    if !c.is_finite() || c < 1.0 {
        return Err(Error::InvalidParam(format!(
            "extension factor c must be a finite number >= 1 (got {c})"
        )));
    }
    let n = m + 1;
    let n_e = (c * n as f64).ceil() as u32;
    let m_e = n_e - 1;
    let mut geometry = ArrayGeometry::from_subarrays(
        ArraySpec::Ecsa { m, c },
        vec![Subarray::new(m_e, n)?, Subarray::new(n_e, m)?],
        m_e as u64 * n as u64,
    );
    geometry.standard = c == UNIFORM_EXTENSION_FACTOR;
    Ok(geometry)
}

/// Min-processing coprime array with `N = M + 1`: two periods of each basic
/// coprime subarray.
pub fn build_mcsa(m: u32) -> Result<ArrayGeometry> {
    require_at_least("M", m, 2)?;
    let n = m + 1;
    Ok(ArrayGeometry::from_subarrays(
        ArraySpec::Mcsa { m },
        vec![Subarray::new(2 * m, n)?, Subarray::new(2 * n, m)?],
        2 * m as u64 * n as u64,
    ))
}

/// Nested array: a dense `M`-sensor ULA interleaved with `N` sensors at spacing `M`.
pub fn build_nsa(m: u32, n: u32) -> Result<ArrayGeometry> {
    require_at_least("M", m, 2)?;
    require_at_least("N", n, 1)?;
    Ok(ArrayGeometry::from_subarrays(
        ArraySpec::Nsa { m, n },
        vec![Subarray::new(m, 1)?, Subarray::new(n, m)?],
        m as u64 * n as u64,
    ))
}

/// Loads a minimum-redundancy array from explicit positions. Positions are
/// sorted and shifted so the first sensor is at 0.
pub fn load_mra(positions: &[u32]) -> Result<ArrayGeometry> {
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    let Some(&first) = sorted.first() else {
        return Err(Error::EmptyPositions);
    };
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicatePosition(w[0]));
    }
    for p in &mut sorted {
        *p -= first;
    }
    let mut geometry = ArrayGeometry {
        spec: ArraySpec::Mra {
            positions: sorted.clone(),
        },
        positions: sorted,
        subarrays: Vec::new(),
        equivalent_ula_sensors: None,
        standard: true,
    };
    let coarray = compute_coarray(&geometry);
    if coarray.is_hole_free() {
        geometry.equivalent_ula_sensors = Some(geometry.aperture() as u64 + 1);
    }
    Ok(geometry)
}

/// Parses sensor positions from a JSON integer array or from one integer per line.
pub fn parse_positions(text: &str) -> Result<Vec<u32>> {
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| Error::Parse(e.to_string()));
    }
    trimmed
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<u32>()
                .map_err(|e| Error::Parse(format!("{l:?}: {e}")))
        })
        .collect()
}

/// Difference coarray of a geometry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coarray {
    /// Non-negative lags present, ascending.
    pub lags: Vec<u32>,
    /// Ordered-pair count for each entry of `lags`.
    pub multiplicities: Vec<u64>,
    /// Largest `h` such that every lag in `0..=h` is present.
    pub hole_free_up_to: u32,
}

impl Coarray {
    pub fn max_lag(&self) -> u32 {
        self.lags.last().copied().unwrap_or(0)
    }

    pub fn is_hole_free(&self) -> bool {
        self.hole_free_up_to == self.max_lag()
    }

    pub fn multiplicity(&self, lag: u32) -> u64 {
        self.lags
            .binary_search(&lag)
            .map(|i| self.multiplicities[i])
            .unwrap_or(0)
    }
}

pub fn compute_coarray(geometry: &ArrayGeometry) -> Coarray {
    let positions = geometry.positions();
    let aperture = geometry.aperture() as usize;
    let mut counts = vec![0u64; aperture + 1];
    for &a in positions {
        for &b in positions {
            counts[a.abs_diff(b) as usize] += 1;
        }
    }
    let hole_free_up_to = counts
        .iter()
        .position(|&c| c == 0)
        .map_or(aperture, |first_hole| first_hole - 1) as u32;
    let (lags, multiplicities) = counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(lag, c)| (lag as u32, c))
        .unzip();
    Coarray {
        lags,
        multiplicities,
        hole_free_up_to,
    }
}
