//! Tessellation statistics as sums of local contributions, with incremental
//! evaluation under local updates.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, TessError};
use crate::geometry::{min_enclosing_rectangle_of_points, ring_signed_area, Point};
use crate::tessellation::{LocalUpdate, TTess, UpdatePlan};

/// Value of every statistic of a model, in spec order.
pub type FeatureVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatKind {
    NCells,
    SumSqAreas,
    AngleAcute,
    NLongCells { l0: f64 },
    NSegments,
}

/// Which tessellation elements a statistic sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contribution {
    PerCell,
    PerVertexOfCell,
    PerSegment,
}

impl StatKind {
    pub fn contribution(&self) -> Contribution {
        match self {
            StatKind::NCells | StatKind::SumSqAreas | StatKind::NLongCells { .. } => Contribution::PerCell,
            StatKind::AngleAcute => Contribution::PerVertexOfCell,
            StatKind::NSegments => Contribution::PerSegment,
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::NCells => write!(f, "n_cells"),
            StatKind::SumSqAreas => write!(f, "sum_sq_areas"),
            StatKind::AngleAcute => write!(f, "angle_acute"),
            StatKind::NLongCells { l0 } => write!(f, "n_long_cells(l0={l0})"),
            StatKind::NSegments => write!(f, "n_segments"),
        }
    }
}

impl std::str::FromStr for StatKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        let s = s.trim();
        match s {
            "n_cells" => return Ok(StatKind::NCells),
            "sum_sq_areas" => return Ok(StatKind::SumSqAreas),
            "angle_acute" => return Ok(StatKind::AngleAcute),
            "n_segments" => return Ok(StatKind::NSegments),
            "n_long_cells" => return Ok(StatKind::NLongCells { l0: 4.0 }),
            _ => {}
        }
        let args = s
            .strip_prefix("n_long_cells(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| ModelError::UnknownStatistic(s.to_string()))?;
        let v = args
            .trim()
            .strip_prefix("l0")
            .map(str::trim_start)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| ModelError::BadStatistic(s.to_string(), "expected l0=<value>".into()))?;
        let l0: f64 =
            v.trim().parse().map_err(|_| ModelError::BadStatistic(s.to_string(), "l0 is not a number".into()))?;
        if !l0.is_finite() || l0 <= 1.0 {
            return Err(ModelError::BadStatistic(s.to_string(), "l0 must exceed 1".into()));
        }
        Ok(StatKind::NLongCells { l0 })
    }
}

/// A named statistic with a sign multiplier; the feature value is
/// `sign × raw statistic`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSpec {
    pub kind: StatKind,
    pub sign: f64,
}

impl FeatureSpec {
    pub fn new(kind: StatKind) -> Self {
        FeatureSpec { kind, sign: 1.0 }
    }

    pub fn negated(kind: StatKind) -> Self {
        FeatureSpec { kind, sign: -1.0 }
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn parse(name: &str, sign: f64) -> Result<Self, ModelError> {
        if sign != 1.0 && sign != -1.0 {
            return Err(ModelError::BadStatistic(name.to_string(), "sign must be +1 or -1".into()));
        }
        Ok(FeatureSpec { kind: name.parse()?, sign })
    }

    /// Column label: the name, prefixed with `-` when negated.
    pub fn label(&self) -> String {
        if self.sign < 0.0 {
            format!("-{}", self.name())
        } else {
            self.name()
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Name(String),
    Full {
        name: String,
        #[serde(default = "one")]
        sign: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Serialize for FeatureSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SpecRepr::Full { name: self.name(), sign: self.sign }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (name, sign) = match SpecRepr::deserialize(d)? {
            SpecRepr::Name(n) => (n, 1.0),
            SpecRepr::Full { name, sign } => (name, sign),
        };
        FeatureSpec::parse(&name, sign).map_err(serde::de::Error::custom)
    }
}

/// Acute-angle deficit of one boundary cycle traversed with the cell on
/// its left: `Σ max(0, π/2 − α(v))` over its vertices, α the interior angle.
pub fn ring_angle_deficit(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
        let (u, v) = (b - a, c - b);
        let turn = u.cross(v).atan2(u.dot(v));
        s += (turn - FRAC_PI_2).max(0.0);
    }
    s
}

/// Length-to-width ratio of the smallest enclosing rectangle exceeds `l0`.
pub fn ring_is_long(ring: &[Point], l0: f64) -> bool {
    min_enclosing_rectangle_of_points(ring).is_ok_and(|r| r.length > l0 * r.width)
}

fn hole_rings(t: &TTess, cell: usize) -> Vec<Vec<Point>> {
    t.cells()[cell].holes.iter().map(|h| h.iter().map(|&he| t.half_edge_points(he).0).collect()).collect()
}

pub fn num_cells(t: &TTess) -> usize {
    t.n_cells()
}

pub fn sum_squared_areas(t: &TTess) -> f64 {
    t.cells().iter().map(|c| c.area * c.area).sum()
}

pub fn angle_statistic(t: &TTess) -> f64 {
    (0..t.n_cells())
        .map(|i| {
            ring_angle_deficit(&t.cells()[i].ring) + hole_rings(t, i).iter().map(|h| ring_angle_deficit(h)).sum::<f64>()
        })
        .sum()
}

pub fn long_cell_count(t: &TTess, l0: f64) -> usize {
    t.cells().iter().filter(|c| ring_is_long(&c.ring, l0)).count()
}

pub fn num_internal_segments(t: &TTess) -> usize {
    t.n_internal_segments()
}

pub fn raw_statistic(kind: &StatKind, t: &TTess) -> f64 {
    match kind {
        StatKind::NCells => num_cells(t) as f64,
        StatKind::SumSqAreas => sum_squared_areas(t),
        StatKind::AngleAcute => angle_statistic(t),
        StatKind::NLongCells { l0 } => long_cell_count(t, *l0) as f64,
        StatKind::NSegments => num_internal_segments(t) as f64,
    }
}

pub fn feature_vector(specs: &[FeatureSpec], t: &TTess) -> FeatureVector {
    specs.iter().map(|s| s.sign * raw_statistic(&s.kind, t)).collect()
}

/// Change of the feature vector caused by a planned update, computed from
/// the cells it removes and the rings it creates only.
pub fn delta_from_plan(specs: &[FeatureSpec], t: &TTess, plan: &UpdatePlan) -> FeatureVector {
    let removed: Vec<&crate::tessellation::Cell> = plan.removed_cells.iter().map(|&c| &t.cells()[c]).collect();
    let added = &plan.added_rings;
    specs
        .iter()
        .map(|s| {
            let raw = match s.kind {
                StatKind::NCells => added.len() as f64 - removed.len() as f64,
                StatKind::SumSqAreas => {
                    added.iter().map(|r| ring_signed_area(r).powi(2)).sum::<f64>()
                        - removed.iter().map(|c| c.area * c.area).sum::<f64>()
                }
                StatKind::AngleAcute => {
                    added.iter().map(|r| ring_angle_deficit(r)).sum::<f64>()
                        - removed.iter().map(|c| ring_angle_deficit(&c.ring)).sum::<f64>()
                }
                StatKind::NLongCells { l0 } => {
                    added.iter().filter(|r| ring_is_long(r, l0)).count() as f64
                        - removed.iter().filter(|c| ring_is_long(&c.ring, l0)).count() as f64
                }
                StatKind::NSegments => plan.segment_delta as f64,
            };
            s.sign * raw
        })
        .collect()
}

/// Feature change of applying `u` to `t`.
pub fn delta_features(specs: &[FeatureSpec], t: &TTess, u: &LocalUpdate) -> Result<FeatureVector, TessError> {
    Ok(delta_from_plan(specs, t, &t.plan(u)?))
}
