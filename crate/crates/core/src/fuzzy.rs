//! Mamdani fuzzy speed controller.
//!
//! Pipeline per speed-loop sample: normalize `(e, ce)` into `[−1, 1]`, fuzzify
//! over seven triangular sets, fire the 49-rule table with min, aggregate with
//! max, take the centroid over a fixed 2001-point grid, then integrate
//! `k3 · du` into a saturated torque command.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound of the error normalization gain.
pub const K1_MAX: f64 = 6.67e-3;
/// Upper bound of the change-of-error normalization gain.
pub const K2_MAX: f64 = 1.0;
/// Upper bound of the output de-normalization gain.
pub const K3_MAX: f64 = 6.0;

/// Number of centroid grid points over `[−1, 1]`.
pub const GRID_POINTS: usize = 2001;
const GRID_HALF: usize = GRID_POINTS / 2;

/// The nine tunable controller parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl FuzzyParams {
    /// Field names in record order.
    pub const FIELDS: [&'static str; 9] = ["k1", "k2", "k3", "a1", "a2", "b1", "b2", "c1", "c2"];

    /// Per-field `[lo, hi]` search bounds.
    pub const BOUNDS: [(f64, f64); 9] = [
        (0.0, K1_MAX),
        (0.0, K2_MAX),
        (0.0, K3_MAX),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
    ];

    /// Index pairs `(lower, upper)` that must be strictly ordered.
    pub const ORDERED_PAIRS: [(usize, usize); 3] = [(3, 4), (5, 6), (7, 8)];

    /// Hand-set starting point used as the untuned comparison controller:
    /// evenly spaced membership peaks and mid-range gains.
    pub const fn baseline() -> Self {
        Self {
            k1: 3.0e-3,
            k2: 0.5,
            k3: 3.0,
            a1: 1.0 / 3.0,
            a2: 2.0 / 3.0,
            b1: 1.0 / 3.0,
            b2: 2.0 / 3.0,
            c1: 1.0 / 3.0,
            c2: 2.0 / 3.0,
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.k1, self.k2, self.k3, self.a1, self.a2, self.b1, self.b2, self.c1, self.c2,
        ]
    }

    pub fn from_array(x: [f64; 9]) -> Self {
        Self {
            k1: x[0],
            k2: x[1],
            k3: x[2],
            a1: x[3],
            a2: x[4],
            b1: x[5],
            b2: x[6],
            c1: x[7],
            c2: x[8],
        }
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        let arr: [f64; 9] = x
            .try_into()
            .map_err(|_| Error::invalid("params", format!("expected 9 values, got {}", x.len())))?;
        Ok(Self::from_array(arr))
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.to_array();
        for (k, (&value, &(lo, hi))) in values.iter().zip(Self::BOUNDS.iter()).enumerate() {
            if !(value.is_finite() && value >= lo && value <= hi) {
                return Err(Error::invalid(
                    Self::FIELDS[k],
                    format!("{value} outside bound {lo} <= {} <= {hi}", Self::FIELDS[k]),
                ));
            }
        }
        for (lo, hi) in Self::ORDERED_PAIRS {
            if values[lo] >= values[hi] {
                return Err(Error::invalid(
                    Self::FIELDS[hi],
                    format!(
                        "{} = {} must be greater than {} = {}",
                        Self::FIELDS[hi],
                        values[hi],
                        Self::FIELDS[lo],
                        values[lo]
                    ),
                ));
            }
        }
        Ok(())
    }
}

impl Default for FuzzyParams {
    fn default() -> Self {
        Self::baseline()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    NB,
    NM,
    NS,
    Z,
    PS,
    PM,
    PB,
}

impl Label {
    pub const ALL: [Label; 7] = [
        Label::NB,
        Label::NM,
        Label::NS,
        Label::Z,
        Label::PS,
        Label::PM,
        Label::PB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn mirror(self) -> Label {
        Label::ALL[6 - self.index()]
    }
}

/// Seven triangular sets with peaks at `(−1, −p2, −p1, 0, p1, p2, 1)`. Each
/// interior triangle has its feet on the neighbouring peaks; NB and PB
/// saturate beyond `∓1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipFamily {
    peaks: [f64; 7],
}

impl MembershipFamily {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(p1.is_finite() && p2.is_finite() && 0.0 <= p1 && p1 < p2 && p2 <= 1.0) {
            return Err(Error::invalid(
                "peaks",
                format!("need 0 <= p1 < p2 <= 1, got p1 = {p1}, p2 = {p2}"),
            ));
        }
        Ok(Self {
            peaks: [-1.0, -p2, -p1, 0.0, p1, p2, 1.0],
        })
    }

    pub fn peaks(&self) -> [f64; 7] {
        self.peaks
    }

    pub fn degree(&self, label: Label, x: f64) -> f64 {
        let p = &self.peaks;
        match label {
            Label::NB => {
                if x <= p[0] {
                    1.0
                } else if x < p[1] {
                    (p[1] - x) / (p[1] - p[0])
                } else {
                    0.0
                }
            }
            Label::PB => {
                if x >= p[6] {
                    1.0
                } else if x > p[5] {
                    (x - p[5]) / (p[6] - p[5])
                } else {
                    0.0
                }
            }
            _ => {
                let j = label.index();
                let (left, peak, right) = (p[j - 1], p[j], p[j + 1]);
                if x == peak {
                    1.0
                } else if left < x && x < peak {
                    (x - left) / (peak - left)
                } else if peak < x && x < right {
                    (right - x) / (right - peak)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn fuzzify(&self, x: f64) -> [f64; 7] {
        Label::ALL.map(|l| self.degree(l, x))
    }
}

/// Rule consequents indexed `[change][error]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleTable {
    rules: [[Label; 7]; 7],
}

impl RuleTable {
    pub const fn standard() -> Self {
        use Label::*;
        Self {
            rules: [
                [NB, NB, NB, NB, NM, NS, Z],
                [NB, NB, NB, NM, NS, Z, PS],
                [NB, NB, NM, NS, Z, PS, PM],
                [NB, NM, NS, Z, PS, PM, PB],
                [NM, NS, Z, PS, PM, PB, PB],
                [NS, Z, PS, PM, PB, PB, PB],
                [Z, PS, PM, PB, PB, PB, PB],
            ],
        }
    }

    pub fn consequent(&self, error: Label, change: Label) -> Label {
        self.rules[change.index()][error.index()]
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn normalize(value: f64, gain: f64) -> f64 {
    (value * gain).clamp(-1.0, 1.0)
}

/// Min firing strength per rule, max aggregation per output label.
pub fn infer(error_degrees: &[f64; 7], change_degrees: &[f64; 7], table: &RuleTable) -> [f64; 7] {
    let mut out = [0.0f64; 7];
    for e in Label::ALL {
        let mu_e = error_degrees[e.index()];
        if mu_e <= 0.0 {
            continue;
        }
        for c in Label::ALL {
            let strength = mu_e.min(change_degrees[c.index()]);
            let slot = &mut out[table.consequent(e, c).index()];
            *slot = slot.max(strength);
        }
    }
    out
}

fn grid_x(i: usize) -> f64 {
    (i as f64 - GRID_HALF as f64) / GRID_HALF as f64
}

/// Centroid of the pairwise-symmetric aggregate. Summing mirrored grid points
/// together makes the result exactly odd under label mirroring.
fn centroid(aggregate: impl Fn(usize) -> f64) -> f64 {
    let mut num = 0.0;
    let mut den = aggregate(GRID_HALF);
    for k in 1..=GRID_HALF {
        let hi = aggregate(GRID_HALF + k);
        let lo = aggregate(GRID_HALF - k);
        num += grid_x(GRID_HALF + k) * (hi - lo);
        den += hi + lo;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Centroid defuzzification on the uniform grid, evaluating the membership
/// functions directly.
pub fn defuzzify(output_degrees: &[f64; 7], family: &MembershipFamily) -> f64 {
    centroid(|i| {
        let x = grid_x(i);
        Label::ALL.iter().fold(0.0f64, |acc, &l| {
            acc.max(output_degrees[l.index()].min(family.degree(l, x)))
        })
    })
}

/// Output family sampled once on the centroid grid, keeping only the nonzero
/// memberships at each point.
#[derive(Debug, Clone)]
struct OutputGrid {
    points: Vec<Vec<(usize, f64)>>,
}

impl OutputGrid {
    fn new(family: &MembershipFamily) -> Self {
        let points = (0..GRID_POINTS)
            .map(|i| {
                let x = grid_x(i);
                Label::ALL
                    .iter()
                    .filter_map(|&l| {
                        let mu = family.degree(l, x);
                        (mu > 0.0).then_some((l.index(), mu))
                    })
                    .collect()
            })
            .collect();
        Self { points }
    }

    fn defuzzify(&self, output_degrees: &[f64; 7]) -> f64 {
        if output_degrees.iter().all(|&d| d <= 0.0) {
            return 0.0;
        }
        centroid(|i| {
            self.points[i]
                .iter()
                .fold(0.0f64, |acc, &(l, mu)| acc.max(output_degrees[l].min(mu)))
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControllerState {
    pub last_error: f64,
    /// Accumulated torque command (N·m).
    pub accumulated_output: f64,
}

/// Default torque command limit (N·m).
pub const DEFAULT_TORQUE_LIMIT: f64 = 400.0;

#[derive(Debug, Clone)]
pub struct FuzzyController {
    params: FuzzyParams,
    torque_limit: f64,
    error_family: MembershipFamily,
    change_family: MembershipFamily,
    output_family: MembershipFamily,
    output_grid: OutputGrid,
    table: RuleTable,
}

impl FuzzyController {
    pub fn new(params: FuzzyParams, torque_limit: f64) -> Result<Self> {
        params.validate()?;
        if !(torque_limit.is_finite() && torque_limit > 0.0) {
            return Err(Error::invalid(
                "torque_limit",
                format!("must be finite and > 0, got {torque_limit}"),
            ));
        }
        let output_family = MembershipFamily::new(params.c1, params.c2)?;
        Ok(Self {
            params,
            torque_limit,
            error_family: MembershipFamily::new(params.a1, params.a2)?,
            change_family: MembershipFamily::new(params.b1, params.b2)?,
            output_grid: OutputGrid::new(&output_family),
            output_family,
            table: RuleTable::standard(),
        })
    }

    pub fn params(&self) -> &FuzzyParams {
        &self.params
    }

    pub fn torque_limit(&self) -> f64 {
        self.torque_limit
    }

    pub fn output_family(&self) -> &MembershipFamily {
        &self.output_family
    }

    /// Normalized control increment `du ∈ [−1, 1]` for a raw error and change.
    pub fn increment(&self, error: f64, change: f64) -> f64 {
        let e = self.error_family.fuzzify(normalize(error, self.params.k1));
        let ce = self
            .change_family
            .fuzzify(normalize(change, self.params.k2));
        self.output_grid.defuzzify(&infer(&e, &ce, &self.table))
    }

    /// One speed-loop sample. Returns the new torque command.
    pub fn step(
        &self,
        state: ControllerState,
        speed_ref: f64,
        speed_meas: f64,
    ) -> (f64, ControllerState) {
        let error = speed_ref - speed_meas;
        let change = error - state.last_error;
        let du = self.increment(error, change);
        let torque = (state.accumulated_output + self.params.k3 * du)
            .clamp(-self.torque_limit, self.torque_limit);
        (
            torque,
            ControllerState {
                last_error: error,
                accumulated_output: torque,
            },
        )
    }
}
