//! Range-angle response of a designed waveform/filter pair.
//!
//! The surface is the receive-filter output power `χ(r, θ) = |w^H A(r, θ) s|²`,
//! normalized to unit peak. With the optimal receiver the target cell has
//! raw value 1, and interferer cells sit in the filter's nulls.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::ReceiveFilter;
use crate::scene::{steering_rx, steering_tx, ArrayConfig};
use crate::CVector;

/// Definition tag written into serialized grids.
pub const DEFINITION: &str = "filter_output_power |w^H A(r,theta) s|^2";

/// dB floor for cells whose normalized value underflows.
pub const DB_FLOOR: f64 = -300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityGrid {
    pub ranges: Vec<usize>,
    /// Radians.
    pub angles: Vec<f64>,
    /// `|ranges| × |angles|`, peak exactly 1.
    pub values: DMatrix<f64>,
    /// Unnormalized peak value.
    pub peak_raw: f64,
}

pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

impl AmbiguityGrid {
    /// Normalizes a raw nonnegative surface to unit peak.
    pub fn from_raw(ranges: Vec<usize>, angles: Vec<f64>, raw: DMatrix<f64>) -> Result<Self> {
        if ranges.is_empty() || angles.is_empty() {
            return Err(Error::Grid("empty range or angle list".into()));
        }
        if raw.shape() != (ranges.len(), angles.len()) {
            return Err(Error::Grid(format!(
                "value shape {:?} does not match {}x{} grid",
                raw.shape(),
                ranges.len(),
                angles.len()
            )));
        }
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Grid("values must be finite and nonnegative".into()));
        }
        let peak_raw = raw.max();
        if peak_raw <= 0.0 {
            return Err(Error::Grid("surface is identically zero".into()));
        }
        let values = raw.map(|v| if v == peak_raw { 1.0 } else { v / peak_raw });
        Ok(AmbiguityGrid {
            ranges,
            angles,
            values,
            peak_raw,
        })
    }

    /// `(range, angle)` of the first maximal cell in row-major order.
    pub fn argmax(&self) -> (usize, f64) {
        let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
        for i in 0..self.ranges.len() {
            for j in 0..self.angles.len() {
                if self.values[(i, j)] > best {
                    best = self.values[(i, j)];
                    at = (i, j);
                }
            }
        }
        (self.ranges[at.0], self.angles[at.1])
    }

    pub fn range_index(&self, range: usize) -> Option<usize> {
        self.ranges.iter().position(|&r| r == range)
    }

    /// Index of an angle on the grid (matched to 1e−9 rad).
    pub fn angle_index(&self, angle: f64) -> Option<usize> {
        self.angles.iter().position(|&a| (a - angle).abs() < 1e-9)
    }

    /// Normalized value at a grid cell.
    pub fn value_at(&self, range: usize, angle: f64) -> Result<f64> {
        let i = self
            .range_index(range)
            .ok_or_else(|| Error::Grid(format!("range bin {range} not on grid")))?;
        let j = self
            .angle_index(angle)
            .ok_or_else(|| Error::Grid(format!("angle {:.6} deg not on grid", angle.to_degrees())))?;
        Ok(self.values[(i, j)])
    }

    /// CSV: header `range_bin,<angles in degrees>`, one row per range bin of
    /// dB values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("range_bin");
        for a in &self.angles {
            out.push(',');
            out.push_str(&format_number(a.to_degrees()));
        }
        out.push('\n');
        for (i, r) in self.ranges.iter().enumerate() {
            out.push_str(&r.to_string());
            for j in 0..self.angles.len() {
                out.push(',');
                out.push_str(&format_number(to_db(self.values[(i, j)])));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out<'a> {
            definition: &'a str,
            normalization: &'a str,
            db_floor: f64,
            peak_raw: f64,
            ranges: &'a [usize],
            angles_deg: Vec<f64>,
            values_db: Vec<Vec<f64>>,
        }
        let values_db = (0..self.ranges.len())
            .map(|i| (0..self.angles.len()).map(|j| to_db(self.values[(i, j)])).collect())
            .collect();
        serde_json::to_value(Out {
            definition: DEFINITION,
            normalization: "peak = 0 dB",
            db_floor: DB_FLOOR,
            peak_raw: self.peak_raw,
            ranges: &self.ranges,
            angles_deg: self.angles.iter().map(|a| a.to_degrees()).collect(),
            values_db,
        })
        .expect("grid serializes")
    }
}

fn format_number(x: f64) -> String {
    let rounded = (x * 1e9).round() / 1e9;
    format!("{rounded}")
}

/// Ranges `0..=N`.
pub fn default_ranges(array: &ArrayConfig) -> Vec<usize> {
    (0..=array.n_samples).collect()
}

/// −90° to 90° in 1° steps, in radians.
pub fn default_angles() -> Vec<f64> {
    (-90..=90).map(|d| (d as f64).to_radians()).collect()
}

/// Unnormalized `|w^H A(r, θ) s|²` evaluated blockwise as
/// `|Σ_p (w_p^H a_r)(a_t^T s_{p−r})|²`.
pub fn cell_response(array: &ArrayConfig, s: &CVector, w: &ReceiveFilter, range: usize, angle: f64) -> f64 {
    let (nt, nr, n) = (array.n_tx, array.n_rx, array.n_samples);
    if range > n {
        return 0.0;
    }
    let a_t = steering_tx(angle, nt);
    let a_r = steering_rx(angle, nr);
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for p in range..n {
        let q = p - range;
        let rx = w.data.rows(p * nr, nr).dotc(&a_r);
        let tx = a_t.dot(&s.rows(q * nt, nt));
        acc += rx * tx;
    }
    acc.norm_sqr()
}

pub fn ambiguity_map(
    array: &ArrayConfig,
    s: &CVector,
    w: &ReceiveFilter,
    ranges: &[usize],
    angles: &[f64],
) -> Result<AmbiguityGrid> {
    if s.len() != array.waveform_len() {
        return Err(Error::DimensionMismatch {
            expected: array.waveform_len(),
            got: s.len(),
        });
    }
    if w.data.len() != array.filter_len() {
        return Err(Error::DimensionMismatch {
            expected: array.filter_len(),
            got: w.data.len(),
        });
    }
    if let Some(r) = ranges.iter().find(|&&r| r > array.n_samples) {
        return Err(Error::Grid(format!("range bin {r} exceeds N = {}", array.n_samples)));
    }
    // Cells are independent; evaluate them in parallel, stored column-major.
    let cells: Vec<f64> = (0..ranges.len() * angles.len())
        .into_par_iter()
        .map(|k| cell_response(array, s, w, ranges[k % ranges.len()], angles[k / ranges.len()]))
        .collect();
    let raw = DMatrix::from_vec(ranges.len(), angles.len(), cells);
    AmbiguityGrid::from_raw(ranges.to_vec(), angles.to_vec(), raw)
}

/// Angle cut at one range and range cut at one angle, in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct Slices {
    pub at_range: usize,
    pub at_angle: f64,
    pub angle_slice_db: Vec<f64>,
    pub range_slice_db: Vec<f64>,
}

pub fn slices(grid: &AmbiguityGrid, at_range: usize, at_angle: f64) -> Result<Slices> {
    let i = grid
        .range_index(at_range)
        .ok_or_else(|| Error::Grid(format!("range bin {at_range} not on grid")))?;
    let j = grid
        .angle_index(at_angle)
        .ok_or_else(|| Error::Grid(format!("angle {:.6} deg not on grid", at_angle.to_degrees())))?;
    Ok(Slices {
        at_range,
        at_angle,
        angle_slice_db: grid.values.row(i).iter().map(|&v| to_db(v)).collect(),
        range_slice_db: grid.values.column(j).iter().map(|&v| to_db(v)).collect(),
    })
}
