//! Row ⇄ feature vector ⇄ grid conversion.
//!
//! Numeric columns are min-max scaled to `[0, 1]`, categorical columns are
//! one-hot encoded, and the blocks are concatenated in schema order. A
//! [`Layout`] then places every slot on a grid cell, mapping `[0, 1]` to the
//! diffusion range `[-1, 1]`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::schema::{ColumnKind, Schema};
use crate::table::{Row, Table, Value};

pub const GRID_HEIGHT: usize = 10;
pub const GRID_WIDTH: usize = 11;

/// Lower and upper cell value produced by [`vector_to_grid`].
pub const GRID_RANGE: (f64, f64) = (-1.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Numeric,
    OneHot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub column_name: String,
    pub offset: usize,
    pub width: usize,
    pub kind: BlockKind,
}

impl FeatureBlock {
    pub fn slots(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnTransform {
    MinMax { min: f64, max: f64, integer: bool },
    OneHot { vocabulary: Vec<String> },
}

/// Fitted per-column transforms plus the block table they induce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecSpec {
    schema: Schema,
    transforms: Vec<ColumnTransform>,
    blocks: Vec<FeatureBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Clamp cells to the grid range before inverse scaling.
    pub clamp: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { clamp: true }
    }
}

/// Fit min/max scalers and freeze vocabularies from `table`.
pub fn fit_codec(table: &Table) -> Result<CodecSpec> {
    if table.is_empty() {
        return Err(Error::Codec("cannot fit a codec on an empty table".into()));
    }
    let schema = table.schema().clone();
    let mut transforms = Vec::with_capacity(schema.len());
    let mut blocks = Vec::with_capacity(schema.len());
    let mut offset = 0;
    for (ci, col) in schema.columns().iter().enumerate() {
        let (transform, width, kind) = match col.kind {
            ColumnKind::Numeric => {
                let (min, max) = table
                    .rows()
                    .iter()
                    .map(|r| r[ci].as_number().expect("numeric cell"))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                if min >= max {
                    return Err(Error::Codec(format!(
                        "column `{}` is constant ({min}); min-max scaling is undefined",
                        col.name
                    )));
                }
                (
                    ColumnTransform::MinMax {
                        min,
                        max,
                        integer: col.integer,
                    },
                    1,
                    BlockKind::Numeric,
                )
            }
            ColumnKind::Categorical => {
                if col.vocabulary.is_empty() {
                    return Err(Error::Codec(format!(
                        "column `{}` has an empty vocabulary",
                        col.name
                    )));
                }
                (
                    ColumnTransform::OneHot {
                        vocabulary: col.vocabulary.clone(),
                    },
                    col.vocabulary.len(),
                    BlockKind::OneHot,
                )
            }
        };
        transforms.push(transform);
        blocks.push(FeatureBlock {
            column_name: col.name.clone(),
            offset,
            width,
            kind,
        });
        offset += width;
    }
    Ok(CodecSpec {
        schema,
        transforms,
        blocks,
    })
}

impl CodecSpec {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn transforms(&self) -> &[ColumnTransform] {
        &self.transforms
    }

    pub fn block(&self, column: &str) -> Option<&FeatureBlock> {
        self.blocks.iter().find(|b| b.column_name == column)
    }

    pub fn encoded_width(&self) -> usize {
        self.blocks.last().map(|b| b.offset + b.width).unwrap_or(0)
    }

    /// Scaled value of one numeric column, clamped into `[0, 1]`.
    pub fn scale(&self, column: usize, v: f64) -> f64 {
        match self.transforms[column] {
            ColumnTransform::MinMax { min, max, .. } => (v.clamp(min, max) - min) / (max - min),
            ColumnTransform::OneHot { .. } => panic!("column {column} is categorical"),
        }
    }

    /// Encode one row into `encoded_width` values in `[0, 1]`.
    pub fn encode_row(&self, row: &Row) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.encoded_width()];
        self.encode_into(row, &mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, row: &Row, out: &mut [f64]) -> Result<()> {
        if row.len() != self.blocks.len() {
            return Err(Error::Codec(format!(
                "row has {} cells, codec expects {}",
                row.len(),
                self.blocks.len()
            )));
        }
        for (ci, (cell, block)) in row.iter().zip(&self.blocks).enumerate() {
            match (cell, &self.transforms[ci]) {
                (Value::Number(v), ColumnTransform::MinMax { .. }) => {
                    out[block.offset] = self.scale(ci, *v);
                }
                (Value::Category(c), ColumnTransform::OneHot { vocabulary }) => {
                    let c = *c as usize;
                    if c >= vocabulary.len() {
                        return Err(Error::Codec(format!(
                            "unknown category index {c} for column `{}`",
                            block.column_name
                        )));
                    }
                    out[block.slots()].fill(0.0);
                    out[block.offset + c] = 1.0;
                }
                _ => {
                    return Err(Error::Codec(format!(
                        "cell kind does not match column `{}`",
                        block.column_name
                    )))
                }
            }
        }
        Ok(())
    }

    /// Encode every row of a table, row-major `len × encoded_width`.
    pub fn encode_table(&self, table: &Table) -> Result<Vec<f64>> {
        let w = self.encoded_width();
        let mut out = vec![0.0; w * table.len()];
        for (row, chunk) in table.rows().iter().zip(out.chunks_mut(w)) {
            self.encode_into(row, chunk)?;
        }
        Ok(out)
    }

    /// Invert a feature vector (values nominally in `[0, 1]`) back to a row.
    ///
    /// With `clamp` off, numeric slots outside `[0, 1]` extrapolate beyond the
    /// fitted range.
    pub fn decode_vector(&self, vec: &[f64], clamp: bool) -> Row {
        self.blocks
            .iter()
            .zip(&self.transforms)
            .map(|(block, transform)| match transform {
                ColumnTransform::MinMax { min, max, integer } => {
                    let mut v = vec[block.offset];
                    if clamp {
                        v = v.clamp(0.0, 1.0);
                    }
                    let x = v * (max - min) + min;
                    // f64::round is half-away-from-zero
                    Value::Number(if *integer { x.round() } else { x })
                }
                ColumnTransform::OneHot { .. } => {
                    let cells = &vec[block.slots()];
                    let mut best = 0;
                    for (i, &c) in cells.iter().enumerate() {
                        if c > cells[best] {
                            best = i;
                        }
                    }
                    Value::Category(best as u32)
                }
            })
            .collect()
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&serde_json::to_vec(self).expect("codec serializes"))
    }
}

pub(crate) fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Single-channel pseudo-image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Grid {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Codec(format!(
                "grid {height}×{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            values,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Place slot values on the grid as `2v - 1`; padding cells hold 0.
pub fn vector_to_grid(vec: &[f64], layout: &Layout) -> Result<Grid> {
    if vec.len() != layout.slot_count() {
        return Err(Error::Codec(format!(
            "layout maps {} slots, vector has {}",
            layout.slot_count(),
            vec.len()
        )));
    }
    let (lo, hi) = GRID_RANGE;
    let mut grid = Grid::zeros(layout.height(), layout.width());
    for (slot, &cell) in layout.slot_cells().iter().enumerate() {
        grid.values[cell] = lo + (hi - lo) * vec[slot];
    }
    Ok(grid)
}

/// Read the mapped cells of a grid back into `[0, 1]` slot space.
pub fn grid_to_vector(grid: &Grid, layout: &Layout, clamp: bool) -> Vec<f64> {
    let (lo, hi) = GRID_RANGE;
    layout
        .slot_cells()
        .iter()
        .map(|&cell| {
            let mut c = grid.values[cell];
            if clamp {
                c = c.clamp(lo, hi);
            }
            (c - lo) / (hi - lo)
        })
        .collect()
}

pub fn grid_to_row(grid: &Grid, layout: &Layout, spec: &CodecSpec) -> Row {
    decode_grid(grid, layout, spec, DecodeOptions::default())
}

pub fn decode_grid(grid: &Grid, layout: &Layout, spec: &CodecSpec, opts: DecodeOptions) -> Row {
    spec.decode_vector(&grid_to_vector(grid, layout, opts.clamp), opts.clamp)
}

pub fn encode_row(row: &Row, spec: &CodecSpec) -> Result<Vec<f64>> {
    spec.encode_row(row)
}

/// Decode a batch of grids into a table sharing the codec's schema.
pub fn decode_grids(
    grids: &[Grid],
    layout: &Layout,
    spec: &CodecSpec,
    opts: DecodeOptions,
) -> Result<Table> {
    let rows = grids
        .iter()
        .map(|g| decode_grid(g, layout, spec, opts))
        .collect();
    Table::new(spec.schema().clone(), rows)
}

/// Format like C's `%.6g`.
pub fn format_g6(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("exponent digits");
    if !(-4..6).contains(&exp) {
        let (mantissa, _) = sci.split_at(sci.find('e').expect("exponent"));
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Debug dump: one grid per line, row-major cells, 6 significant digits.
pub fn dump_grids(grids: &[Grid]) -> String {
    let mut out = String::new();
    for g in grids {
        for (i, v) in g.values.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", format_g6(*v));
        }
        out.push('\n');
    }
    out
}
