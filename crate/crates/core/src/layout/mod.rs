//! Slot → cell assignments.
//!
//! Every strategy reduces to an ordering of the codec's feature blocks and a
//! traversal of the grid; blocks are laid down whole, one after another, and
//! whatever cells the traversal has left over at the end become padding.

mod association;
mod cluster;
mod plan;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::codec::{fingerprint, CodecSpec};
use crate::error::{Error, Result};

pub use association::{
    association, association_with, pearson, AssociationMatrix, AssociationMeasure, ColumnData,
    MaxIndicatorPearson,
    MixedAssociation,
};
pub use cluster::{average_linkage_order, Merge};
pub use plan::{PlacementGroup, PlacementPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutStrategy {
    Baseline,
    Clustered,
    Manual,
}

impl LayoutStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            LayoutStrategy::Baseline => "baseline",
            LayoutStrategy::Clustered => "clustered",
            LayoutStrategy::Manual => "manual",
        }
    }
}

impl std::str::FromStr for LayoutStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(LayoutStrategy::Baseline),
            "clustered" => Ok(LayoutStrategy::Clustered),
            "manual" => Ok(LayoutStrategy::Manual),
            other => Err(Error::Config(format!("unknown layout strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Traversal {
    /// Left to right on every row.
    RowMajor,
    /// Boustrophedon: even rows left to right, odd rows right to left.
    Snake,
}

impl Traversal {
    /// Flat cell indices in visiting order.
    pub fn cells(self, height: usize, width: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(height * width);
        for r in 0..height {
            let reverse = self == Traversal::Snake && r % 2 == 1;
            for k in 0..width {
                let c = if reverse { width - 1 - k } else { k };
                out.push(r * width + c);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    strategy: LayoutStrategy,
    traversal: Traversal,
    height: usize,
    width: usize,
    /// Column names in placement order.
    column_order: Vec<String>,
    /// Flat cell index for every encoded slot.
    slot_cells: Vec<usize>,
    padding_cells: Vec<usize>,
}

impl Layout {
    pub fn strategy(&self) -> LayoutStrategy {
        self.strategy
    }

    pub fn traversal(&self) -> Traversal {
        self.traversal
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn slot_count(&self) -> usize {
        self.slot_cells.len()
    }

    pub fn slot_cells(&self) -> &[usize] {
        &self.slot_cells
    }

    pub fn padding_cells(&self) -> &[usize] {
        &self.padding_cells
    }

    pub fn column_order(&self) -> &[String] {
        &self.column_order
    }

    /// `(row, col)` of an encoded slot.
    pub fn cell_of(&self, slot: usize) -> (usize, usize) {
        let c = self.slot_cells[slot];
        (c / self.width, c % self.width)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&serde_json::to_vec(self).expect("layout serializes"))
    }

    /// Tab-separated `(column, slot, row, col)` table; padding rows use `-`.
    pub fn export(&self, spec: &CodecSpec) -> String {
        let mut out = format!(
            "# strategy={} traversal={:?} grid={}x{} slots={} padding={}\n",
            self.strategy.name(),
            self.traversal,
            self.height,
            self.width,
            self.slot_count(),
            self.padding_cells.len()
        );
        out.push_str("column\tslot\trow\tcol\n");
        for block in spec.blocks() {
            for slot in block.slots() {
                let (r, c) = self.cell_of(slot);
                let _ = writeln!(out, "{}\t{slot}\t{r}\t{c}", block.column_name);
            }
        }
        for &cell in &self.padding_cells {
            let _ = writeln!(out, "-\t-\t{}\t{}", cell / self.width, cell % self.width);
        }
        out
    }

    /// Check injectivity, coverage and block contiguity against `spec`.
    pub fn validate(&self, spec: &CodecSpec) -> Result<()> {
        let n = self.height * self.width;
        if self.slot_cells.len() != spec.encoded_width() {
            return Err(Error::Layout(format!(
                "layout maps {} slots, codec encodes {}",
                self.slot_cells.len(),
                spec.encoded_width()
            )));
        }
        let mut seen = vec![false; n];
        for &c in self.slot_cells.iter().chain(&self.padding_cells) {
            if c >= n || seen[c] {
                return Err(Error::Layout(format!("cell {c} is out of range or reused")));
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Layout("layout leaves cells unassigned".into()));
        }
        let order = self.traversal.cells(self.height, self.width);
        let mut position = vec![0; n];
        for (i, &c) in order.iter().enumerate() {
            position[c] = i;
        }
        for block in spec.blocks() {
            for s in block.offset + 1..block.offset + block.width {
                if position[self.slot_cells[s]] != position[self.slot_cells[s - 1]] + 1 {
                    return Err(Error::Layout(format!(
                        "block `{}` is split along the traversal",
                        block.column_name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn place(
    spec: &CodecSpec,
    order: &[usize],
    strategy: LayoutStrategy,
    traversal: Traversal,
    height: usize,
    width: usize,
) -> Result<Layout> {
    let capacity = height * width;
    if spec.encoded_width() > capacity {
        return Err(Error::Layout(format!(
            "encoded width {} exceeds grid capacity {height}×{width} = {capacity}",
            spec.encoded_width()
        )));
    }
    let cells = traversal.cells(height, width);
    let mut slot_cells = vec![usize::MAX; spec.encoded_width()];
    let mut cursor = 0;
    for &bi in order {
        for slot in spec.blocks()[bi].slots() {
            slot_cells[slot] = cells[cursor];
            cursor += 1;
        }
    }
    Ok(Layout {
        strategy,
        traversal,
        height,
        width,
        column_order: order
            .iter()
            .map(|&bi| spec.blocks()[bi].column_name.clone())
            .collect(),
        slot_cells,
        padding_cells: cells[cursor..].to_vec(),
    })
}

/// Blocks in schema order along a row-major traversal.
pub fn baseline_layout(spec: &CodecSpec, height: usize, width: usize) -> Result<Layout> {
    let order: Vec<usize> = (0..spec.blocks().len()).collect();
    place(
        spec,
        &order,
        LayoutStrategy::Baseline,
        Traversal::RowMajor,
        height,
        width,
    )
}

/// Columns in average-linkage dendrogram leaf order along a snake traversal.
pub fn clustered_layout(
    spec: &CodecSpec,
    assoc: &AssociationMatrix,
    height: usize,
    width: usize,
) -> Result<Layout> {
    let names: Vec<&str> = spec.blocks().iter().map(|b| b.column_name.as_str()).collect();
    if assoc.names() != names.as_slice() {
        return Err(Error::Layout(
            "association matrix columns do not match the codec".into(),
        ));
    }
    let (order, _) = average_linkage_order(assoc);
    place(
        spec,
        &order,
        LayoutStrategy::Clustered,
        Traversal::Snake,
        height,
        width,
    )
}

/// Plan groups in order, members in order, along a snake traversal.
pub fn manual_layout(
    spec: &CodecSpec,
    plan: &PlacementPlan,
    height: usize,
    width: usize,
) -> Result<Layout> {
    let order = plan.block_order(spec)?;
    place(
        spec,
        &order,
        LayoutStrategy::Manual,
        Traversal::Snake,
        height,
        width,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::fit_codec;
    use crate::schema::{ColumnSpec, Schema};
    use crate::table::{Table, Value};

    fn spec_with(columns: &[(&str, usize)]) -> CodecSpec {
        // width 1 → numeric, width k>1 → categorical with k categories
        let schema = Schema::new(
            columns
                .iter()
                .map(|&(n, w)| {
                    if w == 1 {
                        ColumnSpec::numeric(n, false, None)
                    } else {
                        ColumnSpec::categorical(n, (0..w).map(|i| format!("c{i}")).collect())
                    }
                })
                .collect(),
        )
        .unwrap();
        let rows = (0..2)
            .map(|r| {
                columns
                    .iter()
                    .map(|&(_, w)| {
                        if w == 1 {
                            Value::Number(r as f64)
                        } else {
                            Value::Category(0)
                        }
                    })
                    .collect()
            })
            .collect();
        fit_codec(&Table::new(schema, rows).unwrap()).unwrap()
    }

    #[test]
    fn baseline_on_one_by_five() {
        let spec = spec_with(&[("a", 1), ("b", 2)]);
        let l = baseline_layout(&spec, 1, 5).unwrap();
        assert_eq!(l.slot_cells(), &[0, 1, 2]);
        assert_eq!(l.padding_cells(), &[3, 4]);
        l.validate(&spec).unwrap();
    }

    #[test]
    fn capacity_is_enforced() {
        let spec = spec_with(&[("a", 1), ("b", 5)]);
        assert!(baseline_layout(&spec, 1, 5).is_err());
    }

    #[test]
    fn snake_traversal_is_four_connected() {
        let cells = Traversal::Snake.cells(10, 11);
        for pair in cells.windows(2) {
            let (r0, c0) = (pair[0] / 11, pair[0] % 11);
            let (r1, c1) = (pair[1] / 11, pair[1] % 11);
            assert_eq!(r0.abs_diff(r1) + c0.abs_diff(c1), 1);
        }
        assert_eq!(&cells[..13], &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 21, 20]);
    }

    #[test]
    fn permuting_schema_permutes_baseline() {
        let a = spec_with(&[("x", 1), ("y", 3), ("z", 1)]);
        let b = spec_with(&[("z", 1), ("x", 1), ("y", 3)]);
        let la = baseline_layout(&a, 2, 3).unwrap();
        let lb = baseline_layout(&b, 2, 3).unwrap();
        assert_eq!(la.column_order(), ["x", "y", "z"]);
        assert_eq!(lb.column_order(), ["z", "x", "y"]);
        // the first block always lands on cell 0
        assert_eq!(la.slot_cells()[0], 0);
        assert_eq!(lb.slot_cells()[0], 0);
        assert_eq!(lb.slot_cells()[1], 1);
    }

    #[test]
    fn export_lists_every_cell() {
        let spec = spec_with(&[("a", 1), ("b", 2)]);
        let l = baseline_layout(&spec, 1, 5).unwrap();
        let text = l.export(&spec);
        assert_eq!(text.lines().count(), 2 + 5);
        assert!(text.contains("b\t2\t0\t2"));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(
            "clustered".parse::<LayoutStrategy>().unwrap(),
            LayoutStrategy::Clustered
        );
        assert!("random".parse::<LayoutStrategy>().is_err());
    }
}
