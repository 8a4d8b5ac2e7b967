//! Rubric grids and the partial order between their competence levels.
//!
//! A rubric is an `R x C` table: rows are competence components, columns are
//! mastery levels in increasing order. Every cell is a competence level and is
//! addressed by a 1-based [`LevelCoord`]. Columns are always ordered left to
//! right; when `rows_ordered` is set the rows form a hierarchy as well and the
//! relation becomes the component-wise product order.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based (row, column) address of a rubric cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct LevelCoord {
    pub r: usize,
    pub c: usize,
}

impl LevelCoord {
    pub const fn new(r: usize, c: usize) -> Self {
        LevelCoord { r, c }
    }
}

impl From<(usize, usize)> for LevelCoord {
    fn from((r, c): (usize, usize)) -> Self {
        LevelCoord { r, c }
    }
}

impl From<LevelCoord> for (usize, usize) {
    fn from(coord: LevelCoord) -> Self {
        (coord.r, coord.c)
    }
}

impl fmt::Display for LevelCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.r, self.c)
    }
}

/// Relation of a competence level `a` to another level `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderRelation {
    Lower,
    Equal,
    Higher,
    Incomparable,
}

impl OrderRelation {
    pub fn reverse(self) -> Self {
        match self {
            OrderRelation::Lower => OrderRelation::Higher,
            OrderRelation::Higher => OrderRelation::Lower,
            other => other,
        }
    }
}

/// A row or column header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub id: String,
    pub label: String,
}

impl Descriptor {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Descriptor {
            id: id.into(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rubric {
    name: String,
    rows: Vec<Descriptor>,
    columns: Vec<Descriptor>,
    cells: Vec<Vec<String>>,
    rows_ordered: bool,
}

impl Rubric {
    pub fn new(
        name: impl Into<String>,
        rows: Vec<Descriptor>,
        columns: Vec<Descriptor>,
        cells: Vec<Vec<String>>,
        rows_ordered: bool,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("rubric needs at least one row"));
        }
        if columns.is_empty() {
            return Err(Error::validation("rubric needs at least one column"));
        }
        check_unique("row", &rows)?;
        check_unique("column", &columns)?;
        if cells.len() != rows.len() {
            return Err(Error::validation(format!(
                "cells matrix has {} rows, rubric declares {}",
                cells.len(),
                rows.len()
            )));
        }
        for (i, row) in cells.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::validation(format!(
                    "cells row {} has {} entries, rubric declares {} columns",
                    i + 1,
                    row.len(),
                    columns.len()
                )));
            }
        }
        Ok(Rubric {
            name: name.into(),
            rows,
            columns,
            cells,
            rows_ordered,
        })
    }

    /// A rubric with generated headers and empty cell descriptions.
    pub fn blank(name: impl Into<String>, n_rows: usize, n_cols: usize, rows_ordered: bool) -> Result<Self> {
        let rows = (1..=n_rows)
            .map(|r| Descriptor::new(format!("R{r}"), format!("row {r}")))
            .collect();
        let columns = (1..=n_cols)
            .map(|c| Descriptor::new(format!("C{c}"), format!("column {c}")))
            .collect();
        let cells = vec![vec![String::new(); n_cols]; n_rows];
        Rubric::new(name, rows, columns, cells, rows_ordered)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> &[Descriptor] {
        &self.rows
    }

    pub fn columns(&self) -> &[Descriptor] {
        &self.columns
    }

    pub fn cells(&self) -> &[Vec<String>] {
        &self.cells
    }

    pub fn rows_ordered(&self) -> bool {
        self.rows_ordered
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_cells(&self) -> usize {
        self.rows.len() * self.columns.len()
    }

    pub fn contains(&self, coord: LevelCoord) -> bool {
        (1..=self.n_rows()).contains(&coord.r) && (1..=self.n_cols()).contains(&coord.c)
    }

    pub fn check(&self, coord: LevelCoord) -> Result<()> {
        if self.contains(coord) {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "coordinate {coord} outside {}x{} rubric '{}'",
                self.n_rows(),
                self.n_cols(),
                self.name
            )))
        }
    }

    /// All cells in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = LevelCoord> + '_ {
        let n_cols = self.n_cols();
        (1..=self.n_rows()).flat_map(move |r| (1..=n_cols).map(move |c| LevelCoord::new(r, c)))
    }

    /// Row-major 0-based position of a valid coordinate.
    pub fn index_of(&self, coord: LevelCoord) -> usize {
        (coord.r - 1) * self.n_cols() + (coord.c - 1)
    }

    pub fn coord_at(&self, index: usize) -> LevelCoord {
        LevelCoord::new(index / self.n_cols() + 1, index % self.n_cols() + 1)
    }

    /// Human label such as `1D-VS`.
    pub fn cell_label(&self, coord: LevelCoord) -> String {
        format!("{}-{}", self.rows[coord.r - 1].id, self.columns[coord.c - 1].id)
    }

    pub fn cell_description(&self, coord: LevelCoord) -> &str {
        &self.cells[coord.r - 1][coord.c - 1]
    }

    pub fn compare(&self, a: LevelCoord, b: LevelCoord) -> Result<OrderRelation> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.relation(a, b))
    }

    /// Unchecked comparison; both coordinates must lie within the rubric.
    pub(crate) fn relation(&self, a: LevelCoord, b: LevelCoord) -> OrderRelation {
        if a == b {
            OrderRelation::Equal
        } else if self.strictly_above(a, b) {
            OrderRelation::Higher
        } else if self.strictly_above(b, a) {
            OrderRelation::Lower
        } else {
            OrderRelation::Incomparable
        }
    }

    fn strictly_above(&self, a: LevelCoord, b: LevelCoord) -> bool {
        if self.rows_ordered {
            (a.c > b.c && a.r >= b.r) || (a.c == b.c && a.r > b.r)
        } else {
            a.r == b.r && a.c > b.c
        }
    }

    /// `a >= b` under the rubric order.
    pub(crate) fn at_least(&self, a: LevelCoord, b: LevelCoord) -> bool {
        matches!(self.relation(a, b), OrderRelation::Higher | OrderRelation::Equal)
    }

    /// Every level `b <= a`, row-major.
    pub fn dominated_set(&self, a: LevelCoord) -> Result<Vec<LevelCoord>> {
        self.check(a)?;
        Ok(self.coords().filter(|&b| self.at_least(a, b)).collect())
    }

    /// Every level `b >= a`, row-major.
    pub fn dominating_set(&self, a: LevelCoord) -> Result<Vec<LevelCoord>> {
        self.check(a)?;
        Ok(self.coords().filter(|&b| self.at_least(b, a)).collect())
    }
}

fn check_unique(kind: &str, items: &[Descriptor]) -> Result<()> {
    let mut seen = HashSet::new();
    for item in items {
        if !seen.insert(item.id.as_str()) {
            return Err(Error::validation(format!("duplicate {kind} id '{}'", item.id)));
        }
    }
    Ok(())
}

/// The 3x3 Cross Array Task rubric: algorithm dimension rows by autonomy columns.
pub fn cat_rubric() -> Rubric {
    let rows = vec![
        Descriptor::new("0D", "Colour-one-dot operations only"),
        Descriptor::new("1D", "Rows, diagonals, squares and other structures"),
        Descriptor::new("2D", "Repetitions over dots or structures"),
    ];
    let columns = vec![
        Descriptor::new("VSF", "Voice, empty scheme and feedback"),
        Descriptor::new("VS", "Voice and empty scheme"),
        Descriptor::new("V", "Voice only"),
    ];
    let cells = rows
        .iter()
        .map(|row| {
            columns
                .iter()
                .map(|col| {
                    format!(
                        "Solves the scheme with a {} algorithm using: {}",
                        row.id,
                        col.label.to_lowercase()
                    )
                })
                .collect()
        })
        .collect();
    Rubric::new("cat", rows, columns, cells, true).expect("static CAT rubric is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(r: usize, c: usize) -> LevelCoord {
        LevelCoord::new(r, c)
    }

    // CAT labels: rows 0D=1, 1D=2, 2D=3; columns VSF=1, VS=2, V=3.

    #[test]
    fn cat_examples() {
        let cat = cat_rubric();
        assert_eq!(cat.compare(at(2, 3), at(3, 2)).unwrap(), OrderRelation::Incomparable);
        assert_eq!(cat.compare(at(2, 2), at(2, 2)).unwrap(), OrderRelation::Equal);
        assert_eq!(cat.compare(at(1, 2), at(2, 3)).unwrap(), OrderRelation::Lower);
        assert_eq!(cat.cell_label(at(2, 2)), "1D-VS");
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let cat = cat_rubric();
        assert!(matches!(cat.compare(at(0, 1), at(1, 1)), Err(Error::Validation(_))));
        assert!(matches!(cat.compare(at(1, 1), at(1, 4)), Err(Error::Validation(_))));
        assert!(cat.dominated_set(at(4, 1)).is_err());
        assert!(cat.dominating_set(at(1, 0)).is_err());
    }

    #[test]
    fn dominance_sets_on_cat() {
        let cat = cat_rubric();
        assert_eq!(cat.dominating_set(at(1, 1)).unwrap().len(), 9);
        assert_eq!(cat.dominated_set(at(1, 1)).unwrap(), vec![at(1, 1)]);
        assert_eq!(
            cat.dominated_set(at(2, 2)).unwrap(),
            vec![at(1, 1), at(1, 2), at(2, 1), at(2, 2)]
        );
        assert_eq!(cat.dominating_set(at(3, 3)).unwrap(), vec![at(3, 3)]);
    }

    #[test]
    fn unordered_rows_only_compare_within_a_row() {
        let r = Rubric::blank("flat", 2, 3, false).unwrap();
        assert_eq!(r.compare(at(1, 3), at(1, 1)).unwrap(), OrderRelation::Higher);
        assert_eq!(r.compare(at(2, 3), at(1, 1)).unwrap(), OrderRelation::Incomparable);
        assert_eq!(r.dominating_set(at(1, 2)).unwrap(), vec![at(1, 2), at(1, 3)]);
    }

    #[test]
    fn construction_rejects_bad_shapes() {
        assert!(Rubric::blank("empty", 0, 3, true).is_err());
        assert!(Rubric::blank("empty", 3, 0, true).is_err());
        let rows = vec![Descriptor::new("a", ""), Descriptor::new("a", "")];
        let cols = vec![Descriptor::new("x", "")];
        assert!(Rubric::new("dup", rows, cols.clone(), vec![vec![String::new()]; 2], true).is_err());
        let rows = vec![Descriptor::new("a", ""), Descriptor::new("b", "")];
        assert!(Rubric::new("shape", rows, cols, vec![vec![String::new()]; 3], true).is_err());
    }
}
