//! Sparse histograms over half-open dyadic cells.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ifs::{AmbientDim, Point};

/// Finest supported dyadic level; keeps `floor(x·2^L)` inside `i64` for |x| ≤ 2^8.
pub const MAX_LEVEL: u32 = 52;

/// Cell index; in 1-D the second component is always 0.
pub type Cell = [i64; 2];

/// Index of the level-`level` dyadic interval `[j 2^{-L}, (j+1) 2^{-L})` containing `x`.
#[inline]
pub fn cell_index(x: f64, level: u32) -> i64 {
    // multiplying by a power of two is exact, so the floor is the exact cell
    (x * (level as f64).exp2()).floor() as i64
}

#[inline]
pub fn cell_of(p: Point, level: u32, dim: AmbientDim) -> Cell {
    match dim {
        AmbientDim::One => [cell_index(p[0], level), 0],
        AmbientDim::Two => [cell_index(p[0], level), cell_index(p[1], level)],
    }
}

/// A finitely supported measure on dyadic cells of one level, cells sorted
/// ascending, every mass strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicMeasure {
    level: u32,
    dim: AmbientDim,
    cells: Vec<(Cell, f64)>,
    total_mass: f64,
}

fn check_level(level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "level {level} exceeds the supported maximum {MAX_LEVEL}"
        )));
    }
    Ok(())
}

impl DyadicMeasure {
    /// Builds a measure from possibly repeated `(cell, mass)` entries. Repeated
    /// cells are summed in the order given; zero masses are dropped.
    pub fn from_entries(level: u32, dim: AmbientDim, mut entries: Vec<(Cell, f64)>) -> Result<Self> {
        check_level(level)?;
        for (c, m) in &entries {
            if !(m.is_finite() && *m >= 0.0) {
                return Err(Error::InvalidInput(format!("mass {m} at cell {c:?} is not a nonnegative number")));
            }
            if dim == AmbientDim::One && c[1] != 0 {
                return Err(Error::InvalidInput("1-D cells must have zero second index".into()));
            }
        }
        entries.sort_by_key(|a| a.0);
        let mut cells: Vec<(Cell, f64)> = Vec::with_capacity(entries.len());
        for (c, m) in entries {
            match cells.last_mut() {
                Some(last) if last.0 == c => last.1 += m,
                _ => cells.push((c, m)),
            }
        }
        cells.retain(|&(_, m)| m > 0.0);
        let total_mass = cells.iter().map(|&(_, m)| m).sum();
        Ok(DyadicMeasure {
            level,
            dim,
            cells,
            total_mass,
        })
    }

    pub fn from_map(level: u32, dim: AmbientDim, map: HashMap<Cell, f64>) -> Result<Self> {
        Self::from_entries(level, dim, map.into_iter().collect())
    }

    /// Unit mass in the cell containing `p`.
    pub fn point_mass(dim: AmbientDim, p: Point, level: u32) -> Result<Self> {
        Self::from_entries(level, dim, vec![(cell_of(p, level, dim), 1.0)])
    }

    /// Deposits weighted points into the level-`level` cells containing them.
    pub fn from_points(level: u32, dim: AmbientDim, points: &[(Point, f64)]) -> Result<Self> {
        Self::from_entries(
            level,
            dim,
            points.iter().map(|&(p, m)| (cell_of(p, level, dim), m)).collect(),
        )
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> AmbientDim {
        self.dim
    }

    pub fn cells(&self) -> &[(Cell, f64)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|&(_, m)| m)
    }

    pub fn cell_width(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Center of a cell of this measure's level.
    pub fn cell_center(&self, cell: Cell) -> Point {
        let w = self.cell_width();
        match self.dim {
            AmbientDim::One => [(cell[0] as f64 + 0.5) * w, 0.0],
            AmbientDim::Two => [(cell[0] as f64 + 0.5) * w, (cell[1] as f64 + 0.5) * w],
        }
    }

    /// Aggregate into parent cells at a coarser level.
    pub fn coarsen(&self, level: u32) -> Result<Self> {
        if level > self.level {
            return Err(Error::InvalidParameter(format!(
                "cannot coarsen level {} to finer level {level}",
                self.level
            )));
        }
        if level == self.level {
            return Ok(self.clone());
        }
        let shift = self.level - level;
        // arithmetic shift is floor division by 2^shift, also for negative indices
        let entries = self
            .cells
            .iter()
            .map(|&([x, y], m)| ([x >> shift, y >> shift], m))
            .collect();
        Self::from_entries(level, self.dim, entries)
    }

    /// Serialize as CSV: a `# level=L` comment line, then `cell[,cell_y],mass` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# level={}", self.level);
        match self.dim {
            AmbientDim::One => s.push_str("cell,mass\n"),
            AmbientDim::Two => s.push_str("cell_x,cell_y,mass\n"),
        }
        for &([x, y], m) in &self.cells {
            match self.dim {
                AmbientDim::One => {
                    let _ = writeln!(s, "{x},{m:.16e}");
                }
                AmbientDim::Two => {
                    let _ = writeln!(s, "{x},{y},{m:.16e}");
                }
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut level = None;
        let mut dim = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("level=") {
                    level = Some(v.trim().parse::<u32>().map_err(|e| {
                        Error::InvalidInput(format!("line {}: bad level: {e}", lineno + 1))
                    })?);
                }
                continue;
            }
            if line.starts_with("cell") {
                dim = Some(if line.split(',').count() == 3 {
                    AmbientDim::Two
                } else {
                    AmbientDim::One
                });
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::InvalidInput(format!("line {}: {what}", lineno + 1));
            let d = match fields.len() {
                2 => AmbientDim::One,
                3 => AmbientDim::Two,
                _ => return Err(bad("expected 2 or 3 fields")),
            };
            if *dim.get_or_insert(d) != d {
                return Err(bad("inconsistent column count"));
            }
            let x: i64 = fields[0].parse().map_err(|_| bad("bad cell index"))?;
            let y: i64 = if d == AmbientDim::Two {
                fields[1].parse().map_err(|_| bad("bad cell index"))?
            } else {
                0
            };
            let m: f64 = fields[fields.len() - 1].parse().map_err(|_| bad("bad mass"))?;
            entries.push(([x, y], m));
        }
        let level = level.ok_or_else(|| Error::InvalidInput("missing `# level=` line".into()))?;
        Self::from_entries(level, dim.unwrap_or(AmbientDim::One), entries)
    }
}
