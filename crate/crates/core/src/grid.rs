//! Symbolic images: rectangular grids of cell codes, and cell-aligned boxes.

use crate::error::{Error, Result};

pub type CellCode = u16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    h: usize,
    w: usize,
    cells: Vec<CellCode>,
}

impl Grid {
    pub fn new(h: usize, w: usize, cells: Vec<CellCode>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Input(format!("empty grid {h}x{w}")));
        }
        if cells.len() != h * w {
            return Err(Error::Input(format!(
                "grid {h}x{w} needs {} cells, got {}",
                h * w,
                cells.len()
            )));
        }
        Ok(Self { h, w, cells })
    }

    pub fn filled(h: usize, w: usize, code: CellCode) -> Result<Self> {
        Self::new(h, w, vec![code; h * w])
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn cells(&self) -> &[CellCode] {
        &self.cells
    }

    pub fn get(&self, r: usize, c: usize) -> CellCode {
        self.cells[r * self.w + c]
    }

    pub fn set(&mut self, r: usize, c: usize, code: CellCode) {
        self.cells[r * self.w + c] = code;
    }

    pub fn fill(&mut self, b: &BBox, code: CellCode) {
        for r in b.r0..b.r1 {
            for c in b.c0..b.c1 {
                self.set(r, c, code);
            }
        }
    }

    /// Copy of the `h x w` window whose top-left cell is `(r, c)`.
    pub fn crop(&self, r: usize, c: usize, h: usize, w: usize) -> Result<Grid> {
        if h == 0 || w == 0 || r + h > self.h || c + w > self.w {
            return Err(Error::Param(format!(
                "window {h}x{w} at ({r},{c}) outside {}x{} grid",
                self.h, self.w
            )));
        }
        let mut cells = Vec::with_capacity(h * w);
        for rr in r..r + h {
            cells.extend_from_slice(&self.cells[rr * self.w + c..rr * self.w + c + w]);
        }
        Grid::new(h, w, cells)
    }
}

/// Half-open cell rectangle `[r0, r1) x [c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub r0: usize,
    pub c0: usize,
    pub r1: usize,
    pub c1: usize,
}

impl BBox {
    pub fn new(r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        Self { r0, c0, r1, c1 }
    }

    pub fn height(&self) -> usize {
        self.r1.saturating_sub(self.r0)
    }

    pub fn width(&self) -> usize {
        self.c1.saturating_sub(self.c0)
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    pub fn contains_cell(&self, r: usize, c: usize) -> bool {
        r >= self.r0 && r < self.r1 && c >= self.c0 && c < self.c1
    }

    pub fn fits(&self, h: usize, w: usize) -> bool {
        self.r0 < self.r1 && self.c0 < self.c1 && self.r1 <= h && self.c1 <= w
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.r0 < o.r1 && o.r0 < self.r1 && self.c0 < o.c1 && o.c0 < self.c1
    }

    /// Continuous centre `(row, col)` in cell-edge coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.r0 + self.r1) as f64 / 2.0,
            (self.c0 + self.c1) as f64 / 2.0,
        )
    }

    /// True when `inner` sits inside `self` with at least one cell of margin on every side.
    pub fn strictly_encloses(&self, inner: &BBox) -> bool {
        inner.r0 > self.r0 && inner.r1 < self.r1 && inner.c0 > self.c0 && inner.c1 < self.c1
    }
}
