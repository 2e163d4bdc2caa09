use crate::geometry::{Circle, Point};

/// Square occupancy grid over `[0, size * cell)^2`, x-major:
/// `cells[i * size + j]` covers x cell `i` and y cell `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    size: usize,
    cells: Vec<u8>,
}

impl GridMap {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            cells: vec![0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.cells[i * self.size + j]
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| **c == 1).count()
    }
}

/// Marks every cell whose center lies in some disk (boundary included).
pub fn rasterize(obstacles: &[Circle], size: usize, cell: f64) -> GridMap {
    let mut g = GridMap::empty(size);
    for c in obstacles {
        let lo = |v: f64| (((v - c.radius) / cell).floor().max(0.0) as usize).min(size);
        let hi = |v: f64| ((((v + c.radius) / cell).ceil()).max(0.0) as usize).min(size);
        for i in lo(c.center.x)..hi(c.center.x) {
            for j in lo(c.center.y)..hi(c.center.y) {
                let p = Point::new((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell);
                if c.contains(&p) {
                    g.cells[i * size + j] = 1;
                }
            }
        }
    }
    g
}
