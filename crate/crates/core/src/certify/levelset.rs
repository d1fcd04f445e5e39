//! Zero level set of a value function, for plotting.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::par;
use crate::poly::{CompiledPoly, Polynomial};
use crate::semialg::BoundingBox;

#[derive(Debug, Error)]
pub enum LevelSetError {
    #[error("level-set export unsupported for dimension {0} (only 1 to 3)")]
    Unsupported(usize),
    #[error("resolution must be at least 2 nodes per axis, got {0}")]
    Resolution(usize),
    #[error("polynomial has {poly} variables but the box has {bbox}")]
    Dimension { poly: usize, bbox: usize },
}

/// Grid samples of `v` and, in two dimensions, the polyline segments of
/// `{v = 0}` from marching squares.
#[derive(Debug, Clone)]
pub struct LevelSet {
    pub dimension: usize,
    /// Nodes per axis.
    pub resolution: usize,
    /// Grid nodes in row-major order (last axis fastest) with their values.
    pub grid: Vec<(Vec<f64>, f64)>,
    /// Crossing points on grid edges; shared between adjacent cells.
    pub points: Vec<Vec<f64>>,
    /// Index pairs into `points`.
    pub segments: Vec<(usize, usize)>,
}

impl LevelSet {
    pub fn write_grid_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let axes = ["x", "y", "z"];
        writeln!(w, "{},v", axes[..self.dimension].join(","))?;
        for (x, v) in &self.grid {
            write_row(&mut w, x, Some(*v))?;
        }
        Ok(())
    }

    pub fn write_points_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y")?;
        for p in &self.points {
            write_row(&mut w, p, None)?;
        }
        Ok(())
    }

    pub fn write_segments_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "start,end")?;
        for (a, b) in &self.segments {
            writeln!(w, "{a},{b}")?;
        }
        Ok(())
    }
}

fn write_row<W: Write>(w: &mut W, x: &[f64], v: Option<f64>) -> io::Result<()> {
    let mut cells: Vec<String> = x.iter().map(|c| format!("{c:?}")).collect();
    if let Some(v) = v {
        cells.push(format!("{v:?}"));
    }
    writeln!(w, "{}", cells.join(","))
}

#[derive(Clone, Copy, Hash, PartialEq, Eq)]
enum Edge {
    /// From node (i, j) to (i + 1, j).
    H(usize, usize),
    /// From node (i, j) to (i, j + 1).
    V(usize, usize),
}

pub fn extract_level_set(v: &Polynomial, bbox: &BoundingBox, resolution: usize) -> Result<LevelSet, LevelSetError> {
    let n = bbox.dimension();
    if n == 0 || n > 3 {
        return Err(LevelSetError::Unsupported(n));
    }
    if v.nvars() != n {
        return Err(LevelSetError::Dimension { poly: v.nvars(), bbox: n });
    }
    if resolution < 2 {
        return Err(LevelSetError::Resolution(resolution));
    }
    let bounds = bbox.bounds().to_vec();
    let coord = |axis: usize, k: usize| {
        let (lo, hi) = bounds[axis];
        lo + (hi - lo) * k as f64 / (resolution - 1) as f64
    };
    let total = resolution.pow(n as u32);
    let c = CompiledPoly::new(v);
    let grid = par::map_range(total, |flat| {
        let mut rest = flat;
        let mut x = vec![0.0; n];
        for axis in (0..n).rev() {
            x[axis] = coord(axis, rest % resolution);
            rest /= resolution;
        }
        let val = c.eval(&x);
        (x, val)
    });
    let mut out = LevelSet { dimension: n, resolution, grid, points: Vec::new(), segments: Vec::new() };
    if n == 2 {
        marching_squares(&mut out, &c, &coord);
    }
    Ok(out)
}

fn marching_squares(ls: &mut LevelSet, c: &CompiledPoly, coord: &dyn Fn(usize, usize) -> f64) {
    let r = ls.resolution;
    // Grid is indexed [i * r + j] with i along x and j along y.
    let val = |i: usize, j: usize| ls.grid[i * r + j].1;
    let mut index: HashMap<Edge, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut segments = Vec::new();
    let mut crossing = |e: Edge, points: &mut Vec<Vec<f64>>| -> usize {
        *index.entry(e).or_insert_with(|| {
            let ((i0, j0), (i1, j1)) = match e {
                Edge::H(i, j) => ((i, j), (i + 1, j)),
                Edge::V(i, j) => ((i, j), (i, j + 1)),
            };
            let (a, b) = (val(i0, j0), val(i1, j1));
            let t = if a == b { 0.5 } else { a / (a - b) };
            let p0 = [coord(0, i0), coord(1, j0)];
            let p1 = [coord(0, i1), coord(1, j1)];
            points.push(vec![p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])]);
            points.len() - 1
        })
    };
    for i in 0..r - 1 {
        for j in 0..r - 1 {
            let inside = [val(i, j) >= 0.0, val(i + 1, j) >= 0.0, val(i + 1, j + 1) >= 0.0, val(i, j + 1) >= 0.0];
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let cut = [inside[0] != inside[1], inside[1] != inside[2], inside[2] != inside[3], inside[3] != inside[0]];
            let edges = [bottom, right, top, left];
            let cuts: Vec<Edge> = (0..4).filter(|&k| cut[k]).map(|k| edges[k]).collect();
            let pairs: Vec<(Edge, Edge)> = match cuts.len() {
                2 => vec![(cuts[0], cuts[1])],
                4 => {
                    // Saddle: the cell centre decides which diagonal is connected.
                    let centre = [0.5 * (coord(0, i) + coord(0, i + 1)), 0.5 * (coord(1, j) + coord(1, j + 1))];
                    if (c.eval(&centre) >= 0.0) == inside[0] {
                        vec![(bottom, right), (top, left)]
                    } else {
                        vec![(left, bottom), (right, top)]
                    }
                }
                _ => Vec::new(),
            };
            for (a, b) in pairs {
                let ia = crossing(a, &mut points);
                let ib = crossing(b, &mut points);
                segments.push((ia, ib));
            }
        }
    }
    ls.points = points;
    ls.segments = segments;
}
