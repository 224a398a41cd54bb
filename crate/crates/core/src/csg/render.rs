//! Rasterizer and voxelizer.
//!
//! Cell centres and shape parameters are mapped into integer coordinates
//! scaled by `2·R` (R = grid resolution): cell `i` has centre `(2i+1)·32` and
//! lattice value `c` (world position `c + 0.5` in a `[0, 32)` box) becomes
//! `(2c+1)·R`; lengths scale by `2R`. All membership tests are exact integer
//! comparisons on closed shapes.

use super::expr::{Angle, CsgExpr, Dim};
use super::grid::BitGrid;
use super::CsgError;

#[inline]
fn cell_centre(i: usize) -> i64 {
    (2 * i as i64 + 1) * 32
}

#[inline]
fn point(c: u8, resolution: usize) -> i64 {
    (2 * c as i64 + 1) * resolution as i64
}

#[inline]
fn length(l: u8, resolution: usize) -> i64 {
    2 * l as i64 * resolution as i64
}

/// Render a 2D tree onto an `resolution × resolution` canvas.
pub fn render2d(expr: &CsgExpr, resolution: usize) -> Result<BitGrid, CsgError> {
    if expr.dim()? != Dim::Two {
        return Err(CsgError::InvalidDimension("render2d given a 3D tree".into()));
    }
    Ok(render_tree(expr, resolution))
}

/// Render a 3D tree into a `resolution³` voxel grid.
pub fn render3d(expr: &CsgExpr, resolution: usize) -> Result<BitGrid, CsgError> {
    if expr.dim()? != Dim::Three {
        return Err(CsgError::InvalidDimension("render3d given a 2D tree".into()));
    }
    Ok(render_tree(expr, resolution))
}

/// Render a tree of either dimensionality.
pub fn render(expr: &CsgExpr, resolution: usize) -> Result<BitGrid, CsgError> {
    expr.dim()?;
    Ok(render_tree(expr, resolution))
}

fn render_tree(expr: &CsgExpr, resolution: usize) -> BitGrid {
    match expr {
        CsgExpr::Union(a, b) => render_tree(a, resolution)
            .union(&render_tree(b, resolution))
            .expect("children share dimensions"),
        CsgExpr::Difference(a, b) => render_tree(a, resolution)
            .difference(&render_tree(b, resolution))
            .expect("children share dimensions"),
        primitive => render_primitive(primitive, resolution),
    }
}

/// Rasterize a single primitive.
pub fn render_primitive(expr: &CsgExpr, resolution: usize) -> BitGrid {
    let n = resolution;
    match *expr {
        CsgExpr::Circle { r, x, y } => {
            let (cx, cy, rr) = (point(x, n), point(y, n), length(r, n));
            scan2(n, |px, py| {
                let (dx, dy) = (px - cx, py - cy);
                dx * dx + dy * dy <= rr * rr
            })
        }
        CsgExpr::Quadrilateral { x, y, w, h, angle } => {
            let (cx, cy) = (point(x, n), point(y, n));
            // half extents in scaled units
            let (hw, hh) = (length(w, n) / 2, length(h, n) / 2);
            match angle {
                Angle::Deg0 => scan2(n, |px, py| (px - cx).abs() <= hw && (py - cy).abs() <= hh),
                Angle::Deg45 => scan2(n, |px, py| {
                    let (dx, dy) = (px - cx, py - cy);
                    let (u, v) = (dx + dy, dy - dx);
                    u * u <= 2 * hw * hw && v * v <= 2 * hh * hh
                }),
            }
        }
        CsgExpr::Sphere { r, x, y, z } => {
            let (cx, cy, cz, rr) = (point(x, n), point(y, n), point(z, n), length(r, n));
            scan3(n, |px, py, pz| {
                let (dx, dy, dz) = (px - cx, py - cy, pz - cz);
                dx * dx + dy * dy + dz * dz <= rr * rr
            })
        }
        CsgExpr::Cube { x0, y0, z0, x1, y1, z1 } => {
            if x1 <= x0 || y1 <= y0 || z1 <= z0 {
                return BitGrid::cube(n);
            }
            let lo = [point(x0, n), point(y0, n), point(z0, n)];
            let hi = [point(x1, n), point(y1, n), point(z1, n)];
            scan3(n, |px, py, pz| {
                (lo[0]..=hi[0]).contains(&px) && (lo[1]..=hi[1]).contains(&py) && (lo[2]..=hi[2]).contains(&pz)
            })
        }
        CsgExpr::Cylinder { x0, y0, z0, x1, y1, z1, r } => {
            let a = [point(x0, n), point(y0, n), point(z0, n)];
            let b = [point(x1, n), point(y1, n), point(z1, n)];
            let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if dd == 0 {
                return BitGrid::cube(n);
            }
            let rr = length(r, n);
            scan3(n, |px, py, pz| {
                let w = [px - a[0], py - a[1], pz - a[2]];
                let wd = w[0] * d[0] + w[1] * d[1] + w[2] * d[2];
                if wd < 0 || wd > dd {
                    return false;
                }
                let ww = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
                // squared distance to the axis, times dd
                ww * dd - wd * wd <= rr * rr * dd
            })
        }
        CsgExpr::Union(..) | CsgExpr::Difference(..) => render_tree(expr, resolution),
    }
}

fn scan2(n: usize, inside: impl Fn(i64, i64) -> bool) -> BitGrid {
    let mut grid = BitGrid::square(n);
    for j in 0..n {
        let py = cell_centre(j);
        for i in 0..n {
            if inside(cell_centre(i), py) {
                grid.set(j * n + i, true);
            }
        }
    }
    grid
}

fn scan3(n: usize, inside: impl Fn(i64, i64, i64) -> bool) -> BitGrid {
    let mut grid = BitGrid::cube(n);
    for k in 0..n {
        let pz = cell_centre(k);
        for j in 0..n {
            let py = cell_centre(j);
            for i in 0..n {
                if inside(cell_centre(i), py, pz) {
                    grid.set((k * n + j) * n + i, true);
                }
            }
        }
    }
    grid
}
