//! Marching-squares iso-line extraction from scalar grids.

use serde::Serialize;

/// Scalar field sampled on a rectangular grid.  `values[i][j]` is the sample
/// at `(xs[i], ys[j])`.
#[derive(Debug, Clone)]
pub struct ScalarGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ScalarGrid {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<Vec<f64>>) -> Self {
        assert_eq!(values.len(), xs.len(), "row count must match xs");
        for row in &values {
            assert_eq!(row.len(), ys.len(), "column count must match ys");
        }
        Self { xs, ys, values }
    }
}

/// One open or closed contour segment chain in grid coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
}

/// Extract iso-lines at `level` via marching squares with linear edge
/// interpolation.  Returns one polyline per connected chain; a level outside
/// the grid's value range yields an empty set.  Cells whose corners all sit
/// exactly on the level (degenerate flat regions) produce no segments.
pub fn iso_contour(grid: &ScalarGrid, level: f64) -> Vec<Polyline> {
    let nx = grid.xs.len();
    let ny = grid.ys.len();
    if nx < 2 || ny < 2 {
        return Vec::new();
    }

    // Collect raw segments per cell, then stitch shared endpoints into chains.
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            // Corners in marching-squares order: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
            let corners = [
                (grid.xs[i], grid.ys[j], grid.values[i][j]),
                (grid.xs[i + 1], grid.ys[j], grid.values[i + 1][j]),
                (grid.xs[i + 1], grid.ys[j + 1], grid.values[i + 1][j + 1]),
                (grid.xs[i], grid.ys[j + 1], grid.values[i][j + 1]),
            ];
            let mut case = 0usize;
            for (k, c) in corners.iter().enumerate() {
                if c.2 > level {
                    case |= 1 << k;
                }
            }
            if case == 0 || case == 0b1111 {
                continue;
            }
            let edge = |a: usize, b: usize| -> (f64, f64) {
                let (xa, ya, va) = corners[a];
                let (xb, yb, vb) = corners[b];
                let t = if (vb - va).abs() < f64::EPSILON {
                    0.5
                } else {
                    ((level - va) / (vb - va)).clamp(0.0, 1.0)
                };
                (xa + t * (xb - xa), ya + t * (yb - ya))
            };
            // Edge indices: 0 between corners 0-1, 1 between 1-2, 2 between 2-3,
            // 3 between 3-0.
            let pairs: &[(usize, usize)] = match case {
                0b0001 | 0b1110 => &[(3, 0)],
                0b0010 | 0b1101 => &[(0, 1)],
                0b0100 | 0b1011 => &[(1, 2)],
                0b1000 | 0b0111 => &[(2, 3)],
                0b0011 | 0b1100 => &[(3, 1)],
                0b0110 | 0b1001 => &[(0, 2)],
                // Saddles: resolve with the cell-centre average.
                0b0101 => {
                    let centre = corners.iter().map(|c| c.2).sum::<f64>() / 4.0;
                    if centre > level {
                        &[(3, 2), (0, 1)]
                    } else {
                        &[(3, 0), (1, 2)]
                    }
                }
                0b1010 => {
                    let centre = corners.iter().map(|c| c.2).sum::<f64>() / 4.0;
                    if centre > level {
                        &[(3, 0), (1, 2)]
                    } else {
                        &[(3, 2), (0, 1)]
                    }
                }
                _ => unreachable!(),
            };
            let edge_point = |e: usize| match e {
                0 => edge(0, 1),
                1 => edge(1, 2),
                2 => edge(2, 3),
                3 => edge(3, 0),
                _ => unreachable!(),
            };
            for &(ea, eb) in pairs {
                let a = edge_point(ea);
                let b = edge_point(eb);
                if (a.0 - b.0).abs() > 1e-12 || (a.1 - b.1).abs() > 1e-12 {
                    segments.push((a, b));
                }
            }
        }
    }
    stitch(segments)
}

const STITCH_TOL: f64 = 1e-9;

fn close(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0).abs() < STITCH_TOL && (a.1 - b.1).abs() < STITCH_TOL
}

/// Greedy endpoint stitching of segments into polylines.
fn stitch(mut segments: Vec<((f64, f64), (f64, f64))>) -> Vec<Polyline> {
    let mut out = Vec::new();
    while let Some((a, b)) = segments.pop() {
        let mut chain = vec![a, b];
        loop {
            let head = *chain.first().unwrap();
            let tail = *chain.last().unwrap();
            let mut extended = false;
            let mut k = 0;
            while k < segments.len() {
                let (s, e) = segments[k];
                if close(s, tail) {
                    chain.push(e);
                } else if close(e, tail) {
                    chain.push(s);
                } else if close(s, head) {
                    chain.insert(0, e);
                } else if close(e, head) {
                    chain.insert(0, s);
                } else {
                    k += 1;
                    continue;
                }
                segments.swap_remove(k);
                extended = true;
                break;
            }
            if !extended {
                break;
            }
        }
        out.push(Polyline { points: chain });
    }
    out
}
