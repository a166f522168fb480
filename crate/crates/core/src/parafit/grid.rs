use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::BoxDomain;

/// The coarse grid `G_ε` (coverage points with neighbourhoods) and the fine
/// grid `G` (one-sidedness points and integration cells).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dt: Vec<f64>,
    pub dd: Vec<f64>,
    /// Cells per axis of the coarse grid.
    pub t_cells: Vec<usize>,
    /// Cells per axis of the fine grid.
    pub d_cells: Vec<usize>,
    #[serde(skip)]
    pub eps_points: Vec<Vec<f64>>,
    #[serde(skip)]
    pub int_points: Vec<Vec<f64>>,
    /// Indices into `eps_points` differing by exactly `±Δtᵢ` in every coordinate.
    #[serde(skip)]
    pub neighbors: Vec<Vec<usize>>,
    /// Lower corners `d` of the cells `[d, d + Δd]`, as indices into `int_points`.
    #[serde(skip)]
    pub cells: Vec<usize>,
}

/// Cells per axis for a width, rejecting non-integral ratios.
fn cell_count(width: f64, step: f64, axis: usize) -> Result<usize> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Input(format!("grid width on axis {axis} must be positive, got {step}")));
    }
    let ratio = width / step;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Input(format!(
            "grid width {step} does not divide edge {width} on axis {axis}"
        )));
    }
    Ok(k as usize)
}

fn axis_points(a: f64, b: f64, cells: usize) -> Vec<f64> {
    let h = (b - a) / cells as f64;
    (0..=cells)
        .map(|k| if k == cells { b } else { a + k as f64 * h })
        .collect()
}

/// Cartesian product in row-major order (last axis fastest).
fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for ax in axes {
        let mut next = Vec::with_capacity(out.len() * ax.len());
        for p in &out {
            for v in ax {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn flat_index(idx: &[usize], sizes: &[usize]) -> usize {
    idx.iter().zip(sizes).fold(0, |acc, (i, s)| acc * s + i)
}

fn unflatten(mut k: usize, sizes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; sizes.len()];
    for i in (0..sizes.len()).rev() {
        idx[i] = k % sizes[i];
        k /= sizes[i];
    }
    idx
}

impl GridSpec {
    /// Builds both grids from widths that divide every edge.
    pub fn build(dom: &BoxDomain, dt: &[f64], dd: &[f64]) -> Result<Self> {
        if dt.len() != dom.dim() || dd.len() != dom.dim() {
            return Err(Error::Input("grid widths must match the domain dimension".into()));
        }
        let t_cells = (0..dom.dim())
            .map(|i| cell_count(dom.width(i), dt[i], i))
            .collect::<Result<Vec<_>>>()?;
        let d_cells = (0..dom.dim())
            .map(|i| cell_count(dom.width(i), dd[i], i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_counts(dom, &t_cells, &d_cells))
    }

    /// Builds both grids from per-axis cell counts.
    pub fn from_counts(dom: &BoxDomain, t_cells: &[usize], d_cells: &[usize]) -> Self {
        let n = dom.dim();
        let t_axes: Vec<Vec<f64>> = (0..n)
            .map(|i| axis_points(dom.lower()[i], dom.upper()[i], t_cells[i]))
            .collect();
        let d_axes: Vec<Vec<f64>> = (0..n)
            .map(|i| axis_points(dom.lower()[i], dom.upper()[i], d_cells[i]))
            .collect();
        let eps_points = product(&t_axes);
        let int_points = product(&d_axes);
        let t_sizes: Vec<usize> = t_cells.iter().map(|c| c + 1).collect();
        let d_sizes: Vec<usize> = d_cells.iter().map(|c| c + 1).collect();

        let mut neighbors = Vec::with_capacity(eps_points.len());
        for k in 0..eps_points.len() {
            let idx = unflatten(k, &t_sizes);
            let mut nb = Vec::new();
            for signs in 0..(1usize << n) {
                let mut other = Vec::with_capacity(n);
                let mut inside = true;
                for i in 0..n {
                    let up = (signs >> i) & 1 == 1;
                    let j = idx[i] as isize + if up { 1 } else { -1 };
                    if j < 0 || j as usize >= t_sizes[i] {
                        inside = false;
                        break;
                    }
                    other.push(j as usize);
                }
                if inside {
                    nb.push(flat_index(&other, &t_sizes));
                }
            }
            nb.sort_unstable();
            neighbors.push(nb);
        }
        let cells: Vec<usize> = (0..int_points.len())
            .filter(|&k| {
                let idx = unflatten(k, &d_sizes);
                idx.iter().zip(d_cells).all(|(i, c)| i < c)
            })
            .collect();
        GridSpec {
            dt: (0..n).map(|i| dom.width(i) / t_cells[i] as f64).collect(),
            dd: (0..n).map(|i| dom.width(i) / d_cells[i] as f64).collect(),
            t_cells: t_cells.to_vec(),
            d_cells: d_cells.to_vec(),
            eps_points,
            int_points,
            neighbors,
            cells,
        }
    }

    /// Upper corner of the cell starting at `int_points[d]`.
    pub fn cell_upper(&self, d: usize) -> Vec<f64> {
        let sizes: Vec<usize> = self.d_cells.iter().map(|c| c + 1).collect();
        let mut idx = unflatten(d, &sizes);
        for i in idx.iter_mut() {
            *i += 1;
        }
        let k = flat_index(&idx, &sizes);
        self.int_points[k].clone()
    }
}

/// Shrinks a raw width to the largest width `≤ raw` dividing `edge`.
pub(crate) fn rounded_cells(edge: f64, raw: f64) -> Result<usize> {
    if raw.is_infinite() {
        return Ok(1);
    }
    if !(raw > 0.0) || raw < 1e-12 * edge {
        return Err(Error::Resolution(format!(
            "grid width {raw:e} underflows on an edge of length {edge}"
        )));
    }
    let cells = (edge / raw * (1.0 - 1e-12)).ceil().max(1.0);
    if cells > 1e8 {
        return Err(Error::Resolution(format!("grid needs {cells:e} cells per axis")));
    }
    Ok(cells as usize)
}
