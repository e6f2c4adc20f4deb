//! Shape measures of the liquid phase used to follow droplet dynamics.

use petgraph::unionfind::UnionFind;

use crate::config::Droplet;
use crate::mesh::{Boundary, CellField, StaggeredGrid};

/// Liquid fraction `(n - gas) / (liquid - gas)` of one cell value.
pub fn liquid_indicator(n: f64, gas: f64, liquid: f64) -> f64 {
    (n - gas) / (liquid - gas)
}

/// The four corner cells of the cell block covered by a droplet, if any cell is covered.
pub fn droplet_corner_cells(droplet: &Droplet, grid: &StaggeredGrid) -> Option<[(usize, usize); 4]> {
    let mut inside = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .filter(|&(i, j)| {
            let (x, y) = grid.cell_center(i, j);
            droplet.contains(x, y)
        })
        .peekable();
    let &(i0, j0) = inside.peek()?;
    let (mut lo, mut hi) = ((i0, j0), (i0, j0));
    for (i, j) in inside {
        lo = (lo.0.min(i), lo.1.min(j));
        hi = (hi.0.max(i), hi.1.max(j));
    }
    Some([(lo.0, lo.1), (hi.0, lo.1), (lo.0, hi.1), (hi.0, hi.1)])
}

/// Sum of the liquid indicator over the droplet's four corner cells; 4 for
/// the sharp square, smaller once the corners round off.
pub fn corner_occupancy(n: &CellField, droplet: &Droplet, gas: f64, liquid: f64, grid: &StaggeredGrid) -> f64 {
    droplet_corner_cells(droplet, grid)
        .map(|cells| cells.iter().map(|&(i, j)| liquid_indicator(n.at(i, j), gas, liquid)).sum())
        .unwrap_or(0.0)
}

/// Number of 4-connected regions whose liquid indicator exceeds one half.
pub fn liquid_regions(n: &CellField, gas: f64, liquid: f64, grid: &StaggeredGrid) -> usize {
    let wet: Vec<bool> = n.data.iter().map(|&v| liquid_indicator(v, gas, liquid) > 0.5).collect();
    let mut sets = UnionFind::<usize>::new(grid.n_cells());
    let periodic = grid.bc == Boundary::Periodic;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.cell(i, j);
            if !wet[c] {
                continue;
            }
            let right = if i + 1 < grid.nx { Some(i + 1) } else { periodic.then_some(0) };
            let up = if j + 1 < grid.ny { Some(j + 1) } else { periodic.then_some(0) };
            if let Some(r) = right.map(|r| grid.cell(r, j)).filter(|&r| wet[r]) {
                sets.union(c, r);
            }
            if let Some(u) = up.map(|u| grid.cell(i, u)).filter(|&u| wet[u]) {
                sets.union(c, u);
            }
        }
    }
    let mut roots: Vec<usize> = (0..grid.n_cells()).filter(|&c| wet[c]).map(|c| sets.find(c)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}
