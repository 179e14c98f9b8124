//! Eigenfunction series for the point-source Poisson problem on `[0, π]²`.

use std::f64::consts::PI;

use super::{grid_2d, ReferenceField};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `(4/π²) Σ_{m,n ≤ M} sin(mx) sin(mx₀) sin(ny) sin(ny₀) / (m² + n²)`.
pub fn poisson_series_value(p: [f64; 2], x0: [f64; 2], terms: usize) -> f64 {
    let a: Vec<f64> = (1..=terms).map(|m| (m as f64 * p[0]).sin() * (m as f64 * x0[0]).sin()).collect();
    let b: Vec<f64> = (1..=terms).map(|n| (n as f64 * p[1]).sin() * (n as f64 * x0[1]).sin()).collect();
    let mut total = 0.0;
    for (mi, am) in a.iter().enumerate() {
        if *am == 0.0 {
            continue;
        }
        let m2 = ((mi + 1) * (mi + 1)) as f64;
        let mut inner = 0.0;
        for (ni, bn) in b.iter().enumerate() {
            inner += bn / (m2 + ((ni + 1) * (ni + 1)) as f64);
        }
        total += am * inner;
    }
    4.0 / (PI * PI) * total
}

/// Series evaluated at `points` (`[N × 2]`); points at the source are
/// flagged singular and set to zero.
pub fn poisson_series(points: &Tensor, x0: [f64; 2], terms: usize) -> Result<ReferenceField> {
    if terms == 0 {
        return Err(Error::Parameter("series needs at least one term".into()));
    }
    if points.shape().len() != 2 || points.row_len() != 2 {
        return Err(Error::contract("poisson series expects [N × 2] points"));
    }
    let mut values = Vec::with_capacity(points.rows());
    let mut singular = Vec::with_capacity(points.rows());
    for i in 0..points.rows() {
        let p = points.row(i);
        let at_source = (p[0] - x0[0]).abs() < 1e-12 && (p[1] - x0[1]).abs() < 1e-12;
        singular.push(at_source);
        values.push(if at_source { 0.0 } else { poisson_series_value([p[0], p[1]], x0, terms) });
    }
    let mut field = ReferenceField::new(points.clone(), Tensor::new(vec![points.rows(), 1], values)?, &["x", "y"], &["u"])?
        .with_meta("generator", "poisson-series")
        .with_meta("terms", terms);
    field.singular = singular;
    Ok(field)
}

/// Uniform `mesh × mesh` grid over `[0, π]²` without the boundary and the
/// source node.
pub fn poisson_mesh(mesh: usize, x0: [f64; 2]) -> Result<Tensor> {
    if mesh < 3 {
        return Err(Error::Parameter("mesh needs at least 3 nodes per side".into()));
    }
    let rows: Vec<Vec<f64>> = grid_2d([0.0, 0.0], [PI, PI], mesh, true)
        .into_iter()
        .filter(|p| (p[0] - x0[0]).abs() > 1e-12 || (p[1] - x0[1]).abs() > 1e-12)
        .map(|p| p.to_vec())
        .collect();
    Tensor::from_rows(&rows)
}

/// Reference on the default metric mesh.
pub fn poisson_reference(mesh: usize, terms: usize) -> Result<ReferenceField> {
    let x0 = [PI / 2.0, PI / 2.0];
    Ok(poisson_series(&poisson_mesh(mesh, x0)?, x0, terms)?.with_meta("mesh", mesh))
}
