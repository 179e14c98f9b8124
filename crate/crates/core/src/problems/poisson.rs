//! `−Δu = δ(x − x₀)` on `[0, π]²` with homogeneous Dirichlet data.

use std::f64::consts::PI;

use super::{value_op, Constants, LinearOperator, ProblemKind, ProblemSpec};
use crate::autodiff::Entry;
use crate::error::Result;
use crate::geometry::Domain;
use crate::kernel::{KernelFamily, PointSource};

pub const SOURCE: [f64; 2] = [PI / 2.0, PI / 2.0];

pub fn problem(kernel: KernelFamily, alpha: f64) -> Result<ProblemSpec> {
    problem_at(kernel, alpha, SOURCE.to_vec())
}

pub fn problem_at(kernel: KernelFamily, alpha: f64, location: Vec<f64>) -> Result<ProblemSpec> {
    let residual = LinearOperator::new(vec![vec![
        (Entry::Hess(0, 0, 0), -1.0),
        (Entry::Hess(0, 1, 1), -1.0),
    ]]);
    Ok(ProblemSpec {
        kind: ProblemKind::Poisson,
        domain: Domain::new(vec![0.0, 0.0], vec![PI, PI], None)?,
        source: PointSource::new(location, kernel, alpha)?,
        constants: Constants::Poisson,
        residual,
        bc: vec![value_op(&[0]); 4],
        ic: None,
    })
}
