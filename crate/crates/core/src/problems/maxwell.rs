//! Two-dimensional TE Maxwell equations in units where `c = ε = μ = 1`.
//!
//! Lengths are in metres and time is `t̃ = c·t`, so one unit of time is the
//! light travel time over one metre. Outputs are `(Ex, Ey, Hz)` over
//! `(x, y, t̃)`.

use super::{value_op, Constants, LinearOperator, ProblemKind, ProblemSpec};
use crate::autodiff::Entry;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernel::{KernelFamily, PointSource};

pub const LIGHT_SPEED: f64 = 299_792_458.0;

/// Nondimensional time of a physical time in seconds.
pub fn nondimensional_time(seconds: f64) -> f64 {
    LIGHT_SPEED * seconds
}

/// Pulse-width parameter for characteristic frequency `f` (Hz), in seconds.
pub fn pulse_width_seconds(f: f64) -> f64 {
    3.65 * 2.3f64.sqrt() / (std::f64::consts::PI * f)
}

const EX: usize = 0;
const EY: usize = 1;
const HZ: usize = 2;
const X: usize = 0;
const Y: usize = 1;
const T: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxwellConstants {
    pub t_end: f64,
    pub tau: f64,
    pub delay: f64,
}

impl Default for MaxwellConstants {
    fn default() -> Self {
        let tau = nondimensional_time(pulse_width_seconds(1e9));
        Self {
            t_end: nondimensional_time(4e-9),
            tau,
            delay: 2.0 * tau,
        }
    }
}

impl MaxwellConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.tau > 0.0 && self.delay.is_finite()) {
            return Err(Error::Parameter("maxwell constants need t_end > 0 and tau > 0".into()));
        }
        Ok(())
    }

    /// Temporal factor of the source current.
    pub fn pulse(&self, t: f64) -> f64 {
        let s = (t - self.delay) / self.tau;
        (-s * s).exp()
    }
}

pub fn problem(kernel: KernelFamily, alpha: f64, constants: MaxwellConstants) -> Result<ProblemSpec> {
    problem_at(kernel, alpha, constants, vec![0.0, 0.0])
}

pub fn problem_at(
    kernel: KernelFamily,
    alpha: f64,
    constants: MaxwellConstants,
    location: Vec<f64>,
) -> Result<ProblemSpec> {
    constants.validate()?;
    let g = Entry::Grad;
    let residual = LinearOperator::new(vec![
        vec![(g(EX, T), 1.0), (g(HZ, Y), -1.0)],
        vec![(g(EY, T), 1.0), (g(HZ, X), 1.0)],
        vec![(g(HZ, T), 1.0), (g(EY, X), 1.0), (g(EX, Y), -1.0)],
    ]);
    // Second-order absorbing conditions for waves leaving through each face.
    let bc = vec![
        LinearOperator::new(vec![vec![(g(HZ, X), 1.0), (g(HZ, T), -1.0), (g(EX, Y), 0.5)]]),
        LinearOperator::new(vec![vec![(g(HZ, X), 1.0), (g(HZ, T), 1.0), (g(EX, Y), -0.5)]]),
        LinearOperator::new(vec![vec![(g(HZ, Y), 1.0), (g(HZ, T), -1.0), (g(EY, X), -0.5)]]),
        LinearOperator::new(vec![vec![(g(HZ, Y), 1.0), (g(HZ, T), 1.0), (g(EY, X), 0.5)]]),
    ];
    Ok(ProblemSpec {
        kind: ProblemKind::Maxwell,
        domain: Domain::new(vec![-1.0, -1.0], vec![1.0, 1.0], Some((0.0, constants.t_end)))?,
        source: PointSource::new(location, kernel, alpha)?,
        constants: Constants::Maxwell(constants),
        residual,
        bc,
        ic: Some(value_op(&[EX, EY, HZ])),
    })
}
