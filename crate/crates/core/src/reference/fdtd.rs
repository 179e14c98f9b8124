//! Yee-grid leapfrog solver for the nondimensional TE equations on `[−1, 1]²`.
//!
//! `Hz` lives on grid nodes `(iΔ, jΔ)` including the boundary, `Ex` on
//! vertical edges `(i, j+½)` and `Ey` on horizontal edges `(i+½, j)`.
//! Electric fields sit at integer time steps and `Hz` at half steps. The
//! boundary nodes of `Hz` are advanced by a second-order absorbing condition
//! (or a perfect conductor for energy checks).

use super::ReferenceField;
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, PointSource};
use crate::problems::MaxwellConstants;
use crate::tensor::Tensor;

const LO: f64 = -1.0;
const HI: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Absorbing (outgoing-wave) condition on all four sides.
    Mur,
    /// Perfect electric conductor: tangential `E` vanishes on the walls.
    Pec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdtdConfig {
    pub resolution: f64,
    pub courant: f64,
    pub boundary: Boundary,
    pub kernel: KernelFamily,
    pub alpha: f64,
    pub source_location: [f64; 2],
    /// `None` switches the source off.
    pub pulse: Option<MaxwellConstants>,
}

impl Default for FdtdConfig {
    fn default() -> Self {
        Self {
            resolution: 0.005,
            courant: 0.5,
            boundary: Boundary::Mur,
            kernel: KernelFamily::Gaussian,
            alpha: 0.01,
            source_location: [0.0, 0.0],
            pulse: Some(MaxwellConstants::default()),
        }
    }
}

impl FdtdConfig {
    pub fn dt(&self) -> f64 {
        self.courant * self.resolution / 2f64.sqrt()
    }

    pub fn validate(&self) -> Result<usize> {
        if !(self.courant > 0.0 && self.courant <= 1.0) {
            return Err(Error::Parameter(format!(
                "courant factor {} violates the stability bound (0, 1]",
                self.courant
            )));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::Parameter("resolution must be positive".into()));
        }
        let cells = ((HI - LO) / self.resolution).round();
        if cells < 4.0 || ((HI - LO) / cells - self.resolution).abs() > 1e-9 * self.resolution {
            return Err(Error::Parameter(format!(
                "resolution {} must divide the domain width into at least 4 cells",
                self.resolution
            )));
        }
        PointSource::new(self.source_location.to_vec(), self.kernel, self.alpha)?;
        Ok(cells as usize)
    }
}

pub struct Fdtd {
    cfg: FdtdConfig,
    n: usize,
    dx: f64,
    dt: f64,
    /// `(n+1) × n`, index `j·(n+1) + i`.
    ex: Vec<f64>,
    /// `n × (n+1)`, index `j·n + i`.
    ey: Vec<f64>,
    /// `(n+1) × (n+1)` at the latest half step, and the one before.
    hz: Vec<f64>,
    hz_old: Vec<f64>,
    profile: Option<Vec<f64>>,
    /// Completed magnetic updates; `hz` holds time `(steps − ½)·dt`.
    steps: usize,
}

impl Fdtd {
    pub fn new(cfg: FdtdConfig) -> Result<Self> {
        let n = cfg.validate()?;
        let dx = (HI - LO) / n as f64;
        let np = n + 1;
        let profile = cfg.pulse.map(|_| {
            let src = PointSource::new(cfg.source_location.to_vec(), cfg.kernel, cfg.alpha).unwrap();
            let mut p = vec![0.0; np * np];
            for j in 0..np {
                for i in 0..np {
                    p[j * np + i] = src.density_at(&[LO + i as f64 * dx, LO + j as f64 * dx]);
                }
            }
            p
        });
        Ok(Self {
            dt: cfg.dt(),
            cfg,
            n,
            dx,
            ex: vec![0.0; np * n],
            ey: vec![0.0; n * np],
            hz: vec![0.0; np * np],
            hz_old: vec![0.0; np * np],
            profile,
            steps: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn node(&self, i: usize) -> f64 {
        LO + i as f64 * self.dx
    }

    /// Sets `Hz` at the half step before the first update; electric fields stay zero.
    pub fn set_initial_hz(&mut self, f: impl Fn(f64, f64) -> f64) {
        let np = self.n + 1;
        for j in 0..np {
            for i in 0..np {
                self.hz[j * np + i] = f(self.node(i), self.node(j));
            }
        }
    }

    /// Time of the electric field after `steps` completed steps.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Advances `Hz` from `t − dt/2` to `t + dt/2` using `E(t)`; afterwards
    /// both `Hz` levels around `t` are available.
    fn update_h(&mut self) {
        let n = self.n;
        let np = n + 1;
        let t = self.time();
        let (dt, dx) = (self.dt, self.dx);
        std::mem::swap(&mut self.hz, &mut self.hz_old);
        let mut amp = self.cfg.pulse.map(|c| c.pulse(t)).unwrap_or(0.0);
        if self.steps == 0 {
            // The source starts at t = 0, so the first update covers half a step.
            amp *= 0.5;
        }
        let pec = self.cfg.boundary == Boundary::Pec;
        let (i_range, j_range) = if pec { (0..np, 0..np) } else { (1..n, 1..n) };
        for j in j_range {
            for i in i_range.clone() {
                let k = j * np + i;
                let ey_r = if i < n { self.ey[j * n + i] } else { -self.ey[j * n + n - 1] };
                let ey_l = if i > 0 { self.ey[j * n + i - 1] } else { -self.ey[j * n] };
                let ex_t = if j < n { self.ex[j * np + i] } else { -self.ex[(n - 1) * np + i] };
                let ex_b = if j > 0 { self.ex[(j - 1) * np + i] } else { -self.ex[i] };
                let mut curl = (ey_r - ey_l - ex_t + ex_b) / dx;
                if let Some(p) = &self.profile {
                    curl += amp * p[k];
                }
                self.hz[k] = self.hz_old[k] - dt * curl;
            }
        }
        if !pec {
            self.absorbing_boundary();
        }
        self.steps += 1;
    }

    fn absorbing_boundary(&mut self) {
        let n = self.n;
        let np = n + 1;
        let a = 0.5 / self.dx;
        let b = 0.5 / self.dt;
        let (hz, old) = (&mut self.hz, &self.hz_old);
        // Outward derivative plus time derivative, centred half a cell inside
        // the wall at the electric time level.
        let mur = |hb_old: f64, hi_new: f64, hi_old: f64, tangential: f64| {
            ((a - b) * hi_new + (b - a) * hb_old + (a + b) * hi_old + 0.5 * tangential) / (a + b)
        };
        for j in 1..n {
            // Left and right: tangential term is ∂Ex/∂y.
            for (ib, ii) in [(0, 1), (n, n - 1)] {
                let exy = 0.5
                    * ((self.ex[j * np + ib] - self.ex[(j - 1) * np + ib])
                        + (self.ex[j * np + ii] - self.ex[(j - 1) * np + ii]))
                    / self.dx;
                let (kb, ki) = (j * np + ib, j * np + ii);
                hz[kb] = mur(old[kb], hz[ki], old[ki], exy);
            }
        }
        for i in 1..n {
            // Bottom and top: tangential term is −∂Ey/∂x.
            for (jb, ji) in [(0, 1), (n, n - 1)] {
                let eyx = 0.5
                    * ((self.ey[jb * n + i] - self.ey[jb * n + i - 1])
                        + (self.ey[ji * n + i] - self.ey[ji * n + i - 1]))
                    / self.dx;
                let (kb, ki) = (jb * np + i, ji * np + i);
                hz[kb] = mur(old[kb], hz[ki], old[ki], -eyx);
            }
        }
        // Corners: first-order outgoing condition along each axis, averaged.
        let first = |hb_old: f64, hi_new: f64, hi_old: f64| {
            ((a - b) * hi_new + (b - a) * hb_old + (a + b) * hi_old) / (a + b)
        };
        for (ib, ii) in [(0, 1), (n, n - 1)] {
            for (jb, ji) in [(0, 1), (n, n - 1)] {
                let kb = jb * np + ib;
                let kx = jb * np + ii;
                let ky = ji * np + ib;
                hz[kb] = 0.5 * (first(old[kb], hz[kx], old[kx]) + first(old[kb], hz[ky], old[ky]));
            }
        }
    }

    fn update_e(&mut self) {
        let n = self.n;
        let np = n + 1;
        let c = self.dt / self.dx;
        for j in 0..n {
            for i in 0..np {
                self.ex[j * np + i] += c * (self.hz[(j + 1) * np + i] - self.hz[j * np + i]);
            }
        }
        for j in 0..np {
            for i in 0..n {
                self.ey[j * n + i] -= c * (self.hz[j * np + i + 1] - self.hz[j * np + i]);
            }
        }
    }

    /// Runs `steps` full steps, calling `observe` at every electric time level
    /// `t_k` (`k = 0..steps`) once both magnetic levels around it are known.
    pub fn run(&mut self, steps: usize, mut observe: impl FnMut(&Fdtd, usize)) {
        for _ in 0..=steps {
            self.update_h();
            let k = self.steps - 1;
            observe(self, k);
            if k < steps {
                self.update_e();
            }
        }
    }

    /// Moves `steps` electric time levels past the current one; a fresh solver
    /// is first brought to `t = 0`. Continues a finished `run` seamlessly.
    pub fn advance(&mut self, steps: usize) {
        if self.steps == 0 {
            self.update_h();
        }
        for _ in 0..steps {
            self.update_e();
            self.update_h();
        }
    }

    /// Field energy at the current electric time level, with half weights for
    /// nodes and edges lying on the walls.
    pub fn energy(&self) -> f64 {
        let n = self.n;
        let np = n + 1;
        let w = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
        let mut e = 0.0;
        for j in 0..n {
            for i in 0..np {
                e += w(i) * self.ex[j * np + i].powi(2);
            }
        }
        for j in 0..np {
            for i in 0..n {
                e += w(j) * self.ey[j * n + i].powi(2);
            }
        }
        for j in 0..np {
            for i in 0..np {
                let h = 0.5 * (self.hz[j * np + i] + self.hz_old[j * np + i]);
                e += w(i) * w(j) * h * h;
            }
        }
        0.5 * e * self.dx * self.dx
    }

    /// Fields at every node at the current electric time level.
    pub fn snapshot(&self) -> Result<ReferenceField> {
        let n = self.n;
        let np = n + 1;
        if self.steps == 0 {
            return Err(Error::contract("snapshot before the first step"));
        }
        let t = (self.steps - 1) as f64 * self.dt;
        // Average staggered values to the node; linear extrapolation at walls.
        let along = |get: &dyn Fn(usize) -> f64, k: usize| -> f64 {
            if k == 0 {
                1.5 * get(0) - 0.5 * get(1)
            } else if k == n {
                1.5 * get(n - 1) - 0.5 * get(n - 2)
            } else {
                0.5 * (get(k - 1) + get(k))
            }
        };
        let mut pts = Vec::with_capacity(np * np * 3);
        let mut vals = Vec::with_capacity(np * np * 3);
        for j in 0..np {
            for i in 0..np {
                pts.extend_from_slice(&[self.node(i), self.node(j), t]);
                let ex = along(&|jj| self.ex[jj * np + i], j);
                let ey = along(&|ii| self.ey[j * n + ii], i);
                let hz = 0.5 * (self.hz[j * np + i] + self.hz_old[j * np + i]);
                vals.extend_from_slice(&[ex, ey, hz]);
            }
        }
        Ok(ReferenceField::new(
            Tensor::new(vec![np * np, 3], pts)?,
            Tensor::new(vec![np * np, 3], vals)?,
            &["x", "y", "t"],
            &["Ex", "Ey", "Hz"],
        )?
        .with_meta("generator", "fdtd")
        .with_meta("resolution", self.dx)
        .with_meta("courant", self.cfg.courant)
        .with_meta("t", t))
    }
}

/// Runs to `t_end` and returns node snapshots at the steps nearest to
/// `snapshot_times`.
pub fn fdtd_run(cfg: &FdtdConfig, t_end: f64, snapshot_times: &[f64]) -> Result<Vec<ReferenceField>> {
    let mut sim = Fdtd::new(cfg.clone())?;
    let dt = sim.dt();
    if !(t_end >= 0.0) {
        return Err(Error::Parameter("t_end must be nonnegative".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let mut wanted = Vec::with_capacity(snapshot_times.len());
    for &t in snapshot_times {
        if !(t >= 0.0) || t > t_end + 0.5 * dt {
            return Err(Error::Parameter(format!("snapshot time {t} outside [0, {t_end}]")));
        }
        wanted.push((t / dt).round() as usize);
    }
    let mut out: Vec<Option<ReferenceField>> = vec![None; wanted.len()];
    let mut failure = None;
    sim.run(steps, |s, k| {
        for (slot, &w) in out.iter_mut().zip(&wanted) {
            if w == k {
                match s.snapshot() {
                    Ok(f) => *slot = Some(f),
                    Err(e) => failure = Some(e),
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let fields: Vec<ReferenceField> = out.into_iter().map(|f| f.expect("every snapshot step is reached")).collect();
    for f in &fields {
        if !f.values.is_finite() {
            return Err(Error::numeric("fdtd fields"));
        }
    }
    Ok(fields)
}

/// Every `stride`-th node of a snapshot.
pub fn subsample(field: &ReferenceField, stride: usize) -> Result<ReferenceField> {
    let np = (field.len() as f64).sqrt().round() as usize;
    if np * np != field.len() || stride == 0 {
        return Err(Error::contract("subsample expects a square node snapshot"));
    }
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for j in (0..np).step_by(stride) {
        for i in (0..np).step_by(stride) {
            let k = j * np + i;
            pts.extend_from_slice(field.points.row(k));
            vals.extend_from_slice(field.values.row(k));
        }
    }
    let rows = pts.len() / field.points.row_len();
    let mut out = field.clone();
    out.points = Tensor::new(vec![rows, field.points.row_len()], pts)?;
    out.values = Tensor::new(vec![rows, field.values.row_len()], vals)?;
    out.singular = vec![false; rows];
    Ok(out)
}
