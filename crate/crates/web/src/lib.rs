//! Browser bindings: kernel profiles, the Poisson series on a grid and a
//! steppable FDTD run. The plain functions are usable natively; the
//! `#[wasm_bindgen]` wrappers only translate errors.

use std::f64::consts::PI;

use deltapinn::kernel::KernelFamily;
use deltapinn::problems::MaxwellConstants;
use deltapinn::reference::fdtd::{Boundary, Fdtd, FdtdConfig};
use deltapinn::reference::poisson_series::poisson_series_value;
use deltapinn::{Error, Result};
use wasm_bindgen::prelude::*;

fn family(name: &str) -> Result<KernelFamily> {
    KernelFamily::parse(name).ok_or_else(|| Error::Parameter(format!("unknown kernel family '{name}'")))
}

/// `samples` values of the 1-D density on `[-half_width, half_width]`.
pub fn kernel_profile_values(name: &str, alpha: f64, half_width: f64, samples: usize) -> Result<Vec<f64>> {
    let k = family(name)?;
    if !(alpha > 0.0) || !(half_width > 0.0) || samples < 2 {
        return Err(Error::Parameter("profile needs alpha > 0, half_width > 0 and 2+ samples".into()));
    }
    let step = 2.0 * half_width / (samples - 1) as f64;
    Ok((0..samples).map(|i| k.density_1d(-half_width + i as f64 * step, alpha)).collect())
}

/// Row-major `n × n` node values of the truncated series on `[0, π]²`.
pub fn poisson_grid(n: usize, terms: usize, x0: f64, y0: f64) -> Result<Vec<f64>> {
    if n < 2 || terms == 0 {
        return Err(Error::Parameter("grid needs 2+ nodes and 1+ terms".into()));
    }
    if !(x0 > 0.0 && x0 < PI && y0 > 0.0 && y0 < PI) {
        return Err(Error::Parameter(format!("source ({x0}, {y0}) must lie inside (0, π)²")));
    }
    let h = PI / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(poisson_series_value([i as f64 * h, j as f64 * h], [x0, y0], terms));
        }
    }
    Ok(out)
}

/// Maxwell run with the default pulse and absorbing walls.
pub struct Wave {
    solver: Fdtd,
}

impl Wave {
    pub fn new(resolution: f64, kernel: &str, alpha: f64) -> Result<Self> {
        let cfg = FdtdConfig {
            resolution,
            boundary: Boundary::Mur,
            kernel: family(kernel)?,
            alpha,
            pulse: Some(MaxwellConstants::default()),
            ..FdtdConfig::default()
        };
        let mut solver = Fdtd::new(cfg)?;
        solver.advance(0);
        Ok(Self { solver })
    }

    pub fn advance(&mut self, steps: usize) {
        self.solver.advance(steps);
    }

    pub fn side(&self) -> usize {
        self.solver.cells() + 1
    }

    /// Time of the fields returned by `hz`.
    pub fn time(&self) -> f64 {
        self.solver.time() - self.solver.dt()
    }

    /// Row-major `Hz` at the nodes.
    pub fn hz(&self) -> Result<Vec<f64>> {
        let snap = self.solver.snapshot()?;
        Ok((0..snap.len()).map(|r| snap.values.get(&[r, 2])).collect())
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn kernel_profile(name: &str, alpha: f64, half_width: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    kernel_profile_values(name, alpha, half_width, samples).map_err(js)
}

#[wasm_bindgen]
pub fn poisson_heatmap(n: usize, terms: usize, x0: f64, y0: f64) -> std::result::Result<Vec<f64>, JsError> {
    poisson_grid(n, terms, x0, y0).map_err(js)
}

#[wasm_bindgen]
pub struct WaveDemo {
    inner: Wave,
}

#[wasm_bindgen]
impl WaveDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(resolution: f64, kernel: &str, alpha: f64) -> std::result::Result<WaveDemo, JsError> {
        Wave::new(resolution, kernel, alpha).map(|inner| WaveDemo { inner }).map_err(js)
    }

    pub fn advance(&mut self, steps: usize) {
        self.inner.advance(steps);
    }

    pub fn side(&self) -> usize {
        self.inner.side()
    }

    pub fn time(&self) -> f64 {
        self.inner.time()
    }

    pub fn hz(&self) -> std::result::Result<Vec<f64>, JsError> {
        self.inner.hz().map_err(js)
    }
}
