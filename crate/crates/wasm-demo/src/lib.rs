//! wasm-bindgen bindings behind `www/index.html`.
//!
//! Three toys: a 1D phase-separating column, a plot of the bulk free energy
//! and its derivative, and a small 2D tumour rendered as a heat map. Each
//! exported type has a plain Rust core (`try_*`) so it can be tested natively.

use wasm_bindgen::prelude::*;

use gnsch::config::{GridSpec, Initial, RunConfig, TimeSpec};
use gnsch::driver::Simulation;
use gnsch::physics::PhysParams;
use gnsch::sav_ch::{SolverOptions, VUpdate};

fn js_err(e: gnsch::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn open_ended() -> TimeSpec {
    TimeSpec {
        t_final: f64::MAX,
        ..TimeSpec::default()
    }
}

/// Noisy 1D mixture moving to the right.
#[wasm_bindgen]
pub struct Column {
    sim: Simulation,
}

impl Column {
    pub fn try_new(nx: usize, alpha1: f64, alpha2: f64, seed: u64) -> gnsch::Result<Column> {
        let cfg = RunConfig {
            name: "column".into(),
            seed,
            grid: GridSpec {
                nx,
                ..GridSpec::default()
            },
            physics: PhysParams {
                alpha1,
                alpha2,
                ..PhysParams::default()
            },
            initial: Initial::Noise {
                rho: 0.9,
                c_mean: 0.5,
                amplitude: 0.05,
                ux: 1.0,
                uy: 0.0,
            },
            time: open_ended(),
            ..RunConfig::default()
        };
        Ok(Column {
            sim: Simulation::new(&cfg)?,
        })
    }

    pub fn try_advance(&mut self, steps: usize) -> gnsch::Result<()> {
        for _ in 0..steps {
            self.sim.advance()?;
        }
        Ok(())
    }
}

#[wasm_bindgen]
impl Column {
    #[wasm_bindgen(constructor)]
    pub fn new(nx: usize, alpha1: f64, alpha2: f64, seed: u64) -> Result<Column, JsError> {
        Self::try_new(nx, alpha1, alpha2, seed).map_err(js_err)
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), JsError> {
        self.try_advance(steps).map_err(js_err)
    }

    pub fn time(&self) -> f64 {
        self.sim.state.t
    }

    pub fn steps(&self) -> usize {
        self.sim.state.step_index
    }

    pub fn energy(&self) -> f64 {
        self.sim.state.energy
    }

    pub fn mass(&self) -> f64 {
        self.sim.state.total_mass()
    }

    pub fn xi(&self) -> f64 {
        self.sim.state.sav.xi
    }

    pub fn c(&self) -> Vec<f64> {
        self.sim.state.c.values().to_vec()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.sim.state.rho().values().to_vec()
    }

    pub fn pressure(&self) -> Vec<f64> {
        self.sim
            .state
            .pressure(&self.sim.stepper.params)
            .map(|p| p.into_values())
            .unwrap_or_default()
    }
}

/// Samples `psi0(rho, c)` and `d psi0/dc` at `samples` interior points of
/// (0,1). Returned flat as `[c0, psi0, dpsi0, c1, ...]`.
pub fn try_potential(alpha1: f64, alpha2: f64, theta: f64, rho: f64, samples: usize) -> gnsch::Result<Vec<f64>> {
    let p = PhysParams {
        alpha1,
        alpha2,
        theta,
        ..PhysParams::default()
    };
    p.validate()?;
    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let c = (i as f64 + 0.5) / samples as f64;
        out.push(c);
        out.push(p.psi0(rho, c)?);
        out.push(p.dpsi0_dc(rho, c)?);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn potential(alpha1: f64, alpha2: f64, theta: f64, rho: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    try_potential(alpha1, alpha2, theta, rho, samples).map_err(js_err)
}

/// Gaussian tumour in healthy tissue on an `n x n` grid.
#[wasm_bindgen]
pub struct Tumor {
    sim: Simulation,
}

impl Tumor {
    pub fn try_new(n: usize, growth_rate: f64, alpha1: f64, alpha2: f64) -> gnsch::Result<Tumor> {
        let cfg = RunConfig {
            name: "tumor".into(),
            grid: GridSpec {
                dim: 2,
                nx: n,
                ny: n,
                ..GridSpec::default()
            },
            physics: PhysParams {
                gamma: 0.001,
                alpha1,
                alpha2,
                kappa1: 0.0,
                kappa2: 20.0,
                growth_rate,
                ..PhysParams::default()
            },
            initial: Initial::Gaussian {
                base: 0.008,
                amplitude: 0.6,
                width: 100.0,
                center_x: 0.5,
                center_y: 0.5,
                rho_ratio: 0.5,
            },
            time: open_ended(),
            solver: SolverOptions {
                v_update: VUpdate::Reinit,
                ..SolverOptions::default()
            },
            ..RunConfig::default()
        };
        Ok(Tumor {
            sim: Simulation::new(&cfg)?,
        })
    }

    pub fn try_advance(&mut self, steps: usize) -> gnsch::Result<()> {
        for _ in 0..steps {
            self.sim.advance()?;
        }
        Ok(())
    }
}

#[wasm_bindgen]
impl Tumor {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, growth_rate: f64, alpha1: f64, alpha2: f64) -> Result<Tumor, JsError> {
        Self::try_new(n, growth_rate, alpha1, alpha2).map_err(js_err)
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), JsError> {
        self.try_advance(steps).map_err(js_err)
    }

    pub fn size(&self) -> usize {
        self.sim.state.grid().nx()
    }

    pub fn time(&self) -> f64 {
        self.sim.state.t
    }

    /// Tumour volume fraction, row-major (`k = i * n + j`).
    pub fn c(&self) -> Vec<f64> {
        self.sim.state.c.values().to_vec()
    }

    pub fn tumor_mass(&self) -> f64 {
        gnsch::mesh::integrate(&self.sim.state.c)
    }
}
