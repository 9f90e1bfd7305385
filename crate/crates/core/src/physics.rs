//! Constitutive closures of the two-phase model: the logarithmic double-well
//! free energy, barotropic pressure, degenerate mobility, friction, growth
//! source and the bound-preserving change of variables `c = T(v)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{self, Field};

/// Map from the real line onto (0, 1) used to evolve the mass fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// `T(v) = 1 / (1 + exp(-v))`
    #[default]
    Logistic,
    /// `T(v) = tanh(v)/2 + 1/2`
    Tanh,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Logistic => {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            }
            Transform::Tanh => 0.5 * v.tanh() + 0.5,
        }
    }

    /// T'(v)
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Transform::Logistic => {
                let e = (-v.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            Transform::Tanh => {
                let s = 1.0 / v.cosh();
                0.5 * s * s
            }
        }
    }

    /// T''(v)
    pub fn second_derivative(self, v: f64) -> f64 {
        match self {
            Transform::Logistic => self.derivative(v) * (1.0 - 2.0 * self.apply(v)),
            Transform::Tanh => -2.0 * v.tanh() * self.derivative(v),
        }
    }

    pub fn inverse(self, c: f64) -> Result<f64> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Domain {
                what: "c",
                value: c,
                domain: "(0,1)",
            });
        }
        Ok(match self {
            Transform::Logistic => c.ln() - (-c).ln_1p(),
            Transform::Tanh => (2.0 * c - 1.0).atanh(),
        })
    }
}

/// Model constants. Field names follow the configuration keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysParams {
    /// Pressure exponent, `p_e = rho^a`.
    pub a: f64,
    /// Interface-width coefficient.
    pub gamma: f64,
    /// Constant viscosity used directly in the momentum flux.
    pub nu0: f64,
    /// Relaxation time of the auxiliary fluxes.
    pub eta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub theta: f64,
    /// Potential offset, keeps `rho psi_0` positive.
    pub k: f64,
    /// Mobility amplitude.
    pub cb: f64,
    /// Mobility exponent.
    pub alpha_mob: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Prefactor of the proliferation source; 0 disables it.
    pub growth_rate: f64,
    pub c_star: f64,
    /// Lower-bound constant entering the SAV shift.
    pub c_under: f64,
    pub transform: Transform,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            a: 3.0,
            gamma: 1.0 / 500.0,
            nu0: 1e-2,
            eta: 1e-3,
            alpha1: 1.0,
            alpha2: 1.0,
            theta: 4.0,
            k: 100.0,
            cb: 1.0,
            alpha_mob: 1.0,
            kappa1: 0.0,
            kappa2: 0.0,
            growth_rate: 0.0,
            c_star: 0.9,
            c_under: 100.0,
            transform: Transform::Logistic,
        }
    }
}

fn domain(what: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain { what, value, domain }
}

/// `x^e`, through repeated multiplication when `e` is a small integer.
fn fast_pow(x: f64, e: f64) -> f64 {
    if e == e.trunc() && e.abs() <= 8.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

fn check_open_unit(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(domain("c", c, "(0,1)"))
    }
}

impl PhysParams {
    /// Range checks; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool, &str); 12] = [
            ("a", self.a > 1.0, "must be > 1"),
            ("gamma", self.gamma > 0.0, "must be > 0"),
            ("eta", self.eta > 0.0, "must be > 0"),
            ("nu0", self.nu0 >= 0.0, "must be >= 0"),
            ("alpha1", self.alpha1 > 0.0, "must be > 0"),
            ("alpha2", self.alpha2 > 0.0, "must be > 0"),
            ("theta", self.theta > 1.0, "must be > 1"),
            ("cb", self.cb >= 0.0, "must be >= 0"),
            ("alpha_mob", self.alpha_mob >= 1.0, "must be >= 1"),
            ("kappa1", self.kappa1 >= 0.0, "must be >= 0"),
            ("kappa2", self.kappa2 >= 0.0, "must be >= 0"),
            ("c_star", self.c_star > 0.0 && self.c_star <= 1.0, "must lie in (0,1]"),
        ];
        for (key, ok, msg) in checks {
            if !ok {
                return Err(Error::config(key, msg));
            }
        }
        let finite = [
            ("k", self.k),
            ("growth_rate", self.growth_rate),
            ("c_under", self.c_under),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Ok(())
    }

    /// `H(c) = (alpha1 (1-c) + alpha2 c) / 2`
    pub fn h(&self, c: f64) -> f64 {
        0.5 * (self.alpha1 * (1.0 - c) + self.alpha2 * c)
    }

    pub fn dh(&self) -> f64 {
        0.5 * (self.alpha2 - self.alpha1)
    }

    /// Logarithmic double well.
    pub fn q(&self, c: f64) -> Result<f64> {
        check_open_unit(c)?;
        let mix = 0.5 * (self.alpha1 * (1.0 - c) * (-c).ln_1p() + self.alpha2 * c * c.ln());
        Ok(mix - 0.5 * self.theta * (c - 0.5).powi(2) + self.k)
    }

    pub fn dq(&self, c: f64) -> Result<f64> {
        check_open_unit(c)?;
        let log_part = 0.5 * (-self.alpha1 * (-c).ln_1p() - self.alpha1 + self.alpha2 * c.ln() + self.alpha2);
        Ok(log_part - self.theta * (c - 0.5))
    }

    /// `p = rho^a + rho H(c)`
    pub fn pressure(&self, rho: f64, c: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(domain("rho", rho, "[0,inf)"));
        }
        Ok(fast_pow(rho, self.a) + rho * self.h(c))
    }

    pub fn dpressure_drho(&self, rho: f64, c: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(domain("rho", rho, "[0,inf)"));
        }
        Ok(self.a * fast_pow(rho, self.a - 1.0) + self.h(c))
    }

    /// Homogeneous free energy `rho^(a-1)/(a-1) + H(c) ln(rho) + Q(c)`.
    pub fn psi0(&self, rho: f64, c: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(domain("rho", rho, "(0,inf)"));
        }
        Ok(fast_pow(rho, self.a - 1.0) / (self.a - 1.0) + self.h(c) * rho.ln() + self.q(c)?)
    }

    pub fn dpsi0_dc(&self, rho: f64, c: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(domain("rho", rho, "(0,inf)"));
        }
        Ok(self.dh() * rho.ln() + self.dq(c)?)
    }

    /// Degenerate mobility `Cb c (1-c)^alpha`.
    pub fn mobility(&self, c: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&c) {
            return Err(domain("c", c, "[0,1]"));
        }
        Ok(self.cb * c * fast_pow(1.0 - c, self.alpha_mob))
    }

    pub fn friction(&self, rho: f64, c: f64) -> f64 {
        self.kappa1 * rho * c + self.kappa2 * rho * (1.0 - c)
    }

    pub fn source(&self, rho: f64, c: f64) -> f64 {
        if self.growth_rate == 0.0 {
            return 0.0;
        }
        self.growth_rate * rho * c * (1.0 - c / self.c_star)
    }

    pub fn has_source(&self) -> bool {
        self.growth_rate != 0.0
    }

    pub fn viscosity(&self, _c: f64) -> f64 {
        self.nu0
    }

    /// `E = integral of gamma/2 |grad c|^2 + rho psi_0(rho, c)`.
    pub fn energy(&self, rho: &Field, c: &Field) -> Result<f64> {
        let grad2 = mesh::grad_norm_sq(c)?;
        let mut density = Vec::with_capacity(c.len());
        for k in 0..c.len() {
            density.push(0.5 * self.gamma * grad2[k] + rho[k] * self.psi0(rho[k], c[k])?);
        }
        Ok(mesh::integrate(&Field::new(*c.grid(), density)?))
    }
}
