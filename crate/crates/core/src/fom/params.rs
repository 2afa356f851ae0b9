use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two identifiable material parameters: the dimensionless first Lamé
/// constant and the chemo-mechanical coupling factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
}

impl Theta {
    pub const NOMINAL: Theta = Theta { lambda: 1558.0, a: 4000.0 };

    pub fn new(lambda: f64, a: f64) -> Self {
        Theta { lambda, a }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.lambda, self.a]
    }

    pub fn from_array(x: [f64; 2]) -> Self {
        Theta { lambda: x[0], a: x[1] }
    }
}

/// Dimensionless model data for one forward run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha_r: f64,
    pub mu_0: f64,
    pub mu_inf: f64,
    #[serde(default)]
    pub body_force: [f64; 2],
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams::nominal()
    }
}

impl MaterialParams {
    /// Gelatin-based gel of the free-swelling benchmark.
    pub fn nominal() -> Self {
        MaterialParams {
            lambda: Theta::NOMINAL.lambda,
            a: Theta::NOMINAL.a,
            alpha_r: 0.66,
            mu_0: -0.3124,
            mu_inf: 0.0,
            body_force: [0.0, 0.0],
        }
    }

    pub fn theta(&self) -> Theta {
        Theta { lambda: self.lambda, a: self.a }
    }

    pub fn with_theta(mut self, theta: Theta) -> Self {
        self.lambda = theta.lambda;
        self.a = theta.a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda, self.a, self.alpha_r, self.mu_0, self.mu_inf, self.body_force[0], self.body_force[1]]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("material parameters must be finite".into()));
        }
        if self.lambda <= 0.0 {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.a <= 0.0 {
            return Err(Error::Config(format!("A must be positive, got {}", self.a)));
        }
        if self.alpha_r < 0.0 {
            return Err(Error::Config(format!("alpha_R must be nonnegative, got {}", self.alpha_r)));
        }
        Ok(())
    }
}

/// Physical material data in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Reference length `l` (m).
    pub length: f64,
    /// Thermal energy `k_B T` (J).
    pub thermal_energy: f64,
    /// Fluid molecular volume `Ω` (m³).
    pub fluid_volume: f64,
    /// Diffusivity `D` (m²/s).
    pub diffusivity: f64,
    /// Shear modulus `G` (Pa).
    pub shear_modulus: f64,
    /// Drained first Lamé parameter (Pa).
    pub lambda_d: f64,
}

impl DimensionalParams {
    /// Gelatin gel characterization values.
    pub fn gelatin() -> Self {
        let g = 33.0e3;
        DimensionalParams {
            length: 0.0015,
            thermal_energy: 4e-21,
            fluid_volume: 3e-29,
            diffusivity: 1.6e-11,
            shear_modulus: g,
            lambda_d: 1600.0 * g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub theta: Theta,
    /// Seconds per unit of dimensionless time, `l² / D`.
    pub time_scale: f64,
    /// Pascals per unit of dimensionless stress, `G`.
    pub stress_scale: f64,
    /// Joules per unit of dimensionless chemical potential, `k_B T`.
    pub potential_scale: f64,
}

pub fn normalize(dim: &DimensionalParams) -> Result<Normalization> {
    let fields = [
        ("length", dim.length),
        ("thermal_energy", dim.thermal_energy),
        ("fluid_volume", dim.fluid_volume),
        ("diffusivity", dim.diffusivity),
        ("shear_modulus", dim.shear_modulus),
        ("lambda_d", dim.lambda_d),
    ];
    for (name, v) in fields {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(Normalization {
        theta: Theta {
            lambda: dim.lambda_d / dim.shear_modulus,
            a: dim.thermal_energy / (dim.shear_modulus * dim.fluid_volume),
        },
        time_scale: dim.length * dim.length / dim.diffusivity,
        stress_scale: dim.shear_modulus,
        potential_scale: dim.thermal_energy,
    })
}
