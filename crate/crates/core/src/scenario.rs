//! Scenario files (TOML): scatterer shapes, measurement setup, noise and
//! inversion settings. Five built-in scenarios are provided.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{add_noise, simulate_cauchy_data, CauchyData, Coefficient, IncidentWave, Shape};
use crate::grid::{Grid2D, KGrid};
use crate::inversion::InversionConfig;

pub const BUILTIN_NAMES: [&str; 6] = ["example1", "example2a", "example2b", "example3a", "example3b", "null"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub shapes: Vec<Shape>,
    #[serde(default = "default_direction")]
    pub direction: [f64; 2],
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Truth data are computed on a grid this many times finer.
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default)]
    pub inversion: InversionConfig,
}

fn default_direction() -> [f64; 2] {
    [0.0, -1.0]
}

fn default_delta() -> f64 {
    0.05
}

fn default_refinement() -> usize {
    2
}

/// Measurements produced by [`Scenario::simulate`].
#[derive(Debug, Clone)]
pub struct Simulated {
    pub clean: CauchyData,
    pub noisy: CauchyData,
    pub truth: Coefficient,
}

impl Scenario {
    fn with_shapes(name: &str, shapes: Vec<Shape>) -> Self {
        Self {
            name: name.to_string(),
            shapes,
            direction: default_direction(),
            delta: default_delta(),
            seed: 1,
            refinement: default_refinement(),
            inversion: InversionConfig::default(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let disk = |c: [f64; 2], radius: f64, value: f64| Shape::Disk { center: c, radius, value };
        let rect = |min: [f64; 2], max: [f64; 2], value: f64| Shape::Rectangle { min, max, value };
        let shapes = match name {
            "example1" => vec![disk([0.0, 0.45], 0.2, 3.0)],
            "example2a" => vec![disk([-0.35, 0.45], 0.2, 2.0), disk([0.35, 0.45], 0.2, 2.0)],
            "example2b" => vec![disk([-0.35, 0.45], 0.2, 2.0), disk([0.35, 0.45], 0.2, 1.5)],
            "example3a" => vec![disk([-0.35, 0.45], 0.2, 2.0), rect([0.15, 0.3], [0.55, 0.6], 1.5)],
            "example3b" => vec![
                disk([-0.45, 0.45], 0.15, 2.0),
                disk([0.45, 0.45], 0.15, 2.0),
                rect([-0.15, 0.3], [0.15, 0.6], 1.5),
            ],
            "null" => {
                let mut s = Self::with_shapes(name, vec![]);
                s.delta = 0.0;
                return Some(s);
            }
            _ => return None,
        };
        Some(Self::with_shapes(name, shapes))
    }

    /// A built-in name or a path to a TOML file.
    pub fn resolve(name: &str) -> Result<Self> {
        if let Some(s) = Self::builtin(name) {
            return Ok(s);
        }
        let path = Path::new(name);
        if !path.exists() {
            return Err(Error::Config(format!(
                "'{name}' is neither a file nor a built-in scenario ({})",
                BUILTIN_NAMES.join(", ")
            )));
        }
        Self::load(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.inversion.validate()?;
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise level must be non-negative, got {}", self.delta)));
        }
        if self.refinement == 0 {
            return Err(Error::InvalidParameter("refinement must be at least 1".into()));
        }
        self.wave()?;
        Coefficient::from_shapes(self.grid()?, self.shapes.clone())?;
        Ok(())
    }

    pub fn wave(&self) -> Result<IncidentWave> {
        IncidentWave::new(self.direction[0], self.direction[1])
    }

    pub fn grid(&self) -> Result<Grid2D> {
        self.inversion.grid()
    }

    pub fn kgrid(&self) -> Result<KGrid> {
        self.inversion.kgrid()
    }

    /// Clean and noisy Cauchy data plus the rasterized truth.
    pub fn simulate(&self) -> Result<Simulated> {
        self.validate()?;
        let (clean, truth) = simulate_cauchy_data(&self.shapes, &self.grid()?, &self.wave()?, &self.kgrid()?, self.refinement)?;
        let noisy = add_noise(&clean, self.delta, self.seed);
        Ok(Simulated { clean, noisy, truth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_roundtrip_through_toml() {
        for name in BUILTIN_NAMES {
            let s = Scenario::builtin(name).unwrap();
            s.validate().unwrap();
            let back: Scenario = toml::from_str(&s.to_toml()).unwrap();
            assert_eq!(back, s);
        }
        assert!(Scenario::builtin("example9").is_none());
    }

    #[test]
    fn sparse_file_takes_defaults() {
        let s: Scenario = toml::from_str(
            r#"
name = "one"
[[shapes]]
kind = "disk"
center = [0.0, 0.45]
radius = 0.2
value = 3.0
[inversion]
lambda = 0.0
"#,
        )
        .unwrap();
        assert_eq!(s.delta, 0.05);
        assert_eq!(s.seed, 0);
        assert_eq!(s.direction, [0.0, -1.0]);
        assert_eq!(s.inversion.lambda, 0.0);
        let defaults = InversionConfig { lambda: 0.0, ..InversionConfig::default() };
        assert_eq!(s.inversion, defaults);
        assert_eq!(s.shapes, Scenario::builtin("example1").unwrap().shapes);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Scenario>("name = \"x\"\nradius = 2\n").is_err());
        assert!(toml::from_str::<Scenario>("name = \"x\"\n[inversion]\nepsilom = 2\n").is_err());
    }

    #[test]
    fn shape_touching_the_boundary_is_rejected() {
        let mut s = Scenario::builtin("example1").unwrap();
        s.shapes = vec![Shape::Disk { center: [0.0, 0.7], radius: 0.2, value: 1.0 }];
        assert!(s.validate().is_err());
    }
}
