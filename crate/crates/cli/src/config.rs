//! Run configuration: one TOML or JSON document per invocation.

use num_complex::Complex64;
use serde::Deserialize;

use lattice_trace::error::{Error, Result};
use lattice_trace::green;
use lattice_trace::lattice::{LatticeSite, Potential};
use lattice_trace::oracle;
use lattice_trace::spectral::admissible;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialEntry {
    pub site: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub p: f64,
    pub potential: Vec<PotentialEntry>,
    #[serde(default = "defaults::radius")]
    pub radius: f64,
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::n_max")]
    pub n_max: usize,
    #[serde(default = "defaults::quadrature_tol")]
    pub quadrature_tol: f64,
    #[serde(default = "defaults::radial_ceiling")]
    pub radial_ceiling: f64,
    #[serde(default = "defaults::box_half_widths")]
    pub box_half_widths: Vec<usize>,
    #[serde(default = "defaults::band_margin")]
    pub band_margin: f64,
    #[serde(default = "defaults::truncation_eps")]
    pub truncation_eps: f64,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// Name of the kernel quadrature strategy.
    #[serde(default = "defaults::green_strategy")]
    pub green_strategy: String,
    /// Name of the box eigensolver, or `auto`.
    #[serde(default = "defaults::eigen_strategy")]
    pub eigen_strategy: String,
    /// Smallest distance from `lambda` to the band handed to the kernel.
    #[serde(default = "defaults::band_floor")]
    pub band_floor: f64,
    /// Spectral parameter `[re, im]` for the `green` command; defaults to
    /// `lambda(radius)`.
    #[serde(default)]
    pub green_lambda: Option<[f64; 2]>,
}

mod defaults {
    pub fn radius() -> f64 {
        0.9
    }
    pub fn samples() -> usize {
        1024
    }
    pub fn n_max() -> usize {
        5
    }
    pub fn quadrature_tol() -> f64 {
        1e-8
    }
    pub fn radial_ceiling() -> f64 {
        0.995
    }
    pub fn box_half_widths() -> Vec<usize> {
        vec![4, 6, 8]
    }
    pub fn band_margin() -> f64 {
        0.05
    }
    pub fn truncation_eps() -> f64 {
        1e-10
    }
    pub fn green_strategy() -> String {
        "axis-reduced".into()
    }
    pub fn eigen_strategy() -> String {
        "auto".into()
    }
    pub fn band_floor() -> f64 {
        1e-3
    }
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Parses a JSON document (leading `{`) or otherwise TOML, then validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| bad(json_key(&e.to_string()), e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| bad(toml_key(&e), e.message().to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn json_key(message: &str) -> &str {
    // serde reports the offending field between backticks
    message.split('`').nth(1).unwrap_or("document")
}

fn toml_key(e: &toml::de::Error) -> &str {
    json_key(e.message())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(bad("dimension", format!("must be >= 3, got {}", self.dimension)));
        }
        if !admissible(self.p, self.dimension)? {
            let range = if self.dimension == 3 { "1 <= p < 6/5" } else { "1 <= p < 4/3" };
            return Err(bad("p", format!("p = {} is not admissible in d = {} (need {range})", self.p, self.dimension)));
        }
        if !(self.radial_ceiling > 0.0 && self.radial_ceiling < 1.0) {
            return Err(bad("radial_ceiling", format!("must lie in (0, 1), got {}", self.radial_ceiling)));
        }
        if !(self.radius > 0.0 && self.radius <= self.radial_ceiling) {
            return Err(bad(
                "radius",
                format!("must satisfy 0 < radius <= radial_ceiling = {}, got {}", self.radial_ceiling, self.radius),
            ));
        }
        if self.samples < 256 || !self.samples.is_power_of_two() {
            return Err(bad("samples", format!("must be a power of two >= 256, got {}", self.samples)));
        }
        if !(1..=6).contains(&self.n_max) {
            return Err(bad("n_max", format!("must lie in 1..=6, got {}", self.n_max)));
        }
        for (key, value) in [
            ("quadrature_tol", self.quadrature_tol),
            ("band_margin", self.band_margin),
            ("truncation_eps", self.truncation_eps),
            ("band_floor", self.band_floor),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(bad(key, format!("must be positive and finite, got {value}")));
            }
        }
        if self.box_half_widths.is_empty() {
            return Err(bad("box_half_widths", "must list at least one half-width"));
        }
        if !green::registry().contains(&self.green_strategy) {
            return Err(bad(
                "green_strategy",
                format!("unknown `{}` (available: {})", self.green_strategy, green::registry().names().join(", ")),
            ));
        }
        if self.eigen_strategy != "auto" && !oracle::eigen_registry().contains(&self.eigen_strategy) {
            return Err(bad(
                "eigen_strategy",
                format!(
                    "unknown `{}` (available: auto, {})",
                    self.eigen_strategy,
                    oracle::eigen_registry().names().join(", ")
                ),
            ));
        }
        self.build_potential()?;
        Ok(())
    }

    pub fn build_potential(&self) -> Result<Potential> {
        Potential::new(
            self.dimension,
            self.potential
                .iter()
                .map(|e| (LatticeSite::new(e.site.clone()), Complex64::new(e.re, e.im))),
        )
        .map_err(|e| bad("potential", e.to_string()))
    }
}
