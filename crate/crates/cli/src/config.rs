//! Experiment configuration, read from a TOML file.

use nanoplate_core::expr::Expr;
use nanoplate_core::geometry::{Domain, PlaneMap};
use nanoplate_core::material::{Coefficient, MaterialField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub domain: Option<DomainConfig>,
    pub material: Option<MaterialConfig>,
    pub discretization: Option<DiscretizationConfig>,
    pub data: Option<DataConfig>,
    pub convergence: Option<ConvergenceConfig>,
    pub carleman: Option<CarlemanConfig>,
    pub uc_lab: Option<UcLabConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum DomainConfig {
    Disk {
        radius: f64,
        r0: Option<f64>,
    },
    Rectangle {
        a: f64,
        b: f64,
        r0: Option<f64>,
    },
    RoundedRectangle {
        a: f64,
        b: f64,
        corner_radius: f64,
        r0: Option<f64>,
    },
    /// Image of `[-a/2, a/2] × [-b/2, b/2]` under `(map[0], map[1])`.
    Mapped {
        a: f64,
        b: f64,
        map: [String; 2],
        r0: Option<f64>,
    },
}

/// A number or an expression in `x1`, `x2`.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expression(String),
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub mu: Scalar,
    pub lambda: Scalar,
    pub thickness: f64,
    /// Length scales `[l0, l1, l2]`.
    pub length_scales: [f64; 3],
    #[serde(default)]
    pub q9_share: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub degree: usize,
    pub elements: usize,
    pub quadrature_points: Option<usize>,
    #[serde(default = "defaults::method")]
    pub solver: String,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    Zero,
    /// Data generated by the boundary operators applied to `u_star`.
    Synthesize {
        u_star: String,
        #[serde(default = "defaults::samples")]
        samples: usize,
    },
    /// Expressions in the boundary point coordinates.
    Analytic {
        vhat: String,
        mn_hat: String,
        mnh_hat: String,
    },
    /// CSV with columns `s, Vhat, Mn_hat, Mnh_hat` on a uniform arclength grid.
    Csv {
        path: String,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub elements: Vec<usize>,
    pub degree: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CarlemanConfig {
    #[serde(default = "defaults::orders")]
    pub orders: Vec<u32>,
    /// Overrides the per-order default (1/2, 1/2, 1/5).
    pub epsilon: Option<f64>,
    #[serde(default = "defaults::tau_min")]
    pub tau_min: f64,
    #[serde(default = "defaults::tau_max")]
    pub tau_max: f64,
    #[serde(default = "defaults::tau_count")]
    pub tau_count: usize,
    #[serde(default = "defaults::r1")]
    pub r1: f64,
    pub doubling_radius: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UcLabConfig {
    #[serde(default = "defaults::r1")]
    pub r1: f64,
    #[serde(default = "defaults::levels")]
    pub levels: u32,
    /// Displacements whose discrete solutions join the harmonic battery.
    #[serde(default)]
    pub solver_fields: Vec<String>,
    #[serde(default = "defaults::caccioppoli_radius")]
    pub caccioppoli_radius: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "defaults::grid")]
    pub grid: usize,
    #[serde(default)]
    pub export_matrix: bool,
    #[serde(default)]
    pub export_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { grid: defaults::grid(), export_matrix: false, export_data: false }
    }
}

mod defaults {
    pub fn method() -> String {
        "direct".into()
    }
    pub fn samples() -> usize {
        1024
    }
    pub fn orders() -> Vec<u32> {
        vec![1, 2, 3]
    }
    pub fn tau_min() -> f64 {
        8.0
    }
    pub fn tau_max() -> f64 {
        32.0
    }
    pub fn tau_count() -> usize {
        7
    }
    pub fn r1() -> f64 {
        0.5
    }
    pub fn levels() -> u32 {
        12
    }
    pub fn caccioppoli_radius() -> f64 {
        0.25
    }
    pub fn grid() -> usize {
        41
    }
}

pub const DEFAULT_SEED: u64 = 20240611;

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configuration serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section.as_ref().ok_or_else(|| CliError::Config(format!("missing section [{name}]")))
    }
}

fn parse_expr(src: &str, key: &str) -> Result<Expr, CliError> {
    Expr::parse(src).map_err(|e| CliError::Config(format!("{key}: {e}")))
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain, CliError> {
        let (dom, r0) = match self {
            DomainConfig::Disk { radius, r0 } => (Domain::disk(*radius), r0),
            DomainConfig::Rectangle { a, b, r0 } => (Domain::rectangle(*a, *b), r0),
            DomainConfig::RoundedRectangle { a, b, corner_radius, r0 } => {
                (Domain::rounded_rectangle(*a, *b, *corner_radius), r0)
            }
            DomainConfig::Mapped { a, b, map, r0 } => {
                let components = [parse_expr(&map[0], "domain.map[0]")?, parse_expr(&map[1], "domain.map[1]")?];
                (Domain::mapped(*a, *b, PlaneMap { components }), r0)
            }
        };
        let dom = dom.map_err(|e| CliError::Config(format!("domain: {e}")))?;
        match r0 {
            Some(r) => dom.with_r0(*r).map_err(|e| CliError::Config(format!("domain.r0: {e}"))),
            None => Ok(dom),
        }
    }
}

impl Scalar {
    fn coefficient(&self, key: &str) -> Result<Coefficient, CliError> {
        match self {
            Scalar::Number(v) => Ok(Coefficient::Constant(*v)),
            Scalar::Expression(s) => Ok(Coefficient::from_expr(parse_expr(s, key)?)),
        }
    }
}

impl MaterialConfig {
    pub fn build(&self) -> Result<MaterialField, CliError> {
        let mut m = MaterialField::constant(1.0, 1.0, self.thickness, self.length_scales);
        m.mu = self.mu.coefficient("material.mu")?;
        m.lambda = self.lambda.coefficient("material.lambda")?;
        m.q9_share = self.q9_share;
        m.validate().map_err(|e| CliError::Config(format!("material: {e}")))?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = r#"
        seed = 3
        [domain]
        kind = "disk"
        radius = 1.0
        [material]
        mu = 1.0
        lambda = "1 + 0.1*x1"
        thickness = 1.0
        length_scales = [1.0, 1.0, 1.0]
        [discretization]
        degree = 4
        elements = 8
        [data]
        source = "synthesize"
        u_star = "x1^3"
    "#;

    #[test]
    fn parses_a_solve_config() {
        let c = ExperimentConfig::parse(SOLVE).unwrap();
        assert_eq!(c.seed(), 3);
        assert_eq!(c.discretization.as_ref().unwrap().degree, 4);
        assert!(matches!(c.data, Some(DataConfig::Synthesize { samples: 1024, .. })));
        let m = c.material.unwrap().build().unwrap();
        assert!(!m.is_constant());
    }

    #[test]
    fn missing_degree_is_named() {
        let text = SOLVE.replace("degree = 4", "");
        match ExperimentConfig::parse(&text) {
            Err(CliError::Config(msg)) => assert!(msg.contains("degree"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SOLVE.replace("elements = 8", "elements = 8\nelemnts = 9");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::parse(SOLVE).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(4);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn shipped_configs_parse_and_build() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            if let Some(d) = &c.domain {
                d.build().unwrap();
            }
            if let Some(m) = &c.material {
                m.build().unwrap();
            }
            seen += 1;
        }
        assert!(seen >= 4);
    }
}
