//! Experiment description, version 1 of the schema.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub system: SystemSpec,
    #[serde(default)]
    pub observable: Option<ObservableSpec>,
    /// Normalized before use.
    #[serde(default)]
    pub initial_state: Option<ComplexVector>,
    pub time: TimeSpec,
    #[serde(default)]
    pub meters: Vec<MeterSpec>,
    pub route: Route,
    #[serde(default)]
    pub mensky: Option<MenskySpec>,
    #[serde(default)]
    pub transform: Option<TransformSpec>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub path_cap: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `H = [[e0, v], [v, e1]]`.
    Qubit { energies: [f64; 2], coupling: f64 },
    Nlevel { dim: usize, hamiltonian: MatrixSpec },
    Particle1d {
        mass: f64,
        x_min: f64,
        x_max: f64,
        points: usize,
        #[serde(default)]
        potential: PotentialSpec,
        #[serde(default)]
        packet: Option<PacketSpec>,
        #[serde(default)]
        kinetic: KineticSpec,
        #[serde(default)]
        symmetric_split: bool,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    Diagonal(Vec<f64>),
    Real(Vec<Vec<f64>>),
    Complex { real: Vec<Vec<f64>>, imag: Vec<Vec<f64>> },
    /// Hermitian matrix with entries uniform in `[-scale, scale]`, drawn from `seed`.
    Random { scale: f64 },
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Barrier { lo: f64, hi: f64, height: f64 },
    Harmonic { omega: f64, center: f64 },
    Samples(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub x0: f64,
    pub width: f64,
    pub p0: f64,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KineticSpec {
    #[default]
    Spectral,
    FiniteDifference,
}

/// Matrix observables for level systems, coordinate functions for particles.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Diagonal(Vec<f64>),
    Real(Vec<Vec<f64>>),
    Complex { real: Vec<Vec<f64>>, imag: Vec<Vec<f64>> },
    Random { scale: f64 },
    Indicator { lo: f64, hi: f64 },
    Position,
    Samples(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexVector {
    pub real: Vec<f64>,
    #[serde(default)]
    pub imag: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub duration: f64,
    pub slices: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeterSpec {
    pub switching: SwitchingSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SwitchingSpec {
    Impulse { at: f64 },
    /// `beta = 1/T`.
    Average,
    Constant { rate: f64 },
    Sampled { values: Vec<f64> },
}

/// Readout axis. Without `df` the spacing follows the readout lattice,
/// divided by `refine`; without `origin` the attainable range is centered.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    #[serde(default)]
    pub refine: Option<usize>,
    #[serde(default)]
    pub df: Option<f64>,
    #[serde(default)]
    pub origin: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Gaussian { width: f64 },
    Shift { offset: f64 },
    QuadraticPhase { b: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Paths,
    Lambda,
    Mensky,
    Transform,
    Crosscheck,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Paths => "paths",
            Self::Lambda => "lambda",
            Self::Mensky => "mensky",
            Self::Transform => "transform",
            Self::Crosscheck => "crosscheck",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MenskySpec {
    pub sigma: f64,
    #[serde(default)]
    pub records: Vec<RecordSpec>,
    /// Extra records with samples uniform over the observable range, drawn from `seed`.
    #[serde(default)]
    pub random_records: usize,
    /// Widths for the weak-limit scan against the first meter.
    #[serde(default)]
    pub weak_limit_sigmas: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RecordSpec {
    Constant(f64),
    Samples(Vec<f64>),
    /// Indices into the ascending observable spectrum, one per slice.
    Levels(Vec<usize>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub target: ObservableSpec,
    /// Defaults to the first meter's switching.
    #[serde(default)]
    pub target_switching: Option<SwitchingSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let path = match missing_field(&inner.to_string()) {
                Some(field) if path == "." => field,
                Some(field) => format!("{path}.{field}"),
                None => path,
            };
            CliError::config(path, inner.to_string())
        })?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", cfg.schema),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}

fn missing_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("missing field `")?;
    Some(rest[..rest.find('`')?].to_string())
}
