use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fractube::acceptance::AcceptanceConfig;
use fractube::crosssection::{Discretization, IntervalSetup};
use fractube::csextension::{Profile, QuadratureConfig};
use fractube::waveguide::{x_box_ratio, BoundStateConfig, Bump, MultitubeConfig, ProbeConfig};
use fractube::weyl::WeylConfig;
use fractube::{make_mask, Geometry, Grid, SpectralParams};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CrossSection,
    Band,
    Weyl,
    Extension,
    Tube,
    Multitube,
    ProbeConjecture,
    AllAcceptance,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    #[serde(default)]
    parameters: serde_json::Value,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

fn one() -> f64 {
    1.0
}

fn tol9() -> f64 {
    1e-9
}

fn tol8() -> f64 {
    1e-8
}

fn yes() -> bool {
    true
}

fn sixteenth() -> f64 {
    1.0 / 16.0
}

fn slice_limit() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSectionParams {
    pub s: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    pub spacings: Vec<f64>,
    pub k_max: usize,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub discretization: Option<Discretization>,
    #[serde(default)]
    pub box_half_length: Option<f64>,
    #[serde(default = "tol9")]
    pub tol: f64,
}

impl CrossSectionParams {
    pub fn setup(&self) -> IntervalSetup {
        let mut setup = IntervalSetup::new(self.half_width, self.spacings.clone());
        if let Some(l) = self.box_half_length {
            setup.box_half_length = l;
        }
        setup
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandParams {
    pub s: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    pub spacing: f64,
    #[serde(default)]
    pub box_half_length: Option<f64>,
    /// Defaults to 0 and 32 geometric points up to `8·Λ_s^{1/(2s)}`.
    #[serde(default)]
    pub kappas: Option<Vec<f64>>,
    #[serde(default = "tol9")]
    pub tol: f64,
}

impl BandParams {
    pub fn setup(&self) -> IntervalSetup {
        let mut setup = IntervalSetup::new(self.half_width, vec![self.spacing]);
        if let Some(l) = self.box_half_length {
            setup.box_half_length = l;
        }
        setup
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylParams {
    pub s: f64,
    #[serde(default)]
    pub kappa: f64,
    pub widths: Vec<usize>,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default = "sixteenth")]
    pub spacing: f64,
    #[serde(default)]
    pub x_half_length: Option<f64>,
    #[serde(default)]
    pub center: f64,
}

impl WeylParams {
    pub fn config(&self) -> WeylConfig {
        let mut c = WeylConfig::new(self.s, self.kappa, self.widths.clone());
        c.half_width = self.half_width;
        c.spacing = self.spacing;
        c.center = self.center;
        c.x_half_length = self
            .x_half_length
            .unwrap_or(x_box_ratio(self.s) * self.half_width);
        c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionParams {
    pub s: f64,
    pub profile: Profile,
    #[serde(default)]
    pub quadrature: Option<QuadratureConfig>,
    /// Also run the refined configuration (half spacing, twice the levels).
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default)]
    pub conormal_points: Vec<f64>,
    #[serde(default)]
    pub export_slices: bool,
    #[serde(default = "slice_limit")]
    pub slice_x_limit: f64,
}

impl ExtensionParams {
    pub fn quadrature(&self) -> QuadratureConfig {
        self.quadrature.unwrap_or(QuadratureConfig::REFERENCE)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeParams {
    pub s: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default)]
    pub bump: Option<Bump>,
    pub truncations: Vec<f64>,
    pub spacings: [f64; 2],
    #[serde(default)]
    pub x_half_length: Option<f64>,
    #[serde(default = "tol8")]
    pub tol: f64,
}

impl TubeParams {
    pub fn config(&self, seed: u64) -> BoundStateConfig {
        BoundStateConfig {
            half_width: self.half_width,
            s: self.s,
            bump: self.bump,
            truncations: self.truncations.clone(),
            spacings: self.spacings,
            x_half_length: self
                .x_half_length
                .unwrap_or(x_box_ratio(self.s) * self.half_width),
            tol: self.tol,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultitubeParams {
    pub s: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    pub directions: Vec<i32>,
    pub lengths: Vec<f64>,
    pub spacing: f64,
    #[serde(default = "tol8")]
    pub tol: f64,
}

impl MultitubeParams {
    pub fn config(&self, seed: u64) -> MultitubeConfig {
        MultitubeConfig {
            half_width: self.half_width,
            s: self.s,
            directions: self.directions.clone(),
            lengths: self.lengths.clone(),
            spacing: self.spacing,
            tol: self.tol,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    pub s: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    pub bump_depths: Vec<f64>,
    pub bump_half_length: f64,
    pub truncation: f64,
    pub spacings: [f64; 2],
    #[serde(default)]
    pub x_half_length: Option<f64>,
    #[serde(default = "tol8")]
    pub tol: f64,
}

impl ProbeParams {
    pub fn config(&self, seed: u64) -> ProbeConfig {
        ProbeConfig {
            half_width: self.half_width,
            s: self.s,
            bump_depths: self.bump_depths.clone(),
            bump_half_length: self.bump_half_length,
            truncation: self.truncation,
            spacings: self.spacings,
            x_half_length: self
                .x_half_length
                .unwrap_or(x_box_ratio(self.s) * self.half_width),
            tol: self.tol,
            seed,
        }
    }
}

fn all_criteria() -> Vec<u8> {
    (1..=10).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceParams {
    #[serde(default = "all_criteria")]
    pub criteria: Vec<u8>,
    #[serde(default)]
    pub sizes: AcceptanceConfig,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "experiment", content = "parameters", rename_all = "kebab-case")]
pub enum Experiment {
    CrossSection(CrossSectionParams),
    Band(BandParams),
    Weyl(WeylParams),
    Extension(ExtensionParams),
    Tube(TubeParams),
    Multitube(MultitubeParams),
    ProbeConjecture(ProbeParams),
    AllAcceptance(AcceptanceParams),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub seed: u64,
}

fn parameters<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, Failure> {
    let value = if value.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        value
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "parameters".to_string()
        } else {
            format!("parameters.{path}")
        };
        Failure::Config(format!("{field}: {}", e.into_inner()))
    })
}

/// Parses a config document; errors carry the line and column or the
/// field path.
pub fn parse(text: &str) -> Result<RunConfig, Failure> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Failure::Config(inner.to_string())
        } else {
            Failure::Config(format!("{path}: {inner}"))
        }
    })?;
    let p = raw.parameters;
    let experiment = match raw.experiment {
        ExperimentKind::CrossSection => Experiment::CrossSection(parameters(p)?),
        ExperimentKind::Band => Experiment::Band(parameters(p)?),
        ExperimentKind::Weyl => Experiment::Weyl(parameters(p)?),
        ExperimentKind::Extension => Experiment::Extension(parameters(p)?),
        ExperimentKind::Tube => Experiment::Tube(parameters(p)?),
        ExperimentKind::Multitube => Experiment::Multitube(parameters(p)?),
        ExperimentKind::ProbeConjecture => Experiment::ProbeConjecture(parameters(p)?),
        ExperimentKind::AllAcceptance => Experiment::AllAcceptance(parameters(p)?),
    };
    Ok(RunConfig {
        experiment,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        seed: raw.seed,
    })
}

fn check(r: fractube::Result<()>) -> Result<(), Failure> {
    r.map_err(|e| Failure::Config(e.to_string()))
}

fn spectral(s: f64, kappa: f64) -> Result<(), Failure> {
    check(SpectralParams::new(s, kappa).map(|_| ()))
}

/// Semantic checks that need no numerical work.
pub fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    match &cfg.experiment {
        Experiment::CrossSection(p) => {
            spectral(p.s, p.kappa)?;
            if p.k_max == 0 {
                return Err(Failure::Config(
                    "parameters.k_max: must be at least 1".into(),
                ));
            }
            check(p.setup().validate())
        }
        Experiment::Band(p) => {
            spectral(p.s, 0.0)?;
            check(p.setup().validate())?;
            if let Some(k) = &p.kappas {
                if k.first() != Some(&0.0) || k.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Failure::Config(
                        "parameters.kappas: must start at 0 and increase".into(),
                    ));
                }
            }
            Ok(())
        }
        Experiment::Weyl(p) => check(p.config().validate()),
        Experiment::Extension(p) => {
            spectral(p.s, 0.0)?;
            let q = p.quadrature();
            check(q.grid().map(|_| ()))?;
            if q.levels < 3 || !(q.y_max > 0.0) {
                return Err(Failure::Config(
                    "parameters.quadrature: need at least 3 levels and y_max > 0".into(),
                ));
            }
            Ok(())
        }
        Experiment::Tube(p) => {
            let c = p.config(cfg.seed);
            check(c.validate())?;
            if c.truncations.len() < 3 {
                return Err(Failure::Config(
                    "parameters.truncations: at least three truncations are required".into(),
                ));
            }
            Ok(())
        }
        Experiment::Multitube(p) => {
            let c = p.config(cfg.seed);
            spectral(c.s, 0.0)?;
            if c.lengths.is_empty() || c.lengths.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Failure::Config("parameters.lengths: must increase".into()));
            }
            let geometry = Geometry::Multitube {
                half_width: c.half_width,
                arms: c
                    .directions
                    .iter()
                    .map(|&direction| fractube::grid::Arm {
                        direction,
                        length: c.lengths[0],
                    })
                    .collect(),
            };
            let grid = Grid::covering(c.spacing, &geometry.reach())
                .map_err(|e| Failure::Config(e.to_string()))?;
            check(make_mask(geometry, grid).map(|_| ()))
        }
        Experiment::ProbeConjecture(p) => {
            let c = p.config(cfg.seed);
            if !(c.s > 0.0 && c.s < 0.5) {
                return Err(Failure::Config(format!(
                    "parameters.s: s = {} must lie in (0, 1/2) for the probe",
                    c.s
                )));
            }
            for &b in &c.bump_depths {
                let tube = BoundStateConfig {
                    half_width: c.half_width,
                    s: c.s,
                    bump: Some(Bump {
                        depth: b,
                        half_length: c.bump_half_length,
                    }),
                    truncations: vec![c.truncation / 2.0, c.truncation],
                    spacings: c.spacings,
                    x_half_length: c.x_half_length,
                    tol: c.tol,
                    seed: c.seed,
                };
                check(tube.validate())?;
            }
            if c.bump_depths.is_empty() || c.bump_depths.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Failure::Config(
                    "parameters.bump_depths: must increase".into(),
                ));
            }
            Ok(())
        }
        Experiment::AllAcceptance(p) => {
            if let Some(bad) = p.criteria.iter().find(|&&c| !(1..=10).contains(&c)) {
                return Err(Failure::Config(format!(
                    "parameters.criteria: no criterion {bad}"
                )));
            }
            Ok(())
        }
    }
}
