use std::path::Path;

use ird_core::generator::GenMode;
use ird_core::kernel::{Kernel, ModelSpec, PerturbationSpec};
use ird_core::theory::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use ird_core::typespace::MeasureSpec;
use ird_core::SweepSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_m() -> u32 {
    6
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            m: default_m(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

/// The JSON document accepted by every subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to a single atom when the kernel is constant.
    pub measure: Option<MeasureSpec>,
    pub kernel: Option<Kernel>,
    #[serde(default)]
    pub phi: PerturbationSpec,
    #[serde(default)]
    pub label: Option<String>,
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: GenMode,
    #[serde(default)]
    pub predict: PredictSection,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let kernel = self
            .kernel
            .clone()
            .ok_or_else(|| CliError::config("config has no \"kernel\" section"))?;
        let measure = match (&self.measure, &kernel) {
            (Some(m), _) => m.clone(),
            (None, Kernel::Constant { .. }) => MeasureSpec::Discrete {
                atoms: vec![vec![0.0]],
                weights: vec![1.0],
            },
            (None, _) => return Err(CliError::config("config has no \"measure\" section")),
        };
        let label = self.label.clone().unwrap_or_else(|| default_label(&kernel, &self.phi));
        let model = ModelSpec::new(measure, kernel, self.phi, &label);
        model.validate()?;
        Ok(model)
    }

    pub fn n(&self) -> Result<usize, CliError> {
        match self.n {
            Some(n) if n >= 1 => Ok(n),
            Some(_) => Err(CliError::config("n must be at least 1")),
            None => Err(CliError::config("config has no \"n\"")),
        }
    }
}

fn default_label(kernel: &Kernel, phi: &PerturbationSpec) -> String {
    match (kernel, phi) {
        (Kernel::Constant { .. }, PerturbationSpec::Zero) => "er".into(),
        (_, PerturbationSpec::ChungLu { .. }) => "chung-lu".into(),
        (_, PerturbationSpec::Grg { .. }) => "grg".into(),
        (_, PerturbationSpec::NorrosReittu { .. }) => "norros-reittu".into(),
        (Kernel::Rank1 { .. }, _) => "rank1".into(),
        (Kernel::Finitary(_), _) => "finitary".into(),
        _ => "model".into(),
    }
}
