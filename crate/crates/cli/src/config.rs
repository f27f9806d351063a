//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::Path;

use blup_core::{Kernel, Trend};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: Option<String>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub family: Option<String>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Explicit value-observation sites (1D), used when no family is given.
    pub sites: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// One coordinate in 1D, two for the product model.
    pub point: Option<Vec<f64>>,
    /// Derivative order of the target (1D only).
    pub p: Option<u8>,
    /// Averaging atoms `[t, weight]` (1D only).
    pub nu: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// `[t1_min, t1_max, t2_min, t2_max]`.
    pub region: Option<[f64; 4]>,
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub interval: Option<[f64; 2]>,
    pub trend: Option<String>,
    pub design: DesignConfig,
    pub continuous: Option<bool>,
    pub target: TargetConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
    pub grid: GridConfig,
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `flags` wins wherever it sets a value.
    pub fn overlay(&self, flags: &RunConfig) -> RunConfig {
        RunConfig {
            kernel: KernelConfig {
                kind: pick(&flags.kernel.kind, &self.kernel.kind),
                lambda: pick(&flags.kernel.lambda, &self.kernel.lambda),
            },
            interval: pick(&flags.interval, &self.interval),
            trend: pick(&flags.trend, &self.trend),
            design: DesignConfig {
                family: pick(&flags.design.family, &self.design.family),
                n: pick(&flags.design.n, &self.design.n),
                sites: pick(&flags.design.sites, &self.design.sites),
            },
            continuous: pick(&flags.continuous, &self.continuous),
            target: TargetConfig {
                point: pick(&flags.target.point, &self.target.point),
                p: pick(&flags.target.p, &self.target.p),
                nu: pick(&flags.target.nu, &self.target.nu),
            },
            output: OutputConfig {
                path: pick(&flags.output.path, &self.output.path),
                format: pick(&flags.output.format, &self.output.format),
            },
            verify: VerifyConfig {
                mc_samples: pick(&flags.verify.mc_samples, &self.verify.mc_samples),
                seed: pick(&flags.verify.seed, &self.verify.seed),
            },
            grid: GridConfig {
                region: pick(&flags.grid.region, &self.grid.region),
                resolution: pick(&flags.grid.resolution, &self.grid.resolution),
            },
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        let [a, b] = self.interval.unwrap_or([0.0, 1.0]);
        (a, b)
    }

    pub fn kernel(&self) -> Result<Kernel, CliError> {
        let kind = self
            .kernel
            .kind
            .as_deref()
            .ok_or_else(|| CliError::Config("no kernel given (--kernel)".into()))?;
        let lambda = || {
            self.kernel
                .lambda
                .ok_or_else(|| CliError::Config(format!("kernel {kind} needs --lambda")))
        };
        let kernel = match kind {
            "ou" | "exponential" | "exp" => Kernel::exponential(lambda()?),
            "matern32" | "matern" => Kernel::matern32(lambda()?),
            "bm" | "brownian" => Kernel::BrownianMotion,
            "ibm" | "integrated-brownian" => Kernel::IntegratedBrownian,
            other => {
                return Err(CliError::Config(format!(
                    "unknown kernel {other:?}; expected ou, matern32, bm or ibm"
                )))
            }
        };
        kernel.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(kernel)
    }

    pub fn trend(&self) -> Result<Trend, CliError> {
        Trend::from_id(self.trend.as_deref().unwrap_or("const1")).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn format(&self, default: &str) -> Result<String, CliError> {
        let f = self.output.format.clone().unwrap_or_else(|| default.to_string());
        match f.as_str() {
            "csv" | "json" => Ok(f),
            other => Err(CliError::Config(format!("unknown format {other:?}; expected csv or json"))),
        }
    }
}
