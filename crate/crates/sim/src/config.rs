//! TOML run configuration.
//!
//! Every key is optional; missing keys take the corridor defaults
//! (500 m spacing, 100 m offset, α = 3.8, B = 126 dB, 71 µs, 2.4 GHz,
//! N = 1024, 4×4, three dominant RRUs).
//!
//! ```toml
//! d_h_m = 500.0
//! n_subcarriers = 256
//! kernel = "real"      # or "exact"
//! adjoint = "transpose" # or "hermitian"
//! ```

use std::path::Path;

use hsr_ici::equalize::Adjoint;
use hsr_ici::geometry::DeploymentConfig;
use hsr_ici::ici::LosKernel;
use hsr_ici::Conventions;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(#[from] hsr_ici::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Real,
    Exact,
}

impl From<KernelChoice> for LosKernel {
    fn from(k: KernelChoice) -> Self {
        match k {
            KernelChoice::Real => LosKernel::Real,
            KernelChoice::Exact => LosKernel::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AdjointChoice {
    Transpose,
    Hermitian,
}

impl From<AdjointChoice> for Adjoint {
    fn from(a: AdjointChoice) -> Self {
        match a {
            AdjointChoice::Transpose => Adjoint::Transpose,
            AdjointChoice::Hermitian => Adjoint::Hermitian,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    d_h_m: Option<f64>,
    d_v_m: Option<f64>,
    rru_count: Option<usize>,
    t_x: Option<usize>,
    t_y: Option<usize>,
    n_subcarriers: Option<usize>,
    f_carrier_hz: Option<f64>,
    t_s_s: Option<f64>,
    alpha: Option<f64>,
    b_db: Option<f64>,
    n_t: Option<usize>,
    kernel: Option<KernelChoice>,
    adjoint: Option<AdjointChoice>,
}

/// Deployment plus the numerical conventions for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub deployment: DeploymentConfig,
    pub conventions: Conventions,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            deployment: DeploymentConfig::reference_corridor(),
            conventions: Conventions::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let d = DeploymentConfig::reference_corridor();
        let c = Conventions::default();
        let cfg = SimConfig {
            deployment: DeploymentConfig {
                d_h: raw.d_h_m.unwrap_or(d.d_h),
                d_v: raw.d_v_m.unwrap_or(d.d_v),
                rru_count: raw.rru_count.unwrap_or(d.rru_count),
                t_x: raw.t_x.unwrap_or(d.t_x),
                t_y: raw.t_y.unwrap_or(d.t_y),
                n: raw.n_subcarriers.unwrap_or(d.n),
                f_carrier: raw.f_carrier_hz.unwrap_or(d.f_carrier),
                t_s: raw.t_s_s.unwrap_or(d.t_s),
                alpha: raw.alpha.unwrap_or(d.alpha),
                b_db: raw.b_db.unwrap_or(d.b_db),
                n_t: raw.n_t.unwrap_or(d.n_t),
            },
            conventions: Conventions {
                kernel: raw.kernel.map_or(c.kernel, Into::into),
                adjoint: raw.adjoint.map_or(c.adjoint, Into::into),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.deployment.validate()?;
        if self.deployment.n_t < 2 {
            return Err(hsr_ici::Error::InvalidConfig("experiments need n_t >= 2 (ψ uses two RRUs)").into());
        }
        if self.deployment.rru_count < 3 {
            return Err(hsr_ici::Error::InvalidConfig("experiments need rru_count >= 3").into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(SimConfig::from_toml("").unwrap(), SimConfig::default());
    }

    #[test]
    fn overrides_and_conventions() {
        let cfg = SimConfig::from_toml("n_subcarriers = 64\nt_x = 2\nkernel = \"exact\"\nadjoint = \"hermitian\"\n").unwrap();
        assert_eq!(cfg.deployment.n, 64);
        assert_eq!(cfg.deployment.t_x, 2);
        assert_eq!(cfg.deployment.t_y, 4);
        assert_eq!(cfg.conventions.kernel, LosKernel::Exact);
        assert_eq!(cfg.conventions.adjoint, Adjoint::Hermitian);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(SimConfig::from_toml("d_h_m = -1.0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(SimConfig::from_toml("speed = 3"), Err(ConfigError::Parse(_))));
        assert!(matches!(SimConfig::from_toml("n_t = 1"), Err(ConfigError::Invalid(_))));
        assert!(matches!(SimConfig::load(Path::new("/nonexistent/cfg.toml")), Err(ConfigError::Io { .. })));
    }
}
