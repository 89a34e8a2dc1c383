//! Normalized transpose equalizers: `Ŷ = Sᵀ Y / γ`, no matrix inversion.
//!
//! Algorithm 1 equalizes with the LOS channel built from the large-scale map
//! alone and `γ_β = √(N T_y T_x) Σ ρ_t`. Algorithm 2 also uses the estimated
//! small-scale fading: it equalizes with the full Rician channel and
//! `γ_ζ = √(N T_y T_x) |Σ ρ_t (√(K/(K+1)) + √(1/(K+1)) r_t)|`.

use crate::channel::{ChannelMatrix, Frame, SmallScaleFading};
use crate::geometry::LargeScaleMap;
use crate::{Error, Result, C64};

/// Adjoint used by the equalizer and by the SIR analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adjoint {
    /// Plain transpose `Sᵀ`.
    #[default]
    Transpose,
    /// Conjugate transpose `Sᴴ`.
    Hermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    Los,
    Rician,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizerGain {
    pub gamma: f64,
    pub kind: GainKind,
}

fn scale(n: usize, t_x: usize, t_y: usize) -> f64 {
    libm::sqrt((n * t_x * t_y) as f64)
}

pub fn gamma_beta(map: &LargeScaleMap, n: usize, t_x: usize, t_y: usize) -> Result<EqualizerGain> {
    let gamma = scale(n, t_x, t_y) * map.rho_sum();
    if !(gamma > 0.0) {
        return Err(Error::InvalidValue("equalizer gain"));
    }
    Ok(EqualizerGain {
        gamma,
        kind: GainKind::Los,
    })
}

/// `k` is linear; `f64::INFINITY` gives `γ_β`.
pub fn gamma_zeta(
    map: &LargeScaleMap,
    fading: &SmallScaleFading,
    k: f64,
    n: usize,
    t_x: usize,
    t_y: usize,
) -> Result<EqualizerGain> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::InvalidValue("rician K"));
    }
    let (a, b) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        (libm::sqrt(k / (k + 1.0)), libm::sqrt(1.0 / (k + 1.0)))
    };
    let mut zeta = C64::new(0.0, 0.0);
    for p in map.paths() {
        zeta += (fading.get(p.rru_index)? * b + a) * p.rho;
    }
    let gamma = scale(n, t_x, t_y) * zeta.norm();
    if !(gamma > 0.0) {
        return Err(Error::InvalidValue("equalizer gain"));
    }
    Ok(EqualizerGain {
        gamma,
        kind: GainKind::Rician,
    })
}

/// Gain of a channel at zero Doppler: `√(N T_y T_x) |Σ w_t|`. Equals `γ_β`
/// for LOS channels and `γ_ζ` for Rician ones.
pub fn channel_gain(channel: &ChannelMatrix) -> EqualizerGain {
    let m = channel.mimo();
    EqualizerGain {
        gamma: scale(channel.subcarriers(), m.t_x, m.t_y) * channel.weight_sum().norm(),
        kind: if channel.rician_k().is_some() {
            GainKind::Rician
        } else {
            GainKind::Los
        },
    }
}

/// `Ŷ = adj(S) Y / γ` for an arbitrary equalizing channel and gain.
pub fn equalize_with(equalizer: &ChannelMatrix, gain: EqualizerGain, y: &Frame, adjoint: Adjoint) -> Result<Frame> {
    if !(gain.gamma > 0.0) || !gain.gamma.is_finite() {
        return Err(Error::InvalidValue("equalizer gain"));
    }
    let mut out = match adjoint {
        Adjoint::Transpose => equalizer.apply_transpose(y)?,
        Adjoint::Hermitian => equalizer.apply_hermitian(y)?,
    };
    out.scale(1.0 / gain.gamma);
    Ok(out)
}

/// Algorithm 1. The channel must be pure LOS.
pub fn equalize_los(channel: &ChannelMatrix, y: &Frame, adjoint: Adjoint) -> Result<Frame> {
    if channel.rician_k().is_some() {
        return Err(Error::NotLineOfSight);
    }
    equalize_with(channel, channel_gain(channel), y, adjoint)
}

/// Algorithm 2. Accepts a LOS channel as the `K → ∞` case.
pub fn equalize_rician(channel: &ChannelMatrix, y: &Frame, adjoint: Adjoint) -> Result<Frame> {
    equalize_with(channel, channel_gain(channel), y, adjoint)
}
