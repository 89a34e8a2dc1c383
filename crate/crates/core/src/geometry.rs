//! Corridor layout: RRUs sit at `x = index · d_h`, offset `d_v` from a
//! straight track. The train moves toward increasing `x`.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Geometry, carrier, OFDM and antenna parameters of the corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentConfig {
    /// Spacing between adjacent RRUs along the track, m.
    pub d_h: f64,
    /// Perpendicular offset of the RRU line from the track, m.
    pub d_v: f64,
    pub rru_count: usize,
    pub t_x: usize,
    pub t_y: usize,
    /// Subcarrier count `N`.
    pub n: usize,
    pub f_carrier: f64,
    /// OFDM sample duration entering the Doppler formula, s.
    pub t_s: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Receive-power control constant, dB.
    pub b_db: f64,
    /// Number of dominant RRUs kept per position.
    pub n_t: usize,
}

impl DeploymentConfig {
    /// 2.4 GHz carrier, 71 µs samples, 1024 subcarriers, 4×4 antennas,
    /// RRUs every 500 m at 100 m from the track, three dominant RRUs.
    pub fn reference_corridor() -> Self {
        DeploymentConfig {
            d_h: 500.0,
            d_v: 100.0,
            rru_count: 8,
            t_x: 4,
            t_y: 4,
            n: 1024,
            f_carrier: 2.4e9,
            t_s: 71e-6,
            alpha: 3.8,
            b_db: 126.0,
            n_t: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.d_h) {
            return Err(Error::InvalidConfig("d_h must be positive"));
        }
        if !positive(self.d_v) {
            return Err(Error::InvalidConfig("d_v must be positive"));
        }
        if !positive(self.alpha) {
            return Err(Error::InvalidConfig("alpha must be positive"));
        }
        if !positive(self.f_carrier) || !positive(self.t_s) {
            return Err(Error::InvalidConfig("carrier frequency and sample time must be positive"));
        }
        if !self.b_db.is_finite() {
            return Err(Error::InvalidConfig("b_db must be finite"));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig("need at least two subcarriers"));
        }
        if self.t_x == 0 || self.t_y == 0 {
            return Err(Error::InvalidConfig("antenna counts must be at least 1"));
        }
        if self.rru_count == 0 || self.n_t == 0 || self.n_t > self.rru_count {
            return Err(Error::InvalidConfig("need 1 <= n_t <= rru_count"));
        }
        Ok(())
    }

    pub fn rru_position(&self, rru_index: usize) -> f64 {
        rru_index as f64 * self.d_h
    }

    /// RRU used as the sweep origin: the middle of the corridor, so that
    /// both neighbours and the next span are populated.
    pub fn anchor_rru(&self) -> usize {
        (self.rru_count - 1) / 2
    }

    /// Abeam the anchor RRU (maximum post-equalization SIR).
    pub fn point_a(&self) -> f64 {
        self.rru_position(self.anchor_rru())
    }

    /// Midway between the anchor and the next RRU (minimum SIR).
    pub fn point_b(&self) -> f64 {
        self.point_a() + 0.5 * self.d_h
    }

    /// Received power gain `G(d) = B − 10 α log10(d)` in dB.
    pub fn path_gain_db(&self, distance: f64) -> f64 {
        self.b_db - 10.0 * self.alpha * libm::log10(distance)
    }

    /// Amplitude gain `ρ = 10^{G/20}`.
    pub fn amplitude(&self, distance: f64) -> f64 {
        libm::pow(10.0, self.path_gain_db(distance) / 20.0)
    }

    /// cos θ toward the next RRU when abeam an RRU.
    pub fn cos_theta_a(&self) -> f64 {
        self.d_h / libm::hypot(self.d_h, self.d_v)
    }

    /// cos θ toward a flanking RRU at a midpoint.
    pub fn cos_theta_b(&self) -> f64 {
        let half = 0.5 * self.d_h;
        half / libm::hypot(half, self.d_v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainState {
    /// Position along the track, m.
    pub x: f64,
    /// Speed, m/s.
    pub v: f64,
}

impl TrainState {
    pub fn new(x: f64, v: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidValue("train position"));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidValue("train speed"));
        }
        Ok(TrainState { x, v })
    }
}

/// One RRU-to-train LOS path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGeometry {
    pub rru_index: usize,
    pub distance: f64,
    /// Cosine of the angle of arrival, positive when the RRU is ahead.
    pub cos_aoa: f64,
    /// Linear amplitude gain.
    pub rho: f64,
}

/// Dominant paths at one train position, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleMap {
    paths: Vec<PathGeometry>,
}

impl LargeScaleMap {
    /// Sorts by distance (ties by lower index). Rejects an empty list.
    pub fn new(mut paths: Vec<PathGeometry>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidConfig("large-scale map needs at least one path"));
        }
        paths.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(a.rru_index.cmp(&b.rru_index))
        });
        Ok(LargeScaleMap { paths })
    }

    pub fn paths(&self) -> &[PathGeometry] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn rho_sum(&self) -> f64 {
        self.paths.iter().map(|p| p.rho).sum()
    }
}

pub fn path_geometry(
    config: &DeploymentConfig,
    train: &TrainState,
    rru_index: usize,
) -> Result<PathGeometry> {
    if !train.x.is_finite() {
        return Err(Error::InvalidValue("train position"));
    }
    if !train.v.is_finite() || train.v < 0.0 {
        return Err(Error::InvalidValue("train speed"));
    }
    if rru_index >= config.rru_count {
        return Err(Error::IndexOutOfRange {
            index: rru_index,
            len: config.rru_count,
        });
    }
    let dx = config.rru_position(rru_index) - train.x;
    let distance = libm::hypot(dx, config.d_v);
    Ok(PathGeometry {
        rru_index,
        distance,
        cos_aoa: dx / distance,
        rho: config.amplitude(distance),
    })
}

/// The `n_t` nearest RRUs.
pub fn dominant_set(config: &DeploymentConfig, train: &TrainState) -> Result<LargeScaleMap> {
    config.validate()?;
    let mut all = (0..config.rru_count)
        .map(|i| path_geometry(config, train, i))
        .collect::<Result<Vec<_>>>()?;
    all.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.rru_index.cmp(&b.rru_index))
    });
    all.truncate(config.n_t);
    LargeScaleMap::new(all)
}

/// `ρ₁² / ρ₂²` for the nearest and second-nearest RRU.
pub fn psi_ratio(map: &LargeScaleMap) -> Result<f64> {
    match map.paths() {
        [first, second, ..] => Ok((first.rho / second.rho) * (first.rho / second.rho)),
        _ => Err(Error::DimensionMismatch {
            expected: 2,
            actual: map.len(),
        }),
    }
}
