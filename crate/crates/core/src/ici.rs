//! Inter-carrier interference kernels.
//!
//! A path with normalized CFO `ε` leaks subcarrier `c` into subcarrier `r`
//! with weight `I[c − r]`. Three kernels are provided:
//!
//! - [`ici_coefficient`]: the full kernel of a frequency-shifted DFT,
//!   `sin(π(m+ε)) / (N sin(π(m+ε)/N)) · exp(jπ(1−1/N)(m+ε))`. Circulant.
//! - [`dirichlet_coefficient`]: the same without the phase factor. Real,
//!   skew-circulant for even `N`, and its large-`N` limit is
//!   `(−1)^m sin(πε) / (π(m+ε))`, the form used by the closed-form analysis.
//! - [`nlos_coefficient`]: the aggregate scattered-path kernel,
//!   `1` on the diagonal and `(−1)^m ω_D / (√2 m)` elsewhere.
//!
//! Both LOS kernels give exactly unitary matrices; the real one differs from
//! the full one by a diagonal unitary similarity and a constant phase.

use core::f64::consts::{PI, SQRT_2};

use crate::structured::Toeplitz;
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

const SINGULAR: f64 = 1e-14;

/// Maximum Doppler shift normalized by the subcarrier spacing.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NormalizedDoppler(f64);

impl NormalizedDoppler {
    pub fn new(omega_d: f64) -> Result<Self> {
        if !omega_d.is_finite() || omega_d < 0.0 {
            return Err(Error::InvalidValue("omega_d"));
        }
        if omega_d >= 0.5 {
            return Err(Error::DopplerOutOfRange(omega_d));
        }
        Ok(NormalizedDoppler(omega_d))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Train speed (m/s) that produces this Doppler.
    pub fn speed(self, f_carrier: f64, t_s: f64) -> f64 {
        self.0 * SPEED_OF_LIGHT / (f_carrier * t_s)
    }
}

/// `ω_D = f v T_s / C`.
pub fn omega_d(f_carrier: f64, v: f64, t_s: f64) -> Result<NormalizedDoppler> {
    for (name, x) in [("f_carrier", f_carrier), ("v", v), ("t_s", t_s)] {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidValue(name));
        }
    }
    NormalizedDoppler::new(f_carrier * v * t_s / SPEED_OF_LIGHT)
}

/// Which LOS kernel the channel is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LosKernel {
    /// Full kernel with the `exp(jπ(1−1/N)(m+ε))` phase.
    Exact,
    /// Real Dirichlet kernel.
    #[default]
    Real,
}

// sin(π(m+ε))/(N sin(π(m+ε)/N)). sin(π(m+ε)) is written as (−1)^m sin(πε)
// so that ε = 0 gives exact zeros off the diagonal.
fn dirichlet_ratio(epsilon: f64, m: i64, n: usize) -> f64 {
    let x = m as f64 + epsilon;
    let den = libm::sin(PI * x / n as f64);
    if den.abs() < SINGULAR {
        return 1.0;
    }
    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * libm::sin(PI * epsilon) / (n as f64 * den)
}

/// Full LOS kernel at offset `m = col − row`, `|m| < N`.
pub fn ici_coefficient(epsilon: f64, m: i64, n: usize) -> C64 {
    let x = m as f64 + epsilon;
    let phase = PI * (1.0 - 1.0 / n as f64) * x;
    C64::from_polar(dirichlet_ratio(epsilon, m, n), phase)
}

/// Real Dirichlet kernel at offset `m`.
pub fn dirichlet_coefficient(epsilon: f64, m: i64, n: usize) -> f64 {
    dirichlet_ratio(epsilon, m, n)
}

/// `N → ∞` limit of the real kernel, `(−1)^m sin(πε)/(π(m+ε))`.
pub fn dirichlet_limit(epsilon: f64, m: i64) -> f64 {
    let x = m as f64 + epsilon;
    if x == 0.0 {
        return 1.0;
    }
    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * libm::sin(PI * epsilon) / (PI * x)
}

/// Aggregate NLOS kernel at offset `m`.
pub fn nlos_coefficient(omega_d: NormalizedDoppler, m: i64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * omega_d.value() / (SQRT_2 * m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IciKind {
    Los { epsilon: f64, kernel: LosKernel },
    Nlos { omega_d: f64 },
}

/// `N × N` interference matrix, stored by diagonals.
#[derive(Debug, Clone)]
pub struct IciMatrix {
    kind: IciKind,
    op: Toeplitz,
}

impl IciMatrix {
    pub fn kind(&self) -> IciKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.op.size()
    }

    pub fn toeplitz(&self) -> &Toeplitz {
        &self.op
    }

    /// Coefficient on offset `m = col − row`.
    pub fn coefficient(&self, m: i64) -> C64 {
        self.op.offset(m)
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.op.entry(row, col)
    }

    /// `Σ_c |I[row, c]|²`.
    pub fn row_energy(&self, row: usize) -> f64 {
        (0..self.size()).map(|c| self.entry(row, c).norm_sqr()).sum()
    }

    /// `max |(IᴴI − 1)[r, c]|`, evaluated column by column with fast products.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for col in 0..n {
            let gram_col = self.op.apply_hermitian(&self.op.column(col));
            for (row, v) in gram_col.iter().enumerate() {
                let target = if row == col { 1.0 } else { 0.0 };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }
}

/// Single-CFO matrix with the default (real) kernel.
pub fn build_los_ici_matrix(epsilon: f64, n: usize) -> IciMatrix {
    build_los_ici_matrix_with(LosKernel::default(), epsilon, n)
}

pub fn build_los_ici_matrix_with(kernel: LosKernel, epsilon: f64, n: usize) -> IciMatrix {
    let op = match kernel {
        LosKernel::Exact => Toeplitz::from_fn(n, |m| ici_coefficient(epsilon, m, n)),
        LosKernel::Real => Toeplitz::from_fn(n, |m| C64::new(dirichlet_coefficient(epsilon, m, n), 0.0)),
    };
    IciMatrix {
        kind: IciKind::Los { epsilon, kernel },
        op,
    }
}

pub fn build_nlos_ici_matrix(omega_d: NormalizedDoppler, n: usize) -> IciMatrix {
    IciMatrix {
        kind: IciKind::Nlos {
            omega_d: omega_d.value(),
        },
        op: Toeplitz::from_fn(n, |m| C64::new(nlos_coefficient(omega_d, m), 0.0)),
    }
}
