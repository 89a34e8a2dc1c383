//! Brute-force references for the structured code paths.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::channel::{complex_gaussian, ChannelMatrix, Frame};
use crate::equalize::{channel_gain, equalize_with, Adjoint};
use crate::ici::NormalizedDoppler;
use crate::{Error, Result, C64};

/// Scattered paths: `a_i ~ CN(0, 1/((K+1) N_s))`, `θ_i ~ U[−π, π]`.
#[derive(Debug, Clone)]
pub struct ScattererEnsemble {
    amplitudes: Vec<C64>,
    cos_aoa: Vec<f64>,
}

impl ScattererEnsemble {
    /// `k` is the linear K factor; zero gives a pure scattering channel.
    pub fn draw<R: Rng + ?Sized>(n_s: usize, k: f64, rng: &mut R) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::InvalidConfig("need at least one scatterer"));
        }
        if !k.is_finite() || k < 0.0 {
            return Err(Error::InvalidValue("rician K"));
        }
        let var = 1.0 / ((k + 1.0) * n_s as f64);
        let mut amplitudes = Vec::with_capacity(n_s);
        let mut cos_aoa = Vec::with_capacity(n_s);
        for _ in 0..n_s {
            amplitudes.push(complex_gaussian(rng, var));
            cos_aoa.push(libm::cos(rng.random_range(-PI..PI)));
        }
        Ok(ScattererEnsemble { amplitudes, cos_aoa })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// `D[m] = Σ_i a_i sin(π(m+x_i)) / (N sin(π(m+x_i)/N))` with `x_i = ω_D cos θ_i`.
pub fn doppler_spread_sample(ensemble: &ScattererEnsemble, omega_d: NormalizedDoppler, m: i64, n: usize) -> C64 {
    let nf = n as f64;
    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    ensemble
        .amplitudes
        .iter()
        .zip(&ensemble.cos_aoa)
        .map(|(a, c)| {
            let x = omega_d.value() * c;
            let den = libm::sin(PI * (m as f64 + x) / nf);
            let kernel = if den.abs() < 1e-14 {
                1.0
            } else {
                sign * libm::sin(PI * x) / (nf * den)
            };
            a * kernel
        })
        .sum()
}

/// `D[m]` for every `(ω_D, m)` pair, row-major in `omegas`.
///
/// Same values as [`doppler_spread_sample`], sharing the per-scatterer
/// trigonometry across offsets.
pub fn doppler_spread_batch(ensemble: &ScattererEnsemble, omegas: &[NormalizedDoppler], offsets: &[i64], n: usize) -> Vec<C64> {
    let nf = n as f64;
    let shifts: Vec<(f64, f64, f64)> = offsets
        .iter()
        .map(|&m| {
            let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let t = PI * m as f64 / nf;
            (sign, libm::sin(t), libm::cos(t))
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); omegas.len() * offsets.len()];
    for (a, c) in ensemble.amplitudes.iter().zip(&ensemble.cos_aoa) {
        for (wi, w) in omegas.iter().enumerate() {
            let x = w.value() * c;
            let s = libm::sin(PI * x);
            let (sy, cy) = small_sin_cos(PI * x / nf);
            for (mi, &(sign, sm, cm)) in shifts.iter().enumerate() {
                let den = sm * cy + cm * sy;
                let kernel = if den.abs() < 1e-14 { 1.0 } else { sign * s / (nf * den) };
                out[wi * offsets.len() + mi] += a * kernel;
            }
        }
    }
    out
}

// sin and cos of |y| < 0.01 from their Taylor series (error below 1e-20).
fn small_sin_cos(y: f64) -> (f64, f64) {
    if y.abs() > 0.01 {
        return (libm::sin(y), libm::cos(y));
    }
    let y2 = y * y;
    let s = y * (1.0 - y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0)));
    let c = 1.0 - y2 / 2.0 * (1.0 - y2 / 12.0 * (1.0 - y2 / 30.0));
    (s, c)
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn kron(&self, other: &DenseMatrix) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            self.get(r / other.rows, c / other.cols) * other.get(r % other.rows, c % other.cols)
        })
    }

    pub fn add_scaled(&mut self, weight: C64, other: &DenseMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += weight * b;
        }
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Upper limit on `N · max(T_x, T_y)` for dense materialization.
pub const DENSE_LIMIT: usize = 4096;

/// Entrywise `Σ_t w_t (I_t ⊗ G)` from the channel's term list.
pub fn dense_channel(channel: &ChannelMatrix) -> Result<DenseMatrix> {
    let n = channel.subcarriers();
    let m = channel.mimo();
    let size = n * m.t_x.max(m.t_y);
    if size > DENSE_LIMIT {
        return Err(Error::TooLarge(size));
    }
    let mut out = DenseMatrix::zeros(n * m.t_y, n * m.t_x);
    for term in channel.terms() {
        for r in 0..n * m.t_y {
            for c in 0..n * m.t_x {
                out.data[r * n * m.t_x + c] += term.weight * term.ici.entry(r / m.t_y, c / m.t_x);
            }
        }
    }
    Ok(out)
}

/// Monte Carlo SIR at subcarrier `k`: random unit-modulus frames are sent
/// through `channel`, equalized with `equalizer`, and the output on `k` is
/// split into the part driven by subcarrier `k` and the leakage from all
/// others. Noiseless.
pub fn empirical_sir_with<R: Rng + ?Sized>(
    equalizer: &ChannelMatrix,
    channel: &ChannelMatrix,
    k: usize,
    trials: usize,
    adjoint: Adjoint,
    rng: &mut R,
) -> Result<f64> {
    let n = channel.subcarriers();
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    if trials < 100 {
        return Err(Error::InvalidConfig("empirical SIR needs at least 100 trials"));
    }
    let t_x = channel.mimo().t_x;
    let gain = channel_gain(equalizer);
    let (mut desired, mut leaked) = (0.0, 0.0);
    for _ in 0..trials {
        let x = Frame::random_phase(n, t_x, rng);
        let mut only_k = Frame::zeros(n, t_x).into_data();
        only_k[k * t_x..(k + 1) * t_x].copy_from_slice(x.block(k));
        let only_k = Frame::new(only_k, t_x)?;
        let full = equalize_with(equalizer, gain, &channel.apply(&x)?, adjoint)?;
        let part = equalize_with(equalizer, gain, &channel.apply(&only_k)?, adjoint)?;
        for (f, p) in full.block(k).iter().zip(part.block(k)) {
            desired += p.norm_sqr();
            leaked += (f - p).norm_sqr();
        }
    }
    Ok(if leaked <= 1e-12 * desired {
        f64::INFINITY
    } else {
        desired / leaked
    })
}

/// [`empirical_sir_with`] using the channel as its own equalizer.
pub fn empirical_sir<R: Rng + ?Sized>(channel: &ChannelMatrix, k: usize, trials: usize, adjoint: Adjoint, rng: &mut R) -> Result<f64> {
    empirical_sir_with(channel, channel, k, trials, adjoint, rng)
}
