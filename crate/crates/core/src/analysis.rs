//! SIR analysis of the transpose equalizers.
//!
//! After equalization the subcarrier-`k` output is row `k` of
//! `Λ = adj(E) S`, where `E` is the equalizing channel. Because both channels
//! factor as `B ⊗ G`, every `T_y × T_x` block of `Λ` is a scalar multiple of
//! `GᵀG`, whose Frobenius norm `T_y T_x` cancels in the SIR. All exact SIR
//! values here are therefore computed on the `N × N` subcarrier factors.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::channel::{ChannelMatrix, SmallScaleFading};
use crate::equalize::Adjoint;
use crate::geometry::LargeScaleMap;
use crate::ici::{build_los_ici_matrix_with, build_nlos_ici_matrix, LosKernel, NormalizedDoppler};
use crate::structured::Toeplitz;
use crate::{Error, Result, C64};

/// ζ(2) = π²/6.
pub const ZETA2: f64 = PI * PI / 6.0;
/// ζ(4) = π⁴/90.
pub const ZETA4: f64 = PI * PI * PI * PI / 90.0;

/// Interference below this fraction of the signal is round-off from the FFT
/// products; such SIR values are reported as infinite.
const ZERO_INTERFERENCE: f64 = 1e-20;

pub fn to_db(linear: f64) -> f64 {
    10.0 * libm::log10(linear)
}

pub fn from_db(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

fn sinc(eps: f64) -> f64 {
    if eps == 0.0 {
        1.0
    } else {
        libm::sin(PI * eps) / (PI * eps)
    }
}

fn parity(m: i64) -> f64 {
    if m.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn cfos(map: &LargeScaleMap, omega_d: NormalizedDoppler) -> Vec<(f64, f64)> {
    map.paths()
        .iter()
        .map(|p| (p.rho, omega_d.value() * p.cos_aoa))
        .collect()
}

/// Closed-form `Λ^L(k, k+m)` as a multiple of `GᵀG` (large-`N` limit).
pub fn lambda_los(map: &LargeScaleMap, omega_d: NormalizedDoppler, m: u64) -> f64 {
    let paths = cfos(map, omega_d);
    let mut acc = 0.0;
    let mf = m as f64;
    for &(ri, ei) in &paths {
        for &(rj, ej) in &paths {
            let (si, sj) = (libm::sin(PI * ei), libm::sin(PI * ej));
            acc += ri
                * rj
                * if m == 0 {
                    sinc(ei) * sinc(ej) + si * sj / 3.0
                } else {
                    sinc(ei) * sj / (PI * (ej - mf))
                        + si * sinc(ej) / (PI * (ei + mf))
                        + 2.0 * si * sj / (PI * PI * mf * mf)
                };
        }
    }
    if m == 0 {
        acc
    } else {
        acc * parity(m as i64)
    }
}

/// Closed-form blocks of `SᵀS` for a Rician channel, as multiples of `GᵀG`,
/// at offset `m` (block `(k, k+m)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianLambda {
    pub los: f64,
    pub nlos: C64,
    pub los_nlos: C64,
    pub nlos_los: C64,
    pub combined: C64,
}

// (S^L)ᵀ S^N block (k, k+m) per unit Σ_j ρ_j r_j.
fn los_nlos_unit(paths: &[(f64, f64)], omega: f64, m: i64) -> f64 {
    // The textbook expression is written for the block (k+m, k) of our layout.
    let m = -m;
    let mf = m as f64;
    let mut acc = 0.0;
    for &(ri, ei) in paths {
        let si = libm::sin(PI * ei);
        acc += ri
            * if m == 0 {
                sinc(ei) + SQRT_2 * PI / 6.0 * si * omega
            } else {
                parity(m)
                    * (omega / (-SQRT_2 * mf) + si / (PI * (ei + mf)) + SQRT_2 * ei * omega / (mf * mf))
            };
    }
    acc
}

/// `k` is linear; an infinite `k` returns the LOS blocks.
pub fn lambda_rician(
    map: &LargeScaleMap,
    fading: &SmallScaleFading,
    k: f64,
    omega_d: NormalizedDoppler,
    m: i64,
) -> Result<RicianLambda> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::InvalidValue("rician K"));
    }
    let omega = omega_d.value();
    let paths = cfos(map, omega_d);
    let mut z = C64::new(0.0, 0.0);
    for p in map.paths() {
        z += fading.get(p.rru_index)? * p.rho;
    }
    let los = lambda_los(map, omega_d, m.unsigned_abs());
    let nlos_unit = if m == 0 {
        1.0 + PI * PI * omega * omega / 6.0
    } else {
        parity(m) * omega * omega / (m * m) as f64
    };
    let nlos = z * z * nlos_unit;
    let los_nlos = z * los_nlos_unit(&paths, omega, m);
    let nlos_los = z * los_nlos_unit(&paths, omega, -m);
    let combined = if k.is_infinite() {
        C64::new(los, 0.0)
    } else {
        let s = libm::sqrt(k) / (k + 1.0);
        (los_nlos + nlos_los) * s + nlos / (k + 1.0) + los * (k / (k + 1.0))
    };
    Ok(RicianLambda {
        los,
        nlos,
        los_nlos,
        nlos_los,
        combined,
    })
}

/// LOS SIR from the closed-form `Λ^L` sums, truncated at `|m| ≤ m_max` with
/// the `O(1/m⁴)` tail added analytically.
pub fn sir_closed_form(map: &LargeScaleMap, omega_d: NormalizedDoppler, m_max: u64) -> f64 {
    let signal = lambda_los(map, omega_d, 0).powi(2);
    let mut interference = 0.0;
    let mut last = 0.0;
    for m in 1..=m_max {
        last = lambda_los(map, omega_d, m);
        interference += 2.0 * last * last;
    }
    if m_max > 0 {
        // Λ(m) ≈ c/m², so Σ_{m>M} Λ(m)² ≈ Λ(M)² M / 3.
        let mf = m_max as f64;
        interference += 2.0 * last * last * mf / 3.0;
    }
    if interference <= ZERO_INTERFERENCE * signal {
        f64::INFINITY
    } else {
        signal / interference
    }
}

fn adjoint_column(b: &Toeplitz, k: usize, adjoint: Adjoint) -> Vec<C64> {
    let col = b.column(k);
    match adjoint {
        Adjoint::Transpose => col,
        Adjoint::Hermitian => col.into_iter().map(|v| v.conj()).collect(),
    }
}

fn ratio_at(row: &[C64], k: usize) -> f64 {
    let signal = row[k].norm_sqr();
    let interference: f64 = row
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    if interference <= ZERO_INTERFERENCE * signal {
        f64::INFINITY
    } else {
        signal / interference
    }
}

fn check_subcarrier(channel: &ChannelMatrix, k: usize) -> Result<()> {
    if k >= channel.subcarriers() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: channel.subcarriers(),
        });
    }
    Ok(())
}

/// SIR at subcarrier `k` after equalizing `channel` with `equalizer`.
pub fn sir_equalized(equalizer: &ChannelMatrix, channel: &ChannelMatrix, k: usize, adjoint: Adjoint) -> Result<f64> {
    check_subcarrier(channel, k)?;
    if equalizer.subcarriers() != channel.subcarriers() {
        return Err(Error::DimensionMismatch {
            expected: channel.subcarriers(),
            actual: equalizer.subcarriers(),
        });
    }
    let u = adjoint_column(equalizer.combined(), k, adjoint);
    let row = channel.combined().apply_transpose(&u);
    // Each block carries ‖GᵀG‖_F = T_y T_x on both sides of the ratio.
    let g = channel.mimo().gram_norm() * equalizer.mimo().gram_norm();
    Ok(ratio_at(&row.iter().map(|v| v * g).collect::<Vec<_>>(), k))
}

/// SIR at subcarrier `k` with the channel's own equalizer (Algorithm 1 for a
/// LOS channel, Algorithm 2 for a Rician one).
pub fn sir_exact(channel: &ChannelMatrix, k: usize, adjoint: Adjoint) -> Result<f64> {
    sir_equalized(channel, channel, k, adjoint)
}

/// SIR at subcarrier `k` of the raw received signal.
pub fn sir_unequalized(channel: &ChannelMatrix, k: usize) -> Result<f64> {
    check_subcarrier(channel, k)?;
    let b = channel.combined();
    let row: Vec<C64> = (0..channel.subcarriers()).map(|i| b.entry(k, i)).collect();
    Ok(ratio_at(&row, k))
}

/// Exact SIR at one position as a function of the small-scale fading.
///
/// With `L = Σ ρ_t I_t` and `D` the NLOS kernel, every channel at the position
/// is `S = s_L L + s_D D`. The equalized row `k` is bilinear in the channel
/// and equalizer coefficients, so its diagonal entry and interference energy
/// reduce to a 4-vector and a 4×4 Gram matrix that are computed once.
#[derive(Debug, Clone)]
pub struct SirModel {
    k: usize,
    adjoint: Adjoint,
    paths: Vec<(usize, f64)>,
    diag: [C64; 4],
    gram: [[C64; 4]; 4],
    raw_diag: [C64; 2],
    raw_gram: [[C64; 2]; 2],
}

impl SirModel {
    pub fn new(
        map: &LargeScaleMap,
        omega_d: NormalizedDoppler,
        n: usize,
        kernel: LosKernel,
        adjoint: Adjoint,
        k: usize,
    ) -> Result<Self> {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
        let los: Vec<_> = map
            .paths()
            .iter()
            .map(|p| build_los_ici_matrix_with(kernel, omega_d.value() * p.cos_aoa, n))
            .collect();
        let l = Toeplitz::weighted_sum(
            map.paths()
                .iter()
                .zip(&los)
                .map(|(p, m)| (C64::new(p.rho, 0.0), m.toeplitz())),
        )
        .ok_or(Error::InvalidConfig("empty large-scale map"))?;
        let nlos = build_nlos_ici_matrix(omega_d, n);
        let d = nlos.toeplitz();
        let ops = [&l, d];
        let mut vecs: Vec<Vec<C64>> = Vec::with_capacity(4);
        for x in ops {
            for y in ops {
                vecs.push(x.apply_transpose(&adjoint_column(y, k, adjoint)));
            }
        }
        let unit: Vec<C64> = (0..n).map(|i| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect();
        let raw: Vec<Vec<C64>> = ops.iter().map(|x| x.apply_transpose(&unit)).collect();
        Ok(SirModel {
            k,
            adjoint,
            paths: map.paths().iter().map(|p| (p.rru_index, p.rho)).collect(),
            diag: core::array::from_fn(|p| vecs[p][k]),
            gram: gram(&vecs, k),
            raw_diag: core::array::from_fn(|p| raw[p][k]),
            raw_gram: gram(&raw, k),
        })
    }

    /// `Σ ρ_t r_t` over this position's dominant RRUs.
    pub fn nlos_gain(&self, fading: &SmallScaleFading) -> Result<C64> {
        let mut z = C64::new(0.0, 0.0);
        for &(i, rho) in &self.paths {
            z += fading.get(i)? * rho;
        }
        Ok(z)
    }

    /// Coefficients `(s_L, s_D)` of the channel for linear `k`.
    pub fn channel_coefficients(&self, k: f64, fading: &SmallScaleFading) -> Result<[C64; 2]> {
        if k.is_infinite() {
            return Ok([C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        }
        let a = libm::sqrt(k / (k + 1.0));
        let b = libm::sqrt(1.0 / (k + 1.0));
        Ok([C64::new(a, 0.0), self.nlos_gain(fading)? * b])
    }

    /// SIR of channel `s` equalized with `e` (both as `(s_L, s_D)`).
    pub fn sir(&self, s: [C64; 2], e: [C64; 2]) -> f64 {
        let e = match self.adjoint {
            Adjoint::Transpose => e,
            Adjoint::Hermitian => [e[0].conj(), e[1].conj()],
        };
        let c: [C64; 4] = core::array::from_fn(|p| s[p / 2] * e[p % 2]);
        quadratic_ratio(&c, &self.diag, &self.gram)
    }

    /// Algorithm 1 (LOS equalizer) on a Rician channel.
    pub fn sir_alg1(&self, k: f64, fading: &SmallScaleFading) -> Result<f64> {
        let s = self.channel_coefficients(k, fading)?;
        Ok(self.sir(s, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]))
    }

    /// Algorithm 2 (matched Rician equalizer).
    pub fn sir_alg2(&self, k: f64, fading: &SmallScaleFading) -> Result<f64> {
        let s = self.channel_coefficients(k, fading)?;
        Ok(self.sir(s, s))
    }

    /// Pure LOS channel, Algorithm 1.
    pub fn sir_los(&self) -> f64 {
        let one = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        self.sir(one, one)
    }

    /// Raw received signal, no equalization.
    pub fn sir_unequalized(&self, s: [C64; 2]) -> f64 {
        quadratic_ratio(&s, &self.raw_diag, &self.raw_gram)
    }

    pub fn subcarrier(&self) -> usize {
        self.k
    }
}

fn gram<const P: usize>(vecs: &[Vec<C64>], k: usize) -> [[C64; P]; P] {
    core::array::from_fn(|p| {
        core::array::from_fn(|q| {
            vecs[p]
                .iter()
                .zip(&vecs[q])
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, (a, b))| a.conj() * b)
                .sum()
        })
    })
}

fn quadratic_ratio<const P: usize>(c: &[C64; P], diag: &[C64; P], gram: &[[C64; P]; P]) -> f64 {
    let signal = c.iter().zip(diag).map(|(a, b)| a * b).sum::<C64>().norm_sqr();
    let mut interference = 0.0;
    for p in 0..P {
        for q in 0..P {
            interference += (c[p].conj() * gram[p][q] * c[q]).re;
        }
    }
    if interference <= ZERO_INTERFERENCE * signal {
        f64::INFINITY
    } else {
        signal / interference
    }
}

/// Linear SIR extremes over a position sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirBounds {
    /// Abeam an RRU (point A).
    pub max_sir: f64,
    /// Midway between RRUs (point B).
    pub min_sir: f64,
}

impl SirBounds {
    pub fn max_db(&self) -> f64 {
        to_db(self.max_sir)
    }

    pub fn min_db(&self) -> f64 {
        to_db(self.min_sir)
    }
}

/// `max = ψ / (72 ω⁴ cos⁴θ_A ζ(4))`, `min = 1 / (8 ω⁴ cos⁴θ_B ζ(4))`.
pub fn sir_bounds_awgn(psi: f64, omega_d: NormalizedDoppler, cos_theta_a: f64, cos_theta_b: f64) -> Result<SirBounds> {
    let w = omega_d.value();
    if w <= 0.0 {
        return Err(Error::InvalidValue("omega_d must be positive for SIR bounds"));
    }
    let w4 = w * w * w * w;
    Ok(SirBounds {
        max_sir: psi / (72.0 * w4 * cos_theta_a.powi(4) * ZETA4),
        min_sir: 1.0 / (8.0 * w4 * cos_theta_b.powi(4) * ZETA4),
    })
}

/// Rician bounds from the dominant sets at A (`map_a`) and B (`map_b`).
///
/// At A the abeam RRU has gain `ρ₂`, its neighbour `ρ₁` and fading `r`; at B
/// the two flanking RRUs share `ρ` and their fading sums to `R`. With
/// `R_t = r_t G` every block is a multiple of `GᵀG`, so the norms reduce to
/// complex moduli.
pub fn sir_bounds_rician(
    map_a: &LargeScaleMap,
    map_b: &LargeScaleMap,
    fading: &SmallScaleFading,
    k: f64,
    omega_d: NormalizedDoppler,
) -> Result<SirBounds> {
    if !k.is_finite() || k <= 0.0 {
        return Err(Error::InfiniteK);
    }
    let w2 = omega_d.value() * omega_d.value();
    if w2 == 0.0 {
        return Err(Error::InvalidValue("omega_d must be positive for SIR bounds"));
    }
    let (near_a, next_a) = match map_a.paths() {
        [a, b, ..] => (a, b),
        _ => return Err(Error::DimensionMismatch { expected: 2, actual: map_a.len() }),
    };
    let (left_b, right_b) = match map_b.paths() {
        [a, b, ..] => (a, b),
        _ => return Err(Error::DimensionMismatch { expected: 2, actual: map_b.len() }),
    };
    let sk = libm::sqrt(k);

    let r = fading.get(near_a.rru_index)?;
    let (rho2, rho1) = (near_a.rho, next_a.rho);
    let c2a = next_a.cos_aoa * next_a.cos_aoa;
    let num = ((r * (2.0 * sk) + r * r + k) * (rho2 * rho2)).norm_sqr();
    let den = 2.0
        * ZETA4
        * (C64::new(6.0 * k * rho1 * rho2 * w2 * c2a, 0.0) - r * (4.0 * sk * rho1 * rho2 * w2 * c2a)
            + r * r * (2.0 * rho2 * rho2 * w2))
            .norm_sqr();
    let max_sir = num / den;

    let rs = fading.get(left_b.rru_index)? + fading.get(right_b.rru_index)?;
    let c2b = left_b.cos_aoa * left_b.cos_aoa;
    let rho = left_b.rho;
    let num = ((rs * (2.0 * sk) + rs * rs + 4.0 * k) * (rho * rho)).norm_sqr();
    let den = 2.0 * ZETA4 * ((rs * rs * w2 + 8.0 * k * w2 * c2b) * (rho * rho)).norm_sqr();
    Ok(SirBounds {
        max_sir,
        min_sir: num / den,
    })
}

/// Expectation and variance of the SIR extremes versus the K factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirStats {
    /// Algorithm 1: expected maximum SIR, linear.
    pub mean_max_sir: f64,
    /// Algorithm 1: variance of the maximum SIR, dB².
    pub var_max_sir_db2: f64,
    /// Algorithm 2: variance of the maximum SIR, dB².
    pub rician_var_max_db2: f64,
    /// Algorithm 2: variance of the minimum SIR, dB².
    pub rician_var_min_db2: f64,
}

pub fn lemma4_stats(psi: f64, omega_d: NormalizedDoppler, cos_theta_a: f64, k: f64) -> Result<SirStats> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::InvalidValue("rician K"));
    }
    let w = omega_d.value();
    let (w2, c4) = (w * w, cos_theta_a.powi(4));
    let ln10_sq = core::f64::consts::LN_10 * core::f64::consts::LN_10;
    if k.is_infinite() {
        let w4 = w2 * w2;
        return Ok(SirStats {
            mean_max_sir: psi / (72.0 * w4 * c4 * ZETA4),
            var_max_sir_db2: 0.0,
            rician_var_max_db2: 0.0,
            rician_var_min_db2: 0.0,
        });
    }
    let mean = psi * k / (72.0 * w2 * w2 * c4 * ZETA4 * k + psi * ZETA2 * w2);
    let lg = libm::log10(1.0 + psi * ZETA2 / (29.0 * w2 * c4 * ZETA4 * k));
    Ok(SirStats {
        mean_max_sir: mean,
        var_max_sir_db2: 8.0 * lg * lg,
        rician_var_max_db2: 400.0 / (ln10_sq * k),
        rician_var_min_db2: 200.0 / (ln10_sq * k),
    })
}

/// Variance-to-expectation ratio of the Algorithm 1 maximum SIR (dB² / dB).
pub fn variance_to_expectation(psi: f64, omega_d: NormalizedDoppler, cos_theta_a: f64, k: f64) -> Result<f64> {
    let s = lemma4_stats(psi, omega_d, cos_theta_a, k)?;
    let mean_db = to_db(s.mean_max_sir);
    Ok(if mean_db > 0.0 {
        s.var_max_sir_db2 / mean_db
    } else {
        f64::INFINITY
    })
}

/// The K factor (linear) at which the variance-to-expectation ratio of the
/// Algorithm 1 maximum SIR equals `chi`.
pub fn proper_k(psi: f64, omega_d: NormalizedDoppler, cos_theta_a: f64, chi: f64) -> Result<f64> {
    if !(chi > 0.0 && chi < 1.0) {
        return Err(Error::InvalidValue("chi must lie in (0, 1)"));
    }
    if omega_d.value() <= 0.0 {
        return Err(Error::Unbounded);
    }
    let f = |log_k: f64| -> Result<f64> {
        Ok(variance_to_expectation(psi, omega_d, cos_theta_a, libm::exp(log_k))? - chi)
    };
    let (mut lo, mut hi) = (0.0, libm::log(1e12));
    if f(lo)? < 0.0 || f(hi)? > 0.0 {
        return Err(Error::Unbounded);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(libm::exp(0.5 * (lo + hi)))
}

/// Receive SNR and SINR at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality {
    /// Signal-to-noise power ratio `γ²` with unit noise.
    pub gain_sq: f64,
    /// Signal-to-interference ratio after equalization (may be infinite).
    pub sinr: f64,
}

/// `log₂(1 + γ² / (γ²/SINR + 1))`, bit/s/Hz.
pub fn capacity(q: LinkQuality) -> f64 {
    let interference = if q.sinr.is_infinite() { 0.0 } else { q.gain_sq / q.sinr };
    libm::log2(1.0 + q.gain_sq / (interference + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsqResult {
    pub integral_value: f64,
    pub two_point_value: f64,
}

/// Service accumulated over `span_m` metres at speed `v` (metres per unit
/// time). `profile(x)` gives the link at distance `x` from point A; the two
/// point estimate uses the links at A and B.
pub fn asq(
    profile: impl Fn(f64) -> LinkQuality,
    at_a: LinkQuality,
    at_b: LinkQuality,
    v: f64,
    span_m: f64,
    tolerance: f64,
) -> Result<AsqResult> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidValue("speed"));
    }
    if !(span_m >= 0.0) || !span_m.is_finite() {
        return Err(Error::InvalidValue("span"));
    }
    if span_m == 0.0 {
        return Ok(AsqResult {
            integral_value: 0.0,
            two_point_value: 0.0,
        });
    }
    let integrand = |x: f64| capacity(profile(x));
    let integral = adaptive_simpson(&integrand, 0.0, span_m, tolerance.max(1e-12), 40);
    Ok(AsqResult {
        integral_value: integral / v,
        two_point_value: asq_two_point(at_a, at_b, v, span_m),
    })
}

/// `span/(2v) · (C(A) + C(B))`.
pub fn asq_two_point(at_a: LinkQuality, at_b: LinkQuality, v: f64, span_m: f64) -> f64 {
    span_m / (2.0 * v) * (capacity(at_a) + capacity(at_b))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_los_channel, build_los_channel_with, build_rician_channel};
    use crate::geometry::{dominant_set, psi_ratio, DeploymentConfig, TrainState};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(v: f64) -> NormalizedDoppler {
        NormalizedDoppler::new(v).unwrap()
    }

    fn cfg() -> DeploymentConfig {
        DeploymentConfig::reference_corridor()
    }

    fn map_at(x: f64) -> LargeScaleMap {
        dominant_set(&cfg(), &TrainState::new(x, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn zeta_constants() {
        let z2: f64 = (1..200_000u64).map(|m| 1.0 / (m * m) as f64).sum::<f64>() + 1.0 / 200_000.0;
        let z4: f64 = (1..2000u64).map(|m| 1.0 / ((m * m) as f64 * (m * m) as f64)).sum();
        assert_relative_eq!(ZETA2, z2, max_relative = 1e-9);
        assert_relative_eq!(ZETA4, z4, max_relative = 1e-9);
        assert_eq!(ZETA2, core::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn lambda_single_stationary_path() {
        let c = cfg();
        let mut c1 = c.clone();
        c1.n_t = 1;
        let map = dominant_set(&c1, &TrainState::new(c.point_a(), 0.0).unwrap()).unwrap();
        let rho = map.paths()[0].rho;
        assert_relative_eq!(lambda_los(&map, w(0.08), 0), rho * rho, max_relative = 1e-14);
        assert_eq!(lambda_los(&map, w(0.08), 3), 0.0);
    }

    #[test]
    fn lambda_decays_quadratically() {
        let map = map_at(cfg().point_b());
        let a = lambda_los(&map, w(0.08), 100).abs();
        let b = lambda_los(&map, w(0.08), 200).abs();
        assert_relative_eq!(a / b, 4.0, max_relative = 0.02);
    }

    fn dense_gram_entry(ch: &ChannelMatrix, k: usize, m: i64) -> C64 {
        let col = ch.combined().column((k as i64 + m) as usize);
        ch.combined().apply_transpose(&col)[k]
    }

    #[test]
    fn lambda_los_matches_factor_products() {
        // Large-N limit: close at N = 1024 for every listed offset, and at
        // N = 32 for the nearest offsets.
        for (n, m_max, tol) in [(1024usize, 8i64, 0.03), (32, 3, 0.035)] {
            for x in [cfg().point_a(), cfg().point_b()] {
                let map = map_at(x);
                let ch = build_los_channel(&map, w(0.08), n, 1, 1).unwrap();
                for m in 0..=m_max {
                    let want = lambda_los(&map, w(0.08), m as u64);
                    let got = dense_gram_entry(&ch, n / 2, m);
                    assert_relative_eq!(got.re, want, max_relative = tol);
                }
            }
        }
    }

    #[test]
    fn lambda_rician_limits_and_factor_products() {
        let map = map_at(cfg().point_b());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fading = SmallScaleFading::draw(8, &mut rng);
        let zero = SmallScaleFading::zeros(8);
        for m in [0i64, 1, 2, 5] {
            let l = lambda_los(&map, w(0.08), m as u64);
            let r0 = lambda_rician(&map, &zero, 9.0, w(0.08), m).unwrap();
            assert_relative_eq!(r0.combined.re, 0.9 * l, max_relative = 1e-12);
            let inf = lambda_rician(&map, &fading, f64::INFINITY, w(0.08), m).unwrap();
            assert_relative_eq!(inf.combined.re, l, max_relative = 1e-12);
        }
        let n = 1024;
        let k = 100.0;
        let los = build_los_channel(&map, w(0.08), n, 1, 1).unwrap();
        let ch = build_rician_channel(&los, k, &fading, w(0.08)).unwrap();
        for m in -8i64..=8 {
            let want = lambda_rician(&map, &fading, k, w(0.08), m).unwrap().combined;
            let got = dense_gram_entry(&ch, n / 2, m);
            assert!((got - want).norm() <= 0.05 * want.norm(), "m={m} got={got} want={want}");
        }
    }

    #[test]
    fn stationary_channel_has_infinite_sir() {
        let ch = build_los_channel(&map_at(1600.0), w(0.0), 64, 2, 2).unwrap();
        assert_eq!(sir_exact(&ch, 10, Adjoint::Transpose).unwrap(), f64::INFINITY);
        assert_eq!(sir_unequalized(&ch, 10).unwrap(), f64::INFINITY);
        assert!(sir_exact(&ch, 64, Adjoint::Transpose).is_err());
    }

    #[test]
    fn model_matches_channel_sir() {
        let n = 256;
        let k_sub = n / 2;
        let omega = w(0.08);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let fading = SmallScaleFading::draw(8, &mut rng);
        for kernel in [LosKernel::Real, LosKernel::Exact] {
            for adjoint in [Adjoint::Transpose, Adjoint::Hermitian] {
                for x in [1500.0, 1633.0, 1750.0] {
                    let map = map_at(x);
                    let model = SirModel::new(&map, omega, n, kernel, adjoint, k_sub).unwrap();
                    let los = build_los_channel_with(kernel, &map, omega, n, 2, 2).unwrap();
                    assert_relative_eq!(model.sir_los(), sir_exact(&los, k_sub, adjoint).unwrap(), max_relative = 1e-9);
                    let ric = build_rician_channel(&los, 10.0, &fading, omega).unwrap();
                    assert_relative_eq!(model.sir_alg2(10.0, &fading).unwrap(), sir_exact(&ric, k_sub, adjoint).unwrap(), max_relative = 1e-9);
                    assert_relative_eq!(
                        model.sir_alg1(10.0, &fading).unwrap(),
                        sir_equalized(&los, &ric, k_sub, adjoint).unwrap(),
                        max_relative = 1e-9
                    );
                    assert_relative_eq!(
                        model.sir_unequalized([C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
                        sir_unequalized(&los, k_sub).unwrap(),
                        max_relative = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_sir_tracks_exact_sir() {
        let omega = w(0.08);
        for x in [1500.0, 1600.0, 1750.0] {
            let map = map_at(x);
            let ch = build_los_channel(&map, omega, 1024, 1, 1).unwrap();
            let exact = to_db(sir_exact(&ch, 512, Adjoint::Transpose).unwrap());
            let closed = to_db(sir_closed_form(&map, omega, 512));
            assert!((exact - closed).abs() < 0.2, "x={x}: {exact} vs {closed}");
        }
    }

    #[test]
    fn awgn_bounds() {
        let c = cfg();
        let psi = psi_ratio(&map_at(c.point_a())).unwrap();
        let b = sir_bounds_awgn(psi, w(0.08), c.cos_theta_a(), c.cos_theta_b()).unwrap();
        // Direct evaluation of both expressions.
        let w4 = 0.08f64.powi(4);
        assert_relative_eq!(b.max_sir, psi / (72.0 * w4 * 0.9805806756909202f64.powi(4) * ZETA4), max_relative = 1e-12);
        assert_relative_eq!(b.max_db(), 52.18, epsilon = 0.01);
        assert_relative_eq!(b.min_db(), 35.79, epsilon = 0.01);
        let h = sir_bounds_awgn(psi, w(0.04), c.cos_theta_a(), c.cos_theta_b()).unwrap();
        assert_relative_eq!(h.max_sir / b.max_sir, 16.0, max_relative = 1e-12);
        assert_relative_eq!(h.min_sir / b.min_sir, 16.0, max_relative = 1e-12);
        assert!(sir_bounds_awgn(psi, w(0.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn rician_bounds_without_scattering_match_awgn() {
        let c = cfg();
        let (ma, mb) = (map_at(c.point_a()), map_at(c.point_b()));
        let awgn = sir_bounds_awgn(psi_ratio(&ma).unwrap(), w(0.08), c.cos_theta_a(), c.cos_theta_b()).unwrap();
        let r = sir_bounds_rician(&ma, &mb, &SmallScaleFading::zeros(8), 100.0, w(0.08)).unwrap();
        assert_relative_eq!(r.max_sir, awgn.max_sir, max_relative = 1e-12);
        assert_relative_eq!(r.min_sir, awgn.min_sir, max_relative = 1e-12);
        assert!(sir_bounds_rician(&ma, &mb, &SmallScaleFading::zeros(8), f64::INFINITY, w(0.08)).is_err());
    }

    #[test]
    fn k_statistics_at_30_db() {
        let c = cfg();
        let psi = psi_ratio(&map_at(c.point_a())).unwrap();
        let s = lemma4_stats(psi, w(0.08), c.cos_theta_a(), 1000.0).unwrap();
        assert!((to_db(s.mean_max_sir) - 47.42).abs() < 1.0, "{}", to_db(s.mean_max_sir));
        assert!((s.var_max_sir_db2 - 3.98).abs() < 0.25 * 3.98, "{}", s.var_max_sir_db2);
        let ten = lemma4_stats(psi, w(0.08), c.cos_theta_a(), 10.0).unwrap();
        assert_relative_eq!(ten.rician_var_max_db2, 7.5445, epsilon = 1e-3);
        assert_relative_eq!(ten.rician_var_min_db2, 3.7722, epsilon = 1e-3);
        let inf = lemma4_stats(psi, w(0.08), c.cos_theta_a(), f64::INFINITY).unwrap();
        assert_eq!(inf.rician_var_max_db2, 0.0);
        assert_eq!(inf.var_max_sir_db2, 0.0);
    }

    #[test]
    fn k_statistics_monotone_in_k() {
        let c = cfg();
        let psi = psi_ratio(&map_at(c.point_a())).unwrap();
        let mut prev: Option<SirStats> = None;
        for e in 0..=60 {
            let k = libm::pow(10.0, e as f64 / 10.0);
            let s = lemma4_stats(psi, w(0.08), c.cos_theta_a(), k).unwrap();
            if let Some(p) = prev {
                assert!(s.mean_max_sir >= p.mean_max_sir);
                assert!(s.var_max_sir_db2 <= p.var_max_sir_db2);
            }
            prev = Some(s);
        }
    }

    #[test]
    fn proper_k_near_30_db() {
        let c = cfg();
        let psi = psi_ratio(&map_at(c.point_a())).unwrap();
        let kp = proper_k(psi, w(0.08), c.cos_theta_a(), 0.1).unwrap();
        assert!((to_db(kp) - 30.0).abs() < 1.0, "{}", to_db(kp));
        let ver = variance_to_expectation(psi, w(0.08), c.cos_theta_a(), kp).unwrap();
        assert_relative_eq!(ver, 0.1, max_relative = 1e-9);
        let looser = proper_k(psi, w(0.08), c.cos_theta_a(), 0.9).unwrap();
        assert!(looser < kp);
        assert!(proper_k(psi, w(0.08), c.cos_theta_a(), 1.5).is_err());
    }

    #[test]
    fn proper_k_at_low_doppler_matches_grid_scan() {
        let c = cfg();
        let psi = psi_ratio(&map_at(c.point_a())).unwrap();
        let omega = w(0.01);
        let kp = proper_k(psi, omega, c.cos_theta_a(), 0.1).unwrap();
        // First grid point (0.001 dB steps) where the ratio drops below χ.
        let grid = (0..120_000)
            .map(|i| from_db(i as f64 * 0.001))
            .find(|&k| variance_to_expectation(psi, omega, c.cos_theta_a(), k).unwrap() <= 0.1)
            .unwrap();
        assert!((to_db(kp) - to_db(grid)).abs() < 0.002);
    }

    #[test]
    fn capacity_limits() {
        let q = LinkQuality { gain_sq: 15.0, sinr: f64::INFINITY };
        assert_eq!(capacity(q), 4.0);
        let q = LinkQuality { gain_sq: 1e12, sinr: 3.0 };
        assert_relative_eq!(capacity(q), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn asq_of_constant_profile_is_two_point() {
        let q = LinkQuality { gain_sq: 1e4, sinr: 1e3 };
        let r = asq(|_| q, q, q, 2.0, 500.0, 1e-9).unwrap();
        assert_relative_eq!(r.integral_value, r.two_point_value, max_relative = 1e-12);
        assert_relative_eq!(r.integral_value, 250.0 * capacity(q), max_relative = 1e-12);
        let zero = asq(|_| q, q, q, 2.0, 0.0, 1e-9).unwrap();
        assert_eq!(zero.integral_value, 0.0);
        assert!(asq(|_| q, q, q, 0.0, 10.0, 1e-9).is_err());
    }

    #[test]
    fn simpson_is_accurate_on_smooth_integrands() {
        let v = adaptive_simpson(&|x: f64| libm::sin(x), 0.0, PI, 1e-12, 40);
        assert_relative_eq!(v, 2.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn bounds_are_ordered(omega in 0.01f64..0.3) {
            let c = cfg();
            let psi = psi_ratio(&map_at(c.point_a())).unwrap();
            let b = sir_bounds_awgn(psi, w(omega), c.cos_theta_a(), c.cos_theta_b()).unwrap();
            prop_assert!(b.max_sir >= b.min_sir);
        }

        #[test]
        fn lambda_rician_is_finite(m in -50i64..50, k_db in 0.0f64..40.0, seed in any::<u64>()) {
            let map = map_at(1620.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fading = SmallScaleFading::draw(8, &mut rng);
            let l = lambda_rician(&map, &fading, from_db(k_db), w(0.08), m).unwrap();
            prop_assert!(l.combined.re.is_finite() && l.combined.im.is_finite());
        }
    }
}
