//! Composite channel `S = Σ_t w_t (I_t ⊗ G)`.
//!
//! Every RRU is collapsed to one point and the MIMO response is the all-ones
//! `T_y × T_x` matrix `G` (small-scale fading `R_t = r_t G` only rescales it),
//! so the whole channel factors as `B ⊗ G` with `B = Σ_t w_t I_t`. Frames are
//! subcarrier-major: sample `n · T + a` is antenna `a` on subcarrier `n`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::LargeScaleMap;
use crate::ici::{build_los_ici_matrix_with, build_nlos_ici_matrix, IciMatrix, LosKernel, NormalizedDoppler};
use crate::structured::Toeplitz;
use crate::{Error, Result, C64};

/// The rank-one `T_y × T_x` all-ones matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllOnesMimo {
    pub t_y: usize,
    pub t_x: usize,
}

impl AllOnesMimo {
    pub fn new(t_y: usize, t_x: usize) -> Result<Self> {
        if t_y == 0 || t_x == 0 {
            return Err(Error::InvalidConfig("antenna counts must be at least 1"));
        }
        Ok(AllOnesMimo { t_y, t_x })
    }

    /// Frobenius norm of `GᵀG = T_y · G′`.
    pub fn gram_norm(&self) -> f64 {
        (self.t_y * self.t_x) as f64
    }
}

/// One complex coefficient `r_t ~ CN(0, 1)` per RRU index.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallScaleFading {
    r: Vec<C64>,
}

impl SmallScaleFading {
    pub fn draw<R: Rng + ?Sized>(rru_count: usize, rng: &mut R) -> Self {
        SmallScaleFading {
            r: (0..rru_count).map(|_| complex_gaussian(rng, 1.0)).collect(),
        }
    }

    pub fn from_values(r: Vec<C64>) -> Self {
        SmallScaleFading { r }
    }

    pub fn zeros(rru_count: usize) -> Self {
        SmallScaleFading {
            r: vec![C64::new(0.0, 0.0); rru_count],
        }
    }

    pub fn get(&self, rru_index: usize) -> Result<C64> {
        self.r.get(rru_index).copied().ok_or(Error::IndexOutOfRange {
            index: rru_index,
            len: self.r.len(),
        })
    }

    pub fn values(&self) -> &[C64] {
        &self.r
    }
}

/// Circular complex Gaussian sample with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = libm::sqrt(variance / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermPart {
    Los,
    Nlos,
}

#[derive(Debug, Clone)]
pub struct ChannelTerm {
    pub weight: C64,
    pub ici: Arc<IciMatrix>,
    pub rru_index: usize,
    pub part: TermPart,
}

#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    mimo: AllOnesMimo,
    terms: Vec<ChannelTerm>,
    rician_k: Option<f64>,
    combined: Toeplitz,
}

impl ChannelMatrix {
    pub fn from_terms(mimo: AllOnesMimo, terms: Vec<ChannelTerm>, rician_k: Option<f64>) -> Result<Self> {
        let n = terms.first().map(|t| t.ici.size()).ok_or(Error::InvalidConfig("channel needs at least one term"))?;
        if let Some(t) = terms.iter().find(|t| t.ici.size() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: t.ici.size(),
            });
        }
        let combined = Toeplitz::weighted_sum(terms.iter().map(|t| (t.weight, t.ici.toeplitz())))
            .expect("terms are nonempty");
        Ok(ChannelMatrix {
            mimo,
            terms,
            rician_k,
            combined,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.combined.size()
    }

    pub fn mimo(&self) -> AllOnesMimo {
        self.mimo
    }

    pub fn terms(&self) -> &[ChannelTerm] {
        &self.terms
    }

    /// Linear K factor; `None` for a pure LOS channel.
    pub fn rician_k(&self) -> Option<f64> {
        self.rician_k
    }

    /// `B = Σ w_t I_t`, the subcarrier factor of `S = B ⊗ G`.
    pub fn combined(&self) -> &Toeplitz {
        &self.combined
    }

    /// `Σ_t w_t`, the gain of the channel at zero Doppler.
    pub fn weight_sum(&self) -> C64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    pub fn input_len(&self) -> usize {
        self.subcarriers() * self.mimo.t_x
    }

    pub fn output_len(&self) -> usize {
        self.subcarriers() * self.mimo.t_y
    }

    /// `S · x` without noise.
    pub fn apply(&self, x: &Frame) -> Result<Frame> {
        check_frame(x, self.subcarriers(), self.mimo.t_x)?;
        let z = self.combined.apply(&x.antenna_sums());
        Ok(Frame::replicate(&z, self.mimo.t_y))
    }

    /// `Sᵀ · y`.
    pub fn apply_transpose(&self, y: &Frame) -> Result<Frame> {
        check_frame(y, self.subcarriers(), self.mimo.t_y)?;
        let z = self.combined.apply_transpose(&y.antenna_sums());
        Ok(Frame::replicate(&z, self.mimo.t_x))
    }

    /// `Sᴴ · y`.
    pub fn apply_hermitian(&self, y: &Frame) -> Result<Frame> {
        check_frame(y, self.subcarriers(), self.mimo.t_y)?;
        let z = self.combined.apply_hermitian(&y.antenna_sums());
        Ok(Frame::replicate(&z, self.mimo.t_x))
    }
}

fn check_frame(f: &Frame, n: usize, antennas: usize) -> Result<()> {
    if f.antennas != antennas || f.data.len() != n * antennas {
        return Err(Error::DimensionMismatch {
            expected: n * antennas,
            actual: f.data.len(),
        });
    }
    Ok(())
}

/// `Σ_t ρ_t I(ω_D cos θ_t) ⊗ G` over the dominant RRUs.
pub fn build_los_channel(
    map: &LargeScaleMap,
    omega_d: NormalizedDoppler,
    n: usize,
    t_x: usize,
    t_y: usize,
) -> Result<ChannelMatrix> {
    build_los_channel_with(LosKernel::default(), map, omega_d, n, t_x, t_y)
}

pub fn build_los_channel_with(
    kernel: LosKernel,
    map: &LargeScaleMap,
    omega_d: NormalizedDoppler,
    n: usize,
    t_x: usize,
    t_y: usize,
) -> Result<ChannelMatrix> {
    if n < 2 {
        return Err(Error::InvalidConfig("need at least two subcarriers"));
    }
    let mimo = AllOnesMimo::new(t_y, t_x)?;
    let terms = map
        .paths()
        .iter()
        .map(|p| ChannelTerm {
            weight: C64::new(p.rho, 0.0),
            ici: Arc::new(build_los_ici_matrix_with(kernel, omega_d.value() * p.cos_aoa, n)),
            rru_index: p.rru_index,
            part: TermPart::Los,
        })
        .collect();
    ChannelMatrix::from_terms(mimo, terms, None)
}

/// `√(K/(K+1)) S^L + √(1/(K+1)) Σ_t ρ_t I_D ⊗ R_t`.
///
/// `k` is linear; `f64::INFINITY` returns the LOS channel unchanged.
pub fn build_rician_channel(
    los: &ChannelMatrix,
    k: f64,
    fading: &SmallScaleFading,
    omega_d: NormalizedDoppler,
) -> Result<ChannelMatrix> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::InvalidValue("rician K"));
    }
    if los.rician_k.is_some() || los.terms.iter().any(|t| t.part != TermPart::Los) {
        return Err(Error::InvalidConfig("Rician channel must be built from a LOS channel"));
    }
    if k.is_infinite() {
        return Ok(los.clone());
    }
    let a = libm::sqrt(k / (k + 1.0));
    let b = libm::sqrt(1.0 / (k + 1.0));
    let nlos = Arc::new(build_nlos_ici_matrix(omega_d, los.subcarriers()));
    let mut terms: Vec<ChannelTerm> = los
        .terms
        .iter()
        .map(|t| ChannelTerm {
            weight: t.weight * a,
            ..t.clone()
        })
        .collect();
    for t in &los.terms {
        terms.push(ChannelTerm {
            weight: t.weight * b * fading.get(t.rru_index)?,
            ici: Arc::clone(&nlos),
            rru_index: t.rru_index,
            part: TermPart::Nlos,
        });
    }
    ChannelMatrix::from_terms(los.mimo, terms, Some(k))
}

/// Frequency-domain frame, subcarrier-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    data: Vec<C64>,
    antennas: usize,
}

impl Frame {
    pub fn new(data: Vec<C64>, antennas: usize) -> Result<Self> {
        if antennas == 0 || data.is_empty() || data.len() % antennas != 0 {
            return Err(Error::DimensionMismatch {
                expected: antennas,
                actual: data.len(),
            });
        }
        Ok(Frame { data, antennas })
    }

    pub fn zeros(subcarriers: usize, antennas: usize) -> Self {
        Frame {
            data: vec![C64::new(0.0, 0.0); subcarriers * antennas],
            antennas,
        }
    }

    /// Unit symbol on one antenna of one subcarrier.
    pub fn impulse(subcarriers: usize, antennas: usize, k: usize, antenna: usize) -> Self {
        let mut f = Self::zeros(subcarriers, antennas);
        f.data[k * antennas + antenna] = C64::new(1.0, 0.0);
        f
    }

    /// Unit-modulus symbols with uniform random phase.
    pub fn random_phase<R: Rng + ?Sized>(subcarriers: usize, antennas: usize, rng: &mut R) -> Self {
        let data = (0..subcarriers * antennas)
            .map(|_| C64::from_polar(1.0, rng.random_range(0.0..core::f64::consts::TAU)))
            .collect();
        Frame { data, antennas }
    }

    /// QPSK symbols with unit power.
    pub fn random_qpsk<R: Rng + ?Sized>(subcarriers: usize, antennas: usize, rng: &mut R) -> Self {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let data = (0..subcarriers * antennas)
            .map(|_| {
                let bits: u8 = rng.random_range(0..4);
                C64::new(if bits & 1 == 0 { s } else { -s }, if bits & 2 == 0 { s } else { -s })
            })
            .collect();
        Frame { data, antennas }
    }

    fn replicate(per_subcarrier: &[C64], antennas: usize) -> Self {
        let data = per_subcarrier
            .iter()
            .flat_map(|v| core::iter::repeat_n(*v, antennas))
            .collect();
        Frame { data, antennas }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn subcarriers(&self) -> usize {
        self.data.len() / self.antennas
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn block(&self, k: usize) -> &[C64] {
        &self.data[k * self.antennas..(k + 1) * self.antennas]
    }

    /// Per-subcarrier sum over antennas, i.e. the action of the all-ones MIMO factor.
    pub fn antenna_sums(&self) -> Vec<C64> {
        self.data.chunks(self.antennas).map(|c| c.iter().sum()).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// `Y = S X + W` with `E|w|² = noise_var` per entry.
pub fn transmit<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    x: &Frame,
    noise_var: f64,
    rng: &mut R,
) -> Result<Frame> {
    if !noise_var.is_finite() || noise_var < 0.0 {
        return Err(Error::InvalidValue("noise variance"));
    }
    let mut y = channel.apply(x)?;
    if noise_var > 0.0 {
        for v in &mut y.data {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    Ok(y)
}
