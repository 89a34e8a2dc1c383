//! Oracle checks behind the `verify` subcommand: the scatterer-sum Doppler
//! spread law, structural properties of the factored channel, ASQ
//! linearization, Monte Carlo SIR and seed determinism.

use hsr_ici::analysis::{sir_exact, to_db};
use hsr_ici::channel::{build_los_channel_with, build_rician_channel, ChannelMatrix, Frame, SmallScaleFading};
use hsr_ici::equalize::{channel_gain, equalize_los, equalize_rician, gamma_beta, gamma_zeta, Adjoint};
use hsr_ici::ici::{build_los_ici_matrix_with, LosKernel, NormalizedDoppler};
use hsr_ici::oracle::{dense_channel, doppler_spread_batch, empirical_sir, ScattererEnsemble};
use hsr_ici::C64;
use rayon::prelude::*;

use crate::experiments::{mobile_service, run_table3_with, stream_id, stream_rng, Context, Result};
use crate::output::{ExperimentResult, Value};

pub const SPREAD_SAMPLES: usize = 10_000;
pub const SPREAD_SCATTERERS: usize = 10_000;
pub const SPREAD_K: [f64; 2] = [1.0, 10.0];
pub const SPREAD_OMEGAS: [f64; 2] = [0.05, 0.08];
pub const SPREAD_OFFSETS: [i64; 3] = [1, 2, 4];

const SPREAD_STREAM: u64 = 4;
const VERIFY_STREAM: u64 = 5;

/// One measured-versus-expected comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub parameters: String,
    pub measured: f64,
    pub expected: f64,
    /// Allowed deviation; `relative` selects `|m/e − 1|` over `|m − e|`.
    pub tolerance: f64,
    pub relative: bool,
}

impl Check {
    pub fn deviation(&self) -> f64 {
        if self.relative {
            (self.measured / self.expected - 1.0).abs()
        } else {
            (self.measured - self.expected).abs()
        }
    }

    pub fn passed(&self) -> bool {
        self.deviation() <= self.tolerance
    }
}

fn check(name: &str, parameters: String, measured: f64, expected: f64, tolerance: f64, relative: bool) -> Check {
    Check {
        name: name.to_owned(),
        parameters,
        measured,
        expected,
        tolerance,
        relative,
    }
}

/// Empirical `E|D[m]|²` from independent scatterer ensembles, against
/// `ω_D² / (2 (K+1) m²)`, 10 % relative tolerance.
pub fn doppler_spread_checks(ctx: &Context, samples: usize, scatterers: usize) -> Result<Vec<Check>> {
    let n = ctx.deployment().n;
    let omegas: Vec<NormalizedDoppler> = SPREAD_OMEGAS
        .iter()
        .map(|&w| NormalizedDoppler::new(w))
        .collect::<hsr_ici::Result<_>>()?;
    let mut out = Vec::new();
    for (g, &k) in SPREAD_K.iter().enumerate() {
        let powers: Vec<Vec<f64>> = (0..samples)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let mut rng = stream_rng(ctx.seed, stream_id(SPREAD_STREAM, g as u64, i as u64));
                let ens = ScattererEnsemble::draw(scatterers, k, &mut rng)?;
                Ok(doppler_spread_batch(&ens, &omegas, &SPREAD_OFFSETS, n)
                    .iter()
                    .map(|d| d.norm_sqr())
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut sums = vec![0.0; omegas.len() * SPREAD_OFFSETS.len()];
        for p in &powers {
            for (s, v) in sums.iter_mut().zip(p) {
                *s += v;
            }
        }
        for (wi, w) in SPREAD_OMEGAS.iter().enumerate() {
            for (mi, &m) in SPREAD_OFFSETS.iter().enumerate() {
                let measured = sums[wi * SPREAD_OFFSETS.len() + mi] / samples as f64;
                let expected = w * w / (2.0 * (k + 1.0) * (m * m) as f64);
                out.push(check(
                    "doppler_spread_variance",
                    format!("k={k} omega_d={w} m={m} n={n} samples={samples} scatterers={scatterers}"),
                    measured,
                    expected,
                    0.10,
                    true,
                ));
            }
        }
    }
    Ok(out)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn sub_context(ctx: &Context, n: usize, t: usize) -> Context {
    let mut c = ctx.clone();
    c.config.deployment.n = n;
    c.config.deployment.t_x = t;
    c.config.deployment.t_y = t;
    c
}

fn rician_at(ctx: &Context, offset: f64, w: NormalizedDoppler, k: f64, stream: u64) -> Result<(ChannelMatrix, ChannelMatrix)> {
    let cfg = ctx.deployment();
    let map = ctx.map_at(offset)?;
    let los = build_los_channel_with(ctx.kernel(), &map, w, cfg.n, cfg.t_x, cfg.t_y)?;
    let fading = SmallScaleFading::draw(cfg.rru_count, &mut stream_rng(ctx.seed, stream));
    let ch = build_rician_channel(&los, k, &fading, w)?;
    Ok((los, ch))
}

/// Unitarity, ε = 0 identity, dense-vs-factored, K → ∞ degeneracy,
/// two-point ASQ and Monte Carlo SIR.
pub fn property_checks(ctx: &Context) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let n = ctx.deployment().n;

    let mut worst = 0.0f64;
    for kernel in [LosKernel::Real, LosKernel::Exact] {
        for eps in [-0.2, -0.0784, 0.013, 0.05, 0.1, 0.2] {
            worst = worst.max(build_los_ici_matrix_with(kernel, eps, 1024).unitarity_error());
        }
    }
    out.push(check("unitarity", "n=1024 eps=±0.0784..0.2 both kernels".into(), worst, 0.0, 1e-9, false));

    let mut identity_error = 0.0f64;
    for kernel in [LosKernel::Real, LosKernel::Exact] {
        let ici = build_los_ici_matrix_with(kernel, 0.0, n);
        for (i, d) in ici.toeplitz().diagonals().iter().enumerate() {
            let target = if i == n - 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            identity_error = identity_error.max((d - target).norm());
        }
    }
    out.push(check("zero_cfo_identity", format!("n={n}"), identity_error, 0.0, 0.0, false));

    let w = NormalizedDoppler::new(0.12)?;
    let mut dense_error = 0.0f64;
    for (i, (dn, t)) in [(16, 1), (32, 2), (64, 4), (64, 1)].into_iter().enumerate() {
        let sub = sub_context(ctx, dn, t);
        for (j, (offset, k)) in [(0.0, f64::INFINITY), (130.0, 10.0), (250.0, 1.0)].into_iter().enumerate() {
            let (_, ch) = rician_at(&sub, offset, w, k, stream_id(VERIFY_STREAM, i as u64, j as u64))?;
            let dense = dense_channel(&ch)?;
            let x = Frame::random_qpsk(dn, t, &mut stream_rng(ctx.seed, stream_id(VERIFY_STREAM, 100 + i as u64, j as u64)));
            let scale = ch.weight_sum().norm().max(1.0);
            let diffs = [
                max_diff(ch.apply(&x)?.data(), &dense.mul_vec(x.data())),
                max_diff(ch.apply_transpose(&x)?.data(), &dense.transpose().mul_vec(x.data())),
                max_diff(ch.apply_hermitian(&x)?.data(), &dense.conj_transpose().mul_vec(x.data())),
            ];
            dense_error = dense_error.max(diffs.iter().fold(0.0f64, |a, d| a.max(d / scale)));
        }
    }
    out.push(check("dense_vs_factored", "n<=64 t<=4 k=inf,10,1".into(), dense_error, 0.0, 1e-10, false));

    let sub = sub_context(ctx, 256, 2);
    let (los, ch) = rician_at(&sub, 60.0, NormalizedDoppler::new(0.08)?, f64::INFINITY, stream_id(VERIFY_STREAM, 200, 0))?;
    let y = Frame::random_phase(256, 2, &mut stream_rng(ctx.seed, stream_id(VERIFY_STREAM, 201, 0)));
    let mut degeneracy = 0.0f64;
    for adjoint in [Adjoint::Transpose, Adjoint::Hermitian] {
        degeneracy = degeneracy.max(max_diff(equalize_los(&los, &y, adjoint)?.data(), equalize_rician(&ch, &y, adjoint)?.data()));
    }
    let map = sub.map_at(60.0)?;
    let beta = gamma_beta(&map, 256, 2, 2)?.gamma;
    let zeta = gamma_zeta(&map, &SmallScaleFading::zeros(sub.deployment().rru_count), f64::INFINITY, 256, 2, 2)?.gamma;
    degeneracy = degeneracy.max((beta - zeta).abs() / beta).max((channel_gain(&ch).gamma - beta).abs() / beta);
    out.push(check("k_infinity_degeneracy", "n=256 t=2 omega_d=0.08".into(), degeneracy, 0.0, 1e-12, false));

    for omega_d in [0.05, 0.08] {
        let ms = mobile_service(ctx, omega_d)?;
        out.push(check(
            "asq_two_point",
            format!("omega_d={omega_d} n={n}"),
            ms.two_point_exact,
            ms.reduced,
            0.05,
            true,
        ));
    }

    let toy = sub_context(ctx, 32, 1);
    let w = NormalizedDoppler::new(0.08)?;
    let (_, ch) = rician_at(&toy, 250.0, w, f64::INFINITY, stream_id(VERIFY_STREAM, 300, 0))?;
    let mut rng = stream_rng(ctx.seed, stream_id(VERIFY_STREAM, 301, 0));
    let emp = empirical_sir(&ch, 16, 10_000, ctx.adjoint(), &mut rng)?;
    let exact = sir_exact(&ch, 16, ctx.adjoint())?;
    out.push(check("empirical_vs_exact_sir_db", "n=32 omega_d=0.08 midpoint trials=10000".into(), to_db(emp), to_db(exact), 0.2, false));

    Ok(out)
}

/// Byte equality of a reduced K-statistics table and spread run under 1 and 2 threads.
pub fn determinism_check(ctx: &Context) -> Result<Check> {
    let small = sub_context(ctx, 64, 1);
    let run = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            let mut csv = run_table3_with(&small, 50)?.to_csv();
            for c in doppler_spread_checks(&small, 64, 500)? {
                csv.push_str(&format!("{:?}\n", c.measured.to_bits()));
            }
            Ok(csv)
        })
    };
    let (a, b, c) = (run(1)?, run(2)?, run(1)?);
    let mismatches = (a != b) as u8 as f64 + (a != c) as u8 as f64;
    Ok(check("seed_determinism", "table3 x50 + spread x64, 1 vs 2 threads, repeated".into(), mismatches, 0.0, 0.0, false))
}

pub fn all_checks(ctx: &Context) -> Result<Vec<Check>> {
    let mut checks = doppler_spread_checks(ctx, SPREAD_SAMPLES, SPREAD_SCATTERERS)?;
    checks.extend(property_checks(ctx)?);
    checks.push(determinism_check(ctx)?);
    Ok(checks)
}

pub fn to_result(seed: u64, checks: &[Check]) -> ExperimentResult {
    let mut out = ExperimentResult::new(
        "verify",
        seed,
        &["check", "parameters", "measured", "expected", "deviation", "tolerance", "tolerance_kind", "pass"],
    );
    for c in checks {
        out.push(vec![
            c.name.clone().into(),
            c.parameters.clone().into(),
            c.measured.into(),
            c.expected.into(),
            c.deviation().into(),
            c.tolerance.into(),
            Value::from(if c.relative { "relative" } else { "absolute" }),
            c.passed().into(),
        ]);
    }
    out
}

/// Runs every check; the flag is true when all of them pass.
pub fn run_verify(ctx: &Context) -> Result<(ExperimentResult, bool)> {
    let checks = all_checks(ctx)?;
    let ok = checks.iter().all(Check::passed);
    Ok((to_result(ctx.seed, &checks), ok))
}
