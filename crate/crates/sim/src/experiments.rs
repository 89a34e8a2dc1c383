//! Position sweeps, the three result tables and ASQ curves.
//!
//! All Monte Carlo draws come from ChaCha8 streams keyed by
//! `(experiment, group, iteration)` under the master seed, and every
//! reduction runs sequentially over index-ordered results, so output does not
//! depend on the rayon thread count.

use std::cell::RefCell;
use std::collections::HashMap;

use hsr_ici::analysis::{
    asq, asq_two_point, lemma4_stats, sir_bounds_awgn, sir_bounds_rician, sir_closed_form, sir_exact, to_db, LinkQuality,
    SirBounds, SirModel,
};
use hsr_ici::channel::{build_los_channel_with, build_rician_channel, SmallScaleFading};
use hsr_ici::geometry::{dominant_set, psi_ratio, DeploymentConfig, LargeScaleMap, TrainState};
use hsr_ici::ici::{LosKernel, NormalizedDoppler};
use hsr_ici::equalize::Adjoint;
use hsr_ici::{C64, SPEED_OF_LIGHT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::output::{ExperimentResult, Value};

pub const TABLE1_OMEGAS: [f64; 5] = [0.05, 0.08, 0.12, 0.15, 0.2];
pub const ASQ_OMEGAS: [f64; 2] = [0.05, 0.08];
/// Doppler used for the regime and K tables (500 km/h).
pub const TABLE_OMEGA: f64 = 0.08;
pub const TABLE2_K_DB: f64 = 30.0;
pub const TABLE3_K_DB: [f64; 4] = [10.0, 20.0, 30.0, 40.0];
pub const REGIMES: [usize; 4] = [1, 2, 4, 8];
pub const ITERATIONS: usize = 1000;
pub const DEFAULT_STEP_M: f64 = 5.0;
/// Closed-form SIR truncation.
pub const M_MAX: u64 = 512;

const ASQ_TOLERANCE: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] hsr_ici::Error),
    #[error("{0}")]
    Invalid(&'static str),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// LOS equalizer built from the large-scale map only.
    Los,
    /// Equalizer matched to the full Rician channel.
    Rician,
}

impl Algorithm {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Algorithm::Los),
            2 => Some(Algorithm::Rician),
            _ => None,
        }
    }

    pub fn number(self) -> i64 {
        match self {
            Algorithm::Los => 1,
            Algorithm::Rician => 2,
        }
    }
}

/// Configuration plus master seed.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: SimConfig,
    pub seed: u64,
}

impl Context {
    pub fn new(config: SimConfig, seed: u64) -> Self {
        Context { config, seed }
    }

    pub fn deployment(&self) -> &DeploymentConfig {
        &self.config.deployment
    }

    pub fn kernel(&self) -> LosKernel {
        self.config.conventions.kernel
    }

    pub fn adjoint(&self) -> Adjoint {
        self.config.conventions.adjoint
    }

    /// Subcarrier whose SIR is reported: the band centre.
    pub fn subcarrier(&self) -> usize {
        self.deployment().n / 2
    }

    /// Dominant set at `offset_m` past point A.
    pub fn map_at(&self, offset_m: f64) -> Result<LargeScaleMap> {
        let cfg = self.deployment();
        Ok(dominant_set(cfg, &TrainState::new(cfg.point_a() + offset_m, 0.0)?)?)
    }

    pub fn model_at(&self, offset_m: f64, omega: NormalizedDoppler) -> Result<SirModel> {
        let map = self.map_at(offset_m)?;
        Ok(SirModel::new(&map, omega, self.deployment().n, self.kernel(), self.adjoint(), self.subcarrier())?)
    }

    /// `ρ₁²/ρ₂²` at point A.
    pub fn psi(&self) -> Result<f64> {
        Ok(psi_ratio(&self.map_at(0.0)?)?)
    }

    /// Closed-form LOS bounds; infinite without Doppler.
    pub fn awgn_bounds(&self, omega: NormalizedDoppler) -> Result<SirBounds> {
        if omega.value() == 0.0 {
            return Ok(SirBounds {
                max_sir: f64::INFINITY,
                min_sir: f64::INFINITY,
            });
        }
        let cfg = self.deployment();
        Ok(sir_bounds_awgn(self.psi()?, omega, cfg.cos_theta_a(), cfg.cos_theta_b())?)
    }

    /// Train speed in metres per OFDM sample.
    pub fn speed_per_sample(&self, omega: NormalizedDoppler) -> f64 {
        omega.value() * SPEED_OF_LIGHT / self.deployment().f_carrier
    }

    fn labels(&self) -> [Value; 3] {
        let cfg = self.deployment();
        [
            format!("{}x{}", cfg.t_y, cfg.t_x).into(),
            kernel_label(self.kernel()).into(),
            adjoint_label(self.adjoint()).into(),
        ]
    }
}

pub fn kernel_label(k: LosKernel) -> &'static str {
    match k {
        LosKernel::Real => "real",
        LosKernel::Exact => "exact",
    }
}

pub fn adjoint_label(a: Adjoint) -> &'static str {
    match a {
        Adjoint::Transpose => "transpose",
        Adjoint::Hermitian => "hermitian",
    }
}

/// Stream id for iteration `index` of `group` within experiment `kind`.
pub fn stream_id(kind: u64, group: u64, index: u64) -> u64 {
    (kind << 56) | (group << 32) | index
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SWEEP_STREAM: u64 = 1;
const TABLE2_STREAM: u64 = 2;
const TABLE3_STREAM: u64 = 3;

pub fn k_from_db(k_db: f64) -> f64 {
    if k_db.is_infinite() {
        f64::INFINITY
    } else {
        10f64.powf(k_db / 10.0)
    }
}

fn omega(w: f64) -> Result<NormalizedDoppler> {
    Ok(NormalizedDoppler::new(w)?)
}

/// Offsets `0, step, 2·step, …` below `span`.
pub fn sweep_offsets(span: f64, step: f64) -> Vec<f64> {
    let count = (span / step - 1e-9).ceil().max(1.0) as usize;
    (0..count).map(|i| i as f64 * step).collect()
}

fn models(ctx: &Context, omega: NormalizedDoppler, offsets: &[f64]) -> Result<Vec<SirModel>> {
    offsets.par_iter().map(|&x| ctx.model_at(x, omega)).collect()
}

fn equalizer_coefficients(alg: Algorithm, s: [C64; 2]) -> [C64; 2] {
    match alg {
        Algorithm::Los => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        Algorithm::Rician => s,
    }
}

/// Exact SIR along one inter-RRU span starting at point A, with and without
/// equalization, plus the closed-form curve and bound lines. A finite `k`
/// draws one small-scale fading realization for the whole sweep.
pub fn run_position_sweep(ctx: &Context, omega_d: f64, k: f64, alg: Algorithm, step_m: f64) -> Result<ExperimentResult> {
    if !(step_m > 0.0) || !step_m.is_finite() {
        return Err(ExperimentError::Invalid("sweep step must be positive"));
    }
    if k.is_nan() || k <= 0.0 {
        return Err(ExperimentError::Invalid("K must be positive or inf"));
    }
    ctx.config.validate().map_err(|_| ExperimentError::Invalid("invalid configuration"))?;
    let w = omega(omega_d)?;
    let cfg = ctx.deployment();
    let fading = if k.is_finite() {
        SmallScaleFading::draw(cfg.rru_count, &mut stream_rng(ctx.seed, stream_id(SWEEP_STREAM, 0, 0)))
    } else {
        SmallScaleFading::zeros(cfg.rru_count)
    };
    let bounds = if w.value() > 0.0 && k.is_finite() && alg == Algorithm::Rician {
        sir_bounds_rician(&ctx.map_at(0.0)?, &ctx.map_at(0.5 * cfg.d_h)?, &fading, k, w)?
    } else {
        ctx.awgn_bounds(w)?
    };
    let offsets = sweep_offsets(cfg.d_h, step_m);
    let points: Vec<[f64; 3]> = offsets
        .par_iter()
        .map(|&x| -> Result<[f64; 3]> {
            let map = ctx.map_at(x)?;
            let model = SirModel::new(&map, w, cfg.n, ctx.kernel(), ctx.adjoint(), ctx.subcarrier())?;
            let s = model.channel_coefficients(k, &fading)?;
            let closed = if w.value() == 0.0 {
                f64::INFINITY
            } else if k.is_infinite() {
                sir_closed_form(&map, w, M_MAX)
            } else {
                f64::NAN
            };
            Ok([model.sir(s, equalizer_coefficients(alg, s)), model.sir_unequalized(s), closed])
        })
        .collect::<Result<_>>()?;

    let mut out = ExperimentResult::new(
        "sweep",
        ctx.seed,
        &[
            "omega_d",
            "k_db",
            "alg",
            "regime",
            "kernel",
            "adjoint",
            "position_m",
            "sir_db",
            "sir_unequalized_db",
            "sir_closed_form_db",
            "bound_max_db",
            "bound_min_db",
        ],
    );
    let [regime, kernel, adjoint] = ctx.labels();
    for (x, p) in offsets.iter().zip(points) {
        out.push(vec![
            omega_d.into(),
            to_db(k).into(),
            alg.number().into(),
            regime.clone(),
            kernel.clone(),
            adjoint.clone(),
            (*x).into(),
            to_db(p[0]).into(),
            to_db(p[1]).into(),
            to_db(p[2]).into(),
            bounds.max_db().into(),
            bounds.min_db().into(),
        ]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Link {
    gain_sq: f64,
    reduced: f64,
    unreduced: f64,
}

/// Link quality along the span, memoized by position.
struct LinkProfile<'a> {
    ctx: &'a Context,
    omega: NormalizedDoppler,
    cache: RefCell<HashMap<u64, Link>>,
    error: RefCell<Option<ExperimentError>>,
}

impl<'a> LinkProfile<'a> {
    fn new(ctx: &'a Context, omega: NormalizedDoppler) -> Self {
        LinkProfile {
            ctx,
            omega,
            cache: RefCell::new(HashMap::new()),
            error: RefCell::new(None),
        }
    }

    fn compute(&self, x: f64) -> Result<Link> {
        let model = self.ctx.model_at(x, self.omega)?;
        let one = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let rho = self.ctx.map_at(x)?.rho_sum();
        Ok(Link {
            gain_sq: rho * rho,
            reduced: model.sir_los(),
            unreduced: model.sir_unequalized(one),
        })
    }

    fn at(&self, x: f64) -> Link {
        if let Some(l) = self.cache.borrow().get(&x.to_bits()) {
            return *l;
        }
        let link = self.compute(x).unwrap_or_else(|e| {
            self.error.borrow_mut().get_or_insert(e);
            Link {
                gain_sq: 0.0,
                reduced: f64::INFINITY,
                unreduced: f64::INFINITY,
            }
        });
        self.cache.borrow_mut().insert(x.to_bits(), link);
        link
    }

    fn finish(self) -> Result<()> {
        match self.error.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Service {
    NoIci,
    Reduced,
    Unreduced,
}

fn quality(link: Link, service: Service) -> LinkQuality {
    LinkQuality {
        gain_sq: link.gain_sq,
        sinr: match service {
            Service::NoIci => f64::INFINITY,
            Service::Reduced => link.reduced,
            Service::Unreduced => link.unreduced,
        },
    }
}

/// Mobile service over one span (raw units: bit/s/Hz × OFDM samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobileService {
    pub no_ici: f64,
    pub reduced: f64,
    pub unreduced: f64,
    /// Two-point estimate from the exact SIR at A and B.
    pub two_point_exact: f64,
    /// Two-point estimate from the closed-form SIR bounds.
    pub two_point_theory: f64,
}

pub fn mobile_service(ctx: &Context, omega_d: f64) -> Result<MobileService> {
    let w = omega(omega_d)?;
    if w.value() == 0.0 {
        return Err(ExperimentError::Invalid("mobile service needs a moving train"));
    }
    let v = ctx.speed_per_sample(w);
    let span = ctx.deployment().d_h;
    let profile = LinkProfile::new(ctx, w);
    let (a, b) = (profile.at(0.0), profile.at(0.5 * span));
    let tol = ASQ_TOLERANCE * span;
    let integrate = |service| {
        asq(|x| quality(profile.at(x), service), quality(a, service), quality(b, service), v, span, tol)
    };
    let no_ici = integrate(Service::NoIci)?;
    let reduced = integrate(Service::Reduced)?;
    let unreduced = integrate(Service::Unreduced)?;
    profile.finish()?;
    let bounds = ctx.awgn_bounds(w)?;
    let theory = asq_two_point(
        LinkQuality {
            gain_sq: a.gain_sq,
            sinr: bounds.max_sir,
        },
        LinkQuality {
            gain_sq: b.gain_sq,
            sinr: bounds.min_sir,
        },
        v,
        span,
    );
    Ok(MobileService {
        no_ici: no_ici.integral_value,
        reduced: reduced.integral_value,
        unreduced: unreduced.integral_value,
        two_point_exact: reduced.two_point_value,
        two_point_theory: theory,
    })
}

/// SIR extremes (dB) of one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepExtremes {
    pub max_db: f64,
    pub min_db: f64,
}

fn extremes(values: impl Iterator<Item = f64>) -> SweepExtremes {
    let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
    for v in values {
        max = max.max(v);
        min = min.min(v);
    }
    SweepExtremes {
        max_db: to_db(max),
        min_db: to_db(min),
    }
}

/// Max/min reduced and unreduced LOS SIR over the default sweep.
pub fn los_sweep_extremes(ctx: &Context, omega_d: f64) -> Result<(SweepExtremes, SweepExtremes)> {
    let w = omega(omega_d)?;
    let ms = models(ctx, w, &sweep_offsets(ctx.deployment().d_h, DEFAULT_STEP_M))?;
    let one = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    Ok((
        extremes(ms.iter().map(|m| m.sir_los())),
        extremes(ms.iter().map(|m| m.sir_unequalized(one))),
    ))
}

fn param_columns<'a>(fixed: &[&'a str], name: &str, values: &[String]) -> Vec<String> {
    fixed
        .iter()
        .map(|s| (*s).to_owned())
        .chain(values.iter().map(|v| format!("{name}_{v}")))
        .collect()
}

fn result_with(experiment: &str, seed: u64, columns: &[String]) -> ExperimentResult {
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    ExperimentResult::new(experiment, seed, &refs)
}

/// SIR extremes and mobile service versus Doppler, LOS channel.
pub fn run_table1(ctx: &Context) -> Result<ExperimentResult> {
    run_table1_for(ctx, &TABLE1_OMEGAS)
}

pub fn run_table1_for(ctx: &Context, omegas: &[f64]) -> Result<ExperimentResult> {
    struct Column {
        reduced: SweepExtremes,
        unreduced: SweepExtremes,
        bounds: SirBounds,
        ms: MobileService,
    }
    let columns: Vec<Column> = omegas
        .par_iter()
        .map(|&w| -> Result<Column> {
            let (reduced, unreduced) = los_sweep_extremes(ctx, w)?;
            Ok(Column {
                reduced,
                unreduced,
                bounds: ctx.awgn_bounds(omega(w)?)?,
                ms: mobile_service(ctx, w)?,
            })
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = omegas.iter().map(|w| crate::output::format_sig6(*w)).collect();
    let mut out = result_with(
        "table1",
        ctx.seed,
        &param_columns(&["metric", "unit", "k_db", "regime", "kernel", "adjoint"], "omega_d", &names),
    );
    type Getter = fn(&Column) -> f64;
    let rows: [(&str, &str, Getter); 10] = [
        ("max_reduced_sir", "dB", |c| c.reduced.max_db),
        ("min_reduced_sir", "dB", |c| c.reduced.min_db),
        ("min_unreduced_sir", "dB", |c| c.unreduced.min_db),
        ("bound_max_sir", "dB", |c| c.bounds.max_db()),
        ("bound_min_sir", "dB", |c| c.bounds.min_db()),
        ("ms_no_ici", "bit/s/Hz*Ts", |c| c.ms.no_ici),
        ("ms_reduced", "bit/s/Hz*Ts", |c| c.ms.reduced),
        ("ms_theory", "bit/s/Hz*Ts", |c| c.ms.two_point_theory),
        ("ms_unreduced", "bit/s/Hz*Ts", |c| c.ms.unreduced),
        ("ms_two_point_exact", "bit/s/Hz*Ts", |c| c.ms.two_point_exact),
    ];
    let [regime, kernel, adjoint] = ctx.labels();
    for (metric, unit, get) in rows {
        let mut row: Vec<Value> = vec![
            metric.into(),
            unit.into(),
            f64::INFINITY.into(),
            regime.clone(),
            kernel.clone(),
            adjoint.clone(),
        ];
        row.extend(columns.iter().map(|c| Value::Float(get(c))));
        out.push(row);
    }
    Ok(out)
}

/// Per-draw SIR at point A (the maximum) and point B (the minimum) for
/// both algorithms.
#[derive(Debug, Clone, Copy)]
struct Draw {
    alg1: SweepExtremes,
    alg2: SweepExtremes,
}

/// Models at point A and point B.
fn extreme_models(ctx: &Context, w: NormalizedDoppler) -> Result<[SirModel; 2]> {
    Ok([ctx.model_at(0.0, w)?, ctx.model_at(0.5 * ctx.deployment().d_h, w)?])
}

fn draw_extremes(models: &[SirModel; 2], k: f64, fading: &SmallScaleFading) -> Result<Draw> {
    let [a, b] = models;
    Ok(Draw {
        alg1: SweepExtremes {
            max_db: to_db(a.sir_alg1(k, fading)?),
            min_db: to_db(b.sir_alg1(k, fading)?),
        },
        alg2: SweepExtremes {
            max_db: to_db(a.sir_alg2(k, fading)?),
            min_db: to_db(b.sir_alg2(k, fading)?),
        },
    })
}

fn monte_carlo(ctx: &Context, models: &[SirModel; 2], k: f64, kind: u64, group: u64, iterations: usize) -> Result<Vec<Draw>> {
    let rru_count = ctx.deployment().rru_count;
    (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(ctx.seed, stream_id(kind, group, i as u64));
            let fading = SmallScaleFading::draw(rru_count, &mut rng);
            draw_extremes(models, k, &fading)
        })
        .collect()
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// E and Var (dB, dB²) of the per-draw max (point A) and min (point B) SIR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeStats {
    pub mean_max_db: f64,
    pub var_max_db2: f64,
    pub mean_min_db: f64,
    pub var_min_db2: f64,
}

fn stats(draws: &[Draw], pick: fn(&Draw) -> SweepExtremes) -> ExtremeStats {
    let max: Vec<f64> = draws.iter().map(|d| pick(d).max_db).collect();
    let min: Vec<f64> = draws.iter().map(|d| pick(d).min_db).collect();
    let (mean_max_db, var_max_db2) = mean_var(&max);
    let (mean_min_db, var_min_db2) = mean_var(&min);
    ExtremeStats {
        mean_max_db,
        var_max_db2,
        mean_min_db,
        var_min_db2,
    }
}

const STAT_ROWS: [(&str, fn(&ExtremeStats) -> f64); 4] = [
    ("e_max_sir_db", |s| s.mean_max_db),
    ("var_max_sir_db2", |s| s.var_max_db2),
    ("e_min_sir_db", |s| s.mean_min_db),
    ("var_min_sir_db2", |s| s.var_min_db2),
];

/// Largest relative gap between `sir_exact` on the full `T×T` Rician
/// channel at point A and the antenna-free model, first draw.
fn antenna_check(ctx: &Context, t: usize, w: NormalizedDoppler, k: f64, group: u64) -> Result<f64> {
    let cfg = ctx.deployment();
    let map = ctx.map_at(0.0)?;
    let mut rng = stream_rng(ctx.seed, stream_id(TABLE2_STREAM, group, 0));
    let fading = SmallScaleFading::draw(cfg.rru_count, &mut rng);
    let los = build_los_channel_with(ctx.kernel(), &map, w, cfg.n, t, t)?;
    let ch = build_rician_channel(&los, k, &fading, w)?;
    let exact = sir_exact(&ch, ctx.subcarrier(), ctx.adjoint())?;
    let model = ctx.model_at(0.0, w)?.sir_alg2(k, &fading)?;
    Ok((exact / model - 1.0).abs())
}

/// E/Var of the SIR at A and B across antenna regimes, K = 30 dB.
pub fn run_table2(ctx: &Context) -> Result<ExperimentResult> {
    run_table2_with(ctx, ITERATIONS)
}

pub fn run_table2_with(ctx: &Context, iterations: usize) -> Result<ExperimentResult> {
    let w = omega(TABLE_OMEGA)?;
    let k = k_from_db(TABLE2_K_DB);
    let models = extreme_models(ctx, w)?;
    let mut per_regime = Vec::new();
    for (g, &t) in REGIMES.iter().enumerate() {
        let draws = monte_carlo(ctx, &models, k, TABLE2_STREAM, g as u64, iterations)?;
        per_regime.push((
            stats(&draws, |d| d.alg1),
            stats(&draws, |d| d.alg2),
            antenna_check(ctx, t, w, k, g as u64)?,
        ));
    }
    let names: Vec<String> = REGIMES.iter().map(|t| format!("{t}x{t}")).collect();
    let mut out = result_with(
        "table2",
        ctx.seed,
        &param_columns(&["alg", "metric", "omega_d", "k_db", "iterations", "kernel", "adjoint"], "regime", &names),
    );
    let [_, kernel, adjoint] = ctx.labels();
    let fixed = |alg: i64, metric: &str| -> Vec<Value> {
        vec![
            alg.into(),
            metric.into(),
            TABLE_OMEGA.into(),
            TABLE2_K_DB.into(),
            iterations.into(),
            kernel.clone(),
            adjoint.clone(),
        ]
    };
    for (alg, pick) in [(1, 0usize), (2, 1)] {
        for (metric, get) in STAT_ROWS {
            let mut row = fixed(alg, metric);
            row.extend(per_regime.iter().map(|r| Value::Float(get(if pick == 0 { &r.0 } else { &r.1 }))));
            out.push(row);
        }
    }
    let mut row = fixed(2, "exact_vs_model_rel_dev");
    row.extend(per_regime.iter().map(|r| Value::Float(r.2)));
    out.push(row);
    Ok(out)
}

/// Simulated and closed-form E/Var of the SIR at A and B versus K.
pub fn run_table3(ctx: &Context) -> Result<ExperimentResult> {
    run_table3_with(ctx, ITERATIONS)
}

pub fn run_table3_with(ctx: &Context, iterations: usize) -> Result<ExperimentResult> {
    let w = omega(TABLE_OMEGA)?;
    let cfg = ctx.deployment();
    let models = extreme_models(ctx, w)?;
    let psi = ctx.psi()?;
    let bounds = ctx.awgn_bounds(w)?;
    let mut sim = Vec::new();
    let mut theory = Vec::new();
    for (g, &k_db) in TABLE3_K_DB.iter().enumerate() {
        let k = k_from_db(k_db);
        let draws = monte_carlo(ctx, &models, k, TABLE3_STREAM, g as u64, iterations)?;
        sim.push((stats(&draws, |d| d.alg1), stats(&draws, |d| d.alg2)));
        let l4 = lemma4_stats(psi, w, cfg.cos_theta_a(), k)?;
        theory.push((
            ExtremeStats {
                mean_max_db: to_db(l4.mean_max_sir),
                var_max_db2: l4.var_max_sir_db2,
                mean_min_db: f64::NAN,
                var_min_db2: f64::NAN,
            },
            ExtremeStats {
                mean_max_db: bounds.max_db(),
                var_max_db2: l4.rician_var_max_db2,
                mean_min_db: bounds.min_db(),
                var_min_db2: l4.rician_var_min_db2,
            },
        ));
    }
    let names: Vec<String> = TABLE3_K_DB.iter().map(|k| crate::output::format_sig6(*k)).collect();
    let mut out = result_with(
        "table3",
        ctx.seed,
        &param_columns(
            &["alg", "metric", "source", "omega_d", "regime", "iterations", "kernel", "adjoint"],
            "k_db",
            &names,
        ),
    );
    let [regime, kernel, adjoint] = ctx.labels();
    for alg in [1i64, 2] {
        for (metric, get) in STAT_ROWS {
            for (source, table) in [("sim", &sim), ("theory", &theory)] {
                let mut row: Vec<Value> = vec![
                    alg.into(),
                    metric.into(),
                    source.into(),
                    TABLE_OMEGA.into(),
                    regime.clone(),
                    iterations.into(),
                    kernel.clone(),
                    adjoint.clone(),
                ];
                row.extend(table.iter().map(|(a1, a2)| Value::Float(get(if alg == 1 { a1 } else { a2 }))));
                out.push(row);
            }
        }
    }
    Ok(out)
}

/// Cumulative service along one span for each Doppler value.
pub fn run_asq(ctx: &Context, omegas: &[f64]) -> Result<ExperimentResult> {
    run_asq_with(ctx, omegas, DEFAULT_STEP_M)
}

pub fn run_asq_with(ctx: &Context, omegas: &[f64], step_m: f64) -> Result<ExperimentResult> {
    if !(step_m > 0.0) || !step_m.is_finite() {
        return Err(ExperimentError::Invalid("step must be positive"));
    }
    let span = ctx.deployment().d_h;
    let mut grid = sweep_offsets(span, step_m);
    grid.push(span);
    let curves: Vec<Vec<[f64; 4]>> = omegas
        .par_iter()
        .map(|&omega_d| -> Result<Vec<[f64; 4]>> {
            let w = omega(omega_d)?;
            if w.value() == 0.0 {
                return Err(ExperimentError::Invalid("ASQ needs a moving train"));
            }
            let v = ctx.speed_per_sample(w);
            let profile = LinkProfile::new(ctx, w);
            let bounds = ctx.awgn_bounds(w)?;
            let (a, b) = (profile.at(0.0), profile.at(0.5 * span));
            let theory_rate = 0.5
                * (hsr_ici::analysis::capacity(LinkQuality {
                    gain_sq: a.gain_sq,
                    sinr: bounds.max_sir,
                }) + hsr_ici::analysis::capacity(LinkQuality {
                    gain_sq: b.gain_sq,
                    sinr: bounds.min_sir,
                }));
            let mut acc = [0.0; 3];
            let mut rows = vec![[0.0, 0.0, 0.0, 0.0]];
            for seg in grid.windows(2) {
                let (x0, len) = (seg[0], seg[1] - seg[0]);
                let tol = ASQ_TOLERANCE * len;
                for (slot, service) in [Service::NoIci, Service::Reduced, Service::Unreduced].into_iter().enumerate() {
                    let q = |x: f64| quality(profile.at(x0 + x), service);
                    acc[slot] += asq(q, q(0.0), q(len), v, len, tol)?.integral_value;
                }
                rows.push([acc[0], acc[1], acc[2], seg[1] * theory_rate / v]);
            }
            profile.finish()?;
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut out = ExperimentResult::new(
        "asq",
        ctx.seed,
        &[
            "omega_d",
            "k_db",
            "regime",
            "kernel",
            "adjoint",
            "position_m",
            "asq_no_ici",
            "asq_reduced",
            "asq_unreduced",
            "asq_two_point_theory",
        ],
    );
    let [regime, kernel, adjoint] = ctx.labels();
    for (&w, rows) in omegas.iter().zip(curves) {
        for (&x, r) in grid.iter().zip(rows) {
            out.push(vec![
                w.into(),
                f64::INFINITY.into(),
                regime.clone(),
                kernel.clone(),
                adjoint.clone(),
                x.into(),
                r[0].into(),
                r[1].into(),
                r[2].into(),
                r[3].into(),
            ]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Context {
        let mut config = SimConfig::default();
        config.deployment.n = 64;
        Context::new(config, 7)
    }

    #[test]
    fn offsets_cover_the_span_once() {
        let o = sweep_offsets(500.0, 5.0);
        assert_eq!(o.len(), 100);
        assert_eq!(o[99], 495.0);
        assert_eq!(sweep_offsets(10.0, 3.0), vec![0.0, 3.0, 6.0, 9.0]);
    }

    #[test]
    fn stationary_sweep_is_flat_infinity() {
        let r = run_position_sweep(&small(), 0.0, f64::INFINITY, Algorithm::Los, 25.0).unwrap();
        assert_eq!(r.rows.len(), 20);
        let c = r.column("sir_db").unwrap();
        assert!(r.rows.iter().all(|row| row[c] == Value::Float(f64::INFINITY)));
    }

    #[test]
    fn sweep_rejects_bad_step() {
        assert!(run_position_sweep(&small(), 0.08, f64::INFINITY, Algorithm::Los, 0.0).is_err());
    }

    #[test]
    fn zero_span_asq_is_zero() {
        let mut ctx = small();
        ctx.config.deployment.d_h = 1e-9;
        let w = NormalizedDoppler::new(0.05).unwrap();
        let profile = LinkProfile::new(&ctx, w);
        let q = |x: f64| quality(profile.at(x), Service::Reduced);
        let r = asq(q, q(0.0), q(0.0), 1.0, 0.0, 1e-6).unwrap();
        assert_eq!(r.integral_value, 0.0);
        assert_eq!(r.two_point_value, 0.0);
    }

    #[test]
    fn tables_are_reproducible_and_thread_independent() {
        let ctx = small();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_table3_with(&ctx, 40)).unwrap().to_csv();
        let b = three.install(|| run_table3_with(&ctx, 40)).unwrap().to_csv();
        assert_eq!(a, b);
        let other = Context::new(ctx.config.clone(), 8);
        assert_ne!(a, run_table3_with(&other, 40).unwrap().to_csv());
    }

    #[test]
    fn asq_curve_ends_at_mobile_service() {
        let ctx = small();
        let curve = run_asq_with(&ctx, &[0.08], 50.0).unwrap();
        let ms = mobile_service(&ctx, 0.08).unwrap();
        let last = curve.rows.last().unwrap();
        let reduced = last[curve.column("asq_reduced").unwrap()].as_f64().unwrap();
        let theory = last[curve.column("asq_two_point_theory").unwrap()].as_f64().unwrap();
        assert!((reduced / ms.reduced - 1.0).abs() < 1e-3, "{reduced} vs {}", ms.reduced);
        assert!((theory / ms.two_point_theory - 1.0).abs() < 1e-12);
        let first = &curve.rows[0];
        assert_eq!(first[curve.column("asq_no_ici").unwrap()], Value::Float(0.0));
    }
}
