//! Seeded Monte Carlo experiments.
//!
//! Trial `t` draws everything from `RandomStream::new(seed, t)`, split into
//! lanes (channel, training noise, data, training matrix) so that every
//! configuration inside one trial sees common random numbers. Trials run on
//! a worker pool and are reduced in index order, so records do not depend
//! on the worker count.

use num_complex::Complex64;
use qdr_core::{
    detect_symbols, draw_channel, draw_symbols, draw_training, lemma2_mse, make_psk, make_training,
    ml_channel_estimate, ml_estimate_relaxed, normalized_mse, quantize, sign_refine, stack_real, transmit_data,
    transmit_training, corollary1_mse, zf_channel_estimate, ChannelEstimate, NewtonOptions, RandomStream,
    RealLiftedChannel, SignRefinedTraining, SphereOptions, TrainingBlock, ZfReceiver,
};
use rayon::prelude::*;

use crate::error::SimError;
use crate::record::{mean_stderr, MetricRecord};
use crate::spec::{db_to_linear, Estimator, ExperimentKind, ExperimentSpec, SigmaMode, TrainingKind};

const LANE_CHANNEL: u64 = 0;
const LANE_TRAINING_NOISE: u64 = 1;
const LANE_DATA: u64 = 2;
const LANE_TRAINING: u64 = 3;

/// Entries per work item in σ_q calibration.
const SIGMA_CHUNK: usize = 4096;

/// Runs `f(trial)` for every trial on `workers` threads and returns the
/// results in trial order.
pub fn run_trials<T, F>(workers: usize, trials: usize, f: F) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(u64) -> Result<T, SimError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Io(std::io::Error::other(e)))?;
    pool.install(|| (0..trials as u64).into_par_iter().map(&f).collect())
}

fn record(spec: &ExperimentSpec, k: usize, t: usize, l: usize, snr_db: f64) -> MetricRecord {
    MetricRecord {
        experiment: spec.kind.name().to_string(),
        nt: spec.nt,
        k,
        t,
        l,
        snr_db,
        modulation: format!("{}psk", spec.m),
        method: String::new(),
        metric: String::new(),
        value: f64::NAN,
        stderr: f64::NAN,
        trials: spec.trials,
        seed: spec.seed,
    }
}

fn training_block(spec: &ExperimentSpec, t: usize, trial: &RandomStream) -> Result<TrainingBlock, SimError> {
    Ok(match spec.training {
        TrainingKind::Random => draw_training(spec.nt, t, &mut trial.lane(LANE_TRAINING))?,
        TrainingKind::Dft => make_training(spec.nt, t)?,
    })
}

fn estimate(
    est: Estimator,
    training: &TrainingBlock,
    obs: &qdr_core::QuantizedBlock,
    nt: usize,
    rho: f64,
) -> Result<ChannelEstimate, SimError> {
    Ok(match est {
        Estimator::Zf => zf_channel_estimate(training, obs)?,
        Estimator::Ml => {
            let refined = SignRefinedTraining::new(training, obs)?;
            ml_channel_estimate(&refined, nt, rho, &NewtonOptions::default())?
        }
        Estimator::Perfect => unreachable!("perfect CSI has no estimator"),
    })
}

/// Normalized channel-estimation MSE versus training length for a single
/// receive node. Both estimators see the same training observations.
pub fn run_mse_sweep(spec: &ExperimentSpec) -> Result<Vec<MetricRecord>, SimError> {
    check_kind(spec, ExperimentKind::MseSweep)?;
    let nt = spec.nt;
    let configs: Vec<(f64, usize)> = spec
        .snr_db_list
        .iter()
        .flat_map(|&s| spec.t_list.iter().map(move |&t| (s, t)))
        .collect();
    let samples = run_trials(spec.workers, spec.trials, |trial| {
        let stream = RandomStream::new(spec.seed, trial);
        let h = draw_channel(nt, 1, &mut stream.lane(LANE_CHANNEL)).remove(0);
        let mut out = Vec::with_capacity(configs.len() * spec.estimators.len());
        for &(snr_db, t) in &configs {
            let rho = db_to_linear(snr_db);
            let training = training_block(spec, t, &stream)?;
            let obs = transmit_training(&h, &training, rho, &mut stream.lane(LANE_TRAINING_NOISE))?;
            for &est in &spec.estimators {
                out.push(normalized_mse(&h, &estimate(est, &training, &obs, nt, rho)?, nt)?);
            }
        }
        Ok(out)
    })?;
    let mut records = Vec::new();
    for (c, &(snr_db, t)) in configs.iter().enumerate() {
        for (e, &est) in spec.estimators.iter().enumerate() {
            let column: Vec<f64> = samples.iter().map(|s| s[c * spec.estimators.len() + e]).collect();
            let (value, stderr) = mean_stderr(&column);
            records.push(MetricRecord {
                method: est.name().into(),
                metric: "mse_normalized".into(),
                value,
                stderr,
                ..record(spec, 1, t, 0, snr_db)
            });
        }
    }
    Ok(records)
}

/// Symbol error rate of the ZF receiver over coherence blocks. Perfect CSI
/// uses the true channels for all `L` uses; estimated CSI spends the first
/// `T` uses on training and detects the remaining `L − T` with the
/// per-node normalized estimates. The sample unit is the block.
pub fn run_ser_sweep(spec: &ExperimentSpec) -> Result<Vec<MetricRecord>, SimError> {
    check_kind(spec, ExperimentKind::SerSweep)?;
    let nt = spec.nt;
    let l = spec.block_length();
    let constellation = make_psk(spec.m)?;
    // (snr, estimator, T); perfect CSI is independent of T
    let mut configs: Vec<(f64, Estimator, usize)> = Vec::new();
    for &s in &spec.snr_db_list {
        for &est in &spec.estimators {
            if est == Estimator::Perfect {
                configs.push((s, est, 0));
            } else {
                configs.extend(spec.t_list.iter().map(|&t| (s, est, t)));
            }
        }
    }
    let samples = run_trials(spec.workers, spec.trials, |trial| {
        let stream = RandomStream::new(spec.seed, trial);
        let channels = draw_channel(nt, spec.k, &mut stream.lane(LANE_CHANNEL));
        let mut out = Vec::with_capacity(configs.len());
        for &(snr_db, est, t) in &configs {
            let rho = db_to_linear(snr_db);
            let csi = if est == Estimator::Perfect {
                channels.clone()
            } else {
                let training = training_block(spec, t, &stream)?;
                let mut noise = stream.lane(LANE_TRAINING_NOISE);
                channels
                    .iter()
                    .map(|h| {
                        let obs = transmit_training(h, &training, rho, &mut noise)?;
                        Ok(estimate(est, &training, &obs, nt, rho)?.normalized_channel()?)
                    })
                    .collect::<Result<Vec<RealLiftedChannel>, SimError>>()?
            };
            let rx = ZfReceiver::new(&csi)?;
            let mut data = stream.lane(LANE_DATA);
            let uses = l - t;
            let mut errors = 0usize;
            for _ in 0..uses {
                let (idx, x) = draw_symbols(&constellation, nt, &mut data);
                let obs = transmit_data(&channels, &x, rho, &mut data)?;
                let decided = detect_symbols(&rx.soft(obs.quantized())?, &constellation);
                errors += idx.iter().zip(&decided).filter(|(a, b)| a != b).count();
            }
            out.push(errors as f64 / (uses * nt) as f64);
        }
        Ok(out)
    })?;
    Ok(configs
        .iter()
        .enumerate()
        .map(|(c, &(snr_db, est, t))| {
            let column: Vec<f64> = samples.iter().map(|s| s[c]).collect();
            let (value, stderr) = mean_stderr(&column);
            MetricRecord {
                method: est.name().into(),
                metric: "ser".into(),
                value,
                stderr,
                ..record(spec, spec.k, t, l, snr_db)
            }
        })
        .collect())
}

/// `σ̂²_q = (Nt/ρ) · mean |ŷ − y|²` over raw observations `y`, with its
/// standard error.
pub fn sigma_q_from_observations(y: &[Complex64], nt: usize, rho: f64) -> Result<(f64, f64), SimError> {
    let q = quantize(y)?;
    let scale = nt as f64 / rho;
    let w: Vec<f64> = q
        .quantized()
        .iter()
        .zip(y)
        .map(|(a, b)| scale * (a - b).norm_sqr())
        .collect();
    Ok(mean_stderr(&w))
}

/// Calibrates the Gaussian quantization-noise variance. Every entry draws
/// its own channel and noise; `Data` uses a random unit-modulus symbol
/// vector, `Train` a column of a random unitary training block with
/// `T = max(64, 2Nt)` (one block per work item).
pub fn calibrate_sigma_q(
    nt: usize,
    rho: f64,
    samples: usize,
    seed: u64,
    mode: SigmaMode,
    workers: usize,
) -> Result<(f64, f64), SimError> {
    if nt == 0 || !(rho.is_finite() && rho > 0.0) {
        return Err(qdr_core::Error::InvalidArgument("sigma_q calibration needs nt >= 1 and rho > 0").into());
    }
    let chunks = samples.div_ceil(SIGMA_CHUNK);
    let amp = (rho / nt as f64).sqrt();
    let t_train = 64.max(2 * nt);
    let parts = run_trials(workers, chunks, |chunk| {
        let stream = RandomStream::new(seed, chunk);
        let n = SIGMA_CHUNK.min(samples - chunk as usize * SIGMA_CHUNK);
        let training = match mode {
            SigmaMode::Train => Some(draw_training(nt, t_train, &mut stream.lane(LANE_TRAINING))?),
            SigmaMode::Data => None,
        };
        let mut s = stream.lane(LANE_DATA);
        let y: Vec<Complex64> = (0..n)
            .map(|_| {
                let h: Vec<Complex64> = (0..nt).map(|_| s.complex_normal()).collect();
                let x: Vec<Complex64> = match &training {
                    None => (0..nt).map(|_| Complex64::from_polar(1.0, s.phase())).collect(),
                    Some(tb) => {
                        let i = s.index(t_train);
                        (0..nt).map(|a| tb.entry(a, i)).collect()
                    }
                };
                let signal: Complex64 = h.iter().zip(&x).map(|(h, x)| h.conj() * x).sum();
                signal * amp + s.complex_normal()
            })
            .collect();
        let q = quantize(&y)?;
        Ok(q.quantized()
            .iter()
            .zip(&y)
            .map(|(a, b)| nt as f64 / rho * (a - b).norm_sqr())
            .collect::<Vec<f64>>())
    })?;
    Ok(mean_stderr(&parts.concat()))
}

fn run_sigma_q(spec: &ExperimentSpec) -> Result<Vec<MetricRecord>, SimError> {
    spec.snr_db_list
        .iter()
        .map(|&snr_db| {
            let (value, stderr) =
                calibrate_sigma_q(spec.nt, db_to_linear(snr_db), spec.samples, spec.seed, spec.sigma_mode, spec.workers)?;
            Ok(MetricRecord {
                modulation: "none".into(),
                method: spec.sigma_mode.name().into(),
                metric: "sigma_q_sq".into(),
                value,
                stderr,
                trials: spec.samples,
                ..record(spec, 0, 0, 0, snr_db)
            })
        })
        .collect()
}

fn fixed_symbols(spec: &ExperimentSpec) -> Result<Vec<Complex64>, SimError> {
    let c = make_psk(spec.m)?;
    Ok((0..spec.nt).map(|a| c.point(a % spec.m)).collect())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median distance `‖x̌ − x_R‖` of the relaxed ML estimate from a fixed
/// transmitted vector (`x_a` = constellation point `a mod M`) versus `K`.
/// The stderr column is `sd / √trials` of the per-trial distances.
pub fn run_lemma1_convergence(spec: &ExperimentSpec) -> Result<Vec<MetricRecord>, SimError> {
    check_kind(spec, ExperimentKind::Lemma1)?;
    let nt = spec.nt;
    let x = fixed_symbols(spec)?;
    let x_r = stack_real(&x);
    let configs: Vec<(f64, usize)> = spec
        .snr_db_list
        .iter()
        .flat_map(|&s| spec.k_list.iter().map(move |&k| (s, k)))
        .collect();
    let samples = run_trials(spec.workers, spec.trials, |trial| {
        let stream = RandomStream::new(spec.seed, trial);
        configs
            .iter()
            .map(|&(snr_db, k)| {
                let rho = db_to_linear(snr_db);
                let channels = draw_channel(nt, k, &mut stream.lane(LANE_CHANNEL));
                let obs = transmit_data(&channels, &x, rho, &mut stream.lane(LANE_DATA))?;
                let refined = sign_refine(&channels, &obs)?;
                let est = ml_estimate_relaxed(&refined, nt, rho, &SphereOptions::default())?;
                Ok(est.soft.iter().zip(&x_r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            })
            .collect::<Result<Vec<f64>, SimError>>()
    })?;
    Ok(configs
        .iter()
        .enumerate()
        .map(|(c, &(snr_db, k))| {
            let mut column: Vec<f64> = samples.iter().map(|s| s[c]).collect();
            let (_, stderr) = mean_stderr(&column);
            MetricRecord {
                method: "ml".into(),
                metric: "median_error".into(),
                value: median(&mut column),
                stderr,
                ..record(spec, k, 0, 0, snr_db)
            }
        })
        .collect())
}

/// Data-phase MSE `‖x − β x̌‖² / Nt` of the ZF soft estimate with perfect
/// CSI versus `K`. The soft estimate carries an unknown gain from the
/// quantizer, so `β` is the least-squares gain fitted per `K` over all
/// trials.
pub fn run_lemma2_decay(spec: &ExperimentSpec) -> Result<Vec<MetricRecord>, SimError> {
    check_kind(spec, ExperimentKind::Lemma2)?;
    let nt = spec.nt;
    let constellation = make_psk(spec.m)?;
    let configs: Vec<(f64, usize)> = spec
        .snr_db_list
        .iter()
        .flat_map(|&s| spec.k_list.iter().map(move |&k| (s, k)))
        .collect();
    let samples = run_trials(spec.workers, spec.trials, |trial| {
        let stream = RandomStream::new(spec.seed, trial);
        configs
            .iter()
            .map(|&(snr_db, k)| {
                let rho = db_to_linear(snr_db);
                let channels = draw_channel(nt, k, &mut stream.lane(LANE_CHANNEL));
                let mut data = stream.lane(LANE_DATA);
                let (_, x) = draw_symbols(&constellation, nt, &mut data);
                let obs = transmit_data(&channels, &x, rho, &mut data)?;
                let soft = ZfReceiver::new(&channels)?.soft(obs.quantized())?;
                Ok((x, soft))
            })
            .collect::<Result<Vec<_>, SimError>>()
    })?;
    Ok(configs
        .iter()
        .enumerate()
        .map(|(c, &(snr_db, k))| {
            let pairs = samples.iter().map(|s| &s[c]);
            let (mut num, mut den) = (0.0, 0.0);
            for (x, soft) in pairs.clone() {
                num += x.iter().zip(soft).map(|(a, b)| (b.conj() * a).re).sum::<f64>();
                den += soft.iter().map(|b| b.norm_sqr()).sum::<f64>();
            }
            let beta = if den > 0.0 { num / den } else { 0.0 };
            let errs: Vec<f64> = pairs
                .map(|(x, soft)| x.iter().zip(soft).map(|(a, b)| (a - b * beta).norm_sqr()).sum::<f64>() / nt as f64)
                .collect();
            let (value, stderr) = mean_stderr(&errs);
            MetricRecord {
                method: "zf".into(),
                metric: "mse_data".into(),
                value,
                stderr,
                ..record(spec, k, 0, 0, snr_db)
            }
        })
        .collect())
}

/// Theory overlay: for every ZF `mse_normalized` row the training-phase law
/// in `T`, for every `mse_data` row the data-phase law in `K`. Each eligible
/// row yields a `theory` and a `ratio` (empirical / theory) record; ZF
/// training rows with `Nt ≥ T` yield a `skipped_nt_ge_t` warning record.
pub fn compare_theory(records: &[MetricRecord], sigma_q_sq: f64) -> Result<Vec<MetricRecord>, SimError> {
    let mut out = Vec::new();
    for r in records {
        let rho = db_to_linear(r.snr_db);
        let theory = match (r.metric.as_str(), r.method.as_str()) {
            ("mse_normalized", "zf") => {
                if r.nt >= r.t {
                    out.push(MetricRecord {
                        experiment: "compare-theory".into(),
                        metric: "skipped_nt_ge_t".into(),
                        value: f64::NAN,
                        stderr: f64::NAN,
                        ..r.clone()
                    });
                    continue;
                }
                corollary1_mse(r.nt, rho, sigma_q_sq, r.t)?
            }
            ("mse_data", _) => lemma2_mse(r.nt, rho, sigma_q_sq, r.k)?,
            _ => continue,
        };
        out.push(MetricRecord {
            experiment: "compare-theory".into(),
            metric: format!("theory_{}", r.metric),
            value: theory,
            stderr: 0.0,
            ..r.clone()
        });
        out.push(MetricRecord {
            experiment: "compare-theory".into(),
            metric: format!("ratio_{}", r.metric),
            value: r.value / theory,
            stderr: r.stderr / theory,
            ..r.clone()
        });
    }
    Ok(out)
}

fn check_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<(), SimError> {
    if spec.kind != kind {
        return Err(SimError::Validation(vec![format!(
            "kind: expected {}, got {}",
            kind.name(),
            spec.kind.name()
        )]));
    }
    spec.validate()
}

/// Validates `spec` and runs the experiment it names.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<MetricRecord>, SimError> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::MseSweep => run_mse_sweep(spec),
        ExperimentKind::SerSweep => run_ser_sweep(spec),
        ExperimentKind::SigmaQ => run_sigma_q(spec),
        ExperimentKind::Lemma1 => run_lemma1_convergence(spec),
        ExperimentKind::Lemma2 => run_lemma2_decay(spec),
    }
}
