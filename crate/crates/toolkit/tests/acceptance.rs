//! Acceptance suite. One line per criterion; exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mchaos::config::{
    EnsembleConfig, EstimatorConfig, ExperimentConfig, GridConfig, LambdaSpec, ModelConfig, WeightLawSpec,
};
use mchaos::ensemble::resolve_threads;
use mchaos::run::{run_experiment, RunOutput};
use mchaos_core::cascades::{CascadeSampler, WeightLaw};
use mchaos_core::coverings::{chi, hit_window, mrc_value_at, pmc_value_at, CoveringSampler, LambdaMeasure};
use mchaos_core::gaussian::{default_profile_knots, GmcConfig, GmcSampler};
use mchaos_core::kernels::{
    bump_selfconvolve, check_sigma_regular, exact_log_layer, g_correction, star_scale_layer, ExpBump, KernelKind,
    SigmaTolerances, StarScale,
};
use mchaos_core::math::Complex64;
use mchaos_core::spectral::{estimate_fourier_dim, fourier_coefficients, BandTrim, FourierMode, FourierSpectrum};
use mchaos_core::theory::{d_gamma, d_sigma, sup_theta_ratio, MomentProfile};
use mchaos_core::{BAdicGrid, DensityField, MeasureSampler, RngStream};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn log_mesh(b: u32, levels: i32, points: usize) -> Vec<f64> {
    let lo = (b as f64).powi(-levels).ln();
    (0..points)
        .map(|i| (lo * (1.0 - i as f64 / (points - 1) as f64)).exp())
        .collect()
}

// sup_p of 2(d(p-1) - gamma^2 p(p-1)/2)/p on (1, 2], at p* = sqrt(2d)/gamma when admissible
fn d_gamma_oracle(gamma: f64, d: usize) -> f64 {
    let d = d as f64;
    let p_star = (2.0 * d).sqrt() / gamma;
    if p_star <= 2.0 {
        ((2.0 * d).sqrt() - gamma).powi(2)
    } else {
        d - gamma * gamma
    }
}

fn criterion_1() -> Outcome {
    const TOL: f64 = 1e-9;
    const JUNCTION_TOL: f64 = 1e-12;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for d in 1..=4usize {
        let top = (2.0 * d as f64).sqrt() - 0.05;
        let mut prev = f64::INFINITY;
        let mut k = 0;
        loop {
            let gamma = 0.1 + 0.05 * k as f64;
            if gamma > top + 1e-12 {
                break;
            }
            k += 1;
            let p0 = (2.0 * d as f64 / (gamma * gamma)).min(2.0);
            let (_, sup) = sup_theta_ratio(&MomentProfile::Gmc { gamma }, 2, d, p0).map_err(|e| e.to_string())?;
            let closed = d_gamma(gamma, d).map_err(|e| e.to_string())?;
            let oracle = d_gamma_oracle(gamma, d);
            worst = worst.max((sup - closed).abs()).max((closed - oracle).abs());
            ensure((sup - closed).abs() < TOL && (closed - oracle).abs() < TOL, || {
                format!("gamma={gamma} d={d}: optimizer {sup}, closed form {closed}, oracle {oracle}")
            })?;
            ensure(closed < prev, || format!("not decreasing at gamma={gamma} d={d}"))?;
            prev = closed;
            cases += 1;
        }
        let g = (2.0 * d as f64).sqrt() / 2.0;
        let interior = ((2.0 * d as f64).sqrt() - g).powi(2);
        let boundary = d as f64 - g * g;
        ensure((interior - boundary).abs() < JUNCTION_TOL, || {
            format!("branches differ at d={d}")
        })?;
        ensure((d_gamma(g, d).unwrap() - boundary).abs() < JUNCTION_TOL, || {
            format!("junction d={d}")
        })?;
    }
    Ok(format!("{cases} (gamma, d) cases, max error {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    const TOL: f64 = 1e-10;
    let mut worst = 0.0f64;
    for b in [2u32, 3] {
        for t in log_mesh(b, 20, 200) {
            let sum: f64 = (0..=20).map(|j| exact_log_layer(b, j, t)).sum();
            let err = (sum - (1.0 / t).ln()).abs();
            worst = worst.max(err);
            ensure(err < TOL, || format!("b={b} t={t:e}: error {err:e}"))?;
        }
    }
    Ok(format!("max error {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    const TOL: f64 = 1e-6;
    let profile = bump_selfconvolve(&ExpBump::default(), 1, default_profile_knots(1)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for b in [2u32, 3] {
        for t in log_mesh(b, 20, 200) {
            let sum: f64 = (0..=20).map(|j| star_scale_layer(&profile, b, j, t)).sum();
            let want = (1.0 / t).ln() + g_correction(&profile, t).map_err(|e| e.to_string())?;
            let err = (sum - want).abs();
            worst = worst.max(err);
            ensure(err < TOL, || format!("b={b} t={t:e}: error {err:e}"))?;
        }
        let k = StarScale::new(b, std::sync::Arc::new(profile.clone()));
        let r = check_sigma_regular(&k, 1.0, 20, SigmaTolerances::default());
        ensure(
            r.h1.pass && r.h2.pass && r.h2_sharp.pass && r.h3.pass && r.bounds.pass,
            || format!("b={b}: regularity report {r:?}"),
        )?;
    }
    Ok(format!("max error {worst:.1e}; H1/H2/H2'/H3 pass at alpha0 = 1"))
}

// Canonical atoms alpha/n of unit mass in band j: Y = sum y, O = sum (y - delta)_+.
fn canonical_band(alpha: f64, j: u32, delta: f64) -> (f64, f64) {
    let (lo, hi) = (2f64.powi(-(j as i32)), 2f64.powi(1 - j as i32));
    let (mut y, mut o) = (0.0, 0.0);
    let mut n = 1u64;
    loop {
        let v = alpha / n as f64;
        if v < lo {
            break;
        }
        if v < hi {
            y += v;
            o += (v - delta).max(0.0);
        }
        n += 1;
    }
    (y, o)
}

struct Moments {
    // E[X^q] and E[(X(t) X(s))^q]
    single: Box<dyn Fn(f64) -> f64>,
    pair: Box<dyn Fn(f64) -> f64>,
}

fn mrc_moments(y: f64, o: f64) -> Moments {
    Moments {
        single: Box::new(move |q| ((q - 1.0) * y).exp()),
        pair: Box::new(move |q| (2.0 * (q - 1.0) * y + o).exp()),
    }
}

fn pmc_moments(a: f64, y: f64, o: f64) -> Moments {
    Moments {
        single: Box::new(move |q| ((a.powf(q) - a * q + q - 1.0) * y).exp()),
        pair: Box::new(move |q| {
            (2.0 * (a.powf(q) - 1.0) * (y - o) + (a.powf(2.0 * q) - 1.0) * o + 2.0 * q * (1.0 - a) * y).exp()
        }),
    }
}

fn criterion_4() -> Outcome {
    const S: u64 = 100_000;
    const BAND: f64 = 3.0;
    // rounding slack for layers that are identically 1
    const EPS: f64 = 1e-12;
    let (t, b) = (0.5, 2u32);
    let models: [Option<f64>; 3] = [None, Some(0.3), Some(0.7)];
    let mut checks = 0;
    let mut failures = Vec::new();
    let mut worst_z = 0.0f64;
    for alpha in [0.3, 0.5, 0.7] {
        let lambda = LambdaMeasure::canonical(alpha);
        for j in 1..=10u32 {
            let delta = 2f64.powi(-(j as i32 + 1));
            let s = t + delta;
            let mass = lambda.band_masses(b, j).map_err(|e| e.to_string())?;
            let window = hit_window(b, j, &[t, s]);
            let (y, o) = canonical_band(alpha, j, delta);
            // [model][p=1.5, p=2, pair]
            let mut sums = [[0.0f64; 3]; 3];
            for i in 0..S {
                let pts = lambda
                    .sample_band(b, j, window, &mut RngStream::new(4, i, j as u64, (alpha * 10.0) as u64))
                    .map_err(|e| e.to_string())?;
                for (k, a) in models.iter().enumerate() {
                    let (xt, xs) = match a {
                        None => (mrc_value_at(&pts, mass, t), mrc_value_at(&pts, mass, s)),
                        Some(a) => (pmc_value_at(&pts, *a, mass, t), pmc_value_at(&pts, *a, mass, s)),
                    };
                    sums[k][0] += xt.powf(1.5);
                    sums[k][1] += xt * xt;
                    sums[k][2] += xt * xs;
                }
            }
            for (k, a) in models.iter().enumerate() {
                let m = match a {
                    None => mrc_moments(y, o),
                    Some(a) => pmc_moments(*a, y, o),
                };
                let targets = [
                    ("E[X^1.5]", (m.single)(1.5), (m.single)(3.0)),
                    ("E[X^2]", (m.single)(2.0), (m.single)(4.0)),
                    ("E[X(t)X(s)]", (m.pair)(1.0), (m.pair)(2.0)),
                ];
                for (q, (name, want, second)) in targets.into_iter().enumerate() {
                    let mean = sums[k][q] / S as f64;
                    let sigma = ((second - want * want).max(0.0) / S as f64).sqrt();
                    let gap = (mean - want).abs();
                    checks += 1;
                    if sigma > 0.0 {
                        worst_z = worst_z.max(gap / sigma);
                    }
                    if gap > BAND * sigma + EPS {
                        let model = a.map_or("mrc".to_string(), |a| format!("pmc a={a}"));
                        failures.push(format!(
                            "{model} alpha={alpha} j={j} {name}: {mean:.6} vs {want:.6} ({:.2} sigma)",
                            gap / sigma
                        ));
                    }
                }
            }
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "{checks} moment checks within {BAND} sigma at S = {S}, max |z| = {worst_z:.2}"
        ))
    } else {
        Err(format!(
            "{} of {checks} outside {BAND} sigma: {}",
            failures.len(),
            failures.join("; ")
        ))
    }
}

fn criterion_5() -> Outcome {
    const TOL: f64 = 1e-3;
    let mut worst = 0.0f64;
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let c = chi(&LambdaMeasure::canonical(alpha), 2, 40)
            .map_err(|e| e.to_string())?
            .value;
        worst = worst.max((c - alpha).abs());
        ensure((c - alpha).abs() < TOL, || format!("alpha={alpha}: chi = {c}"))?;
    }
    Ok(format!("max |chi - alpha| = {worst:.1e}"))
}

fn mean_mass(sampler: &dyn MeasureSampler, samples: u64) -> Result<f64, String> {
    let mut sum = 0.0;
    for id in 0..samples {
        sum += sampler.sample(6, id).map_err(|e| e.to_string())?.field.total_mass();
    }
    Ok(sum / samples as f64)
}

fn criterion_6() -> Outcome {
    const S: u64 = 256;
    let tol = 4.0 / (S as f64).sqrt();
    let gmc = |gamma, d, m, kernel, bump| -> Result<Box<dyn MeasureSampler>, String> {
        let s = GmcSampler::new(&GmcConfig {
            gamma,
            d,
            b: 2,
            m,
            grid_level: m,
            kernel,
            bump,
        })
        .map_err(|e| e.to_string())?;
        Ok(Box::new(s))
    };
    let g1 = BAdicGrid::new(1, 2, 12).unwrap();
    let cascade = |law| -> Result<Box<dyn MeasureSampler>, String> {
        Ok(Box::new(CascadeSampler::new(law, g1, 12).map_err(|e| e.to_string())?))
    };
    let cover = |a| -> Result<Box<dyn MeasureSampler>, String> {
        Ok(Box::new(
            CoveringSampler::new(LambdaMeasure::canonical(0.5), a, g1, 12).map_err(|e| e.to_string())?,
        ))
    };
    let models: Vec<(&str, Box<dyn MeasureSampler>)> = vec![
        (
            "gmc exact-log d=1",
            gmc(0.5, 1, 12, KernelKind::ExactLog, ExpBump::default())?,
        ),
        (
            "gmc star-scale d=1",
            gmc(0.5, 1, 12, KernelKind::StarScale, ExpBump::default())?,
        ),
        (
            "gmc star-scale d=2",
            gmc(0.8, 2, 6, KernelKind::StarScale, ExpBump::default())?,
        ),
        (
            "cascade discrete",
            cascade(WeightLaw::Discrete {
                values: vec![0.5, 1.5],
                probs: vec![0.5, 0.5],
            })?,
        ),
        ("cascade lognormal", cascade(WeightLaw::LogNormal { sigma: 0.4 })?),
        (
            "cascade gbm",
            Box::new(CascadeSampler::gbm((2f64.ln()).sqrt() / 2.0, g1, 12).map_err(|e| e.to_string())?),
        ),
        ("mrc", cover(None)?),
        ("pmc a=0.3", cover(Some(0.3))?),
    ];
    let mut parts = Vec::new();
    for (name, s) in &models {
        let start = Instant::now();
        let m = mean_mass(s.as_ref(), S)?;
        let took = start.elapsed();
        ensure((m - 1.0).abs() < tol, || {
            format!("{name}: mean mass {m:.4}, tolerance {tol}")
        })?;
        ensure(took < Duration::from_secs(120), || {
            format!("{name}: {took:?} over budget")
        })?;
        parts.push(format!("{name} {m:.3}"));
    }
    Ok(parts.join(", "))
}

fn experiment(
    model: ModelConfig,
    d: usize,
    m: u32,
    samples: u64,
    estimators: Vec<EstimatorConfig>,
) -> ExperimentConfig {
    ExperimentConfig {
        model,
        grid: GridConfig {
            d,
            b: 2,
            m,
            grid_level: None,
        },
        ensemble: EnsembleConfig {
            samples,
            master_seed: 7,
        },
        estimators,
        output: None,
    }
}

fn fourier() -> EstimatorConfig {
    EstimatorConfig::Fourier {
        mode: FourierMode::EnsembleMean,
        trim: None,
        tolerance: None,
    }
}

fn slope(out: &RunOutput, name: &str) -> Result<f64, String> {
    out.record
        .estimates
        .iter()
        .find(|e| e.estimator == name)
        .map(|e| e.estimate.slope)
        .ok_or_else(|| format!("no {name} estimate"))
}

fn criterion_7() -> Outcome {
    let threads = resolve_threads(None);
    let run = |cfg: &ExperimentConfig, budget: u64| -> Result<RunOutput, String> {
        let start = Instant::now();
        let out = run_experiment(cfg, threads).map_err(|e| e.to_string())?;
        ensure(start.elapsed() < Duration::from_secs(budget), || {
            format!("{:?} over budget", start.elapsed())
        })?;
        Ok(out)
    };
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    let mut check = |label: &str, est: f64, lo: f64, hi: f64| {
        let ok = est >= lo && est <= hi;
        parts.push(format!("{label} {est:.3} in [{lo:.2}, {hi:.2}]"));
        if !ok {
            failures.push(format!("{label} = {est:.4} outside [{lo:.3}, {hi:.3}]"));
        }
    };

    let gmc1 = experiment(
        ModelConfig::Gmc {
            gamma: 0.5,
            kernel: KernelKind::ExactLog,
            bump: None,
        },
        1,
        12,
        64,
        vec![
            fourier(),
            EstimatorConfig::Corrdim {
                levels: None,
                tolerance: None,
            },
        ],
    );
    let out = run(&gmc1, 600)?;
    let dg = d_gamma(0.5, 1).unwrap();
    check(
        "gmc d=1 fourier",
        slope(&out, "fourier-ensemble")?,
        dg - 0.15,
        dg + 0.15,
    );
    check("gmc d=1 corrdim", slope(&out, "corrdim")?, dg - 0.10, dg + 0.10);

    let gmc2 = experiment(
        ModelConfig::Gmc {
            gamma: 0.8,
            kernel: KernelKind::StarScale,
            bump: Some(ExpBump::new(0.001, 0.05).unwrap()),
        },
        2,
        6,
        32,
        vec![fourier()],
    );
    let out = run(&gmc2, 900)?;
    let dg = d_gamma(0.8, 2).unwrap();
    check(
        "gmc d=2 fourier",
        slope(&out, "fourier-ensemble")?,
        dg - 0.25,
        dg + 0.25,
    );

    let mrc = experiment(
        ModelConfig::Mrc {
            lambda: LambdaSpec::canonical(0.5),
        },
        1,
        14,
        64,
        vec![
            fourier(),
            EstimatorConfig::Boxdim {
                levels: None,
                tolerance: None,
            },
        ],
    );
    let out = run(&mrc, 600)?;
    check("mrc fourier", slope(&out, "fourier-ensemble")?, 0.5 - 0.15, 0.5 + 0.15);
    check("mrc boxdim", slope(&out, "boxdim")?, 0.5 - 0.10, 0.5 + 0.10);

    let sigma = (2f64.ln()).sqrt() / 2.0;
    let gbm = experiment(
        ModelConfig::Cascade {
            law: WeightLawSpec::Gbm { sigma },
        },
        1,
        12,
        64,
        vec![fourier()],
    );
    let out = run(&gbm, 600)?;
    let ds = d_sigma(sigma, 2).unwrap();
    check(
        "gbm fourier",
        slope(&out, "fourier-ensemble")?,
        ds - 0.15,
        f64::INFINITY,
    );

    if failures.is_empty() {
        Ok(parts.join(", "))
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_8() -> Outcome {
    const PARSEVAL_TOL: f64 = 1e-8;
    const SLOPE_TOL: f64 = 1e-6;
    const ZERO_TOL: f64 = 1e-12;
    let grid = BAdicGrid::new(1, 2, 10).unwrap();
    let s = GmcSampler::new(&GmcConfig {
        gamma: 0.5,
        d: 1,
        b: 2,
        m: 10,
        grid_level: 10,
        kernel: KernelKind::ExactLog,
        bump: ExpBump::default(),
    })
    .map_err(|e| e.to_string())?;
    let field = s.sample(1, 0).map_err(|e| e.to_string())?.field;
    let spec = fourier_coefficients(&field, grid.cells_per_axis() / 2).map_err(|e| e.to_string())?;
    let energy = spec.nyquist_energy().map_err(|e| e.to_string())?;
    let direct = grid.cell_volume() * field.values().iter().map(|v| v * v).sum::<f64>();
    let parseval = (energy - direct).abs() / direct;
    ensure(parseval < PARSEVAL_TOL, || {
        format!("Parseval relative error {parseval:e}")
    })?;

    let mut worst_slope = 0.0f64;
    for (d, n_max) in [(1usize, 4096usize), (2, 256)] {
        for want in [0.5, 1.0, 1.7] {
            let synth = FourierSpectrum::from_fn(d, n_max, |n| {
                let r2: f64 = n.iter().map(|&k| (k * k) as f64).sum();
                if r2 == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(r2.powf(-want / 4.0), 0.0)
                }
            })
            .map_err(|e| e.to_string())?;
            let est = estimate_fourier_dim(&[synth], 2, FourierMode::EnsembleMean, BandTrim::default())
                .map_err(|e| e.to_string())?;
            let err = (est.slope - want).abs();
            worst_slope = worst_slope.max(err);
            ensure(err < SLOPE_TOL, || format!("d={d} D={want}: slope {}", est.slope))?;
        }
    }

    let mut worst_zero = 0.0f64;
    for (d, level) in [(1usize, 10u32), (2, 5)] {
        let g = BAdicGrid::new(d, 2, level).unwrap();
        let unit = DensityField::unit(g);
        let spec = fourier_coefficients(&unit, g.cells_per_axis() / 2).map_err(|e| e.to_string())?;
        let mut bad = None;
        spec.for_each(|n, c| {
            let zero = n.iter().all(|&k| k == 0);
            let dev = if zero {
                (c - Complex64::new(1.0, 0.0)).norm()
            } else {
                c.norm()
            };
            worst_zero = worst_zero.max(dev);
            if dev > ZERO_TOL && bad.is_none() {
                bad = Some(format!("d={d} n={n:?}: {c}"));
            }
        });
        if let Some(b) = bad {
            return Err(format!("Lebesgue spectrum {b}"));
        }
    }
    Ok(format!(
        "Parseval {parseval:.1e}, slope error {worst_slope:.1e}, Lebesgue off-zero {worst_zero:.1e}"
    ))
}

fn run_binary(config: &Path, out: &Path, threads: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_mchaos"))
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        String::from_utf8_lossy(&status.stderr).into_owned()
    })?;
    std::fs::read(out.join("record.json")).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        experiment(
            ModelConfig::Gmc {
                gamma: 0.5,
                kernel: KernelKind::ExactLog,
                bump: None,
            },
            1,
            10,
            16,
            vec![
                fourier(),
                EstimatorConfig::Corrdim {
                    levels: None,
                    tolerance: None,
                },
            ],
        ),
        experiment(
            ModelConfig::Mrc {
                lambda: LambdaSpec::canonical(0.5),
            },
            1,
            10,
            16,
            vec![
                fourier(),
                EstimatorConfig::Boxdim {
                    levels: None,
                    tolerance: None,
                },
            ],
        ),
    ];
    let mut runs = 0;
    for (c, cfg) in configs.iter().enumerate() {
        let path = dir.path().join(format!("config{c}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).map_err(|e| e.to_string())?;
        let reference = run_binary(&path, &dir.path().join(format!("out{c}_ref")), 1)?;
        for (k, threads) in [1usize, 2, 4, 8].into_iter().enumerate() {
            let again = run_binary(&path, &dir.path().join(format!("out{c}_{k}")), threads)?;
            runs += 1;
            ensure(again == reference, || {
                format!("config {c}: record differs at {threads} threads")
            })?;
        }
    }
    Ok(format!("{runs} repeated runs byte-identical at 1, 2, 4 and 8 threads"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 closed-form optimizer equivalence", criterion_1, 1),
        ("2 exact-log telescoping", criterion_2, 1),
        ("3 star-scale reconstruction", criterion_3, 30),
        ("4 covering moment oracles", criterion_4, 120),
        ("5 chi computation", criterion_5, 1),
        ("6 martingale mean", criterion_6, 16 * 60),
        ("7 statistical dimension reproduction", criterion_7, 45 * 60),
        ("8 spectral exactness", criterion_8, 10),
        ("9 determinism", criterion_9, 60),
    ];
    let mut failed = Vec::new();
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let mut outcome = f();
        let took = start.elapsed();
        if outcome.is_ok() && took > Duration::from_secs(budget) {
            outcome = Err(format!("took {took:.1?}, budget {budget} s"));
        }
        match &outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail}; {took:.2?})"),
            Err(why) => {
                println!("criterion {name}: FAIL ({why}; {took:.2?})");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
