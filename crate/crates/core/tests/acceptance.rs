//! End-to-end acceptance checks. Each criterion prints one line
//! `ACn PASS|FAIL <detail>`; the process fails if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hgf_core::data::{DataFamily, DecayParams, InitialData};
use hgf_core::decay_estimates::{
    divergence_source_probe, energy_probe_s, log_log_slope, lp_source_probe, poisson_snapshots, product_source_probe,
    random_band_limited, verify_envelope, EnergyCase, Envelope, ProbeReport, ProbeSettings, ProductFactor,
};
use hgf_core::geometry::{conformal_factor, flow_residual, scalar_curvature, ConformalMetric};
use hgf_core::harness::{check_lower_bound, fit_exponent, sweep, BoundVerdict, LifespanRecord, SweepConfig};
use hgf_core::nonlinear_solver::{run, BreakdownReason, RunConfig};
use hgf_core::stencil::Axis;
use hgf_core::vector_fields::{commutator_suite, klainerman_inequality_probe, FieldOp, Jet, EXACT_FLOOR};
use hgf_core::wave_kernel::{
    fit_kovalyov_constants, kovalyov_sample, poisson_eval, spectral_solve_periodic, QuadratureSpec, SourceKind, SourceTerm,
    TorusOracleSpec,
};
use hgf_core::{Field, Grid};

type Outcome = Result<(bool, String), String>;

fn gaussian() -> InitialData<f64> {
    InitialData::new(|x: f64, y: f64| (-(x * x + y * y)).exp(), |_, _| 0.0).with_gradient(|x, y| {
        let e = (-(x * x + y * y)).exp();
        [-2.0 * x * e, -2.0 * y * e]
    })
}

fn bump(x: f64, y: f64) -> f64 {
    (-(x * x + y * y)).exp()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    // sample points are nodes of the 129 x 129 grid on [-8, 8]^2, which are
    // also nodes of the oracle torus [-16, 16)^2 with 256 modes per axis
    let sample_grid = Grid::square(8.0, 129).map_err(e)?;
    let spec = TorusOracleSpec::new(16.0, 256, 0.25).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xac01);
    let mut picks: Vec<(f64, usize, usize)> = (0..20)
        .map(|_| (rng.gen_range(0.5..4.0), rng.gen_range(32..97usize), rng.gen_range(32..97usize)))
        .collect();
    picks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let times: Vec<f64> = picks.iter().map(|p| p.0).collect();
    let data = gaussian();
    let states = spectral_solve_periodic(&data, &[], &spec, &times).map_err(e)?;
    let quad = QuadratureSpec::default();
    let peak = 1.0;
    let mut worst = 0.0f64;
    for ((t, i, j), s) in picks.iter().zip(&states) {
        let x = (sample_grid.x1(*i), sample_grid.x2(*j));
        let p = poisson_eval(*t, x, &data, &quad).map_err(e)?;
        let (ti, tj) = (i + 64, j + 64);
        let o = s.u.at(ti, tj);
        let (ox, oy) = s.grid().coords(tj * s.grid().nx + ti);
        if (ox - x.0).abs() > 1e-12 || (oy - x.1).abs() > 1e-12 {
            return Err(format!("node mismatch at {x:?}"));
        }
        worst = worst.max((p - o).abs() / peak);
    }
    let secs = start.elapsed();
    Ok((worst <= 1e-3 && secs <= Duration::from_secs(60), format!("max rel diff {worst:.3e} over 20 points, {secs:.1?}")))
}

fn exact_cases() -> Outcome {
    let quad = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac02);
    let one = InitialData::constant(1.0, 0.0);
    let c: f64 = 0.75;
    let vel = InitialData::constant(0.0, c);
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let t = rng.gen_range(0.1..10.0);
        let x = (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        e1 = e1.max((poisson_eval::<f64>(t, x, &one, &quad).map_err(e)? - 1.0).abs());
        e2 = e2.max((poisson_eval::<f64>(t, x, &vel, &quad).map_err(e)? - c * t).abs());
    }
    Ok((e1 <= 1e-6 && e2 <= 1e-6, format!("constant err {e1:.2e}, linear-in-time err {e2:.2e}")))
}

fn decay_envelope() -> Outcome {
    let start = Instant::now();
    let params = DecayParams::new(1.0, 2.0, 1.0).map_err(e)?;
    let data = InitialData::from_family(DataFamily::Rational, params, 1.0).map_err(e)?;
    let ray = Grid::ray(80.0, 161).map_err(e)?;
    let times: Vec<f64> = (1..=40).map(f64::from).collect();
    let sol = poisson_snapshots(&data, &times, &ray, &QuadratureSpec::default()).map_err(e)?;
    let report = verify_envelope(&sol, &Envelope::new(1.0, 2.0).map_err(e)?).map_err(e)?;
    let centre: Vec<(f64, f64)> = sol.iter().map(|(t, f)| (1.0 + t, f[0].abs())).collect();
    let slope = log_log_slope(&centre).map_err(e)?;
    let secs = start.elapsed();
    let ok = report.pass && (-1.25..=-0.75).contains(&slope) && secs <= Duration::from_secs(600);
    Ok((ok, format!("sup ratio T=20 {:.4}, T=40 {:.4}; centreline slope {slope:.4}; {secs:.1?}", report.trend[0], report.trend[1])))
}

fn kovalyov() -> Outcome {
    let a = fit_kovalyov_constants(&kovalyov_sample(100).map_err(e)?).map_err(e)?;
    let b = fit_kovalyov_constants(&kovalyov_sample(200).map_err(e)?).map_err(e)?;
    let change = |x: f64, y: f64| (y - x).abs() / x;
    let ci = change(a.c_interior, b.c_interior);
    let cc = change(a.c_crossing, b.c_crossing);
    let finite = [a.c_interior, a.c_crossing, b.c_interior, b.c_crossing].iter().all(|c| c.is_finite() && *c > 0.0);
    Ok((
        finite && ci < 0.25 && cc < 0.25 && a.n_interior > 0 && a.n_crossing > 0,
        format!(
            "interior C {:.4} -> {:.4} ({:.1}%), crossing C {:.4} -> {:.4} ({:.1}%)",
            a.c_interior,
            b.c_interior,
            100.0 * ci,
            a.c_crossing,
            b.c_crossing,
            100.0 * cc
        ),
    ))
}

fn commutators() -> Outcome {
    let recs = commutator_suite(3.0, 0.1, 3, 0.7).map_err(e)?;
    let mut worst_order = f64::INFINITY;
    let mut exact = 0;
    let mut ok = true;
    let mut l0_order = f64::INFINITY;
    let mut groups = 0;
    for chunk in recs.chunks(3) {
        groups += 1;
        if chunk.iter().all(|r| r.residual <= EXACT_FLOOR) {
            exact += 1;
            continue;
        }
        let o = chunk.iter().filter_map(|r| r.order_estimate).fold(f64::INFINITY, f64::min);
        worst_order = worst_order.min(o);
        if chunk[0].op == FieldOp::L0 {
            l0_order = l0_order.min(o);
        }
        ok &= o >= 2.0;
    }
    let ops: std::collections::BTreeSet<String> = recs.iter().map(|r| r.op.to_string()).collect();
    ok &= ops.len() == 7 && l0_order >= 2.0;
    Ok((
        ok,
        format!("{groups} generator/function pairs, {exact} exact to rounding, min observed order {worst_order:.2}, L0 order {l0_order:.2}"),
    ))
}

fn curvature() -> Outcome {
    let g = Grid::square(1.0, 101).map_err(e)?;
    let m = ConformalMetric::new(Field::from_fn(g, |x, y| 4.0 / (1.0 + x * x + y * y).powi(2))).map_err(e)?;
    let r = scalar_curvature(&m).map_err(e)?;
    let err = r.map(|v| v - 2.0).max_abs_where(|x, y| x.abs() <= 0.8 + 1e-9 && y.abs() <= 0.8 + 1e-9);
    Ok((err <= 1e-4, format!("max |R - 2| on the interior 80% = {err:.3e} (h = 0.02)")))
}

fn reduction_chain() -> Outcome {
    let residual = |n: usize, dt: f64| -> Result<f64, String> {
        let params = DecayParams::new(1.0, 2.0, 0.1).map_err(e)?;
        let mut c = RunConfig::new(16.0, n, DataFamily::Rational, params, 1.0 + 2.0 * dt);
        c.fixed_dt = Some(dt);
        c.snapshot_stride = dt;
        c.monitor_norms = false;
        let out = run::<f64>(&c).map_err(e)?;
        let k = out.snapshots.len();
        let v: Vec<_> = out.snapshots[k - 5..].iter().map(|s| conformal_factor(&s.u)).collect();
        Ok(flow_residual(&v, dt).map_err(e)?.max_abs_where(|x, y| x.hypot(y) <= 8.0))
    };
    let coarse = residual(161, 0.1)?;
    let fine = residual(321, 0.05)?;
    let ratio = coarse / fine;
    Ok((ratio >= 4.0, format!("residual at t = 1: {coarse:.3e} -> {fine:.3e}, ratio {ratio:.2}")))
}

fn linearization() -> Outcome {
    let quad = QuadratureSpec::new(64, 64).map_err(e)?;
    let lin = InitialData::from_family(DataFamily::Rational, DecayParams::new(1.0, 2.0, 1.0).map_err(e)?, 1.0).map_err(e)?;
    let discrepancy = |eps: f64| -> Result<f64, String> {
        let mut c = RunConfig::new(16.0, 161, DataFamily::Rational, DecayParams::new(1.0, 2.0, eps).map_err(e)?, 2.0);
        c.monitor_norms = false;
        let out = run::<f64>(&c).map_err(e)?;
        let s = out.snapshots.last().ok_or("no snapshot")?;
        let g = s.grid();
        let mut worst = 0.0f64;
        for j in (0..g.ny).step_by(4) {
            for i in (0..g.nx).step_by(4) {
                let x = (g.x1(i), g.x2(j));
                if x.0.hypot(x.1) > 6.0 {
                    continue;
                }
                let phi = poisson_eval(2.0, x, &lin, &quad).map_err(e)?;
                worst = worst.max((s.u.at(i, j) / eps - phi).abs());
            }
        }
        Ok(worst)
    };
    let a = discrepancy(0.2)?;
    let b = discrepancy(0.1)?;
    Ok((a / b >= 1.8, format!("max |u/eps - phi_lin| at t = 2: eps 0.2 {a:.3e}, eps 0.1 {b:.3e}, factor {:.2}", a / b)))
}

fn lifespan() -> Outcome {
    let start = Instant::now();
    let synthetic: Vec<LifespanRecord> = [0.8, 0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&eps: &f64| LifespanRecord {
            epsilon: eps,
            t_star: 3.0 * eps.powf(-4.0 / 3.0),
            censored: false,
            reason: BreakdownReason::AmplitudeCap,
            peak_weighted_n2: 0.0,
            max_bootstrap_weight: 0.0,
        })
        .collect();
    let slope = fit_exponent(&synthetic).map_err(e)?.slope.ok_or("synthetic fit insufficient")?;
    let a = (slope + 4.0 / 3.0).abs() <= 1e-10;

    let template = RunConfig::new(40.0, 321, DataFamily::Rational, DecayParams::new(1.0, 2.0, 0.2).map_err(e)?, 30.0);
    let cfg = SweepConfig { epsilons: vec![0.2, 0.4, 0.8], budget: 30.0, workers: None, run: template };
    let records = sweep(&cfg, 1).map_err(|err| err.to_string())?;
    let fit = fit_exponent(&records).map_err(e)?;
    let checks = check_lower_bound(&records, fit.delta_cal).map_err(e)?;
    let b = checks.iter().zip(&records).all(|(c, r)| r.censored || c.verdict == BoundVerdict::Pass);
    let c = records.iter().filter(|r| r.epsilon <= 0.2).all(|r| r.censored || r.t_star >= 10.0);
    let summary: Vec<String> = records.iter().map(|r| format!("eps {} -> {} at {:.2}", r.epsilon, r.reason, r.t_star)).collect();
    let secs = start.elapsed();
    Ok((
        a && b && c && secs <= Duration::from_secs(1800),
        format!(
            "(a) slope {slope:.12} (b) {b} (c) {c}; {}; delta_cal {:.4}; {secs:.1?}",
            summary.join(", "),
            fit.delta_cal
        ),
    ))
}

fn probes() -> Outcome {
    let settings = ProbeSettings::default();
    let l = settings.torus.period_l;
    let mut reports: Vec<ProbeReport> = Vec::new();

    let mut cases: Vec<EnergyCase<f64>> =
        (0..3).map(|seed| EnergyCase { data: random_band_limited(seed, 12, 6, l), sources: vec![] }).collect();
    cases.push(EnergyCase { data: gaussian(), sources: vec![SourceTerm::stationary(SourceKind::Plain, 1.0, bump)] });
    for s in [0, 1] {
        reports.push(energy_probe_s(&cases, s, &settings).map_err(e)?);
    }

    let space = [SourceTerm::stationary(SourceKind::SpaceDerivative(Axis::X1), 1.0, bump)];
    reports.push(divergence_source_probe(&space, &settings).map_err(e)?);
    let time = [SourceTerm::new(SourceKind::TimeDerivative, 1.0, |tau: f64, x, y| tau.cos() * bump(x, y))];
    reports.push(divergence_source_probe(&time, &settings).map_err(e)?);

    let still = [SourceTerm::stationary(SourceKind::Plain, 1.0, bump)];
    reports.push(lp_source_probe(&still, 2.0, &settings).map_err(e)?);
    let moving = [SourceTerm::new(SourceKind::Plain, 1.0, |tau: f64, x: f64, y| bump(x - 0.25 * tau, y))];
    reports.push(lp_source_probe(&moving, 2.0, &settings).map_err(e)?);

    let g = ProductFactor::stationary(bump);
    reports.extend(product_source_probe(&g, &g, &settings).map_err(e)?);

    let times: Vec<f64> = settings.sample_times();
    let states = spectral_solve_periodic(&gaussian(), &[], &settings.torus, &times).map_err(e)?;
    let jets = states.iter().map(|s| Jet::linear(s, 4, None)).collect::<Result<Vec<_>, _>>().map_err(e)?;
    reports.push(klainerman_inequality_probe(&jets, 2, &settings.horizons, settings.slack).map_err(e)?);

    let ok = reports.iter().all(|r| r.pass);
    let detail: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.3}->{:.3}", r.probe, r.trend.first().copied().unwrap_or(0.0), r.trend.last().copied().unwrap_or(0.0)))
        .collect();
    Ok((ok, detail.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("AC1 oracle equivalence", oracle_equivalence),
        ("AC2 exact constant and linear cases", exact_cases),
        ("AC3 decay envelope", decay_envelope),
        ("AC4 kernel bounds", kovalyov),
        ("AC5 commutator suite", commutators),
        ("AC6 curvature exactness", curvature),
        ("AC7 reduction chain", reduction_chain),
        ("AC8 linearization", linearization),
        ("AC9 life-span pipeline", lifespan),
        ("AC10 inequality probes", probes),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(v) => v,
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{name}: {} | {detail} | {:.1?}", if ok { "PASS" } else { "FAIL" }, start.elapsed());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
