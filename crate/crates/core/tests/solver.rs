use hgf_core::data::{DataFamily, DecayParams, InitialData};
use hgf_core::harness::{sweep, SweepConfig};
use hgf_core::nonlinear_solver::{energy_lemma24_diagnostic, run, BreakdownReason, Equation, RunConfig};
use hgf_core::wave_kernel::{poisson_eval, QuadratureSpec};

fn gaussian_config(half_width: f64, nodes: usize, eps: f64, t_max: f64) -> RunConfig {
    let params = DecayParams::new(1.0, 2.0, eps).unwrap();
    let mut c = RunConfig::new(half_width, nodes, DataFamily::GaussianTail, params, t_max);
    c.monitor_norms = false;
    c
}

/// Max error of the linear scheme at `t = 1` against the Poisson formula,
/// sampled on the points `0.4 Z^2` with `|x| <= 4`.
fn linear_error(nodes: usize) -> f64 {
    let mut c = gaussian_config(8.0, nodes, 1.0, 1.0);
    c.equation = Equation::Linear;
    c.fixed_dt = Some(0.5 * c.h());
    c.snapshot_stride = 1.0;
    let out = run::<f64>(&c).unwrap();
    let s = out.snapshots.last().unwrap();
    assert!((s.t - 1.0).abs() < 1e-12);
    let data = InitialData::from_family(DataFamily::GaussianTail, c.params, 1.0).unwrap();
    let quad = QuadratureSpec::new(64, 64).unwrap();
    let stride = ((0.4 / c.h()).round()) as usize;
    let g = s.grid();
    let mut worst = 0.0f64;
    for j in (0..g.ny).step_by(stride) {
        for i in (0..g.nx).step_by(stride) {
            let x = (g.x1(i), g.x2(j));
            if x.0.hypot(x.1) <= 4.0 {
                worst = worst.max((s.u.at(i, j) - poisson_eval(1.0, x, &data, &quad).unwrap()).abs());
            }
        }
    }
    worst
}

#[test]
fn linear_scheme_converges_at_high_order() {
    let coarse = linear_error(81);
    let fine = linear_error(161);
    assert!(coarse / fine >= 8.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn interior_is_independent_of_the_outer_boundary() {
    // same spacing h = 0.1 on two domains
    let small = run::<f64>(&gaussian_config(6.0, 121, 0.2, 2.0)).unwrap();
    let large = run::<f64>(&gaussian_config(10.0, 201, 0.2, 2.0)).unwrap();
    let (a, b) = (small.snapshots.last().unwrap(), large.snapshots.last().unwrap());
    assert!((a.t - b.t).abs() < 1e-12);
    let mut worst = 0.0f64;
    for j in 0..a.grid().ny {
        for i in 0..a.grid().nx {
            let (x, y) = (a.grid().x1(i), a.grid().x2(j));
            if x.hypot(y) <= 2.5 {
                worst = worst.max((a.u.at(i, j) - b.u.at(i + 40, j + 40)).abs());
            }
        }
    }
    assert!(worst < 1e-8 * a.u.max_abs(), "{worst:e}");
}

#[test]
fn small_data_survives_and_large_data_breaks_down() {
    let mut quiet = gaussian_config(8.0, 81, 0.05, 2.0);
    quiet.monitor_norms = true;
    let out = run::<f64>(&quiet).unwrap();
    assert_eq!(out.breakdown.reason, BreakdownReason::None);
    assert!(out.breakdown.is_censored());
    assert_eq!(out.norms.len(), out.snapshots.len());
    assert!(energy_lemma24_diagnostic(&out.snapshots).unwrap().pass);

    let params = DecayParams::new(1.0, 2.0, 3.0).unwrap();
    let mut loud = RunConfig::new(8.0, 81, DataFamily::Rational, params, 10.0);
    loud.monitor_norms = false;
    let out = run::<f64>(&loud).unwrap();
    assert_ne!(out.breakdown.reason, BreakdownReason::None);
    assert!(out.breakdown.time < 10.0);
}

#[test]
fn single_precision_run_matches_double() {
    let c = gaussian_config(6.0, 61, 0.2, 1.0);
    let a = run::<f64>(&c).unwrap();
    let b = run::<f32>(&c).unwrap();
    let (ua, ub) = (&a.snapshots.last().unwrap().u, &b.snapshots.last().unwrap().u);
    let diff = ua.values().iter().zip(ub.values()).map(|(x, y)| (x - f64::from(*y)).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-5, "{diff:e}");
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let cfg = SweepConfig {
        epsilons: vec![0.1, 1.5, 3.0],
        budget: 3.0,
        workers: None,
        run: RunConfig::new(6.0, 41, DataFamily::Rational, DecayParams::new(1.0, 2.0, 1.0).unwrap(), 3.0),
    };
    let one = sweep(&cfg, 1).unwrap();
    let two = sweep(&cfg, 2).unwrap();
    assert_eq!(one.len(), 3);
    for (a, b) in one.iter().zip(&two) {
        assert_eq!(a.epsilon, b.epsilon);
        assert_eq!(a.t_star, b.t_star);
        assert_eq!(a.reason, b.reason);
        assert_eq!(a.censored, b.censored);
    }
    assert!(one.windows(2).all(|w| w[0].epsilon > w[1].epsilon));
}
