use proptest::prelude::*;

use hgf_core::decay_estimates::{sup_trend, Envelope, ProbeReport};
use hgf_core::geometry::{scalar_curvature, ConformalMetric};
use hgf_core::harness::{fit_exponent, LifespanRecord};
use hgf_core::nonlinear_solver::BreakdownReason;
use hgf_core::stencil::{d1, laplacian, Axis};
use hgf_core::{Field, Grid};

fn record(epsilon: f64, t_star: f64) -> LifespanRecord {
    LifespanRecord {
        epsilon,
        t_star,
        censored: false,
        reason: BreakdownReason::AmplitudeCap,
        peak_weighted_n2: 0.0,
        max_bootstrap_weight: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_is_continuous_across_the_cone(a in 0.1f64..10.0, k in 1.05f64..4.0, t in 0.0f64..100.0) {
        let env = Envelope::new(a, k).unwrap();
        let inside = env.interior(t, t);
        let outside = env.exterior(t, t);
        prop_assert!((inside - outside).abs() <= 1e-12 * inside);
        let eta = 1e-7;
        prop_assert!((env.value(t, t + eta) - env.value(t, t)).abs() <= 1e-6 * inside);
    }

    #[test]
    fn envelope_decays_along_rays(a in 0.1f64..10.0, k in 1.05f64..4.0, r in 0.0f64..50.0, dt in 0.01f64..20.0, c in 0.0f64..20.0) {
        let env = Envelope::new(a, k).unwrap();
        // fixed point inside the cone
        prop_assert!(env.value(r + dt, r) <= env.value(r, r));
        // outgoing ray |x| = t + c outside the cone
        prop_assert!(env.value(r + dt, r + dt + c) <= env.value(r, r + c) * (1.0 + 1e-12));
        prop_assert!(env.value(r, r + c) <= a);
    }

    #[test]
    fn probe_verdict_is_scale_invariant(trend in prop::collection::vec(0.01f64..5.0, 2..6), scale in 1e-3f64..1e3) {
        let horizons: Vec<f64> = (1..=trend.len()).map(|i| i as f64).collect();
        let samples: Vec<(f64, f64)> = horizons.iter().cloned().zip(trend.iter().cloned()).collect();
        let scaled: Vec<(f64, f64)> = samples.iter().map(|(t, c)| (*t, c * scale)).collect();
        let a = ProbeReport::from_trend("p", "s", horizons.clone(), sup_trend(&samples, &horizons), 2.0);
        let b = ProbeReport::from_trend("p", "s", horizons.clone(), sup_trend(&scaled, &horizons), 2.0);
        prop_assert_eq!(a.pass, b.pass);
        prop_assert!((a.growth() - b.growth()).abs() <= 1e-12 * a.growth());
        prop_assert!(a.trend.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn fit_recovers_power_laws(slope in -3.0f64..-0.2, delta in 0.01f64..100.0, n in 3usize..8) {
        let records: Vec<_> = (0..n).map(|i| {
            let eps = 0.8 * 0.6f64.powi(i as i32);
            record(eps, delta * eps.powf(slope))
        }).collect();
        let fit = fit_exponent(&records).unwrap();
        prop_assert!((fit.slope.unwrap() - slope).abs() < 1e-9);
        prop_assert!((fit.intercept.unwrap() - delta.ln()).abs() < 1e-8);
    }

    #[test]
    fn stencils_are_exact_on_quartics(c in prop::array::uniform6(-2.0f64..2.0), h in 0.05f64..0.5) {
        let g = Grid::square(12.0 * h, 25).unwrap();
        let [a, b, p, q, r, s] = c;
        let f = Field::from_fn(g, |x, y| a * x.powi(4) + b * x * x * y * y + p * y.powi(3) + q * x * y + r * x + s);
        let lap = laplacian(&f).unwrap();
        let want = Field::from_fn(g, |x, y| 12.0 * a * x * x + 2.0 * b * (x * x + y * y) + 6.0 * p * y);
        let err = lap.zip_with(&want, |u, v| u - v).unwrap().max_abs();
        prop_assert!(err <= 1e-8 * (1.0 + want.max_abs()), "{}", err);
        let dx = d1(&f, Axis::X1).unwrap();
        let want = Field::from_fn(g, |x, y| 4.0 * a * x.powi(3) + 2.0 * b * x * y * y + q * y + r);
        let err = dx.zip_with(&want, |u, v| u - v).unwrap().max_abs();
        prop_assert!(err <= 1e-8 * (1.0 + want.max_abs()), "{}", err);
    }

    #[test]
    fn curvature_scales_inversely_with_the_metric(lambda in 0.01f64..100.0, w in 0.1f64..1.5) {
        let g = Grid::square(2.0, 41).unwrap();
        let v = Field::from_fn(g, |x, y| (w * (x * x - 0.5 * y * y)).exp() / (1.0 + x * x + y * y));
        let r = scalar_curvature(&ConformalMetric::new(v.clone()).unwrap()).unwrap();
        let rs = scalar_curvature(&ConformalMetric::new(v.scaled(lambda)).unwrap()).unwrap();
        let err = rs.zip_with(&r, |a, b| lambda * a - b).unwrap().max_abs();
        prop_assert!(err <= 1e-9 * (1.0 + r.max_abs()), "{}", err);
    }
}
