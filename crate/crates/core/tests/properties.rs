use std::collections::BTreeSet;

use proptest::prelude::*;

use excessd::excess::excess_mortality;
use excessd::indexes::{
    build_index_table, discrepancy_index, rank_countries, CountryRecord, DcTriple, RankKey, Registry,
};
use excessd::ingest::{parse_covid, parse_deaths, DatasetBundle, FitWindow};
use excessd::optim::{minimize, SimplexConfig};
use excessd::regression::{fit_loglog, fit_natural, predict, DcPrediction, EmMethod, Observation};
use excessd::timeseries::{forecast, prediction_interval, run_smoother, AnnualSeries, HoltParams};

fn series(values: Vec<f64>) -> AnnualSeries {
    AnnualSeries::new("XX", 2010, values).unwrap()
}

fn params() -> impl Strategy<Value = HoltParams> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..5000.0f64, -200.0..200.0f64)
        .prop_map(|(a, g, l0, t0)| HoltParams::new(a, g, l0, t0).unwrap())
}

fn observations() -> impl Strategy<Value = Vec<Observation>> {
    prop::collection::vec((0.0..6.0f64, 0.0..5.0f64), 3..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (lx, ly))| Observation::new(format!("C{i}"), 10f64.powf(lx), 10f64.powf(ly)))
            .collect()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn forecast_is_linear_in_horizon(values in prop::collection::vec(0.0..1e5f64, 4..15), p in params()) {
        let fit = run_smoother(&series(values), p).unwrap();
        let f1 = forecast(&fit, 1).unwrap();
        for h in 1..6 {
            prop_assert!(close(forecast(&fit, h).unwrap(), f1 + (h as f64 - 1.0) * fit.final_trend, 1e-12));
        }
    }

    #[test]
    fn shift_equivariance(values in prop::collection::vec(0.0..1e5f64, 4..15), p in params(), c in 0.0..1e4f64) {
        let base = run_smoother(&series(values.clone()), p).unwrap();
        let shifted = run_smoother(
            &series(values.iter().map(|v| v + c).collect()),
            HoltParams { l0: p.l0 + c, ..p },
        ).unwrap();
        for (a, b) in base.fitted.iter().zip(&shifted.fitted) {
            prop_assert!(close(*a + c, *b, 1e-10));
        }
        prop_assert!(close(base.mad, shifted.mad, 1e-8));
        prop_assert!(close(forecast(&base, 2).unwrap() + c, forecast(&shifted, 2).unwrap(), 1e-10));
    }

    #[test]
    fn scale_equivariance(values in prop::collection::vec(0.0..1e5f64, 4..15), p in params(), k in 0.01..100.0f64) {
        let base = run_smoother(&series(values.clone()), p).unwrap();
        let scaled = run_smoother(
            &series(values.iter().map(|v| v * k).collect()),
            HoltParams { l0: p.l0 * k, t0: p.t0 * k, ..p },
        ).unwrap();
        prop_assert!(close(base.mad * k, scaled.mad, 1e-9));
        for h in 1..3 {
            let a = prediction_interval(&base, h, 0.95).unwrap();
            let b = prediction_interval(&scaled, h, 0.95).unwrap();
            prop_assert!(close(a.point * k, b.point, 1e-9));
            prop_assert!(close(a.half_width() * k, b.half_width(), 1e-9));
        }
    }

    #[test]
    fn interval_symmetric_and_widening(values in prop::collection::vec(0.0..1e5f64, 4..15), p in params()) {
        let fit = run_smoother(&series(values), p).unwrap();
        let mut prev = 0.0;
        for h in 1..5 {
            let iv = prediction_interval(&fit, h, 0.9).unwrap();
            prop_assert!(close(iv.upper - iv.point, iv.point - iv.lower, 1e-9));
            prop_assert!(iv.half_width() >= prev);
            prev = iv.half_width();
        }
    }

    #[test]
    fn trend_consistent_input_has_zero_residuals(p in params(), n in 4usize..12) {
        // each observation equals the prior one-step forecast
        let mut values = Vec::with_capacity(n);
        let (mut l, mut t) = (p.l0, p.t0);
        for _ in 0..n {
            let y = l + t;
            values.push(y);
            let l_new = p.alpha * y + (1.0 - p.alpha) * (l + t);
            t = p.gamma * (l_new - l) + (1.0 - p.gamma) * t;
            l = l_new;
        }
        prop_assume!(values.iter().all(|v| *v >= 0.0));
        let fit = run_smoother(&series(values), p).unwrap();
        prop_assert!(fit.residuals.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn anova_identity(obs in observations()) {
        prop_assume!(obs.iter().any(|o| o.x != obs[0].x));
        let fit = fit_loglog(&obs).unwrap();
        let a = &fit.anova;
        prop_assert!(((a.ss_regression + a.ss_error) - a.ss_total).abs() <= 1e-9 * a.ss_total.max(1e-300));
        prop_assert_eq!(a.df_error, fit.n - 2);
        prop_assert_eq!(fit.n + fit.excluded.len(), obs.len());
    }

    #[test]
    fn loglog_matches_normal_equations(obs in observations()) {
        let (lx, ly): (Vec<f64>, Vec<f64>) = obs.iter().map(|o| (o.x.log10(), o.y.log10())).unzip();
        let n = lx.len() as f64;
        let (sx, sy) = (lx.iter().sum::<f64>(), ly.iter().sum::<f64>());
        let sxx: f64 = lx.iter().map(|v| v * v).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        prop_assume!(det.abs() > 1e-6 * n * sxx);
        let fit = fit_loglog(&obs).unwrap();
        prop_assert!(close(fit.slope, (n * sxy - sx * sy) / det, 1e-10));
        prop_assert!(close(fit.intercept, (sy * sxx - sx * sxy) / det, 1e-10));
    }

    #[test]
    fn loglog_passes_through_geometric_centroid(obs in observations()) {
        let fit = fit_loglog(&obs).unwrap();
        let n = obs.len() as f64;
        let gx = 10f64.powf(obs.iter().map(|o| o.x.log10()).sum::<f64>() / n);
        let gy = 10f64.powf(obs.iter().map(|o| o.y.log10()).sum::<f64>() / n);
        prop_assert!(close(predict(&fit, gx).unwrap(), gy, 1e-9));
    }

    #[test]
    fn loglog_unit_scale_equivariance(obs in observations(), c in 0.001..1000.0f64) {
        let fit = fit_loglog(&obs).unwrap();
        let scaled: Vec<Observation> = obs.iter().map(|o| Observation::new(&o.country_code, o.x * c, o.y)).collect();
        let sfit = fit_loglog(&scaled).unwrap();
        prop_assert!(close(fit.slope, sfit.slope, 1e-9));
        prop_assert!(close(sfit.intercept, fit.intercept - fit.slope * c.log10(), 1e-9));
        for o in &obs {
            prop_assert!(close(predict(&fit, o.x).unwrap(), predict(&sfit, o.x * c).unwrap(), 1e-8));
        }
    }

    #[test]
    fn non_positive_points_never_influence(obs in observations(), bad in prop::collection::vec((-100.0..=0.0f64, -5.0..5.0f64), 1..5)) {
        let clean = fit_loglog(&obs).unwrap();
        let mut dirty = obs.clone();
        dirty.extend(bad.iter().enumerate().map(|(i, (x, y))| Observation::new(format!("B{i}"), *x, *y)));
        let fit = fit_loglog(&dirty).unwrap();
        prop_assert_eq!(fit.intercept, clean.intercept);
        prop_assert_eq!(fit.slope, clean.slope);
        prop_assert_eq!(fit.excluded.len(), bad.len());
    }

    #[test]
    fn natural_anova_identity(pts in prop::collection::vec((-1e4..1e4f64, -1e4..1e4f64), 3..30)) {
        let obs: Vec<Observation> = pts.iter().enumerate().map(|(i, (x, y))| Observation::new(format!("C{i}"), *x, *y)).collect();
        prop_assume!(pts.iter().any(|p| (p.0 - pts[0].0).abs() > 1e-3));
        let fit = fit_natural(&obs).unwrap();
        let a = &fit.anova;
        prop_assert!(((a.ss_regression + a.ss_error) - a.ss_total).abs() <= 1e-9 * a.ss_total.max(1.0));
    }

    #[test]
    fn discrepancy_homogeneous(a in 0.0..1e3f64, b in 0.0..1e3f64, d in 0.0..1e3f64, k in 0.001..1e3f64) {
        let t = DcTriple::from_predictions(a, b, d);
        let s = DcTriple { d1: t.d1 * k, d2: t.d2 * k, d3: t.d3 * k };
        prop_assert!(close(discrepancy_index(s).unwrap(), k * discrepancy_index(t).unwrap(), 1e-12));
        prop_assert!(discrepancy_index(t).unwrap() >= 0.0);
    }

    #[test]
    fn discrepancy_monotone_in_declared_offset(d1 in 0.0..100.0f64, w in 0.0..100.0f64, o1 in 0.0..100.0f64, o2 in 0.0..100.0f64) {
        let d2 = d1 + w;
        let mid = (d1 + d2) / 2.0;
        let (near, far) = if o1 <= o2 { (o1, o2) } else { (o2, o1) };
        let a = discrepancy_index(DcTriple { d1, d2, d3: mid + near }).unwrap();
        let b = discrepancy_index(DcTriple { d1, d2, d3: mid + far }).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn ranking_unit_invariant_and_permutation(
        data in prop::collection::vec((1.0..1e5f64, 1.0..1e5f64, 0.0..1e5f64, 1e5..1e8f64, 100.0..1e6f64), 1..20)
    ) {
        let records: Vec<CountryRecord> = data.iter().enumerate().map(|(i, d)| CountryRecord {
            country_code: format!("{}{}", (b'A' + (i / 26) as u8) as char, (b'A' + (i % 26) as u8) as char),
            name: format!("C{i}"),
            numeric_id: i as u32 + 1,
            population: d.3,
            land_area: d.4,
            area_override: None,
        }).collect();
        let preds: Vec<DcPrediction> = records.iter().zip(&data).map(|(r, d)| DcPrediction {
            country_code: r.country_code.clone(),
            year: 2020,
            dc_by_cc: d.0,
            dc_by_em: d.1,
            dc_by_em_method: EmMethod::Loglog,
            declared_dc: d.2,
            within_band: d.0.min(d.1) <= d.2 && d.2 <= d.0.max(d.1),
            clamped: false,
        }).collect();
        let registry = Registry::new(records).unwrap();
        let none = BTreeSet::new();
        let orders: Vec<Vec<String>> = [1.0, 1e3, 1e5].iter().map(|&u| {
            let rows = build_index_table(&preds, &registry, u, &none).unwrap();
            for r in &rows {
                let area = registry.get(&r.country_code).unwrap().effective_area();
                assert!(((r.i_f * area) - r.i_f_prime).abs() <= 1e-12 * r.i_f_prime.max(1e-300));
            }
            rank_countries(&rows, RankKey::ID, &none).unwrap().iter().map(|r| r.country_code.clone()).collect()
        }).collect();
        prop_assert_eq!(&orders[0], &orders[1]);
        prop_assert_eq!(&orders[1], &orders[2]);
        let mut sorted = orders[0].clone();
        sorted.sort();
        prop_assert_eq!(sorted, registry.codes().map(str::to_string).collect::<Vec<_>>());
    }

    #[test]
    fn simplex_best_value_monotone(cx in -5.0..5.0f64, cy in -5.0..5.0f64, x0 in -5.0..5.0f64, y0 in -5.0..5.0f64) {
        let f = |x: &[f64]| (x[0] - cx).powi(2) + 3.0 * (x[1] - cy).powi(2) + (x[0] - cx) * (x[1] - cy);
        let m = minimize(f, &[x0, y0], &SimplexConfig::default()).unwrap();
        prop_assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(m.fmin <= f(&[x0, y0]));
        prop_assert!((m.argmin[0] - cx).abs() < 1e-3 && (m.argmin[1] - cy).abs() < 1e-3);
    }

    #[test]
    fn simplex_respects_bounds(x0 in 0.0..=1.0f64, y0 in 0.0..=1.0f64, tx in -3.0..3.0f64, ty in -3.0..3.0f64) {
        let cfg = SimplexConfig::default().with_bounds(vec![(0.0, 1.0), (0.0, 1.0)]);
        let f = |x: &[f64]| {
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            (x[0] - tx).powi(2) + (x[1] - ty).powi(2)
        };
        let m = minimize(f, &[x0, y0], &cfg).unwrap();
        prop_assert!(m.argmin.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(m.fmin <= f(&[x0, y0]));
    }

    #[test]
    fn excess_antisymmetric_and_additive(a in 0.0..1e6f64, b in 0.0..1e6f64, c in 0.0..1e6f64) {
        prop_assert_eq!(excess_mortality(a, b), -excess_mortality(b, a));
        prop_assert!(close(excess_mortality(a, b) + excess_mortality(b, c), excess_mortality(a, c), 1e-12));
    }

    #[test]
    fn ingest_round_trip_and_order_independence(
        rows in prop::collection::btree_map((0u8..26, 0u8..26, 2000i32..2030), (0u32..1_000_000, 0u32..1_000_000), 1..60)
    ) {
        let lines: Vec<String> = rows.iter().map(|((a, b, y), (c, d))| {
            format!("{}{},{y},{c},{d}", (b'A' + a) as char, (b'A' + b) as char)
        }).collect();
        let forward = format!("country_code,year,cases,deaths\n{}\n", lines.join("\n"));
        let mut rev = lines.clone();
        rev.reverse();
        let backward = format!("country_code,year,cases,deaths\n{}\n", rev.join("\n"));
        let t1 = parse_covid(forward.as_bytes(), "fwd").unwrap();
        let t2 = parse_covid(backward.as_bytes(), "rev").unwrap();
        prop_assert_eq!(&t1.cases, &t2.cases);
        prop_assert_eq!(&t1.deaths, &t2.deaths);

        let deaths_csv = format!(
            "country_code,year,deaths\n{}\n",
            rows.iter().map(|((a, b, y), (c, _))| format!("{}{},{y},{c}", (b'A' + a) as char, (b'A' + b) as char)).collect::<Vec<_>>().join("\n")
        );
        let deaths = parse_deaths(deaths_csv.as_bytes(), "d").unwrap();
        let bundle = DatasetBundle::new(deaths.clone(), Some(t1.clone()), Registry::eu27(), FitWindow { start: 2000, end: 2009 }, vec![2010]);
        let (mut d_out, mut c_out) = (Vec::new(), Vec::new());
        bundle.write_deaths_csv(&mut d_out).unwrap();
        bundle.write_covid_csv(&mut c_out).unwrap();
        prop_assert_eq!(parse_deaths(d_out.as_slice(), "d").unwrap().deaths, deaths.deaths);
        let back = parse_covid(c_out.as_slice(), "c").unwrap();
        prop_assert_eq!(back.cases, t1.cases);
        prop_assert_eq!(back.deaths, t1.deaths);
    }
}
