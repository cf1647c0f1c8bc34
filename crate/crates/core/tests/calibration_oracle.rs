use proptest::prelude::*;
use transition_core::calibration::*;
use transition_core::scenario::{Quarter, ScenarioData};

/// Normal equations of y = a + b·x with x measured from the last year,
/// solved by Cramer's rule.
fn normal_equation_fit(points: &[(i32, f64)]) -> (f64, f64) {
    let base = points.last().unwrap().0;
    let n = points.len() as f64;
    let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(year, v) in points {
        let x = (year - base) as f64;
        sx += x;
        sxx += x * x;
        sy += v;
        sxy += x * v;
    }
    let det = n * sxx - sx * sx;
    let a = (sy * sxx - sx * sxy) / det;
    let b = (n * sxy - sx * sy) / det;
    (a, b)
}

prop_compose! {
    fn series()(
        start in 1980..2015i32,
        gaps in prop::collection::vec(1..3i32, 1..20),
        level in 0.0..1e6f64,
        trend in -5e4..5e4f64,
        noise in prop::collection::vec(-1e4..1e4f64, 20),
    ) -> Vec<(i32, f64)> {
        let mut year = start;
        let mut points = vec![(year, level + noise[0])];
        for (i, g) in gaps.iter().enumerate() {
            year += g;
            points.push((year, level + trend * (year - start) as f64 + noise[i + 1]));
        }
        points
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ols_matches_normal_equations(points in series()) {
        let ts = TimeSeries::new("s", points.clone()).unwrap();
        let model = fit_linear(&ts, DEFAULT_WINDOW).unwrap();
        let used = &points[points.len().saturating_sub(DEFAULT_WINDOW)..];
        prop_assert_eq!(model.window, used.len());
        prop_assert_eq!(model.base_year, used.last().unwrap().0);
        let (a, b) = normal_equation_fit(used);
        let scale = used.iter().map(|p| p.1.abs()).fold(1.0, f64::max);
        prop_assert!((model.intercept - a).abs() <= 1e-9 * scale, "{} vs {a}", model.intercept);
        prop_assert!((model.slope - b).abs() <= 1e-9 * scale, "{} vs {b}", model.slope);
    }

    #[test]
    fn forecasts_never_go_negative(points in series(), ahead in 0..60i32) {
        let ts = TimeSeries::new("s", points).unwrap();
        let model = fit_linear(&ts, DEFAULT_WINDOW).unwrap();
        let y = model.base_year + ahead;
        let raw = model.intercept + model.slope * ahead as f64;
        let f = forecast(&model, y);
        prop_assert!(f >= 0.0);
        prop_assert_eq!(f, raw.max(0.0));
    }

    #[test]
    fn exact_lines_are_recovered(a in 0.0..1e5f64, b in -1e3..1e3f64) {
        let points: Vec<_> = (2015..=2022).map(|y| (y, a + b * (y - 2022) as f64)).collect();
        let model = fit_linear(&TimeSeries::new("s", points).unwrap(), 8).unwrap();
        prop_assert!((model.intercept - a).abs() <= 1e-9 * a.max(1.0) * 10.0);
        prop_assert!((model.slope - b).abs() <= 1e-9 * a.max(b.abs()).max(1.0));
    }
}

#[test]
fn declining_series_clamps_at_zero() {
    let points: Vec<_> = (2015..=2022).map(|y| (y, 800.0 - 100.0 * (y - 2015) as f64)).collect();
    let model = fit_linear(&TimeSeries::new("heating", points).unwrap(), 8).unwrap();
    assert!((model.slope + 100.0).abs() < 1e-9);
    assert!(forecast(&model, 2030) == 0.0);
    assert!((forecast(&model, 2023) - 0.0).abs() < 1e-9);
}

#[test]
fn short_history_uses_every_point() {
    let model = fit_linear(&TimeSeries::new("wind", vec![(2020, 1.0), (2021, 2.0), (2022, 3.0)]).unwrap(), 8).unwrap();
    assert_eq!(model.window, 3);
    assert!((model.slope - 1.0).abs() < 1e-12);
    assert!((model.intercept - 3.0).abs() < 1e-12);
    assert!(matches!(
        fit_linear(&TimeSeries::new("one", vec![(2022, 1.0)]).unwrap(), 8),
        Err(CalibrationError::InsufficientData { .. })
    ));
}

#[test]
fn summer_share_is_q2_plus_q3_over_total() {
    let quarters = [
        (2021, Quarter::Q1, 10.0),
        (2021, Quarter::Q2, 30.0),
        (2021, Quarter::Q3, 40.0),
        (2021, Quarter::Q4, 20.0),
    ];
    let split = fit_seasonal("solar", &quarters).unwrap();
    assert!((split.summer_share - 0.7).abs() < 1e-12);
    assert!((split.winter_share() - 0.3).abs() < 1e-12);
}

#[test]
fn calibration_file_round_trips_and_is_stable() {
    let data = ScenarioData::bundled();
    let set = CalibrationSet::fit(&data).unwrap();
    let csv = set.to_csv();
    assert!(csv.starts_with(CALIBRATION_HEADER));
    assert_eq!(CalibrationSet::fit(&data).unwrap().to_csv(), csv);
    let back = CalibrationSet::from_csv(csv.as_bytes()).unwrap();
    assert_eq!(back.to_csv(), csv);
}
