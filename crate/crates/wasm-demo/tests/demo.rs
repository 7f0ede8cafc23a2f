use superbunch_wasm_demo::{calibration_json, correlation_json, photon_statistics_json, source};

#[test]
fn distribution_is_normalized_and_bunched() {
    let v = photon_statistics_json(1.89, 0.25, 0.1, 3).unwrap();
    let emp: Vec<f64> = serde_json::from_value(v["empirical"].clone()).unwrap();
    let geo: Vec<f64> = serde_json::from_value(v["geometric"].clone()).unwrap();
    assert_eq!(emp.len(), geo.len());
    assert!(emp.iter().sum::<f64>() > 0.99);
    let mean = v["mean_n"].as_f64().unwrap();
    assert!((mean - 0.25).abs() < 0.03, "{mean}");
    let g2 = v["g2_c"]["value"].as_f64().unwrap();
    assert!(g2 > 1.5 && g2 < 2.3, "{g2}");
}

#[test]
fn correlation_fit_reports_both_timescales() {
    let v = correlation_json(2.8, 0.2, 5).unwrap();
    let n = v["lags"].as_array().unwrap().len();
    assert_eq!(v["values"].as_array().unwrap().len(), n);
    assert_eq!(v["fit"]["curve"].as_array().unwrap().len(), n);
    let g0 = v["zero_lag"]["value"].as_f64().unwrap();
    assert!((g0 - 2.8).abs() < 0.3, "{g0}");
    let tm = v["fit"]["tau_m"].as_f64().unwrap();
    let tg = v["fit"]["tau_g"].as_f64().unwrap();
    assert!(tm < tg);
}

#[test]
fn calibration_ladder_and_limits() {
    let v = calibration_json(&[1.89, 2.38]).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["v_pp"], 0.0);
    assert!(calibration_json(&[1.89, 10.0]).is_err());
    assert!(source(2.0, 0.0, 1).is_err());
    assert!(source(2.0, 5.0, 1).is_err());
}
