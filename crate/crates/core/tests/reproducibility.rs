use ris_thp::channel::ScenarioConfig;
use ris_thp::sim::{emit_csv, read_csv, run, Method, RunConfig, Sweep};

fn config() -> RunConfig {
    let mut scenario = ScenarioConfig::very_strong_impact();
    scenario.n_ris = 16;
    let mut c = RunConfig::new(scenario, 3, vec![Method::Thp, Method::ThpNoRis, Method::LinearZf]);
    c.sweep = Sweep::TxDbm(vec![20.0, 35.0]);
    c.options.timing = false;
    c
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run(&config()).unwrap(), &a).unwrap();
    emit_csv(&run(&config()).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let mut other = config();
    other.scenario.seed += 1;
    emit_csv(&run(&other).unwrap(), &b).unwrap();
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn csv_round_trip_keeps_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let records = run(&config()).unwrap();
    emit_csv(&records, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), 2 * 3 * 3);
    for (a, b) in records.iter().zip(&back) {
        assert_eq!((a.trial, a.method, a.n_allocated), (b.trial, b.method, b.n_allocated));
        assert_eq!(a.sweep_value, b.sweep_value);
        assert!((a.sum_se_bits - b.sum_se_bits).abs() <= 1e-10 * a.sum_se_bits.max(1.0));
    }
}

#[test]
fn more_power_helps_on_average() {
    let records = run(&config()).unwrap();
    let mean = |tx: f64| {
        let xs: Vec<f64> = records
            .iter()
            .filter(|r| r.method == Method::Thp && r.sweep_value == tx)
            .map(|r| r.sum_se_bits)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    assert!(mean(35.0) > mean(20.0));
}
