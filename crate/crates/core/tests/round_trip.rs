use std::collections::BTreeMap;

use proptest::prelude::*;
use surfloss::ingest::{
    self, format_measurements, format_participation, parse_measurements, parse_participation,
    Dataset,
};
use surfloss::qtls::{ensemble_table, RecordPolicy};
use surfloss::sle::extract_serial;
use surfloss::synth::{generate, HighPowerModel, SynthSpec};
use surfloss::{
    DesignId, DesignKind, ExtractionConfig, ParticipationMatrix, ReferenceSet, RegionArray,
    ResonatorMeasurement, Units,
};

fn arb_matrix() -> impl Strategy<Value = ParticipationMatrix> {
    let row = prop::array::uniform4(0.0f64..0.25);
    prop::collection::vec(row, 1..=4).prop_map(|rows| {
        let designs = DesignKind::ALL[..rows.len()]
            .iter()
            .map(|&k| DesignId::new(k, "Nb", "none"))
            .collect();
        ParticipationMatrix::new(designs, rows.into_iter().map(RegionArray).collect())
    })
}

proptest! {
    #[test]
    fn matrix_csv_round_trips_bit_identically(m in arb_matrix(), percent in any::<bool>()) {
        prop_assert!(m.validate().is_empty());
        let units = if percent { Units::Percent } else { Units::Fraction };
        let back = parse_participation(&format_participation(&m, units), units).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn measurement_csv_round_trips(q in prop::collection::vec((1e3f64..1e8, 1.0f64..100.0), 1..20)) {
        let d = DesignId::new(DesignKind::SADesign, "TiN, sputtered", "HF \"dip\"");
        let ms: Vec<ResonatorMeasurement> = q
            .iter()
            .enumerate()
            .map(|(i, &(lp, k))| ResonatorMeasurement {
                design: d.clone(),
                resonator_id: format!("r{i}"),
                q_lp: lp,
                q_hp: if k > 90.0 { f64::INFINITY } else { lp * k },
            })
            .collect();
        let back: Vec<ResonatorMeasurement> = parse_measurements(&format_measurements(&ms))
            .unwrap()
            .into_iter()
            .map(|r| r.measurement)
            .collect();
        prop_assert_eq!(back, ms);
    }
}

#[test]
fn bundled_matrices_survive_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for set in ReferenceSet::ALL {
        for units in [Units::Percent, Units::Fraction] {
            let path = dir.path().join(format!("{}.csv", set.slug()));
            ingest::write_participation(&path, &set.matrix(), units).unwrap();
            let once = ingest::read_participation(&path, units).unwrap();
            ingest::write_participation(&path, &once, units).unwrap();
            let twice = ingest::read_participation(&path, units).unwrap();
            assert_eq!(once, set.matrix());
            assert_eq!(twice, once);
        }
    }
}

#[test]
fn results_file_round_trip() {
    let m = ReferenceSet::TiNHf.matrix();
    let spec = SynthSpec {
        matrix: m.clone(),
        true_tangents: ReferenceSet::TiNHf.ground_truth(),
        n_per_design: 12,
        relative_noise: 0.2,
        q_hp_model: HighPowerModel::Fixed(4e6),
        rng_seed: 9,
    };
    let meas = generate(&spec).unwrap();
    let stats = ensemble_table(&meas, m.designs(), RecordPolicy::ExcludeFlagged).unwrap();
    let cfg = ExtractionConfig {
        n_samples: 400,
        rng_seed: 3,
        ..Default::default()
    };
    let result = extract_serial(&m, &stats, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.json");
    ingest::write_estimates(&path, &result.estimate_list(), &result.config).unwrap();
    let back = ingest::read_results(&path).unwrap();
    assert_eq!(back.estimates, result.estimate_list());
    assert_eq!(back.config, cfg);
    assert_eq!(back.generated_by, surfloss::GENERATED_BY);

    // key order as written, not as a sorted JSON map
    let text = std::fs::read_to_string(&path).unwrap();
    let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
    assert!(pos("config") < pos("estimates") && pos("estimates") < pos("generated_by"));
    let first = &text[pos("estimates")..];
    let at = |k: &str| first.find(&format!("\"{k}\"")).unwrap();
    let order = ["region", "mean", "std", "resolvable", "upper_bound"].map(at);
    assert!(order.windows(2).all(|w| w[0] < w[1]), "{order:?}");
}

#[test]
fn synthetic_dataset_through_files() {
    let m = ReferenceSet::Al.matrix();
    let spec = SynthSpec {
        matrix: m.clone(),
        true_tangents: ReferenceSet::Al.ground_truth(),
        n_per_design: 5,
        relative_noise: 0.1,
        q_hp_model: HighPowerModel::Infinite,
        rng_seed: 1,
    };
    let meas = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mp = dir.path().join("m.csv");
    let qp = dir.path().join("q.csv");
    ingest::write_participation(&mp, &m, Units::Percent).unwrap();
    ingest::write_measurements(&qp, &meas).unwrap();
    let m2 = ingest::read_participation(&mp, Units::Percent).unwrap();
    let q2: Vec<ResonatorMeasurement> = ingest::read_measurements(&qp)
        .unwrap()
        .into_iter()
        .map(|r| r.measurement)
        .collect();
    assert_eq!(m2, m);
    assert_eq!(q2, meas);

    let mut meta = BTreeMap::new();
    meta.insert("notes".to_string(), "five per design".to_string());
    let ds = Dataset::new(m2, q2, meta).unwrap();
    let jp = dir.path().join("d.json");
    ingest::write_dataset(&jp, &ds).unwrap();
    assert_eq!(ingest::read_dataset(&jp).unwrap(), ds);
}

#[test]
fn io_errors_carry_the_path() {
    let err = ingest::read_participation("/nonexistent/matrix.csv", Units::Percent).unwrap_err();
    assert!(!err.is_parse_error());
    assert!(err.to_string().contains("/nonexistent/matrix.csv"));
}
