use mrbp_core::codes::qc_96_48;
use mrbp_core::dataset::{
    generate_labeled, read_dataset, write_dataset, DatasetKind, GenerationConfig, TrainingRecord, DATASET_MAGIC,
};
use mrbp_core::nn::Preset;
use mrbp_core::sim::{DecoderKind, OutputFormat, SimConfig, SimResult, Simulator, CSV_HEADER};
use mrbp_core::*;

fn small_sweep() -> SimResult {
    let code = qc_96_48();
    let cfg = SimConfig {
        decoder: DecoderKind::Mrbp,
        rule: RuleKind::Chmag,
        rounds: 3,
        snr_db: vec![2.0, 3.0],
        target_errors: 20,
        max_frames: 50_000,
        code_path: "codes/qc_96_48.alist".into(),
        ..SimConfig::default()
    };
    Simulator::new(&code, cfg, None).unwrap().run_sweep().unwrap()
}

#[test]
fn csv_output_parses_back() {
    let result = small_sweep();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    assert_eq!(OutputFormat::from_path(&path), OutputFormat::Csv);
    result.emit(OutputFormat::Csv, &path).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header.join(","), CSV_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>().unwrap();
    assert_eq!(rows.len(), result.points.len());
    for (row, p) in rows.iter().zip(&result.points) {
        let f = |i: usize| row[i].parse::<f64>().unwrap();
        assert_eq!(f(0), p.snr_db);
        assert_eq!(row[1].parse::<u64>().unwrap(), p.frames);
        assert_eq!(row[2].parse::<u64>().unwrap(), p.frame_errors);
        assert_eq!(f(3), p.fer);
        assert_eq!(f(4), p.ber);
        assert_eq!(row[5].parse::<u64>().unwrap(), p.undetected);
        assert_eq!(f(6), p.mean_rounds);
        assert_eq!(f(7), p.mean_iters);
    }
}

#[test]
fn json_output_echoes_the_config() {
    let result = small_sweep();
    let json = result.to_json().unwrap();
    let back: SimResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back, result);
    assert_eq!(back.config.code_path, "codes/qc_96_48.alist");
    assert_eq!(back.code.hash, qc_96_48().identity_hash());
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["config"]["rule"], "chmag");
    assert_eq!(value["config"]["decoder"], "mrbp");
}

#[test]
fn dataset_file_round_trip() {
    let code = qc_96_48();
    let snr = SnrSpec::for_code(2.5, &code).unwrap();
    for kind in [DatasetKind::D1, DatasetKind::D2] {
        let config = GenerationConfig {
            kind,
            ..GenerationConfig::new(snr, 12, 40)
        };
        let records: Vec<TrainingRecord> = generate_labeled(&code, &config)
            .unwrap()
            .into_iter()
            .map(|lf| TrainingRecord::from_frame(&lf.sample.frame, lf.labels, kind))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.bin");
        write_dataset(&path, &config.header(&code, 0), &records).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..7], DATASET_MAGIC);
        assert_eq!(u64::from_le_bytes(bytes[7..15].try_into().unwrap()), 12);

        let (header, back) = read_dataset(&path).unwrap();
        assert_eq!(header.record_count, 12);
        assert_eq!(header.kind, kind);
        assert_eq!(header.code_hash, code.identity_hash());
        assert_eq!(back, records);
        for r in &back {
            assert_eq!(r.y.is_some(), kind == DatasetKind::D1);
            assert!(r.abs_l_ch.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn weights_survive_save_and_load() {
    let meta = Preset::MlpaD2.meta(96, 48);
    let mut rng = StreamRng::new(6, 0);
    let w = ModelWeights::random(meta, 0.2, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mlpa_d2.bin");
    w.save(&path).unwrap();
    let back = load_weights(&path).unwrap();
    assert_eq!(back, w);
    let input: Vec<f64> = (0..w.input_dim()).map(|_| rng.gaussian()).collect();
    assert_eq!(back.forward(&input).unwrap(), w.forward(&input).unwrap());

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xff;
    assert!(ModelWeights::from_bytes(&bytes).is_err());
    let bytes = std::fs::read(&path).unwrap();
    assert!(ModelWeights::from_bytes(&bytes[..bytes.len() - 4]).is_err());
}
