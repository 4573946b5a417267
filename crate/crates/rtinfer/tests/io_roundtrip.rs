use std::io::Cursor;

use rtinfer::io::{self, ModelFile, PstFile, TasksetFile};
use rtinfer_core::inference::{run_attack_from, train, TrainConfig};
use rtinfer_core::pst::Pst;
use rtinfer_core::simulator::{observer_sequence, simulate};
use rtinfer_core::{Role, TaskSet, TaskSpec};

fn taskset() -> TaskSet {
    TaskSet::new(vec![
        TaskSpec::new(0, 30, 2, 6, 1, 0.3, Role::Victim).with_name("victim"),
        TaskSpec::new(2, 70, 5, 8, 2, 0.3, Role::Other),
        TaskSpec::new(1, 80, 4, 6, 3, 0.3, Role::Other),
        TaskSpec::new(3, 90, 15, 15, 4, 0.0, Role::Other),
        TaskSpec::new(4, 100, 12, 12, 5, 0.0, Role::Observer),
    ])
    .unwrap()
}

#[test]
fn taskset_json_round_trip() {
    let ts = taskset().with_blocking(true);
    let json = serde_json::to_string(&TasksetFile::of(&ts)).unwrap();
    let back = io::parse_taskset(&json).unwrap();
    assert_eq!(back, ts);
    assert_eq!(back.task(0).unwrap().name.as_deref(), Some("victim"));
}

#[test]
fn taskset_json_defaults_and_errors() {
    let json = r#"{"tasks": [
        {"id": 0, "period": 10, "deadline": 10, "wcet_typical": 1, "wcet_critical": 3, "priority": 1, "critical_rate": 0.5, "role": "victim"},
        {"id": 1, "period": 30, "deadline": 30, "wcet_typical": 2, "wcet_critical": 2, "priority": 2, "critical_rate": 0.0, "role": "observer"}
    ]}"#;
    let ts = io::parse_taskset(json).unwrap();
    assert!(!ts.blocking_enabled());
    assert!(io::parse_taskset(&json.replace("\"observer\"", "\"other\"")).is_err());
    assert!(io::parse_taskset(&json.replace("\"wcet_critical\": 3", "\"wcet_critical\": 11")).is_err());
}

#[test]
fn trace_csv_round_trip() {
    let tr = simulate(&taskset(), 2, 9).unwrap();
    let mut buf = Vec::new();
    io::write_trace(&mut buf, &tr).unwrap();
    let back = io::read_trace(Cursor::new(&buf), None).unwrap();
    assert_eq!(back.jobs, tr.jobs);
    assert_eq!((back.horizon, back.seed), (tr.horizon, tr.seed));
    assert_eq!(back.taskset, tr.taskset);

    // a header-less CSV needs the taskset and infers the horizon
    let text = String::from_utf8(buf).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    assert!(io::read_trace(Cursor::new(body.as_bytes()), None).is_err());
    let bare = io::read_trace(Cursor::new(body.as_bytes()), Some(taskset())).unwrap();
    assert_eq!(bare.jobs, tr.jobs);
    assert_eq!(bare.horizon, tr.horizon);
}

#[test]
fn responses_and_predictions_round_trip() {
    let tr = simulate(&taskset(), 60, 2).unwrap();
    let seq = observer_sequence(&tr);
    let mut buf = Vec::new();
    io::write_responses(&mut buf, &seq).unwrap();
    assert!(buf.starts_with(b"response\n"));
    assert_eq!(io::read_responses(Cursor::new(&buf)).unwrap(), seq);

    let model = train(&tr, &TrainConfig::default()).unwrap();
    let recs = run_attack_from(&model, &tr, 50 * 25200);
    let mut buf = Vec::new();
    io::write_predictions(&mut buf, &recs).unwrap();
    let header = buf.split(|&b| b == b'\n').next().unwrap();
    assert_eq!(header, b"job_index,predicted_response,predicted_mode,actual_label,correct");
    assert_eq!(io::read_predictions(Cursor::new(&buf)).unwrap(), recs);
}

#[test]
fn model_json_round_trip_predicts_identically() {
    let ts = taskset();
    let tr = simulate(&ts, 60, 5).unwrap();
    let model = train(&tr, &TrainConfig::default()).unwrap();
    let text = io::model_to_string(&model, &ts).unwrap();
    let file: ModelFile = serde_json::from_str(&text).unwrap();
    let (back, back_ts) = file.into_model().unwrap();
    assert_eq!(back_ts, ts);
    assert_eq!(back.fingerprint, model.fingerprint);
    assert_eq!(back.cluster.threshold, model.cluster.threshold);
    let from = 50 * ts.hyperperiod().unwrap();
    assert_eq!(run_attack_from(&back, &tr, from), run_attack_from(&model, &tr, from));
    // stable serialization
    assert_eq!(io::model_to_string(&back, &back_ts).unwrap(), text);
}

#[test]
fn pst_file_shape() {
    let seq: Vec<u64> = [1, 2, 1, 3, 1, 2, 2, 3, 1].iter().copied().cycle().take(1200).collect();
    let pst = Pst::build(&seq, 3, 0.001).unwrap();
    let v = serde_json::to_value(PstFile::of(&pst)).unwrap();
    let root = &v["nodes"][0];
    assert_eq!(root["suffix"], serde_json::json!([]));
    assert_eq!(root["count"], 1200);
    assert!(root["successors"]["1"].as_f64().unwrap() > 0.44);
    let back: PstFile = serde_json::from_value(v).unwrap();
    assert_eq!(back.into_pst().unwrap().predict(&[3]), 1);
}

#[test]
fn embedded_taskset_beats_fallback() {
    let tr = simulate(&taskset(), 1, 1).unwrap();
    let other = TaskSet::new(vec![
        TaskSpec::new(0, 10, 1, 3, 1, 0.5, Role::Victim),
        TaskSpec::new(1, 20, 2, 2, 2, 0.0, Role::Observer),
    ])
    .unwrap();
    let mut buf = Vec::new();
    io::write_trace(&mut buf, &tr).unwrap();
    assert_eq!(io::read_trace_or(Cursor::new(&buf), other.clone()).unwrap().taskset, taskset());
    // an explicit override must still cover every task in the file
    assert!(io::read_trace(Cursor::new(&buf), Some(other)).is_err());
}
