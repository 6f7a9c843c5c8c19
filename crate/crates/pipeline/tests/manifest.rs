use std::fs;

use retcap::backends::blob;
use retcap_pipeline::config::BackendConfig;
use retcap_pipeline::toy_data::write_toy_dataset;
use retcap_pipeline::{DatasetManifest, Error};

#[test]
fn toy_manifest_loads_with_resolved_paths() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_toy_dataset(dir.path(), 4, 0, &BackendConfig::default()).unwrap();
    let m = DatasetManifest::load_jsonl(&path).unwrap();
    assert_eq!(m.entries.len(), 4);
    for e in &m.entries {
        assert!(e.embeddings.as_ref().unwrap().is_absolute());
        assert_eq!(e.references.len(), 3);
        assert!(e.load_video(30.0).unwrap().frames().len() >= 30);
    }
}

#[test]
fn validation_reports_every_problem_at_once() {
    let dir = tempfile::tempdir().unwrap();
    blob::write_file(&dir.path().join("ok.bin"), &[vec![1.0, 0.0]]).unwrap();
    let lines = [
        r#"{"video_id": "a", "embeddings": "ok.bin", "references": ["x"]}"#,
        r#"{"video_id": "a", "embeddings": "ok.bin", "references": ["x"]}"#,
        r#"{"video_id": "b", "embeddings": "missing.bin"}"#,
        r#"{"video_id": "c", "frames": "nodir", "embeddings": "ok.bin"}"#,
        r#"{"video_id": "d", "embeddings": "ok.bin", "fps": -1}"#,
    ];
    let path = dir.path().join("m.jsonl");
    fs::write(&path, lines.join("\n")).unwrap();
    let Err(Error::Data(msg)) = DatasetManifest::load_jsonl(&path) else {
        panic!("expected a data error");
    };
    for needle in ["a: duplicate", "b: embedding blob", "c: needs exactly one", "d: fps"] {
        assert!(msg.contains(needle), "{needle:?} missing from:\n{msg}");
    }
}

#[test]
fn malformed_lines_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    fs::write(&path, "{\"video_id\": 1}\n\nnot json\n").unwrap();
    let Err(Error::Data(msg)) = DatasetManifest::load_jsonl(&path) else { panic!() };
    assert!(msg.contains("line 1") && msg.contains("line 3"), "{msg}");
}

#[test]
fn msrvtt_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    fs::create_dir_all(frames.join("video1")).unwrap();
    blob::write_file(&frames.join("video2.frames.bin"), &[vec![1.0, 0.0]]).unwrap();
    let ann = r#"{
        "videos": [{"video_id": "video1", "split": "test"}, {"video_id": "video2", "split": "test"}, {"video_id": "video3", "split": "train"}],
        "sentences": [{"video_id": "video1", "caption": "a man sings"}, {"video_id": "video2", "caption": "a dog runs"}, {"video_id": "video1", "caption": "someone sings"}]
    }"#;
    let path = dir.path().join("ann.json");
    fs::write(&path, ann).unwrap();
    let m = DatasetManifest::load_msrvtt(&path, &frames, Some("test")).unwrap();
    assert_eq!(m.entries.len(), 2);
    assert_eq!(m.get("video1").unwrap().references, vec!["a man sings", "someone sings"]);
    assert!(m.get("video1").unwrap().frames.is_some());
    assert!(m.get("video2").unwrap().embeddings.is_some());
    // Without the split filter video3 is kept and has no frames on disk.
    assert!(matches!(DatasetManifest::load_msrvtt(&path, &frames, None), Err(Error::Data(_))));
}
