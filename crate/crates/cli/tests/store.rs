use std::io::Write;

use bop2te::boundary::InterimCounts;
use bop2te::design::DesignSpec;
use bop2te_cli::app::{create_design, record_decision};
use bop2te_cli::config::DesignConfig;
use bop2te_cli::store::{result_hash, Store};

fn config() -> DesignConfig {
    let spec: DesignSpec = serde_json::from_str(
        r#"{"eta_e":0.6,"eta_e_null":0.3,"eta_t":0.2,"eta_t_null":0.4,
            "alpha_targets":{"alpha00":0.025,"alpha01":0.1,"alpha10":0.1},
            "schedule":[{"n":9,"check_efficacy":false},{"n":18},{"n":36}]}"#,
    )
    .unwrap();
    DesignConfig::new(spec)
}

#[test]
fn reopen_restores_documents_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let (id, hash) = {
        let store = Store::open(&path).unwrap();
        let doc = create_design(&store, &config()).unwrap();
        record_decision(&store, &doc.id, InterimCounts { n: 9, x_e: 2, x_t: 1 }).unwrap();
        (doc.id.clone(), result_hash(doc.result.as_ref().unwrap()))
    };
    let store = Store::open(&path).unwrap();
    let doc = store.document(&id).unwrap();
    assert!(doc.is_consistent());
    assert_eq!(result_hash(doc.result.as_ref().unwrap()), hash);
    assert_eq!(doc.result_hash.as_deref(), Some(hash.as_str()));
    let log = store.decisions(&id).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log[0].record.n, 9);
}

#[test]
fn torn_final_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let id = {
        let store = Store::open(&path).unwrap();
        let doc = create_design(&store, &config()).unwrap();
        record_decision(&store, &doc.id, InterimCounts { n: 9, x_e: 2, x_t: 1 }).unwrap();
        doc.id
    };
    let intact = std::fs::metadata(&path).unwrap().len();
    std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(br#"{"op":"append_decision","entry":{"document_id":"#)
        .unwrap();

    let store = Store::open(&path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), intact);
    assert_eq!(store.decisions(&id).unwrap().len(), 1);
    // appending after recovery produces a readable journal
    record_decision(&store, &id, InterimCounts { n: 18, x_e: 6, x_t: 3 }).unwrap();
    drop(store);
    assert_eq!(Store::open(&path).unwrap().decisions(&id).unwrap().len(), 2);
}

#[test]
fn corruption_before_the_end_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    {
        let store = Store::open(&path).unwrap();
        create_design(&store, &config()).unwrap();
    }
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, format!("not json\n{text}")).unwrap();
    assert!(Store::open(&path).is_err());
}

#[test]
fn concurrent_decisions_are_serialized() {
    let store = Store::in_memory();
    let doc = create_design(&store, &config()).unwrap();
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|_| s.spawn(|| record_decision(&store, &doc.id, InterimCounts { n: 9, x_e: 1, x_t: 1 }).is_ok()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(results.iter().filter(|ok| **ok).count(), 1);
    assert_eq!(store.decisions(&doc.id).unwrap().len(), 1);
}

#[test]
fn reloaded_document_reoptimizes_to_the_same_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let id = create_design(&Store::open(&path).unwrap(), &config()).unwrap().id;
    let doc = Store::open(&path).unwrap().document(&id).unwrap();
    let again = bop2te_cli::app::run_search(&doc.config()).unwrap();
    assert_eq!(Some(result_hash(&again)), doc.result_hash);
}
