use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::Ordering;

use circfuzz_core::field::FieldModulus;
use circfuzz_core::fixtures::{build_fixture, FixtureKind};
use circfuzz_core::harness::*;
use circfuzz_core::oracle::{BugCategory, OracleKind};

fn corpus() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/seed-regexes.txt"))
}

fn small_regex_config(seed: u64, iterations: u64) -> CampaignConfig {
    CampaignConfig {
        seed,
        corpus: Some(corpus()),
        budget: Budget { iterations: Some(iterations), ..Budget::default() },
        max_len: 6,
        strings_per_regex: StringCounts { valid: 4, invalid: 4 },
        probe: ProbeConfig { iterations: 200, ..ProbeConfig::default() },
        ..CampaignConfig::default()
    }
}

fn fixture(kind: FixtureKind) -> circfuzz_core::circuit::Circuit {
    let m = FieldModulus::bn254();
    build_fixture(kind, m, (m.from_u64(3), m.one())).unwrap()
}

fn witness_config(iterations: u64, probe: u64) -> CampaignConfig {
    CampaignConfig {
        budget: Budget { iterations: Some(iterations), ..Budget::default() },
        probe: ProbeConfig { iterations: probe, ..ProbeConfig::default() },
        ..CampaignConfig::default()
    }
}

#[test]
fn clean_regex_campaign_reports_nothing_and_counts_iterations() {
    let out = run_regex_campaign(&small_regex_config(5, 24), &mut CampaignControl::new()).unwrap();
    assert!(out.reports.is_empty(), "{:#?}", out.reports.first());
    assert_eq!(out.stats.iterations, 24);
    assert_eq!(out.stats.engine_disagreements, 0);
    assert!(out.stats.pairs > 24);
    assert!(out.stats.coverage.covered_slots > 0);
}

#[test]
fn same_seed_same_reports_regardless_of_workers() {
    let mut c = small_regex_config(9, 12);
    c.injection = Some("flip_accept_state:3".into());
    let a = run_regex_campaign(&c, &mut CampaignControl::new()).unwrap();
    let b = run_regex_campaign(&c, &mut CampaignControl::new()).unwrap();
    assert!(!a.reports.is_empty());
    assert_eq!(serde_json::to_string(&a.reports).unwrap(), serde_json::to_string(&b.reports).unwrap());
    c.workers = 3;
    let many = run_regex_campaign(&c, &mut CampaignControl::new()).unwrap();
    assert_eq!(a.reports, many.reports);
    assert_eq!(a.stats.pairs, many.stats.pairs);
}

#[test]
fn pair_budget_is_exact() {
    let mut c = small_regex_config(2, 1);
    c.budget = Budget { pairs: Some(37), ..Budget::default() };
    let out = run_regex_campaign(&c, &mut CampaignControl::new()).unwrap();
    assert_eq!(out.stats.pairs, 37);
}

#[test]
fn flushed_coverage_never_decreases() {
    let mut c = small_regex_config(4, 24);
    c.flush_interval_seconds = 0.0;
    let mut seen = Vec::new();
    let mut control = CampaignControl::new().with_flush(|o: &CampaignOutcome| seen.push(o.stats.coverage));
    run_regex_campaign(&c, &mut control).unwrap();
    drop(control);
    assert!(seen.len() >= 2);
    for w in seen.windows(2) {
        assert!(w[1].covered_slots >= w[0].covered_slots);
        assert!(w[1].flags_set >= w[0].flags_set);
    }
}

#[test]
fn interrupt_stops_early_with_a_loadable_partial_bundle() {
    let c = small_regex_config(1, 1_000);
    let dir = tempfile::tempdir().unwrap();
    let stop = std::sync::Arc::new(std::sync::atomic::AtomicBool::new(false));
    let mut flushes = 0;
    let mut control = CampaignControl { stop: stop.clone(), on_flush: None };
    control.on_flush = Some(Box::new(|o: &CampaignOutcome| {
        flushes += 1;
        emit_report_bundle(&o.records, &o.stats, &o.coverage, dir.path()).unwrap();
        stop.store(true, Ordering::Relaxed);
    }));
    // The first flush arrives on schedule only if we ask for it.
    let c = CampaignConfig { flush_interval_seconds: 0.0, ..c };
    let out = run_regex_campaign(&c, &mut control).unwrap();
    drop(control);
    assert!(flushes >= 1);
    assert!(out.stats.iterations < 1_000);
    let stats: CampaignStats =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert!(stats.iterations >= 1);
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("reports.json")).unwrap()).unwrap();
    assert!(reports.is_empty());
}

#[test]
fn bundle_reproducers_replay_to_the_same_category() {
    for injection in ["class_off_by_one:1", "hint_unconstrained:0"] {
        let mut c = small_regex_config(3, 6);
        c.injection = Some(injection.into());
        let out = run_regex_campaign(&c, &mut CampaignControl::new()).unwrap();
        assert!(!out.reports.is_empty(), "{injection}");
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report_bundle(&out.records, &out.stats, &out.coverage, dir.path()).unwrap();
        assert_eq!(paths.reproducers.len(), out.reports.len());
        for p in &paths.reproducers {
            let rec = load_reproducer(p).unwrap();
            let v = replay(&rec).unwrap();
            assert!(v.matches_report, "{injection}: {v:?} vs {} {}", rec.report.category, rec.report.site);
        }
        let index = std::fs::read_to_string(&paths.index).unwrap();
        assert!(index.contains(&out.reports[0].id));
    }
}

#[test]
fn empty_campaign_writes_empty_report_array() {
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report_bundle(&[], &CampaignStats::default(), &CoverageMap::new(), dir.path()).unwrap();
    assert_eq!(std::fs::read_to_string(paths.reports).unwrap().trim(), "[]");
    assert!(std::fs::read_to_string(paths.index).unwrap().contains("No bugs found"));
}

#[test]
fn montgomery_all_zero_inputs_yield_a_soundness_report() {
    let circuit = fixture(FixtureKind::MontgomeryAdd);
    let zeros: BTreeMap<String, String> =
        ["in1[0]", "in1[1]", "in2[0]", "in2[1]"].into_iter().map(|k| (k.to_string(), "0".to_string())).collect();
    let out = run_witness_campaign(
        &witness_config(1, 10_000),
        &circuit,
        &InputsSource::Assignments(vec![zeros]),
        &mut CampaignControl::new(),
    )
    .unwrap();
    let r = out.reports.iter().find(|r| r.category == BugCategory::Soundness).expect("soundness report");
    assert_eq!(r.oracle, OracleKind::Invariant);
    assert!(r.mentions("lambda") || r.mentions("out[0]"));
    let v = replay(&out.records[0]).unwrap();
    assert!(v.matches_report);
}

#[test]
fn safe_multiplier_with_random_inputs_is_quiet() {
    let out = run_witness_campaign(
        &witness_config(200, 50),
        &fixture(FixtureKind::MultiplierSafe),
        &InputsSource::Random,
        &mut CampaignControl::new(),
    )
    .unwrap();
    assert!(out.reports.is_empty());
    assert_eq!(out.stats.iterations, 200);
}

#[test]
fn buggy_multipliers_are_caught_and_replay() {
    for (kind, want) in [
        (FixtureKind::MultiplierSoundness, BugCategory::Soundness),
        (FixtureKind::MultiplierCompleteness, BugCategory::Completeness),
        (FixtureKind::MultiplierCorrectness, BugCategory::Correctness),
    ] {
        let out = run_witness_campaign(
            &witness_config(20, 1_000),
            &fixture(kind),
            &InputsSource::Random,
            &mut CampaignControl::new(),
        )
        .unwrap();
        let i = out.reports.iter().position(|r| r.category == want).unwrap_or_else(|| panic!("{kind}"));
        assert!(replay(&out.records[i]).unwrap().matches_report, "{kind}");
    }
}

#[test]
fn inputs_file_accepts_objects_and_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.json");
    std::fs::write(&one, r#"{"a": 2, "b": "5"}"#).unwrap();
    let many = dir.path().join("many.json");
    std::fs::write(&many, r#"[{"a": 1, "b": 1}, {"a": "3", "b": 4}]"#).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"a": -1}"#).unwrap();
    match InputsSource::from_file(&one).unwrap() {
        InputsSource::Assignments(v) => assert_eq!(v, vec![BTreeMap::from([("a".into(), "2".into()), ("b".into(), "5".into())])]),
        InputsSource::Random => panic!(),
    }
    assert!(matches!(InputsSource::from_file(&many).unwrap(), InputsSource::Assignments(v) if v.len() == 2));
    assert!(InputsSource::from_file(&bad).is_err());
}

#[test]
fn external_reference_campaign_matches_builtin() {
    let Some(py) = ["python3", "python"].into_iter().find(|p| {
        std::process::Command::new(p).arg("--version").output().is_ok()
    }) else {
        return;
    };
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scripts/re_reference.py");
    let mut c = small_regex_config(7, 4);
    c.reference = ReferenceSpec::External(vec![py.into(), script.into()]);
    let ext = run_regex_campaign(&c, &mut CampaignControl::new()).unwrap();
    assert!(ext.reports.is_empty(), "{:#?}", ext.reports.first());
    assert_eq!(ext.stats.errors, 0);
}
