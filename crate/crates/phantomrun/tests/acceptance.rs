//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `--nocapture` to see them). Criteria cover golden parsing,
//! the run filter oracle, published-table arithmetic, stratification,
//! stability and hierarchy properties, plan determinism, the desk-scale
//! end-to-end replay, store durability, and the filename schema suite.

mod support;

use std::collections::BTreeSet;

use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phantomrun::cli::{
    cmd_compare, cmd_mine, cmd_parse, cmd_reconstruct, cmd_report, CompareArgs, MineArgs,
    ParseArgs, ReconstructArgs,
};
use phantomrun::miner::filter_valid;
use phantomrun::reconstructor::emit_container_plan;
use phantomrun::store::{
    ArtifactKind, ArtifactRole, ArtifactStore, Manifest, ManifestRow, ManifestWriter, StoreError,
    MANIFEST_FILE,
};
use phantomrun_core::fidelity::{
    aggregate_fidelity, aggregate_reconstruction, outcome_equivalence, percent_integer,
    percent_one_decimal, sample_quotas, structure_equivalence,
};
use phantomrun_core::logparse::{
    normalize, parse_diagnostics, parse_filename_metadata, render_filename, render_normalized,
    render_profile, NormalizationConfig, PatternCatalog, ProjectFamily, StageProfile,
};
use phantomrun_core::model::*;
use phantomrun_core::synth::SynthLog;

use support::*;

// ------------------------------------------------------------------
// Criterion 1: golden diagnostic parsing — canonical example errors of
// the four supported build stacks parse to events with the exact
// tool/severity/category/location.
// ------------------------------------------------------------------
type GoldenCase = (
    &'static str,
    ProjectFamily,
    Tool,
    Severity,
    Category,
    Option<Location>,
);

#[test]
fn c01_golden_diagnostic_parsing() {
    let catalog = PatternCatalog::builtin();
    let cases: [GoldenCase; 4] = [
        (
            "src/main.c:42:17: error: 'foo' undeclared",
            ProjectFamily::CmakeNinja,
            Tool::Compiler,
            Severity::Error,
            Category::UndeclaredIdentifier,
            Some(Location::column("src/main.c", 42, 17)),
        ),
        (
            "make[2]: *** [package] Error 2",
            ProjectFamily::MakeBuildroot,
            Tool::Make,
            Severity::Error,
            Category::MakeRuleFailure,
            None,
        ),
        (
            "src/main.cpp:12:10: fatal error: Arduino.h: No such file or directory",
            ProjectFamily::SconsPlatformio,
            Tool::Compiler,
            Severity::FatalError,
            Category::MissingHeader,
            Some(Location::column("src/main.cpp", 12, 10)),
        ),
        (
            "arm-rtems6-gcc: undefined reference to 'rtems_task_create'",
            ProjectFamily::AutotoolsMake,
            Tool::Linker,
            Severity::Error,
            Category::UndefinedReference,
            None,
        ),
    ];
    for (line, family, tool, severity, category, location) in cases {
        let profile = StageProfile::builtin(family);
        let events = parse_diagnostics(line, &profile, catalog);
        assert_eq!(events.len(), 1, "exactly one event for {line:?}");
        let ev = &events[0];
        assert_eq!(ev.tool, tool, "{line:?}");
        assert_eq!(ev.severity, severity, "{line:?}");
        assert_eq!(ev.category, category, "{line:?}");
        assert_eq!(ev.location, location, "{line:?}");
    }
    println!("criterion 01 PASS: canonical example errors parse exactly");
}

// ------------------------------------------------------------------
// Criterion 2: validity-filter oracle — 1000 randomized run lists against
// a brute-force element-wise evaluation; order preserved; idempotent.
// ------------------------------------------------------------------
#[test]
fn c02_filter_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let conclusions = [
        RunConclusion::Success,
        RunConclusion::Failure,
        RunConclusion::Cancelled,
        RunConclusion::Other,
    ];
    for _ in 0..1000 {
        let len = rng.random_range(0..30);
        let runs: Vec<CIRun> = (0..len)
            .map(|i| {
                sample_run(
                    "widget",
                    i,
                    *conclusions.choose(&mut rng).unwrap(),
                    rng.random_bool(0.5),
                )
            })
            .collect();
        let got = filter_valid(&runs);

        // independent oracle: literal element-wise predicate evaluation
        let mut expected = Vec::new();
        for r in &runs {
            let fail = r.conclusion == RunConclusion::Failure;
            let build_workflow = r.is_build_workflow;
            if fail && build_workflow {
                expected.push(r.clone());
            }
        }
        assert_eq!(got, expected);
        assert_eq!(filter_valid(&got), got, "idempotence");
        // output is a subsequence of input
        let mut it = runs.iter();
        for kept in &got {
            assert!(it.any(|r| r == kept), "order/containment violated");
        }
    }
    println!("criterion 02 PASS: filter agrees with the brute-force predicate on 1000 lists");
}

// ------------------------------------------------------------------
// Criterion 3: reconstruction-success arithmetic over the published
// reference counts.
//
// Note: 31/32 = 96.875% (rounds to 96.9 under every standard mode;
// only truncation prints 96.8, which breaks Zephyr's 92.4) and
// 444/455 = 97.582% (no rounding yields the published 94.1). The
// published percentage column is inconsistent with its own counts, so
// this criterion is asserted as stated and expected to fail on those
// two elements.
// ------------------------------------------------------------------
#[test]
fn c03_reconstruction_report_arithmetic() {
    let mut records = Vec::new();
    records.extend(records_for("OpenIPC", 32, 31, FailureKind::Other));
    records.extend(records_for("STM32", 455, 444, FailureKind::Other));
    records.extend(records_for("RTEMS", 1988, 1784, FailureKind::Other));
    records.extend(records_for("Zephyr", 2153, 1989, FailureKind::Other));
    let report = aggregate_reconstruction(&records);

    let expected = [
        ("OpenIPC", 32, 31, "96.8"),
        ("STM32", 455, 444, "94.1"),
        ("RTEMS", 1988, 1784, "89.7"),
        ("Zephyr", 2153, 1989, "92.4"),
    ];
    let mut mismatches = Vec::new();
    for (project, attempts, reconstructed, pct) in expected {
        let c = &report.per_project[project];
        assert_eq!(c.attempts, attempts);
        assert_eq!(c.reconstructed, reconstructed);
        let rendered = percent_one_decimal(c.reconstructed, c.attempts);
        if rendered != pct {
            mismatches.push(format!(
                "{project}: {reconstructed}/{attempts} renders {rendered}, table says {pct}"
            ));
        }
    }
    let overall = percent_one_decimal(report.overall.reconstructed, report.overall.attempts);
    if overall != "91.8" {
        mismatches.push(format!("overall renders {overall}, table says 91.8"));
    }
    assert!(
        mismatches.is_empty(),
        "published percentages not reproducible from the published counts:\n  {}",
        mismatches.join("\n  ")
    );
    println!("criterion 03 PASS: reconstruction percentages reproduce exactly");
}

// ------------------------------------------------------------------
// Criterion 4: failure-cause histogram percentages of 380 failures.
// ------------------------------------------------------------------
#[test]
fn c04_failure_cause_histogram() {
    let mut records = Vec::new();
    let causes = [
        (FailureKind::HardwareDependencyMissing, 129u64, "34"),
        (FailureKind::RemovedPackageRepository, 103, "27"),
        (FailureKind::ProprietaryToolchainUnavailable, 72, "19"),
        (FailureKind::ImplicitEnvironmentDependency, 57, "15"),
        (FailureKind::Other, 19, "5"),
    ];
    for (kind, count, _) in causes {
        records.extend(records_for(&format!("proj-{kind:?}"), count, 0, kind));
    }
    let report = aggregate_reconstruction(&records);
    assert_eq!(report.failed(), 380);
    for (kind, count, pct) in causes {
        assert_eq!(report.cause_histogram[&kind], count);
        assert_eq!(percent_integer(count, 380), pct, "{kind:?}");
    }
    let rendered = report.render_table();
    for needle in [
        "Hardware dependency missing",
        "129",
        "34%",
        "27%",
        "19%",
        "15%",
        "5%",
    ] {
        assert!(
            rendered.contains(needle),
            "table should contain {needle:?}:\n{rendered}"
        );
    }
    println!("criterion 04 PASS: cause histogram renders 34/27/19/15/5 percent");
}

// ------------------------------------------------------------------
// Criterion 5: per-project fidelity report percentages.
// ------------------------------------------------------------------
#[test]
fn c05_fidelity_report_arithmetic() {
    let mut verdicts = Vec::new();
    verdicts.extend(verdicts_for("RTEMS", 21, 20, 19));
    verdicts.extend(verdicts_for("Zephyr", 23, 23, 22));
    verdicts.extend(verdicts_for("OpenIPC", 1, 1, 1));
    verdicts.extend(verdicts_for("STM32", 5, 5, 5));
    let report = aggregate_fidelity(&verdicts);

    let expect = [
        ("RTEMS", "95.2", "90.5"),
        ("Zephyr", "100", "95.7"),
        ("OpenIPC", "100", "100"),
        ("STM32", "100", "100"),
    ];
    for (project, outcome_pct, structure_pct) in expect {
        let c = &report.per_project[project];
        assert_eq!(
            percent_one_decimal(c.outcome_pass, c.n),
            outcome_pct,
            "{project} outcome"
        );
        assert_eq!(
            percent_one_decimal(c.structure_pass, c.n),
            structure_pct,
            "{project} structure"
        );
    }
    assert_eq!(report.overall.n, 50);
    assert_eq!(percent_one_decimal(report.overall.outcome_pass, 50), "98");
    assert_eq!(percent_one_decimal(report.overall.structure_pass, 50), "94");
    let rendered = report.render_table();
    for needle in [
        "20/21 (95.2%)",
        "19/21 (90.5%)",
        "22/23 (95.7%)",
        "49/50 (98%)",
        "47/50 (94%)",
    ] {
        assert!(
            rendered.contains(needle),
            "table should contain {needle:?}:\n{rendered}"
        );
    }
    println!("criterion 05 PASS: fidelity percentages reproduce exactly");
}

// ------------------------------------------------------------------
// Criterion 6: stratification — apportionment of 50 over the published
// strata yields the published composition, checked against a
// brute-force oracle.
// ------------------------------------------------------------------
#[test]
fn c06_stratification() {
    let sizes = [31u64, 444, 1784, 1989];
    let quotas = sample_quotas(&sizes, 50);
    assert_eq!(quotas, vec![1, 5, 21, 23], "published sample composition");

    // brute-force oracle: floor shares, then hand out leftovers by the
    // largest fractional remainder, then enforce one per stratum by
    // taking from the largest quota
    let total = 50f64;
    let sum: u64 = sizes.iter().sum();
    let mut oracle: Vec<u64> = sizes
        .iter()
        .map(|&s| (s as f64 * total / sum as f64).floor() as u64)
        .collect();
    let mut leftover = 50 - oracle.iter().sum::<u64>();
    let mut bumped = vec![false; sizes.len()];
    while leftover > 0 {
        let (best, _) = sizes
            .iter()
            .enumerate()
            .filter(|&(i, _)| !bumped[i])
            .map(|(i, &s)| {
                let share = s as f64 * total / sum as f64;
                (i, share - share.floor())
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        oracle[best] += 1;
        bumped[best] = true;
        leftover -= 1;
    }
    while let Some(zero) = oracle.iter().position(|&q| q == 0) {
        let donor = oracle
            .iter()
            .enumerate()
            .max_by_key(|&(_, &q)| q)
            .map(|(i, _)| i)
            .unwrap();
        oracle[donor] -= 1;
        oracle[zero] += 1;
    }
    assert_eq!(
        quotas, oracle,
        "implementation disagrees with the brute-force oracle"
    );

    // proportionality: every quota within one of its exact share
    for (&q, &s) in quotas.iter().zip(&sizes) {
        let share = s as f64 * total / sum as f64;
        assert!((q as f64 - share).abs() < 1.0, "quota {q} vs share {share}");
    }
    println!("criterion 06 PASS: apportionment of 50 over the strata yields 1/5/21/23");
}

// ------------------------------------------------------------------
// Criterion 7: stability property suite over 200 randomized logs —
// idempotence, permutation/timestamp invariance, and equivalence
// relation structure.
// ------------------------------------------------------------------
#[test]
fn c07_stability_suite() {
    let catalog = PatternCatalog::builtin();
    let profile = StageProfile::builtin(ProjectFamily::Generic);
    let cfg = NormalizationConfig::default();
    let norm = |text: &str| normalize(text, None, LogSource::OriginalCi, &cfg, &profile, catalog);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut normalized = Vec::new();
    for _ in 0..200 {
        let log = SynthLog::generate(&mut rng);
        let original = log.render(&mut rng);
        let perturbed = log.render_permuted(&mut rng);

        // (b) permuting located diagnostics and perturbing timestamps
        // is invisible
        let a = norm(&original);
        let b = norm(&perturbed);
        assert_eq!(a, b, "stability violated:\n{original}\nvs\n{perturbed}");

        // (a) idempotence over the rendered form
        let rendered = render_normalized(&a);
        let rp = render_profile(&a, profile.family);
        let again = normalize(&rendered, Some(a.outcome), a.source, &cfg, &rp, catalog);
        assert_eq!(a, again, "normalize is not idempotent for:\n{rendered}");

        normalized.push(a);
    }

    // (c) equivalence relation on sampled triples
    for log in &normalized {
        assert!(structure_equivalence(log, log).unwrap(), "reflexivity");
    }
    for _ in 0..500 {
        let a = &normalized[rng.random_range(0..normalized.len())];
        let b = &normalized[rng.random_range(0..normalized.len())];
        let c = &normalized[rng.random_range(0..normalized.len())];
        let ab = structure_equivalence(a, b).unwrap();
        let ba = structure_equivalence(b, a).unwrap();
        assert_eq!(ab, ba, "symmetry");
        if ab && structure_equivalence(b, c).unwrap() {
            assert!(structure_equivalence(a, c).unwrap(), "transitivity");
        }
    }
    println!("criterion 07 PASS: stability suite holds on 200 randomized logs");
}

// ------------------------------------------------------------------
// Criterion 8: hierarchy — structure equivalence implies outcome
// equivalence on every produced verdict; violating construction and
// decoding are rejected.
// ------------------------------------------------------------------
#[test]
fn c08_hierarchy() {
    let catalog = PatternCatalog::builtin();
    let profile = StageProfile::builtin(ProjectFamily::Generic);
    let cfg = NormalizationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let mut pool = Vec::new();
    for _ in 0..60 {
        let log = SynthLog::generate(&mut rng);
        let a = normalize(
            &log.render(&mut rng),
            None,
            LogSource::OriginalCi,
            &cfg,
            &profile,
            catalog,
        );
        let mut b = normalize(
            &log.render_permuted(&mut rng),
            None,
            LogSource::Reconstructed,
            &cfg,
            &profile,
            catalog,
        );
        b.source = LogSource::Reconstructed;
        pool.push(a);
        pool.push(b);
    }
    let run = sample_run("widget", 1, RunConclusion::Failure, true);
    let mut produced = 0;
    for _ in 0..400 {
        let a = &pool[rng.random_range(0..pool.len())];
        let b = &pool[rng.random_range(0..pool.len())];
        let verdict = phantomrun_core::fidelity::compare_pair(&run, a, b).unwrap();
        if verdict.structure_equivalent() {
            assert!(verdict.outcome_equivalent(), "hierarchy violated");
        }
        assert_eq!(verdict.outcome_equivalent(), outcome_equivalence(a, b));
        produced += 1;
    }
    assert!(produced == 400);

    // attempted construction of a violating verdict is rejected
    assert!(FidelityVerdict::new(run.clone(), false, true, None).is_err());
    let json = format!(
        r#"{{"run":{},"outcome_equivalent":false,"structure_equivalent":true,"mismatch_note":null}}"#,
        serde_json::to_string(&run).unwrap()
    );
    assert!(serde_json::from_str::<FidelityVerdict>(&json).is_err());
    println!("criterion 08 PASS: structure => outcome on all verdicts; violations rejected");
}

// ------------------------------------------------------------------
// Criterion 9: plan determinism over 500 randomized BuildSpecs, plus
// env-ordering and fail-fast inspection of the emitted scripts.
// ------------------------------------------------------------------
#[test]
fn c09_plan_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let images = ["ubuntu:22.04", "gcc:12", "debian:bookworm", "alpine:3.19"];
    let commands = [
        "make all",
        "./configure",
        "gcc main.c",
        "west build -b native_posix",
        "cmake -S . -B build",
    ];
    for _ in 0..500 {
        let mut env = indexmap::IndexMap::new();
        for i in 0..rng.random_range(0..5) {
            env.insert(
                format!("VAR_{i}"),
                format!("value '{}'", rng.random_range(0..100)),
            );
        }
        let mut matrix = indexmap::IndexMap::new();
        for i in 0..rng.random_range(0..3) {
            matrix.insert(format!("axis{i}"), format!("v{}", rng.random_range(0..4)));
        }
        let spec = BuildSpec {
            base_os_image: images.choose(&mut rng).unwrap().to_string(),
            env_vars: env,
            setup_commands: (0..rng.random_range(0..3))
                .map(|_| commands.choose(&mut rng).unwrap().to_string())
                .collect(),
            build_commands: (0..rng.random_range(1..4))
                .map(|_| commands.choose(&mut rng).unwrap().to_string())
                .collect(),
            matrix_axes: matrix,
            source_ref: SourceRef {
                repo: sample_repo("widget"),
                commit_sha: format!("{:08x}", rng.random::<u32>()),
            },
        };

        let a = emit_container_plan(&spec);
        let b = emit_container_plan(&spec);
        assert_eq!(a.dockerfile_text.as_bytes(), b.dockerfile_text.as_bytes());
        assert_eq!(
            a.build_script_text.as_bytes(),
            b.build_script_text.as_bytes()
        );
        assert_eq!(a.context_label, b.context_label);

        // contracts on inspection
        assert!(a
            .dockerfile_text
            .starts_with(&format!("FROM {}\n", spec.base_os_image)));
        let script = &a.build_script_text;
        assert!(script.starts_with("#!/bin/sh\n"));
        assert!(script.contains("\nset -eu\n"), "fail-fast contract");
        let first_command_pos = spec
            .setup_commands
            .iter()
            .chain(&spec.build_commands)
            .next()
            .map(|c| script.find(c.as_str()).expect("command present"))
            .unwrap();
        let mut last_export = 0;
        for (key, _) in &spec.env_vars {
            let pos = script
                .find(&format!("export {key}="))
                .expect("env exported");
            assert!(pos > last_export, "exports in extraction order");
            assert!(pos < first_command_pos, "exports before the first command");
            last_export = pos;
        }
    }
    println!("criterion 09 PASS: 500 specs emit byte-identical plans with ordered env");
}

// ------------------------------------------------------------------
// Criterion 10: end-to-end desk-scale replay in a real container
// runtime, twice; skipped with a clear message when no runtime exists.
// The stub-runtime pipeline equivalent runs unconditionally below.
// ------------------------------------------------------------------
#[test]
fn c10_end_to_end_replay() {
    if !docker_available() {
        eprintln!(
            "SKIP criterion 10: no container runtime available (docker probe failed); \
             the stub-runtime pipeline test covers the flow"
        );
        println!("criterion 10 SKIP: container runtime unavailable");
        return;
    }
    match end_to_end(None) {
        Ok(()) => println!("criterion 10 PASS: two real-container replays agree"),
        Err(e) if e.contains("registry") => {
            eprintln!("SKIP criterion 10: runtime present but cannot pull images ({e})");
            println!("criterion 10 SKIP: container registry unreachable");
        }
        Err(e) => panic!("{e}"),
    }
}

/// The same pipeline through a stub runtime that executes build scripts
/// on the host; exercises mine -> reconstruct -> parse -> compare fully
/// offline and without a container engine.
#[test]
fn end_to_end_with_stub_runtime() {
    let staging = tempfile::tempdir().unwrap();
    let program = stub_runtime_program(staging.path());
    end_to_end(Some(program)).unwrap();
    println!("pipeline PASS: stub-runtime end-to-end replay agrees twice");
}

/// Mines the toy project from the offline fixture forge into two fresh
/// datasets, reconstructs and parses both, and checks both fidelity
/// dimensions between the two replays (and against the original).
fn end_to_end(runtime_program: Option<std::path::PathBuf>) -> Result<(), String> {
    let toy = toy_project(TOY_WORKFLOW);
    let datasets = tempfile::tempdir().unwrap();
    let mut replays = Vec::new();
    let mut manifests = Vec::new();

    for n in 0..2 {
        let dataset = datasets.path().join(format!("ds{n}"));
        let mut ctx = match &runtime_program {
            Some(program) => offline_context(&toy, &dataset, program),
            None => {
                let mut ctx = offline_context(&toy, &dataset, std::path::Path::new("docker"));
                ctx.config.runtime.probe_args = vec!["version".into()];
                ctx
            }
        };
        ctx.fail_fast = true;

        let code = cmd_mine(
            &ctx,
            &MineArgs {
                forge: Forge::Github,
                repos: vec!["acme/blinky".into()],
            },
        )
        .map_err(|e| format!("mine failed: {e:#}"))?;
        assert_eq!(code, 0);

        let store = ArtifactStore::open(&dataset).unwrap();
        let manifest = Manifest::load(&store.manifest_path()).unwrap();
        assert_eq!(
            manifest.latest().len(),
            1,
            "the validity filter keeps exactly the failing build run"
        );
        manifests.push(std::fs::read(store.manifest_path()).unwrap());

        let code = cmd_reconstruct(
            &ctx,
            &ReconstructArgs {
                run_ids: vec![],
                plan_only: false,
            },
        )
        .map_err(|e| format!("reconstruct failed: {e:#}"))?;
        assert_eq!(code, 0);

        let manifest = Manifest::load(&store.manifest_path()).unwrap();
        let row = manifest.latest()[0].clone();
        let record = row
            .record
            .clone()
            .ok_or("row has no reconstruction record")?;
        if !record.is_reconstructed() {
            let evidence = record
                .cause()
                .map(|c| c.evidence.clone())
                .unwrap_or_default();
            if evidence.contains("pull access denied")
                || evidence.contains("manifest unknown")
                || evidence.to_lowercase().contains("registry")
                || evidence.to_lowercase().contains("resolve")
            {
                return Err(format!("registry unavailable: {evidence}"));
            }
            return Err(format!("reconstruction failed: {evidence}"));
        }
        assert_eq!(
            record.outcome(),
            Some(BuildOutcome::Failure),
            "replay must fail to build"
        );

        let code = cmd_parse(
            &ctx,
            &ParseArgs {
                logs: vec![],
                run_ids: vec![],
            },
        )
        .map_err(|e| format!("parse failed: {e:#}"))?;
        assert_eq!(code, 0);

        let manifest = Manifest::load(&store.manifest_path()).unwrap();
        let row = manifest.latest()[0].clone();
        let load = |role: ArtifactRole| -> NormalizedLog {
            let id = row
                .artifacts
                .get(&role)
                .expect("normalized artifact present");
            serde_json::from_slice(&store.get(id).unwrap()).unwrap()
        };
        let original = load(ArtifactRole::OriginalNormalized);
        let replay = load(ArtifactRole::ReplayNormalized);
        assert_eq!(original.outcome, BuildOutcome::Failure);
        assert_eq!(replay.outcome, BuildOutcome::Failure);
        assert!(outcome_equivalence(&original, &replay));

        let code = cmd_compare(
            &ctx,
            &CompareArgs {
                run_ids: vec![],
                sample: None,
                seed: 0,
            },
        )
        .map_err(|e| format!("compare failed: {e:#}"))?;
        assert_eq!(code, 0);
        let manifest = Manifest::load(&store.manifest_path()).unwrap();
        let verdict = manifest.latest()[0]
            .verdict
            .clone()
            .expect("verdict recorded");
        assert!(
            verdict.outcome_equivalent(),
            "original and replay share the failing outcome"
        );

        let code = cmd_report(&ctx).map_err(|e| format!("report failed: {e:#}"))?;
        assert_eq!(code, 0);

        replays.push(replay);
    }

    // deterministic mining: both datasets produced identical manifests
    assert_eq!(
        manifests[0], manifests[1],
        "offline mining must be deterministic"
    );

    // the two replays agree on both fidelity dimensions
    assert!(outcome_equivalence(&replays[0], &replays[1]));
    let mut second = replays[1].clone();
    second.source = replays[0].source;
    assert!(
        structure_equivalence(&replays[0], &second).unwrap(),
        "replays must be structure-equivalent"
    );
    Ok(())
}

// ------------------------------------------------------------------
// Criterion 11: store durability — bit-exact round-trip, corruption
// detection, and manifest truncation recovery at every byte offset.
// ------------------------------------------------------------------
#[test]
fn c11_store_durability() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path().join("ds")).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut content = vec![0u8; 4096];
    rng.fill(&mut content[..]);
    let id = store.put(&content, ArtifactKind::RawLog).unwrap();
    assert_eq!(store.get(&id).unwrap(), content, "bit-exact round-trip");

    // single-byte corruption is detected
    let path = store.artifact_path(&id);
    let mut tampered = content.clone();
    tampered[2048] ^= 0x01;
    std::fs::write(&path, &tampered).unwrap();
    assert!(matches!(
        store.get(&id),
        Err(StoreError::DigestMismatch { .. })
    ));

    // truncation recovery over a 10-row manifest
    let manifest_path = dir.path().join(MANIFEST_FILE);
    let mut writer = ManifestWriter::open(&manifest_path).unwrap();
    for i in 0..10 {
        writer
            .append(ManifestRow::new(
                sample_run("widget", i, RunConclusion::Failure, true),
                "",
            ))
            .unwrap();
    }
    let full = std::fs::read(&manifest_path).unwrap();
    let line_ends: Vec<usize> = full
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .map(|(i, _)| i + 1)
        .collect();
    assert_eq!(line_ends.len(), 10);
    let trunc = dir.path().join("truncated.jsonl");
    for cut in 0..=full.len() {
        std::fs::write(&trunc, &full[..cut]).unwrap();
        let recovered = Manifest::load(&trunc).unwrap();
        let complete = line_ends.iter().filter(|&&e| e <= cut).count()
            + usize::from(line_ends.iter().any(|&e| e == cut + 1));
        assert_eq!(recovered.rows().len(), complete, "cut at byte {cut}");
    }
    println!("criterion 11 PASS: round-trip, corruption detection, truncation recovery");
}

// ------------------------------------------------------------------
// Criterion 12: filename schema suite — all four schemas parse and
// round-trip; 100 random non-matching names are unknown.
// ------------------------------------------------------------------
#[test]
fn c12_filename_schemas() {
    let known = [
        ("pr-1234.log", "pr_plain"),
        ("pr-88__stm32f4.log", "pr_target"),
        ("proj42_mr17_sha0abc123.log", "proj_mr_sha"),
        ("openipc_Firmware(hi3516ev200).log", "firmware_hw"),
    ];
    for (name, scheme) in known {
        let meta = parse_filename_metadata(name);
        assert_eq!(meta.scheme_name(), scheme, "{name}");
        let rendered = render_filename(&meta).unwrap();
        assert_eq!(
            parse_filename_metadata(&rendered),
            meta,
            "round-trip via {rendered}"
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let alphabet: Vec<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
    let mut seen = BTreeSet::new();
    for _ in 0..100 {
        // alphanumeric stems carry none of the schema separators, so no
        // scheme can match regardless of the draw
        let len = rng.random_range(1..24);
        let stem: String = (0..len)
            .map(|_| alphabet.choose(&mut rng).unwrap())
            .collect();
        let ext = ["", ".log", ".txt"].choose(&mut rng).unwrap();
        let name = format!("{stem}{ext}");
        seen.insert(name.clone());
        assert_eq!(
            parse_filename_metadata(&name),
            LogMetadata::Unknown,
            "{name}"
        );
    }
    assert!(seen.len() > 50, "names were actually random");
    println!("criterion 12 PASS: schemas round-trip; 100 random names are unknown");
}
