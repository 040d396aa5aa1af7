//! The five pipeline commands.

use std::io::Write as _;

use anyhow::Context as _;
use phantomrun_core::fidelity::{
    aggregate_fidelity, aggregate_reconstruction, compare_pair, sample_stratified, FidelityError,
};
use phantomrun_core::logparse::{normalize, parse_filename_metadata, PatternCatalog, StageProfile};
use phantomrun_core::model::{
    BuildOutcome, CIRun, FailureCause, FailureKind, LogSource, NormalizedLog, ReconstructionRecord,
    ReconstructionStatus, RepositoryRef, RunConclusion,
};

use super::{
    AppContext, CompareArgs, ConfigUsageError, MineArgs, OutputFormat, ParseArgs, ReconstructArgs,
    EXIT_OK,
};
use crate::miner::{
    discover_repositories, enumerate_runs, fetch_log, fetch_repository, filter_valid,
    scan_compilation_markers, MinerError,
};
use crate::reconstructor::{
    checkout_baseline, emit_container_plan, extract_build_spec, list_jobs, matrix_instances,
    read_ci_config_files, ContainerRuntime, ExecuteError, JobRef,
};
use crate::store::{
    ArtifactKind, ArtifactRole, ArtifactStore, Manifest, ManifestRow, ManifestWriter, MANIFEST_FILE,
};

fn print_machine<T: serde::Serialize>(value: &T) {
    let line = serde_json::to_string(value).expect("machine rows serialize");
    println!("{line}");
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigUsageError(msg.into()))
}

// ---------------------------------------------------------------- mine

#[derive(Default)]
struct MineStats {
    repos_scanned: usize,
    runs_seen: usize,
    runs_valid: usize,
    rows_written: usize,
    rows_skipped: usize,
    logs_expired: usize,
    no_markers: usize,
    run_errors: usize,
}

pub fn cmd_mine(ctx: &AppContext, args: &MineArgs) -> anyhow::Result<i32> {
    let store = ctx.store()?;
    let mut writer = ManifestWriter::open(store.manifest_path())?;
    let session = ctx.session(args.forge).map_err(anyhow::Error::new)?;
    let criteria = &ctx.config.discovery;
    let filter = &ctx.config.workflow_filter;
    let fc = &ctx.config.forge;

    let repos: Vec<RepositoryRef> = if args.repos.is_empty() {
        discover_repositories(&session, criteria, fc.per_page, fc.page_cap)
            .context("repository discovery failed")?
    } else {
        let mut repos = Vec::new();
        for slug in &args.repos {
            let (owner, name) = slug
                .split_once('/')
                .ok_or_else(|| usage(format!("--repo must be owner/name, got {slug:?}")))?;
            repos.push(fetch_repository(&session, owner, name)?);
        }
        repos
    };

    let mut stats = MineStats {
        repos_scanned: repos.len(),
        ..Default::default()
    };
    for repo in &repos {
        if ctx.verbose {
            eprintln!("mining {}", repo.slug());
        }
        let runs = enumerate_runs(
            &session,
            repo,
            criteria.window_end,
            filter,
            fc.per_page,
            fc.page_cap,
        )?;
        stats.runs_seen += runs.len();
        let valid = filter_valid(&runs);
        stats.runs_valid += valid.len();
        for run in valid {
            let key = (run.repo.slug(), run.run_id.clone(), String::new());
            if writer.contains(&key) {
                stats.rows_skipped += 1;
                if !ctx.skip_existing {
                    eprintln!("row for {}#{} already present, skipping", key.0, key.1);
                }
                continue;
            }
            match fetch_log(&session, &run) {
                Ok((bytes, filename)) => {
                    let scan = scan_compilation_markers(&bytes);
                    if !scan.is_compilation_failure {
                        stats.no_markers += 1;
                        continue;
                    }
                    let id = store.put(&bytes, ArtifactKind::RawLog)?;
                    store.link_raw_log(&id, &filename)?;
                    let mut row = ManifestRow::new(run, "");
                    row.artifacts.insert(ArtifactRole::OriginalLog, id);
                    writer.append(row.clone())?;
                    stats.rows_written += 1;
                    if ctx.format == OutputFormat::Machine {
                        print_machine(&row);
                    }
                }
                Err(MinerError::LogExpired { run_id, .. }) => {
                    stats.logs_expired += 1;
                    if ctx.verbose {
                        eprintln!("log expired for run {run_id}");
                    }
                }
                Err(e) if !ctx.fail_fast => {
                    stats.run_errors += 1;
                    eprintln!("run {}: {e}", run.run_id);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    if ctx.format == OutputFormat::Human {
        println!(
            "repos scanned: {}\nruns seen: {}\nruns kept by filter: {}\nlogs harvested: {}\nlogs expired: {}\nlogs without compilation markers: {}\nrows skipped (already present): {}\nper-run errors: {}",
            stats.repos_scanned,
            stats.runs_seen,
            stats.runs_valid,
            stats.rows_written,
            stats.logs_expired,
            stats.no_markers,
            stats.rows_skipped,
            stats.run_errors,
        );
    }
    Ok(EXIT_OK)
}

// -------------------------------------------------------- reconstruct

fn failure_record(run: &CIRun, kind: FailureKind, evidence: String) -> ReconstructionRecord {
    ReconstructionRecord {
        run: run.clone(),
        status: ReconstructionStatus::Failed {
            cause: FailureCause { kind, evidence },
        },
        log_artifact_id: None,
    }
}

fn pick_job<'a>(jobs: &'a [JobRef], filter: &crate::config::WorkflowFilter) -> Option<&'a JobRef> {
    jobs.iter()
        .find(|j| filter.is_build_workflow(&j.display_name) || filter.is_build_workflow(&j.job_key))
        .or_else(|| jobs.first())
}

pub fn cmd_reconstruct(ctx: &AppContext, args: &ReconstructArgs) -> anyhow::Result<i32> {
    let store = ctx.store()?;
    let mut writer = ManifestWriter::open(store.manifest_path())?;

    let pending: Vec<ManifestRow> = writer
        .latest_rows()
        .filter(|row| row.record.is_none())
        .filter(|row| args.run_ids.is_empty() || args.run_ids.contains(&row.run.run_id))
        .cloned()
        .collect();
    // targets already carrying a record: a matrix job's base row stays
    // pending, but its finished instances must not replay again
    let recorded: std::collections::BTreeSet<crate::store::RowKey> = writer
        .latest_rows()
        .filter(|row| row.record.is_some())
        .map(|row| row.key())
        .collect();

    let runtime = ContainerRuntime {
        program: ctx.config.runtime.program.clone(),
        extra_args: ctx.config.runtime.extra_args.clone(),
        probe_args: ctx.config.runtime.probe_args.clone(),
        timeout: std::time::Duration::from_secs(ctx.config.runtime.timeout_minutes * 60),
    };
    if !args.plan_only && !runtime.available() {
        return Err(usage(format!(
            "container runtime {:?} is unavailable (probe failed); use --plan-only or configure [runtime]",
            ctx.config.runtime.program
        )));
    }

    let mut reconstructed = 0usize;
    let mut failed = 0usize;
    let mut planned = 0usize;
    let results = parallel_map(ctx.jobs, pending, |row| {
        process_row(ctx, &store, &runtime, row, args.plan_only, &recorded)
    });
    for result in results {
        let extensions = result?;
        for ext in extensions {
            match &ext.record {
                Some(rec) if rec.is_reconstructed() => reconstructed += 1,
                Some(_) => failed += 1,
                None => planned += 1,
            }
            match writer.append(ext.clone()) {
                Ok(()) => {}
                Err(crate::store::StoreError::DuplicateKey { .. }) => {
                    eprintln!("row {:?} unchanged, skipping", ext.key());
                }
                Err(e) => return Err(e.into()),
            }
            if ctx.format == OutputFormat::Machine {
                print_machine(&ext);
            }
        }
    }

    if ctx.format == OutputFormat::Human {
        println!("reconstructed: {reconstructed}\nfailed: {failed}\nplan-only rows: {planned}");
    }
    Ok(EXIT_OK)
}

/// Runs `f` over `items` on up to `jobs` threads, preserving input
/// order in the results. Replays are independent (each owns its source
/// tree); manifest appends happen afterwards on the caller's thread.
fn parallel_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Vec<anyhow::Result<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> anyhow::Result<R> + Sync,
{
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let results: Vec<Mutex<Option<anyhow::Result<R>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let result = f(item);
                *results[i].lock().unwrap() = Some(result);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot was filled"))
        .collect()
}

/// Reconstructs one harvested row, returning row extensions (one per
/// matrix target). Per-run failures become FailureCause records, never
/// batch errors.
fn process_row(
    ctx: &AppContext,
    store: &ArtifactStore,
    runtime: &ContainerRuntime,
    row: &ManifestRow,
    plan_only: bool,
    recorded: &std::collections::BTreeSet<crate::store::RowKey>,
) -> anyhow::Result<Vec<ManifestRow>> {
    let run = &row.run;
    let fail = |kind, evidence: String| -> Vec<ManifestRow> {
        let mut ext = row.clone();
        ext.record = Some(failure_record(run, kind, evidence));
        vec![ext]
    };

    if ctx.verbose {
        eprintln!("reconstructing {}#{}", run.repo.slug(), run.run_id);
    }

    let staging = tempfile::tempdir()?;
    let url = ctx.config.forge.clone_url(&run.repo);
    let source = match checkout_baseline(
        &url,
        &run.commit_sha,
        run.integration_kind,
        Some(&run.integration_id),
        &staging.path().join("src"),
    ) {
        Ok(source) => source,
        Err(e) => return Ok(fail(FailureKind::Other, format!("checkout: {e}"))),
    };

    let files = match read_ci_config_files(&source.path) {
        Ok(files) if !files.is_empty() => files,
        Ok(_) => {
            return Ok(fail(
                FailureKind::Other,
                "unsupported-config: no CI configuration files".into(),
            ))
        }
        Err(e) => return Ok(fail(FailureKind::Other, format!("reading CI config: {e}"))),
    };
    let jobs = match list_jobs(&files) {
        Ok(jobs) if !jobs.is_empty() => jobs,
        Ok(_) => {
            return Ok(fail(
                FailureKind::Other,
                "unsupported-config: no jobs found".into(),
            ))
        }
        Err(e) => return Ok(fail(FailureKind::Other, format!("unsupported-config: {e}"))),
    };
    let job = pick_job(&jobs, &ctx.config.workflow_filter).expect("jobs is non-empty");

    let instances = match matrix_instances(&files, &job.job_key) {
        Ok(instances) => instances,
        Err(e) => return Ok(fail(FailureKind::Other, format!("unsupported-config: {e}"))),
    };

    let mut extensions = Vec::new();
    let single = instances.len() == 1;
    for instance in &instances {
        let target = if single {
            row.target.clone()
        } else {
            instance.values().cloned().collect::<Vec<_>>().join("-")
        };
        let mut ext = row.clone();
        ext.target = target;
        if recorded.contains(&ext.key()) {
            continue;
        }

        let spec = match extract_build_spec(
            &files,
            &job.job_key,
            instance,
            &run.repo,
            &run.commit_sha,
            &ctx.config.runner_images,
            &ctx.config.actions,
        ) {
            Ok(spec) => spec,
            Err(e) => {
                ext.record = Some(failure_record(
                    run,
                    FailureKind::Other,
                    format!("unsupported-config: {e}"),
                ));
                extensions.push(ext);
                continue;
            }
        };

        let plan = emit_container_plan(&spec);
        let dockerfile_id = store.put(plan.dockerfile_text.as_bytes(), ArtifactKind::Dockerfile)?;
        let script_id = store.put(plan.build_script_text.as_bytes(), ArtifactKind::BuildScript)?;
        ext.artifacts
            .insert(ArtifactRole::Dockerfile, dockerfile_id);
        ext.artifacts.insert(ArtifactRole::BuildScript, script_id);

        if plan_only {
            extensions.push(ext);
            continue;
        }

        match runtime.execute(&plan, &source) {
            Ok(result) => {
                let log_id = store.put(&result.log, ArtifactKind::RawLog)?;
                ext.artifacts
                    .insert(ArtifactRole::ReplayLog, log_id.clone());
                ext.record = Some(ReconstructionRecord {
                    run: run.clone(),
                    status: ReconstructionStatus::Reconstructed {
                        outcome: result.outcome,
                    },
                    log_artifact_id: Some(log_id.digest),
                });
            }
            Err(ExecuteError::ImageBuildFailed { cause, log }) => {
                let log_id = store.put(&log, ArtifactKind::RawLog)?;
                ext.artifacts
                    .insert(ArtifactRole::ReplayLog, log_id.clone());
                ext.record = Some(ReconstructionRecord {
                    run: run.clone(),
                    status: ReconstructionStatus::Failed { cause },
                    log_artifact_id: Some(log_id.digest),
                });
            }
            Err(ExecuteError::Timeout { timeout, log }) => {
                let log_id = store.put(&log, ArtifactKind::RawLog)?;
                ext.artifacts
                    .insert(ArtifactRole::ReplayLog, log_id.clone());
                ext.record = Some(ReconstructionRecord {
                    run: run.clone(),
                    status: ReconstructionStatus::Failed {
                        cause: FailureCause {
                            kind: FailureKind::Other,
                            evidence: format!(
                                "replay exceeded the {}s wall-clock cap",
                                timeout.as_secs()
                            ),
                        },
                    },
                    log_artifact_id: Some(log_id.digest),
                });
            }
            Err(e @ ExecuteError::RuntimeUnavailable(_)) => return Err(e.into()),
            Err(ExecuteError::Io(e)) => return Err(e.into()),
        }
        extensions.push(ext);
    }
    Ok(extensions)
}

// -------------------------------------------------------------- parse

fn outcome_from_conclusion(conclusion: RunConclusion) -> Option<BuildOutcome> {
    match conclusion {
        RunConclusion::Success => Some(BuildOutcome::Success),
        RunConclusion::Failure => Some(BuildOutcome::Failure),
        _ => None,
    }
}

pub fn cmd_parse(ctx: &AppContext, args: &ParseArgs) -> anyhow::Result<i32> {
    let catalog = PatternCatalog::builtin();
    let cfg = &ctx.config.normalization;
    let store = ctx.store()?;

    if !args.logs.is_empty() {
        let profile = StageProfile::builtin(ctx.config.profiles.default_family);
        for path in &args.logs {
            let bytes = match std::fs::read(path) {
                Ok(bytes) => bytes,
                Err(e) if !ctx.fail_fast => {
                    eprintln!("{}: {e}", path.display());
                    continue;
                }
                Err(e) => return Err(e).context(format!("reading {}", path.display())),
            };
            let text = String::from_utf8_lossy(&bytes);
            let filename = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            let meta = parse_filename_metadata(filename);
            let log = normalize(&text, None, LogSource::OriginalCi, cfg, &profile, catalog);
            let id = store.put(&serde_json::to_vec(&log)?, ArtifactKind::NormalizedLog)?;
            match ctx.format {
                OutputFormat::Human => println!(
                    "{}: scheme={} stages={} events={} outcome={:?} -> {}",
                    filename,
                    meta.scheme_name(),
                    log.stages.len(),
                    log.event_count(),
                    log.outcome,
                    id.digest
                ),
                OutputFormat::Machine => print_machine(&serde_json::json!({
                    "file": filename,
                    "metadata": meta,
                    "events": log.event_count(),
                    "outcome": log.outcome,
                    "artifact": id,
                })),
            }
        }
        return Ok(EXIT_OK);
    }

    let mut writer = ManifestWriter::open(store.manifest_path())?;
    let rows: Vec<ManifestRow> = writer
        .latest_rows()
        .filter(|row| args.run_ids.is_empty() || args.run_ids.contains(&row.run.run_id))
        .filter(|row| row.artifacts.contains_key(&ArtifactRole::OriginalLog))
        .cloned()
        .collect();

    let mut parsed = 0usize;
    for row in rows {
        let family = ctx.config.family_for(&row.run.repo.name);
        let profile = StageProfile::builtin(family);
        let mut ext = row.clone();

        let original_id = &row.artifacts[&ArtifactRole::OriginalLog];
        let raw = store.get(original_id)?;
        let text = String::from_utf8_lossy(&raw);
        let original = normalize(
            &text,
            outcome_from_conclusion(row.run.conclusion),
            LogSource::OriginalCi,
            cfg,
            &profile,
            catalog,
        );
        let original_events = original.event_count();
        let id = store.put(&serde_json::to_vec(&original)?, ArtifactKind::NormalizedLog)?;
        ext.artifacts.insert(ArtifactRole::OriginalNormalized, id);

        let mut replay_events = None;
        if let (Some(replay_log), Some(record)) =
            (row.artifacts.get(&ArtifactRole::ReplayLog), &row.record)
        {
            let raw = store.get(replay_log)?;
            let text = String::from_utf8_lossy(&raw);
            let replay = normalize(
                &text,
                record.outcome(),
                LogSource::Reconstructed,
                cfg,
                &profile,
                catalog,
            );
            replay_events = Some(replay.event_count());
            let id = store.put(&serde_json::to_vec(&replay)?, ArtifactKind::NormalizedLog)?;
            ext.artifacts.insert(ArtifactRole::ReplayNormalized, id);
        }

        if ext != row {
            match writer.append(ext.clone()) {
                Ok(()) => parsed += 1,
                Err(crate::store::StoreError::DuplicateKey { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        match ctx.format {
            OutputFormat::Human => println!(
                "{}#{}{}: original events={} replay events={}",
                row.run.repo.slug(),
                row.run.run_id,
                if row.target.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", row.target)
                },
                original_events,
                replay_events
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| "-".into()),
            ),
            OutputFormat::Machine => print_machine(&ext),
        }
    }
    if ctx.format == OutputFormat::Human {
        println!("rows updated: {parsed}");
    }
    Ok(EXIT_OK)
}

// ------------------------------------------------------------ compare

fn load_normalized(
    store: &ArtifactStore,
    id: &crate::store::ArtifactId,
) -> anyhow::Result<NormalizedLog> {
    let bytes = store.get(id)?;
    serde_json::from_slice(&bytes).context("decoding normalized log artifact")
}

pub fn cmd_compare(ctx: &AppContext, args: &CompareArgs) -> anyhow::Result<i32> {
    let store = ctx.store()?;
    let mut writer = ManifestWriter::open(store.manifest_path())?;

    let mut rows: Vec<ManifestRow> = writer
        .latest_rows()
        .filter(|row| args.run_ids.is_empty() || args.run_ids.contains(&row.run.run_id))
        .filter(|row| {
            row.artifacts
                .contains_key(&ArtifactRole::OriginalNormalized)
                && row.artifacts.contains_key(&ArtifactRole::ReplayNormalized)
        })
        .cloned()
        .collect();

    if let Some(total) = args.sample {
        let records: Vec<ReconstructionRecord> =
            rows.iter().filter_map(|r| r.record.clone()).collect();
        let sampled = sample_stratified(&records, total, args.seed)
            .map_err(|e| usage(format!("sampling failed: {e}")))?;
        let mut remaining = rows;
        let mut picked = Vec::with_capacity(sampled.len());
        for rec in &sampled {
            if let Some(pos) = remaining
                .iter()
                .position(|r| r.record.as_ref() == Some(rec))
            {
                picked.push(remaining.remove(pos));
            }
        }
        rows = picked;
    }

    let mut verdicts = Vec::new();
    let mut excluded = 0usize;
    for row in &rows {
        let original = load_normalized(&store, &row.artifacts[&ArtifactRole::OriginalNormalized])?;
        let replay = load_normalized(&store, &row.artifacts[&ArtifactRole::ReplayNormalized])?;
        match compare_pair(&row.run, &original, &replay) {
            Ok(verdict) => {
                let mut ext = row.clone();
                ext.verdict = Some(verdict.clone());
                match writer.append(ext) {
                    Ok(()) | Err(crate::store::StoreError::DuplicateKey { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
                if ctx.format == OutputFormat::Machine {
                    print_machine(&verdict);
                }
                verdicts.push(verdict);
            }
            Err(FidelityError::ConfigMismatch { .. }) => {
                excluded += 1;
                eprintln!(
                    "{}#{}: logs normalized under different configurations; excluded from aggregates",
                    row.run.repo.slug(),
                    row.run.run_id
                );
            }
            Err(e) => return Err(e.into()),
        }
    }

    let report = aggregate_fidelity(&verdicts);
    match ctx.format {
        OutputFormat::Human => {
            print!("{}", report.render_table());
            if excluded > 0 {
                println!("excluded (config mismatch): {excluded}");
            }
        }
        OutputFormat::Machine => print_machine(&report),
    }
    let _ = std::io::stdout().flush();
    Ok(EXIT_OK)
}

// ------------------------------------------------------------- report

pub fn cmd_report(ctx: &AppContext) -> anyhow::Result<i32> {
    let root = &ctx.config.dataset_root;
    if !root.exists() {
        return Err(usage(format!(
            "dataset root {} does not exist",
            root.display()
        )));
    }
    let manifest = Manifest::load(&root.join(MANIFEST_FILE))?;
    let records: Vec<ReconstructionRecord> = manifest
        .latest()
        .iter()
        .filter_map(|r| r.record.clone())
        .collect();
    let report = aggregate_reconstruction(&records);
    match ctx.format {
        OutputFormat::Human => print!("{}", report.render_table()),
        OutputFormat::Machine => print_machine(&report),
    }
    Ok(EXIT_OK)
}
