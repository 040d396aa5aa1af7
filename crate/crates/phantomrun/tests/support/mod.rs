//! Shared fixtures: an offline forge, a toy failing project, a stub
//! container runtime, and table-shaped record/verdict builders.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use phantomrun::cli::{AppContext, OutputFormat};
use phantomrun::config::PipelineConfig;
use phantomrun::miner::write_fixture;
use phantomrun_core::model::*;

pub fn sample_repo(name: &str) -> RepositoryRef {
    RepositoryRef::new(
        Forge::Github,
        "acme",
        name,
        "C",
        42,
        ["embedded".to_string()].into_iter().collect(),
    )
    .unwrap()
}

pub fn sample_run(project: &str, id: u64, conclusion: RunConclusion, is_build: bool) -> CIRun {
    CIRun {
        repo: sample_repo(project),
        run_id: id.to_string(),
        integration_kind: IntegrationKind::PullRequest,
        integration_id: (id % 997).to_string(),
        commit_sha: format!("{id:07x}"),
        conclusion,
        workflow_name: if is_build {
            "build".into()
        } else {
            "docs".into()
        },
        is_build_workflow: is_build,
        created_at: "2025-09-01T10:00:00Z".parse().unwrap(),
    }
}

/// `count` records for one project, the first `reconstructed` of them
/// successful, the rest failed with `cause`.
pub fn records_for(
    project: &str,
    attempts: u64,
    reconstructed: u64,
    cause: FailureKind,
) -> Vec<ReconstructionRecord> {
    (0..attempts)
        .map(|i| ReconstructionRecord {
            run: sample_run(project, i, RunConclusion::Failure, true),
            status: if i < reconstructed {
                ReconstructionStatus::Reconstructed {
                    outcome: BuildOutcome::Failure,
                }
            } else {
                ReconstructionStatus::Failed {
                    cause: FailureCause {
                        kind: cause,
                        evidence: "fixture evidence".into(),
                    },
                }
            },
            log_artifact_id: None,
        })
        .collect()
}

pub fn verdicts_for(
    project: &str,
    n: u64,
    outcome_pass: u64,
    structure_pass: u64,
) -> Vec<FidelityVerdict> {
    assert!(structure_pass <= outcome_pass && outcome_pass <= n);
    (0..n)
        .map(|i| {
            let outcome = i < outcome_pass;
            let structure = i < structure_pass;
            FidelityVerdict::new(
                sample_run(project, i, RunConclusion::Failure, true),
                outcome,
                structure,
                None,
            )
            .unwrap()
        })
        .collect()
}

fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .args(args)
        .current_dir(dir)
        .env("GIT_AUTHOR_NAME", "fixture")
        .env("GIT_AUTHOR_EMAIL", "fixture@invalid")
        .env("GIT_COMMITTER_NAME", "fixture")
        .env("GIT_COMMITTER_EMAIL", "fixture@invalid")
        .output()
        .expect("git runs");
    assert!(
        out.status.success(),
        "git {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

pub struct ToyProject {
    /// Keep-alive for all fixture paths.
    pub root: tempfile::TempDir,
    /// Directory usable as `github_clone_base` (contains acme/blinky).
    pub clone_base: PathBuf,
    pub commit_sha: String,
    pub fixtures_dir: PathBuf,
    pub base_url: String,
    /// The log text served for the original CI run.
    pub original_log: String,
}

pub const TOY_MAIN_C: &str = "int main(void) {\n    return undeclared_thing;\n}\n";

pub const TOY_WORKFLOW: &str = "\
name: build
jobs:
  build:
    runs-on: ubuntu-22.04
    container: gcc:12
    steps:
      - uses: actions/checkout@v4
      - run: gcc -o app main.c
";

/// Builds the bundled toy project (one translation unit with an injected
/// undeclared identifier plus a minimal workflow), records the host
/// compiler's diagnostics as the "original CI log", and writes an offline
/// forge fixture serving one failing build run (plus one failing docs run
/// and one successful build run that the filter must drop).
pub fn toy_project(workflow: &str) -> ToyProject {
    let root = tempfile::tempdir().unwrap();
    let clone_base = root.path().join("forge-repos");
    let repo_dir = clone_base.join("acme").join("blinky");
    std::fs::create_dir_all(&repo_dir).unwrap();
    std::fs::write(repo_dir.join("main.c"), TOY_MAIN_C).unwrap();
    let wf_dir = repo_dir.join(".github/workflows");
    std::fs::create_dir_all(&wf_dir).unwrap();
    std::fs::write(wf_dir.join("build.yml"), workflow).unwrap();
    git(&repo_dir, &["init", "--quiet", "--initial-branch=main"]);
    git(&repo_dir, &["add", "-A"]);
    git(&repo_dir, &["commit", "--quiet", "-m", "toy project"]);
    let commit_sha = git(&repo_dir, &["rev-parse", "HEAD"]);

    // the original diagnostics come from the real compiler, so the
    // original log and a host-side replay agree exactly
    let gcc = Command::new("gcc")
        .args(["-o", "/dev/null", "main.c"])
        .current_dir(&repo_dir)
        .output()
        .expect("gcc runs");
    assert!(
        !gcc.status.success(),
        "the toy project must fail to compile"
    );
    let diagnostics = String::from_utf8_lossy(&gcc.stderr).to_string();

    let mut original_log = String::new();
    original_log.push_str("2025-09-01T10:00:00.0000000Z ##[group]Run gcc -o app main.c\n");
    for line in diagnostics.lines() {
        original_log.push_str("2025-09-01T10:00:01.0000000Z ");
        original_log.push_str(line);
        original_log.push('\n');
    }
    original_log
        .push_str("2025-09-01T10:00:02.0000000Z ##[error]Process completed with exit code 1.\n");

    let base_url = "https://forge.invalid".to_string();
    let fixtures_dir = root.path().join("fixtures");
    write_forge_fixtures(&fixtures_dir, &base_url, &commit_sha, &original_log);

    ToyProject {
        root,
        clone_base,
        commit_sha,
        fixtures_dir,
        base_url,
        original_log,
    }
}

fn write_forge_fixtures(dir: &Path, base: &str, sha: &str, log: &str) {
    let repo_json = serde_json::json!({
        "name": "blinky",
        "owner": {"login": "acme"},
        "language": "C",
        "stargazers_count": 42,
        "topics": ["embedded"],
    });
    write_fixture(
        dir,
        &format!("{base}/repos/acme/blinky"),
        200,
        &repo_json.to_string(),
    )
    .unwrap();

    let runs = serde_json::json!({
        "total_count": 3,
        "workflow_runs": [
            {
                "id": 101,
                "name": "build",
                "head_sha": sha,
                "event": "pull_request",
                "conclusion": "failure",
                "created_at": "2025-09-01T10:00:00Z",
                "pull_requests": [{"number": 7}],
            },
            {
                "id": 102,
                "name": "docs",
                "head_sha": sha,
                "event": "pull_request",
                "conclusion": "failure",
                "created_at": "2025-09-01T09:00:00Z",
                "pull_requests": [{"number": 7}],
            },
            {
                "id": 103,
                "name": "build",
                "head_sha": sha,
                "event": "pull_request",
                "conclusion": "success",
                "created_at": "2025-09-01T08:00:00Z",
                "pull_requests": [{"number": 6}],
            },
        ],
    });
    write_fixture(
        dir,
        &format!("{base}/repos/acme/blinky/actions/runs?per_page=100&page=1"),
        200,
        &runs.to_string(),
    )
    .unwrap();
    write_fixture(
        dir,
        &format!("{base}/repos/acme/blinky/actions/runs?per_page=100&page=2"),
        200,
        r#"{"total_count":3,"workflow_runs":[]}"#,
    )
    .unwrap();

    write_fixture(
        dir,
        &format!("{base}/repos/acme/blinky/actions/runs/101/jobs?per_page=100"),
        200,
        r#"{"jobs":[{"id":9001,"name":"build","conclusion":"failure"}]}"#,
    )
    .unwrap();
    write_fixture(
        dir,
        &format!("{base}/repos/acme/blinky/actions/jobs/9001/logs"),
        200,
        log,
    )
    .unwrap();
}

/// Writes a stub container runtime: `build` is a no-op, `run` executes
/// the mounted build script on the host against the source mount.
pub fn stub_runtime_program(dir: &Path) -> PathBuf {
    let program = dir.join("stub-runtime.sh");
    std::fs::write(
        &program,
        r#"#!/bin/sh
cmd="$1"; shift
case "$cmd" in
  probe) exit 0 ;;
  build) exit 0 ;;
  run)
    src=""; script=""
    while [ $# -gt 0 ]; do
      case "$1" in
        -w) shift ;;
        -v)
          shift
          case "$1" in
            *:/src) src="${1%:/src}" ;;
            *:/phantomrun/build.sh:ro) script="${1%:/phantomrun/build.sh:ro}" ;;
          esac
          ;;
        *) ;;
      esac
      shift
    done
    PHANTOMRUN_SRC="$src" exec /bin/sh "$script"
    ;;
  *) exit 64 ;;
esac
"#,
    )
    .unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&program, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    program
}

/// Offline AppContext over a toy project, with the given runtime program
/// and a fresh dataset root.
pub fn offline_context(toy: &ToyProject, dataset: &Path, runtime_program: &Path) -> AppContext {
    let mut config = PipelineConfig {
        dataset_root: dataset.to_path_buf(),
        ..PipelineConfig::default()
    };
    config.forge.github_base_url = toy.base_url.clone();
    config.forge.github_clone_base = toy.clone_base.to_string_lossy().to_string();
    config.runtime.program = runtime_program.to_string_lossy().to_string();
    config.runtime.probe_args = vec!["probe".into()];
    config.runtime.timeout_minutes = 5;
    AppContext {
        config,
        offline: true,
        fixtures: Some(toy.fixtures_dir.clone()),
        record: false,
        jobs: 1,
        format: OutputFormat::Human,
        fail_fast: false,
        skip_existing: false,
        verbose: false,
    }
}

pub fn docker_available() -> bool {
    Command::new("docker")
        .arg("version")
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}
