//! Source baseline anchoring via git.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use phantomrun_core::model::IntegrationKind;

#[derive(Debug, thiserror::Error)]
pub enum CheckoutError {
    #[error("clone of {url} failed: {stderr}")]
    CloneFailed { url: String, stderr: String },
    #[error("commit {sha} is unreachable in {url}")]
    CommitUnreachable { sha: String, url: String },
    #[error("git could not run: {0}")]
    GitUnavailable(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A working tree anchored at exactly one commit, recording which
/// integration strategy produced the commit. The tree is exclusively
/// owned by one replay for its duration.
#[derive(Debug)]
pub struct SourceTree {
    pub path: PathBuf,
    pub commit_sha: String,
    pub strategy: IntegrationKind,
}

fn run_git(args: &[&str], cwd: Option<&Path>) -> Result<std::process::Output, CheckoutError> {
    let mut cmd = Command::new("git");
    cmd.args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .stdin(std::process::Stdio::null());
    if let Some(dir) = cwd {
        cmd.current_dir(dir);
    }
    cmd.output()
        .map_err(|e| CheckoutError::GitUnavailable(e.to_string()))
}

/// Clones `url` into `dest` and checks out exactly `commit_sha`,
/// fetching the PR/MR head ref when the commit is not otherwise
/// reachable (head commits of closed integrations are often not).
pub fn checkout_baseline(
    url: &str,
    commit_sha: &str,
    integration_kind: IntegrationKind,
    integration_id: Option<&str>,
    dest: &Path,
) -> Result<SourceTree, CheckoutError> {
    let dest_str = dest.to_string_lossy().to_string();
    let clone = run_git(&["clone", "--quiet", url, &dest_str], None)?;
    if !clone.status.success() {
        return Err(CheckoutError::CloneFailed {
            url: url.to_string(),
            stderr: String::from_utf8_lossy(&clone.stderr).to_string(),
        });
    }

    let have_commit = |sha: &str| {
        run_git(
            &["cat-file", "-e", &format!("{sha}^{{commit}}")],
            Some(dest),
        )
        .map(|o| o.status.success())
        .unwrap_or(false)
    };

    if !have_commit(commit_sha) {
        if let Some(id) = integration_id {
            let head_ref = match integration_kind {
                IntegrationKind::PullRequest => format!("pull/{id}/head"),
                IntegrationKind::MergeRequest => format!("merge-requests/{id}/head"),
            };
            let _ = run_git(&["fetch", "--quiet", "origin", &head_ref], Some(dest))?;
        }
    }
    if !have_commit(commit_sha) {
        return Err(CheckoutError::CommitUnreachable {
            sha: commit_sha.to_string(),
            url: url.to_string(),
        });
    }

    let checkout = run_git(
        &[
            "-c",
            "advice.detachedHead=false",
            "checkout",
            "--quiet",
            commit_sha,
        ],
        Some(dest),
    )?;
    if !checkout.status.success() {
        return Err(CheckoutError::CommitUnreachable {
            sha: commit_sha.to_string(),
            url: url.to_string(),
        });
    }

    Ok(SourceTree {
        path: dest.to_path_buf(),
        commit_sha: commit_sha.to_string(),
        strategy: integration_kind,
    })
}

/// Collects the CI configuration files the extractor understands:
/// workflows under `.github/workflows/` and `.gitlab-ci.yml`.
pub fn read_ci_config_files(tree: &Path) -> Result<BTreeMap<PathBuf, String>, CheckoutError> {
    let mut files = BTreeMap::new();
    let workflows = tree.join(".github/workflows");
    if workflows.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(&workflows)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("yml") | Some("yaml")
                )
            })
            .collect();
        entries.sort();
        for path in entries {
            let text = std::fs::read_to_string(&path)?;
            let rel = path.strip_prefix(tree).unwrap_or(&path).to_path_buf();
            files.insert(rel, text);
        }
    }
    let gitlab_ci = tree.join(".gitlab-ci.yml");
    if gitlab_ci.is_file() {
        files.insert(
            PathBuf::from(".gitlab-ci.yml"),
            std::fs::read_to_string(&gitlab_ci)?,
        );
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a single-commit fixture repository; returns (dir, sha, tree hash).
    pub(crate) fn fixture_repo(files: &[(&str, &str)]) -> (tempfile::TempDir, String, String) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path();
        let git = |args: &[&str]| {
            let out = Command::new("git")
                .args(args)
                .current_dir(path)
                .env("GIT_AUTHOR_NAME", "fixture")
                .env("GIT_AUTHOR_EMAIL", "fixture@invalid")
                .env("GIT_COMMITTER_NAME", "fixture")
                .env("GIT_COMMITTER_EMAIL", "fixture@invalid")
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "git {args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            String::from_utf8_lossy(&out.stdout).trim().to_string()
        };
        git(&["init", "--quiet", "--initial-branch=main"]);
        for (rel, content) in files {
            let p = path.join(rel);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            std::fs::write(p, content).unwrap();
        }
        git(&["add", "-A"]);
        git(&["commit", "--quiet", "-m", "fixture"]);
        let sha = git(&["rev-parse", "HEAD"]);
        let tree = git(&["rev-parse", "HEAD^{tree}"]);
        (dir, sha, tree)
    }

    #[test]
    fn checkout_reproduces_recorded_tree_hash() {
        let (repo, sha, expected_tree) = fixture_repo(&[("src/main.c", "int main(){return 0;}\n")]);
        let dest = tempfile::tempdir().unwrap();
        let url = repo.path().to_string_lossy().to_string();
        let tree = checkout_baseline(
            &url,
            &sha,
            IntegrationKind::PullRequest,
            None,
            &dest.path().join("work"),
        )
        .unwrap();
        assert_eq!(tree.commit_sha, sha);
        assert_eq!(tree.strategy, IntegrationKind::PullRequest);
        let out = Command::new("git")
            .args(["rev-parse", "HEAD^{tree}"])
            .current_dir(&tree.path)
            .output()
            .unwrap();
        let actual_tree = String::from_utf8_lossy(&out.stdout).trim().to_string();
        assert_eq!(actual_tree, expected_tree);
    }

    #[test]
    fn garbage_sha_is_unreachable() {
        let (repo, _, _) = fixture_repo(&[("a", "b")]);
        let dest = tempfile::tempdir().unwrap();
        let url = repo.path().to_string_lossy().to_string();
        let err = checkout_baseline(
            &url,
            "deadbeef0000000",
            IntegrationKind::PullRequest,
            Some("1"),
            &dest.path().join("work"),
        )
        .unwrap_err();
        assert!(matches!(err, CheckoutError::CommitUnreachable { .. }));
    }

    #[test]
    fn merge_request_head_ref_is_fetched() {
        let (repo, base_sha, _) = fixture_repo(&[("a", "b")]);
        let path = repo.path();
        let git = |args: &[&str]| {
            let out = Command::new("git")
                .args(args)
                .current_dir(path)
                .env("GIT_AUTHOR_NAME", "fixture")
                .env("GIT_AUTHOR_EMAIL", "fixture@invalid")
                .env("GIT_COMMITTER_NAME", "fixture")
                .env("GIT_COMMITTER_EMAIL", "fixture@invalid")
                .output()
                .unwrap();
            assert!(out.status.success(), "git {args:?}");
            String::from_utf8_lossy(&out.stdout).trim().to_string()
        };
        // an MR head commit reachable only through the hidden ref
        git(&["checkout", "--quiet", "-b", "mr-branch"]);
        std::fs::write(path.join("mr.txt"), "change").unwrap();
        git(&["add", "-A"]);
        git(&["commit", "--quiet", "-m", "mr head"]);
        let mr_sha = git(&["rev-parse", "HEAD"]);
        git(&["update-ref", "refs/merge-requests/17/head", &mr_sha]);
        git(&["checkout", "--quiet", "main"]);
        git(&["branch", "--quiet", "-D", "mr-branch"]);

        let dest = tempfile::tempdir().unwrap();
        let url = path.to_string_lossy().to_string();
        let tree = checkout_baseline(
            &url,
            &mr_sha,
            IntegrationKind::MergeRequest,
            Some("17"),
            &dest.path().join("work"),
        )
        .unwrap();
        assert_eq!(tree.strategy, IntegrationKind::MergeRequest);
        assert_ne!(mr_sha, base_sha);
        assert!(tree.path.join("mr.txt").exists());
    }

    #[test]
    fn ci_config_discovery() {
        let (repo, _, _) = fixture_repo(&[
            (".github/workflows/build.yml", "jobs: {}\n"),
            (".github/workflows/notes.txt", "not yaml\n"),
            (".gitlab-ci.yml", "build: {script: [make]}\n"),
        ]);
        let files = read_ci_config_files(repo.path()).unwrap();
        let keys: Vec<String> = files
            .keys()
            .map(|p| p.to_string_lossy().to_string())
            .collect();
        assert_eq!(keys, [".github/workflows/build.yml", ".gitlab-ci.yml"]);
    }
}
