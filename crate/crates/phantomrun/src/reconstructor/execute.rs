//! Rebuild execution through an external container runtime.
//!
//! The runtime is a narrow command contract: `build -t <tag> <ctx>` to
//! build the image, `run --rm -v <src>:/src -v <script>:/phantomrun/build.sh:ro
//! -w /src <tag> /bin/sh /phantomrun/build.sh` to execute. The binary name
//! and extra flags come from config, so a stub program can stand in for
//! docker/podman in tests.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use phantomrun_core::model::{BuildOutcome, FailureCause};

use super::checkout::SourceTree;
use super::plan::ContainerPlan;
use crate::store::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum ExecuteError {
    #[error("container runtime unavailable: {0}")]
    RuntimeUnavailable(String),
    #[error("image build failed ({})", cause.kind.display_name())]
    ImageBuildFailed { cause: FailureCause, log: Vec<u8> },
    #[error("replay exceeded the {}s wall-clock cap", timeout.as_secs())]
    Timeout { timeout: Duration, log: Vec<u8> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of one containerized replay.
#[derive(Debug, Clone)]
pub struct ReplayResult {
    pub outcome: BuildOutcome,
    pub exit_code: i32,
    /// Combined stdout+stderr, captured verbatim.
    pub log: Vec<u8>,
    pub wall_time: Duration,
    pub context_label: String,
}

#[derive(Debug, Clone)]
pub struct ContainerRuntime {
    pub program: String,
    pub extra_args: Vec<String>,
    pub probe_args: Vec<String>,
    pub timeout: Duration,
}

impl ContainerRuntime {
    /// True when the runtime binary answers its probe invocation.
    pub fn available(&self) -> bool {
        Command::new(&self.program)
            .args(&self.extra_args)
            .args(&self.probe_args)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    }

    /// Builds the plan's image and runs the build script with the source
    /// tree mounted. The plan is never written into the tree.
    pub fn execute(
        &self,
        plan: &ContainerPlan,
        source: &SourceTree,
    ) -> Result<ReplayResult, ExecuteError> {
        let staging = tempfile::tempdir()?;
        let ctx_dir = staging.path().join("ctx");
        std::fs::create_dir(&ctx_dir)?;
        std::fs::write(ctx_dir.join("Dockerfile"), &plan.dockerfile_text)?;
        let script_path = staging.path().join("build.sh");
        std::fs::write(&script_path, &plan.build_script_text)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            std::fs::set_permissions(&script_path, std::fs::Permissions::from_mode(0o755))?;
        }

        let tag = format!(
            "phantomrun-{}",
            &sha256_hex(plan.dockerfile_text.as_bytes())[..12]
        );

        let start = Instant::now();
        let build = self.invoke(
            &["build", "-t", &tag, &ctx_dir.to_string_lossy()],
            self.timeout,
        )?;
        match build {
            Invocation::TimedOut { log } => {
                return Err(ExecuteError::Timeout {
                    timeout: self.timeout,
                    log,
                })
            }
            Invocation::Finished { exit_code, log } if exit_code != 0 => {
                let cause = super::causes::classify_reconstruction_failure(&log);
                return Err(ExecuteError::ImageBuildFailed { cause, log });
            }
            Invocation::Finished { .. } => {}
        }

        let remaining = self.timeout.saturating_sub(start.elapsed());
        let src_mount = format!("{}:/src", source.path.to_string_lossy());
        let script_mount = format!("{}:/phantomrun/build.sh:ro", script_path.to_string_lossy());
        let run = self.invoke(
            &[
                "run",
                "--rm",
                "-v",
                &src_mount,
                "-v",
                &script_mount,
                "-w",
                "/src",
                &tag,
                "/bin/sh",
                "/phantomrun/build.sh",
            ],
            remaining,
        )?;
        match run {
            Invocation::TimedOut { log } => Err(ExecuteError::Timeout {
                timeout: self.timeout,
                log,
            }),
            Invocation::Finished { exit_code, log } => Ok(ReplayResult {
                outcome: if exit_code == 0 {
                    BuildOutcome::Success
                } else {
                    BuildOutcome::Failure
                },
                exit_code,
                log,
                wall_time: start.elapsed(),
                context_label: plan.context_label.clone(),
            }),
        }
    }

    /// Runs `program extra_args args...` with stdout and stderr merged
    /// into one verbatim stream (via `sh -c 'exec "$0" "$@" 2>&1'`) and a
    /// wall-clock cap. The child runs in its own process group so a
    /// timeout kills the whole tree, not just the shell.
    fn invoke(&self, args: &[&str], timeout: Duration) -> Result<Invocation, ExecuteError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(r#"exec "$0" "$@" 2>&1"#)
            .arg(&self.program)
            .args(&self.extra_args)
            .args(args)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| ExecuteError::RuntimeUnavailable(format!("{}: {e}", self.program)))?;
        let pgid = child.id() as i32;

        let mut stdout = child.stdout.take().expect("stdout is piped");
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + timeout;
        let status = loop {
            match child.try_wait()? {
                Some(status) => break Some(status),
                None if Instant::now() >= deadline => {
                    #[cfg(unix)]
                    unsafe {
                        libc::killpg(pgid, libc::SIGKILL);
                    }
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                None => std::thread::sleep(Duration::from_millis(20)),
            }
        };
        #[cfg(not(unix))]
        let _ = pgid;

        let mut log = out_reader.join().unwrap_or_default();
        log.extend(err_reader.join().unwrap_or_default());

        match status {
            None => Ok(Invocation::TimedOut { log }),
            Some(status) => Ok(Invocation::Finished {
                exit_code: status.code().unwrap_or(-1),
                log,
            }),
        }
    }
}

enum Invocation {
    Finished { exit_code: i32, log: Vec<u8> },
    TimedOut { log: Vec<u8> },
}
