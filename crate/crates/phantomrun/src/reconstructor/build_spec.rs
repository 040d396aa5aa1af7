//! Build-spec extraction from CI configuration files.
//!
//! A deliberately bounded YAML subset is supported: plain jobs with
//! step/script lists, env at workflow/job/step level, scalar matrix axes,
//! `runs-on`/`image`/`container` image resolution, and a small adapter
//! table for third-party action steps. Anything outside the subset
//! (reusable workflows, composite actions, `include:` files, conditional
//! or secrets-dependent steps) fails with a precise unsupported-config
//! reason instead of drifting silently.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use once_cell::sync::Lazy;
use phantomrun_core::model::{BuildSpec, RepositoryRef, SourceRef};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_yaml::Value;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ExtractError {
    #[error("unsupported CI configuration: {reason}")]
    UnsupportedConfig { reason: String },
    #[error("job {selector:?} not found in any CI configuration file")]
    JobNotFound { selector: String },
    #[error("no CI configuration file found")]
    NoConfigFile,
    #[error("YAML parse error in {file}: {message}")]
    Yaml { file: String, message: String },
}

fn unsupported(reason: impl Into<String>) -> ExtractError {
    ExtractError::UnsupportedConfig {
        reason: reason.into(),
    }
}

/// How to translate a `uses:` action step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum ActionAdapter {
    /// Contributes nothing (e.g. checkout: the baseline is mounted).
    #[serde(with = "skip_keyword")]
    Skip,
    /// Contributes setup commands.
    Commands { commands: Vec<String> },
}

mod skip_keyword {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("skip")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let word = String::deserialize(d)?;
        if word == "skip" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!(
                "unknown action adapter {word:?}"
            )))
        }
    }
}

/// A job found in a CI configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobRef {
    pub file: PathBuf,
    pub job_key: String,
    pub display_name: String,
}

static MATRIX_EXPR: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\$\{\{\s*matrix\.([A-Za-z0-9_-]+)\s*\}\}").unwrap());

fn is_github_workflow(path: &Path) -> bool {
    path.starts_with(".github/workflows")
}

fn is_gitlab_config(path: &Path) -> bool {
    path == Path::new(".gitlab-ci.yml")
}

const GITLAB_RESERVED: &[&str] = &[
    "stages",
    "image",
    "variables",
    "before_script",
    "after_script",
    "default",
    "include",
    "workflow",
    "services",
    "cache",
    "types",
];

fn parse_yaml(path: &Path, text: &str) -> Result<Value, ExtractError> {
    serde_yaml::from_str(text).map_err(|e| ExtractError::Yaml {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

fn as_mapping<'v>(value: &'v Value, what: &str) -> Result<&'v serde_yaml::Mapping, ExtractError> {
    value
        .as_mapping()
        .ok_or_else(|| unsupported(format!("{what} is not a mapping")))
}

fn scalar_to_string(value: &Value, what: &str) -> Result<String, ExtractError> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Tagged(_) => Err(unsupported(format!(
            "{what} uses a YAML tag (e.g. !reference)"
        ))),
        _ => Err(unsupported(format!("{what} is not a scalar"))),
    }
}

/// Lists the jobs defined across all recognized CI config files.
pub fn list_jobs(config_files: &BTreeMap<PathBuf, String>) -> Result<Vec<JobRef>, ExtractError> {
    let mut jobs = Vec::new();
    for (path, text) in config_files {
        let doc = parse_yaml(path, text)?;
        if is_github_workflow(path) {
            let Some(jobs_map) = doc.get("jobs").and_then(Value::as_mapping) else {
                continue;
            };
            for (key, job) in jobs_map {
                let Some(key) = key.as_str() else { continue };
                let display = job
                    .get("name")
                    .and_then(Value::as_str)
                    .unwrap_or(key)
                    .to_string();
                jobs.push(JobRef {
                    file: path.clone(),
                    job_key: key.to_string(),
                    display_name: display,
                });
            }
        } else if is_gitlab_config(path) {
            let map = as_mapping(&doc, "gitlab-ci document")?;
            for (key, value) in map {
                let Some(key) = key.as_str() else { continue };
                if GITLAB_RESERVED.contains(&key) || key.starts_with('.') {
                    continue;
                }
                if value
                    .as_mapping()
                    .map(|m| m.contains_key("script"))
                    .unwrap_or(false)
                {
                    jobs.push(JobRef {
                        file: path.clone(),
                        job_key: key.to_string(),
                        display_name: key.to_string(),
                    });
                }
            }
        }
    }
    if jobs.is_empty() && config_files.is_empty() {
        return Err(ExtractError::NoConfigFile);
    }
    Ok(jobs)
}

fn find_job<'v>(
    docs: &'v BTreeMap<PathBuf, Value>,
    selector: &str,
) -> Result<(&'v Path, &'v Value), ExtractError> {
    for (path, doc) in docs {
        if is_github_workflow(path) {
            if let Some(job) = doc.get("jobs").and_then(|j| j.get(selector)) {
                return Ok((path, job));
            }
        } else if is_gitlab_config(path)
            && !GITLAB_RESERVED.contains(&selector)
            && !selector.starts_with('.')
        {
            if let Some(job) = doc.get(selector) {
                if job
                    .as_mapping()
                    .map(|m| m.contains_key("script"))
                    .unwrap_or(false)
                {
                    return Ok((path, job));
                }
            }
        }
    }
    Err(ExtractError::JobNotFound {
        selector: selector.to_string(),
    })
}

fn parse_docs(
    config_files: &BTreeMap<PathBuf, String>,
) -> Result<BTreeMap<PathBuf, Value>, ExtractError> {
    if config_files.is_empty() {
        return Err(ExtractError::NoConfigFile);
    }
    config_files
        .iter()
        .filter(|(p, _)| is_github_workflow(p) || is_gitlab_config(p))
        .map(|(p, t)| Ok((p.clone(), parse_yaml(p, t)?)))
        .collect()
}

/// Enumerates the concrete matrix instances of a job: the cartesian
/// product of its scalar axes in declaration order, or one empty instance
/// for non-matrix jobs.
pub fn matrix_instances(
    config_files: &BTreeMap<PathBuf, String>,
    job_selector: &str,
) -> Result<Vec<IndexMap<String, String>>, ExtractError> {
    let docs = parse_docs(config_files)?;
    let (path, job) = find_job(&docs, job_selector)?;
    if is_gitlab_config(path) {
        if job.get("parallel").is_some() {
            return Err(unsupported("gitlab parallel/matrix jobs"));
        }
        return Ok(vec![IndexMap::new()]);
    }
    let Some(matrix) = job.get("strategy").and_then(|s| s.get("matrix")) else {
        return Ok(vec![IndexMap::new()]);
    };
    let matrix = as_mapping(matrix, "strategy.matrix")?;
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for (axis, values) in matrix {
        let axis = axis
            .as_str()
            .ok_or_else(|| unsupported("non-string matrix axis"))?;
        if axis == "include" || axis == "exclude" {
            return Err(unsupported("matrix include/exclude"));
        }
        let values = values
            .as_sequence()
            .ok_or_else(|| unsupported(format!("matrix axis {axis:?} is not a list")))?;
        let mut rendered = Vec::with_capacity(values.len());
        for v in values {
            rendered.push(scalar_to_string(v, &format!("matrix axis {axis:?} value"))?);
        }
        axes.push((axis.to_string(), rendered));
    }
    let mut instances: Vec<IndexMap<String, String>> = vec![IndexMap::new()];
    for (axis, values) in &axes {
        let mut next = Vec::with_capacity(instances.len() * values.len());
        for instance in &instances {
            for value in values {
                let mut inst = instance.clone();
                inst.insert(axis.clone(), value.clone());
                next.push(inst);
            }
        }
        instances = next;
    }
    Ok(instances)
}

struct Substituter<'a> {
    matrix: &'a IndexMap<String, String>,
}

impl Substituter<'_> {
    fn apply(&self, text: &str, what: &str) -> Result<String, ExtractError> {
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for caps in MATRIX_EXPR.captures_iter(text) {
            let whole = caps.get(0).unwrap();
            let axis = &caps[1];
            let value = self.matrix.get(axis).ok_or_else(|| {
                unsupported(format!("{what} references unbound matrix axis {axis:?}"))
            })?;
            out.push_str(&text[last..whole.start()]);
            out.push_str(value);
            last = whole.end();
        }
        out.push_str(&text[last..]);
        if out.contains("${{") {
            let expr = out[out.find("${{").unwrap()..]
                .chars()
                .take(40)
                .collect::<String>();
            return Err(unsupported(format!(
                "{what} uses an unsupported expression: {expr}"
            )));
        }
        Ok(out)
    }
}

fn collect_env(
    target: &mut IndexMap<String, String>,
    value: Option<&Value>,
    subst: &Substituter<'_>,
    what: &str,
) -> Result<(), ExtractError> {
    let Some(value) = value else { return Ok(()) };
    let map = as_mapping(value, what)?;
    for (k, v) in map {
        let k = k
            .as_str()
            .ok_or_else(|| unsupported(format!("{what} key is not a string")))?;
        let v = scalar_to_string(v, &format!("{what} value for {k:?}"))?;
        target.insert(k.to_string(), subst.apply(&v, what)?);
    }
    Ok(())
}

fn shell_quote(value: &str) -> String {
    format!("'{}'", value.replace('\'', r"'\''"))
}

/// Extracts a normalized BuildSpec for one job instance.
pub fn extract_build_spec(
    config_files: &BTreeMap<PathBuf, String>,
    job_selector: &str,
    matrix_instance: &IndexMap<String, String>,
    repo: &RepositoryRef,
    commit_sha: &str,
    runner_images: &BTreeMap<String, String>,
    actions: &BTreeMap<String, ActionAdapter>,
) -> Result<BuildSpec, ExtractError> {
    let docs = parse_docs(config_files)?;
    let (path, job) = find_job(&docs, job_selector)?;
    let doc = &docs[path];
    let subst = Substituter {
        matrix: matrix_instance,
    };

    let (base_os_image, env_vars, setup_commands, build_commands) = if is_github_workflow(path) {
        extract_github(doc, job, &subst, runner_images, actions)?
    } else {
        extract_gitlab(doc, job, &subst)?
    };

    if build_commands.is_empty() {
        return Err(unsupported(format!(
            "job {job_selector:?} has no build commands"
        )));
    }

    Ok(BuildSpec {
        base_os_image,
        env_vars,
        setup_commands,
        build_commands,
        matrix_axes: matrix_instance.clone(),
        source_ref: SourceRef {
            repo: repo.clone(),
            commit_sha: commit_sha.to_string(),
        },
    })
}

type Extracted = (String, IndexMap<String, String>, Vec<String>, Vec<String>);

fn extract_github(
    doc: &Value,
    job: &Value,
    subst: &Substituter<'_>,
    runner_images: &BTreeMap<String, String>,
    actions: &BTreeMap<String, ActionAdapter>,
) -> Result<Extracted, ExtractError> {
    let job_map = as_mapping(job, "job")?;
    if job_map.contains_key("uses") {
        return Err(unsupported("reusable workflow job (jobs.<id>.uses)"));
    }
    if job_map.contains_key("secrets") {
        return Err(unsupported("secrets-dependent job"));
    }

    // image: container wins over the runs-on label mapping
    let base_os_image = if let Some(container) = job.get("container") {
        match container {
            Value::String(s) => subst.apply(s, "container image")?,
            other => {
                let image = other
                    .get("image")
                    .and_then(Value::as_str)
                    .ok_or_else(|| unsupported("container without an image"))?;
                subst.apply(image, "container image")?
            }
        }
    } else {
        let runs_on = job
            .get("runs-on")
            .ok_or_else(|| unsupported("job without runs-on"))?;
        let label = match runs_on {
            Value::String(s) => s.clone(),
            Value::Sequence(labels) => labels
                .first()
                .and_then(Value::as_str)
                .ok_or_else(|| unsupported("empty runs-on label list"))?
                .to_string(),
            _ => return Err(unsupported("runs-on is not a label or label list")),
        };
        let label = subst.apply(&label, "runs-on")?;
        runner_images
            .get(&label)
            .cloned()
            .ok_or_else(|| unsupported(format!("no image mapping for runner label {label:?}")))?
    };

    let mut env_vars = IndexMap::new();
    collect_env(&mut env_vars, doc.get("env"), subst, "workflow env")?;
    collect_env(&mut env_vars, job.get("env"), subst, "job env")?;

    let steps = job
        .get("steps")
        .and_then(Value::as_sequence)
        .ok_or_else(|| unsupported("job without a steps list"))?;

    let mut setup_commands = Vec::new();
    let mut build_commands = Vec::new();
    for (i, step) in steps.iter().enumerate() {
        let step_map = as_mapping(step, "step")?;
        if step_map.contains_key("if") {
            return Err(unsupported(format!("step {i} has a condition (if:)")));
        }
        if let Some(uses) = step.get("uses") {
            let uses = uses
                .as_str()
                .ok_or_else(|| unsupported(format!("step {i} uses is not a string")))?;
            let action = uses.split('@').next().unwrap_or(uses);
            match actions.get(action) {
                Some(ActionAdapter::Skip) => {}
                Some(ActionAdapter::Commands { commands }) => {
                    for c in commands {
                        setup_commands.push(subst.apply(c, "action adapter command")?);
                    }
                }
                None => {
                    return Err(unsupported(format!("unknown action {uses:?} (step {i})")));
                }
            }
            continue;
        }
        if let Some(run) = step.get("run") {
            let run = run
                .as_str()
                .ok_or_else(|| unsupported(format!("step {i} run is not a string")))?;
            let mut command = subst.apply(run.trim_end(), "run step")?;
            let mut step_env = IndexMap::new();
            collect_env(&mut step_env, step.get("env"), subst, "step env")?;
            if !step_env.is_empty() {
                if command.contains('\n') {
                    return Err(unsupported(format!(
                        "step {i} combines step-level env with a multi-line script"
                    )));
                }
                let prefix: Vec<String> = step_env
                    .iter()
                    .map(|(k, v)| format!("{k}={}", shell_quote(v)))
                    .collect();
                command = format!("{} {command}", prefix.join(" "));
            }
            build_commands.push(command);
            continue;
        }
        return Err(unsupported(format!("step {i} has neither run nor uses")));
    }

    Ok((base_os_image, env_vars, setup_commands, build_commands))
}

fn extract_gitlab(
    doc: &Value,
    job: &Value,
    subst: &Substituter<'_>,
) -> Result<Extracted, ExtractError> {
    let map = as_mapping(doc, "gitlab-ci document")?;
    if map.contains_key("include") {
        return Err(unsupported("gitlab include: files"));
    }
    let job_map = as_mapping(job, "job")?;
    if job_map.contains_key("extends") {
        return Err(unsupported("gitlab extends:"));
    }
    if job_map.contains_key("trigger") {
        return Err(unsupported("gitlab trigger jobs"));
    }
    if job_map.contains_key("parallel") {
        return Err(unsupported("gitlab parallel/matrix jobs"));
    }

    let image_value = job.get("image").or_else(|| doc.get("image"));
    let base_os_image = match image_value {
        Some(Value::String(s)) => subst.apply(s, "image")?,
        Some(other) => {
            let name = other
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| unsupported("image without a name"))?;
            subst.apply(name, "image")?
        }
        None => return Err(unsupported("no image declared for job or pipeline")),
    };

    let mut env_vars = IndexMap::new();
    collect_env(
        &mut env_vars,
        doc.get("variables"),
        subst,
        "global variables",
    )?;
    collect_env(&mut env_vars, job.get("variables"), subst, "job variables")?;

    let script_list = |value: Option<&Value>, what: &str| -> Result<Vec<String>, ExtractError> {
        let Some(value) = value else {
            return Ok(Vec::new());
        };
        match value {
            Value::String(s) => Ok(vec![subst.apply(s, what)?]),
            Value::Sequence(items) => items
                .iter()
                .map(|v| {
                    let s = scalar_to_string(v, what)?;
                    subst.apply(&s, what)
                })
                .collect(),
            _ => Err(unsupported(format!("{what} is not a command list"))),
        }
    };

    // job-level before_script replaces the global one
    let setup_commands = if job_map.contains_key("before_script") {
        script_list(job.get("before_script"), "before_script")?
    } else {
        script_list(doc.get("before_script"), "before_script")?
    };
    let build_commands = script_list(job.get("script"), "script")?;

    Ok((base_os_image, env_vars, setup_commands, build_commands))
}
