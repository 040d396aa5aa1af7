//! Container-plan emission: a Dockerfile plus a POSIX build script,
//! both pure functions of the BuildSpec.

use phantomrun_core::model::BuildSpec;
use serde::{Deserialize, Serialize};

/// Declarative replay plan. Emission is deterministic: identical specs
/// yield byte-identical texts, so plans are content-addressable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerPlan {
    pub dockerfile_text: String,
    pub build_script_text: String,
    /// repo@sha plus the matrix axes of this instance.
    pub context_label: String,
}

fn shell_quote(value: &str) -> String {
    format!("'{}'", value.replace('\'', r"'\''"))
}

pub fn emit_container_plan(spec: &BuildSpec) -> ContainerPlan {
    let context_label = {
        let mut label = format!(
            "{}/{}@{}",
            spec.source_ref.repo.owner, spec.source_ref.repo.name, spec.source_ref.commit_sha
        );
        if !spec.matrix_axes.is_empty() {
            let axes: Vec<String> = spec
                .matrix_axes
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            label.push('+');
            label.push_str(&axes.join(","));
        }
        label
    };

    let dockerfile_text = format!("FROM {}\nWORKDIR /src\n", spec.base_os_image);

    let mut script = String::new();
    script.push_str("#!/bin/sh\n");
    script.push_str(&format!("# replay build for {context_label}\n"));
    script.push_str("set -eu\n");
    for (key, value) in &spec.env_vars {
        script.push_str(&format!("export {key}={}\n", shell_quote(value)));
    }
    // PHANTOMRUN_SRC lets a non-containerized stub runtime point the
    // script at a host checkout; inside a container it is unset.
    script.push_str("cd \"${PHANTOMRUN_SRC:-/src}\"\n");
    for command in spec.setup_commands.iter().chain(&spec.build_commands) {
        script.push_str(command);
        script.push('\n');
    }

    ContainerPlan {
        dockerfile_text,
        build_script_text: script,
        context_label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;
    use phantomrun_core::model::{Forge, RepositoryRef, SourceRef};
    use std::collections::BTreeSet;

    fn spec() -> BuildSpec {
        BuildSpec {
            base_os_image: "ubuntu:22.04".into(),
            env_vars: [
                ("CC".to_string(), "arm-none-eabi-gcc".to_string()),
                ("OPTS".to_string(), "it's -O2".to_string()),
            ]
            .into_iter()
            .collect(),
            setup_commands: vec!["apt-get update".into()],
            build_commands: vec!["gcc main.c".into()],
            matrix_axes: IndexMap::new(),
            source_ref: SourceRef {
                repo: RepositoryRef::new(Forge::Github, "acme", "widget", "C", 42, BTreeSet::new())
                    .unwrap(),
                commit_sha: "0abc1234".into(),
            },
        }
    }

    #[test]
    fn emission_is_deterministic() {
        let s = spec();
        let a = emit_container_plan(&s);
        let b = emit_container_plan(&s);
        assert_eq!(a, b);
        assert_eq!(a.dockerfile_text.as_bytes(), b.dockerfile_text.as_bytes());
        assert_eq!(
            a.build_script_text.as_bytes(),
            b.build_script_text.as_bytes()
        );
    }

    #[test]
    fn dockerfile_starts_with_from() {
        let plan = emit_container_plan(&spec());
        assert!(plan.dockerfile_text.starts_with("FROM ubuntu:22.04\n"));
    }

    #[test]
    fn script_exports_env_in_order_before_any_command() {
        let plan = emit_container_plan(&spec());
        let script = &plan.build_script_text;
        let cc = script.find("export CC='arm-none-eabi-gcc'").unwrap();
        let opts = script.find("export OPTS='it'\\''s -O2'").unwrap();
        let setup = script.find("apt-get update").unwrap();
        let build = script.find("gcc main.c").unwrap();
        assert!(cc < opts && opts < setup && setup < build);
        assert!(
            script.contains("set -eu\n"),
            "fail-fast with preserved exit code"
        );
    }

    #[test]
    fn matrix_axes_reach_the_context_label() {
        let mut s = spec();
        s.matrix_axes.insert("board".into(), "a".into());
        s.matrix_axes.insert("arch".into(), "arm".into());
        let plan = emit_container_plan(&s);
        assert_eq!(plan.context_label, "acme/widget@0abc1234+board=a,arch=arm");
    }

    // golden emission for a minimal spec, reviewed by hand
    #[test]
    fn minimal_spec_golden() {
        let spec = BuildSpec {
            base_os_image: "ubuntu:22.04".into(),
            env_vars: IndexMap::new(),
            setup_commands: vec![],
            build_commands: vec!["gcc main.c".into()],
            matrix_axes: IndexMap::new(),
            source_ref: SourceRef {
                repo: RepositoryRef::new(Forge::Github, "acme", "widget", "C", 42, BTreeSet::new())
                    .unwrap(),
                commit_sha: "0abc1234".into(),
            },
        };
        let plan = emit_container_plan(&spec);
        assert_eq!(plan.dockerfile_text, "FROM ubuntu:22.04\nWORKDIR /src\n");
        assert_eq!(
            plan.build_script_text,
            "#!/bin/sh\n\
             # replay build for acme/widget@0abc1234\n\
             set -eu\n\
             cd \"${PHANTOMRUN_SRC:-/src}\"\n\
             gcc main.c\n"
        );
    }
}
