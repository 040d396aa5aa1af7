//! Synthetic build-log generation for property suites.
//!
//! Generates structured logs whose diagnostics are drawn from the builtin
//! pattern catalog's vocabulary, renders them with randomized timestamps,
//! and can re-render them with located diagnostics permuted within each
//! stage — the nondeterminism normalization must absorb.

use rand::prelude::IndexedRandom;
use rand::Rng;

const FILES: &[&str] = &["src/a.c", "src/b.c", "lib/util.c", "drivers/gpio.c"];

const ERROR_MESSAGES: &[&str] = &[
    "'foo' undeclared",
    "'count' undeclared (first use in this function)",
    "expected ';' before '}' token",
    "invalid operands to binary + (have 'int *' and 'char *')",
    "conflicting types for 'init'",
];

const WARNING_MESSAGES: &[&str] = &[
    "unused variable 'v'",
    "implicit declaration of function 'probe'",
    "comparison of integer expressions of different signedness",
];

const NOISE: &[&str] = &[
    "downloading dependencies",
    "installed toolchain bundle",
    "+ set -euo pipefail",
    "banner: embedded build bot",
    "done",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthStageKind {
    Preamble,
    Configure,
    Make,
}

impl SynthStageKind {
    fn marker_line(self) -> Option<&'static str> {
        match self {
            SynthStageKind::Preamble => None,
            SynthStageKind::Configure => Some("checking for gcc... yes"),
            SynthStageKind::Make => Some("make all -j4"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthItem {
    /// A single-line located compiler diagnostic.
    Located {
        file: &'static str,
        line: u32,
        column: u32,
        error: bool,
        message: &'static str,
    },
    /// An unlocated tool diagnostic tied to the stage kind.
    Unlocated(&'static str),
    Noise(&'static str),
}

impl SynthItem {
    fn render(&self) -> String {
        match self {
            SynthItem::Located {
                file,
                line,
                column,
                error,
                message,
            } => {
                let sev = if *error { "error" } else { "warning" };
                format!("{file}:{line}:{column}: {sev}: {message}")
            }
            SynthItem::Unlocated(line) => line.to_string(),
            SynthItem::Noise(line) => line.to_string(),
        }
    }

    pub fn is_located(&self) -> bool {
        matches!(self, SynthItem::Located { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthStage {
    pub kind: SynthStageKind,
    pub items: Vec<SynthItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthLog {
    pub stages: Vec<SynthStage>,
}

impl SynthLog {
    pub fn generate(rng: &mut impl Rng) -> SynthLog {
        let mut stages = Vec::new();
        if rng.random_bool(0.5) {
            stages.push(SynthStage {
                kind: SynthStageKind::Preamble,
                items: gen_items(rng, SynthStageKind::Preamble, 0..3),
            });
        }
        if rng.random_bool(0.7) {
            stages.push(SynthStage {
                kind: SynthStageKind::Configure,
                items: gen_items(rng, SynthStageKind::Configure, 0..4),
            });
        }
        stages.push(SynthStage {
            kind: SynthStageKind::Make,
            items: gen_items(rng, SynthStageKind::Make, 1..6),
        });
        SynthLog { stages }
    }

    /// Renders to log text, prefixing a random subset of lines with
    /// timestamps drawn from `rng`.
    pub fn render(&self, rng: &mut impl Rng) -> String {
        let mut out = String::new();
        for stage in &self.stages {
            if let Some(marker) = stage.kind.marker_line() {
                push_line(&mut out, rng, marker);
            }
            for item in &stage.items {
                push_line(&mut out, rng, &item.render());
            }
        }
        out
    }

    /// Renders without any timestamp prefixes.
    pub fn render_plain(&self) -> String {
        let mut out = String::new();
        for stage in &self.stages {
            if let Some(marker) = stage.kind.marker_line() {
                out.push_str(marker);
                out.push('\n');
            }
            for item in &stage.items {
                out.push_str(&item.render());
                out.push('\n');
            }
        }
        out
    }

    /// Renders with the located diagnostics of each stage permuted among
    /// their line slots (unlocated lines stay put), with fresh timestamps.
    pub fn render_permuted(&self, rng: &mut impl Rng) -> String {
        let mut permuted = self.clone();
        for stage in &mut permuted.stages {
            let slots: Vec<usize> = stage
                .items
                .iter()
                .enumerate()
                .filter(|(_, it)| it.is_located())
                .map(|(i, _)| i)
                .collect();
            let mut located: Vec<SynthItem> =
                slots.iter().map(|&i| stage.items[i].clone()).collect();
            for i in (1..located.len()).rev() {
                let j = rng.random_range(0..=i);
                located.swap(i, j);
            }
            for (slot, item) in slots.into_iter().zip(located) {
                stage.items[slot] = item;
            }
        }
        permuted.render(rng)
    }

    pub fn has_error(&self) -> bool {
        self.stages
            .iter()
            .flat_map(|s| &s.items)
            .any(|it| match it {
                SynthItem::Located { error, .. } => *error,
                SynthItem::Unlocated(_) => true,
                SynthItem::Noise(_) => false,
            })
    }
}

fn gen_items(
    rng: &mut impl Rng,
    kind: SynthStageKind,
    count: std::ops::Range<usize>,
) -> Vec<SynthItem> {
    let n = rng.random_range(count);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let roll: f64 = rng.random();
        if roll < 0.55 {
            let error = rng.random_bool(0.6);
            let message = if error {
                ERROR_MESSAGES.choose(rng).unwrap()
            } else {
                WARNING_MESSAGES.choose(rng).unwrap()
            };
            items.push(SynthItem::Located {
                file: FILES.choose(rng).unwrap(),
                line: rng.random_range(1..500),
                column: rng.random_range(1..80),
                error,
                message,
            });
        } else if roll < 0.75 {
            let line = match kind {
                SynthStageKind::Make => "make[2]: *** [package] Error 2",
                SynthStageKind::Configure => {
                    "configure: error: C compiler cannot create executables"
                }
                SynthStageKind::Preamble => {
                    items.push(SynthItem::Noise(NOISE.choose(rng).unwrap()));
                    continue;
                }
            };
            items.push(SynthItem::Unlocated(line));
        } else {
            items.push(SynthItem::Noise(NOISE.choose(rng).unwrap()));
        }
    }
    items
}

fn push_line(out: &mut String, rng: &mut impl Rng, line: &str) {
    match rng.random_range(0..3u8) {
        0 => {
            let s = rng.random_range(0..60);
            out.push_str(&format!("2025-10-03T12:00:{s:02}Z "));
        }
        1 => {
            let s = rng.random_range(0..60);
            out.push_str(&format!("[12:34:{s:02}] "));
        }
        _ => {}
    }
    out.push_str(line);
    out.push('\n');
}
