//! Prompt rendering for both tasks, with and without the task hint.
//!
//! The wording lives in template files under `templates/` so changes to the
//! exact text stay diffable; the plain-text layout is frozen by golden
//! tests. Rendering is deterministic and injective on instances.

use crate::domain::{Instance, Task};
use crate::error::{Error, Result};

const ACTIVITY_TEMPLATE: &str = include_str!("../templates/activity.txt");
const LIS_TEMPLATE: &str = include_str!("../templates/lis.txt");
const ACTIVITY_HINT: &str = include_str!("../templates/activity_hint.txt");
const LIS_HINT: &str = include_str!("../templates/lis_hint.txt");

/// Which prompt to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptVariant {
    pub task: Task,
    pub hinted: bool,
}

impl PromptVariant {
    pub fn new(task: Task, hinted: bool) -> Self {
        Self { task, hinted }
    }
}

/// Formats minutes since midnight as zero-padded 24-hour `HH:MM`.
pub fn format_time(minutes: u32) -> Result<String> {
    if minutes >= 24 * 60 {
        return Err(Error::TimeOutOfRange { minutes });
    }
    Ok(format!("{:02}:{:02}", minutes / 60, minutes % 60))
}

fn activity_table(instance: &crate::domain::ActivityInstance) -> Result<String> {
    let mut lines = vec!["ID Start End".to_string()];
    for a in instance.activities() {
        lines.push(format!(
            "{} {} {}",
            a.id,
            format_time(a.start)?,
            format_time(a.finish)?
        ));
    }
    Ok(lines.join("\n"))
}

fn lis_table(instance: &crate::domain::LisInstance) -> String {
    let mut lines = vec!["ID Value".to_string()];
    for r in instance.rows() {
        lines.push(format!("{} {}", r.id, r.value));
    }
    lines.join("\n")
}

fn fill(template: &str, table: &str, hint: &str, hinted: bool) -> String {
    let out = template.replace("{{table}}", table);
    if hinted {
        out.replace("{{hint}}", hint.trim_end())
    } else {
        // Drop the hint line entirely, including its newline.
        out.replace("{{hint}}\n", "")
    }
}

/// Renders the full prompt text for an instance. Errors if the instance's
/// task does not match the requested variant.
pub fn render_prompt(instance: &Instance, variant: PromptVariant) -> Result<String> {
    if instance.task() != variant.task {
        return Err(Error::TaskMismatch {
            expected: variant.task,
            got: instance.task(),
        });
    }
    match instance {
        Instance::Activity(a) => Ok(fill(
            ACTIVITY_TEMPLATE,
            &activity_table(a)?,
            ACTIVITY_HINT,
            variant.hinted,
        )),
        Instance::Lis(l) => Ok(fill(LIS_TEMPLATE, &lis_table(l), LIS_HINT, variant.hinted)),
    }
}
