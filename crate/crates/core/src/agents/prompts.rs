//! Prompt templates for the remote backend. Bump [`PROMPT_VERSION`] whenever
//! any template text changes; it is logged with every exchange.

use std::fmt::Write;

use super::AgentContext;
use crate::channels::CHANNELS;
use crate::evaluation::PanelFeedback;
use crate::morphology::{serialize_design, DesignParams, ParamId};
use crate::reward::{library_terms, MAX_DEPTH, MAX_NODES};

pub const PROMPT_VERSION: &str = "codesign-prompts-1";

pub const DESIGN_SYSTEM: &str = "You are the design agent of a robot co-design loop. \
You edit the body parameters of a planar quadruped. Reply with a JSON array only. \
Each element is {\"param\": <path>, \"kind\": \"absolute\" or \"relative\", \"value\": <number>, \"why\": <text>}. \
A relative value v multiplies the parameter by (1 + v).";

pub const CONTROL_SYSTEM: &str = "You are the control agent of a robot co-design loop. \
You write reward functions in a small expression language evaluated once per simulation step. \
Reply with a JSON object only: {\"reward_dsl\": <expression>, \"why\": <text>}.";

fn context_block(ctx: &AgentContext) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Task: {}", ctx.task_description);
    let _ = writeln!(s, "Round: {}", ctx.round_index);
    let _ = writeln!(
        s,
        "Current design:\n{}",
        serialize_design(&ctx.current_design)
    );
    if let Some(m) = &ctx.last_metrics {
        let _ = writeln!(
            s,
            "Last result: distance {:.3} m, mean speed {:.3} m/s, survival {:.2}, fell {}",
            m.score_s, m.mean_forward_speed, m.survival_frac, m.fell
        );
    }
    let _ = writeln!(s, "Best results so far:\n{}", ctx.archive_digest);
    s
}

fn param_list() -> String {
    let paths: Vec<String> = ParamId::all().map(|p| p.path()).collect();
    format!(
        "Parameter paths: {}. A bare leg field such as upper_len edits both legs.",
        paths.join(", ")
    )
}

pub fn thesis_prompt(ctx: &AgentContext) -> String {
    format!(
        "{}\n{}\nRelative edits are limited to {:.0}% per parameter.\n\
         Propose one edit of 1 to 3 parameters that should make the robot travel further.",
        context_block(ctx),
        param_list(),
        100.0 * ctx.bounds.max_edit_frac
    )
}

pub fn synthesis_prompt(
    ctx: &AgentContext,
    thesis: &DesignParams,
    feedback: &PanelFeedback,
) -> String {
    let mut s = format!(
        "{}\n{}\nThesis design:\n{}\nJudge panel (mean grade {:.2}):\n",
        context_block(ctx),
        param_list(),
        serialize_design(thesis),
        feedback.aggregate_grade
    );
    for v in &feedback.verdicts {
        let _ = writeln!(
            s,
            "- {} ({}): grade {}; strengths: {}; weaknesses: {}",
            v.judge_name,
            v.specialty,
            v.grade,
            v.strengths.join("; "),
            v.weaknesses.join("; ")
        );
    }
    s.push_str("Revise the thesis design to address the panel's weaknesses. The edit applies to the thesis design.");
    s
}

fn language_block() -> String {
    let channels: Vec<&str> = CHANNELS.iter().map(|c| c.name).collect();
    let library: Vec<String> = library_terms()
        .iter()
        .map(|t| format!("{} = {}", t.name, t.source))
        .collect();
    format!(
        "Language: numbers, channel names, unary minus, + - * /, parentheses and the functions \
         abs(x), min(a, b, ...), max(a, b, ...), clip(x, lo, hi), exp(x), tanh(x), sq(x). \
         At most {MAX_DEPTH} levels deep and {MAX_NODES} nodes. Results must stay finite and \
         within 1000 in magnitude for any observation.\nChannels: {}\nUseful terms: {}",
        channels.join(", "),
        library.join("; ")
    )
}

pub fn reward_prompt(
    ctx: &AgentContext,
    design: &DesignParams,
    variant: usize,
    previous: &[String],
) -> String {
    let mut s = format!(
        "{}\n{}\nDesign to train:\n{}\nWrite reward variant {} of {}. It must include forward_speed.",
        context_block(ctx),
        language_block(),
        serialize_design(design),
        variant + 1,
        ctx.variants_per_design
    );
    if !previous.is_empty() {
        let _ = write!(s, " It must differ from: {}", previous.join(" | "));
    }
    s
}

pub fn repair_prompt(bad_source: &str, error: &str) -> String {
    format!(
        "{}\nThis reward expression was rejected:\n{bad_source}\nError: {error}\n\
         Reply with a corrected version in the same JSON format.",
        language_block()
    )
}
