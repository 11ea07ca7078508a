//! Deterministic agents driven only by the context and its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AgentContext, AgentError, Provenance, RewardProposal};
use crate::archive::ArchiveEntry;
use crate::evaluation::{PanelFeedback, SuggestionTag};
use crate::morphology::{apply_edit, DesignEdit, DesignParams, ParamChange, ParamId};
use crate::reward::{
    default_probes, library_terms, parse_reward, validate_reward, Expr, RewardProgram,
    DEFAULT_PROBE_SEED, R_MAX,
};
use crate::seed::mix;

pub const MAX_PROPOSAL_RETRIES: usize = 8;
pub const MAX_REWARD_DRAWS: usize = 32;

/// Parameters the random thesis move may touch. Bare leg fields move both
/// legs together.
pub const PERTURBABLE_PATHS: [&str; 15] = [
    "torso_length",
    "torso_height",
    "torso_density",
    "upper_len",
    "lower_len",
    "torque_limit",
    "front.upper_len",
    "rear.upper_len",
    "front.lower_len",
    "rear.lower_len",
    "front.attach_frac",
    "rear.attach_frac",
    "hip_hi",
    "hip_lo",
    "knee_hi",
];

const MIN_STEP: f64 = 0.05;
const MAX_RANDOM_STEP: f64 = 0.2;

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn random_edit(ctx: &AgentContext, rng: &mut ChaCha8Rng) -> DesignEdit {
    let n = rng.random_range(1..=3);
    let hi = MAX_RANDOM_STEP.min(ctx.bounds.max_edit_frac);
    let lo = MIN_STEP.min(hi);
    let mut changes: Vec<ParamChange> = Vec::new();
    let mut taken: Vec<ParamId> = Vec::new();
    while changes.len() < n {
        let path = PERTURBABLE_PATHS[rng.random_range(0..PERTURBABLE_PATHS.len())];
        let ids = ParamId::resolve(path).expect("perturbable paths resolve");
        if ids.iter().any(|id| taken.contains(id)) {
            continue;
        }
        taken.extend(ids);
        let magnitude = rng.random_range(lo..=hi);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        changes.push(ParamChange::relative(path, round_to(sign * magnitude, 3)));
    }
    let summary: Vec<String> = changes
        .iter()
        .map(|c| format!("{} {:+.1}%", c.path, 100.0 * c.value))
        .collect();
    DesignEdit {
        rationale: format!("explore: perturb {}", summary.join(", ")),
        changes,
    }
}

fn order_key(e: &ArchiveEntry) -> (usize, u64) {
    (e.round_index, e.phase.id())
}

/// The parent of the best archive entry is the earlier entry whose design
/// differs from it in the fewest parameters (latest wins ties). Returns the
/// largest relative change between the two as `(path, signed fraction)`.
fn hill_direction(ctx: &AgentContext) -> Option<(String, f64, f64)> {
    let best = ctx.archive.best()?;
    let parent = ctx
        .archive
        .entries()
        .iter()
        .filter(|e| order_key(e) < order_key(best))
        .map(|e| (best.design.changed_params(&e.design).len(), e))
        .filter(|(n, _)| *n > 0)
        .min_by(|(na, a), (nb, b)| {
            na.cmp(nb)
                .then(order_key(b).cmp(&order_key(a)))
                .then_with(|| a.entry_id.cmp(&b.entry_id))
        })?
        .1;
    let rel = |id: ParamId| {
        let old = parent.design.get(id);
        let new = best.design.get(id);
        if old != 0.0 {
            (new - old) / old.abs()
        } else {
            new - old
        }
    };
    let changed = best.design.changed_params(&parent.design);
    let top = changed
        .iter()
        .copied()
        .max_by(|a, b| rel(*a).abs().total_cmp(&rel(*b).abs()))?;
    let frac = rel(top);
    // A field moved the same way on both legs is continued on both legs.
    let path = match top {
        ParamId::Leg(side, field) => {
            let other = ParamId::Leg(side.other(), field);
            if changed.contains(&other) && rel(other).signum() == frac.signum() {
                field.name().to_string()
            } else {
                top.path()
            }
        }
        _ => top.path(),
    };
    Some((path, frac, best.score_s))
}

fn hill_edit(ctx: &AgentContext) -> Option<DesignEdit> {
    let (path, frac, score) = hill_direction(ctx)?;
    let hi = ctx.bounds.max_edit_frac;
    let step = frac.abs().clamp(MIN_STEP.min(hi), hi) * frac.signum();
    let step = round_to(step, 3);
    Some(DesignEdit {
        changes: vec![ParamChange::relative(path.clone(), step)],
        rationale: format!(
            "hill-climb: best entry (S={score:.3} m) came from changing {path}; continue {:+.1}%",
            100.0 * step
        ),
    })
}

/// Thesis move: a seeded coin picks a random 1-3 parameter perturbation or
/// a hill-climb step along the best archive entry's last change.
pub fn propose_thesis_scripted(ctx: &AgentContext) -> Result<DesignEdit, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[ctx.seed, 0x7e5e]));
    let explore = rng.random_bool(0.5);
    let mut last = String::from("no attempt");
    for attempt in 0..MAX_PROPOSAL_RETRIES {
        let edit = match (explore, attempt) {
            (false, 0) => hill_edit(ctx).unwrap_or_else(|| random_edit(ctx, &mut rng)),
            _ => random_edit(ctx, &mut rng),
        };
        match apply_edit(&ctx.current_design, &edit, &ctx.bounds) {
            Ok(d) if d != ctx.current_design => return Ok(edit),
            Ok(_) => last = "edit leaves the design unchanged".into(),
            Err(e) => last = e.to_string(),
        }
    }
    Err(AgentError::ProposalInfeasible {
        attempts: MAX_PROPOSAL_RETRIES,
        last,
    })
}

/// Parameter moves for each suggestion tag, as relative changes.
pub fn synthesis_rules(tag: SuggestionTag) -> &'static [(&'static str, f64)] {
    match tag {
        SuggestionTag::LowerCenterOfMass => &[("upper_len", -0.1), ("lower_len", -0.1)],
        SuggestionTag::ReduceTorque => &[("torque_limit", -0.1)],
        SuggestionTag::IncreaseTorque => &[("torque_limit", 0.1)],
        SuggestionTag::LengthenStride => &[("upper_len", 0.1)],
        SuggestionTag::DampOscillation => &[("lower_len", -0.1)],
    }
}

/// Applies the rule table to the panel's tags. Moves on the same parameter
/// compose multiplicatively.
pub fn synthesize_design_scripted(
    ctx: &AgentContext,
    thesis: &DesignParams,
    feedback: &PanelFeedback,
) -> Result<DesignEdit, AgentError> {
    let tags = feedback.tags();
    let mut factors: Vec<(&str, f64)> = Vec::new();
    for tag in &tags {
        for &(path, frac) in synthesis_rules(*tag) {
            match factors.iter_mut().find(|(p, _)| *p == path) {
                Some((_, f)) => *f *= 1.0 + frac,
                None => factors.push((path, 1.0 + frac)),
            }
        }
    }
    let changes: Vec<ParamChange> = factors
        .into_iter()
        .map(|(p, f)| ParamChange::relative(p, round_to(f - 1.0, 12)))
        .filter(|c| c.value != 0.0)
        .collect();
    let rationale = if tags.is_empty() {
        "no suggestions from the panel; keep the thesis design".to_string()
    } else {
        let names: Vec<&str> = tags.iter().map(|t| t.name()).collect();
        let moves: Vec<String> = changes
            .iter()
            .map(|c| format!("{} {:+.1}%", c.path, 100.0 * c.value))
            .collect();
        format!("panel suggests {}: {}", names.join(", "), moves.join(", "))
    };
    let edit = DesignEdit { changes, rationale };
    apply_edit(thesis, &edit, &ctx.bounds).map_err(|e| AgentError::ProposalInfeasible {
        attempts: 1,
        last: e.to_string(),
    })?;
    Ok(edit)
}

fn fmt_coef(c: f64) -> String {
    format!("{}", format!("{c:.1e}").parse::<f64>().unwrap_or(c))
}

fn draw_reward(rng: &mut ChaCha8Rng) -> String {
    let mut src = String::from("forward_speed");
    let mut seen: Vec<&str> = vec!["forward_speed"];
    for term in library_terms() {
        if seen.contains(&term.source) {
            continue;
        }
        seen.push(term.source);
        if !rng.random_bool(0.5) {
            continue;
        }
        let coef = 10f64.powf(rng.random_range(-4.0..=0.0));
        let ast = parse_reward(term.source).expect("library terms parse").ast;
        let (sign, body) = match ast {
            Expr::Neg(inner) => (-term.sign, *inner),
            other => (term.sign, other),
        };
        let body = match body {
            Expr::Bin(..) => format!("({body})"),
            _ => body.to_string(),
        };
        let op = if sign < 0.0 { '-' } else { '+' };
        src.push_str(&format!(" {op} {}*{body}", fmt_coef(coef)));
    }
    src
}

/// Each variant is `forward_speed` plus a seeded subset of the library with
/// log-uniform coefficients in [1e-4, 1].
pub fn generate_rewards_scripted(
    ctx: &AgentContext,
    _design: &DesignParams,
) -> Result<RewardProposal, AgentError> {
    let wanted = ctx.variants_per_design;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[ctx.seed, 0x4e3a]));
    let probes = default_probes(DEFAULT_PROBE_SEED);
    let mut programs: Vec<RewardProgram> = Vec::new();
    for _ in 0..MAX_REWARD_DRAWS {
        if programs.len() == wanted {
            break;
        }
        let src = draw_reward(&mut rng);
        if programs.iter().any(|p| p.source == src) {
            continue;
        }
        let Ok(p) = parse_reward(&src) else { continue };
        if validate_reward(&p, &probes, R_MAX).is_ok() {
            programs.push(p);
        }
    }
    if programs.len() < wanted || wanted == 0 {
        return Err(AgentError::GenerationFailed { wanted });
    }
    Ok(RewardProposal {
        programs,
        provenance: Provenance::Scripted,
        repair_attempts_used: 0,
        dropped: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::{Archive, ArchiveEntry, Phase};
    use crate::evaluation::{EpisodeMetrics, JudgeVerdict, Specialty};
    use crate::morphology::{default_design, DesignBounds};

    fn ctx(seed: u64) -> AgentContext {
        AgentContext::new(default_design(), 1, seed)
    }

    fn feedback(tags: &[SuggestionTag]) -> PanelFeedback {
        PanelFeedback {
            verdicts: vec![JudgeVerdict {
                judge_name: "j".into(),
                specialty: Specialty::Speed,
                grade: 2,
                strengths: vec![],
                weaknesses: vec![],
                suggestion_tags: tags.to_vec(),
            }],
            rationale: "r".into(),
            aggregate_grade: 2.0,
        }
    }

    #[test]
    fn random_thesis_is_bounded() {
        let c = ctx(7);
        let e = propose_thesis_scripted(&c).unwrap();
        assert!((1..=3).contains(&e.changes.len()));
        for ch in &e.changes {
            assert!(ch.value.abs() <= c.bounds.max_edit_frac);
        }
        assert_eq!(e, propose_thesis_scripted(&c).unwrap());
    }

    #[test]
    fn hill_climb_repeats_best_direction() {
        let base = default_design();
        let mut up = base;
        up.front.upper_len = 0.275;
        up.rear.upper_len = 0.275;
        let m = EpisodeMetrics::default();
        let mut archive = Archive::new();
        archive.insert(ArchiveEntry::new(
            1,
            Phase::Thesis,
            base,
            "forward_speed",
            1.0,
            m,
            "",
            0,
        ));
        archive.insert(ArchiveEntry::new(
            1,
            Phase::Synthesis,
            up,
            "forward_speed",
            2.0,
            m,
            "",
            0,
        ));
        // find a seed whose coin picks the hill-climb branch
        let mut hits = 0;
        for seed in 0..16 {
            let mut c = ctx(seed);
            c.current_design = up;
            c.archive = archive.clone();
            let e = propose_thesis_scripted(&c).unwrap();
            if e.rationale.starts_with("hill-climb") {
                hits += 1;
                assert_eq!(e.changes, vec![ParamChange::relative("upper_len", 0.1)]);
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn synthesis_rules_apply() {
        let c = ctx(1);
        let d = default_design();
        let e = synthesize_design_scripted(&c, &d, &feedback(&[SuggestionTag::LowerCenterOfMass]))
            .unwrap();
        let out = apply_edit(&d, &e, &DesignBounds::default()).unwrap();
        assert_eq!(out.front.upper_len, 0.225);
        assert_eq!(out.rear.lower_len, 0.225);

        let e = synthesize_design_scripted(&c, &d, &feedback(&[])).unwrap();
        assert!(e.changes.is_empty());
        assert_eq!(apply_edit(&d, &e, &DesignBounds::default()).unwrap(), d);

        let e = synthesize_design_scripted(
            &c,
            &d,
            &feedback(&[SuggestionTag::LengthenStride, SuggestionTag::ReduceTorque]),
        )
        .unwrap();
        let out = apply_edit(&d, &e, &DesignBounds::default()).unwrap();
        assert_eq!(out.front.upper_len, 0.275);
        assert_eq!(out.front.torque_limit, 2.7);
    }

    #[test]
    fn rewards_are_distinct_and_valid() {
        let mut c = ctx(3);
        let p = generate_rewards_scripted(&c, &default_design()).unwrap();
        assert_eq!(p.programs.len(), 4);
        let probes = default_probes(DEFAULT_PROBE_SEED);
        for (i, a) in p.programs.iter().enumerate() {
            assert!(a.source.starts_with("forward_speed"));
            assert!(validate_reward(a, &probes, R_MAX).is_ok());
            for b in &p.programs[i + 1..] {
                assert_ne!(a.source, b.source);
            }
        }
        c.variants_per_design = 1;
        assert_eq!(
            generate_rewards_scripted(&c, &default_design())
                .unwrap()
                .programs
                .len(),
            1
        );
    }
}
