//! The debate loop. Each round proposes a thesis design, trains it under a
//! set of candidate rewards, judges the results, revises the design from the
//! judges' feedback and evaluates the revision under the same rewards.
//!
//! Seeds: pair `(round, phase, variant)` trains with
//! `mix([master_seed, round, phase_id, variant])`. Agents use the same rule
//! with variant slots [`DESIGN_SLOT`] and [`REWARD_SLOT`].

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{AgentConfig, BackendKind, ConfigError, RunConfig};

use crate::agents::{
    AgentContext, AgentError, Backend, RemoteClient, RemoteConfig, RewardProposal, ENV_KEY,
};
use crate::archive::{make_digest, save_archive, Archive, ArchiveEntry, ArchiveError, Phase};
use crate::evaluation::{mean_metrics, run_panel, EpisodeMetrics, JudgeSpec, PanelFeedback};
use crate::morphology::{apply_edit, derive_layout, serialize_design, DesignEdit, DesignParams};
use crate::policy::{score_policy, train_policy, TrainBudget, TrainOutcome, EVAL_SEEDS};
use crate::reward::RewardProgram;
use crate::seed::mix;
use crate::sim::SimConfig;

pub const SNAPSHOT_FILE: &str = "config.snapshot";
pub const ARCHIVE_FILE: &str = "archive.jsonl";
pub const ROUNDS_DIR: &str = "rounds";
pub const CURVES_DIR: &str = "curves";
pub const EXCHANGES_DIR: &str = "exchanges";

pub const DESIGN_SLOT: u64 = u64::MAX;
pub const REWARD_SLOT: u64 = u64::MAX - 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("round {round} aborted: {reason}")]
    RoundAborted { round: usize, reason: String },
    #[error("every round aborted")]
    AllRoundsAborted,
    #[error("archive is empty")]
    EmptyArchive,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("run directory i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

pub fn pair_seed(master: u64, round: usize, phase: Phase, variant: u64) -> u64 {
    mix(&[master, round as u64, phase.id(), variant])
}

pub fn round_record_path(out: &Path, round: usize) -> PathBuf {
    out.join(ROUNDS_DIR).join(format!("round_{round}.record"))
}

pub fn curve_path(out: &Path, entry_id: &str) -> PathBuf {
    out.join(CURVES_DIR).join(format!("{entry_id}.csv"))
}

/// One (design, reward) pair to train and score.
#[derive(Debug, Clone)]
pub struct PairTask<'a> {
    pub design: DesignParams,
    pub reward: &'a RewardProgram,
    pub round_index: usize,
    pub phase: Phase,
    pub variant: usize,
    pub rationale: &'a str,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Evaluated {
    pub entry: ArchiveEntry,
    pub feedback: PanelFeedback,
    pub outcome: TrainOutcome,
}

/// Trains under the pair's reward, scores the best policy on the shared
/// evaluation seeds and runs the judge panel. A failed training still
/// yields an entry, scored from the best policy found and flagged.
pub fn evaluate_pair(
    task: &PairTask<'_>,
    sim: &SimConfig,
    budget: &TrainBudget,
    judges: &[JudgeSpec],
) -> Evaluated {
    let layout = derive_layout(&task.design);
    let budget = TrainBudget {
        seed: task.seed,
        ..*budget
    };
    let outcome = train_policy(&layout, sim, task.reward, &budget);
    let (score, per_seed) = score_policy(&layout, sim, &outcome.best_policy, &EVAL_SEEDS);
    let mut metrics = mean_metrics(&per_seed);
    metrics.score_s = score;
    metrics.training_failed = outcome.failed();
    let feedback = run_panel(judges, &metrics).unwrap_or_else(|e| PanelFeedback {
        verdicts: Vec::new(),
        rationale: e.to_string(),
        aggregate_grade: 0.0,
    });
    let entry = ArchiveEntry::new(
        task.round_index,
        task.phase,
        task.design,
        task.reward.source.clone(),
        score,
        metrics,
        task.rationale,
        task.seed,
    );
    Evaluated {
        entry,
        feedback,
        outcome,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub param: String,
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub changes: Vec<ChangeRecord>,
    pub rationale: String,
}

impl From<&DesignEdit> for EditRecord {
    fn from(e: &DesignEdit) -> Self {
        Self {
            changes: e
                .changes
                .iter()
                .map(|c| ChangeRecord {
                    param: c.path.clone(),
                    kind: c.kind.name().to_string(),
                    value: c.value,
                })
                .collect(),
            rationale: e.rationale.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    /// Design XML.
    pub design: String,
    pub edit: EditRecord,
    pub rewards: Vec<String>,
    pub reward_repairs: usize,
    pub dropped_rewards: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub phase: Phase,
    pub variant: usize,
    pub entry_id: String,
    pub reward_source: String,
    pub score_s: f64,
    pub metrics: EpisodeMetrics,
    pub feedback: PanelFeedback,
    /// Training curve, relative to the run directory.
    pub curve: String,
    pub train_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    pub thesis: Option<PhaseRecord>,
    pub synthesis: Option<PhaseRecord>,
    pub pairs: Vec<PairRecord>,
    /// Fewer than `2 * variants_per_design` pairs were evaluated.
    pub degraded: bool,
    pub notes: Vec<String>,
    /// Not persisted, so records stay byte-identical across machines.
    #[serde(skip)]
    pub wall_clock_ms: u64,
}

impl RoundRecord {
    pub fn scores(&self, phase: Phase) -> Vec<f64> {
        self.pairs
            .iter()
            .filter(|p| p.phase == phase)
            .map(|p| p.score_s)
            .collect()
    }

    pub fn mean_score(&self, phase: Phase) -> Option<f64> {
        let s = self.scores(phase);
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    pub fn best_score(&self, phase: Phase) -> Option<f64> {
        self.scores(phase).into_iter().reduce(f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("round record serializes")
    }
}

/// What carries over between rounds.
#[derive(Debug, Clone)]
pub struct DebateState {
    pub archive: Archive,
    /// Base design for the next thesis: the best archived design so far.
    pub current_design: DesignParams,
    pub last_metrics: Option<EpisodeMetrics>,
}

impl DebateState {
    pub fn new(initial: DesignParams) -> Self {
        Self {
            archive: Archive::new(),
            current_design: initial,
            last_metrics: None,
        }
    }
}

fn context(
    state: &DebateState,
    cfg: &RunConfig,
    round: usize,
    phase: Phase,
    slot: u64,
) -> AgentContext {
    let mut ctx = AgentContext::new(
        state.current_design,
        round,
        pair_seed(cfg.master_seed, round, phase, slot),
    );
    ctx.last_metrics = state.last_metrics;
    ctx.archive_digest = make_digest(&state.archive, cfg.digest_k);
    ctx.archive = state.archive.clone();
    ctx.bounds = cfg.bounds();
    ctx.variants_per_design = cfg.variants_per_design;
    ctx
}

fn evaluate_phase(
    cfg: &RunConfig,
    round: usize,
    phase: Phase,
    design: DesignParams,
    rationale: &str,
    programs: &[RewardProgram],
) -> Vec<Evaluated> {
    let tasks: Vec<PairTask<'_>> = programs
        .iter()
        .enumerate()
        .map(|(v, reward)| PairTask {
            design,
            reward,
            round_index: round,
            phase,
            variant: v,
            rationale,
            seed: pair_seed(cfg.master_seed, round, phase, v as u64),
        })
        .collect();
    let mut out = Vec::with_capacity(tasks.len());
    for chunk in tasks.chunks(cfg.parallel_evaluations) {
        let done: Vec<Evaluated> = chunk
            .par_iter()
            .map(|t| evaluate_pair(t, &cfg.sim, &cfg.budget, &cfg.judges))
            .collect();
        out.extend(done);
    }
    out
}

fn phase_record(design: &DesignParams, edit: &DesignEdit, p: &RewardProposal) -> PhaseRecord {
    PhaseRecord {
        design: serialize_design(design),
        edit: edit.into(),
        rewards: p.programs.iter().map(|r| r.source.clone()).collect(),
        reward_repairs: p.repair_attempts_used,
        dropped_rewards: p.dropped.clone(),
    }
}

/// Archives the phase's results in variant order and records them.
fn commit(
    state: &mut DebateState,
    rec: &mut RoundRecord,
    results: &[Evaluated],
    out: Option<&Path>,
) -> Result<(), EngineError> {
    for (variant, r) in results.iter().enumerate() {
        let id = &r.entry.entry_id;
        if let Some(out) = out {
            let f = fs::File::create(curve_path(out, id))?;
            r.outcome
                .write_curve_csv(f)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
        }
        rec.pairs.push(PairRecord {
            phase: r.entry.phase,
            variant,
            entry_id: id.clone(),
            reward_source: r.entry.reward_source.clone(),
            score_s: r.entry.score_s,
            metrics: r.entry.metrics,
            feedback: r.feedback.clone(),
            curve: format!("{CURVES_DIR}/{id}.csv"),
            train_failure: r.outcome.failure.clone(),
        });
        state.archive.insert(r.entry.clone());
    }
    Ok(())
}

/// Runs round `round` (1-based). Thesis pairs are evaluated and judged
/// before the synthesis design is requested. Curves go under `out` when
/// given.
pub fn run_round(
    state: &mut DebateState,
    cfg: &RunConfig,
    backend: &Backend,
    round: usize,
    out: Option<&Path>,
) -> Result<RoundRecord, EngineError> {
    let started = Instant::now();
    let bounds = cfg.bounds();
    let mut rec = RoundRecord {
        round_index: round,
        thesis: None,
        synthesis: None,
        pairs: Vec::new(),
        degraded: false,
        notes: Vec::new(),
        wall_clock_ms: 0,
    };
    let abort = |reason: String| EngineError::RoundAborted { round, reason };

    let ctx = context(state, cfg, round, Phase::Thesis, DESIGN_SLOT);
    let thesis_edit = backend
        .propose_thesis(&ctx)
        .map_err(|e| abort(format!("thesis proposal failed: {e}")))?;
    let thesis = apply_edit(&state.current_design, &thesis_edit, &bounds)
        .map_err(|e| abort(format!("thesis edit infeasible: {e}")))?;
    let rctx = context(state, cfg, round, Phase::Thesis, REWARD_SLOT);
    let rewards = backend
        .generate_rewards(&rctx, &thesis)
        .map_err(|e| abort(format!("reward generation failed: {e}")))?;
    rec.thesis = Some(phase_record(&thesis, &thesis_edit, &rewards));
    let results = evaluate_phase(
        cfg,
        round,
        Phase::Thesis,
        thesis,
        &thesis_edit.rationale,
        &rewards.programs,
    );
    commit(state, &mut rec, &results, out)?;

    // The best thesis pair's panel drives the revision.
    let best = results
        .iter()
        .reduce(|a, b| {
            if b.entry.score_s > a.entry.score_s {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| abort("no thesis pair evaluated".into()))?;
    let mut sctx = context(state, cfg, round, Phase::Synthesis, DESIGN_SLOT);
    sctx.current_design = thesis;
    sctx.last_metrics = Some(best.entry.metrics);
    sctx.panel_feedback = Some(best.feedback.clone());
    let synthesis = backend
        .synthesize_design(&sctx, &thesis, &best.feedback)
        .map_err(|e| e.to_string())
        .and_then(|edit| {
            apply_edit(&thesis, &edit, &bounds)
                .map(|d| (d, edit))
                .map_err(|e| e.to_string())
        });
    match synthesis {
        Ok((design, edit)) => {
            let srewards = if cfg.regenerate_synthesis_rewards {
                let rctx = context(state, cfg, round, Phase::Synthesis, REWARD_SLOT);
                backend.generate_rewards(&rctx, &design)
            } else {
                Ok(rewards.clone())
            };
            match srewards {
                Ok(sr) => {
                    rec.synthesis = Some(phase_record(&design, &edit, &sr));
                    let results = evaluate_phase(
                        cfg,
                        round,
                        Phase::Synthesis,
                        design,
                        &edit.rationale,
                        &sr.programs,
                    );
                    commit(state, &mut rec, &results, out)?;
                }
                Err(e) => rec.notes.push(format!("synthesis rewards failed: {e}")),
            }
        }
        Err(e) => rec.notes.push(format!("synthesis skipped: {e}")),
    }

    rec.degraded = rec.pairs.len() < 2 * cfg.variants_per_design;
    if rec.degraded {
        log::warn!(
            "round {round} degraded: {} of {} pairs evaluated",
            rec.pairs.len(),
            2 * cfg.variants_per_design
        );
    }
    if let Some(b) = state.archive.best() {
        state.current_design = b.design;
        state.last_metrics = Some(b.metrics);
    }
    rec.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok(rec)
}

/// The final answer of a debate.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub design: DesignParams,
    pub reward_source: String,
    pub score_s: f64,
    pub entry_id: String,
}

/// Highest-scoring archive entry, ties broken by the archive order rule.
pub fn select_best(h: &Archive) -> Result<Selection, EngineError> {
    let e = h.best().ok_or(EngineError::EmptyArchive)?;
    Ok(Selection {
        design: e.design,
        reward_source: e.reward_source.clone(),
        score_s: e.score_s,
        entry_id: e.entry_id.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct DebateReport {
    pub best: Selection,
    pub rounds: Vec<RoundRecord>,
    /// `(round, reason)` for every aborted round.
    pub aborted: Vec<(usize, String)>,
    pub archive: Archive,
    pub out_dir: PathBuf,
}

pub fn make_backend(cfg: &RunConfig) -> Result<Backend, EngineError> {
    match cfg.agents.backend {
        BackendKind::Scripted => Ok(Backend::Scripted),
        BackendKind::Remote => {
            let a = &cfg.agents;
            let mut rc = match &a.endpoint {
                Some(e) => {
                    let mut rc = RemoteConfig::new(e.clone(), a.model.clone());
                    rc.api_key = std::env::var(ENV_KEY).ok();
                    rc
                }
                None => RemoteConfig::from_env(a.model.clone())?,
            };
            rc.temperature = a.temperature;
            rc.max_tokens = a.max_tokens;
            rc.token_cap = a.token_cap;
            rc.max_repair_attempts = a.max_repair_attempts;
            rc.exchange_dir = Some(cfg.out_dir.join(EXCHANGES_DIR));
            Ok(Backend::Remote(RemoteClient::new(rc)))
        }
    }
}

/// Runs every round, persisting the archive and round records after each.
pub fn run_debate(cfg: &RunConfig) -> Result<DebateReport, EngineError> {
    cfg.validate()?;
    let backend = make_backend(cfg)?;
    run_debate_with(cfg, &backend)
}

pub fn run_debate_with(cfg: &RunConfig, backend: &Backend) -> Result<DebateReport, EngineError> {
    let out = cfg.out_dir.as_path();
    fs::create_dir_all(out.join(ROUNDS_DIR))?;
    fs::create_dir_all(out.join(CURVES_DIR))?;
    fs::write(out.join(SNAPSHOT_FILE), cfg.to_toml())?;
    let mut state = DebateState::new(cfg.initial_design()?);
    let mut rounds = Vec::new();
    let mut aborted = Vec::new();
    for k in 1..=cfg.rounds {
        match run_round(&mut state, cfg, backend, k, Some(out)) {
            Ok(rec) => {
                log::info!(
                    "round {k}: thesis best {:.3} m, synthesis best {:.3} m, {} pairs",
                    rec.best_score(Phase::Thesis).unwrap_or(f64::NAN),
                    rec.best_score(Phase::Synthesis).unwrap_or(f64::NAN),
                    rec.pairs.len()
                );
                fs::write(round_record_path(out, k), rec.to_json())?;
                rounds.push(rec);
            }
            Err(EngineError::RoundAborted { round, reason }) => {
                log::warn!("round {round} aborted: {reason}");
                let rec = RoundRecord {
                    round_index: round,
                    thesis: None,
                    synthesis: None,
                    pairs: Vec::new(),
                    degraded: true,
                    notes: vec![format!("aborted: {reason}")],
                    wall_clock_ms: 0,
                };
                fs::write(round_record_path(out, k), rec.to_json())?;
                aborted.push((round, reason));
            }
            Err(e) => return Err(e),
        }
        save_archive(&state.archive, &out.join(ARCHIVE_FILE))?;
    }
    if rounds.is_empty() {
        return Err(EngineError::AllRoundsAborted);
    }
    Ok(DebateReport {
        best: select_best(&state.archive)?,
        rounds,
        aborted,
        archive: state.archive,
        out_dir: out.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::EpisodeMetrics;
    use crate::morphology::default_design;
    use crate::reward::baseline_reward;

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.sim.horizon_steps = 100;
        cfg.budget.total_env_steps = 2 * 17 * 100;
        cfg.rounds = 2;
        cfg.variants_per_design = 2;
        cfg
    }

    #[test]
    fn pair_evaluation_is_deterministic() {
        let cfg = tiny();
        let reward = baseline_reward();
        let task = PairTask {
            design: default_design(),
            reward: &reward,
            round_index: 1,
            phase: Phase::Thesis,
            variant: 0,
            rationale: "",
            seed: 9,
        };
        let a = evaluate_pair(&task, &cfg.sim, &cfg.budget, &cfg.judges);
        let b = evaluate_pair(&task, &cfg.sim, &cfg.budget, &cfg.judges);
        assert!(a.entry.score_s.is_finite());
        assert!(!a.entry.metrics.training_failed);
        assert_eq!(a.entry, b.entry);
        assert_eq!(a.feedback.verdicts.len(), 4);
    }

    #[test]
    fn failed_training_is_flagged() {
        let cfg = tiny();
        let reward = baseline_reward();
        let task = PairTask {
            design: default_design(),
            reward: &reward,
            round_index: 1,
            phase: Phase::Thesis,
            variant: 0,
            rationale: "",
            seed: 9,
        };
        let small = TrainBudget {
            total_env_steps: 10,
            ..cfg.budget
        };
        let r = evaluate_pair(&task, &cfg.sim, &small, &cfg.judges);
        assert!(r.entry.metrics.training_failed);
        assert!(r.entry.score_s.is_finite());
    }

    #[test]
    fn round_fans_out_and_is_parallelism_independent() {
        let mut cfg = tiny();
        let backend = Backend::Scripted;
        cfg.parallel_evaluations = 1;
        let mut s1 = DebateState::new(default_design());
        let r1 = run_round(&mut s1, &cfg, &backend, 1, None).unwrap();
        cfg.parallel_evaluations = 8;
        let mut s2 = DebateState::new(default_design());
        let r2 = run_round(&mut s2, &cfg, &backend, 1, None).unwrap();
        assert_eq!(r1.pairs.len(), 4);
        assert!(!r1.degraded);
        assert_eq!(r1.to_json(), r2.to_json());
        assert_eq!(s1.archive, s2.archive);
    }

    #[test]
    fn select_best_rules() {
        let m = EpisodeMetrics::default();
        let d = default_design();
        let mut h = Archive::new();
        assert!(matches!(select_best(&h), Err(EngineError::EmptyArchive)));
        h.insert(ArchiveEntry::new(
            1,
            Phase::Thesis,
            d,
            "forward_speed",
            3715.42,
            m,
            "",
            0,
        ));
        assert_eq!(select_best(&h).unwrap().score_s, 3715.42);
        h.insert(ArchiveEntry::new(
            1,
            Phase::Synthesis,
            d,
            "forward_speed + alive",
            6421.67,
            m,
            "",
            0,
        ));
        assert_eq!(
            select_best(&h).unwrap().reward_source,
            "forward_speed + alive"
        );
        h.insert(ArchiveEntry::new(
            2,
            Phase::Thesis,
            d,
            "alive + forward_speed",
            6421.67,
            m,
            "",
            0,
        ));
        assert_eq!(
            select_best(&h).unwrap().reward_source,
            "forward_speed + alive"
        );
    }
}
