//! Design and control agents.
//!
//! Both agents have a deterministic scripted backend (the default) and an
//! optional remote chat-completion backend. Every reward program, whatever
//! its source, passes parse and validation before it is returned.

mod prompts;
mod remote;
mod scripted;

use thiserror::Error;

pub use prompts::PROMPT_VERSION;
pub use remote::{
    check_reward, llm_complete, parse_design_edit_response, parse_reward_response, repair_reward,
    ChatExchange, ChatRequest, ChatResponse, RemoteClient, RemoteConfig, ENV_ENDPOINT, ENV_KEY,
};
pub use scripted::{
    generate_rewards_scripted, propose_thesis_scripted, synthesis_rules,
    synthesize_design_scripted, MAX_PROPOSAL_RETRIES, MAX_REWARD_DRAWS, PERTURBABLE_PATHS,
};

use crate::archive::{Archive, ArchiveDigest};
use crate::evaluation::{EpisodeMetrics, PanelFeedback};
use crate::morphology::{DesignBounds, DesignEdit, DesignParams};
use crate::reward::RewardProgram;

pub const DEFAULT_VARIANTS: usize = 4;
pub const DEFAULT_REPAIR_ATTEMPTS: usize = 3;

pub const TASK_DESCRIPTION: &str = "Planar quadruped: travel as far forward as possible in 10 s \
of simulated time without falling.";

/// Everything an agent sees when making a proposal.
#[derive(Debug, Clone)]
pub struct AgentContext {
    pub task_description: String,
    pub current_design: DesignParams,
    pub last_metrics: Option<EpisodeMetrics>,
    pub archive_digest: ArchiveDigest,
    /// Snapshot of the archive; the scripted hill-climb reads lineage from it.
    pub archive: Archive,
    pub panel_feedback: Option<PanelFeedback>,
    pub round_index: usize,
    pub seed: u64,
    pub bounds: DesignBounds,
    pub variants_per_design: usize,
}

impl AgentContext {
    pub fn new(current_design: DesignParams, round_index: usize, seed: u64) -> Self {
        Self {
            task_description: TASK_DESCRIPTION.to_string(),
            current_design,
            last_metrics: None,
            archive_digest: ArchiveDigest { lines: Vec::new() },
            archive: Archive::new(),
            panel_feedback: None,
            round_index,
            seed,
            bounds: DesignBounds::default(),
            variants_per_design: DEFAULT_VARIANTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardProposal {
    pub programs: Vec<RewardProgram>,
    pub provenance: Provenance,
    pub repair_attempts_used: usize,
    /// Candidates dropped after failed repair, with the final error.
    pub dropped: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no feasible design edit after {attempts} attempts: {last}")]
    ProposalInfeasible { attempts: usize, last: String },
    #[error("could not produce {wanted} valid distinct reward programs")]
    GenerationFailed { wanted: usize },
    #[error("reward repair failed after {attempts} attempts: {last}")]
    RepairExhausted { attempts: usize, last: String },
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("token budget exceeded: {used} used of {cap}")]
    BudgetExceeded { used: u64, cap: u64 },
    #[error("remote backend not configured: {0}")]
    NotConfigured(String),
    #[error("exchange log failed: {0}")]
    Log(#[from] std::io::Error),
}

/// Which implementation answers for an agent.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Backend {
    Scripted,
    Remote(RemoteClient),
}

impl Backend {
    pub fn propose_thesis(&self, ctx: &AgentContext) -> Result<DesignEdit, AgentError> {
        match self {
            Backend::Scripted => propose_thesis_scripted(ctx),
            Backend::Remote(c) => c.propose_thesis(ctx),
        }
    }

    pub fn synthesize_design(
        &self,
        ctx: &AgentContext,
        thesis: &DesignParams,
        feedback: &PanelFeedback,
    ) -> Result<DesignEdit, AgentError> {
        match self {
            Backend::Scripted => synthesize_design_scripted(ctx, thesis, feedback),
            Backend::Remote(c) => c.synthesize_design(ctx, thesis, feedback),
        }
    }

    pub fn generate_rewards(
        &self,
        ctx: &AgentContext,
        design: &DesignParams,
    ) -> Result<RewardProposal, AgentError> {
        match self {
            Backend::Scripted => generate_rewards_scripted(ctx, design),
            Backend::Remote(c) => c.generate_rewards(ctx, design),
        }
    }
}

pub fn propose_thesis(ctx: &AgentContext) -> Result<DesignEdit, AgentError> {
    propose_thesis_scripted(ctx)
}

pub fn synthesize_design(
    ctx: &AgentContext,
    thesis: &DesignParams,
    feedback: &PanelFeedback,
) -> Result<DesignEdit, AgentError> {
    synthesize_design_scripted(ctx, thesis, feedback)
}

pub fn generate_rewards(
    ctx: &AgentContext,
    design: &DesignParams,
) -> Result<RewardProposal, AgentError> {
    generate_rewards_scripted(ctx, design)
}
