//! Reward programs: a small arithmetic language over observation channels.
//!
//! Programs are parsed into an [`Expr`] tree, checked against a probe battery
//! and an interval bound before use, and evaluated once per simulator step.
//!
//! ```
//! use codesign::reward::parse_reward;
//!
//! let p = parse_reward("forward_speed - 0.5*ctrl_cost").unwrap();
//! assert_eq!(p.term_names, vec!["forward_speed", "-ctrl_cost"]);
//! ```

mod ast;
mod eval;
mod library;
mod parser;
mod validate;

pub use ast::{BinOp, Expr, Func};
pub use eval::{eval_reward_step, Compiled, NonFiniteResult};
pub use library::{baseline_reward, library_terms, LibraryTerm, BASELINE_REWARD};
pub use parser::{parse_reward, ParseError, MAX_DEPTH, MAX_NODES};
pub use validate::{
    default_probes, interval_bounds, validate_reward, ValidationReport, DEFAULT_PROBE_SEED, R_MAX,
};

/// A parsed reward program.
#[derive(Debug, Clone)]
pub struct RewardProgram {
    pub source: String,
    pub ast: Expr,
    /// One label per top-level additive term, prefixed with `-` when subtracted.
    pub term_names: Vec<String>,
    compiled: Compiled,
}

impl PartialEq for RewardProgram {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.ast == other.ast
    }
}

impl RewardProgram {
    pub(crate) fn new(source: String, ast: Expr) -> Self {
        let term_names = library::term_names(&ast);
        let compiled = Compiled::new(&ast);
        Self {
            source,
            ast,
            term_names,
            compiled,
        }
    }

    pub fn compiled(&self) -> &Compiled {
        &self.compiled
    }

    /// Canonical text of the program.
    pub fn canonical(&self) -> String {
        self.ast.to_string()
    }
}
