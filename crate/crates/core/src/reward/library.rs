//! Named reward terms and the baseline composite.

use super::ast::{BinOp, Expr};
use super::parser::parse_expr;
use super::{parse_reward, RewardProgram};

/// A reusable reward term. `sign` is the sign the term carries when composed
/// into a full reward (`-1` for costs and penalties).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibraryTerm {
    pub name: &'static str,
    pub source: &'static str,
    pub sign: f64,
}

const LIBRARY: [LibraryTerm; 10] = [
    LibraryTerm {
        name: "forward_speed",
        source: "forward_speed",
        sign: 1.0,
    },
    LibraryTerm {
        name: "healthy_stability",
        source: "alive",
        sign: 1.0,
    },
    LibraryTerm {
        name: "ctrl_cost",
        source: "ctrl_cost",
        sign: -1.0,
    },
    LibraryTerm {
        name: "contact_cost",
        source: "contact_cost",
        sign: -1.0,
    },
    LibraryTerm {
        name: "height_stability",
        source: "-sq(height - 0.6)",
        sign: 1.0,
    },
    LibraryTerm {
        name: "pitch_alignment",
        source: "-sq(pitch)",
        sign: 1.0,
    },
    LibraryTerm {
        name: "roll_penalty",
        source: "sq(roll)",
        sign: -1.0,
    },
    LibraryTerm {
        name: "yaw_penalty",
        source: "sq(yaw)",
        sign: -1.0,
    },
    LibraryTerm {
        name: "smooth_cost",
        source: "action_delta_cost",
        sign: -1.0,
    },
    LibraryTerm {
        name: "alive_bonus",
        source: "alive",
        sign: 1.0,
    },
];

pub fn library_terms() -> &'static [LibraryTerm] {
    &LIBRARY
}

/// Forward progress, staying healthy, control and contact costs.
pub const BASELINE_REWARD: &str = "forward_speed + alive - 0.5*ctrl_cost - 0.0005*contact_cost";

pub fn baseline_reward() -> RewardProgram {
    parse_reward(BASELINE_REWARD).expect("baseline reward parses")
}

fn additive_terms<'a>(e: &'a Expr, negate: bool, out: &mut Vec<(bool, &'a Expr)>) {
    match e {
        Expr::Bin(BinOp::Add, a, b) => {
            additive_terms(a, negate, out);
            additive_terms(b, negate, out);
        }
        Expr::Bin(BinOp::Sub, a, b) => {
            additive_terms(a, negate, out);
            additive_terms(b, !negate, out);
        }
        _ => out.push((negate, e)),
    }
}

/// Drops numeric factors (`0.5*ctrl_cost` -> `ctrl_cost`), folding the sign
/// of any leading negation into `negate`.
fn strip_coefficient(e: &Expr, negate: &mut bool) -> Expr {
    match e {
        Expr::Bin(BinOp::Mul, a, b) if matches!(**a, Expr::Num(_)) => strip_coefficient(b, negate),
        Expr::Bin(BinOp::Mul, a, b) if matches!(**b, Expr::Num(_)) => strip_coefficient(a, negate),
        Expr::Bin(BinOp::Div, a, b) if matches!(**b, Expr::Num(_)) => strip_coefficient(a, negate),
        Expr::Neg(inner) => {
            *negate = !*negate;
            strip_coefficient(inner, negate)
        }
        other => other.clone(),
    }
}

pub(crate) fn term_names(ast: &Expr) -> Vec<String> {
    let mut terms = Vec::new();
    additive_terms(ast, false, &mut terms);
    terms
        .into_iter()
        .map(|(negate, term)| {
            let mut negate = negate;
            let core = strip_coefficient(term, &mut negate);
            let text = core.to_string();
            // Name compound terms after the library entry with the same body.
            let name = LIBRARY
                .iter()
                .filter(|t| t.source.starts_with('-') || t.source.contains('('))
                .find_map(|t| {
                    let mut lib_negate = false;
                    let lib_core = strip_coefficient(&parse_expr(t.source).ok()?, &mut lib_negate);
                    (lib_core == core).then(|| {
                        negate ^= lib_negate;
                        t.name.to_string()
                    })
                })
                .unwrap_or(text);
            if negate {
                format!("-{name}")
            } else {
                name
            }
        })
        .collect()
}
