//! Postfix evaluator used on the training hot path.

use thiserror::Error;

use super::ast::{BinOp, Expr, Func};
use super::RewardProgram;
use crate::channels::{ChannelRecord, CHANNEL_COUNT};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("reward evaluated to a non-finite value ({0})")]
pub struct NonFiniteResult(pub f64);

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Num(f64),
    Chan(usize),
    Neg,
    Bin(BinOp),
    Call(Func, usize),
}

/// A program flattened to postfix order.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    ops: Vec<Op>,
    max_stack: usize,
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Num(v) => ops.push(Op::Num(*v)),
        Expr::Chan(c) => ops.push(Op::Chan(c.index())),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Bin(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Bin(*op));
        }
        Expr::Call(f, args) => {
            for a in args {
                emit(a, ops);
            }
            ops.push(Op::Call(*f, args.len()));
        }
    }
}

pub(crate) fn apply_bin(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
    }
}

/// Semantics of the built-in functions, shared by every evaluator.
pub(crate) fn apply_func(f: Func, args: &[f64]) -> f64 {
    match f {
        Func::Abs => args[0].abs(),
        Func::Exp => args[0].exp(),
        Func::Tanh => args[0].tanh(),
        Func::Sq => args[0] * args[0],
        Func::Min => args[1..].iter().fold(args[0], |m, v| m.min(*v)),
        Func::Max => args[1..].iter().fold(args[0], |m, v| m.max(*v)),
        Func::Clip => args[0].max(args[1]).min(args[2]),
    }
}

impl Compiled {
    pub fn new(e: &Expr) -> Self {
        let mut ops = Vec::with_capacity(e.node_count());
        emit(e, &mut ops);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for op in &ops {
            match op {
                Op::Num(_) | Op::Chan(_) => depth += 1,
                Op::Neg => {}
                Op::Bin(_) => depth -= 1,
                Op::Call(_, n) => depth = depth + 1 - n,
            }
            max_stack = max_stack.max(depth);
        }
        Self { ops, max_stack }
    }

    /// Evaluates with a caller-provided scratch stack.
    pub fn eval_with(&self, rec: &[f64; CHANNEL_COUNT], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        stack.reserve(self.max_stack);
        for op in &self.ops {
            match *op {
                Op::Num(v) => stack.push(v),
                Op::Chan(i) => stack.push(rec[i]),
                Op::Neg => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = -*top;
                }
                Op::Bin(b) => {
                    let rhs = stack.pop().expect("stack underflow");
                    let lhs = stack.last_mut().expect("stack underflow");
                    *lhs = apply_bin(b, *lhs, rhs);
                }
                Op::Call(f, n) => {
                    let base = stack.len() - n;
                    let v = apply_func(f, &stack[base..]);
                    stack.truncate(base);
                    stack.push(v);
                }
            }
        }
        stack[0]
    }

    pub fn eval(&self, rec: &[f64; CHANNEL_COUNT]) -> f64 {
        let mut stack = Vec::new();
        self.eval_with(rec, &mut stack)
    }
}

/// One step's reward. Non-finite results are reported as errors.
pub fn eval_reward_step(p: &RewardProgram, rec: &ChannelRecord) -> Result<f64, NonFiniteResult> {
    let v = p.compiled().eval(&rec.0);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NonFiniteResult(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{Channel, Observation};
    use crate::reward::parse_reward;

    #[test]
    fn single_channel() {
        let p = parse_reward("forward_speed").unwrap();
        let mut rec = Observation::default();
        rec[Channel::ForwardSpeed] = 2.0;
        assert_eq!(eval_reward_step(&p, &rec), Ok(2.0));
    }

    #[test]
    fn clip_clamps() {
        let p = parse_reward("clip(pitch, -0.1, 0.1)").unwrap();
        let mut rec = Observation::default();
        rec[Channel::Pitch] = 0.5;
        assert_eq!(eval_reward_step(&p, &rec), Ok(0.1));
        rec[Channel::Pitch] = -0.5;
        assert_eq!(eval_reward_step(&p, &rec), Ok(-0.1));
    }

    #[test]
    fn functions() {
        let rec = Observation::default();
        let cases = [
            ("sq(3)", 9.0),
            ("abs(-2)", 2.0),
            ("min(3, 1, 2)", 1.0),
            ("max(3, 1, 2)", 3.0),
            ("tanh(0)", 0.0),
            ("exp(0)", 1.0),
            ("2 - 3 - 4", -5.0),
            ("8 / 4 / 2", 1.0),
            ("-2*3", -6.0),
        ];
        for (src, want) in cases {
            assert_eq!(
                eval_reward_step(&parse_reward(src).unwrap(), &rec),
                Ok(want),
                "{src}"
            );
        }
    }

    #[test]
    fn division_by_zero_is_caught() {
        let p = parse_reward("1/ctrl_cost").unwrap();
        let rec = Observation::default();
        assert!(
            matches!(eval_reward_step(&p, &rec), Err(NonFiniteResult(v)) if v == f64::INFINITY)
        );
    }
}
