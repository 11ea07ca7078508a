//! Static checks run before a reward program may be used for training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::{BinOp, Expr, Func};
use super::eval::{apply_bin, apply_func};
use super::RewardProgram;
use crate::channels::{ChannelRecord, Observation, CHANNELS};

/// Largest admissible per-step reward magnitude.
pub const R_MAX: f64 = 1e3;

pub const DEFAULT_PROBE_SEED: u64 = 0x5eed_0f9e_0be5;

const RANDOM_PROBES: usize = 64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The rest record, every channel at its minimum and maximum with the others
/// at rest, then 64 seeded uniform records.
pub fn default_probes(seed: u64) -> Vec<ChannelRecord> {
    let mut probes = vec![Observation::rest()];
    for c in &CHANNELS {
        for v in [c.min, c.max] {
            let mut rec = Observation::rest();
            rec[c.channel] = v;
            probes.push(rec);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_PROBES {
        let mut rec = Observation::rest();
        for c in &CHANNELS {
            rec[c.channel] = if c.min < c.max {
                rng.random_range(c.min..=c.max)
            } else {
                c.min
            };
        }
        probes.push(rec);
    }
    probes
}

/// Closed interval used for bounding a program over the probe box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    fn point(v: f64) -> Self {
        Bounds { lo: v, hi: v }
    }

    fn from_corners(vals: &[f64]) -> Self {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Bounds { lo, hi }
    }

    fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// Interval bound of `e` when every channel ranges over its probe extremes.
/// Fails with a message when the program may produce a non-finite value
/// somewhere in that box.
pub fn interval_bounds(e: &Expr) -> Result<Bounds, String> {
    let b = match e {
        Expr::Num(v) => Bounds::point(*v),
        Expr::Chan(c) => {
            let info = c.info();
            Bounds {
                lo: info.min,
                hi: info.max,
            }
        }
        Expr::Neg(a) => {
            let a = interval_bounds(a)?;
            Bounds {
                lo: -a.hi,
                hi: -a.lo,
            }
        }
        Expr::Bin(op, a, b) => {
            let (a, b) = (interval_bounds(a)?, interval_bounds(b)?);
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => {
                    let (b_lo, b_hi) = if *op == BinOp::Sub {
                        (b.hi, b.lo)
                    } else {
                        (b.lo, b.hi)
                    };
                    Bounds::from_corners(&[
                        apply_bin(*op, a.lo, b_lo),
                        apply_bin(*op, a.lo, b_hi),
                        apply_bin(*op, a.hi, b_lo),
                        apply_bin(*op, a.hi, b_hi),
                    ])
                }
                BinOp::Div => {
                    if b.lo <= 0.0 && b.hi >= 0.0 {
                        return Err(format!(
                            "possible division by zero: divisor `{}` spans [{}, {}]",
                            e_rhs(e),
                            b.lo,
                            b.hi
                        ));
                    }
                    Bounds::from_corners(&[a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi])
                }
            }
        }
        Expr::Call(f, args) => {
            let args = args
                .iter()
                .map(interval_bounds)
                .collect::<Result<Vec<_>, _>>()?;
            match f {
                Func::Abs => {
                    let a = args[0];
                    if a.lo >= 0.0 {
                        a
                    } else if a.hi <= 0.0 {
                        Bounds {
                            lo: -a.hi,
                            hi: -a.lo,
                        }
                    } else {
                        Bounds {
                            lo: 0.0,
                            hi: (-a.lo).max(a.hi),
                        }
                    }
                }
                Func::Sq => {
                    let a = args[0];
                    let (l2, h2) = (a.lo * a.lo, a.hi * a.hi);
                    if a.lo <= 0.0 && a.hi >= 0.0 {
                        Bounds {
                            lo: 0.0,
                            hi: l2.max(h2),
                        }
                    } else {
                        Bounds {
                            lo: l2.min(h2),
                            hi: l2.max(h2),
                        }
                    }
                }
                Func::Exp | Func::Tanh => {
                    let lo: Vec<f64> = args.iter().map(|a| a.lo).collect();
                    let hi: Vec<f64> = args.iter().map(|a| a.hi).collect();
                    Bounds {
                        lo: apply_func(*f, &lo),
                        hi: apply_func(*f, &hi),
                    }
                }
                Func::Min | Func::Max | Func::Clip => {
                    // monotone non-decreasing in every argument
                    let lo: Vec<f64> = args.iter().map(|a| a.lo).collect();
                    let hi: Vec<f64> = args.iter().map(|a| a.hi).collect();
                    Bounds {
                        lo: apply_func(*f, &lo),
                        hi: apply_func(*f, &hi),
                    }
                }
            }
        }
    };
    if b.is_finite() {
        Ok(b)
    } else {
        Err(format!("`{e}` may overflow to a non-finite value"))
    }
}

fn e_rhs(e: &Expr) -> String {
    match e {
        Expr::Bin(_, _, b) => b.to_string(),
        other => other.to_string(),
    }
}

/// Evaluates `p` on every probe; any non-finite or over-range value is a
/// violation. Programs that could divide by zero or overflow anywhere within
/// the channel extremes are rejected as well.
pub fn validate_reward(
    p: &RewardProgram,
    probes: &[ChannelRecord],
    r_max: f64,
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut stack = Vec::new();
    for (i, rec) in probes.iter().enumerate() {
        let v = p.compiled().eval_with(&rec.0, &mut stack);
        if !v.is_finite() {
            violations.push(format!("probe {i}: non-finite result {v}"));
        } else if v.abs() > r_max {
            violations.push(format!("probe {i}: |{v:.4e}| exceeds r_max {r_max}"));
        }
        if violations.len() >= 8 {
            break;
        }
    }
    if let Err(msg) = interval_bounds(&p.ast) {
        violations.push(msg);
    }
    ValidationReport { violations }
}
