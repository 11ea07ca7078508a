#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;

use codesign::channels::{ChannelRecord, CHANNELS};
use codesign::engine::RunConfig;
use codesign::reward::{BinOp, Expr, Func};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Small budgets so a full debate finishes in seconds.
pub fn tiny_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.rounds = 2;
    cfg.parallel_evaluations = 2;
    cfg.sim.horizon_steps = 100;
    cfg.budget.total_env_steps = 2 * 17 * 100;
    cfg.out_dir = out.to_path_buf();
    cfg
}

pub fn sha256_file(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Straightforward recursive evaluation over the tree.
pub fn oracle_eval(e: &Expr, rec: &ChannelRecord) -> f64 {
    match e {
        Expr::Num(v) => *v,
        Expr::Chan(c) => rec.0[c.index()],
        Expr::Neg(a) => -oracle_eval(a, rec),
        Expr::Bin(op, a, b) => {
            let (x, y) = (oracle_eval(a, rec), oracle_eval(b, rec));
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
            }
        }
        Expr::Call(f, args) => {
            let v: Vec<f64> = args.iter().map(|a| oracle_eval(a, rec)).collect();
            match f {
                Func::Abs => v[0].abs(),
                Func::Exp => v[0].exp(),
                Func::Tanh => v[0].tanh(),
                Func::Sq => v[0].powi(2),
                Func::Min => v.iter().copied().reduce(f64::min).unwrap(),
                Func::Max => v.iter().copied().reduce(f64::max).unwrap(),
                Func::Clip => v[0].max(v[1]).min(v[2]),
            }
        }
    }
}

/// Random tree with non-negative literals, so that printing never needs a
/// negative number literal.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.4) {
            Expr::Num((rng.random_range(0.0..5.0f64) * 1000.0).round() / 1000.0)
        } else {
            Expr::Chan(CHANNELS[rng.random_range(0..CHANNELS.len())].channel)
        };
    }
    match rng.random_range(0..3) {
        0 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
        1 => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][rng.random_range(0..4)];
            Expr::Bin(
                op,
                Box::new(random_expr(rng, depth - 1)),
                Box::new(random_expr(rng, depth - 1)),
            )
        }
        _ => {
            let f = Func::ALL[rng.random_range(0..Func::ALL.len())];
            let (lo, hi) = f.arity();
            let n = rng.random_range(lo..=hi.min(3));
            Expr::Call(f, (0..n).map(|_| random_expr(rng, depth - 1)).collect())
        }
    }
}

pub fn random_record(rng: &mut ChaCha8Rng) -> ChannelRecord {
    let mut r = ChannelRecord::default();
    for c in &CHANNELS {
        r.0[c.channel.index()] = if c.max > c.min {
            rng.random_range(c.min..=c.max)
        } else {
            c.min
        };
    }
    r
}

/// True when both are the same non-finite class or agree within `tol`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol
}

/// Chat-completion stub. `reply` maps each request body to the assistant
/// content; the server runs until the test process exits.
pub fn chat_stub(mut reply: impl FnMut(&str) -> String + Send + 'static) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let content = reply(&String::from_utf8_lossy(&body));
            let payload = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}],
                "usage": {"prompt_tokens": 1, "completion_tokens": 1}
            })
            .to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    format!("http://{addr}/v1/chat/completions")
}
