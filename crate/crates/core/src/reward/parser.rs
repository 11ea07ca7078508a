//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := NUMBER | IDENT | "-" factor | "(" expr ")" | FUNC "(" expr ("," expr)* ")"
//! ```

use thiserror::Error;

use super::ast::{BinOp, Expr, Func};
use super::RewardProgram;
use crate::channels::Channel;

pub const MAX_DEPTH: usize = 32;
pub const MAX_NODES: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("expression nesting exceeds {MAX_DEPTH} levels")]
    DepthExceeded,
    #[error("expression has {0} nodes, more than {MAX_NODES}")]
    TooManyNodes(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::SyntaxError {
        offset,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'/' => out.push((Tok::Slash, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b',' => out.push((Tok::Comma, i)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                if !v.is_finite() {
                    return Err(syntax(start, format!("number `{text}` is out of range")));
                }
                out.push((Tok::Num(v), start));
                continue;
            }
            b'a'..=b'z' | b'_' => {
                while i < bytes.len() && matches!(bytes[i], b'a'..=b'z' | b'0'..=b'9' | b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!(
                    "expected {}, found {}",
                    want.describe(),
                    self.peek().describe()
                ),
            ))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(ParseError::DepthExceeded)
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let at = self.offset();
        let e = match self.bump() {
            Tok::Num(v) => Expr::Num(v),
            Tok::Minus => Expr::Neg(Box::new(self.factor()?)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                e
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.call(func, at)?
                } else if let Some(c) = Channel::from_name(&name) {
                    Expr::Chan(c)
                } else {
                    return Err(ParseError::UnknownChannel(name));
                }
            }
            other => {
                return Err(syntax(
                    at,
                    format!(
                        "expected a number, channel, `-` or `(`, found {}",
                        other.describe()
                    ),
                ))
            }
        };
        self.depth -= 1;
        Ok(e)
    }

    fn call(&mut self, func: Func, at: usize) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        let (lo, hi) = func.arity();
        if args.len() < lo || args.len() > hi {
            let want = if lo == hi {
                format!("{lo}")
            } else {
                format!("at least {lo}")
            };
            return Err(syntax(
                at,
                format!(
                    "{} takes {want} argument(s), got {}",
                    func.name(),
                    args.len()
                ),
            ));
        }
        Ok(Expr::Call(func, args))
    }
}

pub fn parse_reward(source: &str) -> Result<RewardProgram, ParseError> {
    let ast = parse_expr(source)?;
    Ok(RewardProgram::new(source.to_string(), ast))
}

pub(crate) fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    let ast = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(
            p.offset(),
            format!("unexpected {} after expression", p.peek().describe()),
        ));
    }
    if ast.depth() > MAX_DEPTH {
        return Err(ParseError::DepthExceeded);
    }
    let nodes = ast.node_count();
    if nodes > MAX_NODES {
        return Err(ParseError::TooManyNodes(nodes));
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_terms() {
        let p = parse_reward("forward_speed - 0.5*ctrl_cost").unwrap();
        assert_eq!(p.term_names.len(), 2);
        assert!(matches!(p.ast, Expr::Bin(BinOp::Sub, _, _)));
    }

    #[test]
    fn unknown_channel() {
        assert_eq!(
            parse_reward("forward_speed + healthy").unwrap_err(),
            ParseError::UnknownChannel("healthy".into())
        );
    }

    #[test]
    fn dangling_operator_position() {
        match parse_reward("1 + ").unwrap_err() {
            ParseError::SyntaxError { offset, .. } => assert_eq!(offset, 4),
            e => panic!("unexpected {e:?}"),
        }
        match parse_reward("1 +").unwrap_err() {
            ParseError::SyntaxError { offset, .. } => assert_eq!(offset, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let p = parse_reward("1 - 2 - 3 * 4 / 5").unwrap();
        assert_eq!(p.ast.to_string(), "1 - 2 - 3*4/5");
        let Expr::Bin(BinOp::Sub, lhs, rhs) = &p.ast else {
            panic!()
        };
        assert!(matches!(**lhs, Expr::Bin(BinOp::Sub, _, _)));
        assert!(matches!(**rhs, Expr::Bin(BinOp::Div, _, _)));
        // unary minus binds tighter than *
        let p = parse_reward("-height*2").unwrap();
        assert!(matches!(p.ast, Expr::Bin(BinOp::Mul, _, _)));
    }

    #[test]
    fn calls_and_arity() {
        assert!(parse_reward("clip(pitch, -0.1, 0.1)").is_ok());
        assert!(parse_reward("max(1, 2, 3)").is_ok());
        assert!(matches!(
            parse_reward("clip(pitch, 1)"),
            Err(ParseError::SyntaxError { .. })
        ));
        assert!(matches!(
            parse_reward("sq pitch"),
            Err(ParseError::SyntaxError { .. })
        ));
        assert!(matches!(
            parse_reward("pitch $ 2"),
            Err(ParseError::SyntaxError { offset: 6, .. })
        ));
    }

    #[test]
    fn numbers() {
        for (src, v) in [("1.5e2", 150.0), (".5", 0.5), ("3.", 3.0), ("2E-3", 0.002)] {
            assert_eq!(parse_reward(src).unwrap().ast, Expr::Num(v), "{src}");
        }
        assert!(parse_reward("1e999").is_err());
    }

    #[test]
    fn depth_limit() {
        let deep = format!("{}1{}", "(".repeat(40), ")".repeat(40));
        assert_eq!(parse_reward(&deep).unwrap_err(), ParseError::DepthExceeded);
        let ok = format!("{}1{}", "(".repeat(10), ")".repeat(10));
        assert!(parse_reward(&ok).is_ok());
    }

    #[test]
    fn node_limit() {
        let wide = format!("max({})", vec!["height"; 600].join(", "));
        assert_eq!(
            parse_reward(&wide).unwrap_err(),
            ParseError::TooManyNodes(601)
        );
        // a flat sum is a left-leaning chain, so its depth grows with length
        let long = vec!["height"; 40].join(" + ");
        assert_eq!(parse_reward(&long).unwrap_err(), ParseError::DepthExceeded);
    }
}
