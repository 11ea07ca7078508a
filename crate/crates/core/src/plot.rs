//! Per-round score summaries of an archive, as CSV and SVG.

use std::fmt::Write as _;

use crate::archive::{Archive, Phase};

/// 97.5% quantile of the standard normal.
const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundPoint {
    pub round_index: usize,
    pub phase: Phase,
    pub n: usize,
    /// `None` when the phase has no entries in this round.
    pub mean: Option<f64>,
    /// Half-width of the normal-approximation 95% interval; 0 for n < 2.
    pub ci_half_width: f64,
}

impl RoundPoint {
    pub fn ci(&self) -> Option<(f64, f64)> {
        self.mean
            .map(|m| (m - self.ci_half_width, m + self.ci_half_width))
    }
}

/// One point per (round, phase), rounds ascending, thesis first.
pub fn round_series(h: &Archive) -> Vec<RoundPoint> {
    let mut rounds: Vec<usize> = h.entries().iter().map(|e| e.round_index).collect();
    rounds.sort_unstable();
    rounds.dedup();
    let mut out = Vec::with_capacity(rounds.len() * 2);
    for r in rounds {
        for phase in [Phase::Thesis, Phase::Synthesis] {
            let xs: Vec<f64> = h
                .entries()
                .iter()
                .filter(|e| e.round_index == r && e.phase == phase)
                .map(|e| e.score_s)
                .collect();
            let n = xs.len();
            let mean = (n > 0).then(|| xs.iter().sum::<f64>() / n as f64);
            let ci_half_width = match mean {
                Some(m) if n >= 2 => {
                    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                    Z_95 * (var / n as f64).sqrt()
                }
                _ => 0.0,
            };
            out.push(RoundPoint {
                round_index: r,
                phase,
                n,
                mean,
                ci_half_width,
            });
        }
    }
    out
}

pub fn series_csv(points: &[RoundPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "phase", "n", "mean_score", "ci_low", "ci_high"])
        .expect("in-memory csv");
    for p in points {
        let (mean, lo, hi) = match (p.mean, p.ci()) {
            (Some(m), Some((lo, hi))) => (m.to_string(), lo.to_string(), hi.to_string()),
            _ => Default::default(),
        };
        w.write_record([
            p.round_index.to_string(),
            p.phase.name().to_string(),
            p.n.to_string(),
            mean,
            lo,
            hi,
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 48.0;

fn color(phase: Phase) -> &'static str {
    match phase {
        Phase::Thesis => "#1f77b4",
        Phase::Synthesis => "#d62728",
    }
}

/// Mean score per round for both phases, with 95% whiskers.
pub fn render_svg(points: &[RoundPoint]) -> String {
    let mut rounds: Vec<usize> = points.iter().map(|p| p.round_index).collect();
    rounds.dedup();
    let (mut lo, mut hi) = points
        .iter()
        .filter_map(RoundPoint::ci)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| {
            (a.min(l), b.max(h))
        });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = lo.min(0.0);
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let slot = pw / rounds.len().max(1) as f64;
    let x_of = |r: usize| {
        let i = rounds.iter().position(|&x| x == r).unwrap_or(0);
        LEFT + slot * (i as f64 + 0.5)
    };
    let y_of = |v: f64| TOP + ph * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
        y = TOP + ph,
        x2 = W - RIGHT
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{y2}" stroke="black"/>"#,
        y2 = TOP + ph
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y:.1}" text-anchor="end" dominant-baseline="middle">{v:.2}</text>"#,
            x = LEFT - 6.0
        );
    }
    for &r in &rounds {
        let x = x_of(r);
        let _ = writeln!(
            s,
            r#"<g class="xtick"><line x1="{x:.1}" y1="{y:.1}" x2="{x:.1}" y2="{y2:.1}" stroke="black"/><text x="{x:.1}" y="{ty:.1}" text-anchor="middle">{r}</text></g>"#,
            y = TOP + ph,
            y2 = TOP + ph + 5.0,
            ty = TOP + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" text-anchor="middle">round</text>"#,
        x = LEFT + pw / 2.0,
        y = H - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" text-anchor="middle" transform="rotate(-90 14 {y})">mean score (m)</text>"#,
        y = TOP + ph / 2.0
    );
    for (k, phase) in [Phase::Thesis, Phase::Synthesis].into_iter().enumerate() {
        let c = color(phase);
        // Offset the two series so whiskers do not overlap.
        let dx = (k as f64 - 0.5) * 8.0;
        let pts: Vec<(f64, f64, f64, f64)> = points
            .iter()
            .filter(|p| p.phase == phase)
            .filter_map(|p| {
                let (l, h) = p.ci()?;
                Some((x_of(p.round_index) + dx, y_of(p.mean?), y_of(l), y_of(h)))
            })
            .collect();
        let _ = writeln!(s, r#"<g class="series" data-phase="{phase}">"#);
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y, _, _)| format!("{x:.1},{y:.1}"))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for (x, y, yl, yh) in &pts {
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{yl:.1}" x2="{x:.1}" y2="{yh:.1}" stroke="{c}"/><circle cx="{x:.1}" cy="{y:.1}" r="3.5" fill="{c}"/>"#
            );
        }
        let _ = writeln!(s, "</g>");
        let ly = TOP + 4.0 + 16.0 * k as f64;
        let lx = W - RIGHT - 110.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{tx}" y="{ly}" dominant-baseline="middle">{phase}</text>"#,
            x2 = lx + 20.0,
            tx = lx + 26.0
        );
    }
    s.push_str("</svg>\n");
    s
}
