//! Command-line front end. Exit codes: 0 success, 1 invalid reward,
//! 2 bad input (config, archive or arguments), 3 failed run.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::archive::{load_archive, Phase};
use crate::engine::{run_debate, EngineError, RunConfig};
use crate::morphology::serialize_design;
use crate::plot::{render_svg, round_series, series_csv};
use crate::reward::{default_probes, parse_reward, validate_reward, DEFAULT_PROBE_SEED, R_MAX};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUN_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "codesign",
    version,
    about = "Morphology and reward co-design by structured debate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a debate from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `budget.total_env_steps=50000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plot mean score per round from an archive as SVG plus CSV.
    Plot {
        archive: PathBuf,
        /// SVG path; the CSV is written next to it. Defaults to
        /// `rounds.svg` beside the archive.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and range-check a reward program, given inline or as a file.
    Validate { reward: String },
    /// Inspect an archive.
    Archive {
        #[command(subcommand)]
        action: ArchiveAction,
    },
}

#[derive(Debug, Subcommand)]
enum ArchiveAction {
    /// Print the top entries.
    Show {
        archive: PathBuf,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { EXIT_OK } else { EXIT_INPUT };
        }
    };
    match cli.command {
        Command::Run {
            config,
            set,
            out: dir,
            seed,
        } => cmd_run(&config, &set, dir, seed, out, err),
        Command::Plot { archive, out: svg } => cmd_plot(&archive, svg.as_deref(), out, err),
        Command::Validate { reward } => cmd_validate(&reward, out, err),
        Command::Archive {
            action: ArchiveAction::Show { archive, k },
        } => cmd_archive_show(&archive, k, out, err),
    }
}

pub fn cmd_run(
    config: &Path,
    overrides: &[String],
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let mut cfg = match RunConfig::load(config, overrides) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if let Some(d) = out_dir {
        cfg.out_dir = d;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let report = match run_debate(&cfg) {
        Ok(r) => r,
        Err(EngineError::Config(e)) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_RUN_FAILED;
        }
    };
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    for rec in &report.rounds {
        let _ = writeln!(
            out,
            "round {}: best thesis {} m, best synthesis {} m ({} pairs{})",
            rec.round_index,
            fmt(rec.best_score(Phase::Thesis)),
            fmt(rec.best_score(Phase::Synthesis)),
            rec.pairs.len(),
            if rec.degraded { ", degraded" } else { "" }
        );
    }
    for (round, reason) in &report.aborted {
        let _ = writeln!(out, "round {round}: aborted ({reason})");
    }
    let design_path = report.out_dir.join("best_design.xml");
    if let Err(e) = std::fs::write(&design_path, serialize_design(&report.best.design)) {
        let _ = writeln!(err, "error: cannot write {}: {e}", design_path.display());
        return EXIT_RUN_FAILED;
    }
    let _ = writeln!(out, "best design: {}", design_path.display());
    let _ = writeln!(out, "best reward: {}", report.best.reward_source);
    let _ = writeln!(out, "best score: {:.4} m", report.best.score_s);
    EXIT_OK
}

pub fn cmd_plot(
    archive: &Path,
    svg: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let loaded = match load_archive(archive) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if loaded.archive.is_empty() {
        let _ = writeln!(err, "error: archive {} has no entries", archive.display());
        return EXIT_INPUT;
    }
    let svg_path = svg.map(Path::to_path_buf).unwrap_or_else(|| {
        archive
            .parent()
            .unwrap_or(Path::new("."))
            .join("rounds.svg")
    });
    let csv_path = svg_path.with_extension("csv");
    let points = round_series(&loaded.archive);
    let written = std::fs::write(&svg_path, render_svg(&points))
        .and_then(|_| std::fs::write(&csv_path, series_csv(&points)));
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INPUT;
    }
    let _ = writeln!(
        out,
        "wrote {} and {}",
        svg_path.display(),
        csv_path.display()
    );
    EXIT_OK
}

pub fn cmd_validate(reward: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let source = match std::fs::read_to_string(reward) {
        Ok(text) => text.trim().to_string(),
        Err(_) => reward.to_string(),
    };
    let program = match parse_reward(&source) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_INVALID;
        }
    };
    let report = validate_reward(&program, &default_probes(DEFAULT_PROBE_SEED), R_MAX);
    if !report.is_ok() {
        for v in &report.violations {
            let _ = writeln!(err, "{v}");
        }
        return EXIT_INVALID;
    }
    let _ = writeln!(out, "ok: {} terms", program.term_names.len());
    for t in &program.term_names {
        let _ = writeln!(out, "  {t}");
    }
    EXIT_OK
}

pub fn cmd_archive_show(archive: &Path, k: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = match load_archive(archive) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if !loaded.corrupt.is_empty() {
        let _ = writeln!(
            err,
            "warning: skipped {} corrupt lines",
            loaded.corrupt.len()
        );
        for c in &loaded.corrupt {
            log::debug!("{c}");
        }
    }
    let _ = writeln!(
        out,
        "{:>4}  {:>5}  {:<9}  {:>9}  terms",
        "rank", "round", "phase", "score"
    );
    for (i, e) in loaded.archive.top_k(k).into_iter().enumerate() {
        let terms = parse_reward(&e.reward_source)
            .map(|p| p.term_names.join(", "))
            .unwrap_or_else(|_| e.reward_source.clone());
        let _ = writeln!(
            out,
            "{:>4}  {:>5}  {:<9}  {:>9.4}  {}",
            i + 1,
            e.round_index,
            e.phase,
            e.score_s,
            terms
        );
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(
            std::iter::once("codesign").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn validate_cases() {
        let (code, out, _) = call(&["validate", crate::reward::BASELINE_REWARD]);
        assert_eq!(code, 0);
        assert!(out.starts_with("ok: 4 terms"));
        let (code, _, err) = call(&["validate", "1 +"]);
        assert_eq!(code, 1);
        assert!(err.contains("offset"), "{err}");
        let (code, _, err) = call(&["validate", "exp(100*height)"]);
        assert_eq!(code, 1);
        assert!(!err.is_empty());
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&["run", "--bogus"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
        assert_eq!(call(&["run", "--config", "/nonexistent/run.toml"]).0, 2);
    }

    #[test]
    fn missing_archive() {
        assert_eq!(
            call(&["archive", "show", "/nonexistent/archive.jsonl"]).0,
            2
        );
        assert_eq!(call(&["plot", "/nonexistent/archive.jsonl"]).0, 2);
    }
}
