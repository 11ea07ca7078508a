//! Hall of fame: every evaluated (design, reward) pair, its persistence and
//! the digest handed to the agents.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evaluation::EpisodeMetrics;
use crate::morphology::{default_design, parse_design, serialize_design, DesignParams};
use crate::reward::parse_reward;

pub const ARCHIVE_FORMAT: &str = "codesign-archive-1";
pub const DEFAULT_DIGEST_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Thesis,
    Synthesis,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Thesis => "thesis",
            Phase::Synthesis => "synthesis",
        }
    }

    pub fn id(self) -> u64 {
        match self {
            Phase::Thesis => 0,
            Phase::Synthesis => 1,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hex SHA-256 over the design XML and the reward source.
pub fn entry_id(design: &DesignParams, reward_source: &str) -> String {
    let mut h = Sha256::new();
    h.update(serialize_design(design).as_bytes());
    h.update([0u8]);
    h.update(reward_source.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub entry_id: String,
    pub round_index: usize,
    pub phase: Phase,
    pub design: DesignParams,
    pub reward_source: String,
    pub score_s: f64,
    pub metrics: EpisodeMetrics,
    pub rationale: String,
    pub train_seed: u64,
}

impl ArchiveEntry {
    /// Builds an entry, deriving its id from the design and reward.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        round_index: usize,
        phase: Phase,
        design: DesignParams,
        reward_source: impl Into<String>,
        score_s: f64,
        metrics: EpisodeMetrics,
        rationale: impl Into<String>,
        train_seed: u64,
    ) -> Self {
        let reward_source = reward_source.into();
        Self {
            entry_id: entry_id(&design, &reward_source),
            round_index,
            phase,
            design,
            reward_source,
            score_s,
            metrics,
            rationale: rationale.into(),
            train_seed,
        }
    }
}

/// Archive ordering: higher score first, then earlier round, then id.
pub fn rank_order(a: &ArchiveEntry, b: &ArchiveEntry) -> std::cmp::Ordering {
    b.score_s
        .total_cmp(&a.score_s)
        .then(a.round_index.cmp(&b.round_index))
        .then_with(|| a.entry_id.cmp(&b.entry_id))
}

/// Entries in insertion order; at most one entry per id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    entries: Vec<ArchiveEntry>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn get(&self, entry_id: &str) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.entry_id == entry_id)
    }

    /// Adds `e`. An existing entry with the same id is replaced only when
    /// `e` scores strictly higher. Returns whether the archive changed.
    pub fn insert(&mut self, e: ArchiveEntry) -> bool {
        match self.entries.iter_mut().find(|x| x.entry_id == e.entry_id) {
            Some(old) if e.score_s > old.score_s => {
                *old = e;
                true
            }
            Some(_) => false,
            None => {
                self.entries.push(e);
                true
            }
        }
    }

    pub fn top_k(&self, k: usize) -> Vec<&ArchiveEntry> {
        let mut sorted: Vec<&ArchiveEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| rank_order(a, b));
        sorted.truncate(k);
        sorted
    }

    pub fn best(&self) -> Option<&ArchiveEntry> {
        self.entries.iter().min_by(|a, b| rank_order(a, b))
    }
}

pub fn insert_entry(mut h: Archive, e: ArchiveEntry) -> Archive {
    h.insert(e);
    h
}

pub fn top_k(h: &Archive, k: usize) -> Vec<&ArchiveEntry> {
    h.top_k(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigestLine {
    pub rank: usize,
    pub score_s: f64,
    /// Parameters that differ from the default design, as `path=value`.
    pub changed: Vec<String>,
    pub reward_terms: Vec<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveDigest {
    pub lines: Vec<DigestLine>,
}

pub const EMPTY_DIGEST: &str = "no prior results";

const EXCERPT_CHARS: usize = 120;

fn excerpt(text: &str) -> String {
    let first = text.lines().next().unwrap_or("");
    if first.chars().count() <= EXCERPT_CHARS {
        first.to_string()
    } else {
        let cut: String = first.chars().take(EXCERPT_CHARS).collect();
        format!("{cut}...")
    }
}

pub fn make_digest(h: &Archive, k: usize) -> ArchiveDigest {
    let base = default_design();
    let lines = h
        .top_k(k)
        .into_iter()
        .enumerate()
        .map(|(i, e)| DigestLine {
            rank: i + 1,
            score_s: e.score_s,
            changed: base
                .changed_params(&e.design)
                .into_iter()
                .map(|id| format!("{}={}", id.path(), e.design.get(id)))
                .collect(),
            reward_terms: parse_reward(&e.reward_source)
                .map(|p| p.term_names)
                .unwrap_or_default(),
            rationale: excerpt(&e.rationale),
        })
        .collect();
    ArchiveDigest { lines }
}

impl ArchiveDigest {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

impl fmt::Display for ArchiveDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lines.is_empty() {
            return f.write_str(EMPTY_DIGEST);
        }
        for (i, l) in self.lines.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let changed = if l.changed.is_empty() {
                "default design".to_string()
            } else {
                l.changed.join(", ")
            };
            write!(
                f,
                "#{} S={:.3} m | {} | reward: {} | {}",
                l.rank,
                l.score_s,
                changed,
                l.reward_terms.join(" "),
                l.rationale
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("archive i/o failed: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    CorruptLine { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    entry_id: String,
    round_index: usize,
    phase: Phase,
    design: String,
    reward_source: String,
    score_s: f64,
    metrics: EpisodeMetrics,
    rationale: String,
    train_seed: u64,
}

impl From<&ArchiveEntry> for Record {
    fn from(e: &ArchiveEntry) -> Self {
        Record {
            entry_id: e.entry_id.clone(),
            round_index: e.round_index,
            phase: e.phase,
            design: serialize_design(&e.design),
            reward_source: e.reward_source.clone(),
            score_s: e.score_s,
            metrics: e.metrics,
            rationale: e.rationale.clone(),
            train_seed: e.train_seed,
        }
    }
}

impl TryFrom<Record> for ArchiveEntry {
    type Error = String;

    fn try_from(r: Record) -> Result<Self, String> {
        let design = parse_design(&r.design).map_err(|e| format!("bad design: {e}"))?;
        let id = entry_id(&design, &r.reward_source);
        if id != r.entry_id {
            return Err(format!(
                "entry_id {} does not match its contents",
                r.entry_id
            ));
        }
        Ok(ArchiveEntry {
            entry_id: r.entry_id,
            round_index: r.round_index,
            phase: r.phase,
            design,
            reward_source: r.reward_source,
            score_s: r.score_s,
            metrics: r.metrics,
            rationale: r.rationale,
            train_seed: r.train_seed,
        })
    }
}

pub fn header_line() -> String {
    serde_json::to_string(&Header {
        format: ARCHIVE_FORMAT.into(),
    })
    .expect("header serializes")
}

/// One JSON record, without the trailing newline.
pub fn entry_line(e: &ArchiveEntry) -> String {
    serde_json::to_string(&Record::from(e)).expect("entry serializes")
}

pub fn save_archive(h: &Archive, path: &Path) -> Result<(), ArchiveError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header_line())?;
    for e in h.entries() {
        writeln!(w, "{}", entry_line(e))?;
    }
    w.flush()?;
    Ok(())
}

/// Appends one record, writing the header first if the file is new or empty.
pub fn append_entry(path: &Path, e: &ArchiveEntry) -> Result<(), ArchiveError> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut text = String::new();
    if fresh {
        text.push_str(&header_line());
        text.push('\n');
    }
    text.push_str(&entry_line(e));
    text.push('\n');
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// A loaded archive plus every line that could not be read.
#[derive(Debug, Default)]
pub struct LoadedArchive {
    pub archive: Archive,
    pub corrupt: Vec<ArchiveError>,
}

/// Reads records line by line. Corrupt lines are collected, not fatal.
/// Records are replayed through [`Archive::insert`].
pub fn load_archive(path: &Path) -> Result<LoadedArchive, ArchiveError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = LoadedArchive::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if n == 1 {
            match serde_json::from_str::<Header>(&line) {
                Ok(h) if h.format == ARCHIVE_FORMAT => continue,
                Ok(h) => {
                    out.corrupt.push(ArchiveError::CorruptLine {
                        line: n,
                        message: format!("unsupported format {:?}", h.format),
                    });
                    continue;
                }
                Err(_) => {}
            }
        }
        let parsed = serde_json::from_str::<Record>(&line)
            .map_err(|e| e.to_string())
            .and_then(ArchiveEntry::try_from);
        match parsed {
            Ok(e) => {
                out.archive.insert(e);
            }
            Err(message) => out
                .corrupt
                .push(ArchiveError::CorruptLine { line: n, message }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(score: f64, round: usize, tag: &str) -> ArchiveEntry {
        ArchiveEntry::new(
            round,
            Phase::Thesis,
            default_design(),
            format!("forward_speed + 0*{tag}"),
            score,
            EpisodeMetrics::default(),
            "r",
            1,
        )
    }

    #[test]
    fn insert_and_duplicates() {
        let mut h = Archive::new();
        assert!(h.insert(entry(1.0, 1, "height")));
        assert_eq!(h.len(), 1);
        assert!(!h.insert(entry(0.5, 2, "height")));
        assert_eq!(h.entries()[0].score_s, 1.0);
        assert!(h.insert(entry(2.0, 2, "height")));
        assert_eq!(h.len(), 1);
        assert_eq!(h.entries()[0].score_s, 2.0);
    }

    #[test]
    fn top_k_order() {
        let mut h = Archive::new();
        for (s, t) in [(3.0, "height"), (1.0, "pitch"), (2.0, "alive")] {
            h.insert(entry(s, 1, t));
        }
        let scores: Vec<f64> = h.top_k(2).iter().map(|e| e.score_s).collect();
        assert_eq!(scores, vec![3.0, 2.0]);
        assert_eq!(h.top_k(10).len(), 3);

        let mut h = Archive::new();
        h.insert(entry(1.0, 2, "height"));
        h.insert(entry(1.0, 1, "pitch"));
        assert_eq!(h.top_k(1)[0].round_index, 1);
    }

    #[test]
    fn digest() {
        assert_eq!(make_digest(&Archive::new(), 5).to_string(), EMPTY_DIGEST);
        let mut h = Archive::new();
        h.insert(entry(1.25, 1, "height"));
        let d = make_digest(&h, 5);
        assert_eq!(d.lines.len(), 1);
        assert!(d.to_string().starts_with("#1 S=1.250 m | default design"));
        assert_eq!(d, make_digest(&h.clone(), 5));
    }

    #[test]
    fn ids_depend_on_design_and_reward() {
        let d = default_design();
        let mut d2 = d;
        d2.torso_length = 0.6;
        assert_ne!(entry_id(&d, "alive"), entry_id(&d2, "alive"));
        assert_ne!(entry_id(&d, "alive"), entry_id(&d, "height"));
        assert_eq!(entry_id(&d, "alive").len(), 64);
    }
}
