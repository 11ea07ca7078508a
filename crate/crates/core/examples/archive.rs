//! Build, persist and query a results archive.
//!
//! cargo run --example archive

use codesign::archive::{load_archive, make_digest, save_archive, Archive, ArchiveEntry, Phase};
use codesign::engine::select_best;
use codesign::evaluation::EpisodeMetrics;
use codesign::morphology::default_design;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut h = Archive::new();
    let rewards = [
        "forward_speed",
        "forward_speed + alive",
        "forward_speed - 0.1*sq(pitch)",
    ];
    for (i, score) in [1.2, 3.4, 2.2, 3.4, 0.7].into_iter().enumerate() {
        let mut d = default_design();
        d.torso_length += 0.02 * i as f64;
        let e = ArchiveEntry::new(
            1 + i / 2,
            if i % 2 == 0 {
                Phase::Thesis
            } else {
                Phase::Synthesis
            },
            d,
            rewards[i % 3],
            score,
            EpisodeMetrics {
                score_s: score,
                ..EpisodeMetrics::default()
            },
            "example",
            i as u64,
        );
        h.insert(e);
    }

    let dir = std::env::temp_dir().join("codesign-archive-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("archive.jsonl");
    save_archive(&h, &path)?;
    let loaded = load_archive(&path)?;
    println!(
        "{} entries written to {}",
        loaded.archive.len(),
        path.display()
    );

    println!("\n{}", make_digest(&loaded.archive, 3));
    let best = select_best(&loaded.archive)?;
    println!(
        "\nbest {} at {:.2} m with reward `{}`",
        &best.entry_id[..12],
        best.score_s,
        best.reward_source
    );
    Ok(())
}
