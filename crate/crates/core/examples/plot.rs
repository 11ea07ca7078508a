//! Summarize an archive per round and render the thesis/synthesis chart.
//!
//! cargo run --example plot -- runs/example/archive.jsonl rounds.svg

use codesign::archive::load_archive;
use codesign::plot::{render_svg, round_series, series_csv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let archive = args.next().ok_or("usage: plot <archive> [out.svg]")?;
    let out = args.next().unwrap_or_else(|| "rounds.svg".into());
    let loaded = load_archive(archive.as_ref())?;
    let points = round_series(&loaded.archive);
    print!("{}", series_csv(&points));
    std::fs::write(&out, render_svg(&points))?;
    eprintln!("wrote {out}");
    Ok(())
}
