//! Wilson score intervals and the accuracy tables, built from a small
//! hand-written transcript log.
//!
//! ```bash
//! cargo run --example metrics_report
//! ```

use chess_modulo::metrics::{
    read_transcripts, render_report, wilson_interval, MetricsReport, ReportFormat, DEFAULT_CONFIDENCE,
};

fn line(puzzle: &str, index: u32, mode: &str, verdict: &str, theme: &str) -> String {
    serde_json::json!({
        "schema_version": 1,
        "puzzle_id": puzzle,
        "index": index,
        "fen": "8/8/8/8/8/8/8/K6k w - - 0 1",
        "themes": [theme],
        "mode": mode,
        "turns": [],
        "queries_used": 1,
        "resets": 0,
        "final": verdict,
        "total_tokens": 3,
    })
    .to_string()
}

fn main() {
    for (k, n) in [(191, 300), (476, 600), (300, 300), (0, 300)] {
        let ci = wilson_interval(k, n, DEFAULT_CONFIDENCE).unwrap();
        println!(
            "{k:>3}/{n}: rate {:.4}, 99% interval [{:.4}, {:.4}], shown as {:.1} ± {:.1}",
            ci.point,
            ci.low,
            ci.high,
            ci.center * 100.0,
            ci.half_width() * 100.0
        );
    }

    let log = [
        line("a", 1, "normal", "correct", "mateIn1"),
        line("b", 1, "normal", "incorrect", "mateIn1"),
        line("c", 1, "normal", "correct", "mateIn2"),
        line("c", 2, "normal", "parse_failure", "mateIn2"),
        line("a", 1, "modulo", "correct", "mateIn1"),
        line("b", 1, "modulo", "correct", "mateIn1"),
        line("c", 1, "modulo", "correct", "mateIn2"),
        line("c", 2, "modulo", "correct", "mateIn2"),
    ]
    .join("\n");
    let ts = read_transcripts(log.as_bytes()).unwrap();
    let mut report = MetricsReport::new(DEFAULT_CONFIDENCE).unwrap();
    report.add_model("demo", &ts).unwrap();
    report
        .add_themes("demo", &ts, &["mateIn1".into(), "mateIn2".into(), "mateIn3".into()], false)
        .unwrap();
    println!("\n{}", render_report(&report, ReportFormat::Markdown));
    println!("{}", render_report(&report, ReportFormat::Csv));
}
