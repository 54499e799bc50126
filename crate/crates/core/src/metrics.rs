//! Accuracy, puzzle accuracy and sanity over transcripts, with Wilson
//! intervals and table rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::runner::{AttemptTranscript, FinalVerdict, InferenceMode};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no transcripts to aggregate")]
    Empty,
    #[error("invalid counts: {successes} successes out of {n}")]
    InvalidCounts { successes: u64, n: u64 },
    #[error("no normal quantile tabulated for confidence {0}")]
    UnsupportedConfidence(f64),
    #[error("transcript line {line}: {source}")]
    Transcript {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const DEFAULT_CONFIDENCE: f64 = 0.99;

/// Two-sided standard normal quantiles, so outputs never depend on a
/// numerical inverse CDF.
const Z_TABLE: [(f64, f64); 4] = [(0.90, 1.6448536), (0.95, 1.9599640), (0.99, 2.5758293), (0.999, 3.2905267)];

fn z_for(confidence: f64) -> Result<f64, MetricsError> {
    Z_TABLE
        .iter()
        .find(|(c, _)| (c - confidence).abs() < 1e-9)
        .map(|&(_, z)| z)
        .ok_or(MetricsError::UnsupportedConfidence(confidence))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    /// Sample proportion.
    pub point: f64,
    /// Midpoint of the Wilson interval.
    pub center: f64,
    pub low: f64,
    pub high: f64,
    pub confidence: f64,
}

impl ConfidenceInterval {
    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }
}

pub fn wilson_interval(successes: u64, n: u64, confidence: f64) -> Result<ConfidenceInterval, MetricsError> {
    if n == 0 || successes > n {
        return Err(MetricsError::InvalidCounts { successes, n });
    }
    let z = z_for(confidence)?;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // The closed form is exact at the ends; pin them against rounding.
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == n { 1.0 } else { (center + half).min(1.0) };
    Ok(ConfidenceInterval {
        point: p,
        center,
        low: low.min(p),
        high: high.max(p),
        confidence,
    })
}

fn require(ts: &[AttemptTranscript]) -> Result<(), MetricsError> {
    if ts.is_empty() {
        Err(MetricsError::Empty)
    } else {
        Ok(())
    }
}

/// Correct positions over all positions.
pub fn overall_accuracy(ts: &[AttemptTranscript]) -> Result<f64, MetricsError> {
    require(ts)?;
    Ok(Tally::of(ts).overall())
}

/// Puzzles with every position correct over all puzzles.
pub fn puzzle_accuracy(ts: &[AttemptTranscript]) -> Result<f64, MetricsError> {
    require(ts)?;
    Ok(Tally::of(ts).puzzle())
}

/// One minus the share of positions where no response parsed.
pub fn sanity(ts: &[AttemptTranscript]) -> Result<f64, MetricsError> {
    require(ts)?;
    Ok(Tally::of(ts).sanity())
}

/// Counts that merge associatively, so partial tallies can be combined in
/// any order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub positions: u64,
    pub correct: u64,
    pub invalid: u64,
    pub queries: u64,
    pub tokens: u64,
    /// Puzzle id to whether every position seen so far was correct.
    pub puzzles: BTreeMap<String, bool>,
}

impl Tally {
    pub fn add(&mut self, t: &AttemptTranscript) {
        let ok = t.final_verdict == FinalVerdict::Correct;
        self.positions += 1;
        self.correct += ok as u64;
        self.invalid += (t.final_verdict == FinalVerdict::ParseFailure) as u64;
        self.queries += u64::from(t.queries_used);
        self.tokens += t.total_tokens;
        *self.puzzles.entry(t.puzzle_id.clone()).or_insert(true) &= ok;
    }

    pub fn of<'a>(ts: impl IntoIterator<Item = &'a AttemptTranscript>) -> Tally {
        let mut tally = Tally::default();
        for t in ts {
            tally.add(t);
        }
        tally
    }

    pub fn merge(&mut self, other: &Tally) {
        self.positions += other.positions;
        self.correct += other.correct;
        self.invalid += other.invalid;
        self.queries += other.queries;
        self.tokens += other.tokens;
        for (id, ok) in &other.puzzles {
            *self.puzzles.entry(id.clone()).or_insert(true) &= ok;
        }
    }

    pub fn solved(&self) -> u64 {
        self.puzzles.values().filter(|&&ok| ok).count() as u64
    }

    fn ratio(a: u64, b: u64) -> f64 {
        if b == 0 {
            0.0
        } else {
            a as f64 / b as f64
        }
    }

    pub fn overall(&self) -> f64 {
        Tally::ratio(self.correct, self.positions)
    }

    pub fn puzzle(&self) -> f64 {
        Tally::ratio(self.solved(), self.puzzles.len() as u64)
    }

    pub fn sanity(&self) -> f64 {
        1.0 - Tally::ratio(self.invalid, self.positions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub mode: InferenceMode,
    pub stratum: String,
    pub positions: u64,
    pub correct: u64,
    pub puzzles: u64,
    pub solved: u64,
    pub invalid: u64,
    pub overall: ConfidenceInterval,
    pub puzzle: ConfidenceInterval,
    pub sanity: ConfidenceInterval,
    /// Tokens per model response.
    pub mean_tokens_per_response: f64,
    /// Tokens per attempt, summed over every query in it.
    pub mean_tokens_per_attempt: f64,
}

impl ReportRow {
    fn new(model: &str, mode: InferenceMode, stratum: &str, t: &Tally, confidence: f64) -> Result<ReportRow, MetricsError> {
        let puzzles = t.puzzles.len() as u64;
        Ok(ReportRow {
            model: model.to_owned(),
            mode,
            stratum: stratum.to_owned(),
            positions: t.positions,
            correct: t.correct,
            puzzles,
            solved: t.solved(),
            invalid: t.invalid,
            overall: wilson_interval(t.correct, t.positions, confidence)?,
            puzzle: wilson_interval(t.solved(), puzzles, confidence)?,
            sanity: wilson_interval(t.positions - t.invalid, t.positions, confidence)?,
            mean_tokens_per_response: Tally::ratio(t.tokens, t.queries),
            mean_tokens_per_attempt: Tally::ratio(t.tokens, t.positions),
        })
    }
}

/// Which number is printed before the ± in rendered tables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStyle {
    /// Midpoint of the interval; a perfect 300/300 prints as 98.9.
    #[default]
    WilsonCenter,
    SampleProportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confidence: f64,
    #[serde(default)]
    pub point_style: PointStyle,
    pub rows: Vec<ReportRow>,
    /// Per-theme rows, rendered as a theme-by-model table.
    #[serde(default)]
    pub theme_rows: Vec<ReportRow>,
    /// Strata that had no positions.
    #[serde(default)]
    pub omitted: Vec<String>,
}

impl MetricsReport {
    pub fn new(confidence: f64) -> Result<MetricsReport, MetricsError> {
        z_for(confidence)?;
        Ok(MetricsReport {
            confidence,
            point_style: PointStyle::default(),
            rows: Vec::new(),
            theme_rows: Vec::new(),
            omitted: Vec::new(),
        })
    }

    /// Adds one row per mode found in `ts`, over every position.
    pub fn add_model(&mut self, model: &str, ts: &[AttemptTranscript]) -> Result<(), MetricsError> {
        for (mode, tally) in by_mode(ts) {
            self.rows.push(ReportRow::new(model, mode, "all", &tally, self.confidence)?);
        }
        Ok(())
    }

    /// Adds per-theme rows. A transcript counts toward each of its themes;
    /// with `first_move_only` just the first solver move of each puzzle is used.
    pub fn add_themes(
        &mut self,
        model: &str,
        ts: &[AttemptTranscript],
        themes: &[String],
        first_move_only: bool,
    ) -> Result<(), MetricsError> {
        for (mode, _) in by_mode(ts) {
            for theme in themes {
                let tally = Tally::of(
                    ts.iter()
                        .filter(|t| t.mode == mode && (!first_move_only || t.index == 1))
                        .filter(|t| t.themes.iter().any(|x| x == theme)),
                );
                if tally.positions == 0 {
                    self.omitted.push(format!("{model} / {mode} / {theme}"));
                    continue;
                }
                self.theme_rows
                    .push(ReportRow::new(model, mode, theme, &tally, self.confidence)?);
            }
        }
        Ok(())
    }
}

fn by_mode(ts: &[AttemptTranscript]) -> BTreeMap<InferenceMode, Tally> {
    let mut out: BTreeMap<InferenceMode, Tally> = BTreeMap::new();
    for t in ts {
        out.entry(t.mode).or_default().add(t);
    }
    out
}

/// Splits `ts` by a single key per transcript. The per-stratum counts add
/// up to the overall counts.
pub fn stratify<F: Fn(&AttemptTranscript) -> String>(ts: &[AttemptTranscript], key: F) -> BTreeMap<String, Tally> {
    let mut out: BTreeMap<String, Tally> = BTreeMap::new();
    for t in ts {
        out.entry(key(t)).or_default().add(t);
    }
    out
}

/// `mateIn<N>` for mate puzzles, otherwise `other`.
pub fn mate_stratum(t: &AttemptTranscript) -> String {
    t.themes
        .iter()
        .find(|x| x.strip_prefix("mateIn").is_some_and(|n| n.parse::<u32>().is_ok()))
        .cloned()
        .unwrap_or_else(|| "other".to_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<ReportFormat, String> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

fn mode_label(mode: InferenceMode, k: Option<u32>) -> String {
    match mode {
        InferenceMode::PassAtK => format!("pass@{}", k.unwrap_or(10)),
        m => m.to_string(),
    }
}

fn pct(ci: &ConfidenceInterval, style: PointStyle) -> String {
    let point = match style {
        PointStyle::WilsonCenter => ci.center,
        PointStyle::SampleProportion => ci.point,
    };
    format!("{:.1} ± {:.1}", point * 100.0, ci.half_width() * 100.0)
}

fn markdown(r: &MetricsReport) -> String {
    let mut out = String::new();
    let conf = r.confidence * 100.0;
    if !r.rows.is_empty() {
        let _ = writeln!(
            out,
            "| Model | Inference | Puzzle Accuracy (%) | Position Accuracy (%) | Sanity (%) |"
        );
        let _ = writeln!(out, "|---|---|---:|---:|---:|");
        for row in &r.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.1} |",
                row.model,
                mode_label(row.mode, None),
                pct(&row.puzzle, r.point_style),
                pct(&row.overall, r.point_style),
                row.sanity.point * 100.0
            );
        }
        let _ = writeln!(out, "\nIntervals: {conf}% Wilson score.");
    }
    if !r.theme_rows.is_empty() {
        let mut columns: Vec<(String, InferenceMode)> = Vec::new();
        let mut cells: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
        for row in &r.theme_rows {
            let col = (row.model.clone(), row.mode);
            let c = columns.iter().position(|x| *x == col).unwrap_or_else(|| {
                columns.push(col);
                columns.len() - 1
            });
            cells
                .entry(row.stratum.clone())
                .or_default()
                .insert(c, pct(&row.overall, r.point_style));
        }
        if !out.is_empty() {
            out.push('\n');
        }
        let header: Vec<String> = columns
            .iter()
            .map(|(m, mode)| format!("{m} ({})", mode_label(*mode, None)))
            .collect();
        let _ = writeln!(out, "| Theme | {} |", header.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(columns.len()));
        for (theme, row) in &cells {
            let vals: Vec<&str> = (0..columns.len())
                .map(|i| row.get(&i).map_or("--", String::as_str))
                .collect();
            let _ = writeln!(out, "| {theme} | {} |", vals.join(" | "));
        }
        let _ = writeln!(out, "\nPosition accuracy (%), {conf}% Wilson score.");
    }
    for note in &r.omitted {
        let _ = writeln!(out, "\nNo positions for {note}; row omitted.");
    }
    out
}

fn csv_table(r: &MetricsReport) -> String {
    let mut out = String::from(
        "table,model,mode,stratum,positions,correct,puzzles,solved,invalid,\
         position_accuracy,position_low,position_high,puzzle_accuracy,puzzle_low,puzzle_high,\
         sanity,sanity_low,sanity_high,tokens_per_response,tokens_per_attempt\n",
    );
    let tables = [("main", &r.rows), ("theme", &r.theme_rows)];
    for (table, rows) in tables {
        for row in rows.iter() {
            let _ = writeln!(
                out,
                "{table},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3}",
                row.model,
                row.mode,
                row.stratum,
                row.positions,
                row.correct,
                row.puzzles,
                row.solved,
                row.invalid,
                row.overall.point,
                row.overall.low,
                row.overall.high,
                row.puzzle.point,
                row.puzzle.low,
                row.puzzle.high,
                row.sanity.point,
                row.sanity.low,
                row.sanity.high,
                row.mean_tokens_per_response,
                row.mean_tokens_per_attempt
            );
        }
    }
    out
}

pub fn render_report(r: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(r),
        ReportFormat::Csv => csv_table(r),
        ReportFormat::Json => serde_json::to_string_pretty(r).expect("reports always serialize") + "\n",
    }
}

/// Reads a JSON-lines transcript file. Blank lines are ignored.
pub fn read_transcripts<R: BufRead>(r: R) -> Result<Vec<AttemptTranscript>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| MetricsError::Transcript { line: i + 1, source })?);
    }
    Ok(out)
}
