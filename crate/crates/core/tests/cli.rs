use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chess_modulo::chess::PgnGame;
use chess_modulo::cli::{sample_tasks, RunManifest, EXIT_CONFIG, EXIT_ENDPOINT, EXIT_ENGINE, EXIT_UNSOLVED};
use chess_modulo::datasets::read_all;
use chess_modulo::engine::locate_engine;
use chess_modulo::metrics::read_transcripts;
use serde_json::json;
use tempfile::TempDir;

const ROOK_MATE_FEN: &str = "3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36";
const PIN_FEN: &str = "2q1nk1r/2r1pp1p/1p1p2p1/1R6/5B2/2Q1P3/5PPP/2R3K1 w - - 0 22";

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mate_puzzles.csv")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chess-modulo"))
        .args(args)
        .env_remove("STOCKFISH_PATH")
        .env_remove("CHESS_MODULO_CONFIG")
        .env_remove("CHESS_MODULO_ENDPOINT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn scripted(responses: &[String]) -> String {
    json!({"kind": "scripted", "responses": responses}).to_string()
}

#[test]
fn split_writes_counts_and_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let o = run(&["split", "--puzzles", p(&fixture()), "--holdout", "10", "--seed", "5", "--out", p(dir.path())]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["manifest.json", "split.json", "validation.csv", "train_ids.txt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let split: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("split.json")).unwrap()).unwrap();
    assert_eq!(split["theme_counts"]["mateIn1"], 10);
    assert_eq!(split["theme_counts"]["mateIn3"], 10);
    let manifest = RunManifest::read(a.path()).unwrap().unwrap();
    assert_eq!(manifest.split_seed, Some(5));
    assert_eq!(manifest.datasets["mate_puzzles.csv"].len(), 64);
    let (validation, _) = read_all(&a.path().join("validation.csv")).unwrap();
    assert_eq!(validation.len(), split["validation_ids"].as_array().unwrap().len());
}

#[test]
fn selfplay_plan_only_records_full_schedule() {
    let dir = TempDir::new().unwrap();
    let o = run(&["selfplay", "--engine", "stockfish", "--plan-only", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::read(dir.path()).unwrap().unwrap();
    assert_eq!(m.parameters["planned_games"], 1050);
    assert_eq!(m.limits.unwrap().depth, Some(15));
    assert_eq!(m.limits.unwrap().movetime_ms, Some(10_000));
}

#[test]
fn selfplay_with_no_games_is_empty() {
    let Some(engine) = locate_engine() else {
        eprintln!("skipping: no engine");
        return;
    };
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "selfplay", "--engine", p(&engine), "--levels", "0,1", "--games-per-level", "0", "--out", p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("games.pgn")).unwrap(), "");
    assert_eq!(fs::read_to_string(dir.path().join("corpus.txt")).unwrap(), "");
}

#[test]
fn desk_selfplay_writes_four_games() {
    let Some(engine) = locate_engine() else {
        eprintln!("skipping: no engine");
        return;
    };
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "selfplay", "--engine", p(&engine), "--levels", "0,1", "--games-per-level", "2", "--depth", "5",
        "--max-plies", "120", "--workers", "2", "--out", p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pgn = fs::read_to_string(dir.path().join("games.pgn")).unwrap();
    let games: Vec<PgnGame> = chess_modulo::chess::parse_pgn(&pgn).unwrap();
    assert_eq!(games.len(), 4);
    let corpus = fs::read_to_string(dir.path().join("corpus.txt")).unwrap();
    let plies: usize = games.iter().map(|g| g.moves.len()).sum();
    assert_eq!(corpus.lines().count(), plies);
}

fn eval_args<'a>(endpoint: &'a str, out: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "eval", "--endpoint", endpoint, "--puzzles", p_static(&FIXTURE), "--themes", "mateIn1", "--n", "3", "--seed",
        "9", "--oracle", "mate-search", "--depth", "1", "--workers", "1", "--out",
    ];
    v.push(p(out));
    v.extend_from_slice(extra);
    v
}

static FIXTURE: std::sync::LazyLock<PathBuf> = std::sync::LazyLock::new(fixture);

fn p_static(path: &'static PathBuf) -> &'static str {
    path.to_str().unwrap()
}

/// First position solved, second unparseable, third a legal non-mating move.
fn known_script() -> Vec<String> {
    let (puzzles, _) = read_all(&fixture()).unwrap();
    let (_, tasks) = sample_tasks(&puzzles, &["mateIn1".to_owned()], 3, 9).unwrap();
    assert_eq!(tasks.len(), 3);
    let third = tasks[2].position();
    let wrong = third
        .legal_moves()
        .into_iter()
        .find(|m| !third.apply_move(m).unwrap().is_checkmate())
        .unwrap();
    vec![tasks[0].ground_truth.unwrap().to_uci(), "no idea".into(), wrong.to_uci()]
}

#[test]
fn scripted_eval_gives_known_report() {
    let dir = TempDir::new().unwrap();
    let endpoint = scripted(&known_script());
    let o = run(&eval_args(&endpoint, dir.path(), &["--label", "script"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let main = csv.lines().nth(1).unwrap();
    assert!(
        main.starts_with("main,script,normal,all,3,1,3,1,1,0.333333,"),
        "{main}"
    );
    let samples: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("samples.json")).unwrap()).unwrap();
    assert_eq!(samples.as_array().unwrap().len(), 3);

    // The report command recomputes the same tables.
    let o = run(&["report", "--transcripts", p(dir.path()), "--format", "markdown"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        fs::read_to_string(dir.path().join("report.md")).unwrap()
    );
}

#[test]
fn eval_rejects_zero_sample() {
    let dir = TempDir::new().unwrap();
    let endpoint = scripted(&[]);
    let mut args = eval_args(&endpoint, dir.path(), &[]);
    let n = args.iter().position(|a| *a == "3").unwrap();
    args[n] = "0";
    assert_eq!(code(&run(&args)), EXIT_CONFIG);
}

#[test]
fn interrupted_eval_resumes_without_duplicates() {
    let full = TempDir::new().unwrap();
    let endpoint = scripted(&known_script());
    assert_eq!(code(&run(&eval_args(&endpoint, full.path(), &[]))), 0);
    let complete = fs::read_to_string(full.path().join("transcripts.jsonl")).unwrap();

    // Keep one finished line and half of the next, as a crash would.
    let resumed = TempDir::new().unwrap();
    let lines: Vec<&str> = complete.lines().collect();
    fs::copy(full.path().join("manifest.json"), resumed.path().join("manifest.json")).unwrap();
    fs::write(
        resumed.path().join("transcripts.jsonl"),
        format!("{}\n{}", lines[0], &lines[1][..20]),
    )
    .unwrap();
    // The scripted queue restarts, so the remaining positions see the
    // script from its first reply; the first position is not re-run.
    let o = run(&eval_args(&endpoint, resumed.path(), &[]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(resumed.path().join("transcripts.jsonl")).unwrap();
    let ts = read_transcripts(text.as_bytes()).unwrap();
    let keys: Vec<(String, u32)> = ts.iter().map(|t| (t.puzzle_id.clone(), t.index)).collect();
    let want: Vec<(String, u32)> = read_transcripts(complete.as_bytes())
        .unwrap()
        .iter()
        .map(|t| (t.puzzle_id.clone(), t.index))
        .collect();
    assert_eq!(keys, want);
    assert_eq!(text.lines().next().unwrap(), lines[0]);

    // A different configuration in the same directory is refused.
    let other = scripted(&["e2e4".to_owned()]);
    assert_eq!(code(&run(&eval_args(&other, resumed.path(), &[]))), EXIT_CONFIG);
}

#[test]
fn eval_exit_codes_for_engine_and_endpoint_failures() {
    let dir = TempDir::new().unwrap();
    let endpoint = scripted(&known_script());
    let mut args = eval_args(&endpoint, dir.path(), &[]);
    let o = args.iter().position(|a| *a == "mate-search").unwrap();
    args[o] = "engine";
    args.extend_from_slice(&["--engine", "/nonexistent/engine"]);
    assert_eq!(code(&run(&args)), EXIT_ENGINE);

    let dir = TempDir::new().unwrap();
    let dead = json!({"kind": "http", "base_url": "http://127.0.0.1:9", "model": "m", "max_retries": 0, "timeout_secs": 1.0})
        .to_string();
    assert_eq!(code(&run(&eval_args(&dead, dir.path(), &[]))), EXIT_ENDPOINT);
}

#[test]
fn solve_prints_trace_and_move() {
    let replies = ["Rxc7".to_owned(), "c3c7".to_owned(), "c3h8".to_owned()];
    let o = run(&[
        "solve", "--fen", PIN_FEN, "--endpoint", &scripted(&replies), "--oracle", "mate-search", "--depth", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("+-- User"));
    assert!(out.contains("[INVALID MOVE: CANNOT PARSE VALID UCI/SAN MOVE STRING]"));
    assert!(out.contains("[VALID BUT INACCURATE MOVE"));
    assert!(out.contains("[MOVE CORRECT]"));
    assert_eq!(out.lines().last().unwrap(), "c3h8");
}

#[test]
fn solve_without_acceptance_exits_unsolved() {
    let replies = ["Rxc7".to_owned(), "c3c7".to_owned()];
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "solve", "--fen", PIN_FEN, "--endpoint", &scripted(&replies), "--oracle", "mate-search", "--depth", "1",
        "--out", p(dir.path()),
    ]);
    assert_eq!(code(&o), EXIT_UNSOLVED);
    let t = read_transcripts(fs::read(dir.path().join("transcripts.jsonl")).unwrap().as_slice()).unwrap();
    assert_eq!(t[0].queries_used, 3);
    assert!(t[0].accepted_move.is_none());
}

#[test]
fn solve_rejects_terminal_position() {
    let o = run(&[
        "solve", "--fen", "7k/6Q1/6K1/8/8/8/8/8 b - - 0 1", "--endpoint", &scripted(&[]), "--oracle", "mate-search",
    ]);
    assert_eq!(code(&o), EXIT_CONFIG);
}

#[test]
fn solve_with_engine_as_model() {
    let Some(engine) = locate_engine() else {
        eprintln!("skipping: no engine");
        return;
    };
    let endpoint = json!({"kind": "engine_as_model", "engine": {"path": engine}, "limits": {"depth": 15}}).to_string();
    let o = run(&["solve", "--fen", ROOK_MATE_FEN, "--endpoint", &endpoint, "--engine", p(&engine), "--depth", "15"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().last().unwrap(), "d8d1");
}

#[test]
fn report_errors() {
    let empty = TempDir::new().unwrap();
    fs::write(empty.path().join("transcripts.jsonl"), "").unwrap();
    assert_eq!(code(&run(&["report", "--transcripts", p(empty.path())])), EXIT_CONFIG);

    let future = TempDir::new().unwrap();
    let line = json!({
        "schema_version": 99, "puzzle_id": "a", "index": 1, "fen": ROOK_MATE_FEN, "mode": "normal",
        "turns": [], "queries_used": 1, "resets": 0, "final": "correct", "total_tokens": 1
    });
    fs::write(future.path().join("transcripts.jsonl"), format!("{line}\n")).unwrap();
    assert_eq!(code(&run(&["report", "--transcripts", p(future.path())])), EXIT_CONFIG);
}

#[test]
fn config_file_is_lowest_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        json!({"endpoint": {"kind": "scripted", "responses": ["d8d1"]}, "oracle": "mate-search", "depth": 1}).to_string(),
    )
    .unwrap();
    let o = run(&["--config", p(&cfg), "solve", "--fen", ROOK_MATE_FEN]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // A flag overrides the file.
    let o = run(&["--config", p(&cfg), "solve", "--fen", ROOK_MATE_FEN, "--endpoint", &scripted(&[])]);
    assert_eq!(code(&o), EXIT_UNSOLVED);
}
