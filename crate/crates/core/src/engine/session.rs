use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, trace, warn};

use super::{terminal_eval, EngineConfig, EngineError, EngineEval, EngineLimits, Evaluation, Evaluator};
use crate::chess::{Move, Position};

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);
/// Ceiling for a depth-only search. Generous: deep searches on slow hosts are
/// still legitimate.
const DEPTH_SEARCH_TIMEOUT: Duration = Duration::from_secs(600);
/// Added to `movetime` before a search counts as hung.
const MOVETIME_GRACE: Duration = Duration::from_secs(10);
const STOP_GRACE: Duration = Duration::from_secs(5);

/// A running engine process that has completed the UCI handshake.
///
/// Requests are strictly sequential: every `go` is drained up to its
/// `bestmove` before the next command is written.
pub struct EngineSession {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    id_name: Option<String>,
    advertised: Vec<String>,
    setup: Vec<String>,
    label: String,
    broken: bool,
}

impl EngineSession {
    pub fn open(cfg: &EngineConfig) -> Result<EngineSession, EngineError> {
        EngineSession::open_with_timeout(cfg, HANDSHAKE_TIMEOUT)
    }

    pub fn open_with_timeout(cfg: &EngineConfig, handshake: Duration) -> Result<EngineSession, EngineError> {
        cfg.validate()?;
        let mut child = Command::new(&cfg.path)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| EngineError::Spawn {
                path: cfg.path.clone(),
                source,
            })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("uci-reader".into())
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let Ok(line) = line else { break };
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            })?;

        let mut session = EngineSession {
            child,
            stdin,
            lines: rx,
            id_name: None,
            advertised: Vec::new(),
            setup: Vec::new(),
            label: cfg.label(),
            broken: false,
        };
        session.handshake(cfg, handshake)?;
        Ok(session)
    }

    fn handshake(&mut self, cfg: &EngineConfig, timeout: Duration) -> Result<(), EngineError> {
        let deadline = Instant::now() + timeout;
        self.send("uci")?;
        loop {
            let line = self
                .recv_until(deadline)
                .map_err(|e| handshake_error(e, timeout))?;
            if line == "uciok" {
                break;
            }
            if let Some(name) = line.strip_prefix("id name ") {
                self.id_name = Some(name.trim().to_owned());
            } else if let Some(name) = option_name(&line) {
                self.advertised.push(name);
            }
        }
        for (name, value) in cfg.setoption_commands() {
            if !self.supports_option(&name) {
                return Err(EngineError::UnknownOption(name));
            }
            let cmd = format!("setoption name {name} value {value}");
            self.send(&cmd)?;
            self.setup.push(cmd);
        }
        self.sync_until(deadline).map_err(|e| handshake_error(e, timeout))?;
        debug!("engine `{}` ready ({} options)", self.name(), self.advertised.len());
        Ok(())
    }

    pub fn supports_option(&self, name: &str) -> bool {
        self.advertised.iter().any(|o| o.eq_ignore_ascii_case(name))
    }

    /// `id name` reported by the engine.
    pub fn engine_name(&self) -> Option<&str> {
        self.id_name.as_deref()
    }

    /// `setoption` commands sent during setup, in order.
    pub fn setup_commands(&self) -> &[String] {
        &self.setup
    }

    fn send(&mut self, cmd: &str) -> Result<(), EngineError> {
        trace!("> {cmd}");
        writeln!(self.stdin, "{cmd}").and_then(|_| self.stdin.flush()).map_err(|e| {
            self.broken = true;
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                EngineError::Exited
            } else {
                EngineError::Io(e)
            }
        })
    }

    fn recv_until(&mut self, deadline: Instant) -> Result<String, EngineError> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(line) => {
                trace!("< {line}");
                Ok(line)
            }
            Err(RecvTimeoutError::Timeout) => Err(EngineError::Timeout(wait)),
            Err(RecvTimeoutError::Disconnected) => {
                self.broken = true;
                Err(EngineError::Exited)
            }
        }
    }

    /// `isready` round trip; anything still buffered is discarded.
    fn sync_until(&mut self, deadline: Instant) -> Result<(), EngineError> {
        self.send("isready")?;
        loop {
            if self.recv_until(deadline)? == "readyok" {
                return Ok(());
            }
        }
    }

    pub fn is_broken(&self) -> bool {
        self.broken
    }

    /// Searches `p` and returns the final score and best move.
    pub fn search(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError> {
        limits.validate()?;
        if let Some(eval) = terminal_eval(p) {
            return Ok(Evaluation { eval, best: None });
        }
        if self.broken {
            return Err(EngineError::Exited);
        }
        self.sync_until(Instant::now() + HANDSHAKE_TIMEOUT)?;
        self.send(&format!("position fen {}", p.to_fen()))?;
        self.send(&limits.go_command())?;

        let budget = match limits.movetime() {
            Some(mt) => mt + MOVETIME_GRACE,
            None => DEPTH_SEARCH_TIMEOUT,
        };
        let mut deadline = Instant::now() + budget;
        let mut stopped = false;
        let mut exact: Option<EngineEval> = None;
        let mut bound: Option<EngineEval> = None;
        loop {
            let line = match self.recv_until(deadline) {
                Ok(l) => l,
                Err(EngineError::Timeout(_)) if !stopped => {
                    warn!("engine search exceeded {budget:?}; sending stop");
                    self.send("stop")?;
                    stopped = true;
                    deadline = Instant::now() + STOP_GRACE;
                    continue;
                }
                Err(EngineError::Timeout(_)) => {
                    self.broken = true;
                    return Err(EngineError::Timeout(budget));
                }
                Err(e) => return Err(e),
            };
            if line.starts_with("info ") {
                if let Some((eval, is_bound)) = parse_info_score(&line) {
                    if is_bound {
                        bound = Some(eval);
                    } else {
                        exact = Some(eval);
                    }
                }
            } else if let Some(rest) = line.strip_prefix("bestmove") {
                let token = rest.split_whitespace().next().unwrap_or("");
                let best: Move = token
                    .parse()
                    .map_err(|_| EngineError::Protocol(format!("unparseable bestmove `{line}`")))?;
                if !p.is_legal(&best) {
                    return Err(EngineError::Protocol(format!(
                        "bestmove {best} is illegal in {}",
                        p.to_fen()
                    )));
                }
                let eval = exact.or(bound).ok_or_else(|| {
                    EngineError::Protocol("bestmove without any score line".into())
                })?;
                if stopped {
                    return Err(EngineError::Timeout(budget));
                }
                return Ok(Evaluation {
                    eval,
                    best: Some(best),
                });
            }
        }
    }
}

fn handshake_error(e: EngineError, timeout: Duration) -> EngineError {
    match e {
        EngineError::Timeout(_) => EngineError::HandshakeTimeout(timeout),
        other => other,
    }
}

fn option_name(line: &str) -> Option<String> {
    let rest = line.strip_prefix("option name ")?;
    let end = rest.find(" type ").unwrap_or(rest.len());
    Some(rest[..end].trim().to_owned())
}

/// Extracts the score from a UCI `info` line. The flag is set for
/// `lowerbound`/`upperbound` scores, which are provisional.
pub fn parse_info_score(line: &str) -> Option<(EngineEval, bool)> {
    let mut words = line.split_whitespace();
    if words.next() != Some("info") {
        return None;
    }
    while let Some(w) = words.next() {
        if w != "score" {
            continue;
        }
        let kind = words.next()?;
        let value: i32 = words.next()?.parse().ok()?;
        let is_bound = matches!(words.next(), Some("lowerbound" | "upperbound"));
        let eval = match kind {
            "cp" => EngineEval::Centipawns(value),
            "mate" if value == 0 => EngineEval::TerminalMate,
            "mate" => EngineEval::MateIn(value),
            _ => return None,
        };
        return Some((eval, is_bound));
    }
    None
}

impl Evaluator for EngineSession {
    fn evaluate(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError> {
        self.search(p, limits)
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

impl Drop for EngineSession {
    fn drop(&mut self) {
        if !self.broken {
            let _ = writeln!(self.stdin, "quit").and_then(|_| self.stdin.flush());
        }
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
