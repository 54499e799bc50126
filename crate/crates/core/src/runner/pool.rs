use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, Evaluator};
use crate::model::{ModelError, TextModel};

use super::{run_attempt, AttemptTask, AttemptTranscript, InferenceConfig, RunError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub attempted: usize,
    pub correct: usize,
    pub parse_failures: usize,
    pub errors: usize,
}

impl RunSummary {
    fn add(&mut self, t: &AttemptTranscript) {
        self.attempted += 1;
        self.correct += t.is_correct() as usize;
        self.parse_failures += t.is_parse_failure() as usize;
        self.errors += t.error.is_some() as usize;
    }
}

enum Message {
    Done(usize, Box<AttemptTranscript>),
    Failed(RunError),
}

/// Runs every task on `workers` threads. Each worker owns one model handle
/// and one oracle; an oracle is rebuilt after any attempt that ended in an
/// error. Transcripts reach `sink` in task order whatever the scheduling.
pub fn run_tasks<M, O, MF, OF, S>(
    tasks: &[AttemptTask],
    cfg: &InferenceConfig,
    workers: usize,
    make_model: MF,
    make_oracle: OF,
    mut sink: S,
) -> Result<RunSummary, RunError>
where
    M: TextModel,
    O: Evaluator,
    MF: Fn() -> Result<M, ModelError> + Sync,
    OF: Fn() -> Result<O, EngineError> + Sync,
    S: FnMut(&AttemptTranscript) -> std::io::Result<()>,
{
    cfg.validate()?;
    let workers = workers.clamp(1, tasks.len().max(1));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<Message>();

    thread::scope(|scope| {
        for w in 0..workers {
            let tx = tx.clone();
            let (next, abort, make_model, make_oracle) = (&next, &abort, &make_model, &make_oracle);
            scope.spawn(move || {
                let setup = make_model()
                    .map_err(RunError::from)
                    .and_then(|m| Ok((m, make_oracle()?)));
                let (mut model, mut oracle) = match setup {
                    Ok(pair) => pair,
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        let _ = tx.send(Message::Failed(e));
                        return;
                    }
                };
                while !abort.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(task) = tasks.get(i) else { break };
                    let t = run_attempt(&mut model, &mut oracle, task, cfg);
                    if let Some(e) = &t.error {
                        log::warn!("worker {w}: {} #{}: {e}", task.puzzle_id, task.index);
                        match make_oracle() {
                            Ok(o) => oracle = o,
                            Err(e) => {
                                abort.store(true, Ordering::SeqCst);
                                let _ = tx.send(Message::Failed(e.into()));
                                return;
                            }
                        }
                    }
                    if tx.send(Message::Done(i, Box::new(t))).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);

        let mut summary = RunSummary::default();
        let mut held: BTreeMap<usize, Box<AttemptTranscript>> = BTreeMap::new();
        let mut written = 0;
        let mut failure = None;
        for msg in rx {
            match msg {
                Message::Done(i, t) => {
                    held.insert(i, t);
                }
                Message::Failed(e) => {
                    failure.get_or_insert(e);
                    continue;
                }
            }
            while let Some(t) = held.remove(&written) {
                if failure.is_none() {
                    if let Err(e) = sink(&t) {
                        abort.store(true, Ordering::SeqCst);
                        failure = Some(e.into());
                    }
                }
                summary.add(&t);
                written += 1;
                if written % 50 == 0 {
                    log::info!("{written}/{} attempts done", tasks.len());
                }
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(summary),
        }
    })
}
