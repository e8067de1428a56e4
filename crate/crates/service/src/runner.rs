//! One thread per live session. The thread owns the [`Session`] and is its
//! only writer; handlers talk to it over a channel and read the published
//! transcript from shared state.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use companion_core::{FeedEvent, Mode, Session, TranscriptEntry};
use serde::Serialize;
use tokio::sync::{oneshot, watch};

/// Longest the loop sleeps when no timer is pending.
const IDLE_WAIT: Duration = Duration::from_secs(3600);

pub enum Command {
    Say(String),
    /// A feed event; its timestamp is replaced by the session clock.
    Feed(FeedEvent),
    Cancel,
    End(oneshot::Sender<()>),
}

#[derive(Debug, Clone, Serialize)]
pub struct Status {
    pub id: String,
    pub mode: Mode,
    pub clock: f64,
    pub conversation_turn: u32,
    pub utterance_seq: u64,
    pub no_answer_count: u32,
    pub transcript_len: usize,
    pub ended: bool,
}

pub struct Shared {
    pub entries: Vec<TranscriptEntry>,
    pub status: Status,
}

/// Handle kept by the HTTP layer.
pub struct SessionHandle {
    commands: Mutex<mpsc::Sender<Command>>,
    pub shared: Arc<Mutex<Shared>>,
    pub updates: watch::Receiver<usize>,
}

impl SessionHandle {
    /// Queues a command; `false` once the session thread has stopped.
    pub fn send(&self, command: Command) -> bool {
        self.commands.lock().expect("command lock").send(command).is_ok()
    }

    pub fn ended(&self) -> bool {
        self.shared.lock().expect("shared lock").status.ended
    }
}

fn status_of(id: &str, session: &Session, ended: bool) -> Status {
    let s = session.state();
    Status {
        id: id.to_string(),
        mode: s.mode,
        clock: s.clock,
        conversation_turn: s.conversation_turn,
        utterance_seq: s.utterance_seq,
        no_answer_count: s.no_answer_count,
        transcript_len: s.transcript.len(),
        ended,
    }
}

struct Publisher {
    id: String,
    shared: Arc<Mutex<Shared>>,
    updates: watch::Sender<usize>,
    file: Option<BufWriter<File>>,
}

impl Publisher {
    fn publish(&mut self, session: &Session, new: Vec<TranscriptEntry>, ended: bool) {
        if let Some(file) = &mut self.file {
            let written = new.iter().try_for_each(|e| {
                serde_json::to_writer(&mut *file, e)?;
                file.write_all(b"\n")?;
                Ok::<_, std::io::Error>(())
            });
            if let Err(e) = written.and_then(|()| file.flush()) {
                log::error!("session {}: transcript write failed: {e}", self.id);
            }
        }
        let len = {
            let mut shared = self.shared.lock().expect("shared lock");
            shared.entries.extend(new);
            shared.status = status_of(&self.id, session, ended);
            shared.entries.len()
        };
        self.updates.send_replace(len);
    }
}

/// Starts the session thread. `speedup` maps wall seconds to session seconds.
pub fn spawn(
    id: String,
    session: Session,
    speedup: f64,
    transcript_path: Option<PathBuf>,
) -> std::io::Result<SessionHandle> {
    let file = transcript_path.map(File::create).transpose()?.map(BufWriter::new);
    let shared = Arc::new(Mutex::new(Shared { entries: Vec::new(), status: status_of(&id, &session, false) }));
    let (updates_tx, updates) = watch::channel(0);
    let (tx, rx) = mpsc::channel();
    let name = format!("session-{id}");
    let publisher = Publisher { id, shared: shared.clone(), updates: updates_tx, file };
    thread::Builder::new().name(name).spawn(move || run(session, rx, speedup, publisher))?;
    Ok(SessionHandle { commands: Mutex::new(tx), shared, updates })
}

fn run(mut session: Session, rx: mpsc::Receiver<Command>, speedup: f64, mut publisher: Publisher) {
    let start = Instant::now();
    let clock = || start.elapsed().as_secs_f64() * speedup;
    loop {
        let due = session.next_timer();
        let wait =
            if due.is_finite() { Duration::from_secs_f64(((due - clock()) / speedup).max(0.0)) } else { IDLE_WAIT };
        let (new, ended, reply) = match rx.recv_timeout(wait) {
            Ok(Command::Say(text)) => (session.on_user_utterance(&text, clock()), false, None),
            Ok(Command::Feed(mut event)) => {
                event.t = clock().max(session.state().clock);
                (session.ingest_feed(&event), false, None)
            }
            Ok(Command::Cancel) => {
                let mut new = session.tick(clock());
                new.extend(session.cancel());
                (new, false, None)
            }
            Ok(Command::End(reply)) => (session.tick(clock()), true, Some(reply)),
            Err(RecvTimeoutError::Timeout) => (session.tick(clock().max(due)), false, None),
            Err(RecvTimeoutError::Disconnected) => (Vec::new(), true, None),
        };
        publisher.publish(&session, new, ended);
        if let Some(reply) = reply {
            let _ = reply.send(());
        }
        if ended {
            log::info!("session {} ended", publisher.id);
            return;
        }
    }
}
