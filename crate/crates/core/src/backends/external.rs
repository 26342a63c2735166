//! Out-of-process restorer speaking `irsr/1` over the child's stdin/stdout.
//!
//! One request is in flight per process. Every exchange runs on a helper
//! thread so a stalled peer can be timed out; any protocol failure kills and
//! reaps the child and leaves the backend closed.

use std::io::{BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{self, FrameHeader, Hello, Ready, WireError};
use super::{BackendError, BackendInfo, Restorer};
use crate::image::Image;

struct Streams {
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

struct Connection {
    child: Child,
    streams: Option<Streams>,
}

pub struct ExternalBackend {
    info: BackendInfo,
    timeout: Duration,
    conn: Mutex<Option<Connection>>,
}

impl std::fmt::Debug for ExternalBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalBackend")
            .field("info", &self.info)
            .field("timeout", &self.timeout)
            .finish()
    }
}

enum Outcome<T> {
    Done(Streams, Result<T, WireError>),
    TimedOut,
}

/// Runs `job` against the streams on a helper thread, bounded by `timeout`.
fn exchange<T, F>(streams: Streams, timeout: Duration, job: F) -> Outcome<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Streams) -> Result<T, WireError> + Send + 'static,
{
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut s = streams;
        let r = job(&mut s);
        let _ = tx.send((s, r));
    });
    match rx.recv_timeout(timeout) {
        Ok((s, r)) => Outcome::Done(s, r),
        Err(_) => Outcome::TimedOut,
    }
}

impl ExternalBackend {
    /// Spawns `command` and performs the hello/ready handshake.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, BackendError> {
        let name = command.join(" ");
        let (program, args) = command.split_first().ok_or_else(|| BackendError::Spawn {
            command: name.clone(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BackendError::Spawn {
                command: name.clone(),
                source,
            })?;
        let streams = Streams {
            stdin: child.stdin.take().expect("piped stdin"),
            stdout: BufReader::new(child.stdout.take().expect("piped stdout")),
        };
        let mut conn = Connection {
            child,
            streams: None,
        };

        let outcome = exchange(streams, timeout, |s| {
            wire::write_message(&mut s.stdin, &Hello::new())?;
            s.stdin.flush()?;
            wire::read_message(&mut s.stdout)?.expect::<Ready>("ready")
        });
        let handshake_err = |message: String| BackendError::Handshake {
            backend: name.clone(),
            message,
        };
        let ready = match outcome {
            Outcome::TimedOut => {
                terminate(&mut conn.child);
                return Err(BackendError::Timeout {
                    backend: name,
                    after: timeout,
                });
            }
            Outcome::Done(s, Ok(ready)) => {
                conn.streams = Some(s);
                ready
            }
            Outcome::Done(_, Err(e @ (WireError::Eof | WireError::Io(_)))) => {
                return Err(match reap(&mut conn.child) {
                    Some(st) if !st.success() => BackendError::ProcessExit {
                        backend: name,
                        status: st.to_string(),
                    },
                    _ => handshake_err(e.to_string()),
                });
            }
            Outcome::Done(_, Err(e)) => {
                terminate(&mut conn.child);
                return Err(handshake_err(e.to_string()));
            }
        };
        if ready.proto != wire::PROTO {
            terminate(&mut conn.child);
            return Err(handshake_err(format!("peer speaks `{}`", ready.proto)));
        }
        if ready.scale == 0 || !(ready.channels == 1 || ready.channels == 3) {
            terminate(&mut conn.child);
            return Err(handshake_err(format!(
                "invalid ready: scale {}, channels {}",
                ready.scale, ready.channels
            )));
        }

        Ok(Self {
            info: BackendInfo {
                name,
                scale: ready.scale,
                channels: Some(ready.channels),
                internal_tlc: ready.internal_tlc,
                deterministic: true,
            },
            timeout,
            conn: Mutex::new(Some(conn)),
        })
    }

    fn fail(&self, conn: &mut Option<Connection>, err: BackendError) -> BackendError {
        if let Some(mut c) = conn.take() {
            terminate(&mut c.child);
        }
        err
    }
}

impl Restorer for ExternalBackend {
    fn info(&self) -> &BackendInfo {
        &self.info
    }

    fn process(&self, img: &Image) -> Result<Image, BackendError> {
        let name = &self.info.name;
        let mut guard = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        let streams = match guard.as_mut().and_then(|c| c.streams.take()) {
            Some(s) => s,
            None => {
                return Err(BackendError::Closed {
                    backend: name.clone(),
                })
            }
        };

        let request = img.clone();
        let outcome = exchange(streams, self.timeout, move |s| {
            wire::write_frame(&mut s.stdin, "restore", &request)?;
            let header: FrameHeader = wire::read_message(&mut s.stdout)?.expect("result")?;
            Ok(header)
        });
        let (streams, header) = match outcome {
            Outcome::TimedOut => {
                let err = BackendError::Timeout {
                    backend: name.clone(),
                    after: self.timeout,
                };
                return Err(self.fail(&mut guard, err));
            }
            Outcome::Done(s, r) => (s, r),
        };
        let header = match header {
            Ok(h) => h,
            Err(WireError::Remote(message)) => {
                // The peer answered cleanly; the connection stays usable.
                if let Some(c) = guard.as_mut() {
                    c.streams = Some(streams);
                }
                return Err(BackendError::Failure {
                    backend: name.clone(),
                    message,
                });
            }
            Err(e) => {
                let err = self.wire_error(&mut guard, e);
                return Err(self.fail(&mut guard, err));
            }
        };

        let (h, w, c) = img.dims();
        let expected = (h * self.info.scale, w * self.info.scale, c);
        let actual = (header.height, header.width, header.channels);
        if actual != expected {
            let err = BackendError::DimensionMismatch {
                backend: name.clone(),
                expected,
                actual,
            };
            return Err(self.fail(&mut guard, err));
        }

        let outcome = exchange(streams, self.timeout, move |s| {
            wire::read_payload(&mut s.stdout, &header)
        });
        match outcome {
            Outcome::TimedOut => {
                let err = BackendError::Timeout {
                    backend: name.clone(),
                    after: self.timeout,
                };
                Err(self.fail(&mut guard, err))
            }
            Outcome::Done(s, Ok(out)) => {
                if let Some(c) = guard.as_mut() {
                    c.streams = Some(s);
                }
                Ok(out)
            }
            Outcome::Done(_, Err(e)) => {
                let err = self.wire_error(&mut guard, e);
                Err(self.fail(&mut guard, err))
            }
        }
    }
}

impl ExternalBackend {
    fn wire_error(&self, conn: &mut Option<Connection>, e: WireError) -> BackendError {
        let backend = self.info.name.clone();
        match e {
            WireError::Eof | WireError::Io(_) => {
                let status = conn.as_mut().and_then(|c| reap(&mut c.child));
                match status {
                    Some(st) if !st.success() => BackendError::ProcessExit {
                        backend,
                        status: st.to_string(),
                    },
                    _ => BackendError::Protocol {
                        backend,
                        message: "peer closed the connection".into(),
                    },
                }
            }
            WireError::Underrun { expected, got } => BackendError::PayloadUnderrun {
                backend,
                expected,
                got,
            },
            other => BackendError::Protocol {
                backend,
                message: other.to_string(),
            },
        }
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        let conn = self.conn.get_mut().unwrap_or_else(|p| p.into_inner());
        if let Some(mut c) = conn.take() {
            // Closing stdin asks the peer to exit.
            drop(c.streams.take());
            let deadline = Instant::now() + Duration::from_secs(2);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = c.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            terminate(&mut c.child);
        }
    }
}

fn terminate(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

/// Waits briefly for a child that closed its stdout, then kills it.
/// Returns the exit status if the child exited on its own.
fn reap(child: &mut Child) -> Option<ExitStatus> {
    let deadline = Instant::now() + Duration::from_secs(2);
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Some(status),
            Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
            _ => {
                terminate(child);
                return None;
            }
        }
    }
}
