//! Line protocol to an external verifier process.
//!
//! Requests, one per line on the child's stdin:
//!
//! ```text
//! VERIFY <path_a> <path_b>
//! DETECT <path>
//! ```
//!
//! Replies, one per line on its stdout:
//!
//! ```text
//! ACCEPT [score] | REJECT [score] | FACE | NOFACE | ERR <message>
//! ```
//!
//! Paths are absolute PNG files. Requests are serialized; a timed-out or
//! desynchronized child is killed and restarted on the next request.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::{FaceOracle, OracleError, VerifyDecision};
use crate::image::ImageBuffer;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Session {
    fn start(command: &str) -> Result<Self, OracleError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(format!("exec {command}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| OracleError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
        })
    }

    fn request(&mut self, line: &str, timeout: Duration) -> Result<String, OracleError> {
        let exited = || OracleError::Exited {
            request: line.to_string(),
        };
        if writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .is_err()
        {
            return Err(exited());
        }
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => Ok(reply.trim_end().to_string()),
            Ok(Err(e)) => Err(OracleError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(OracleError::Timeout {
                request: line.to_string(),
                after: timeout,
            }),
            Err(RecvTimeoutError::Disconnected) => Err(exited()),
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalOracle {
    command: String,
    timeout: Duration,
    session: Mutex<Option<Session>>,
    workdir: tempfile::TempDir,
    counter: AtomicUsize,
}

impl ExternalOracle {
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, OracleError> {
        let session = Session::start(command)?;
        let workdir = tempfile::Builder::new()
            .prefix("ledstripe-oracle")
            .tempdir()?;
        Ok(ExternalOracle {
            command: command.to_string(),
            timeout,
            session: Mutex::new(Some(session)),
            workdir,
            counter: AtomicUsize::new(0),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Sends one request line and returns the reply line. `ERR` replies become
    /// [`OracleError::Remote`]; any transport failure drops the session.
    pub fn request(&self, line: &str) -> Result<String, OracleError> {
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Session::start(&self.command)?);
        }
        let result = guard.as_mut().unwrap().request(line, self.timeout);
        match result {
            Ok(reply) => {
                if let Some(message) = reply.strip_prefix("ERR") {
                    return Err(OracleError::Remote {
                        request: line.to_string(),
                        message: message.trim().to_string(),
                    });
                }
                Ok(reply)
            }
            Err(e) => {
                *guard = None;
                Err(e)
            }
        }
    }

    pub fn verify_paths(&self, a: &Path, b: &Path) -> Result<VerifyDecision, OracleError> {
        let line = format!("VERIFY {} {}", protocol_path(a)?, protocol_path(b)?);
        let reply = self.request(&line)?;
        let malformed = || OracleError::Malformed {
            request: line.clone(),
            reply: reply.clone(),
        };
        let mut parts = reply.split_whitespace();
        let accepted = match parts.next() {
            Some("ACCEPT") => true,
            Some("REJECT") => false,
            _ => return Err(malformed()),
        };
        let score = match parts.next() {
            None => None,
            Some(s) => Some(s.parse::<f64>().map_err(|_| malformed())?),
        };
        if parts.next().is_some() {
            return Err(malformed());
        }
        Ok(VerifyDecision { accepted, score })
    }

    pub fn detect_path(&self, path: &Path) -> Result<bool, OracleError> {
        let line = format!("DETECT {}", protocol_path(path)?);
        let reply = self.request(&line)?;
        match reply.as_str() {
            "FACE" => Ok(true),
            "NOFACE" => Ok(false),
            _ => Err(OracleError::Malformed {
                request: line,
                reply,
            }),
        }
    }
}

fn protocol_path(p: &Path) -> Result<String, OracleError> {
    let s = p
        .to_str()
        .ok_or_else(|| OracleError::InvalidImage(format!("non UTF-8 path {}", p.display())))?;
    if !p.is_absolute() || s.chars().any(char::is_whitespace) {
        return Err(OracleError::InvalidImage(format!(
            "protocol paths must be absolute and whitespace free: {s}"
        )));
    }
    Ok(s.to_string())
}

impl FaceOracle for ExternalOracle {
    type Probe = PathBuf;

    fn probe(&self, img: &ImageBuffer) -> Result<PathBuf, OracleError> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let path = self.workdir.path().join(format!("probe_{n:08}.png"));
        img.write_png(&path)
            .map_err(|e| OracleError::InvalidImage(e.to_string()))?;
        Ok(path)
    }

    fn verify(&self, a: &PathBuf, b: &PathBuf) -> Result<VerifyDecision, OracleError> {
        self.verify_paths(a, b)
    }

    fn detect_face(&self, _img: &ImageBuffer, probe: &PathBuf) -> Result<bool, OracleError> {
        self.detect_path(probe)
    }

    fn concurrent(&self) -> bool {
        false
    }
}
