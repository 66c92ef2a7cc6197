use std::io::Write;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::protocol::{self, HANDSHAKE_LEN, VERSION};
use super::{Backend, BackendKind};
use crate::error::{Error, Result};
use crate::volume::Volume;

type Frame = std::result::Result<Vec<u8>, String>;

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    frames: Receiver<Frame>,
    dead: Option<String>,
}

impl Session {
    fn kill(&mut self, reason: String) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.dead = Some(reason);
    }
}

/// One child process per predictor, kept alive across windows. Requests are
/// serialized; concurrent callers queue on the session lock.
pub struct ExternalPredictor {
    timeout: Duration,
    session: Mutex<Session>,
}

impl ExternalPredictor {
    pub fn spawn(command: &[String], window: usize, timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::invalid("external predictor command is empty"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("failed to spawn {program:?}: {e}")))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");

        let (tx, rx) = mpsc::channel::<Frame>();
        let frame_len = protocol::response_len(window);
        thread::Builder::new()
            .name(format!("predictor-reader-{window}"))
            .spawn(move || {
                let mut hs = vec![0u8; HANDSHAKE_LEN];
                match protocol::read_frame(&mut stdout, &mut hs) {
                    Ok(true) => {
                        if tx.send(Ok(hs)).is_err() {
                            return;
                        }
                    }
                    Ok(false) => {
                        let _ = tx.send(Err("process closed stdout before handshake".into()));
                        return;
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e.to_string()));
                        return;
                    }
                }
                loop {
                    let mut buf = vec![0u8; frame_len];
                    let msg = match protocol::read_frame(&mut stdout, &mut buf) {
                        Ok(true) => Ok(buf),
                        Ok(false) => Err("predictor process exited".to_string()),
                        Err(e) => Err(format!("malformed response frame: {e}")),
                    };
                    let stop = msg.is_err();
                    if tx.send(msg).is_err() || stop {
                        return;
                    }
                }
            })
            .map_err(|e| Error::Protocol(format!("failed to start reader thread: {e}")))?;

        let mut session = Session {
            child,
            stdin: None,
            frames: rx,
            dead: None,
        };
        let hs = protocol::encode_handshake(window as u32);
        if let Err(e) = stdin.write_all(&hs).and_then(|_| stdin.flush()) {
            session.kill(e.to_string());
            return Err(Error::Protocol(format!("handshake write failed: {e}")));
        }
        session.stdin = Some(stdin);

        let reply = match session.frames.recv_timeout(timeout) {
            Ok(Ok(bytes)) => bytes,
            Ok(Err(e)) => {
                session.kill(e.clone());
                return Err(Error::Protocol(format!("handshake failed: {e}")));
            }
            Err(_) => {
                session.kill("handshake timed out".into());
                return Err(Error::Protocol(format!("handshake timed out after {timeout:?}")));
            }
        };
        let reply: [u8; HANDSHAKE_LEN] = reply.try_into().expect("handshake frame length");
        let checked = protocol::decode_handshake(&reply).and_then(|(version, accepted)| {
            if version != VERSION {
                Err(format!("server speaks protocol version {version}, expected {VERSION}"))
            } else if accepted as usize != window {
                Err(format!("server advertises window {accepted}, stage needs {window}"))
            } else {
                Ok(())
            }
        });
        if let Err(e) = checked {
            session.kill(e.clone());
            return Err(Error::Protocol(format!("handshake mismatch: {e}")));
        }

        Ok(ExternalPredictor {
            timeout,
            session: Mutex::new(session),
        })
    }
}

impl Backend for ExternalPredictor {
    fn kind(&self) -> BackendKind {
        BackendKind::External
    }

    fn predict(&self, patch: &Volume, origin: [i64; 3]) -> std::result::Result<Vec<f32>, String> {
        let mut s = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &s.dead {
            return Err(format!("predictor process unavailable: {reason}"));
        }
        let req = protocol::encode_request(origin, patch.data());
        let write = match s.stdin.as_mut() {
            Some(stdin) => stdin.write_all(&req).and_then(|_| stdin.flush()),
            None => Err(std::io::Error::other("stdin closed")),
        };
        if let Err(e) = write {
            let msg = format!("request write failed: {e}");
            s.kill(msg.clone());
            return Err(msg);
        }
        match s.frames.recv_timeout(self.timeout) {
            Ok(Ok(bytes)) => Ok(protocol::decode_floats(&bytes)),
            Ok(Err(e)) => {
                s.kill(e.clone());
                Err(e)
            }
            Err(RecvTimeoutError::Timeout) => {
                let msg = format!("no response within {:?}", self.timeout);
                s.kill(msg.clone());
                Err(msg)
            }
            Err(RecvTimeoutError::Disconnected) => {
                let msg = "predictor process exited".to_string();
                s.kill(msg.clone());
                Err(msg)
            }
        }
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let s = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        if s.dead.is_none() {
            s.kill("predictor dropped".into());
        }
    }
}
