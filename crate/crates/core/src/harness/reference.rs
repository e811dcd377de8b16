//! Reference matchers: the built-in NFA simulator, or an external process
//! answering `base64(pattern) TAB base64(string)` lines with `1` or `0`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use crossbeam_channel::{Receiver, RecvTimeoutError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regex::{nfa_match, Nfa};

pub const QUERY_TIMEOUT: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpec {
    #[default]
    Builtin,
    /// Program and arguments.
    External(Vec<String>),
}

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("external reference command is empty")]
    EmptyCommand,
    #[error("could not start external reference: {0}")]
    Spawn(std::io::Error),
    #[error("external reference I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("external reference did not answer within {0:?}")]
    Timeout(Duration),
    #[error("external reference exited")]
    Closed,
    #[error("external reference answered {0:?}")]
    BadAnswer(String),
}

pub trait Reference {
    /// Whole-string membership of `input` in `pattern`'s language.
    fn matches(&mut self, pattern: &str, nfa: &Nfa, input: &[u8]) -> Result<bool, ReferenceError>;
}

pub struct BuiltinReference;

impl Reference for BuiltinReference {
    fn matches(&mut self, _pattern: &str, nfa: &Nfa, input: &[u8]) -> Result<bool, ReferenceError> {
        Ok(nfa_match(nfa, input))
    }
}

pub struct ExternalReference {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ExternalReference {
    pub fn spawn(command: &[String]) -> Result<Self, ReferenceError> {
        let (program, args) = command.split_first().ok_or(ReferenceError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(ReferenceError::Spawn)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = crossbeam_channel::unbounded();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExternalReference { child, stdin, lines: rx, timeout: QUERY_TIMEOUT })
    }
}

impl Reference for ExternalReference {
    fn matches(&mut self, pattern: &str, _nfa: &Nfa, input: &[u8]) -> Result<bool, ReferenceError> {
        writeln!(self.stdin, "{}\t{}", STANDARD.encode(pattern), STANDARD.encode(input))?;
        self.stdin.flush()?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => match line.trim() {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(ReferenceError::BadAnswer(other.to_string())),
            },
            Ok(Err(e)) => Err(e.into()),
            Err(RecvTimeoutError::Timeout) => Err(ReferenceError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ReferenceError::Closed),
        }
    }
}

impl Drop for ExternalReference {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn make_reference(spec: &ReferenceSpec) -> Result<Box<dyn Reference + Send>, ReferenceError> {
    Ok(match spec {
        ReferenceSpec::Builtin => Box::new(BuiltinReference),
        ReferenceSpec::External(cmd) => Box::new(ExternalReference::spawn(cmd)?),
    })
}
