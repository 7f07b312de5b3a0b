//! Line-delimited JSON framing between a verifier and a remote prover.
//!
//! Every frame is one line: `{"version":1,"session":..,"seq":..,"msg":..}`. Big
//! integers travel as decimal strings. The verifier drives the exchange; each request
//! gets exactly one reply.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::protocol::{Basis, Challenge, ImageMsg, RoundMessage};
use crate::provers::{Prover, ProverError};
use crate::tcf::PublicKey;

pub const WIRE_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Why a peer could not answer; mirrors the recoverable prover errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Refused,
    Collapsed,
    OutOfOrder,
    Violation,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum WireMsg {
    Round(RoundMessage),
    Reset,
    Ack,
    Close,
    Error { code: ErrorCode, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub version: u32,
    pub session: String,
    pub seq: u64,
    pub msg: WireMsg,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed frame at byte {offset}: {reason}")]
    Syntax { offset: usize, reason: String },
    #[error("unsupported wire version {version} at byte {offset}")]
    Version { offset: usize, version: u64 },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            Self::Syntax { offset, .. } | Self::Version { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("no message within {0:?}")]
    Timeout(Duration),
    #[error("peer closed the connection")]
    Closed,
    #[error("protocol violation: {0}")]
    Violation(String),
}

impl From<std::io::Error> for WireError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl Frame {
    pub fn new(session: impl Into<String>, seq: u64, msg: WireMsg) -> Self {
        Self { version: WIRE_VERSION, session: session.into(), seq, msg }
    }
}

/// One JSON line terminated by `\n`.
pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut line = serde_json::to_vec(frame).expect("frames always serialize");
    line.push(b'\n');
    line
}

/// Byte offset of a serde_json error position inside `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (before + column.saturating_sub(1)).min(text.len())
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, ParseError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ParseError::Syntax { offset: e.valid_up_to(), reason: "invalid UTF-8".into() })?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    let syntax = |e: serde_json::Error| ParseError::Syntax {
        offset: if e.is_eof() { body.len() } else { byte_offset(body, e.line(), e.column()) },
        reason: e.to_string(),
    };
    // Check the version before the body so a future format reports as such.
    #[derive(Deserialize)]
    struct Probe {
        version: u64,
    }
    let probe: Probe = serde_json::from_str(body).map_err(syntax)?;
    if probe.version != u64::from(WIRE_VERSION) {
        return Err(ParseError::Version { offset: body.find("\"version\"").unwrap_or(0), version: probe.version });
    }
    serde_json::from_str(body).map_err(syntax)
}

/// Bidirectional framed channel. Reads happen on a helper thread so every receive can
/// honour a timeout whatever the underlying stream is.
pub struct Channel {
    lines: Receiver<std::io::Result<Vec<u8>>>,
    writer: Box<dyn Write + Send>,
    session: String,
    next_seq: u64,
    last_peer_seq: Option<u64>,
    timeout: Duration,
}

impl Channel {
    pub fn new<R, W>(reader: R, writer: W, session: impl Into<String>) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = Vec::new();
                match reader.read_until(b'\n', &mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Self {
            lines: rx,
            writer: Box::new(writer),
            session: session.into(),
            next_seq: 0,
            last_peer_seq: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn tcp(stream: TcpStream, session: impl Into<String>) -> Result<Self, WireError> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::new(reader, stream, session))
    }

    /// Serving side over the process's own stdin and stdout.
    pub fn stdio() -> Self {
        Self::accepting(std::io::stdin(), std::io::stdout())
    }

    /// Channel that takes its session id from the first frame it receives.
    pub fn accepting<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::new(reader, writer, "")
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn send(&mut self, msg: WireMsg) -> Result<(), WireError> {
        let frame = Frame::new(self.session.clone(), self.next_seq, msg);
        self.next_seq += 1;
        self.writer.write_all(&encode_frame(&frame))?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<WireMsg, WireError> {
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => return Err(WireError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(WireError::Closed),
        };
        if line.last() != Some(&b'\n') {
            return Err(ParseError::Syntax { offset: line.len(), reason: "truncated line".into() }.into());
        }
        let frame = decode_frame(&line)?;
        if self.session.is_empty() && self.last_peer_seq.is_none() {
            self.session = frame.session.clone();
        }
        if frame.session != self.session {
            return Err(WireError::Violation(format!(
                "frame for session {:?}, expected {:?}",
                frame.session, self.session
            )));
        }
        if self.last_peer_seq.is_some_and(|s| frame.seq <= s) {
            return Err(WireError::Violation(format!("sequence number {} does not increase", frame.seq)));
        }
        self.last_peer_seq = Some(frame.seq);
        Ok(frame.msg)
    }
}

fn to_prover_error(e: WireError) -> ProverError {
    match e {
        WireError::Violation(m) => ProverError::Violation(m),
        other => ProverError::Transport(other.to_string()),
    }
}

fn code_of(e: &ProverError) -> Option<ErrorCode> {
    Some(match e {
        ProverError::Refused => ErrorCode::Refused,
        ProverError::CollapsedState => ErrorCode::Collapsed,
        ProverError::OutOfOrder(_) => ErrorCode::OutOfOrder,
        ProverError::Violation(_) => ErrorCode::Violation,
        ProverError::Unsupported(_) => ErrorCode::Unsupported,
        ProverError::Transport(_) => return None,
    })
}

fn from_code(code: ErrorCode, detail: String) -> ProverError {
    match code {
        ErrorCode::Refused => ProverError::Refused,
        ErrorCode::Collapsed => ProverError::CollapsedState,
        ErrorCode::OutOfOrder => ProverError::OutOfOrder(detail),
        ErrorCode::Violation => ProverError::Violation(detail),
        ErrorCode::Unsupported => ProverError::Unsupported(detail),
    }
}

/// A prover in another process, seen from the verifier.
pub struct RemoteProver {
    channel: Channel,
}

impl RemoteProver {
    pub fn new(channel: Channel) -> Self {
        Self { channel }
    }

    fn call(&mut self, msg: WireMsg) -> Result<WireMsg, ProverError> {
        self.channel.send(msg).map_err(to_prover_error)?;
        match self.channel.recv().map_err(to_prover_error)? {
            WireMsg::Error { code, detail } => Err(from_code(code, detail)),
            reply => Ok(reply),
        }
    }

    fn round(&mut self, msg: RoundMessage) -> Result<RoundMessage, ProverError> {
        match self.call(WireMsg::Round(msg))? {
            WireMsg::Round(m) => Ok(m),
            other => Err(ProverError::Violation(format!("expected a round message, got {other:?}"))),
        }
    }

    /// Ends the session; the peer acknowledges before exiting.
    pub fn close(mut self) -> Result<(), ProverError> {
        match self.call(WireMsg::Close)? {
            WireMsg::Ack => Ok(()),
            other => Err(ProverError::Violation(format!("expected Ack, got {other:?}"))),
        }
    }
}

fn unexpected<T>(want: &str, got: RoundMessage) -> Result<T, ProverError> {
    Err(ProverError::Violation(format!("expected {want}, got {got:?}")))
}

impl Prover for RemoteProver {
    fn round1(&mut self, key: &PublicKey) -> Result<ImageMsg, ProverError> {
        match self.round(RoundMessage::Key(key.clone()))? {
            RoundMessage::Image(m) => Ok(m),
            other => unexpected("Image", other),
        }
    }

    fn answer_preimage(&mut self) -> Result<BigUint, ProverError> {
        match self.round(RoundMessage::Challenge(Challenge::Preimage))? {
            RoundMessage::Preimage(x) => Ok(x),
            other => unexpected("Preimage", other),
        }
    }

    fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError> {
        match self.round(RoundMessage::Vector(r.clone()))? {
            RoundMessage::Equation(d) => Ok(d),
            other => unexpected("Equation", other),
        }
    }

    fn round3(&mut self, basis: Basis) -> Result<bool, ProverError> {
        match self.round(RoundMessage::Basis(basis))? {
            RoundMessage::Result(b @ (0 | 1)) => Ok(b == 1),
            other => unexpected("Result bit", other),
        }
    }

    fn reset(&mut self) -> Result<(), ProverError> {
        match self.call(WireMsg::Reset)? {
            WireMsg::Ack => Ok(()),
            other => Err(ProverError::Violation(format!("expected Ack, got {other:?}"))),
        }
    }
}

/// Answers requests with `prover` until the verifier closes the session. Returns the
/// number of requests served.
pub fn serve_prover(prover: &mut dyn Prover, channel: &mut Channel) -> Result<u64, WireError> {
    let mut served = 0;
    loop {
        let msg = channel.recv()?;
        served += 1;
        let result = match msg {
            WireMsg::Close => {
                channel.send(WireMsg::Ack)?;
                return Ok(served);
            }
            WireMsg::Reset => prover.reset().map(|()| WireMsg::Ack),
            WireMsg::Round(RoundMessage::Key(key)) => {
                prover.round1(&key).map(|m| WireMsg::Round(RoundMessage::Image(m)))
            }
            WireMsg::Round(RoundMessage::Challenge(Challenge::Preimage)) => {
                prover.answer_preimage().map(|x| WireMsg::Round(RoundMessage::Preimage(x)))
            }
            WireMsg::Round(RoundMessage::Vector(r)) => {
                prover.round2(&r).map(|d| WireMsg::Round(RoundMessage::Equation(d)))
            }
            WireMsg::Round(RoundMessage::Basis(b)) => {
                prover.round3(b).map(|bit| WireMsg::Round(RoundMessage::Result(u8::from(bit))))
            }
            other => return Err(WireError::Violation(format!("unexpected request {other:?}"))),
        };
        let reply = match result {
            Ok(reply) => reply,
            Err(e) => match code_of(&e) {
                Some(code) => WireMsg::Error { code, detail: e.to_string() },
                None => return Err(WireError::Io(e.to_string())),
            },
        };
        channel.send(reply)?;
    }
}
