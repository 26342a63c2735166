//! The `irsr/1` stdio protocol.
//!
//! Every message is one JSON object on a single `\n`-terminated line.
//! Image-carrying messages (`restore` requests, `result` responses) are
//! followed immediately by `width * height * channels` little-endian `f32`
//! samples, planar and row-major.
//!
//! ```text
//! harness -> backend  {"proto":"irsr/1","op":"hello"}
//! backend -> harness  {"proto":"irsr/1","op":"ready","scale":4,"channels":1,"internal_tlc":false}
//! harness -> backend  {"op":"restore","width":W,"height":H,"channels":C,"dtype":"f32le"} + payload
//! backend -> harness  {"op":"result","width":4W,"height":4H,"channels":C,"dtype":"f32le"} + payload
//!                  or {"op":"error","message":"..."}
//! ```
//!
//! The harness closes the backend's stdin to end a session.

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{restore, Restorer};
use crate::image::Image;

pub const PROTO: &str = "irsr/1";
pub const DTYPE: &str = "f32le";
/// Upper bound on a header line; anything longer is a protocol violation.
pub const MAX_HEADER_BYTES: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("stream closed")]
    Eof,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("expected op `{expected}`, got `{got}`")]
    UnexpectedOp { expected: String, got: String },
    #[error("unsupported protocol version `{0}`")]
    Version(String),
    #[error("payload underrun: expected {expected} bytes, got {got}")]
    Underrun { expected: usize, got: usize },
    #[error("peer reported error: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub proto: String,
    pub op: String,
}

impl Hello {
    pub fn new() -> Self {
        Self {
            proto: PROTO.into(),
            op: "hello".into(),
        }
    }
}

impl Default for Hello {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ready {
    pub proto: String,
    pub op: String,
    pub scale: usize,
    pub channels: usize,
    pub internal_tlc: bool,
}

impl Ready {
    pub fn new(scale: usize, channels: usize, internal_tlc: bool) -> Self {
        Self {
            proto: PROTO.into(),
            op: "ready".into(),
            scale,
            channels,
            internal_tlc,
        }
    }
}

/// Header of an image-carrying message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub op: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub dtype: String,
}

impl FrameHeader {
    pub fn for_image(op: &str, img: &Image) -> Self {
        Self {
            op: op.into(),
            width: img.width(),
            height: img.height(),
            channels: img.channels(),
            dtype: DTYPE.into(),
        }
    }

    pub fn payload_len(&self) -> usize {
        self.width * self.height * self.channels * 4
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub op: String,
    pub message: String,
}

impl ErrorReply {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            op: "error".into(),
            message: message.into(),
        }
    }
}

/// A header line decoded far enough to dispatch on `op`.
#[derive(Debug, Clone)]
pub struct RawMessage {
    pub op: String,
    value: Value,
}

impl RawMessage {
    pub fn into<T: for<'de> Deserialize<'de>>(self) -> Result<T, WireError> {
        serde_json::from_value(self.value).map_err(|e| WireError::Malformed(e.to_string()))
    }

    pub fn expect<T: for<'de> Deserialize<'de>>(self, op: &str) -> Result<T, WireError> {
        if self.op == "error" {
            let e: ErrorReply = self.into()?;
            return Err(WireError::Remote(e.message));
        }
        if self.op != op {
            return Err(WireError::UnexpectedOp {
                expected: op.into(),
                got: self.op,
            });
        }
        self.into()
    }
}

pub fn write_message<W: Write, T: Serialize>(w: &mut W, msg: &T) -> Result<(), WireError> {
    let line = serde_json::to_string(msg).map_err(|e| WireError::Malformed(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads one header line. Returns [`WireError::Eof`] on a clean end of
/// stream before any byte.
pub fn read_message<R: BufRead>(r: &mut R) -> Result<RawMessage, WireError> {
    let mut line = Vec::new();
    let n = r
        .by_ref()
        .take(MAX_HEADER_BYTES as u64 + 1)
        .read_until(b'\n', &mut line)?;
    if n == 0 {
        return Err(WireError::Eof);
    }
    if line.last() != Some(&b'\n') {
        return Err(if n > MAX_HEADER_BYTES {
            WireError::Malformed(format!("header exceeds {MAX_HEADER_BYTES} bytes"))
        } else {
            WireError::Malformed("header line not terminated".into())
        });
    }
    line.pop();
    let value: Value = serde_json::from_slice(&line)
        .map_err(|e| WireError::Malformed(format!("{e}: {:?}", String::from_utf8_lossy(&line))))?;
    let op = value
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| WireError::Malformed("missing string field `op`".into()))?
        .to_string();
    Ok(RawMessage { op, value })
}

pub fn encode_payload(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.data().len() * 4);
    for &v in img.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_payload(header: &FrameHeader, bytes: &[u8]) -> Result<Image, WireError> {
    if header.dtype != DTYPE {
        return Err(WireError::Malformed(format!(
            "unsupported dtype `{}`",
            header.dtype
        )));
    }
    if bytes.len() != header.payload_len() {
        return Err(WireError::Underrun {
            expected: header.payload_len(),
            got: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Image::new(header.height, header.width, header.channels, data)
        .map_err(|e| WireError::Malformed(e.to_string()))
}

pub fn write_frame<W: Write>(w: &mut W, op: &str, img: &Image) -> Result<(), WireError> {
    write_message(w, &FrameHeader::for_image(op, img))?;
    w.write_all(&encode_payload(img))?;
    w.flush()?;
    Ok(())
}

/// Reads the payload announced by `header`.
pub fn read_payload<R: Read>(r: &mut R, header: &FrameHeader) -> Result<Image, WireError> {
    if header.dtype != DTYPE {
        return Err(WireError::Malformed(format!(
            "unsupported dtype `{}`",
            header.dtype
        )));
    }
    let expected = header.payload_len();
    let mut buf = Vec::with_capacity(expected);
    r.by_ref().take(expected as u64).read_to_end(&mut buf)?;
    decode_payload(header, &buf)
}

/// Serves `backend` over one connection until the peer closes its end.
///
/// A `hello` naming another protocol version is answered with an error
/// reply and the session ends with [`WireError::Version`]. Restoration
/// failures are reported as error replies and the session continues.
pub fn serve<R: BufRead, W: Write>(
    backend: &dyn Restorer,
    channels: usize,
    reader: &mut R,
    writer: &mut W,
) -> Result<(), WireError> {
    let hello: Hello = read_message(reader)?.expect("hello")?;
    if hello.proto != PROTO {
        write_message(
            writer,
            &ErrorReply::new(format!("unsupported protocol `{}`", hello.proto)),
        )?;
        writer.flush()?;
        return Err(WireError::Version(hello.proto));
    }
    let info = backend.info();
    write_message(writer, &Ready::new(info.scale, channels, info.internal_tlc))?;
    writer.flush()?;

    loop {
        let msg = match read_message(reader) {
            Ok(m) => m,
            Err(WireError::Eof) => return Ok(()),
            Err(e) => return Err(e),
        };
        let header: FrameHeader = msg.expect("restore")?;
        let img = read_payload(reader, &header)?;
        match restore(backend, &img) {
            Ok(out) => write_frame(writer, "result", &out)?,
            Err(e) => {
                write_message(writer, &ErrorReply::new(e.to_string()))?;
                writer.flush()?;
            }
        }
    }
}
