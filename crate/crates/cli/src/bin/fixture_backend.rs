//! irsr/1 peer with injectable faults, used by the integration tests.

use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use anyhow::Result;
use clap::{Parser, ValueEnum};

use irsr::backends::wire::{self, ErrorReply, FrameHeader, Hello, Ready};
use irsr::backends::{restore, BuiltinBackend, BuiltinKind};
use irsr::image::Image;
use irsr::resample::KernelSpec;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fault {
    None,
    /// Reply with the input unchanged regardless of the announced scale.
    WrongScale,
    /// Reply with a line that is not JSON.
    BadHeader,
    /// Exit with status 3 after reading the first request.
    ExitEarly,
    /// Never reply to the first request.
    Stall,
    /// Answer every request with an error reply.
    ErrorReply,
    /// Send a result header followed by half its payload, then exit.
    ShortPayload,
    /// Announce a different protocol version at handshake.
    BadVersion,
}

#[derive(Parser)]
struct Opts {
    #[arg(long, default_value = "identity1x")]
    kind: String,
    #[arg(long, default_value_t = 1)]
    scale: usize,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    #[arg(long)]
    internal_tlc: bool,
    #[arg(long, value_enum, default_value_t = Fault::None)]
    fault: Fault,
}

fn run(o: Opts) -> Result<ExitCode> {
    let kind: BuiltinKind = o.kind.parse()?;
    let backend = BuiltinBackend::new(kind, o.scale, KernelSpec::default())?;
    let mut r = BufReader::new(io::stdin().lock());
    let mut w = BufWriter::new(io::stdout().lock());

    let _hello: Hello = wire::read_message(&mut r)?.expect("hello")?;
    let mut ready = Ready::new(o.scale, o.channels, o.internal_tlc);
    if o.fault == Fault::BadVersion {
        ready.proto = "irsr/0".into();
    }
    wire::write_message(&mut w, &ready)?;
    w.flush()?;

    loop {
        let header: FrameHeader = match wire::read_message(&mut r) {
            Ok(m) => m.expect("restore")?,
            Err(wire::WireError::Eof) => return Ok(ExitCode::SUCCESS),
            Err(e) => return Err(e.into()),
        };
        let img = wire::read_payload(&mut r, &header)?;
        match o.fault {
            Fault::None | Fault::BadVersion => match restore(&backend, &img) {
                Ok(out) => wire::write_frame(&mut w, "result", &out)?,
                Err(e) => {
                    wire::write_message(&mut w, &ErrorReply::new(e.to_string()))?;
                    w.flush()?;
                }
            },
            Fault::WrongScale => wire::write_frame(&mut w, "result", &img)?,
            Fault::BadHeader => {
                w.write_all(b"this is not a header\n")?;
                w.flush()?;
            }
            Fault::ExitEarly => return Ok(ExitCode::from(3)),
            Fault::Stall => loop {
                thread::sleep(Duration::from_secs(3600));
            },
            Fault::ErrorReply => {
                wire::write_message(&mut w, &ErrorReply::new("fixture refuses"))?;
                w.flush()?;
            }
            Fault::ShortPayload => {
                let out = Image::filled(
                    img.height() * o.scale,
                    img.width() * o.scale,
                    img.channels(),
                    0.5,
                );
                wire::write_message(&mut w, &FrameHeader::for_image("result", &out))?;
                let bytes = wire::encode_payload(&out);
                w.write_all(&bytes[..bytes.len() / 2])?;
                w.flush()?;
                return Ok(ExitCode::SUCCESS);
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Opts::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("fixture: {e:#}");
            ExitCode::FAILURE
        }
    }
}
