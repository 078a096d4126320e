//! Drive-timeline files and transmit-sequence parsing.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! "HDTX" | version u16 | sample_rate_hz u64 | frame_count u64
//! master f32 x N | slave f32 x N | im f32 x N
//! ```
//!
//! `N` is `frame_count * samples_per_frame`; the samples per frame follow
//! from the payload length.

use std::io::{Read, Write};

use hdqkd_core::channel::Intensity;
use hdqkd_core::txpattern::{DriveTimeline, FrameSpec, TxCompiler};
use hdqkd_core::{Basis, Dimension, Symbol};
use serde::{Deserialize, Serialize};

use crate::AppError;

pub const MAGIC: &[u8; 4] = b"HDTX";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8;

pub fn write_timeline<W: Write>(mut w: W, tl: &DriveTimeline) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&tl.sample_rate_hz.to_le_bytes())?;
    w.write_all(&(tl.frame_count() as u64).to_le_bytes())?;
    for arr in [&tl.master_samples, &tl.slave_samples, &tl.im_samples] {
        let bytes: Vec<u8> = arr.iter().flat_map(|v| v.to_le_bytes()).collect();
        w.write_all(&bytes)?;
    }
    w.flush()
}

pub fn read_timeline<R: Read>(mut r: R) -> Result<DriveTimeline, AppError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let bad = |m: &str| AppError::Input(format!("timeline file: {m}"));
    if buf.len() < HEADER_LEN || &buf[..4] != MAGIC {
        return Err(bad("missing HDTX header"));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let sample_rate_hz = u64::from_le_bytes(buf[6..14].try_into().unwrap());
    let frames = u64::from_le_bytes(buf[14..22].try_into().unwrap()) as usize;
    let payload = &buf[HEADER_LEN..];
    if payload.len() % 12 != 0 {
        return Err(bad("payload is not three equal f32 arrays"));
    }
    let n = payload.len() / 12;
    if (frames == 0) != (n == 0) || (frames > 0 && n % frames != 0) {
        return Err(bad("sample count is not a multiple of the frame count"));
    }
    let floats: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DriveTimeline {
        sample_rate_hz,
        samples_per_frame: n.checked_div(frames).unwrap_or(0),
        master_samples: floats[..n].to_vec(),
        slave_samples: floats[n..2 * n].to_vec(),
        im_samples: floats[2 * n..].to_vec(),
    })
}

/// Per-frame annotation for the JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub frame: usize,
    pub basis: Basis,
    pub symbol: u8,
    pub intensity: Intensity,
    pub start_ps: u64,
    /// Only for pi-phase symbols.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation_center_ps: Option<i64>,
}

pub fn annotate(c: &TxCompiler, frames: &[FrameSpec]) -> Result<Vec<FrameAnnotation>, AppError> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let sym = Symbol::new(f.symbol, Dimension::Four)?;
            Ok(FrameAnnotation {
                frame: i,
                basis: f.basis,
                symbol: f.symbol,
                intensity: f.intensity,
                start_ps: i as u64 * c.timing.state_period_ps,
                perturbation_center_ps: sym
                    .is_odd()
                    .then(|| c.perturbation_center_ps(f.basis, sym)),
            })
        })
        .collect()
}

/// Parses a transmit sequence: one `BASIS SYMBOL INTENSITY` triple per line,
/// e.g. `X 3 decoy`. Blank lines and `#` comments are ignored.
pub fn parse_sequence(text: &str) -> Result<Vec<FrameSpec>, AppError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| AppError::Input(format!("sequence line {}: {m}", no + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [b, s, k] = fields.as_slice() else {
            return Err(bad("expected BASIS SYMBOL INTENSITY"));
        };
        let basis = match *b {
            "Z" | "z" => Basis::Z,
            "X" | "x" => Basis::X,
            _ => return Err(bad(&format!("unknown basis {b:?}"))),
        };
        let symbol: u8 = s.parse().map_err(|_| bad(&format!("bad symbol {s:?}")))?;
        if symbol > 3 {
            return Err(bad("symbol must be 0..=3"));
        }
        let intensity = match k.to_ascii_lowercase().as_str() {
            "signal" | "mu" => Intensity::Signal,
            "decoy" | "nu" => Intensity::Decoy,
            _ => return Err(bad(&format!("unknown intensity {k:?}"))),
        };
        out.push(FrameSpec::new(basis, symbol, intensity));
    }
    if out.is_empty() {
        return Err(AppError::Input("sequence file contains no states".into()));
    }
    Ok(out)
}

pub fn format_sequence(frames: &[FrameSpec]) -> String {
    frames
        .iter()
        .map(|f| format!("{} {} {}\n", f.basis, f.symbol, f.intensity))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdqkd_core::txpattern::demo_sequence;

    #[test]
    fn binary_round_trip() {
        let c = TxCompiler::default();
        let tl = c.compile_sequence(&demo_sequence()).unwrap();
        let mut bytes = Vec::new();
        write_timeline(&mut bytes, &tl).unwrap();
        assert_eq!(&bytes[..4], b"HDTX");
        assert_eq!(bytes.len(), HEADER_LEN + 12 * tl.len());
        let back = read_timeline(bytes.as_slice()).unwrap();
        assert_eq!(back, tl);
        assert_eq!(c.decode_timeline(&back).unwrap(), demo_sequence());
    }

    #[test]
    fn truncated_file_rejected() {
        let tl = TxCompiler::default()
            .compile_sequence(&demo_sequence())
            .unwrap();
        let mut bytes = Vec::new();
        write_timeline(&mut bytes, &tl).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_timeline(bytes.as_slice()).is_err());
        assert!(read_timeline(&b"HDTY\x01\x00"[..]).is_err());
    }

    #[test]
    fn sequence_text_round_trip() {
        let text = format_sequence(&demo_sequence());
        assert_eq!(parse_sequence(&text).unwrap(), demo_sequence());
        assert!(parse_sequence("Z 4 signal").is_err());
        assert!(parse_sequence("Y 0 signal").is_err());
        assert!(parse_sequence("Z 0").is_err());
        assert!(parse_sequence("# only a comment\n").is_err());
    }

    #[test]
    fn annotations_mark_odd_symbols() {
        let c = TxCompiler::default();
        let a = annotate(&c, &demo_sequence()).unwrap();
        assert_eq!(a[1].perturbation_center_ps, Some(800));
        assert_eq!(a[0].perturbation_center_ps, None);
        assert_eq!(a[7].start_ps, 7 * 3200);
    }
}
