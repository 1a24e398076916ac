//! Stream files.
//!
//! Text: an optional header line `FPSTREAM 1 n m M`, then one `index delta`
//! pair per line. Blank lines and lines starting with `#` are skipped. A
//! headerless file takes `n` and `M` from the largest index and delta seen.
//!
//! Binary: the 8 magic bytes `FPSTRM\0\x01`, then `n`, `m`, `M` as
//! little-endian u64, then `m` records of a u32 index and an i64 delta,
//! both little-endian.

use std::io::{BufRead, Read, Write};

use fpsketch::StreamUpdate;

use crate::CliError;

pub const BINARY_MAGIC: &[u8; 8] = b"FPSTRM\0\x01";
const TEXT_MAGIC: &str = "FPSTREAM";
const RECORD_BYTES: usize = 12;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(format!("unknown stream format {other:?}")),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub n: u64,
    /// Number of records.
    pub m: u64,
    /// Bound on `|delta|`.
    pub big_m: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamFile {
    pub header: Header,
    pub updates: Vec<StreamUpdate>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse { line, msg: msg.into() }
}

impl StreamFile {
    /// Builds a file around `updates` with the tightest header. `n` is at
    /// least the largest index.
    pub fn new(n: u64, updates: Vec<StreamUpdate>) -> Self {
        let n = updates.iter().map(|u| u.index).max().unwrap_or(0).max(n).max(1);
        let big_m = updates.iter().map(|u| u.delta.unsigned_abs()).max().unwrap_or(0).max(1);
        Self { header: Header { n, m: updates.len() as u64, big_m }, updates }
    }

    /// Reads either format, sniffing the binary magic.
    pub fn read<R: Read>(mut r: R, format: Option<Format>) -> Result<Self, CliError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let format = format.unwrap_or(if bytes.starts_with(BINARY_MAGIC) { Format::Binary } else { Format::Text });
        match format {
            Format::Text => Self::parse_text(&bytes[..]),
            Format::Binary => Self::parse_binary(&bytes),
        }
    }

    pub fn open(path: &std::path::Path, format: Option<Format>) -> Result<Self, CliError> {
        let f = std::fs::File::open(path).map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::read(std::io::BufReader::new(f), format)
    }

    pub fn parse_text<R: BufRead>(r: R) -> Result<Self, CliError> {
        let mut header = None;
        let mut updates = Vec::new();
        let mut seen_record = false;
        for (k, line) in r.lines().enumerate() {
            let no = k + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == TEXT_MAGIC {
                if seen_record || header.is_some() {
                    return Err(parse_err(no, "header must come before the first record"));
                }
                header = Some(parse_header(&fields, no)?);
                continue;
            }
            if fields.len() != 2 {
                return Err(parse_err(no, format!("expected `index delta`, got {line:?}")));
            }
            let index: u64 = fields[0].parse().map_err(|_| parse_err(no, format!("bad index {:?}", fields[0])))?;
            let delta: i64 = fields[1].parse().map_err(|_| parse_err(no, format!("bad delta {:?}", fields[1])))?;
            let u = StreamUpdate::new(index, delta);
            if index == 0 {
                return Err(parse_err(no, "indices start at 1"));
            }
            if let Some(h) = &header {
                check_bounds(h, &u, no)?;
            }
            seen_record = true;
            updates.push(u);
        }
        match header {
            Some(h) => {
                if h.m != updates.len() as u64 {
                    return Err(parse_err(0, format!("header announces {} records, found {}", h.m, updates.len())));
                }
                Ok(Self { header: h, updates })
            }
            None => Ok(Self::new(1, updates)),
        }
    }

    pub fn parse_binary(bytes: &[u8]) -> Result<Self, CliError> {
        let head = 8 + 24;
        if bytes.len() < head || !bytes.starts_with(BINARY_MAGIC) {
            return Err(parse_err(0, "missing binary stream header"));
        }
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let header = Header { n: word(8), m: word(16), big_m: word(24) };
        let body = &bytes[head..];
        if !body.len().is_multiple_of(RECORD_BYTES) || (body.len() / RECORD_BYTES) as u64 != header.m {
            return Err(parse_err(
                0,
                format!("header announces {} records, body holds {} bytes", header.m, body.len()),
            ));
        }
        let mut updates = Vec::with_capacity(header.m as usize);
        for (k, rec) in body.chunks_exact(RECORD_BYTES).enumerate() {
            let index = u32::from_le_bytes(rec[..4].try_into().unwrap()) as u64;
            let delta = i64::from_le_bytes(rec[4..].try_into().unwrap());
            let u = StreamUpdate::new(index, delta);
            // Records are numbered from 1 like text lines.
            if index == 0 {
                return Err(parse_err(k + 1, "indices start at 1"));
            }
            check_bounds(&header, &u, k + 1)?;
            updates.push(u);
        }
        Ok(Self { header, updates })
    }

    pub fn write<W: Write>(&self, mut w: W, format: Format) -> Result<(), CliError> {
        let h = &self.header;
        match format {
            Format::Text => {
                let mut w = std::io::BufWriter::new(w);
                writeln!(w, "{TEXT_MAGIC} 1 {} {} {}", h.n, h.m, h.big_m)?;
                for u in &self.updates {
                    writeln!(w, "{} {}", u.index, u.delta)?;
                }
                w.flush()?;
            }
            Format::Binary => {
                if h.n > u32::MAX as u64 {
                    return Err(CliError::Usage(format!("n = {} does not fit the binary u32 index", h.n)));
                }
                let mut out = Vec::with_capacity(32 + RECORD_BYTES * self.updates.len());
                out.extend_from_slice(BINARY_MAGIC);
                for v in [h.n, h.m, h.big_m] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                for u in &self.updates {
                    out.extend_from_slice(&(u.index as u32).to_le_bytes());
                    out.extend_from_slice(&u.delta.to_le_bytes());
                }
                w.write_all(&out)?;
            }
        }
        Ok(())
    }
}

fn parse_header(fields: &[&str], no: usize) -> Result<Header, CliError> {
    if fields.len() != 5 {
        return Err(parse_err(no, "header is `FPSTREAM 1 n m M`"));
    }
    if fields[1] != "1" {
        return Err(parse_err(no, format!("unsupported stream version {}", fields[1])));
    }
    let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| parse_err(no, format!("bad {what} {s:?}")));
    let h = Header { n: num(fields[2], "n")?, m: num(fields[3], "m")?, big_m: num(fields[4], "M")? };
    if h.n == 0 {
        return Err(parse_err(no, "n must be positive"));
    }
    Ok(h)
}

fn check_bounds(h: &Header, u: &StreamUpdate, no: usize) -> Result<(), CliError> {
    if u.index > h.n {
        return Err(parse_err(no, format!("index {} exceeds n = {}", u.index, h.n)));
    }
    if u.delta.unsigned_abs() > h.big_m {
        return Err(parse_err(no, format!("|delta| = {} exceeds M = {}", u.delta.unsigned_abs(), h.big_m)));
    }
    Ok(())
}
