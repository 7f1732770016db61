//! Trace file format and evolution exports.
//!
//! A trace file is little-endian throughout:
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 8    | magic `CPATRC01`                             |
//! | 8      | 2    | version (u16, currently 1)                   |
//! | 10     | 4    | record count (u32)                           |
//! | 14     | 4    | samples per trace (u32)                      |
//! | 18     | 8    | sample rate in Hz (f64)                      |
//! | 26     | 2    | flags (u16); bit 0 = ground-truth key follows |
//! | 28     | 16   | key, only when flag bit 0 is set             |
//!
//! followed by one record per trace: 16 plaintext bytes, then the samples as
//! binary32.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aes::Block;
use crate::cpa::EvolutionSeries;
use crate::traces::{TraceRecord, TraceSet};

pub const MAGIC: [u8; 8] = *b"CPATRC01";
pub const VERSION: u16 = 1;
pub const FLAG_KEY_PRESENT: u16 = 0x0001;
/// Header length without the optional key.
pub const BASE_HEADER_LEN: usize = 28;

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("not a trace file: bad magic {found:02x?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported trace file version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported header flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("file ends inside the header")]
    TruncatedHeader,
    #[error("file ends inside record {record} of {declared}")]
    Truncated { record: usize, declared: usize },
    #[error("data continues after the {declared} declared records")]
    TrailingData { declared: usize },
    #[error("refusing to write a trace set with no records")]
    EmptyTraceSet,
    #[error("{0} does not fit the header's 32-bit field")]
    TooLarge(&'static str),
    #[error("evolution series has no points")]
    EmptySeries,
    #[error("evolution export: {0}")]
    Csv(#[from] csv::Error),
    #[error("evolution export: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> TraceIoError {
    let context = context.into();
    move |source| TraceIoError::Io { context, source }
}

/// Exact size in bytes of the file [`write_traceset`] produces.
pub fn encoded_len(ts: &TraceSet) -> usize {
    let key = if ts.key_under_test.is_some() { 16 } else { 0 };
    BASE_HEADER_LEN + key + ts.len() * (16 + 4 * ts.samples_per_trace())
}

pub fn write_traceset<W: Write>(ts: &TraceSet, mut out: W) -> Result<(), TraceIoError> {
    if ts.is_empty() {
        return Err(TraceIoError::EmptyTraceSet);
    }
    let num_records =
        u32::try_from(ts.len()).map_err(|_| TraceIoError::TooLarge("record count"))?;
    let samples = u32::try_from(ts.samples_per_trace())
        .map_err(|_| TraceIoError::TooLarge("samples per trace"))?;
    let flags = if ts.key_under_test.is_some() {
        FLAG_KEY_PRESENT
    } else {
        0
    };

    let mut header = Vec::with_capacity(BASE_HEADER_LEN + 16);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&num_records.to_le_bytes());
    header.extend_from_slice(&samples.to_le_bytes());
    header.extend_from_slice(&ts.sample_rate_hz.to_le_bytes());
    header.extend_from_slice(&flags.to_le_bytes());
    if let Some(key) = ts.key_under_test {
        header.extend_from_slice(key.as_bytes());
    }
    out.write_all(&header).map_err(io_err("writing header"))?;

    let mut buf = Vec::with_capacity(16 + 4 * ts.samples_per_trace());
    for (i, r) in ts.records().iter().enumerate() {
        buf.clear();
        buf.extend_from_slice(r.plaintext.as_bytes());
        for v in &r.samples {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
            .map_err(io_err(format!("writing record {i}")))?;
    }
    out.flush().map_err(io_err("flushing trace file"))?;
    Ok(())
}

pub fn write_traceset_file(ts: &TraceSet, path: impl AsRef<Path>) -> Result<(), TraceIoError> {
    let path = path.as_ref();
    // Validate before creating the file.
    if ts.is_empty() {
        return Err(TraceIoError::EmptyTraceSet);
    }
    let file = File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    write_traceset(ts, BufWriter::new(file))
}

/// Reads as many bytes as are available into `buf`; returns how many were read.
fn read_full<R: Read>(input: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Header fields without the records.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFileHeader {
    pub version: u16,
    pub num_records: u32,
    pub samples_per_trace: u32,
    pub sample_rate_hz: f64,
    pub flags: u16,
    pub key: Option<Block>,
}

pub fn read_header<R: Read>(input: &mut R) -> Result<TraceFileHeader, TraceIoError> {
    let mut base = [0u8; BASE_HEADER_LEN];
    let got = read_full(input, &mut base).map_err(io_err("reading header"))?;
    // A short file with the wrong first bytes is still the wrong kind of file.
    let magic_len = got.min(8);
    if base[..magic_len] != MAGIC[..magic_len] {
        return Err(TraceIoError::BadMagic {
            found: base[..magic_len].to_vec(),
        });
    }
    if got < BASE_HEADER_LEN {
        return Err(TraceIoError::TruncatedHeader);
    }
    let u16_at = |o: usize| u16::from_le_bytes([base[o], base[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(base[o..o + 4].try_into().unwrap());
    let version = u16_at(8);
    if version != VERSION {
        return Err(TraceIoError::UnsupportedVersion(version));
    }
    let flags = u16_at(26);
    if flags & !FLAG_KEY_PRESENT != 0 {
        return Err(TraceIoError::UnsupportedFlags(flags));
    }
    let key = if flags & FLAG_KEY_PRESENT != 0 {
        let mut k = [0u8; 16];
        if read_full(input, &mut k).map_err(io_err("reading key"))? < 16 {
            return Err(TraceIoError::TruncatedHeader);
        }
        Some(Block(k))
    } else {
        None
    };
    Ok(TraceFileHeader {
        version,
        num_records: u32_at(10),
        samples_per_trace: u32_at(14),
        sample_rate_hz: f64::from_le_bytes(base[18..26].try_into().unwrap()),
        flags,
        key,
    })
}

pub fn read_traceset<R: Read>(mut input: R) -> Result<TraceSet, TraceIoError> {
    let header = read_header(&mut input)?;
    let declared = header.num_records as usize;
    let samples = header.samples_per_trace as usize;
    let mut records = Vec::with_capacity(declared.min(1 << 20));
    let mut buf = vec![0u8; 16 + 4 * samples];
    for record in 0..declared {
        let got =
            read_full(&mut input, &mut buf).map_err(io_err(format!("reading record {record}")))?;
        if got < buf.len() {
            return Err(TraceIoError::Truncated { record, declared });
        }
        let plaintext = Block::from_slice(&buf[..16]).unwrap();
        let samples = buf[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(TraceRecord { plaintext, samples });
    }
    let mut extra = [0u8; 1];
    if read_full(&mut input, &mut extra).map_err(io_err("checking end of file"))? != 0 {
        return Err(TraceIoError::TrailingData { declared });
    }
    Ok(
        TraceSet::new(records, samples, header.sample_rate_hz, header.key)
            .expect("every record was read with the declared length"),
    )
}

pub fn read_traceset_file(path: impl AsRef<Path>) -> Result<TraceSet, TraceIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(format!("opening {}", path.display())))?;
    read_traceset(BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// One data point of an evolution export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRow {
    pub byte_index: usize,
    pub trace_count: usize,
    pub candidate: u8,
    pub peak_abs_rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_true_key: Option<bool>,
}

/// Flattens a series into rows ordered by byte, checkpoint, then candidate.
pub fn evolution_rows(series: &EvolutionSeries) -> Vec<EvolutionRow> {
    let mut rows = Vec::new();
    for b in &series.bytes {
        for p in &b.points {
            for (k, &rho) in p.peak_abs_rho.iter().enumerate() {
                rows.push(EvolutionRow {
                    byte_index: b.byte_index,
                    trace_count: p.trace_count,
                    candidate: k as u8,
                    peak_abs_rho: rho,
                    is_true_key: series.true_key.map(|key| key[b.byte_index] == k as u8),
                });
            }
        }
    }
    rows
}

pub fn export_evolution<W: Write>(
    series: &EvolutionSeries,
    out: W,
    format: ExportFormat,
) -> Result<(), TraceIoError> {
    let rows = evolution_rows(series);
    if rows.is_empty() {
        return Err(TraceIoError::EmptySeries);
    }
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let with_truth = series.true_key.is_some();
            let mut header = vec!["byte_index", "trace_count", "candidate", "peak_abs_rho"];
            if with_truth {
                header.push("is_true_key");
            }
            w.write_record(&header)?;
            for r in &rows {
                let mut fields = vec![
                    r.byte_index.to_string(),
                    r.trace_count.to_string(),
                    r.candidate.to_string(),
                    // Display for f64 is the shortest string that round-trips.
                    r.peak_abs_rho.to_string(),
                ];
                if let Some(t) = r.is_true_key {
                    fields.push(t.to_string());
                }
                w.write_record(&fields)?;
            }
            w.flush().map_err(io_err("writing evolution csv"))?;
        }
        ExportFormat::Json => {
            let mut out = out;
            serde_json::to_writer(&mut out, &rows)?;
            out.write_all(b"\n")
                .map_err(io_err("writing evolution json"))?;
        }
    }
    Ok(())
}

pub fn export_evolution_file(
    series: &EvolutionSeries,
    path: impl AsRef<Path>,
    format: ExportFormat,
) -> Result<(), TraceIoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    export_evolution(series, BufWriter::new(file), format)
}

/// Parses a CSV produced by [`export_evolution`].
pub fn read_evolution_csv<R: Read>(input: R) -> Result<Vec<EvolutionRow>, TraceIoError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<EvolutionRow>, _>>()?;
    Ok(rows)
}
