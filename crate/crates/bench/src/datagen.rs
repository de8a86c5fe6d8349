//! The BDSC descriptor file format.
//!
//! ```text
//! "BDSC" | version u32 | dim u32 | count u64 | count × record
//! record = ceil(dim / 8) descriptor bytes | label u32
//! ```
//!
//! Integers are little-endian. Bit `i` of a descriptor is bit `i % 8` of
//! byte `i / 8`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rbt_core::{BinaryDescriptor, LabeledDataset, PointLabel};

pub use rbt_core::synth::{centers, generate, PerPoint, SynthParams};

pub const MAGIC: [u8; 4] = *b"BDSC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a BDSC file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported BDSC version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated: {0}")]
    Truncated(&'static str),
    #[error("{0} unexpected bytes after the last record")]
    TrailingBytes(u64),
    #[error("file holds {found}-bit descriptors, expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid dataset: {0}")]
    Invalid(#[from] rbt_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_dataset<W: Write>(dataset: &LabeledDataset, mut out: W) -> io::Result<()> {
    let dim = u32::try_from(dataset.dim()).map_err(|_| io::Error::other("dim exceeds u32"))?;
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&dim.to_le_bytes())?;
    out.write_all(&(dataset.len() as u64).to_le_bytes())?;
    let mut record = Vec::with_capacity(dataset.dim().div_ceil(8) + 4);
    for (d, label) in dataset.iter() {
        record.clear();
        d.write_bytes(&mut record);
        record.extend_from_slice(&label.0.to_le_bytes());
        out.write_all(&record)?;
    }
    out.flush()
}

/// Reads a BDSC stream. With `expected_dim`, a file of another width is
/// rejected.
pub fn read_dataset<R: Read>(
    mut input: R,
    expected_dim: Option<usize>,
) -> Result<LabeledDataset, FormatError> {
    let mut header = [0u8; HEADER_LEN];
    read_exact(&mut input, &mut header, "header")?;
    let magic: [u8; 4] = header[0..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(FormatError::DimMismatch {
                expected,
                found: dim,
            });
        }
    }
    let nbytes = dim.div_ceil(8);
    let mut record = vec![0u8; nbytes + 4];
    // Cap the up-front reservation; a corrupt count must not allocate wildly.
    let reserve = usize::try_from(count).unwrap_or(usize::MAX).min(1 << 20);
    let mut descriptors = Vec::with_capacity(reserve);
    let mut labels = Vec::with_capacity(reserve);
    for _ in 0..count {
        read_exact(&mut input, &mut record, "record")?;
        descriptors.push(BinaryDescriptor::from_bytes(dim, &record[..nbytes])?);
        labels.push(PointLabel(u32::from_le_bytes(
            record[nbytes..].try_into().expect("4 bytes"),
        )));
    }
    let trailing = io::copy(&mut input, &mut io::sink())?;
    if trailing != 0 {
        return Err(FormatError::TrailingBytes(trailing));
    }
    Ok(LabeledDataset::new(dim, descriptors, labels)?)
}

fn read_exact<R: Read>(
    input: &mut R,
    buf: &mut [u8],
    what: &'static str,
) -> Result<(), FormatError> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Truncated(what),
        _ => FormatError::Io(e),
    })
}

pub fn save_descriptors(dataset: &LabeledDataset, path: impl AsRef<Path>) -> io::Result<()> {
    write_dataset(dataset, BufWriter::new(File::create(path)?))
}

pub fn load_descriptors(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<LabeledDataset, FormatError> {
    read_dataset(BufReader::new(File::open(path)?), expected_dim)
}
