//! Raw image stack dump.
//!
//! A 16-byte header (`b"ZSTK"`, `K` as `u32`, image count as `u64`) followed
//! by `count * K` little-endian `u32` counts, image by image.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sampler::{ImageSink, SampleImage};

pub const MAGIC: [u8; 4] = *b"ZSTK";

/// Streams images to a dump file; the count is patched in by [`finish`](Self::finish).
pub struct RawStackWriter {
    path: PathBuf,
    out: BufWriter<File>,
    len: usize,
    count: u64,
}

impl RawStackWriter {
    pub fn create(path: &Path, len: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let k = u32::try_from(len).map_err(|_| Error::Overflow("raw stack image length"))?;
        let mut header = [0u8; 16];
        header[..4].copy_from_slice(&MAGIC);
        header[4..8].copy_from_slice(&k.to_le_bytes());
        out.write_all(&header).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            len,
            count: 0,
        })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> Result<()> {
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        self.out.flush().map_err(io)?;
        let file = self.out.get_mut();
        file.seek(SeekFrom::Start(8)).map_err(io)?;
        file.write_all(&self.count.to_le_bytes()).map_err(io)?;
        file.flush().map_err(io)
    }
}

impl ImageSink for RawStackWriter {
    fn accept(&mut self, image: &SampleImage) -> Result<()> {
        if image.counts.len() != self.len {
            return Err(Error::ShapeMismatch(format!(
                "image of length {} in a stack of length {}",
                image.counts.len(),
                self.len
            )));
        }
        for c in &image.counts {
            self.out.write_all(&c.to_le_bytes()).map_err(|e| Error::io(&self.path, e))?;
        }
        self.count += 1;
        Ok(())
    }
}

/// Reads a whole dump back.
pub fn read_raw_stack(path: &Path) -> Result<Vec<SampleImage>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |message: String| Error::Parse {
        what: path.display().to_string(),
        message,
    };
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    if header[..4] != MAGIC {
        return Err(bad("not a raw stack dump".into()));
    }
    let len = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let expected = (count as u128) * (len as u128) * 4;
    if bytes.len() as u128 != expected {
        return Err(bad(format!("{} data bytes, header implies {expected}", bytes.len())));
    }
    let counts: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(counts
        .chunks(len.max(1))
        .map(|c| SampleImage { counts: c.to_vec() })
        .collect())
}
