use std::io::{Read, Write};
use std::path::Path;

use super::CorpusError;

pub const FORMAT_VERSION: u32 = 1;

/// Shared binary framing for checkpoints and event-vector stores:
/// magic, format version, a JSON metadata blob, then named tensors as
/// `(name, shape, little-endian f64 payload)` blocks.
pub struct ContainerWriter<W: Write> {
    out: W,
}

impl<W: Write> ContainerWriter<W> {
    pub fn new(mut out: W, magic: &[u8; 4], meta_json: &[u8]) -> std::io::Result<Self> {
        out.write_all(magic)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(meta_json.len() as u64).to_le_bytes())?;
        out.write_all(meta_json)?;
        Ok(ContainerWriter { out })
    }

    pub fn block(&mut self, name: &str, shape: &[usize], values: &[f64]) -> std::io::Result<()> {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        let name = name.as_bytes();
        self.out.write_all(&(name.len() as u64).to_le_bytes())?;
        self.out.write_all(name)?;
        self.out.write_all(&(shape.len() as u64).to_le_bytes())?;
        for &d in shape {
            self.out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in values {
            self.out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

pub struct Container {
    pub meta_json: Vec<u8>,
    pub blocks: Vec<Block>,
}

/// Read a whole container, validating magic and version up front and
/// treating any short read as corruption.
pub fn read_container(path: &Path, magic: &[u8; 4]) -> Result<Container, CorpusError> {
    let bytes = std::fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    let mut cursor = std::io::Cursor::new(bytes.as_slice());
    let display = path.display().to_string();

    let corrupt = |message: &str| CorpusError::Corrupt {
        path: display.clone(),
        message: message.to_string(),
    };

    let mut got_magic = [0u8; 4];
    cursor
        .read_exact(&mut got_magic)
        .map_err(|_| corrupt("missing magic"))?;
    if &got_magic != magic {
        return Err(CorpusError::BadMagic { path: display });
    }
    let mut version_bytes = [0u8; 4];
    cursor
        .read_exact(&mut version_bytes)
        .map_err(|_| corrupt("missing version"))?;
    let version = u32::from_le_bytes(version_bytes);
    if version != FORMAT_VERSION {
        return Err(CorpusError::BadVersion {
            path: display,
            version,
        });
    }

    let read_u64 = |cursor: &mut std::io::Cursor<&[u8]>, what: &str| -> Result<u64, CorpusError> {
        let mut buf = [0u8; 8];
        cursor
            .read_exact(&mut buf)
            .map_err(|_| corrupt(&format!("truncated while reading {what}")))?;
        Ok(u64::from_le_bytes(buf))
    };

    let meta_len = read_u64(&mut cursor, "metadata length")? as usize;
    let mut meta_json = vec![0u8; meta_len];
    cursor
        .read_exact(&mut meta_json)
        .map_err(|_| corrupt("truncated metadata"))?;

    let mut blocks = Vec::new();
    while (cursor.position() as usize) < bytes.len() {
        let name_len = read_u64(&mut cursor, "block name length")? as usize;
        let mut name_bytes = vec![0u8; name_len];
        cursor
            .read_exact(&mut name_bytes)
            .map_err(|_| corrupt("truncated block name"))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| corrupt("block name is not UTF-8"))?;
        let ndim = read_u64(&mut cursor, "rank")? as usize;
        if ndim > 8 {
            return Err(corrupt(&format!("implausible rank {ndim} for {name}")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut cursor, "extent")? as usize);
        }
        let count: usize = shape.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            cursor
                .read_exact(&mut buf)
                .map_err(|_| corrupt(&format!("truncated payload for {name}")))?;
            values.push(f64::from_le_bytes(buf));
        }
        blocks.push(Block {
            name,
            shape,
            values,
        });
    }

    Ok(Container { meta_json, blocks })
}
