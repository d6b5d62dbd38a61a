//! The XEMB embedding file.
//!
//! ```text
//! "XEMB" | version u16 | flags u16 | n u32 | d u32
//! | model len u16 | model utf-8 | language len u16 | language utf-8
//! | n*d f32 little-endian, row-major | crc32(payload) u32
//! ```
//!
//! Every integer is little-endian. Flag bit 0 marks the rows as
//! L2-normalized.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use xling_core::{EmbeddingMatrix, LanguageId};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"XEMB";
pub const VERSION: u16 = 1;
pub const FLAG_NORMALIZED: u16 = 1;
pub const EXTENSION: &str = "xemb";

/// Magic, version, flags, n and d.
const FIXED_HEADER: usize = 16;

/// Serializes `m` into the XEMB byte layout.
pub fn encode(m: &EmbeddingMatrix) -> Result<Vec<u8>, String> {
    let model = m.model_id().as_bytes();
    let language = m.language();
    let lang = language.as_str().as_bytes();
    let n = u32::try_from(m.n_sentences()).map_err(|_| "n_sentences exceeds u32".to_string())?;
    let d = u32::try_from(m.dim()).map_err(|_| "dim exceeds u32".to_string())?;
    let model_len = u16::try_from(model.len()).map_err(|_| "model id too long".to_string())?;
    let payload_len = m.as_slice().len() * 4;
    let mut out = Vec::with_capacity(FIXED_HEADER + 4 + model.len() + lang.len() + payload_len + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let flags = if m.is_normalized() {
        FLAG_NORMALIZED
    } else {
        0
    };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&model_len.to_le_bytes());
    out.extend_from_slice(model);
    out.extend_from_slice(&(lang.len() as u16).to_le_bytes());
    out.extend_from_slice(lang);
    let payload_start = out.len();
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[payload_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Writes `m` to `path`, creating missing parent directories. The matrix
/// type already guarantees its invariants, so only IO can fail here.
pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let bytes = encode(m).map_err(|message| Error::Header {
        path: path.to_path_buf(),
        message,
    })?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!(
                    "{what} needs {len} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            }),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn text(&mut self, what: &str) -> Result<&'a str> {
        let len = usize::from(self.u16(what)?);
        let raw = self.take(len, what)?;
        std::str::from_utf8(raw).map_err(|_| Error::Header {
            path: self.path.to_path_buf(),
            message: format!("{what} is not valid UTF-8"),
        })
    }
}

/// Header fields, available without reading the payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub version: u16,
    pub flags: u16,
    pub n_sentences: usize,
    pub dim: usize,
    pub model_id: String,
    pub language: String,
}

fn parse_header<'a>(cur: &mut Cursor<'a>) -> Result<Header> {
    let magic = cur
        .take(4, "magic")
        .map_err(|_| Error::UnrecognizedFormat {
            path: cur.path.to_path_buf(),
        })?;
    if magic != MAGIC {
        return Err(Error::UnrecognizedFormat {
            path: cur.path.to_path_buf(),
        });
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: cur.path.to_path_buf(),
            version,
        });
    }
    let flags = cur.u16("flags")?;
    let n_sentences = cur.u32("n")? as usize;
    let dim = cur.u32("d")? as usize;
    let model_id = cur.text("model id")?.to_string();
    let language = cur.text("language id")?.to_string();
    Ok(Header {
        version,
        flags,
        n_sentences,
        dim,
        model_id,
        language,
    })
}

/// Parses an XEMB image. Every invariant is re-validated: shape,
/// finiteness, checksum, and row norms. With the normalized flag set the
/// norms must hold; without it the flag is re-derived from the rows.
pub fn decode(bytes: &[u8], path: &Path) -> Result<EmbeddingMatrix> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        path,
    };
    let header = parse_header(&mut cur)?;
    let invalid = |source| Error::Invalid {
        path: path.to_path_buf(),
        source,
    };
    let language = LanguageId::new(&header.language).map_err(invalid)?;
    let values = header
        .n_sentences
        .checked_mul(header.dim)
        .ok_or_else(|| Error::Header {
            path: path.to_path_buf(),
            message: format!("{}x{} overflows", header.n_sentences, header.dim),
        })?;
    let available = bytes.len().saturating_sub(cur.pos);
    if values.saturating_mul(4).saturating_add(4) > available {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!(
                "header declares {}x{} floats plus checksum ({} bytes), {available} bytes remain",
                header.n_sentences,
                header.dim,
                values * 4 + 4
            ),
        });
    }
    let payload = cur.take(values * 4, "payload")?;
    let stored = cur.u32("checksum")?;
    if cur.pos != bytes.len() {
        return Err(Error::Header {
            path: path.to_path_buf(),
            message: format!("{} trailing bytes after checksum", bytes.len() - cur.pos),
        });
    }
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let flagged = header.flags & FLAG_NORMALIZED != 0;
    let m = EmbeddingMatrix::new(
        header.model_id,
        language,
        header.n_sentences,
        header.dim,
        data,
        false,
    )
    .map_err(invalid)?;
    if flagged || m.rows_are_unit() {
        m.into_verified_normalized().map_err(invalid)
    } else {
        Ok(m)
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Reads only the header of an XEMB file.
pub fn read_header(path: &Path) -> Result<Header> {
    use std::io::Read;
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; FIXED_HEADER + 2 + usize::from(u16::MAX) * 2 + 2];
    let mut filled = 0;
    loop {
        let got = f.read(&mut buf[filled..]).map_err(|e| Error::io(path, e))?;
        if got == 0 || filled + got == buf.len() {
            filled += got;
            break;
        }
        filled += got;
    }
    parse_header(&mut Cursor {
        bytes: &buf[..filled],
        pos: 0,
        path,
    })
}

/// `<dir>/<model>/<lang>.xemb`, with `/` in hub-style model ids written as
/// `__` so each model gets exactly one directory.
pub fn default_path(dir: &Path, model_id: &str, language: LanguageId) -> PathBuf {
    dir.join(model_id.replace('/', "__"))
        .join(format!("{}.{EXTENSION}", language.as_str()))
}
