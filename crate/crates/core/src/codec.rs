//! Binary codeword file format.
//!
//! ```text
//! "TRPL"  magic
//! u8      version (1)
//! u8      layers d
//! u32 LE  fragment length
//! u64 LE  original data length
//! ...     2^d - 1 fragments, layer ascending then index ascending
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::tree::{Codeword, Fragment, TreeShape};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TRPL";
pub const VERSION: u8 = 1;

pub fn write_codeword<W: Write>(cw: &Codeword, mut w: W) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, cw.shape().layers() as u8])?;
    w.write_all(&(cw.fragment_len() as u32).to_le_bytes())?;
    w.write_all(&cw.original_len().to_le_bytes())?;
    for frag in cw.fragments_bottom_up() {
        w.write_all(frag)?;
    }
    w.flush()
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::BadHeader(format!("truncated {what}")),
        _ => Error::BadHeader(format!("reading {what}: {e}")),
    })
}

pub fn read_codeword<R: Read>(mut r: R) -> Result<Codeword> {
    let mut head = [0u8; 18];
    read_exact(&mut r, &mut head, "header")?;
    if &head[..4] != MAGIC {
        return Err(Error::BadHeader("missing TRPL magic".into()));
    }
    if head[4] != VERSION {
        return Err(Error::BadHeader(format!("unsupported version {}", head[4])));
    }
    let shape = TreeShape::new(u32::from(head[5])).map_err(|e| Error::BadHeader(e.to_string()))?;
    let frag_len = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
    let original_len = u64::from_le_bytes(head[10..18].try_into().unwrap());
    let mut by_heap: Vec<Fragment> = vec![Vec::new(); shape.vertex_count()];
    for h in shape.heaps_bottom_up() {
        let mut frag = vec![0u8; frag_len];
        read_exact(&mut r, &mut frag, "fragment")?;
        by_heap[h - 1] = frag;
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)
        .map_err(|e| Error::BadHeader(e.to_string()))?
        != 0
    {
        return Err(Error::BadHeader(
            "trailing bytes after last fragment".into(),
        ));
    }
    Codeword::from_parts(shape, original_len, by_heap).map_err(|e| Error::BadHeader(e.to_string()))
}

pub fn save(cw: &Codeword, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_codeword(cw, BufWriter::new(file)).map_err(io_err)
}

pub fn load(path: &Path) -> Result<Codeword> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_codeword(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::encode_bytes;

    #[test]
    fn round_trip() {
        let shape = TreeShape::new(3).unwrap();
        let cw = encode_bytes(b"hello tree code", shape).unwrap();
        let mut buf = Vec::new();
        write_codeword(&cw, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"TRPL");
        assert_eq!(buf.len(), 18 + 7 * cw.fragment_len());
        assert_eq!(read_codeword(buf.as_slice()).unwrap(), cw);
    }

    #[test]
    fn rejects_bad_headers() {
        let shape = TreeShape::new(2).unwrap();
        let cw = encode_bytes(b"abcd", shape).unwrap();
        let mut buf = Vec::new();
        write_codeword(&cw, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_codeword(bad.as_slice()),
            Err(Error::BadHeader(_))
        ));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(
            read_codeword(bad.as_slice()),
            Err(Error::BadHeader(_))
        ));
        assert!(matches!(
            read_codeword(&buf[..buf.len() - 1]),
            Err(Error::BadHeader(_))
        ));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(
            read_codeword(long.as_slice()),
            Err(Error::BadHeader(_))
        ));
    }
}
