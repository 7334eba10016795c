//! Random-access byte stores backing the user-data image.
//!
//! At desk scale an image is a regular file or an in-memory buffer; the
//! stash and boot simulator only need positioned reads/writes and a size.

use std::fs::File;
use std::io::{self, Read, Seek, SeekFrom, Write};

/// A fixed-size random-access byte store.
pub trait ByteStore {
    /// Total size in bytes.
    fn size(&self) -> io::Result<u64>;

    /// Fill `buf` from `offset`. Fails if the range is not fully inside
    /// the store.
    fn read_at(&mut self, offset: u64, buf: &mut [u8]) -> io::Result<()>;

    /// Write all of `data` at `offset`. Fails if the range is not fully
    /// inside the store.
    fn write_at(&mut self, offset: u64, data: &[u8]) -> io::Result<()>;
}

impl ByteStore for File {
    fn size(&self) -> io::Result<u64> {
        Ok(self.metadata()?.len())
    }

    fn read_at(&mut self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        self.seek(SeekFrom::Start(offset))?;
        self.read_exact(buf)
    }

    fn write_at(&mut self, offset: u64, data: &[u8]) -> io::Result<()> {
        let end = offset
            .checked_add(data.len() as u64)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "offset overflow"))?;
        if end > self.metadata()?.len() {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "write past end of image",
            ));
        }
        self.seek(SeekFrom::Start(offset))?;
        self.write_all(data)
    }
}

impl ByteStore for Vec<u8> {
    fn size(&self) -> io::Result<u64> {
        Ok(self.len() as u64)
    }

    fn read_at(&mut self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        let (start, end) = span(offset, buf.len(), self.len())?;
        buf.copy_from_slice(&self[start..end]);
        Ok(())
    }

    fn write_at(&mut self, offset: u64, data: &[u8]) -> io::Result<()> {
        let (start, end) = span(offset, data.len(), self.len())?;
        self[start..end].copy_from_slice(data);
        Ok(())
    }
}

fn span(offset: u64, len: usize, store_len: usize) -> io::Result<(usize, usize)> {
    let start = usize::try_from(offset)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "offset overflow"))?;
    let end = start
        .checked_add(len)
        .filter(|&e| e <= store_len)
        .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "range past end of image"))?;
    Ok((start, end))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_round_trip() {
        let mut img = vec![0u8; 16];
        img.write_at(4, b"abcd").unwrap();
        let mut buf = [0u8; 4];
        img.read_at(4, &mut buf).unwrap();
        assert_eq!(&buf, b"abcd");
    }

    #[test]
    fn vec_rejects_out_of_range() {
        let mut img = vec![0u8; 8];
        assert!(img.write_at(6, b"abcd").is_err());
        let mut buf = [0u8; 4];
        assert!(img.read_at(7, &mut buf).is_err());
    }

    #[test]
    fn file_write_past_end_rejected() {
        let mut f = tempfile::tempfile().unwrap();
        f.set_len(8).unwrap();
        assert!(ByteStore::write_at(&mut f, 6, b"abcd").is_err());
        ByteStore::write_at(&mut f, 2, b"abcd").unwrap();
        let mut buf = [0u8; 4];
        ByteStore::read_at(&mut f, 2, &mut buf).unwrap();
        assert_eq!(&buf, b"abcd");
    }
}
