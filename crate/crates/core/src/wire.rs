//! Message framing helpers.
//!
//! Every protocol message is a 1-byte type tag followed by fields in
//! declaration order. Ordinary fields carry a u16 big-endian length prefix;
//! large content blobs (file ciphertext, key boxes, plans) carry a u32
//! prefix. Decoders are strict: truncated input, oversized lengths, and
//! trailing bytes are all rejected.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("message truncated")]
    UnexpectedEnd,
    #[error("trailing bytes after message")]
    TrailingBytes,
    #[error("unknown message tag {0:#04x}")]
    BadTag(u8),
    #[error("malformed field: {0}")]
    Malformed(&'static str),
}

/// Builds a framed message.
pub struct MessageWriter {
    buf: Vec<u8>,
}

impl MessageWriter {
    pub fn new(tag: u8) -> Self {
        MessageWriter { buf: vec![tag] }
    }

    /// u16-length-prefixed field.
    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        debug_assert!(bytes.len() <= u16::MAX as usize, "field too large for u16 prefix");
        self.buf.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    /// u32-length-prefixed blob (for large content payloads).
    pub fn blob(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn u64_field(&mut self, v: u64) -> &mut Self {
        self.field(&v.to_be_bytes())
    }

    /// Bytes written so far — the "everything before the signature" view
    /// that signatures are computed over.
    pub fn signed_so_far(&self) -> &[u8] {
        &self.buf
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Strict field-by-field reader over a framed message.
pub struct MessageReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> MessageReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        MessageReader { data, pos: 0 }
    }

    /// Byte offset of the next unread field; `data[..offset()]` is the
    /// signed prefix when positioned just before a signature field.
    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn tag(&mut self) -> Result<u8, WireError> {
        let b = *self.data.get(self.pos).ok_or(WireError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::UnexpectedEnd)?;
        let slice = self.data.get(self.pos..end).ok_or(WireError::UnexpectedEnd)?;
        self.pos = end;
        Ok(slice)
    }

    pub fn field(&mut self) -> Result<&'a [u8], WireError> {
        let len_bytes: [u8; 2] = self.take(2)?.try_into().unwrap();
        self.take(u16::from_be_bytes(len_bytes) as usize)
    }

    pub fn blob(&mut self) -> Result<&'a [u8], WireError> {
        let len_bytes: [u8; 4] = self.take(4)?.try_into().unwrap();
        self.take(u32::from_be_bytes(len_bytes) as usize)
    }

    pub fn array_field<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let f = self.field()?;
        f.try_into().map_err(|_| WireError::Malformed("fixed-size field has wrong length"))
    }

    pub fn u64_field(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.array_field::<8>()?))
    }

    pub fn str_field(&mut self) -> Result<String, WireError> {
        std::str::from_utf8(self.field()?)
            .map(str::to_owned)
            .map_err(|_| WireError::Malformed("identity field is not UTF-8"))
    }

    /// Asserts the whole message was consumed.
    pub fn finish(self) -> Result<(), WireError> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut w = MessageWriter::new(0x42);
        w.field(b"uav-1").u64_field(123_456).blob(&[9u8; 70_000]).field(b"");
        let bytes = w.finish();

        let mut r = MessageReader::new(&bytes);
        assert_eq!(r.tag().unwrap(), 0x42);
        assert_eq!(r.field().unwrap(), b"uav-1");
        assert_eq!(r.u64_field().unwrap(), 123_456);
        assert_eq!(r.blob().unwrap().len(), 70_000);
        assert_eq!(r.field().unwrap(), b"");
        r.finish().unwrap();
    }

    #[test]
    fn signed_prefix_offsets_agree() {
        let mut w = MessageWriter::new(0x01);
        w.field(b"header");
        let signed_len = w.signed_so_far().len();
        w.field(b"signature-bytes-here");
        let bytes = w.finish();

        let mut r = MessageReader::new(&bytes);
        r.tag().unwrap();
        r.field().unwrap();
        assert_eq!(r.offset(), signed_len);
        assert_eq!(&bytes[..r.offset()], {
            let mut w2 = MessageWriter::new(0x01);
            w2.field(b"header");
            &w2.finish()[..]
        });
    }

    #[test]
    fn truncation_and_trailing_rejected() {
        let mut w = MessageWriter::new(0x01);
        w.field(b"abc");
        let bytes = w.finish();

        let mut r = MessageReader::new(&bytes[..bytes.len() - 1]);
        r.tag().unwrap();
        assert_eq!(r.field(), Err(WireError::UnexpectedEnd));

        let mut extended = bytes.clone();
        extended.push(0);
        let mut r = MessageReader::new(&extended);
        r.tag().unwrap();
        r.field().unwrap();
        assert_eq!(r.finish(), Err(WireError::TrailingBytes));

        // declared length larger than remaining input
        let mut lying = vec![0x01, 0xff, 0xff];
        lying.extend_from_slice(b"short");
        let mut r = MessageReader::new(&lying);
        r.tag().unwrap();
        assert_eq!(r.field(), Err(WireError::UnexpectedEnd));
    }
}
