//! Big-endian length-prefixed field framing shared by every binary format in
//! the workspace (key material, KEM blobs, ECALL frames, attestation wire
//! messages).

use thiserror::Error;

/// Hard cap on a single field. Anything larger is treated as corruption.
pub const MAX_FIELD_LEN: usize = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("truncated input: wanted {wanted} bytes, {available} available")]
    Truncated { wanted: usize, available: usize },
    #[error("field length {0} exceeds limit")]
    FieldTooLarge(usize),
    #[error("{0} trailing bytes after last field")]
    TrailingBytes(usize),
    #[error("field is not valid utf-8")]
    InvalidUtf8,
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self { buf: Vec::with_capacity(cap) }
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    /// Writes a 4-byte big-endian length followed by the bytes.
    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        assert!(bytes.len() <= MAX_FIELD_LEN, "field exceeds MAX_FIELD_LEN");
        self.u32(bytes.len() as u32);
        self.raw(bytes)
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.field(s.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over a borrowed buffer. Every read is bounds-checked.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if n > self.remaining() {
            return Err(CodecError::Truncated { wanted: n, available: self.remaining() });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.raw(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.raw(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn field(&mut self) -> Result<&'a [u8], CodecError> {
        let len = self.u32()? as usize;
        if len > MAX_FIELD_LEN {
            return Err(CodecError::FieldTooLarge(len));
        }
        self.raw(len)
    }

    pub fn str(&mut self) -> Result<&'a str, CodecError> {
        std::str::from_utf8(self.field()?).map_err(|_| CodecError::InvalidUtf8)
    }

    /// Everything not yet consumed.
    pub fn rest(&mut self) -> &'a [u8] {
        let out = &self.buf[self.pos..];
        self.pos = self.buf.len();
        out
    }

    pub fn finish(&self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

/// Encodes a list of byte fields, each with a length prefix.
pub fn encode_fields<T: AsRef<[u8]>>(fields: &[T]) -> Vec<u8> {
    let mut w = Writer::new();
    for f in fields {
        w.field(f.as_ref());
    }
    w.finish()
}

/// Decodes a buffer made only of length-prefixed fields.
pub fn decode_fields(buf: &[u8]) -> Result<Vec<&[u8]>, CodecError> {
    let mut r = Reader::new(buf);
    let mut out = Vec::new();
    while r.remaining() > 0 {
        out.push(r.field()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truncated_length_prefix_is_an_error() {
        let buf = encode_fields(&[b"hello".as_slice()]);
        for cut in 0..buf.len() {
            if cut == 0 {
                assert!(decode_fields(&buf[..0]).unwrap().is_empty());
                continue;
            }
            assert!(decode_fields(&buf[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn oversized_field_rejected_without_allocation() {
        let buf = [0xff, 0xff, 0xff, 0xff, 1, 2, 3];
        assert_eq!(Reader::new(&buf).field(), Err(CodecError::FieldTooLarge(0xffff_ffff)));
    }

    proptest! {
        #[test]
        fn fields_round_trip(fields in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..64), 0..8)) {
            let enc = encode_fields(&fields);
            let dec = decode_fields(&enc).unwrap();
            prop_assert_eq!(dec.len(), fields.len());
            for (a, b) in dec.iter().zip(&fields) {
                prop_assert_eq!(*a, b.as_slice());
            }
        }
    }
}
