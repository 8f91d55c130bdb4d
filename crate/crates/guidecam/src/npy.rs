//! NPY reader and writer restricted to little-endian `float32` in C order.
//!
//! Files are written as version 1.0 with the header padded to a 64-byte
//! boundary, byte-identical to `numpy.save`. Versions 2.0 and 3.0 are read.
//!
//! Format reference: <https://numpy.org/doc/stable/reference/generated/numpy.lib.format.html>

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use guidecam_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
const DESCR: &str = "<f4";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

#[derive(Debug, PartialEq)]
enum Value {
    Str(String),
    Bool(bool),
    Tuple(Vec<u64>),
}

/// Minimal parser for the Python dict literal stored in NPY headers.
struct HeaderParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format_err(format!(
                "npy header: expected `{}` at byte {}",
                byte as char, self.pos
            )))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = self.peek().filter(|&q| q == b'\'' || q == b'"');
        let quote = quote.ok_or_else(|| format_err("npy header: expected a quoted string"))?;
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Err(format_err("npy header: unterminated string"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos])
            .map_err(|_| format_err("npy header: invalid utf-8"))?
            .to_owned();
        self.pos += 1;
        Ok(s)
    }

    fn word(&mut self) -> &'a [u8] {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn value(&mut self) -> Result<Value> {
        match self.peek() {
            Some(b'\'' | b'"') => self.string().map(Value::Str),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        break;
                    }
                    let digits = self.word();
                    let dim = std::str::from_utf8(digits)
                        .ok()
                        .and_then(|d| d.parse::<u64>().ok())
                        .ok_or_else(|| format_err("npy header: bad shape entry"))?;
                    dims.push(dim);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(format_err("npy header: malformed shape tuple")),
                    }
                }
                Ok(Value::Tuple(dims))
            }
            _ => match self.word() {
                b"True" => Ok(Value::Bool(true)),
                b"False" => Ok(Value::Bool(false)),
                other => Err(format_err(format!(
                    "npy header: unexpected token `{}`",
                    String::from_utf8_lossy(other)
                ))),
            },
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Value)>> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            entries.push((key, self.value()?));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(format_err("npy header: expected `,` or `}`")),
            }
        }
        if self.src[self.pos..]
            .iter()
            .any(|b| !b.is_ascii_whitespace())
        {
            return Err(format_err("npy header: trailing bytes after dict"));
        }
        Ok(entries)
    }
}

fn parse_header(text: &[u8]) -> Result<Vec<usize>> {
    let entries = HeaderParser { src: text, pos: 0 }.dict()?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    for (key, value) in entries {
        match (key.as_str(), value) {
            ("descr", Value::Str(s)) => descr = Some(s),
            ("fortran_order", Value::Bool(b)) => fortran = Some(b),
            ("shape", Value::Tuple(t)) => shape = Some(t),
            (k, _) => {
                return Err(format_err(format!(
                    "npy header: unexpected key or value for `{k}`"
                )))
            }
        }
    }
    let descr = descr.ok_or_else(|| format_err("npy header: missing descr"))?;
    if descr != DESCR {
        return Err(format_err(format!(
            "unsupported npy dtype `{descr}`, only `{DESCR}` is accepted"
        )));
    }
    match fortran {
        Some(false) => {}
        Some(true) => return Err(format_err("fortran-order npy arrays are not supported")),
        None => return Err(format_err("npy header: missing fortran_order")),
    }
    let shape = shape.ok_or_else(|| format_err("npy header: missing shape"))?;
    shape
        .into_iter()
        .map(|d| usize::try_from(d).map_err(|_| format_err("npy shape entry too large")))
        .collect()
}

/// Reads one `<f4` C-order array.
pub fn read_npy<R: Read>(reader: &mut R) -> Result<Tensor> {
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| format_err("file too short for npy magic"))?;
    if &magic[..6] != MAGIC {
        return Err(format_err("not an npy file (bad magic)"));
    }
    let header_len = match magic[6] {
        1 => {
            let mut b = [0u8; 2];
            reader
                .read_exact(&mut b)
                .map_err(|_| format_err("truncated npy header length"))?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            reader
                .read_exact(&mut b)
                .map_err(|_| format_err("truncated npy header length"))?;
            u32::from_le_bytes(b) as usize
        }
        v => {
            return Err(format_err(format!(
                "unsupported npy version {v}.{}",
                magic[7]
            )))
        }
    };
    let mut header = vec![0u8; header_len];
    reader
        .read_exact(&mut header)
        .map_err(|_| format_err("truncated npy header"))?;
    let shape = parse_header(&header)?;

    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| format_err("npy shape overflows"))?;
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| format_err(format!("reading npy payload: {e}")))?;
    if bytes.len() != count * 4 {
        return Err(format_err(format!(
            "npy payload has {} bytes, shape {:?} needs {}",
            bytes.len(),
            shape,
            count * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor::new(shape, data)?)
}

/// The header dict exactly as `numpy.save` renders it.
fn header_text(shape: &[usize]) -> String {
    let dims = match shape {
        [] => "()".to_owned(),
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    format!("{{'descr': '{DESCR}', 'fortran_order': False, 'shape': {dims}, }}")
}

pub fn write_npy<W: Write>(writer: &mut W, tensor: &Tensor) -> std::io::Result<()> {
    let mut header = header_text(tensor.shape());
    // magic(6) + version(2) + length(2) + header + '\n' is a multiple of ALIGN
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    header.extend(std::iter::repeat_n(' ', (ALIGN - unpadded % ALIGN) % ALIGN));
    header.push('\n');
    let len = u16::try_from(header.len()).map_err(|_| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "npy header too long")
    })?;

    writer.write_all(MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&len.to_le_bytes())?;
    writer.write_all(header.as_bytes())?;
    let mut payload = Vec::with_capacity(tensor.len() * 4);
    for v in tensor.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&payload)
}

pub fn load_npy(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_npy(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_npy(path: &Path, tensor: &Tensor) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_npy(&mut w, tensor)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}
