//! NPY format version 1.0, restricted to little-endian `f4`/`f8` arrays in
//! C order.
//!
//! Layout: magic `\x93NUMPY`, version bytes `1 0`, a little-endian `u16`
//! header length, an ASCII Python dict literal padded with spaces and a
//! trailing newline so the payload starts on a 64-byte boundary, then the
//! raw little-endian elements.

use std::fs;
use std::path::Path;

use crate::error::{NpyError, Result};
use crate::kernel::{ConvKernel, KernelShape, Precision};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE: usize = 10;
const ALIGN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl NpyData {
    pub fn len(&self) -> usize {
        match self {
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn descr(&self) -> &'static str {
        match self {
            NpyData::F32(_) => "<f4",
            NpyData::F64(_) => "<f8",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray, NpyError> {
    if bytes.len() < PREAMBLE || &bytes[..6] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    if (bytes[6], bytes[7]) != (1, 0) {
        return Err(NpyError::UnsupportedVersion(bytes[6], bytes[7]));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body = bytes
        .get(PREAMBLE..PREAMBLE + header_len)
        .ok_or_else(|| NpyError::MalformedHeader("header extends past end of file".into()))?;
    let text = std::str::from_utf8(body).map_err(|_| NpyError::MalformedHeader("header is not ASCII".into()))?;
    let header = parse_header(text)?;

    let elem = match header.descr.as_str() {
        "<f4" => 4,
        "<f8" => 8,
        other => return Err(NpyError::UnsupportedDescr(other.to_string())),
    };
    if header.fortran_order {
        return Err(NpyError::FortranOrderUnsupported);
    }
    let count: usize = header.shape.iter().product();
    let payload = &bytes[PREAMBLE + header_len..];
    let expected = count * elem;
    if payload.len() < expected {
        return Err(NpyError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(NpyError::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let data = if elem == 4 {
        NpyData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    } else {
        NpyData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

fn parse_header(text: &str) -> Result<Header, NpyError> {
    let malformed = |what: &str| NpyError::MalformedHeader(what.to_string());
    let dict = text.trim();
    let dict = dict
        .strip_prefix('{')
        .and_then(|d| d.strip_suffix('}'))
        .ok_or_else(|| malformed("header is not a dict literal"))?;

    let descr = value_after(dict, "descr").ok_or_else(|| malformed("missing 'descr'"))?;
    let descr = descr
        .strip_prefix('\'')
        .and_then(|d| d.split_once('\''))
        .map(|(s, _)| s.to_string())
        .ok_or_else(|| malformed("'descr' is not a string"))?;

    let fortran = value_after(dict, "fortran_order").ok_or_else(|| malformed("missing 'fortran_order'"))?;
    let fortran_order = if fortran.starts_with("True") {
        true
    } else if fortran.starts_with("False") {
        false
    } else {
        return Err(malformed("'fortran_order' is not a boolean"));
    };

    let shape = value_after(dict, "shape").ok_or_else(|| malformed("missing 'shape'"))?;
    let inner = shape
        .strip_prefix('(')
        .and_then(|s| s.split_once(')'))
        .map(|(s, _)| s)
        .ok_or_else(|| malformed("'shape' is not a tuple"))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| malformed("non-integer shape entry")))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Header {
        descr,
        fortran_order,
        shape,
    })
}

/// Text following `'key':`, with leading whitespace removed.
fn value_after<'a>(dict: &'a str, key: &str) -> Option<&'a str> {
    let quoted = format!("'{key}'");
    let at = dict.find(&quoted)?;
    let rest = dict[at + quoted.len()..].trim_start();
    Some(rest.strip_prefix(':')?.trim_start())
}

pub fn encode_npy(array: &NpyArray) -> Vec<u8> {
    let shape = match array.shape.len() {
        1 => format!("({},)", array.shape[0]),
        _ => format!(
            "({})",
            array.shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        array.data.descr(),
        shape
    );
    let unpadded = PREAMBLE + header.len() + 1;
    header.push_str(&" ".repeat((ALIGN - unpadded % ALIGN) % ALIGN));
    header.push('\n');

    let mut out = Vec::with_capacity(PREAMBLE + header.len() + array.data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &array.data {
        NpyData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray> {
    Ok(parse_npy(&fs::read(path)?)?)
}

pub fn write_npy(array: &NpyArray, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_npy(array))?;
    Ok(())
}

/// Interprets a rank-4 array as `(c_out, c_in, k_h, k_w)` weights.
pub fn kernel_from_npy(array: NpyArray) -> Result<ConvKernel> {
    if array.shape.len() != 4 {
        return Err(NpyError::ShapeRankNot4(array.shape.len()).into());
    }
    let s = &array.shape;
    let shape = KernelShape::new(s[0], s[1], s[2], s[3]);
    match array.data {
        NpyData::F32(v) => ConvKernel::from_f32(shape, &v),
        NpyData::F64(v) => ConvKernel::new(shape, v),
    }
}

pub fn read_npy_kernel(path: impl AsRef<Path>) -> Result<ConvKernel> {
    kernel_from_npy(read_npy(path)?)
}

/// Array holding the kernel's weights at its recorded precision. `F32`
/// kernels narrow back to exactly the values that were loaded.
pub fn kernel_to_npy(kernel: &ConvKernel) -> NpyArray {
    let s = kernel.shape();
    let data = match kernel.precision() {
        Precision::F32 => NpyData::F32(kernel.weights().iter().map(|&w| w as f32).collect()),
        Precision::F64 => NpyData::F64(kernel.weights().to_vec()),
    };
    NpyArray {
        shape: vec![s.c_out, s.c_in, s.k_h, s.k_w],
        data,
    }
}

pub fn write_npy_kernel(kernel: &ConvKernel, path: impl AsRef<Path>) -> Result<()> {
    write_npy(&kernel_to_npy(kernel), path)
}
