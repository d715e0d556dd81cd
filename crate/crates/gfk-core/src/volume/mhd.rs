//! MetaImage (.mhd/.mha) header parsing and raw payload I/O.
//!
//! Handles the uncompressed subset used by LUNA16-style data: keys NDims,
//! DimSize, ElementSpacing, Offset, ElementType, ElementByteOrderMSB and
//! ElementDataFile, with MET_SHORT / MET_UCHAR / MET_FLOAT payloads.
//! Little-endian is the default byte order; the writer emits a canonical
//! key order so write(read(p)) round-trips byte-identically.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    Short,
    UChar,
    Float,
}

impl ElementType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementType::Short => "MET_SHORT",
            ElementType::UChar => "MET_UCHAR",
            ElementType::Float => "MET_FLOAT",
        }
    }

    pub fn byte_size(&self) -> usize {
        match self {
            ElementType::Short => 2,
            ElementType::UChar => 1,
            ElementType::Float => 4,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "MET_SHORT" => Ok(ElementType::Short),
            "MET_UCHAR" => Ok(ElementType::UChar),
            "MET_FLOAT" => Ok(ElementType::Float),
            other => Err(Error::Unsupported(format!("element type {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MhdHeader {
    pub ndims: usize,
    pub dim_size: Vec<usize>,
    pub element_spacing: Vec<f64>,
    pub offset: Vec<f64>,
    pub element_type: ElementType,
    /// True when the payload is big-endian.
    pub msb: bool,
    /// "LOCAL" for .mha, otherwise the sidecar file name.
    pub element_data_file: String,
}

impl MhdHeader {
    pub fn for_volume(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
        element_type: ElementType,
    ) -> Self {
        MhdHeader {
            ndims: 3,
            dim_size: vec![dims.0, dims.1, dims.2],
            element_spacing: vec![spacing.0, spacing.1, spacing.2],
            offset: vec![origin.0, origin.1, origin.2],
            element_type,
            msb: false,
            element_data_file: String::new(),
        }
    }

    pub fn dims(&self) -> Result<(usize, usize, usize)> {
        if self.dim_size.len() != 3 {
            return Err(Error::Unsupported(format!("NDims {} (need 3)", self.dim_size.len())));
        }
        Ok((self.dim_size[0], self.dim_size[1], self.dim_size[2]))
    }

    pub fn spacing(&self) -> Result<(f64, f64, f64)> {
        if self.element_spacing.len() != 3 {
            return Err(Error::Format("ElementSpacing must have 3 components".into()));
        }
        Ok((self.element_spacing[0], self.element_spacing[1], self.element_spacing[2]))
    }

    pub fn offset(&self) -> Result<(f64, f64, f64)> {
        if self.offset.len() != 3 {
            return Err(Error::Format("Offset must have 3 components".into()));
        }
        Ok((self.offset[0], self.offset[1], self.offset[2]))
    }

    pub fn voxel_count(&self) -> usize {
        self.dim_size.iter().product()
    }
}

fn parse_values<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| Error::Format(format!("cannot parse `{tok}` in key {key}")))
        })
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "True" | "true" | "1" => Ok(true),
        "False" | "false" | "0" => Ok(false),
        other => Err(Error::Format(format!("cannot parse `{other}` as boolean in key {key}"))),
    }
}

/// Parse header text. Unknown keys are ignored; required keys are NDims,
/// DimSize, ElementSpacing, Offset, ElementType and ElementDataFile.
pub fn parse_header(text: &str) -> Result<MhdHeader> {
    let mut ndims = None;
    let mut dim_size = None;
    let mut element_spacing = None;
    let mut offset = None;
    let mut element_type = None;
    let mut msb = None;
    let mut element_data_file = None;

    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("header line without `=`: {line}")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "NDims" => ndims = Some(parse_values::<usize>(key, value)?[0]),
            "DimSize" => dim_size = Some(parse_values::<usize>(key, value)?),
            "ElementSpacing" => element_spacing = Some(parse_values::<f64>(key, value)?),
            "Offset" | "Position" | "Origin" => offset = Some(parse_values::<f64>(key, value)?),
            "ElementType" => element_type = Some(ElementType::parse(value)?),
            "ElementByteOrderMSB" | "BinaryDataByteOrderMSB" => msb = Some(parse_bool(key, value)?),
            "CompressedData" => {
                if parse_bool(key, value)? {
                    return Err(Error::Unsupported("compressed MetaImage data".into()));
                }
            }
            "ElementDataFile" => element_data_file = Some(value.to_string()),
            _ => {}
        }
    }

    let missing = |k: &str| Error::Format(format!("missing header key {k}"));
    let header = MhdHeader {
        ndims: ndims.ok_or_else(|| missing("NDims"))?,
        dim_size: dim_size.ok_or_else(|| missing("DimSize"))?,
        element_spacing: element_spacing.ok_or_else(|| missing("ElementSpacing"))?,
        offset: offset.ok_or_else(|| missing("Offset"))?,
        element_type: element_type.ok_or_else(|| missing("ElementType"))?,
        msb: msb.unwrap_or(false),
        element_data_file: element_data_file.ok_or_else(|| missing("ElementDataFile"))?,
    };
    if header.ndims != 3 || header.dim_size.len() != 3 {
        return Err(Error::Unsupported(format!("NDims {} (need 3)", header.ndims)));
    }
    if header.dim_size.iter().any(|&d| d == 0) {
        return Err(Error::Format("DimSize components must be positive".into()));
    }
    Ok(header)
}

/// Read header and payload bytes from a .mhd (+ sidecar) or .mha file.
pub fn read(path: &Path) -> Result<(MhdHeader, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let is_mha = path.extension().map(|e| e == "mha").unwrap_or(false);

    let (header_text, local_payload) = if is_mha {
        // Header lines terminate at the ElementDataFile key; the payload
        // starts right after that line's newline.
        let mut end = None;
        let mut start = 0usize;
        while start < bytes.len() {
            let nl = bytes[start..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|p| start + p)
                .unwrap_or(bytes.len());
            let line = std::str::from_utf8(&bytes[start..nl])
                .map_err(|_| Error::Format("non-UTF8 header line".into()))?;
            if line.trim_start().starts_with("ElementDataFile") {
                end = Some(nl + 1);
                break;
            }
            start = nl + 1;
        }
        let end = end.ok_or_else(|| Error::Format("missing header key ElementDataFile".into()))?;
        let text = std::str::from_utf8(&bytes[..end])
            .map_err(|_| Error::Format("non-UTF8 header".into()))?
            .to_string();
        (text, Some(bytes[end..].to_vec()))
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Format("non-UTF8 header".into()))?;
        (text, None)
    };

    let header = parse_header(&header_text)?;
    let payload = match local_payload {
        Some(p) => {
            if header.element_data_file != "LOCAL" {
                return Err(Error::Format(".mha file must declare ElementDataFile = LOCAL".into()));
            }
            p
        }
        None => {
            if header.element_data_file == "LOCAL" {
                return Err(Error::Format(".mhd header declares LOCAL payload".into()));
            }
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            fs::read(dir.join(&header.element_data_file))?
        }
    };

    let expected = header.voxel_count() * header.element_type.byte_size();
    if payload.len() != expected {
        return Err(Error::Corrupt(format!(
            "payload is {} bytes, header declares {} ({} x {})",
            payload.len(),
            expected,
            header.voxel_count(),
            header.element_type.byte_size()
        )));
    }
    Ok((header, payload))
}

fn format_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn render_header(header: &MhdHeader, data_file: &str) -> String {
    let dims = header.dim_size.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
    format!(
        "ObjectType = Image\nNDims = 3\nDimSize = {}\nElementSpacing = {}\nOffset = {}\nElementType = {}\nElementByteOrderMSB = False\nElementDataFile = {}\n",
        dims,
        format_floats(&header.element_spacing),
        format_floats(&header.offset),
        header.element_type.as_str(),
        data_file,
    )
}

/// Write header + payload. A `.mha` destination gets a single file with
/// LOCAL payload, anything else a `.mhd` header with a `.raw` sidecar.
pub fn write(path: &Path, header: &MhdHeader, payload: &[u8]) -> Result<()> {
    let expected = header.voxel_count() * header.element_type.byte_size();
    if payload.len() != expected {
        return Err(Error::Parameter(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            expected
        )));
    }
    let is_mha = path.extension().map(|e| e == "mha").unwrap_or(false);
    if is_mha {
        let mut f = fs::File::create(path)?;
        f.write_all(render_header(header, "LOCAL").as_bytes())?;
        f.write_all(payload)?;
        f.flush()?;
    } else {
        let raw_name = path
            .file_stem()
            .map(|s| format!("{}.raw", s.to_string_lossy()))
            .ok_or_else(|| Error::Parameter(format!("cannot derive raw file name from {path:?}")))?;
        fs::write(path, render_header(header, &raw_name))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        fs::write(dir.join(raw_name), payload)?;
    }
    Ok(())
}

pub fn decode_i16(payload: &[u8], msb: bool) -> Vec<i16> {
    let mut out = vec![0i16; payload.len() / 2];
    if msb {
        BigEndian::read_i16_into(payload, &mut out);
    } else {
        LittleEndian::read_i16_into(payload, &mut out);
    }
    out
}

pub fn encode_i16(data: &[i16]) -> Vec<u8> {
    let mut out = vec![0u8; data.len() * 2];
    LittleEndian::write_i16_into(data, &mut out);
    out
}

pub fn encode_f32(data: &[f32]) -> Vec<u8> {
    let mut out = vec![0u8; data.len() * 4];
    LittleEndian::write_f32_into(data, &mut out);
    out
}
