//! `.vox3` raw voxel files: one ASCII JSON header line, a newline, then the
//! raw values little-endian in x-fastest order. dtype "u8" stores binary
//! masks, "f32" stores scalar fields.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::VoxelGrid;
use crate::geometry::Vec3;
use crate::{Error, Result};

const MAGIC: &str = "VOX3";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxDtype {
    U8,
    F32,
}

#[derive(Serialize, Deserialize)]
struct Header {
    magic: String,
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    dtype: String,
}

pub fn write_vox3(grid: &VoxelGrid, dtype: VoxDtype, path: &Path) -> Result<()> {
    let header = Header {
        magic: MAGIC.into(),
        dims: grid.dims,
        spacing: grid.spacing,
        origin: grid.origin.to_array(),
        dtype: match dtype {
            VoxDtype::U8 => "u8".into(),
            VoxDtype::F32 => "f32".into(),
        },
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut file, &header)?;
    file.write_all(b"\n")?;
    match dtype {
        VoxDtype::U8 => {
            for &v in &grid.values {
                file.write_all(&[if v > 0.5 { 1u8 } else { 0u8 }])?;
            }
        }
        VoxDtype::F32 => {
            for &v in &grid.values {
                file.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    file.flush()?;
    Ok(())
}

pub fn read_vox3(path: &Path) -> Result<VoxelGrid> {
    let bad = |detail: String| Error::Format {
        path: path.to_path_buf(),
        expected: "vox3",
        detail,
    };
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        file.read_exact(&mut byte)
            .map_err(|e| bad(format!("missing header line: {e}")))?;
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
        if header_bytes.len() > 1 << 16 {
            return Err(bad("header line exceeds 64 KiB".into()));
        }
    }
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.magic != MAGIC {
        return Err(bad(format!("bad magic {:?}", header.magic)));
    }
    let count = header.dims[0] * header.dims[1] * header.dims[2];
    let values = match header.dtype.as_str() {
        "u8" => {
            let mut bytes = vec![0u8; count];
            file.read_exact(&mut bytes)
                .map_err(|e| bad(format!("truncated data: {e}")))?;
            bytes.into_iter().map(|b| if b > 0 { 1.0 } else { 0.0 }).collect()
        }
        "f32" => {
            let mut bytes = vec![0u8; count * 4];
            file.read_exact(&mut bytes)
                .map_err(|e| bad(format!("truncated data: {e}")))?;
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        }
        other => return Err(bad(format!("unknown dtype {other:?}"))),
    };
    let mut grid = VoxelGrid::zeros(header.dims, header.spacing, Vec3::from_array(header.origin))
        .map_err(|e| bad(e.to_string()))?;
    grid.values = values;
    Ok(grid)
}
