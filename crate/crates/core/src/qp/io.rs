//! Little-endian field container: magic, `nx`, `ny` as `u32`, then `x_range`,
//! `y_range`, anchor, beta and nu as `f64`, the row-major values (`NaN` where
//! unreachable) and one status byte per point.

use std::io::{Read, Write};

use super::{Grid2D, PointStatus, QPField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QPF1";

pub fn write_field<W: Write>(mut out: W, field: &QPField) -> Result<()> {
    let g = &field.grid;
    out.write_all(MAGIC)?;
    out.write_all(&(g.nx as u32).to_le_bytes())?;
    out.write_all(&(g.ny as u32).to_le_bytes())?;
    for v in [
        g.x_range.0,
        g.x_range.1,
        g.y_range.0,
        g.y_range.1,
        field.anchor[0],
        field.anchor[1],
        field.beta,
        field.nu,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(9 * g.len());
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(field.status.iter().map(|s| *s as u8));
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(b)
}

/// Reads a field written by [`write_field`]. The anchor-disc radius is not
/// stored and is reset to six grid spacings.
pub fn read_field<R: Read>(mut input: R) -> Result<QPField> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let nx = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let ny = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let mut h = [0.0f64; 8];
    for v in h.iter_mut() {
        *v = f64::from_le_bytes(read_array(&mut input)?);
    }
    let grid = Grid2D::new((h[0], h[1]), (h[2], h[3]), nx, ny)
        .map_err(|e| Error::Format(e.to_string()))?;
    let n = grid.len();
    let mut body = vec![0u8; 9 * n];
    input
        .read_exact(&mut body)
        .map_err(|e| Error::Format(format!("truncated body: {e}")))?;
    let values = body[..8 * n]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let status = body[8 * n..]
        .iter()
        .map(|&b| {
            PointStatus::from_byte(b).ok_or_else(|| Error::Format(format!("bad status byte {b}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QPField {
        grid,
        values,
        status,
        anchor: [h[4], h[5]],
        anchor_label: None,
        beta: h[6],
        nu: h[7],
        anchor_radius: 6.0 * grid.h(),
        audit: None,
    })
}
