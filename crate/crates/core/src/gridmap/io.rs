//! `GRIDMAP v1` files: one ASCII header line
//! `GRIDMAP v1 <width> <height> <resolution> <origin_x> <origin_y> <origin_theta>`
//! followed by `width * height` cell bytes, row 0 first.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Cell, OccupancyGrid};
use crate::geometry::Pose2D;

const MAGIC: &str = "GRIDMAP";
const VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("map I/O failed: {0}")]
    Io(#[from] io::Error),
    #[error("malformed map at line {line}, byte offset {offset}: {message}")]
    Format {
        line: usize,
        offset: usize,
        message: String,
    },
}

fn format_err(line: usize, offset: usize, message: impl Into<String>) -> MapIoError {
    MapIoError::Format {
        line,
        offset,
        message: message.into(),
    }
}

pub fn write_map<W: Write>(grid: &OccupancyGrid, mut out: W) -> io::Result<()> {
    let o = grid.origin();
    // `{}` on f64 prints the shortest string that parses back to the same bits.
    writeln!(
        out,
        "{MAGIC} {VERSION} {} {} {} {} {} {}",
        grid.width(),
        grid.height(),
        grid.resolution(),
        o.x(),
        o.y(),
        o.theta()
    )?;
    let bytes: Vec<u8> = grid.cells().iter().map(|c| c.to_byte()).collect();
    out.write_all(&bytes)?;
    out.flush()
}

pub fn read_map<R: Read>(mut input: R) -> Result<OccupancyGrid, MapIoError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let newline = data
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| format_err(1, data.len(), "missing header line terminator"))?;
    let header = std::str::from_utf8(&data[..newline])
        .map_err(|e| format_err(1, e.valid_up_to(), "header is not UTF-8"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 8 {
        return Err(format_err(1, 0, format!("expected 8 header fields, found {}", fields.len())));
    }
    if fields[0] != MAGIC || fields[1] != VERSION {
        return Err(format_err(1, 0, "bad magic, expected `GRIDMAP v1`"));
    }
    // byte offset of each header field for error messages
    let field_offset = |i: usize| fields[..i].iter().map(|f| f.len() + 1).sum::<usize>();
    let parse_usize = |i: usize, name: &str| {
        fields[i]
            .parse::<usize>()
            .map_err(|_| format_err(1, field_offset(i), format!("invalid {name} `{}`", fields[i])))
    };
    let parse_f64 = |i: usize, name: &str| {
        fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format_err(1, field_offset(i), format!("invalid {name} `{}`", fields[i])))
    };
    let width = parse_usize(2, "width")?;
    let height = parse_usize(3, "height")?;
    let resolution = parse_f64(4, "resolution")?;
    let (ox, oy, oth) = (
        parse_f64(5, "origin_x")?,
        parse_f64(6, "origin_y")?,
        parse_f64(7, "origin_theta")?,
    );
    if resolution <= 0.0 {
        return Err(format_err(1, field_offset(4), "resolution must be positive"));
    }
    let expected = width
        .checked_mul(height)
        .filter(|n| *n > 0)
        .ok_or_else(|| format_err(1, field_offset(2), "grid dimensions are empty or overflow"))?;
    let payload = &data[newline + 1..];
    if payload.len() != expected {
        return Err(format_err(
            2,
            newline + 1 + payload.len().min(expected),
            format!(
                "payload has {} bytes, header declares {width}x{height} = {expected}",
                payload.len()
            ),
        ));
    }
    let mut cells = Vec::with_capacity(expected);
    for (i, b) in payload.iter().enumerate() {
        let cell = Cell::from_byte(*b).ok_or_else(|| {
            format_err(2, newline + 1 + i, format!("invalid cell byte {b}"))
        })?;
        cells.push(cell);
    }
    OccupancyGrid::from_cells(width, height, resolution, Pose2D::new(ox, oy, oth), cells)
        .map_err(|e| format_err(1, 0, e.to_string()))
}

pub fn save_map(grid: &OccupancyGrid, path: impl AsRef<Path>) -> Result<(), MapIoError> {
    let mut buf = Vec::new();
    write_map(grid, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<OccupancyGrid, MapIoError> {
    read_map(fs::File::open(path)?)
}
