//! Binary grid container and CSV conversion.
//!
//! Container layout (little endian): magic `WNDG`, `u16` version, four `u32`
//! axis lengths (lon, lat, pressure, time), each axis as `f64`, then the
//! values as `f32` pairs in `(lon, lat, pressure, time, component)` order.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{WindError, WindGrid};

pub const MAGIC: &[u8; 4] = b"WNDG";
pub const VERSION: u16 = 1;

/// Axis lengths beyond this are treated as corrupt headers.
const MAX_AXIS_LEN: u32 = 1 << 20;

pub fn write_grid<W: Write>(grid: &WindGrid, mut w: W) -> Result<(), WindError> {
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    for n in grid.shape() {
        w.write_u32::<LittleEndian>(n as u32)?;
    }
    for axis in [grid.lon_axis(), grid.lat_axis(), grid.pressure_axis(), grid.time_axis()] {
        for &v in axis {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for &v in grid.values() {
        w.write_f32::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid<R: Read>(mut r: R) -> Result<WindGrid, WindError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| WindError::Format("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(WindError::Format(format!("bad magic {magic:?}")));
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|_| WindError::Format("missing version".into()))?;
    if version != VERSION {
        return Err(WindError::Format(format!("unsupported version {version}")));
    }
    let mut lens = [0usize; 4];
    for len in &mut lens {
        let n = r
            .read_u32::<LittleEndian>()
            .map_err(|_| WindError::Format("truncated header".into()))?;
        if n == 0 || n > MAX_AXIS_LEN {
            return Err(WindError::Format(format!("implausible axis length {n}")));
        }
        *len = n as usize;
    }
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(4);
    for &n in &lens {
        let mut axis = vec![0.0; n];
        r.read_f64_into::<LittleEndian>(&mut axis)
            .map_err(|_| WindError::shape("file ends inside the axis block"))?;
        axes.push(axis);
    }
    let count = lens.iter().product::<usize>() * 2;
    let mut values = vec![0f32; count];
    r.read_f32_into::<LittleEndian>(&mut values)
        .map_err(|_| WindError::shape(format!("value array shorter than the expected {count} entries")))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(WindError::shape("trailing bytes after the value array"));
    }
    let time = axes.pop().unwrap();
    let pressure = axes.pop().unwrap();
    let lat = axes.pop().unwrap();
    let lon = axes.pop().unwrap();
    WindGrid::new(lon, lat, pressure, time, values)
}

pub fn save(grid: &WindGrid, path: impl AsRef<Path>) -> Result<(), WindError> {
    write_grid(grid, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<WindGrid, WindError> {
    read_grid(BufReader::new(File::open(path)?))
}

const CSV_COLUMNS: [&str; 6] = ["lon_deg", "lat_deg", "pressure_pa", "time_s", "vwx_ms", "vwy_ms"];

fn axis_index(values: &BTreeMap<u64, usize>, v: f64) -> usize {
    values[&v.to_bits()]
}

/// Reads a rectangular CSV grid with columns
/// `lon_deg,lat_deg,pressure_pa,time_s,vwx_ms,vwy_ms`. Row numbers in
/// errors count the header as row 1.
pub fn read_csv<R: Read>(reader: R) -> Result<WindGrid, WindError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != CSV_COLUMNS.len() || header.iter().zip(CSV_COLUMNS).any(|(a, b)| a != b) {
        return Err(WindError::Format(format!(
            "expected header {}, got {}",
            CSV_COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut rows: Vec<([f64; 4], [f32; 2])> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() != CSV_COLUMNS.len() {
            return Err(WindError::Shape {
                message: format!("expected {} fields, found {}", CSV_COLUMNS.len(), record.len()),
                row: Some(row),
            });
        }
        let mut nums = [0f64; 6];
        for (k, field) in record.iter().enumerate() {
            nums[k] = field.parse().map_err(|_| WindError::Shape {
                message: format!("column {} is not a number: {field:?}", CSV_COLUMNS[k]),
                row: Some(row),
            })?;
        }
        rows.push(([nums[0], nums[1], nums[2], nums[3]], [nums[4] as f32, nums[5] as f32]));
    }
    if rows.is_empty() {
        return Err(WindError::shape("no data rows"));
    }

    let mut axes: Vec<Vec<f64>> = (0..4)
        .map(|d| {
            let mut a: Vec<f64> = rows.iter().map(|r| r.0[d]).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        })
        .collect();
    let index: Vec<BTreeMap<u64, usize>> = axes
        .iter()
        .map(|a| a.iter().enumerate().map(|(i, v)| (v.to_bits(), i)).collect())
        .collect();
    let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
    let nodes = lens.iter().product::<usize>();
    if rows.len() != nodes {
        return Err(WindError::shape(format!(
            "{} rows do not fill a {}x{}x{}x{} grid",
            rows.len(),
            lens[0],
            lens[1],
            lens[2],
            lens[3]
        )));
    }

    let mut values = vec![0f32; nodes * 2];
    let mut seen = vec![false; nodes];
    for (i, (coord, uv)) in rows.iter().enumerate() {
        let idx: Vec<usize> = (0..4).map(|d| axis_index(&index[d], coord[d])).collect();
        let node = ((idx[0] * lens[1] + idx[1]) * lens[2] + idx[2]) * lens[3] + idx[3];
        if std::mem::replace(&mut seen[node], true) {
            return Err(WindError::Shape {
                message: "duplicate grid node".into(),
                row: Some(i + 2),
            });
        }
        values[node * 2] = uv[0];
        values[node * 2 + 1] = uv[1];
    }
    let time = axes.pop().unwrap();
    let pressure = axes.pop().unwrap();
    let lat = axes.pop().unwrap();
    let lon = axes.pop().unwrap();
    WindGrid::new(lon, lat, pressure, time, values)
}

/// Converts a CSV grid into the binary container.
pub fn convert_csv(csv_path: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<WindGrid, WindError> {
    let grid = read_csv(BufReader::new(File::open(csv_path)?))?;
    save(&grid, out)?;
    Ok(grid)
}
