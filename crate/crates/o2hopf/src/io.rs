//! Field checkpoints, CSV tables and JSON sidecars.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{ChannelField, Grid};

pub const MAGIC: &[u8; 4] = b"O2HF";
pub const VERSION: u32 = 1;

/// Writes a field as header {magic, version, n, N1, K, L, dt} followed by little-endian f64
/// coefficients ordered (k, x1, component, re/im).
pub fn write_checkpoint(path: &Path, grid: &Grid, field: &ChannelField) -> Result<()> {
    if field.n1 != grid.n1 || field.k_max != grid.k_max {
        return Err(Error::InvalidInput("field does not match the grid".into()));
    }
    let mut buf = Vec::with_capacity(40 + field.data.len() * 16);
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, field.n as u32, grid.n1 as u32, grid.k_max as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&grid.l.to_le_bytes());
    buf.extend_from_slice(&grid.dt.to_le_bytes());
    for z in &field.data {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(Grid, ChannelField)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 36 || &bytes[..4] != MAGIC {
        return Err(Error::Parse(format!("{}: not an O2HF checkpoint", path.display())));
    }
    let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u(4) != VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {}", u(4))));
    }
    let (n, n1, k) = (u(8) as usize, u(12) as usize, u(16) as usize);
    let grid = Grid::new(f(20), n1, k, f(28))?;
    let count = (k + 1) * n1 * n;
    if bytes.len() != 36 + count * 16 {
        return Err(Error::Parse(format!("checkpoint payload has {} bytes, expected {}", bytes.len() - 36, count * 16)));
    }
    let data = (0..count).map(|i| C64::new(f(36 + 16 * i), f(44 + 16 * i))).collect();
    Ok((grid, ChannelField { n, n1, k_max: k, data }))
}

/// CSV table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated variant readable by gnuplot.
pub fn write_dat(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = format!("# {}\n", header.join(" "));
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        rows.push(rec.iter().map(|s| s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))).collect::<Result<Vec<_>>>()?);
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let g = Grid::new(6.0, 65, 4, 0.02).unwrap();
        let mut f = ChannelField::zeros(3, &g);
        for (i, z) in f.data.iter_mut().enumerate() {
            *z = C64::new((i as f64).sin(), (i as f64 * 0.3).cos());
        }
        let dir = std::env::temp_dir().join(format!("o2hf-ck-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("f.o2hf");
        write_checkpoint(&p, &g, &f).unwrap();
        let (g2, f2) = read_checkpoint(&p).unwrap();
        assert_eq!(g2, g);
        assert_eq!(f2, f);
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"O2HF");
        assert_eq!(bytes.len(), 36 + 5 * 65 * 3 * 16);
        fs::write(&p, b"junk").unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Parse(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("o2hf-csv-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("t.csv");
        let rows = vec![vec![1.0, -2.5e-7], vec![0.1, 3.0]];
        write_csv(&p, &["a", "b"], &rows).unwrap();
        let (h, r) = read_csv(&p).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(r, rows);
    }
}
