//! Point files and CSV output.
//!
//! A point file is a header line `pointcloud <d> <n>` followed by `n` lines
//! of `d` space-separated decimals. Coordinates are written in the shortest
//! form that parses back to the same `f64`. A point's id is its row index.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::datagen::PointCloud;
use crate::error::{Error, Result};
use crate::knn::KnnResult;
use crate::morton::{PointId, RawPoint};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn write_points<W: Write>(w: &mut W, cloud: &PointCloud) -> std::io::Result<()> {
    writeln!(w, "pointcloud {} {}", cloud.dim, cloud.len())?;
    for p in &cloud.points {
        let mut sep = "";
        for c in &p.coords[..cloud.dim] {
            write!(w, "{sep}{c}")?;
            sep = " ";
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_point_file(path: &Path, cloud: &PointCloud) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    write_points(&mut w, cloud)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

/// Parses a point file. `path` only labels error messages.
pub fn read_points<R: BufRead>(r: R, path: &Path) -> Result<PointCloud> {
    let mut lines = r.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| io_err(path, e))?,
        None => return Err(parse_err(path, 1, "empty file, expected `pointcloud <d> <n>`")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (dim, n) = match fields.as_slice() {
        ["pointcloud", d, n] => {
            let d: usize = d.parse().map_err(|_| parse_err(path, 1, format!("bad dimension `{d}`")))?;
            let n: usize = n.parse().map_err(|_| parse_err(path, 1, format!("bad point count `{n}`")))?;
            (d, n)
        }
        _ => return Err(parse_err(path, 1, "expected header `pointcloud <d> <n>`")),
    };
    if !(2..=3).contains(&dim) {
        return Err(parse_err(path, 1, format!("dimension {dim} is not 2 or 3")));
    }
    if n > PointId::MAX as usize {
        return Err(parse_err(path, 1, format!("point count {n} exceeds the id range")));
    }

    let mut points = Vec::with_capacity(n);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if points.len() == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_err(path, lineno, format!("more than {n} points")));
        }
        let mut coords = [0.0; 3];
        let mut count = 0;
        for tok in line.split_whitespace() {
            if count == dim {
                return Err(parse_err(path, lineno, format!("expected {dim} coordinates")));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad number `{tok}`")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("non-finite coordinate `{tok}`")));
            }
            coords[count] = v;
            count += 1;
        }
        if count != dim {
            return Err(parse_err(path, lineno, format!("expected {dim} coordinates, found {count}")));
        }
        points.push(RawPoint {
            id: points.len() as PointId,
            coords,
        });
    }
    if points.len() < n {
        return Err(parse_err(
            path,
            points.len() + 2,
            format!("expected {n} points, found {}", points.len()),
        ));
    }
    Ok(PointCloud {
        dim,
        points,
        distribution: None,
        seed: 0,
    })
}

pub fn read_point_file(path: &Path) -> Result<PointCloud> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    read_points(BufReader::new(f), path)
}

pub const NEIGHBOR_HEADER: &str = "query_id,neighbor_id,sqdist";

/// One row per (query, neighbor) pair, neighbors nearest first.
pub fn write_neighbor_rows<W: Write>(w: &mut W, results: &[KnnResult]) -> std::io::Result<()> {
    writeln!(w, "{NEIGHBOR_HEADER}")?;
    for r in results {
        for n in &r.neighbors {
            writeln!(w, "{},{},{}", r.query, n.id, n.sqdist)?;
        }
    }
    Ok(())
}

/// Parses rows written by [`write_neighbor_rows`]; `#` lines are skipped.
pub fn parse_neighbor_rows(text: &str) -> Result<Vec<(PointId, PointId, u64)>> {
    let here = Path::new("<csv>");
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != NEIGHBOR_HEADER {
                return Err(parse_err(here, 1, "missing neighbor header"));
            }
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || parse_err(here, i + 1, format!("bad row `{line}`"));
        if f.len() != 3 {
            return Err(bad());
        }
        rows.push((
            f[0].parse().map_err(|_| bad())?,
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Distribution;

    fn read_str(s: &str) -> Result<PointCloud> {
        read_points(s.as_bytes(), Path::new("t.pts"))
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("not a parse error: {other}"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for d in Distribution::ALL {
            let c = d.generate(2_000, 17);
            let mut buf = Vec::new();
            write_points(&mut buf, &c).unwrap();
            let back = read_str(std::str::from_utf8(&buf).unwrap()).unwrap();
            assert_eq!(back.points, c.points, "{d}");
        }
    }

    #[test]
    fn header_only() {
        let c = read_str("pointcloud 3 0\n").unwrap();
        assert!(c.is_empty());
        assert_eq!(c.dim, 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of(read_str("").unwrap_err()), 1);
        assert_eq!(line_of(read_str("pointcloud 4 1\n0 0 0 0\n").unwrap_err()), 1);
        assert_eq!(line_of(read_str("points 2 1\n0 0\n").unwrap_err()), 1);
        assert_eq!(line_of(read_str("pointcloud 2 2\n0 0\n0.5\n").unwrap_err()), 3);
        assert_eq!(line_of(read_str("pointcloud 2 2\n0 0\n0.5 x\n").unwrap_err()), 3);
        assert_eq!(line_of(read_str("pointcloud 2 2\n0 0 0\n").unwrap_err()), 2);
        assert_eq!(line_of(read_str("pointcloud 2 2\n0 0\n").unwrap_err()), 3);
        assert_eq!(line_of(read_str("pointcloud 2 1\n0 0\n1 1\n").unwrap_err()), 3);
        assert_eq!(line_of(read_str("pointcloud 2 1\nNaN 0\n").unwrap_err()), 2);
    }

    #[test]
    fn trailing_blank_lines_are_fine() {
        assert_eq!(read_str("pointcloud 2 1\n0.25 1\n\n").unwrap().len(), 1);
    }

    #[test]
    fn neighbor_rows_round_trip() {
        let r = KnnResult {
            query: 3,
            neighbors: vec![
                crate::knn::Neighbor { id: 1, sqdist: 4 },
                crate::knn::Neighbor { id: 9, sqdist: 7 },
            ],
        };
        let mut buf = Vec::new();
        write_neighbor_rows(&mut buf, &[r]).unwrap();
        buf.extend_from_slice(b"# build_s=0.1\n");
        let rows = parse_neighbor_rows(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows, vec![(3, 1, 4), (3, 9, 7)]);
    }
}
