//! ESRI ASCII elevation grids.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo_scene::TerrainGrid;

fn perr(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses an ESRI ASCII grid in degrees. Values are cell centers; NODATA
/// cells are filled with the mean of the valid cells.
pub fn parse_terrain(text: &str, path: &Path) -> Result<TerrainGrid> {
    let mut header = std::collections::HashMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, l)) = lines.peek() {
        let mut parts = l.split_whitespace();
        let Some(key) = parts.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        let (n, _) = lines.next().expect("peeked");
        let val: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(path, n + 1, format!("bad header value for {key}")))?;
        header.insert(key.to_ascii_lowercase(), val);
    }
    let get = |k: &str| header.get(k).copied();
    let need = |k: &str| get(k).ok_or_else(|| perr(path, 1, format!("missing header {k}")));
    let ncols = need("ncols")? as usize;
    let nrows = need("nrows")? as usize;
    let cell = need("cellsize")?;
    let (x0, y0) = match (get("xllcorner"), get("yllcorner"), get("xllcenter"), get("yllcenter")) {
        (Some(x), Some(y), _, _) => (x + 0.5 * cell, y + 0.5 * cell),
        (_, _, Some(x), Some(y)) => (x, y),
        _ => return Err(perr(path, 1, "missing xllcorner/yllcorner")),
    };
    let nodata = get("nodata_value");

    let mut values = Vec::with_capacity(nrows * ncols);
    for (n, l) in lines {
        for tok in l.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| perr(path, n + 1, format!("not a number: {tok:?}")))?;
            values.push(v);
        }
    }
    if values.len() != nrows * ncols {
        return Err(perr(
            path,
            0,
            format!("expected {} values, found {}", nrows * ncols, values.len()),
        ));
    }
    let is_nodata = |v: f64| nodata.is_some_and(|nd| v == nd);
    let valid: Vec<f64> = values.iter().copied().filter(|&v| !is_nodata(v)).collect();
    if valid.is_empty() {
        return Err(perr(path, 0, "grid has no valid cells"));
    }
    if valid.len() < values.len() {
        log::warn!(
            "{}: {} NODATA cells filled with the grid mean",
            path.display(),
            values.len() - valid.len()
        );
    }
    let fill = valid.iter().sum::<f64>() / valid.len() as f64;

    // file rows run north to south; the grid wants row 0 south
    let mut elevations = vec![0.0; nrows * ncols];
    for r in 0..nrows {
        for c in 0..ncols {
            let v = values[r * ncols + c];
            elevations[(nrows - 1 - r) * ncols + c] = if is_nodata(v) { fill } else { v };
        }
    }
    TerrainGrid::new(x0, y0, cell, nrows, ncols, elevations)
}

pub fn read_terrain(path: &Path) -> Result<TerrainGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_terrain(&text, path)
}

pub fn terrain_to_ascii(grid: &TerrainGrid) -> String {
    let (lon0, lat0) = grid.origin();
    let cs = grid.cell_size_deg();
    let mut s = String::new();
    let _ = writeln!(s, "ncols {}", grid.cols());
    let _ = writeln!(s, "nrows {}", grid.rows());
    let _ = writeln!(s, "xllcenter {lon0}");
    let _ = writeln!(s, "yllcenter {lat0}");
    let _ = writeln!(s, "cellsize {cs}");
    let _ = writeln!(s, "NODATA_value -9999");
    for r in (0..grid.rows()).rev() {
        let row: Vec<String> = (0..grid.cols()).map(|c| grid.node(r, c).to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_terrain(path: &Path, grid: &TerrainGrid) -> Result<()> {
    std::fs::write(path, terrain_to_ascii(grid)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let elev: Vec<f64> = (0..12).map(|i| 70.0 + i as f64 * 0.25).collect();
        let g = TerrainGrid::new(-79.4, 43.63, 0.0005, 3, 4, elev).unwrap();
        let back = parse_terrain(&terrain_to_ascii(&g), Path::new("t.asc")).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn corner_header_and_nodata() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 -9999\n3 5\n";
        let g = parse_terrain(text, Path::new("t.asc")).unwrap();
        assert_eq!(g.origin(), (0.5, 0.5));
        // south row is the last file row
        assert_eq!(g.node(0, 0), 3.0);
        assert_eq!(g.node(0, 1), 5.0);
        assert_eq!(g.node(1, 0), 1.0);
        assert_eq!(g.node(1, 1), 3.0);
    }

    #[test]
    fn malformed() {
        let p = Path::new("t.asc");
        assert!(parse_terrain("ncols 2\nnrows 2\ncellsize 1\n1 2\n3 4\n", p).is_err());
        assert!(parse_terrain("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n", p).is_err());
        match parse_terrain("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 x\n", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }
}
