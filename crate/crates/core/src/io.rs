//! File formats: mesh and field text files, boundary CSVs, binary grid
//! dumps, problem bundles, and the report tables the driver emits.
//!
//! Readers validate as they go and report the offending line; structural
//! mesh checks that need the whole file live in [`mesh_from_parts`].

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{CellVectorField, ScalarField};
use crate::hardy::{HardyReport, PeriodicGrid};
use crate::holder::HolderFit;
use crate::mesh::{mesh_from_parts, TriMesh, VERTEX_BUDGET};
use crate::riviere::IterationStats;

const MESH_MAGIC: &str = "diskmesh v1";
const FIELD_MAGIC: &str = "diskfield v1";
const GRID_SIDE_CAP: usize = 8192;

pub fn write_mesh(w: &mut impl Write, mesh: &TriMesh) -> Result<()> {
    writeln!(w, "{MESH_MAGIC}")?;
    writeln!(
        w,
        "{} {} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.boundary_edges.len(),
        mesh.level
    )?;
    for p in &mesh.vertices {
        writeln!(w, "{:?} {:?}", p[0], p[1])?;
    }
    for t in &mesh.triangles {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    for e in &mesh.boundary_edges {
        writeln!(w, "{} {}", e.a, e.b)?;
    }
    Ok(())
}

struct Lines<R> {
    reader: R,
    buf: String,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R) -> Self {
        Lines { reader, buf: String::new(), line: 0 }
    }

    fn next(&mut self) -> Result<Option<(usize, &str)>> {
        self.buf.clear();
        self.line += 1;
        let n = self.reader.read_line(&mut self.buf)?;
        if n == 0 {
            return Ok(None);
        }
        Ok(Some((self.line, self.buf.trim_end_matches(['\n', '\r']))))
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &str)> {
        let line = self.line + 1;
        self.next()?
            .ok_or_else(|| Error::parse(line, format!("unexpected end of file, wanted {what}")))
    }

    fn expect_end(&mut self) -> Result<()> {
        while let Some((line, text)) = self.next()? {
            if !text.trim().is_empty() {
                return Err(Error::parse(line, "trailing data after the declared counts"));
            }
        }
        Ok(())
    }
}

fn parse_count(tok: &str, line: usize, what: &str, cap: usize) -> Result<usize> {
    let n: usize = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("{what} count {tok:?} is not a number")))?;
    if n > cap {
        return Err(Error::parse(line, format!("{what} count {n} exceeds the {cap} cap")));
    }
    Ok(n)
}

fn parse_index(tok: &str, line: usize, bound: usize) -> Result<usize> {
    let i: usize = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("index {tok:?} is not a number")))?;
    if i >= bound {
        return Err(Error::parse(line, format!("index {i} out of range {bound}")));
    }
    Ok(i)
}

fn parse_float(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("{tok:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{tok:?} is not finite")));
    }
    Ok(v)
}

fn tokens(text: &str, line: usize, want: usize) -> Result<Vec<&str>> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != want {
        return Err(Error::parse(
            line,
            format!("expected {want} fields, got {}", toks.len()),
        ));
    }
    Ok(toks)
}

pub fn read_mesh(reader: impl BufRead) -> Result<TriMesh> {
    let mut lines = Lines::new(reader);
    let (line, magic) = lines.expect("the format line")?;
    if magic.trim() != MESH_MAGIC {
        return Err(Error::parse(line, format!("not a {MESH_MAGIC} file")));
    }
    let (line, header) = lines.expect("the count header")?;
    let toks = tokens(header, line, 4)?;
    let nv = parse_count(toks[0], line, "vertex", VERTEX_BUDGET as usize)?;
    let nt = parse_count(toks[1], line, "triangle", 2 * VERTEX_BUDGET as usize)?;
    let nb = parse_count(toks[2], line, "boundary edge", VERTEX_BUDGET as usize)?;
    let level: u32 = toks[3]
        .parse()
        .map_err(|_| Error::parse(line, format!("level {:?} is not a number", toks[3])))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = lines.expect("a vertex line")?;
        let toks = tokens(text, line, 2)?;
        vertices.push([parse_float(toks[0], line)?, parse_float(toks[1], line)?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, text) = lines.expect("a triangle line")?;
        let toks = tokens(text, line, 3)?;
        triangles.push([
            parse_index(toks[0], line, nv)?,
            parse_index(toks[1], line, nv)?,
            parse_index(toks[2], line, nv)?,
        ]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, text) = lines.expect("a boundary edge line")?;
        let toks = tokens(text, line, 2)?;
        boundary.push([parse_index(toks[0], line, nv)?, parse_index(toks[1], line, nv)?]);
    }
    lines.expect_end()?;
    mesh_from_parts(vertices, triangles, boundary, level)
}

/// Field file contents before binding to a mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedField {
    Scalar(Vec<f64>),
    CellVectors(Vec<[f64; 2]>),
}

pub fn write_scalar_field(w: &mut impl Write, u: &ScalarField) -> Result<()> {
    writeln!(w, "{FIELD_MAGIC}")?;
    writeln!(w, "scalar {}", u.values.len())?;
    for v in &u.values {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

pub fn write_cell_field(w: &mut impl Write, b: &CellVectorField) -> Result<()> {
    writeln!(w, "{FIELD_MAGIC}")?;
    writeln!(w, "cellvec {}", b.values.len())?;
    for v in &b.values {
        writeln!(w, "{:?} {:?}", v[0], v[1])?;
    }
    Ok(())
}

pub fn read_field(reader: impl BufRead) -> Result<LoadedField> {
    let mut lines = Lines::new(reader);
    let (line, magic) = lines.expect("the format line")?;
    if magic.trim() != FIELD_MAGIC {
        return Err(Error::parse(line, format!("not a {FIELD_MAGIC} file")));
    }
    let (line, header) = lines.expect("the kind header")?;
    let toks = tokens(header, line, 2)?;
    let count = parse_count(toks[1], line, "value", 2 * VERTEX_BUDGET as usize)?;
    let field = match toks[0] {
        "scalar" => {
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                let (line, text) = lines.expect("a value line")?;
                values.push(parse_float(tokens(text, line, 1)?[0], line)?);
            }
            LoadedField::Scalar(values)
        }
        "cellvec" => {
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                let (line, text) = lines.expect("a vector line")?;
                let toks = tokens(text, line, 2)?;
                values.push([parse_float(toks[0], line)?, parse_float(toks[1], line)?]);
            }
            LoadedField::CellVectors(values)
        }
        other => {
            return Err(Error::parse(line, format!("unknown field kind {other:?}")));
        }
    };
    lines.expect_end()?;
    Ok(field)
}

pub fn write_boundary_csv(w: &mut impl Write, pairs: &[(usize, f64)]) -> Result<()> {
    for (i, v) in pairs {
        writeln!(w, "{i},{v:?}")?;
    }
    Ok(())
}

pub fn read_boundary_csv(reader: impl BufRead) -> Result<Vec<(usize, f64)>> {
    let mut lines = Lines::new(reader);
    let mut pairs = Vec::new();
    while let Some((line, text)) = lines.next()? {
        if text.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = text.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(Error::parse(line, format!("expected index,value, got {text:?}")));
        }
        pairs.push((
            parse_index(cells[0], line, VERTEX_BUDGET as usize)?,
            parse_float(cells[1], line)?,
        ));
        if pairs.len() > VERTEX_BUDGET as usize {
            return Err(Error::parse(line, "more rows than the vertex budget"));
        }
    }
    Ok(pairs)
}

pub fn write_grid_dump(w: &mut impl Write, grid: &PeriodicGrid, samples: &[f64]) -> Result<()> {
    if samples.len() != grid.n * grid.n {
        return Err(Error::Shape {
            what: "grid samples",
            expected: grid.n * grid.n,
            got: samples.len(),
        });
    }
    w.write_all(&(grid.n as u64).to_le_bytes())?;
    w.write_all(&grid.half_extent.to_le_bytes())?;
    for v in samples {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_dump(mut r: impl Read) -> Result<(PeriodicGrid, Vec<f64>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::parse(1, "grid dump shorter than its 16 byte header"))?;
    let n = u64::from_le_bytes(header[..8].try_into().unwrap());
    let half_extent = f64::from_le_bytes(header[8..].try_into().unwrap());
    if n > GRID_SIDE_CAP as u64 {
        return Err(Error::parse(1, format!("grid side {n} exceeds the {GRID_SIDE_CAP} cap")));
    }
    let grid = PeriodicGrid::new(n as usize, half_extent)?;
    let mut samples = vec![0.0; grid.n * grid.n];
    let mut buf = [0u8; 8];
    for (i, slot) in samples.iter_mut().enumerate() {
        r.read_exact(&mut buf)
            .map_err(|_| Error::parse(1, format!("grid dump ends after {i} of {} samples", grid.n * grid.n)))?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::parse(1, format!("sample {i} is not finite")));
        }
        *slot = v;
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::parse(1, "trailing bytes after the declared samples"));
    }
    Ok((grid, samples))
}

pub fn write_trace_csv(w: &mut impl Write, trace: &[IterationStats]) -> Result<()> {
    writeln!(w, "iter,dAtilde_inf,dB_h1,residual_ab")?;
    for (i, s) in trace.iter().enumerate() {
        writeln!(w, "{},{:?},{:?},{:?}", i + 1, s.d_atilde_inf, s.d_b_h1, s.residual_ab)?;
    }
    Ok(())
}

pub fn write_scan_csv(w: &mut impl Write, rows: &[(f64, &HolderFit)]) -> Result<()> {
    writeln!(w, "param,x0_x,x0_y,alpha,fit_r2,r_min,r_max")?;
    for (param, fit) in rows {
        writeln!(
            w,
            "{param:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            fit.center[0], fit.center[1], fit.alpha, fit.fit_r2, fit.window.0, fit.window.1
        )?;
    }
    Ok(())
}

pub fn write_hardy_csv(w: &mut impl Write, rows: &[(String, HardyReport)]) -> Result<()> {
    writeln!(w, "label,l1,riesz1_l1,riesz2_l1,total,mean,n,half_extent")?;
    for (label, r) in rows {
        writeln!(
            w,
            "{label},{:?},{:?},{:?},{:?},{:?},{},{:?}",
            r.l1, r.riesz_l1.0, r.riesz_l1.1, r.total, r.mean, r.grid.n, r.grid.half_extent
        )?;
    }
    Ok(())
}

/// One drift problem on disk: mesh, drift field, boundary trace, and an
/// optional source term.
pub struct ProblemBundle {
    pub mesh: Arc<TriMesh>,
    pub drift: CellVectorField,
    /// Full-length nodal trace, zero away from the boundary.
    pub trace: Vec<f64>,
    pub source: Option<ScalarField>,
}

pub const BUNDLE_MESH: &str = "mesh.diskmesh";
pub const BUNDLE_DRIFT: &str = "b.field";
pub const BUNDLE_TRACE: &str = "g.csv";
pub const BUNDLE_SOURCE: &str = "f.field";

pub fn load_bundle(dir: &Path) -> Result<ProblemBundle> {
    let mesh = Arc::new(read_mesh(BufReader::new(File::open(dir.join(BUNDLE_MESH))?))?);

    let drift = match read_field(BufReader::new(File::open(dir.join(BUNDLE_DRIFT))?))? {
        LoadedField::CellVectors(values) => CellVectorField::new(Arc::clone(&mesh), values)?,
        LoadedField::Scalar(_) => {
            return Err(Error::Domain(format!("{BUNDLE_DRIFT} must hold a cellvec field")));
        }
    };

    let pairs = read_boundary_csv(BufReader::new(File::open(dir.join(BUNDLE_TRACE))?))?;
    let mask = mesh.boundary_vertex_mask();
    let mut trace = vec![0.0; mesh.n_vertices()];
    for (i, v) in pairs {
        if i >= mask.len() || !mask[i] {
            return Err(Error::Domain(format!(
                "{BUNDLE_TRACE} assigns vertex {i}, which is not on the boundary"
            )));
        }
        trace[i] = v;
    }

    let source_path = dir.join(BUNDLE_SOURCE);
    let source = if source_path.exists() {
        match read_field(BufReader::new(File::open(source_path)?))? {
            LoadedField::Scalar(values) => Some(ScalarField::new(Arc::clone(&mesh), values)?),
            LoadedField::CellVectors(_) => {
                return Err(Error::Domain(format!("{BUNDLE_SOURCE} must hold a scalar field")));
            }
        }
    } else {
        None
    };

    Ok(ProblemBundle { mesh, drift, trace, source })
}

pub fn save_bundle(
    dir: &Path,
    mesh: &TriMesh,
    drift: &CellVectorField,
    trace_pairs: &[(usize, f64)],
    source: Option<&ScalarField>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_mesh(&mut File::create(dir.join(BUNDLE_MESH))?, mesh)?;
    write_cell_field(&mut File::create(dir.join(BUNDLE_DRIFT))?, drift)?;
    write_boundary_csv(&mut File::create(dir.join(BUNDLE_TRACE))?, trace_pairs)?;
    if let Some(f) = source {
        write_scalar_field(&mut File::create(dir.join(BUNDLE_SOURCE))?, f)?;
    }
    Ok(())
}
