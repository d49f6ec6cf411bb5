//! Reading and writing triangle meshes as OBJ and OFF text.
//!
//! Writers emit one canonical form — fixed decimal notation with up to
//! nine significant digits, LF line endings, no comments — so that
//! write∘read∘write is byte-identical and golden files stay stable.
//! Readers accept the common variants (negative OBJ indices, `v/vt/vn`
//! slash forms, polygonal faces, CRLF, comments) and return structured
//! errors with line numbers; they never panic, whatever the bytes.

use crate::mesh::{Mesh, MeshError};
use nalgebra::Point3;
use std::fmt;
use std::path::Path;

/// A syntactic mesh: geometry and 0-based triangles as they appeared in
/// the file, before any manifoldness or orientation checks.
#[derive(Debug, Clone, Default)]
pub struct ParsedMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    /// Directives the reader did not understand and stepped over.
    pub skipped: usize,
}

/// A syntax or range problem, located by its 1-based line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Anything that can go wrong turning a file into a [`Mesh`] or back.
#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    Parse(ParseError),
    Mesh(MeshError),
    /// The path's extension names no supported format.
    UnknownFormat(String),
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "{e}"),
            IoError::Parse(e) => write!(f, "{e}"),
            IoError::Mesh(e) => write!(f, "{e}"),
            IoError::UnknownFormat(ext) => {
                write!(f, "unsupported mesh format `{ext}` (expected .obj or .off)")
            }
        }
    }
}

impl std::error::Error for IoError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            IoError::Io(e) => Some(e),
            IoError::Parse(e) => Some(e),
            IoError::Mesh(e) => Some(e),
            IoError::UnknownFormat(_) => None,
        }
    }
}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

impl From<ParseError> for IoError {
    fn from(e: ParseError) -> Self {
        IoError::Parse(e)
    }
}

impl From<MeshError> for IoError {
    fn from(e: MeshError) -> Self {
        IoError::Mesh(e)
    }
}

fn fail<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// Parse Wavefront OBJ text. Handles 1-based and negative (relative)
/// indices, ignores `/vt/vn` sub-indices, fan-triangulates polygons, and
/// counts every directive other than `v`/`f` as skipped.
pub fn read_obj(bytes: &[u8]) -> Result<ParsedMesh, ParseError> {
    let mut parsed = ParsedMesh::default();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let text = String::from_utf8_lossy(raw);
        let mut tokens = text.split_whitespace();
        let Some(head) = tokens.next() else { continue };
        if head.starts_with('#') {
            continue;
        }
        match head {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                // Three coordinates, or four when a weight tags along.
                if coords.len() < 3 || coords.len() > 4 {
                    return fail(line, format!("expected 3 coordinates, found {}", coords.len()));
                }
                let mut xyz = [0.0; 3];
                for (slot, token) in xyz.iter_mut().zip(&coords) {
                    *slot = token
                        .parse()
                        .map_err(|_| ParseError {
                            line,
                            message: format!("invalid coordinate `{token}`"),
                        })?;
                }
                parsed.vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let mut corners = Vec::new();
                for token in tokens {
                    // `i`, `i/t`, `i//n`, `i/t/n` — the vertex index leads.
                    let index = token.split('/').next().unwrap_or("");
                    let value: i64 = index.parse().map_err(|_| ParseError {
                        line,
                        message: format!("invalid face index `{token}`"),
                    })?;
                    let count = parsed.vertices.len() as i64;
                    let resolved = if value > 0 {
                        value - 1
                    } else if value < 0 {
                        count + value
                    } else {
                        return fail(line, "face index 0 (indices are 1-based)");
                    };
                    if resolved < 0 || resolved >= count {
                        return fail(
                            line,
                            format!("face index {value} is out of range (have {count} vertices)"),
                        );
                    }
                    corners.push(resolved as usize);
                }
                if corners.len() < 3 {
                    return fail(line, format!("face needs 3 vertices, found {}", corners.len()));
                }
                for i in 1..corners.len() - 1 {
                    parsed.triangles.push([corners[0], corners[i], corners[i + 1]]);
                }
            }
            _ => parsed.skipped += 1,
        }
    }
    Ok(parsed)
}

/// Parse OFF text: an `OFF` magic token, vertex/face/edge counts, `V`
/// coordinate triples, then `F` records of the form `n i_1 ... i_n`
/// (0-based, fan-triangulated when `n > 3`). Anything left over is an
/// error, as is running out of tokens early.
pub fn read_off(bytes: &[u8]) -> Result<ParsedMesh, ParseError> {
    // Tokenize up front with line numbers; `#` comments run to end of line.
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let text = String::from_utf8_lossy(raw);
        let text = text.split('#').next().unwrap_or("");
        for token in text.split_whitespace() {
            tokens.push((idx + 1, token.to_string()));
        }
    }
    let mut pos = 0;
    let last_line = tokens.last().map_or(1, |(l, _)| *l);
    let mut next = |expect: &str| -> Result<(usize, String), ParseError> {
        match tokens.get(pos) {
            Some((line, token)) => {
                pos += 1;
                Ok((*line, token.clone()))
            }
            None => fail(last_line, format!("file ended while reading {expect}")),
        }
    };

    let (line, magic) = next("the header")?;
    if magic != "OFF" {
        return fail(line, format!("expected OFF header, found `{magic}`"));
    }
    let mut counts = [0usize; 3];
    for (slot, name) in counts.iter_mut().zip(["vertex count", "face count", "edge count"]) {
        let (line, token) = next(name)?;
        *slot = token
            .parse()
            .map_err(|_| ParseError { line, message: format!("invalid {name} `{token}`") })?;
    }
    let [nv, nf, _ne] = counts;

    let mut parsed = ParsedMesh::default();
    for _ in 0..nv {
        let mut xyz = [0.0; 3];
        for slot in &mut xyz {
            let (line, token) = next("vertex coordinates")?;
            *slot = token
                .parse()
                .map_err(|_| ParseError { line, message: format!("invalid coordinate `{token}`") })?;
        }
        parsed.vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    for _ in 0..nf {
        let (line, token) = next("a face size")?;
        let n: usize = token
            .parse()
            .map_err(|_| ParseError { line, message: format!("invalid face size `{token}`") })?;
        if n < 3 {
            return fail(line, format!("face needs 3 vertices, found {n}"));
        }
        let mut corners = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, token) = next("a face index")?;
            let v: usize = token
                .parse()
                .map_err(|_| ParseError { line, message: format!("invalid face index `{token}`") })?;
            if v >= nv {
                return fail(line, format!("face index {v} is out of range (have {nv} vertices)"));
            }
            corners.push(v);
        }
        for i in 1..n - 1 {
            parsed.triangles.push([corners[0], corners[i], corners[i + 1]]);
        }
    }
    if let Some((line, token)) = tokens.get(pos) {
        return fail(*line, format!("unexpected trailing data `{token}`"));
    }
    Ok(parsed)
}

/// Canonical coordinate text: fixed decimal, up to nine significant
/// digits, no exponent, no trailing zeros.
fn format_coord(x: f64) -> String {
    assert!(x.is_finite(), "mesh coordinates must be finite");
    if x == 0.0 {
        return "0".to_string();
    }
    let decimals = (8 - x.abs().log10().floor() as i64).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Serialize as canonical OBJ text.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for p in mesh.vertices() {
        out.push_str(&format!(
            "v {} {} {}\n",
            format_coord(p.x),
            format_coord(p.y),
            format_coord(p.z)
        ));
    }
    for [i, j, k] in mesh.triangles() {
        out.push_str(&format!("f {} {} {}\n", i + 1, j + 1, k + 1));
    }
    out
}

/// Serialize as canonical OFF text with a true edge count.
pub fn write_off(mesh: &Mesh) -> String {
    let mut out = String::from("OFF\n");
    out.push_str(&format!(
        "{} {} {}\n",
        mesh.vertex_count(),
        mesh.face_count(),
        mesh.edge_count()
    ));
    for p in mesh.vertices() {
        out.push_str(&format!(
            "{} {} {}\n",
            format_coord(p.x),
            format_coord(p.y),
            format_coord(p.z)
        ));
    }
    for [i, j, k] in mesh.triangles() {
        out.push_str(&format!("3 {i} {j} {k}\n"));
    }
    out
}

fn format_of(path: &Path) -> Result<&'static str, IoError> {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => Ok("obj"),
        "off" => Ok("off"),
        other => Err(IoError::UnknownFormat(other.to_string())),
    }
}

/// Read, parse, and validate a mesh file chosen by extension.
/// Returns the mesh and the number of skipped directives.
pub fn load_mesh(path: &Path) -> Result<(Mesh, usize), IoError> {
    let format = format_of(path)?;
    let bytes = std::fs::read(path)?;
    let parsed = match format {
        "obj" => read_obj(&bytes)?,
        _ => read_off(&bytes)?,
    };
    let mesh = Mesh::build(parsed.vertices, parsed.triangles)?;
    Ok((mesh, parsed.skipped))
}

/// Write a mesh in the format named by the path's extension.
pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), IoError> {
    let format = format_of(path)?;
    let text = match format {
        "obj" => write_obj(mesh),
        _ => write_off(mesh),
    };
    std::fs::write(path, text)?;
    Ok(())
}
