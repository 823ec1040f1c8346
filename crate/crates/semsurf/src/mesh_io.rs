//! Wavefront OBJ and binary little-endian PLY.
//!
//! OBJ files hold `v x y z`, one `#vc r g b` comment per vertex when colors
//! are present, `vn` lines when normals are present, and 1-based faces
//! (`f a//a b//b c//c` with normals, `f a b c` without). Coordinates are
//! printed with the shortest representation that parses back to the same
//! `f64`, so OBJ round trips are exact.
//!
//! PLY files store `float` positions and normals, `uchar` colors and
//! `list uchar int vertex_indices` faces.
//!
//! Layered characters are written as one file pair per layer,
//! `<stem>_<layer>.obj` and `<stem>_<layer>.ply`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use semsurf_core::{LayeredCharacter, Mesh, Vec3};

use crate::error::{CliError, CliResult};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}:{line}: {msg}", path.display()))
}

/// Color channel to byte, rounding to nearest.
pub fn quantize(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn obj_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# semsurf mesh: {} vertices, {} triangles", mesh.vertex_count(), mesh.triangle_count());
    let colors = mesh.colors();
    for (i, p) in mesh.positions().iter().enumerate() {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        if let Some(c) = colors {
            let _ = writeln!(s, "#vc {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
    }
    if let Some(normals) = mesh.normals() {
        for n in normals {
            let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
        }
    }
    let with_normals = mesh.normals().is_some();
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|v| v + 1);
        if with_normals {
            let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
        } else {
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}

pub fn write_obj(mesh: &Mesh, path: &Path) -> CliResult<()> {
    fs::write(path, obj_string(mesh)).map_err(|e| io_err(path, e))
}

fn floats<const N: usize>(parts: &[&str], path: &Path, line: usize) -> CliResult<[f64; N]> {
    if parts.len() < N {
        return Err(parse_err(path, line, format!("expected {N} numbers")));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| parse_err(path, line, format!("bad number `{p}`")))?;
    }
    Ok(out)
}

fn obj_index(tok: &str, count: usize, path: &Path, line: usize) -> CliResult<u32> {
    let first = tok.split('/').next().unwrap_or("");
    let raw: i64 = first
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad face index `{tok}`")))?;
    let idx = if raw > 0 { raw - 1 } else { count as i64 + raw };
    if raw == 0 || idx < 0 || idx >= count as i64 {
        return Err(parse_err(path, line, format!("face index {raw} out of range")));
    }
    Ok(idx as u32)
}

/// Parses OBJ text. Polygons are fan-triangulated; normals and `#vc` colors
/// are attached when there is exactly one per vertex.
pub fn parse_obj(text: &str, path: &Path) -> CliResult<Mesh> {
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first().copied() {
            Some("v") => {
                let [x, y, z] = floats::<3>(&parts[1..], path, ln)?;
                positions.push(Vec3::new(x, y, z));
                if parts.len() >= 7 {
                    colors.push(floats::<3>(&parts[4..], path, ln)?);
                }
            }
            Some("#vc") => colors.push(floats::<3>(&parts[1..], path, ln)?),
            Some("vn") => normals.push(Vec3::from_array(floats::<3>(&parts[1..], path, ln)?)),
            Some("f") => {
                if parts.len() < 4 {
                    return Err(parse_err(path, ln, "face needs at least three vertices"));
                }
                let idx: Vec<u32> = parts[1..]
                    .iter()
                    .map(|t| obj_index(t, positions.len(), path, ln))
                    .collect::<CliResult<_>>()?;
                for w in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    let n = positions.len();
    let mut mesh = Mesh::new(positions, faces).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if normals.len() == n && n > 0 {
        mesh = mesh.with_normals(normals).map_err(|e| io_err(path, e))?;
    }
    if colors.len() == n && n > 0 {
        mesh = mesh.with_colors(colors).map_err(|e| io_err(path, e))?;
    }
    Ok(mesh)
}

pub fn read_obj(path: &Path) -> CliResult<Mesh> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_obj(&text, path)
}

pub fn ply_bytes(mesh: &Mesh) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\ncomment semsurf mesh\n");
    let _ = writeln!(header, "element vertex {}", mesh.vertex_count());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if mesh.normals().is_some() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    if mesh.colors().is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(header, "element face {}", mesh.triangle_count());
    header.push_str("property list uchar int vertex_indices\nend_header\n");
    let mut out = header.into_bytes();
    for i in 0..mesh.vertex_count() {
        for v in mesh.positions()[i].to_array() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(n) = mesh.normals() {
            for v in n[i].to_array() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        if let Some(c) = mesh.colors() {
            out.extend(c[i].map(quantize));
        }
    }
    for t in mesh.triangles() {
        out.push(3);
        for v in t {
            out.extend_from_slice(&(*v as i32).to_le_bytes());
        }
    }
    out
}

pub fn write_ply(mesh: &Mesh, path: &Path) -> CliResult<()> {
    fs::write(path, ply_bytes(mesh)).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, t: Scalar) -> CliResult<f64> {
        let n = t.size();
        if self.pos + n > self.data.len() {
            return Err(CliError::Config(format!("{}: PLY body is truncated", self.path.display())));
        }
        let v = t.read(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(v)
    }
}

/// Parses a binary little-endian PLY with `vertex` (x, y, z and optional
/// nx, ny, nz, red, green, blue) and `face` elements. Other elements and
/// properties are skipped.
pub fn parse_ply(data: &[u8], path: &Path) -> CliResult<Mesh> {
    let bad = |msg: &str| CliError::Config(format!("{}: {msg}", path.display()));
    let marker = b"end_header\n";
    let end = data
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&data[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("not a PLY file"));
    }
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => return Err(bad(&format!("unsupported PLY format `{other}`"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let (c, i) = Scalar::parse(c).zip(Scalar::parse(i)).ok_or_else(|| bad("bad list type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element"))?
                    .props
                    .push(Property::List(name.to_string(), c, i));
            }
            ["property", t, name] => {
                let t = Scalar::parse(t).ok_or_else(|| bad("bad property type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element"))?
                    .props
                    .push(Property::Scalar(name.to_string(), t));
            }
            _ => {}
        }
    }
    let mut cur = Cursor {
        data: &data[end + marker.len()..],
        pos: 0,
        path,
    };
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut p = [0.0; 3];
            let mut n = [0.0; 3];
            let mut c = [0.0; 3];
            let (mut has_n, mut has_c) = (false, false);
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, t) => {
                        let v = cur.take(*t)?;
                        match name.as_str() {
                            "x" => p[0] = v,
                            "y" => p[1] = v,
                            "z" => p[2] = v,
                            "nx" | "ny" | "nz" => {
                                has_n = true;
                                n[(name.as_bytes()[1] - b'x') as usize] = v;
                            }
                            "red" => (has_c, c[0]) = (true, v / 255.0),
                            "green" => c[1] = v / 255.0,
                            "blue" => c[2] = v / 255.0,
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let len = cur.take(*ct)? as usize;
                        let mut idx = Vec::with_capacity(len);
                        for _ in 0..len {
                            idx.push(cur.take(*it)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if idx.len() < 3 || idx.iter().any(|&v| v < 0.0) {
                                return Err(bad("bad face"));
                            }
                            for w in 1..idx.len() - 1 {
                                faces.push([idx[0] as u32, idx[w] as u32, idx[w + 1] as u32]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                positions.push(Vec3::from_array(p));
                if has_n {
                    normals.push(Vec3::from_array(n));
                }
                if has_c {
                    colors.push(c);
                }
            }
        }
    }
    let count = positions.len();
    let mut mesh = Mesh::new(positions, faces).map_err(|e| bad(&e.to_string()))?;
    if normals.len() == count && count > 0 {
        mesh = mesh.with_normals(normals).map_err(|e| bad(&e.to_string()))?;
    }
    if colors.len() == count && count > 0 {
        mesh = mesh.with_colors(colors).map_err(|e| bad(&e.to_string()))?;
    }
    Ok(mesh)
}

pub fn read_ply(path: &Path) -> CliResult<Mesh> {
    let data = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_ply(&data, path)
}

/// Reads `.obj` or `.ply` by extension.
pub fn read_mesh(path: &Path) -> CliResult<Mesh> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => read_obj(path),
        Some("ply") => read_ply(path),
        _ => Err(CliError::Config(format!("{}: expected a .obj or .ply file", path.display()))),
    }
}

/// Writes `<stem>.obj` and `<stem>.ply` into `dir`.
pub fn write_mesh_pair(mesh: &Mesh, dir: &Path, stem: &str) -> CliResult<[PathBuf; 2]> {
    let obj = dir.join(format!("{stem}.obj"));
    let ply = dir.join(format!("{stem}.ply"));
    write_obj(mesh, &obj)?;
    write_ply(mesh, &ply)?;
    Ok([obj, ply])
}

/// Writes every layer as `<stem>_<layer>.obj` and `<stem>_<layer>.ply`.
pub fn export_character(character: &LayeredCharacter, dir: &Path, stem: &str) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut out = Vec::new();
    for layer in character.layers() {
        out.extend(write_mesh_pair(&layer.mesh, dir, &format!("{stem}_{}", layer.name))?);
    }
    Ok(out)
}
