//! OBJ (with groups), binary STL and binary little-endian PLY.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::mesh::{TriangleMesh, Vec3};
use super::GeometryError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Stl,
    Ply,
}

impl MeshFormat {
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "stl" => Some(Self::Stl),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh, GeometryError> {
    let mesh = match format {
        MeshFormat::Obj => parse_obj(bytes)?,
        MeshFormat::Stl => parse_stl(bytes)?,
        MeshFormat::Ply => parse_ply(bytes)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn save_mesh(mesh: &TriangleMesh, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
        MeshFormat::Stl => write_stl(mesh),
        MeshFormat::Ply => write_ply(mesh),
    }
}

fn line_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse { location: format!("line {line}"), message: message.into() }
}

fn offset_err(offset: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse { location: format!("byte {offset}"), message: message.into() }
}

fn parse_obj(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    let text = std::str::from_utf8(bytes).map_err(|e| offset_err(e.valid_up_to(), "invalid UTF-8"))?;
    let mut mesh = TriangleMesh::default();
    let mut current_group: Option<u32> = None;
    let mut saw_group = false;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|_| line_err(line_no, format!("bad coordinate `{s}`"))))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(line_err(line_no, "vertex needs three coordinates"));
                }
                mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let count = mesh.vertices.len() as i64;
                let idx: Vec<u32> = parts
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| line_err(line_no, format!("bad index `{tok}`")))?;
                        let resolved = if i < 0 { count + i } else { i - 1 };
                        if resolved < 0 || resolved >= count {
                            return Err(line_err(line_no, format!("index {i} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(line_err(line_no, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    if saw_group {
                        let g = match current_group {
                            Some(g) => g,
                            None => mesh.group_id("default"),
                        };
                        mesh.groups.push(g);
                    }
                }
            }
            Some("g") | Some("o") => {
                let name = parts.collect::<Vec<_>>().join(" ");
                let name = if name.is_empty() { "default".to_string() } else { name };
                if !saw_group {
                    saw_group = true;
                    if !mesh.triangles.is_empty() {
                        let d = mesh.group_id("default");
                        mesh.groups = vec![d; mesh.triangles.len()];
                    }
                }
                current_group = Some(mesh.group_id(&name));
            }
            _ => {}
        }
    }
    Ok(mesh)
}

fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:.9} {:.9} {:.9}", v.x, v.y, v.z);
    }
    let mut last_group = None;
    for (i, t) in mesh.triangles.iter().enumerate() {
        if mesh.has_groups() {
            let g = mesh.groups[i];
            if last_group != Some(g) {
                let _ = writeln!(s, "g {}", mesh.group_names[g as usize]);
                last_group = Some(g);
            }
        }
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

fn read_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    if bytes.len() < 84 {
        return Err(offset_err(bytes.len(), "binary STL header truncated"));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let needed = 84 + count * 50;
    if bytes.len() < needed {
        return Err(offset_err(bytes.len(), format!("expected {needed} bytes for {count} triangles")));
    }
    let mut mesh = TriangleMesh::default();
    let mut ids: std::collections::HashMap<[u32; 3], u32> = std::collections::HashMap::new();
    for t in 0..count {
        let base = 84 + t * 50 + 12;
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let p = [0, 1, 2].map(|c| read_f32(bytes, base + k * 12 + c * 4));
            let key = p.map(f32::to_bits);
            *slot = *ids.entry(key).or_insert_with(|| {
                mesh.vertices.push(Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64));
                (mesh.vertices.len() - 1) as u32
            });
        }
        mesh.triangles.push(tri);
    }
    Ok(mesh)
}

fn write_stl(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = vec![0u8; 80];
    out[..22].copy_from_slice(b"orthorecon binary STL ");
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in 0..mesh.triangles.len() {
        let n = mesh.face_normal(t);
        for c in [n.x, n.y, n.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        for v in mesh.corners(t) {
            for c in [v.x, v.y, v.z] {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

fn write_ply(mesh: &TriangleMesh) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    let mut out = header.into_bytes();
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &i in t {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

/// Point cloud with per-point RGB colors as binary PLY (diagnostic output).
pub fn write_colored_points_ply(points: &[Vec3], colors: &[[u8; 3]]) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        points.len()
    );
    let mut out = header.into_bytes();
    for (p, c) in points.iter().zip(colors) {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(c);
    }
    out
}

#[derive(Clone, Copy, Debug)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

enum PlyProperty {
    Scalar(String, PlyType),
    List(String, PlyType, PlyType),
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    const END: &[u8] = b"end_header\n";
    let header_end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| offset_err(0, "missing end_header"))?
        + END.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| offset_err(0, "header is not UTF-8"))?;
    let mut elements: Vec<PlyElement> = Vec::new();
    for (n, line) in header.lines().enumerate() {
        let p: Vec<&str> = line.split_whitespace().collect();
        match p.as_slice() {
            ["ply"] | ["end_header"] | [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(line_err(n + 1, format!("unsupported PLY format `{fmt}`")));
                }
            }
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count.parse().map_err(|_| line_err(n + 1, "bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (ct, it) = (PlyType::parse(ct), PlyType::parse(it));
                let el = elements.last_mut().ok_or_else(|| line_err(n + 1, "property before element"))?;
                match (ct, it) {
                    (Some(c), Some(i)) => el.properties.push(PlyProperty::List(name.to_string(), c, i)),
                    _ => return Err(line_err(n + 1, "unknown list type")),
                }
            }
            ["property", ty, name] => {
                let ty = PlyType::parse(ty).ok_or_else(|| line_err(n + 1, format!("unknown type `{ty}`")))?;
                let el = elements.last_mut().ok_or_else(|| line_err(n + 1, "property before element"))?;
                el.properties.push(PlyProperty::Scalar(name.to_string(), ty));
            }
            _ => return Err(line_err(n + 1, format!("unexpected header line `{line}`"))),
        }
    }

    let mut mesh = TriangleMesh::default();
    let mut at = header_end;
    let need = |at: usize, n: usize| -> Result<(), GeometryError> {
        if at + n > bytes.len() {
            Err(offset_err(bytes.len(), "unexpected end of PLY body"))
        } else {
            Ok(())
        }
    };
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            for prop in &el.properties {
                match prop {
                    PlyProperty::Scalar(name, ty) => {
                        need(at, ty.size())?;
                        let v = ty.read(&bytes[at..]);
                        at += ty.size();
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                    }
                    PlyProperty::List(name, ct, it) => {
                        need(at, ct.size())?;
                        let len = ct.read(&bytes[at..]) as usize;
                        at += ct.size();
                        need(at, len * it.size())?;
                        let idx: Vec<u32> = (0..len).map(|k| it.read(&bytes[at + k * it.size()..]) as u32).collect();
                        at += len * it.size();
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if idx.len() < 3 {
                                return Err(offset_err(at, "face with fewer than three vertices"));
                            }
                            for k in 1..idx.len() - 1 {
                                mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                mesh.vertices.push(Vec3::from(xyz));
            }
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures::{box_mesh, icosphere};

    fn assert_same(a: &TriangleMesh, b: &TriangleMesh, tol: f64) {
        assert_eq!(a.triangles.len(), b.triangles.len());
        for t in 0..a.triangles.len() {
            for (p, q) in a.corners(t).iter().zip(b.corners(t).iter()) {
                assert!((p - q).norm() < tol);
            }
        }
    }

    #[test]
    fn round_trips() {
        let mut m = icosphere(Vec3::new(0.1, -0.2, 0.05), 0.4, 1);
        m.append(&box_mesh(Vec3::repeat(0.6), Vec3::repeat(0.8)).with_group("glass"));
        for format in [MeshFormat::Obj, MeshFormat::Stl, MeshFormat::Ply] {
            let back = load_mesh(&save_mesh(&m, format), format).unwrap();
            assert_same(&m, &back, 1e-6);
        }
        let obj = load_mesh(&save_mesh(&m, MeshFormat::Obj), MeshFormat::Obj).unwrap();
        assert_eq!(obj.group_names, m.group_names);
        assert_eq!(obj.groups, m.groups);
    }

    #[test]
    fn obj_groups_and_polygons() {
        let src = "# quad split into groups\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\ng body\nf 1 2 3 4\ng glass\nf 1/1/1 2/2/2 5/5/5\nf -5 -4 -1\n";
        let m = load_mesh(src.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(m.triangles.len(), 4);
        assert_eq!(m.group_names, vec!["body", "glass"]);
        assert_eq!(m.groups, vec![0, 0, 1, 1]);
    }

    #[test]
    fn malformed_inputs_report_location() {
        let err = load_mesh(b"v 0 0 0\nv 1 x 0\n", MeshFormat::Obj).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = load_mesh(b"v 0 0 0\nf 1 2 3\n", MeshFormat::Obj).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let stl = save_mesh(&box_mesh(Vec3::zeros(), Vec3::repeat(1.0)), MeshFormat::Stl);
        assert!(load_mesh(&stl[..stl.len() - 10], MeshFormat::Stl).is_err());
        let ply = save_mesh(&box_mesh(Vec3::zeros(), Vec3::repeat(1.0)), MeshFormat::Ply);
        assert!(load_mesh(&ply[..ply.len() - 3], MeshFormat::Ply).is_err());
    }
}
