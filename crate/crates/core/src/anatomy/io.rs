//! Mesh readers and writers.
//!
//! Two formats are accepted:
//!
//! * the native text manifest (`tmesh 1`): a header of `key value...` lines
//!   closed by `end_header`, then one `x y z` line per vertex and one
//!   `i j k label` line per triangle;
//! * PLY (ascii or binary) with a per-face integer `label` property.
//!   Structure names, model id and anchors ride in `comment` lines.

use super::{Label, LabeledMesh, MeshError};
use nalgebra::Point3;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "tmesh 1";

/// Loads a mesh from disk, choosing the parser from the file contents.
pub fn load_model(path: impl AsRef<Path>) -> Result<LabeledMesh, MeshError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if bytes.starts_with(b"ply") {
        parse_ply(&bytes, &stem)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| MeshError::Parse {
            line: 0,
            message: "file is not valid UTF-8".into(),
        })?;
        parse_mesh_text(&text)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

pub fn parse_mesh_text(text: &str) -> Result<LabeledMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, l)) => return Err(parse_err(n, format!("expected `{MAGIC}`, found `{l}`"))),
        None => return Err(parse_err(0, "empty file")),
    }

    let mut model_id = String::new();
    let mut counts: Option<(usize, usize)> = None;
    let mut names = BTreeMap::new();
    let mut anchors = BTreeMap::new();
    let mut pre_aligned = false;
    let mut header_closed = false;

    for (n, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("end_header") => {
                header_closed = true;
                break;
            }
            Some("model_id") => model_id = field(tok.next(), n, "model id")?,
            Some("counts") => {
                counts = Some((field(tok.next(), n, "vertex count")?, field(tok.next(), n, "triangle count")?))
            }
            Some("structure") => {
                let label: Label = field(tok.next(), n, "structure label")?;
                let name: String = field(tok.next(), n, "structure name")?;
                if names.insert(label, name).is_some() {
                    return Err(parse_err(n, format!("duplicate structure label {label}")));
                }
            }
            Some("anchor") => {
                let name: String = field(tok.next(), n, "anchor name")?;
                anchors.insert(name, field(tok.next(), n, "anchor vertex")?);
            }
            Some("pre_aligned") => pre_aligned = field(tok.next(), n, "pre_aligned flag")?,
            Some(other) => return Err(parse_err(n, format!("unknown header key `{other}`"))),
            None => unreachable!(),
        }
    }
    if !header_closed {
        return Err(parse_err(0, "missing end_header"));
    }
    let (nv, nt) = counts.ok_or_else(|| parse_err(0, "header lacks `counts`"))?;

    let mut vertices = Vec::with_capacity(nv);
    let mut triangles = Vec::with_capacity(nt);
    let mut labels = Vec::with_capacity(nt);
    for (n, line) in lines.by_ref().take(nv) {
        let mut tok = line.split_whitespace();
        vertices.push(Point3::new(
            field(tok.next(), n, "x")?,
            field(tok.next(), n, "y")?,
            field(tok.next(), n, "z")?,
        ));
    }
    if vertices.len() != nv {
        return Err(parse_err(0, format!("expected {nv} vertices, found {}", vertices.len())));
    }
    for (n, line) in lines.by_ref().take(nt) {
        let mut tok = line.split_whitespace();
        let tri = [
            field(tok.next(), n, "vertex index")?,
            field(tok.next(), n, "vertex index")?,
            field(tok.next(), n, "vertex index")?,
        ];
        triangles.push(tri);
        labels.push(field(tok.next(), n, "structure label")?);
    }
    if triangles.len() != nt {
        return Err(parse_err(0, format!("expected {nt} triangles, found {}", triangles.len())));
    }
    if let Some((n, _)) = lines.next() {
        return Err(parse_err(n, "trailing data after last triangle"));
    }

    let mut mesh = LabeledMesh {
        model_id,
        vertices,
        triangles,
        structure_of_triangle: labels,
        structure_names: names,
        anchors,
        pre_aligned,
    };
    mesh.validate()?;
    if mesh.model_id.is_empty() {
        mesh.model_id = "unnamed".into();
    }
    Ok(mesh)
}

/// Serializes a mesh in the native text format.
pub fn write_mesh_text(mesh: &LabeledMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "model_id {}", mesh.model_id);
    let _ = writeln!(out, "pre_aligned {}", mesh.pre_aligned);
    let _ = writeln!(out, "counts {} {}", mesh.vertices.len(), mesh.triangles.len());
    for (label, name) in &mesh.structure_names {
        let _ = writeln!(out, "structure {label} {name}");
    }
    for (name, index) in &mesh.anchors {
        let _ = writeln!(out, "anchor {name} {index}");
    }
    out.push_str("end_header\n");
    for v in &mesh.vertices {
        // `{:?}` on f64 prints the shortest round-trip representation.
        let _ = writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for (t, l) in mesh.triangles.iter().zip(&mesh.structure_of_triangle) {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], l);
    }
    out
}

// ---------------------------------------------------------------------------
// PLY

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
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

    fn decode(self, b: &[u8], enc: PlyEncoding) -> f64 {
        macro_rules! num {
            ($t:ty) => {{
                let arr = b.try_into().unwrap();
                (if enc == PlyEncoding::BinaryBe {
                    <$t>::from_be_bytes(arr)
                } else {
                    <$t>::from_le_bytes(arr)
                }) as f64
            }};
        }
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => num!(i16),
            Self::U16 => num!(u16),
            Self::I32 => num!(i32),
            Self::U32 => num!(u32),
            Self::F32 => num!(f32),
            Self::F64 => num!(f64),
        }
    }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl PlyProperty {
    fn name(&self) -> &str {
        match self {
            Self::Scalar { name, .. } | Self::List { name, .. } => name,
        }
    }
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

/// Values of one element record, one `Vec` per property (scalars have length 1).
type Record = Vec<Vec<f64>>;

struct RecordReader<'a> {
    enc: PlyEncoding,
    body: &'a [u8],
    pos: usize,
    // ascii state
    ascii_lines: Vec<(usize, &'a str)>,
    ascii_index: usize,
}

impl<'a> RecordReader<'a> {
    fn read(&mut self, element: &PlyElement) -> Result<(Record, usize), MeshError> {
        if self.enc == PlyEncoding::Ascii {
            let (line, text) = *self
                .ascii_lines
                .get(self.ascii_index)
                .ok_or_else(|| parse_err(0, format!("unexpected end of file in `{}`", element.name)))?;
            self.ascii_index += 1;
            let mut tok = text.split_whitespace();
            let mut record = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop {
                    PlyProperty::Scalar { name, .. } => record.push(vec![field(tok.next(), line, name)?]),
                    PlyProperty::List { name, .. } => {
                        let n: usize = field(tok.next(), line, name)?;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(field(tok.next(), line, name)?);
                        }
                        record.push(items);
                    }
                }
            }
            Ok((record, line))
        } else {
            let record_no = self.pos;
            let mut record = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop {
                    PlyProperty::Scalar { ty, .. } => record.push(vec![self.take(*ty)?]),
                    PlyProperty::List { count, item, .. } => {
                        let n = self.take(*count)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(self.take(*item)?);
                        }
                        record.push(items);
                    }
                }
            }
            Ok((record, record_no))
        }
    }

    fn take(&mut self, ty: Scalar) -> Result<f64, MeshError> {
        let end = self.pos + ty.size();
        let bytes = self
            .body
            .get(self.pos..end)
            .ok_or_else(|| parse_err(0, format!("binary body truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(ty.decode(bytes, self.enc))
    }
}

/// Parses an ASCII or binary PLY file whose faces carry an integer label.
pub fn parse_ply(bytes: &[u8], fallback_id: &str) -> Result<LabeledMesh, MeshError> {
    let header_end = find_subslice(bytes, b"end_header")
        .ok_or_else(|| parse_err(0, "PLY header lacks end_header"))?;
    let mut body_start = header_end + b"end_header".len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| parse_err(0, "PLY header is not UTF-8"))?;

    let mut enc = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut names = BTreeMap::new();
    let mut anchors = BTreeMap::new();
    let mut model_id = fallback_id.to_string();
    let mut pre_aligned = false;
    let header_lines = header.lines().count();

    for (i, line) in header.lines().enumerate() {
        let n = i + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("ply") | None => {}
            Some("format") => {
                enc = Some(match tok.next() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLe,
                    Some("binary_big_endian") => PlyEncoding::BinaryBe,
                    other => return Err(parse_err(n, format!("unsupported PLY format {other:?}"))),
                })
            }
            Some("comment") | Some("obj_info") => match tok.next() {
                Some("structure") => {
                    let label: Label = field(tok.next(), n, "structure label")?;
                    names.insert(label, field::<String>(tok.next(), n, "structure name")?);
                }
                Some("anchor") => {
                    let name: String = field(tok.next(), n, "anchor name")?;
                    anchors.insert(name, field(tok.next(), n, "anchor vertex")?);
                }
                Some("model_id") => model_id = field(tok.next(), n, "model id")?,
                Some("pre_aligned") => pre_aligned = field(tok.next(), n, "pre_aligned flag")?,
                _ => {}
            },
            Some("element") => elements.push(PlyElement {
                name: field(tok.next(), n, "element name")?,
                count: field(tok.next(), n, "element count")?,
                properties: Vec::new(),
            }),
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before any element"))?;
                let kind = tok.next().ok_or_else(|| parse_err(n, "missing property type"))?;
                let prop = if kind == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item, tok.next()) {
                        (Some(count), Some(item), Some(name)) => PlyProperty::List {
                            name: name.to_string(),
                            count,
                            item,
                        },
                        _ => return Err(parse_err(n, "malformed list property")),
                    }
                } else {
                    let ty = Scalar::parse(kind)
                        .ok_or_else(|| parse_err(n, format!("unknown scalar type `{kind}`")))?;
                    PlyProperty::Scalar {
                        name: field(tok.next(), n, "property name")?,
                        ty,
                    }
                };
                element.properties.push(prop);
            }
            Some(other) => return Err(parse_err(n, format!("unknown PLY header keyword `{other}`"))),
        }
    }
    let enc = enc.ok_or_else(|| parse_err(0, "PLY header lacks format line"))?;

    let body = &bytes[body_start..];
    let ascii_lines = if enc == PlyEncoding::Ascii {
        std::str::from_utf8(body)
            .map_err(|_| parse_err(0, "ascii PLY body is not UTF-8"))?
            .lines()
            .enumerate()
            .map(|(i, l)| (header_lines + 2 + i, l))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect()
    } else {
        Vec::new()
    };
    let mut reader = RecordReader {
        enc,
        body,
        pos: 0,
        ascii_lines,
        ascii_index: 0,
    };

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut labels = Vec::new();
    for element in &elements {
        let idx = |name: &str| element.properties.iter().position(|p| p.name() == name);
        match element.name.as_str() {
            "vertex" => {
                let (x, y, z) = match (idx("x"), idx("y"), idx("z")) {
                    (Some(x), Some(y), Some(z)) => (x, y, z),
                    _ => return Err(parse_err(0, "vertex element lacks x/y/z")),
                };
                for _ in 0..element.count {
                    let (r, _) = reader.read(element)?;
                    vertices.push(Point3::new(r[x][0], r[y][0], r[z][0]));
                }
            }
            "face" => {
                let list = idx("vertex_indices")
                    .or_else(|| idx("vertex_index"))
                    .ok_or_else(|| parse_err(0, "face element lacks vertex_indices"))?;
                let label = idx("label")
                    .or_else(|| idx("structure"))
                    .ok_or_else(|| parse_err(0, "face element lacks an integer `label` property"))?;
                for _ in 0..element.count {
                    let (r, line) = reader.read(element)?;
                    let poly = &r[list];
                    if poly.len() < 3 {
                        return Err(parse_err(line, "face with fewer than 3 vertices"));
                    }
                    let l = r[label][0];
                    if l < 0.0 || l > Label::MAX as f64 || l.fract() != 0.0 {
                        return Err(parse_err(line, format!("invalid face label {l}")));
                    }
                    // Fan triangulation for polygons.
                    for k in 1..poly.len() - 1 {
                        let ids = [poly[0], poly[k], poly[k + 1]];
                        if ids.iter().any(|&v| v < 0.0) {
                            return Err(parse_err(line, "negative vertex index"));
                        }
                        triangles.push(ids.map(|v| v as usize));
                        labels.push(l as Label);
                    }
                }
            }
            _ => {
                for _ in 0..element.count {
                    reader.read(element)?;
                }
            }
        }
    }

    if names.is_empty() {
        for &l in &labels {
            names.entry(l).or_insert_with(|| format!("structure_{l}"));
        }
    }
    let mesh = LabeledMesh {
        model_id,
        vertices,
        triangles,
        structure_of_triangle: labels,
        structure_names: names,
        anchors,
        pre_aligned,
    };
    mesh.validate()?;
    Ok(mesh)
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "tmesh 1
model_id tet
counts 4 4
structure 7 lv_blood
end_header
0 0 0
1 0 0
0 1 0
0 0 1
0 2 1 7
0 1 3 7
0 3 2 7
1 2 3 7
";

    #[test]
    fn tetrahedron_loads() {
        let mesh = parse_mesh_text(TETRA).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.triangles.len(), 4);
        assert_eq!(mesh.label_of("lv_blood"), Some(7));
        assert_eq!(mesh.model_id, "tet");
    }

    #[test]
    fn dangling_index_reports_record() {
        let bad = TETRA.replace("1 2 3 7", "1 2 4 7");
        let err = parse_mesh_text(&bad).unwrap_err();
        assert!(matches!(err, MeshError::DanglingIndex { record: 3, index: 4, .. }), "{err}");
    }

    #[test]
    fn unknown_label_reports_record() {
        let bad = TETRA.replace("0 1 3 7", "0 1 3 9");
        let err = parse_mesh_text(&bad).unwrap_err();
        assert!(matches!(err, MeshError::UnknownLabel { record: 1, label: 9 }), "{err}");
    }

    #[test]
    fn parse_error_carries_line() {
        let bad = TETRA.replace("0 0 1\n", "0 zero 1\n");
        match parse_mesh_text(&bad).unwrap_err() {
            MeshError::Parse { line, .. } => assert_eq!(line, 9),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let mesh = parse_mesh_text(TETRA).unwrap();
        assert_eq!(parse_mesh_text(&write_mesh_text(&mesh)).unwrap(), mesh);
    }

    #[test]
    fn ascii_ply_with_quad() {
        let ply = "ply
format ascii 1.0
comment model_id quadbox
comment structure 3 la_blood
element vertex 4
property float x
property float y
property float z
element face 1
property list uchar int vertex_indices
property int label
end_header
0 0 0
1 0 0
1 1 0
0 1 0
4 0 1 2 3 3
";
        let mesh = parse_ply(ply.as_bytes(), "x").unwrap();
        assert_eq!(mesh.model_id, "quadbox");
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(mesh.structure_of_triangle, vec![3, 3]);
        assert_eq!(mesh.name_of(3), "la_blood");
    }

    #[test]
    fn binary_ply_matches_ascii() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar uint vertex_indices\nproperty ushort label\nend_header\n".to_vec();
        for v in [[0.0f64, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.5]] {
            for c in v {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0u32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        bytes.extend_from_slice(&5u16.to_le_bytes());
        let mesh = parse_ply(&bytes, "fallback").unwrap();
        assert_eq!(mesh.model_id, "fallback");
        assert_eq!(mesh.vertices[2], Point3::new(0.0, 2.0, 0.5));
        assert_eq!(mesh.structure_of_triangle, vec![5]);
        assert_eq!(mesh.name_of(5), "structure_5");
    }

    #[test]
    fn ply_without_label_is_rejected() {
        let ply = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert!(parse_ply(ply.as_bytes(), "x").is_err());
    }
}
