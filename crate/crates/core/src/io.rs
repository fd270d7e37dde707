//! JSON interchange with every float written to 17 significant digits.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::mesh::{MeshError, TriMesh};

/// Pretty JSON formatter that prints floats as `d.dddddddddddddddde±x`.
pub struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Default for FullPrecision<'_> {
    fn default() -> Self {
        Self(PrettyFormatter::new())
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{value:.8e}")
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

/// Serializes any value as pretty JSON with full-precision floats.
pub fn to_json_string<V: Serialize + ?Sized>(value: &V) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// On-disk mesh layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, usize>,
}

impl From<&TriMesh<f64>> for MeshFile {
    fn from(m: &TriMesh<f64>) -> Self {
        Self { vertices: m.vertices().to_vec(), triangles: m.triangles().to_vec(), labels: m.labels().clone() }
    }
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<TriMesh<f64>, MeshError> {
        let mut mesh = TriMesh::new(self.vertices, self.triangles)?;
        for (name, v) in self.labels {
            mesh = mesh.with_label(name, v)?;
        }
        Ok(mesh)
    }
}

pub fn mesh_to_json(mesh: &TriMesh<f64>) -> String {
    to_json_string(&MeshFile::from(mesh)).expect("mesh data is serializable")
}

pub fn mesh_from_json(text: &str) -> Result<TriMesh<f64>, MeshError> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| MeshError::Format(e.to_string()))?;
    file.into_mesh()
}
