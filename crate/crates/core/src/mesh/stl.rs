//! Binary STL.
//!
//! Layout: 80-byte header, `u32` triangle count, then per triangle twelve
//! little-endian `f32` (normal, three vertices) and a `u16` attribute of zero.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use super::TriangleMesh;

pub const HEADER_LEN: usize = 80;
pub const TRIANGLE_RECORD_LEN: usize = 50;
pub const TOOL_NAME: &str = "membrane-evolve";

pub fn stl_size(triangles: usize) -> usize {
    HEADER_LEN + 4 + TRIANGLE_RECORD_LEN * triangles
}

/// Tool name and id, space padded. Never starts with `solid`.
pub fn header(id: &str) -> [u8; HEADER_LEN] {
    let mut h = [b' '; HEADER_LEN];
    let text = format!("{TOOL_NAME} {id}");
    let bytes = text.as_bytes();
    let n = bytes.len().min(HEADER_LEN);
    h[..n].copy_from_slice(&bytes[..n]);
    h
}

fn unit_normal(m: &TriangleMesh, t: usize) -> [f32; 3] {
    let n = m.face_normal(t);
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if len > 0.0 {
        [
            (n[0] / len) as f32,
            (n[1] / len) as f32,
            (n[2] / len) as f32,
        ]
    } else {
        [0.0; 3]
    }
}

pub fn write_stl<W: Write>(m: &TriangleMesh, id: &str, mut out: W) -> io::Result<()> {
    out.write_all(&header(id))?;
    out.write_all(&(m.triangles.len() as u32).to_le_bytes())?;
    let mut record = [0u8; TRIANGLE_RECORD_LEN];
    for t in 0..m.triangles.len() {
        let mut floats = [0f32; 12];
        floats[..3].copy_from_slice(&unit_normal(m, t));
        for (k, v) in m.triangle_points(t).iter().enumerate() {
            for c in 0..3 {
                floats[3 + 3 * k + c] = v[c] as f32;
            }
        }
        for (i, f) in floats.iter().enumerate() {
            record[4 * i..4 * i + 4].copy_from_slice(&f.to_le_bytes());
        }
        record[48..50].copy_from_slice(&0u16.to_le_bytes());
        out.write_all(&record)?;
    }
    out.flush()
}

pub fn to_stl_bytes(m: &TriangleMesh, id: &str) -> Vec<u8> {
    let mut buf = Vec::with_capacity(stl_size(m.triangles.len()));
    write_stl(m, id, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Reads binary STL, welding vertices with bit-identical coordinates so the
/// result can be checked for watertightness.
pub fn read_stl<R: Read>(mut input: R) -> io::Result<TriangleMesh> {
    let mut head = [0u8; HEADER_LEN + 4];
    input.read_exact(&mut head)?;
    let count = u32::from_le_bytes(head[HEADER_LEN..].try_into().unwrap()) as usize;
    let mut mesh = TriangleMesh {
        vertices: Vec::new(),
        triangles: Vec::with_capacity(count),
    };
    let mut index: HashMap<[u32; 3], u32> = HashMap::new();
    let mut record = [0u8; TRIANGLE_RECORD_LEN];
    for _ in 0..count {
        input.read_exact(&mut record)?;
        let f = |i: usize| f32::from_le_bytes(record[4 * i..4 * i + 4].try_into().unwrap());
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let v = [f(3 + 3 * k), f(4 + 3 * k), f(5 + 3 * k)];
            let key = v.map(f32::to_bits);
            *slot = *index.entry(key).or_insert_with(|| {
                mesh.vertices.push([v[0] as f64, v[1] as f64, v[2] as f64]);
                (mesh.vertices.len() - 1) as u32
            });
        }
        mesh.triangles.push(tri);
    }
    Ok(mesh)
}
