use crate::geometry::TriangleMesh;

use super::ReconstructError;

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// Splits `mesh` into vertex-connected components, ordered by their first triangle.
/// Each component keeps only the vertices it uses, renumbered in order of first use.
pub fn components(mesh: &TriangleMesh) -> Vec<TriangleMesh> {
    let mut parent: Vec<u32> = (0..mesh.vertices.len() as u32).collect();
    for t in &mesh.triangles {
        for e in 1..3 {
            let (a, b) = (find(&mut parent, t[0]), find(&mut parent, t[e]));
            if a != b {
                parent[a.max(b) as usize] = a.min(b);
            }
        }
    }
    let mut slot = vec![u32::MAX; mesh.vertices.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, t) in mesh.triangles.iter().enumerate() {
        let root = find(&mut parent, t[0]) as usize;
        if slot[root] == u32::MAX {
            slot[root] = groups.len() as u32;
            groups.push(Vec::new());
        }
        groups[slot[root] as usize].push(i);
    }
    groups.into_iter().map(|tris| submesh(mesh, &tris)).collect()
}

fn submesh(mesh: &TriangleMesh, tris: &[usize]) -> TriangleMesh {
    let mut remap = vec![u32::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(tris.len());
    for &t in tris {
        triangles.push(mesh.triangles[t].map(|v| {
            if remap[v as usize] == u32::MAX {
                remap[v as usize] = vertices.len() as u32;
                vertices.push(mesh.vertices[v as usize]);
            }
            remap[v as usize]
        }));
    }
    let mut out = TriangleMesh::new(vertices, triangles);
    if mesh.has_groups() {
        out.group_names = mesh.group_names.clone();
        out.groups = tris.iter().map(|&t| mesh.groups[t]).collect();
    }
    out
}

/// The component enclosing the largest signed volume; ties go to the earlier one.
pub fn largest_component(mesh: &TriangleMesh) -> Result<TriangleMesh, ReconstructError> {
    let mut best: Option<(f64, TriangleMesh)> = None;
    for c in components(mesh) {
        let v = c.signed_volume();
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, c));
        }
    }
    best.map(|(_, m)| m).ok_or(ReconstructError::EmptyMesh)
}
