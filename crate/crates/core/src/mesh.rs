//! Structured Cartesian hexahedral meshes of a box domain.
//!
//! Nodes are numbered lexicographically with the x index varying fastest:
//! node `(i,j,k)` has index `i + j*(nx+1) + k*(nx+1)*(ny+1)`. Elements are
//! numbered the same way over `(nx, ny, nz)`. Each connectivity row lists an
//! element's eight corner nodes in the ordering documented in
//! [`crate::reference_element`].

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// A structured hexahedral box mesh.
///
/// Immutable after construction; share freely across threads. Node indices
/// are 4-byte unsigned integers throughout.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Elements per direction.
    pub dims: [usize; 3],
    /// Physical box extents.
    pub lengths: [f64; 3],
    pub num_nodes: usize,
    pub num_elements: usize,
    /// Nodal positions, node-major (`coords[n] = [x, y, z]`).
    pub coords: Vec<Vec3>,
    /// Element connectivity: eight node indices per element.
    pub node_map: Vec<[u32; 8]>,
    /// Sorted indices of nodes on the box surface.
    pub boundary_nodes: Vec<u32>,
}

/// Builds a box mesh with `dims = (nx, ny, nz)` elements over a box of the
/// given physical extents.
///
/// Fails when a dimension is zero, an extent is non-positive or non-finite,
/// or the node count would not fit in 32-bit indices.
pub fn build_box_mesh(dims: [usize; 3], lengths: [f64; 3]) -> Result<Mesh> {
    if dims.contains(&0) {
        return Err(Error::InvalidMesh(format!(
            "all dims must be >= 1, got {dims:?}"
        )));
    }
    if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidMesh(format!(
            "all lengths must be positive and finite, got {lengths:?}"
        )));
    }
    let nodes_u128 =
        (dims[0] as u128 + 1) * (dims[1] as u128 + 1) * (dims[2] as u128 + 1);
    if nodes_u128 > u32::MAX as u128 {
        return Err(Error::NodeIndexOverflow {
            num_nodes: nodes_u128,
        });
    }

    let [nx, ny, nz] = dims;
    let (mx, my, mz) = (nx + 1, ny + 1, nz + 1);
    let num_nodes = mx * my * mz;
    let num_elements = nx * ny * nz;
    let spacing = [
        lengths[0] / nx as f64,
        lengths[1] / ny as f64,
        lengths[2] / nz as f64,
    ];

    let mut coords = Vec::new();
    coords
        .try_reserve_exact(num_nodes)
        .map_err(|_| Error::OutOfMemory {
            bytes: (num_nodes * 24) as u64,
            context: "mesh coordinates",
        })?;
    for k in 0..mz {
        for j in 0..my {
            for i in 0..mx {
                coords.push([
                    i as f64 * spacing[0],
                    j as f64 * spacing[1],
                    k as f64 * spacing[2],
                ]);
            }
        }
    }

    let node = |i: usize, j: usize, k: usize| (i + j * mx + k * mx * my) as u32;

    let mut node_map = Vec::new();
    node_map
        .try_reserve_exact(num_elements)
        .map_err(|_| Error::OutOfMemory {
            bytes: (num_elements * 32) as u64,
            context: "mesh connectivity",
        })?;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                node_map.push([
                    node(i, j, k),
                    node(i + 1, j, k),
                    node(i + 1, j + 1, k),
                    node(i, j + 1, k),
                    node(i, j, k + 1),
                    node(i + 1, j, k + 1),
                    node(i + 1, j + 1, k + 1),
                    node(i, j + 1, k + 1),
                ]);
            }
        }
    }

    let mut mesh = Mesh {
        dims,
        lengths,
        num_nodes,
        num_elements,
        coords,
        node_map,
        boundary_nodes: Vec::new(),
    };
    mesh.boundary_nodes = boundary_node_set(&mesh);
    Ok(mesh)
}

/// Returns the sorted set of node indices with any lattice coordinate at 0
/// or its maximum (the box surface).
pub fn boundary_node_set(mesh: &Mesh) -> Vec<u32> {
    let [nx, ny, nz] = mesh.dims;
    let (mx, my, mz) = (nx + 1, ny + 1, nz + 1);
    let mut set = Vec::new();
    let mut n = 0u32;
    for k in 0..mz {
        for j in 0..my {
            for i in 0..mx {
                if i == 0 || i == nx || j == 0 || j == ny || k == 0 || k == nz {
                    set.push(n);
                }
                n += 1;
            }
        }
    }
    set
}

impl Mesh {
    /// Element spacing per direction (all elements are identical boxes).
    pub fn spacing(&self) -> Vec3 {
        [
            self.lengths[0] / self.dims[0] as f64,
            self.lengths[1] / self.dims[1] as f64,
            self.lengths[2] / self.dims[2] as f64,
        ]
    }

    /// Gathers the corner coordinates of one element.
    #[inline]
    pub fn element_corners(&self, element: usize) -> [Vec3; 8] {
        let row = &self.node_map[element];
        let mut corners = [[0.0; 3]; 8];
        for (c, &n) in corners.iter_mut().zip(row.iter()) {
            *c = self.coords[n as usize];
        }
        corners
    }

    /// Partitions elements into eight independent sets by lattice parity.
    ///
    /// Two elements in the same set never share a node, so scatter-adds from
    /// different elements of one set touch disjoint output entries.
    pub fn color_sets(&self) -> [Vec<u32>; 8] {
        let [nx, ny, _] = self.dims;
        let mut sets: [Vec<u32>; 8] = Default::default();
        for e in 0..self.num_elements {
            let i = e % nx;
            let j = (e / nx) % ny;
            let k = e / (nx * ny);
            let color = (i % 2) + 2 * (j % 2) + 4 * (k % 2);
            sets[color].push(e as u32);
        }
        sets
    }

    /// Writes the plain-text debug dump: a header line with counts, one
    /// `node x y z` line per node, then one `elem n0..n7` line per element.
    pub fn write_debug<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "mesh {} {} {} nodes {} elements {}",
            self.dims[0], self.dims[1], self.dims[2], self.num_nodes, self.num_elements
        )?;
        for c in &self.coords {
            writeln!(w, "node {} {} {}", c[0], c[1], c[2])?;
        }
        for row in &self.node_map {
            write!(w, "elem")?;
            for n in row {
                write!(w, " {n}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mesh_is_a_single_cube() {
        let mesh = build_box_mesh([1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(mesh.num_nodes, 8);
        assert_eq!(mesh.num_elements, 1);
        assert_eq!(mesh.boundary_nodes.len(), 8);
    }

    #[test]
    fn million_element_counts() {
        // Counts only; do not build the mesh here.
        let dims = [100usize, 100, 100];
        let nodes = (dims[0] + 1) * (dims[1] + 1) * (dims[2] + 1);
        assert_eq!(dims[0] * dims[1] * dims[2], 1_000_000);
        assert_eq!(nodes, 1_030_301);
    }

    #[test]
    fn connectivity_of_first_element_on_2x1x1() {
        let mesh = build_box_mesh([2, 1, 1], [2.0, 1.0, 1.0]).unwrap();
        assert_eq!(mesh.node_map[0], [0, 1, 4, 3, 6, 7, 10, 9]);
        assert_eq!(mesh.node_map[1], [1, 2, 5, 4, 7, 8, 11, 10]);
    }

    #[test]
    fn boundary_counts() {
        let mesh = build_box_mesh([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(mesh.num_nodes, 27);
        assert_eq!(mesh.boundary_nodes.len(), 26);
        // The one interior node is the center of the lattice.
        assert!(!mesh.boundary_nodes.contains(&13));
    }

    #[test]
    fn node_map_entries_are_valid_and_distinct() {
        let mesh = build_box_mesh([3, 2, 4], [1.0, 2.0, 0.5]).unwrap();
        for row in &mesh.node_map {
            let mut seen = row.to_vec();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 8, "duplicate node in {row:?}");
            assert!(row.iter().all(|&n| (n as usize) < mesh.num_nodes));
        }
    }

    #[test]
    fn node_incidence_sums_to_eight_per_element() {
        for dims in [[1, 1, 1], [3, 2, 4], [5, 5, 5]] {
            let mesh = build_box_mesh(dims, [1.0, 1.0, 1.0]).unwrap();
            let mut incidence = vec![0usize; mesh.num_nodes];
            for row in &mesh.node_map {
                for &n in row {
                    incidence[n as usize] += 1;
                }
            }
            let total: usize = incidence.iter().sum();
            assert_eq!(total, 8 * mesh.num_elements);
            // Corner of the box belongs to exactly one element.
            assert_eq!(incidence[0], 1);
        }
    }

    #[test]
    fn coordinates_reconstruct_from_lattice_indices() {
        let dims = [4usize, 3, 2];
        let lengths = [1.5, 0.9, 2.0];
        let mesh = build_box_mesh(dims, lengths).unwrap();
        let s = mesh.spacing();
        let mut n = 0;
        for k in 0..=dims[2] {
            for j in 0..=dims[1] {
                for i in 0..=dims[0] {
                    let expect = [i as f64 * s[0], j as f64 * s[1], k as f64 * s[2]];
                    assert_eq!(mesh.coords[n], expect);
                    n += 1;
                }
            }
        }
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            build_box_mesh([0, 1, 1], [1.0, 1.0, 1.0]),
            Err(Error::InvalidMesh(_))
        ));
        assert!(matches!(
            build_box_mesh([1, 1, 1], [1.0, -1.0, 1.0]),
            Err(Error::InvalidMesh(_))
        ));
        // 100k^3 elements would need ~1e15 nodes: index overflow, detected
        // before any allocation.
        assert!(matches!(
            build_box_mesh([100_000, 100_000, 100_000], [1.0, 1.0, 1.0]),
            Err(Error::NodeIndexOverflow { .. })
        ));
    }

    #[test]
    fn color_sets_are_node_disjoint() {
        let mesh = build_box_mesh([3, 4, 2], [1.0, 1.0, 1.0]).unwrap();
        let sets = mesh.color_sets();
        let total: usize = sets.iter().map(|s| s.len()).sum();
        assert_eq!(total, mesh.num_elements);
        for set in &sets {
            let mut seen = std::collections::HashSet::new();
            for &e in set {
                for &n in &mesh.node_map[e as usize] {
                    assert!(seen.insert(n), "color set shares node {n}");
                }
            }
        }
    }

    #[test]
    fn debug_dump_has_expected_line_count() {
        let mesh = build_box_mesh([2, 1, 1], [1.0, 1.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        mesh.write_debug(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + mesh.num_nodes + mesh.num_elements);
        assert!(text.starts_with("mesh 2 1 1 nodes 12 elements 2"));
    }
}
