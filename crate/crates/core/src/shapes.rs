//! Procedural meshes used by the tests, benchmarks, and examples.
//!
//! All shapes come out counter-clockwise with outward normals and are welded
//! (no duplicate vertices along seams).

use crate::mesh::Mesh;
use nalgebra::Point3;
use std::collections::HashMap;

/// A single equilateral triangle in the z = 0 plane.
pub fn single_triangle() -> Mesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
    ];
    Mesh::build(vertices, vec![[0, 1, 2]]).expect("triangle is valid")
}

/// A regular tetrahedron centered at the origin.
pub fn tetrahedron() -> Mesh {
    let vertices = vec![
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(1.0, -1.0, -1.0),
        Point3::new(-1.0, 1.0, -1.0),
        Point3::new(-1.0, -1.0, 1.0),
    ];
    let triangles = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    Mesh::build(vertices, triangles).expect("tetrahedron is valid")
}

/// A unit sphere from `subdivisions` rounds of icosahedron refinement;
/// `20 * 4^subdivisions` faces.
pub fn icosphere(subdivisions: usize) -> Mesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Point3::from(nalgebra::Vector3::from_column_slice(v).normalize()))
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
        let mut split = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
            let key = if a < b { [a, b] } else { [b, a] };
            *midpoint.entry(key).or_insert_with(|| {
                let p = (vertices[a].coords + vertices[b].coords).normalize();
                vertices.push(Point3::from(p));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = split(a, b, &mut vertices);
            let bc = split(b, c, &mut vertices);
            let ca = split(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }

    Mesh::build(vertices, triangles).expect("icosphere is valid")
}

/// A flat square patch with a border: `2 * nx * ny` faces over `[0, 1]^2`.
pub fn grid_patch(nx: usize, ny: usize) -> Mesh {
    assert!(nx >= 1 && ny >= 1);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point3::new(i as f64 / nx as f64, j as f64 / ny as f64, 0.0));
        }
    }
    let at = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            triangles.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    Mesh::build(vertices, triangles).expect("grid patch is valid")
}

/// A closed cube spanning `[-1, 1]^3` with each side split into an
/// `n x n` grid of quads; `12 n^2` faces, welded along the cube edges.
pub fn subdivided_cube(n: usize) -> Mesh {
    assert!(n >= 1);
    // Each side maps its grid steps (i, j) onto the integer lattice
    // [0, n]^3, with axes picked so the winding faces outward. Welding on
    // lattice coordinates is exact: a seam point has one integer identity
    // no matter which side produced it.
    type SideMap = fn(usize, usize, usize) -> [usize; 3];
    let sides: [SideMap; 6] = [
        |i, j, n| [i, j, n],     // +z
        |i, j, n| [n - i, j, 0], // -z
        |i, j, n| [n, j, n - i], // +x
        |i, j, _| [0, j, i],     // -x
        |i, j, n| [i, n, n - j], // +y
        |i, j, _| [i, 0, j],     // -y
    ];
    let coord = |k: usize| 2.0 * (k as f64) / (n as f64) - 1.0;

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut ids: HashMap<[usize; 3], usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(12 * n * n);
    for side in sides {
        let mut corner = |i: usize, j: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
            let lattice = side(i, j, n);
            *ids.entry(lattice).or_insert_with(|| {
                vertices.push(Point3::new(coord(lattice[0]), coord(lattice[1]), coord(lattice[2])));
                vertices.len() - 1
            })
        };
        for j in 0..n {
            for i in 0..n {
                let p00 = corner(i, j, &mut vertices);
                let p10 = corner(i + 1, j, &mut vertices);
                let p11 = corner(i + 1, j + 1, &mut vertices);
                let p01 = corner(i, j + 1, &mut vertices);
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
    }
    Mesh::build(vertices, triangles).expect("subdivided cube is valid")
}

/// A unit sphere triangulated by projecting [`subdivided_cube`] radially;
/// `12 n^2` faces.
pub fn quad_sphere(n: usize) -> Mesh {
    let cube = subdivided_cube(n);
    let vertices: Vec<Point3<f64>> =
        cube.vertices().iter().map(|p| Point3::from(p.coords.normalize())).collect();
    cube.with_vertices(vertices).expect("projection keeps faces non-degenerate")
}
