//! Synthetic vertex noise for experiments and tests.

use crate::mesh::{Mesh, MeshError};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Displace every vertex along an isotropic random direction by a Gaussian
/// magnitude with standard deviation `level * mean edge length`.
///
/// The same `seed` always produces the same mesh: vertices are perturbed in
/// index order, each drawing its direction before its magnitude. Rebuilding
/// can fail if a displacement collapses a triangle, which the error reports.
pub fn add_gaussian_noise(mesh: &Mesh, level: f64, seed: u64) -> Result<Mesh, MeshError> {
    assert!(level >= 0.0, "noise level must not be negative");
    let sigma = level * mesh.mean_edge_length();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let vertices = mesh
        .vertices()
        .iter()
        .map(|p| {
            let dir = loop {
                let d = Vector3::new(draw(), draw(), draw());
                // A zero vector is astronomically unlikely but would poison
                // the normalization; resample instead of propagating NaN.
                if d.norm_squared() > 1e-24 {
                    break d.normalize();
                }
            };
            let magnitude: f64 = sigma * draw();
            p + magnitude * dir
        })
        .collect();
    mesh.with_vertices(vertices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn same_seed_same_mesh() {
        let mesh = shapes::icosphere(1);
        let a = add_gaussian_noise(&mesh, 0.3, 42).unwrap();
        let b = add_gaussian_noise(&mesh, 0.3, 42).unwrap();
        for (pa, pb) in a.vertices().iter().zip(b.vertices()) {
            assert_eq!(pa, pb);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let mesh = shapes::icosphere(1);
        let a = add_gaussian_noise(&mesh, 0.3, 1).unwrap();
        let b = add_gaussian_noise(&mesh, 0.3, 2).unwrap();
        assert!(a.vertices().iter().zip(b.vertices()).any(|(pa, pb)| pa != pb));
    }

    #[test]
    fn zero_level_is_identity() {
        let mesh = shapes::tetrahedron();
        let out = add_gaussian_noise(&mesh, 0.0, 9).unwrap();
        for (pa, pb) in out.vertices().iter().zip(mesh.vertices()) {
            assert_eq!(pa, pb);
        }
    }

    #[test]
    fn displacement_scale_tracks_level() {
        let mesh = shapes::quad_sphere(8);
        let level = 0.2;
        let noisy = add_gaussian_noise(&mesh, level, 77).unwrap();
        let sigma = level * mesh.mean_edge_length();
        let mean_sq: f64 = noisy
            .vertices()
            .iter()
            .zip(mesh.vertices())
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / mesh.vertex_count() as f64;
        // E[d^2] = sigma^2 for a Gaussian magnitude on a unit direction.
        let ratio = mean_sq / (sigma * sigma);
        assert!((0.8..1.25).contains(&ratio), "observed ratio {ratio}");
    }
}
