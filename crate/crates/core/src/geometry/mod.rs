//! Mesh representation and geometry processing: icosphere templates, uniform
//! Laplacians, surface and slice sampling, triangle quality, self-intersection
//! detection, isotropic remeshing, shape normalization, and OBJ/PLY I/O.

pub mod icosphere;
pub mod intersect;
pub mod laplacian;
pub mod mesh;
pub mod obj;
pub mod quality;
pub mod remesh;
pub mod sampling;
pub mod vec3;

pub use icosphere::icosphere;
pub use intersect::{
    self_intersecting_faces, self_intersection_fraction, self_intersection_fraction_bruteforce,
    FaceBvh,
};
pub use laplacian::{uniform_laplacian, LaplacianFlavor, LaplacianMatrix};
pub use mesh::{denormalize_shape, normalize_shape, TriMesh};
pub use obj::{read_obj, read_ply_points, write_obj, write_ply_points};
pub use quality::{triangle_quality_loss, triangle_quality_loss_grad};
pub use remesh::isotropic_remesh;
pub use sampling::{
    plane_mesh_intersection_samples, plane_mesh_segments, sample_surface, sample_surface_points,
    Plane, SliceSample, SurfaceSample,
};
pub use vec3::{Rotation, Vec3};
