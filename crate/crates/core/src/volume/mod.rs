//! Voxel-grid machinery: distance transform, Sobel gradient image, trilinear
//! lookup, mesh voxelization, Dice overlap, mask-derived initialization, and
//! the `.vox3` file format.

pub mod edt;
pub mod grid;
pub mod sobel;
pub mod vox3;
pub mod voxelize;

pub use edt::{unsigned_distance_transform, unsigned_distance_transform_bruteforce};
pub use grid::{
    center_scale_from_mask, dice, robust_center_scale_from_mask, trilinear, GradientGrid,
    VoxelGrid,
};
pub use sobel::{sobel_gradient, sobel_gradient_seq};
pub use vox3::{read_vox3, write_vox3, VoxDtype};
pub use voxelize::{voxelize, voxelize_along_axis, voxelize_seq};
