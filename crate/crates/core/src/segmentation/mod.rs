//! Plane segmentation of steppable terrain.

mod contour;
mod planes;
mod torso_layer;

pub use contour::{
    closest_point_in_region, extract_boundary, point_in_polygon, point_in_region, polygon_area,
    Contour,
};
pub use planes::{
    build_plane, frame_from_normal,
    connected_components, consensus_refine, inset_boundary, planarity_check, segment,
    ConsensusParams, SegmentationParams, SegmentationResult, SegmentedPlane,
};
pub use torso_layer::torso_reference_layer;
