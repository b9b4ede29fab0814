//! Mesh ingestion, surface sampling, normals and rigid pose estimation.

mod markers;
mod mesh;
mod rigid;
mod sampling;
pub mod shapes;

pub use markers::{
    closest_point_on_triangle, marker_objective, refine_marker_correspondence, MarkerRefinement,
    MarkerTracks, RefineOptions, SurfaceIndex,
};
pub use mesh::{load_mesh, vertex_normals, write_obj, TriMesh, DEGENERATE_AREA};
pub use rigid::{kabsch_solve, residual_rms, RigidTransform};
pub use sampling::{sample_surface, PointCloud, DEFAULT_SAMPLE_COUNT};
