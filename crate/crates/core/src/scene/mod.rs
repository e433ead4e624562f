//! Domain types for kits, objects and poses, and the procedural generators
//! behind the train/test kit families.

pub mod io;
pub mod kit;
pub mod pose;
pub mod shape;
pub mod state;

pub use kit::{generate_kit, Cavity, Kit, KitGenParams, KitSpec, ObjectSpec, ShapeId};
pub use pose::{wrap_angle, Pose2};
pub use shape::{generate_shape, ShapeMask, ShapeParams};
pub use state::{scatter_objects, ObjectLocation, ObjectState, SceneState, Workspace};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("shape parameters: {0}")]
    ShapeParams(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("kit invariant violated: {0}")]
    KitInvariant(String),
    #[error("scene invariant violated: {0}")]
    StateInvariant(String),
    #[error("scatter failed: {0}")]
    Scatter(String),
    #[error("kit io: {0}")]
    Io(String),
}
