//! Ground-truth annotation for tracked-camera datasets: pivot and hand-eye
//! calibration, tip-based object registration, stream synchronization, error
//! propagation, depth/mask rendering and a deterministic session simulator.
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod bvh;
pub mod calib;
pub mod error;
pub mod geom;
pub mod io;
pub mod pipeline;
pub mod registration;
pub mod render;
pub mod shapes;
pub mod sim;
pub mod sync;

pub use error::{Error, Result};
pub use geom::{FrameId, RigidTransform, Trajectory, Vec3};
pub use registration::{PointCloud, TriangleMesh};
