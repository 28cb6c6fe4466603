//! Monocular visual odometry with learned-depth outlier filtering, scale recovery
//! and dense mapping, plus a procedural simulator to evaluate it.

pub mod fast;
pub mod frame;
pub mod geometry;
pub mod image;
pub mod io;
pub mod losses;
pub mod map;
pub mod mapping;
pub mod metrics;
pub mod nearfar;
pub mod provider;
pub mod scale;
pub mod seed;
pub mod sim;
pub mod trajectory;
pub mod vo;

pub use geometry::{CameraIntrinsics, GeometryError, PixelPoint, PoseSE3, Sim3, Vec3};
pub use image::{DepthMap, GrayImage, SparseDepthMap, SparseSample};
pub use map::{LocalMap, MapPoint, MapPointId, TrackId};
pub use mapping::PointCloud;
pub use trajectory::Trajectory;
