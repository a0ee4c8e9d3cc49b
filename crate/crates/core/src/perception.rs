//! Synthetic RGB-D target sensing.
//!
//! A geometric pinhole projection plus a configurable noise/miss model
//! stands in for the flower detector. Everything downstream of the
//! detection (depth association, camera → body → world transforms and
//! temporal fusion) is the same as for a real detector.
//!
//! Camera frame convention: Z along the optical axis, X right, Y down.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{rotate, rotate_inverse, Rotation, Vec3};
use crate::state::FullState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("invalid detection: {0}")]
    InvalidDetection(&'static str),
}

/// Pinhole intrinsics plus the camera pose in the UAV body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    #[serde(rename = "fx_px")]
    pub fx: f64,
    #[serde(rename = "fy_px")]
    pub fy: f64,
    #[serde(rename = "cx_px")]
    pub cx: f64,
    #[serde(rename = "cy_px")]
    pub cy: f64,
    #[serde(rename = "width_px")]
    pub width: u32,
    #[serde(rename = "height_px")]
    pub height: u32,
    /// Camera origin in the body frame.
    #[serde(rename = "mount_translation_m")]
    pub translation: Vec3,
    /// Camera-to-body rotation.
    #[serde(rename = "mount_rotation_wxyz")]
    pub rotation: Rotation,
    /// Depth sensing range.
    #[serde(rename = "max_range_m")]
    pub max_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            translation: Vec3::new(0.1, 0.0, -0.05),
            rotation: forward_looking(),
            max_range: 4.0,
        }
    }
}

/// Camera-to-body rotation of a camera looking along body +x:
/// camera Z → body +x, camera X → body −y, camera Y → body −z.
pub fn forward_looking() -> Rotation {
    #[rustfmt::skip]
    let m = Matrix3::new(
        0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0,
        0.0, -1.0, 0.0,
    );
    Rotation::from_unit_quaternion(UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)))
}

impl CameraModel {
    /// Identity extrinsics: camera frame coincides with the body frame.
    pub fn body_aligned(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            translation: Vec3::zeros(),
            rotation: Rotation::identity(),
            max_range: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err("focal lengths must be positive");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err("principal point must lie inside the image");
        }
        if !(self.max_range > 0.0) {
            return Err("max range must be positive");
        }
        Ok(())
    }

    fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }

    pub fn world_to_camera(&self, point: &Vec3, uav: &FullState) -> Vec3 {
        let body = rotate_inverse(&uav.rotation, &(point - uav.p));
        rotate_inverse(&self.rotation, &(body - self.translation))
    }

    pub fn camera_to_body(&self, point: &Vec3) -> Vec3 {
        self.translation + rotate(&self.rotation, point)
    }
}

/// Flower center in pixels with associated depth (camera Z, metres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    #[serde(rename = "pixel_std_px")]
    pub pixel_std: f64,
    /// Depth noise std as a fraction of depth.
    #[serde(rename = "depth_rel_std")]
    pub depth_rel_std: f64,
    #[serde(rename = "miss_probability")]
    pub miss_prob: f64,
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        Self { pixel_std: 0.0, depth_rel_std: 0.0, miss_prob: 0.0 }
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { pixel_std: 2.0, depth_rel_std: 0.02, miss_prob: 0.05 }
    }
}

/// Target position in the UAV and world frames, with the UAV pose used to
/// relate them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEstimate {
    pub position_uav: Vec3,
    pub position_world: Vec3,
    pub observations: u32,
    pub fresh: bool,
    /// Sim time of the latest fused observation.
    pub stamp: f64,
    pub uav_position: Vec3,
    pub uav_rotation: Rotation,
}

impl TargetEstimate {
    pub fn age(&self, now: f64) -> f64 {
        now - self.stamp
    }

    /// Recomputes the fresh flag for the given time.
    pub fn refreshed(mut self, now: f64, fresh_window: f64) -> Self {
        self.fresh = self.age(now) <= fresh_window;
        self
    }
}

/// Ideal projection of a world point. `None` when the point is behind the
/// camera, beyond range, or outside the image.
pub fn project_target(target_world: &Vec3, uav: &FullState, cam: &CameraModel) -> Option<Detection> {
    let pc = cam.world_to_camera(target_world, uav);
    if !(pc.z > 0.0) || pc.z > cam.max_range {
        return None;
    }
    let u = cam.cx + cam.fx * pc.x / pc.z;
    let v = cam.cy + cam.fy * pc.y / pc.z;
    cam.in_bounds(u, v).then_some(Detection { u, v, depth: pc.z, valid: true })
}

/// Applies pixel/depth noise and random misses. Always consumes four draws
/// from `rng` so that the stream position does not depend on the outcome.
pub fn corrupt_detection<R: Rng + ?Sized>(
    d: &Detection,
    noise: &NoiseParams,
    cam: &CameraModel,
    rng: &mut R,
) -> Option<Detection> {
    let miss: f64 = rng.random();
    let nu: f64 = rng.sample(StandardNormal);
    let nv: f64 = rng.sample(StandardNormal);
    let nd: f64 = rng.sample(StandardNormal);
    if !d.valid || miss < noise.miss_prob {
        return None;
    }
    let out = Detection {
        u: d.u + noise.pixel_std * nu,
        v: d.v + noise.pixel_std * nv,
        depth: d.depth * (1.0 + noise.depth_rel_std * nd),
        valid: true,
    };
    (out.depth > 0.0 && cam.in_bounds(out.u, out.v)).then_some(out)
}

/// Back-projects a detection through the camera and UAV pose.
pub fn localize_target(
    d: &Detection,
    cam: &CameraModel,
    uav: &FullState,
    time: f64,
) -> Result<TargetEstimate, PerceptionError> {
    if !d.valid {
        return Err(PerceptionError::InvalidDetection("flagged invalid"));
    }
    if !(d.depth > 0.0) || !d.depth.is_finite() {
        return Err(PerceptionError::InvalidDetection("non-positive depth"));
    }
    if !cam.in_bounds(d.u, d.v) {
        return Err(PerceptionError::InvalidDetection("pixel outside image"));
    }
    let pc = Vec3::new((d.u - cam.cx) * d.depth / cam.fx, (d.v - cam.cy) * d.depth / cam.fy, d.depth);
    let position_uav = cam.camera_to_body(&pc);
    Ok(TargetEstimate {
        position_uav,
        position_world: uav.p + rotate(&uav.rotation, &position_uav),
        observations: 1,
        fresh: true,
        stamp: time,
        uav_position: uav.p,
        uav_rotation: uav.rotation,
    })
}

/// Exponential moving average of the world position. The UAV-frame
/// position is re-derived from the fused world position and the pose of
/// the newest observation.
pub fn fuse_estimate(prev: Option<&TargetEstimate>, obs: &TargetEstimate, alpha: f64) -> TargetEstimate {
    let Some(prev) = prev else {
        return TargetEstimate { observations: 1, fresh: true, ..*obs };
    };
    let position_world = prev.position_world * (1.0 - alpha) + obs.position_world * alpha;
    TargetEstimate {
        position_uav: rotate_inverse(&obs.uav_rotation, &(position_world - obs.uav_position)),
        position_world,
        observations: prev.observations.saturating_add(1),
        fresh: true,
        stamp: obs.stamp,
        uav_position: obs.uav_position,
        uav_rotation: obs.uav_rotation,
    }
}

/// Projects every target and keeps the detection nearest the image center.
/// Returns the detection and the index of the target that produced it.
pub fn observe_nearest_center(targets: &[Vec3], uav: &FullState, cam: &CameraModel) -> Option<(usize, Detection)> {
    targets
        .iter()
        .enumerate()
        .filter_map(|(i, t)| project_target(t, uav, cam).map(|d| (i, d)))
        .min_by(|(_, a), (_, b)| {
            let da = (a.u - cam.cx).hypot(a.v - cam.cy);
            let db = (b.u - cam.cx).hypot(b.v - cam.cy);
            da.total_cmp(&db)
        })
}
