use nalgebra::{Matrix4, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Position, rotation and scale of a node relative to its parent.
///
/// Rotation is stored as Euler XYZ angles in degrees (x applied first), the
/// form used in manifests and scenario files. Composition goes through a
/// unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub rotation_deg: [f64; 3],
    #[serde(default = "unit_scale")]
    pub scale: [f64; 3],
}

fn unit_scale() -> [f64; 3] {
    [1.0; 3]
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        position: [0.0; 3],
        rotation_deg: [0.0; 3],
        scale: [1.0; 3],
    };

    pub fn new(position: [f64; 3], rotation_deg: [f64; 3], scale: [f64; 3]) -> Self {
        Self {
            position,
            rotation_deg,
            scale,
        }
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: [x, y, z],
            ..Self::IDENTITY
        }
    }

    pub fn is_valid(&self) -> bool {
        self.scale.iter().all(|s| s.is_finite() && *s > 0.0)
            && self.position.iter().all(|p| p.is_finite())
            && self.rotation_deg.iter().all(|r| r.is_finite())
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [x, y, z] = self.rotation_deg.map(f64::to_radians);
        UnitQuaternion::from_euler_angles(x, y, z)
    }

    /// Local-to-parent matrix: translate * rotate * scale.
    pub fn matrix(&self) -> Matrix4<f64> {
        let t = Translation3::from(Vector3::from(self.position)).to_homogeneous();
        let r = self.rotation().to_homogeneous();
        let s = Matrix4::new_nonuniform_scaling(&Vector3::from(self.scale));
        t * r * s
    }
}
