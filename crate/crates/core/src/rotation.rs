use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-6;

/// Proper rotation (orthonormal, det +1), row-major.
///
/// `R` maps reference-frame coordinates to the rotated frame. In the object
/// frame the main field points along `Rᵀ·ẑ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|r| m[r][a] * m[r][b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                if (dot - want).abs() > TOL {
                    return Err(Error::InvalidRotation(format!(
                        "RᵀR[{a}][{b}] = {dot:.9}, expected {want}"
                    )));
                }
            }
        }
        let det = det3(&m);
        if (det - 1.0).abs() > TOL {
            return Err(Error::InvalidRotation(format!("determinant {det:.9}, expected +1")));
        }
        Ok(Rotation(m))
    }

    pub fn about_x(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn about_y(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn about_z(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.0
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Rotation([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let (a, b) = (&self.0, &other.0);
        let mut m = [[0.0; 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[r][k] * b[k][c]).sum();
            }
        }
        Rotation(m)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Main-field direction in the object frame, `Rᵀ·ẑ`.
    pub fn b0_direction(&self) -> [f64; 3] {
        self.transpose().apply([0.0, 0.0, 1.0])
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<[[f64; 3]; 3]> for Rotation {
    type Error = Error;
    fn try_from(m: [[f64; 3]; 3]) -> Result<Self> {
        Rotation::new(m)
    }
}

impl From<Rotation> for [[f64; 3]; 3] {
    fn from(r: Rotation) -> Self {
        r.0
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
