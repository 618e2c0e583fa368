use serde::{Deserialize, Serialize};

use super::GraspError;

/// Principal in-plane orientation of a point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    /// Angle of the first principal axis, in [0, pi).
    pub yaw: f64,
    /// Set when the spread is nearly isotropic and `yaw` is a placeholder 0.
    pub low_confidence: bool,
}

/// Eigenvalue ratio below which the orientation is considered undefined.
pub const ISOTROPY_RATIO: f64 = 1.05;

pub fn pose_pca(points: &[[f64; 2]]) -> Result<PoseEstimate, GraspError> {
    let distinct = points.iter().skip(1).any(|p| *p != points[0]);
    if points.len() < 2 || !distinct {
        return Err(GraspError::TooFewDistinctPoints);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let half_trace = (sxx + syy) / 2.0;
    let spread = (((sxx - syy) / 2.0).powi(2) + sxy * sxy).sqrt();
    let (major, minor) = (half_trace + spread, half_trace - spread);
    let isotropic = minor > 0.0 && major / minor < ISOTROPY_RATIO;
    if isotropic || spread == 0.0 {
        return Ok(PoseEstimate {
            yaw: 0.0,
            low_confidence: true,
        });
    }
    let mut yaw = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if yaw < 0.0 {
        yaw += std::f64::consts::PI;
    }
    if yaw >= std::f64::consts::PI {
        yaw -= std::f64::consts::PI;
    }
    Ok(PoseEstimate {
        yaw,
        low_confidence: false,
    })
}
