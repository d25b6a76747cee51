//! Pointing detection and projection of the pointing ray onto the table plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridGeometry};
use crate::worldsim::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointingResult {
    pub target: [f64; 2],
    pub region_radius: f64,
    pub confidence: f64,
    /// Set when the ray met the table plane outside the table and the target was clamped.
    #[serde(default)]
    pub clamped: bool,
}

/// A pointing gesture requires a still hand in pointing pose.
pub fn detect_pointing(scene: &Scene) -> Option<([f64; 3], [f64; 3])> {
    scene
        .hand
        .as_ref()
        .filter(|h| h.pointing && !h.moving)
        .map(|h| (h.fingertip, h.direction))
}

/// Intersects `origin + t * direction` with the plane z = 0 and clamps the hit into the table.
pub fn project_ray(
    origin: [f64; 3],
    direction: [f64; 3],
    geom: &GridGeometry,
    region_radius: f64,
) -> Result<PointingResult> {
    if origin[2] <= 0.0 || direction[2] >= 0.0 {
        return Err(Error::NoTableIntersection);
    }
    let t = -origin[2] / direction[2];
    let x = origin[0] + t * direction[0];
    let y = origin[1] + t * direction[1];
    let (cx, cy) = geom.clamp(x, y);
    Ok(PointingResult {
        target: [cx, cy],
        region_radius,
        confidence: 1.0,
        clamped: cx != x || cy != y,
    })
}

/// Binary region-of-interest map: 1.0 where the cell center lies inside the
/// disc, plus the cell containing the target itself.
pub fn region_to_map(result: &PointingResult, geom: &GridGeometry) -> Grid {
    let mut map = geom.zeros();
    let [tx, ty] = result.target;
    let r = result.region_radius;
    let (cw, ch) = (geom.cell_width(), geom.cell_height());
    let row_lo = (((ty - r) / ch).floor().max(0.0)) as usize;
    let row_hi = ((((ty + r) / ch).ceil()) as usize).min(geom.rows);
    let col_lo = (((tx - r) / cw).floor().max(0.0)) as usize;
    let col_hi = ((((tx + r) / cw).ceil()) as usize).min(geom.cols);
    for row in row_lo..row_hi {
        for col in col_lo..col_hi {
            let (x, y) = geom.cell_center(crate::grid::Cell::new(row, col));
            if (x - tx).hypot(y - ty) <= r {
                map.set(row, col, 1.0);
            }
        }
    }
    if let Some(cell) = geom.cell_of(tx, ty) {
        map.set(cell.row, cell.col, 1.0);
    }
    map
}
