//! Saliency-driven attention loop.
//!
//! Feature maps are combined as a weighted sum, gated by the fadeout map
//! (inhibition of return) and optionally by a pointing-derived manipulation
//! map. The highest peak becomes the next fixation.

use serde::{Deserialize, Serialize};

use crate::config::AttentionConfig;
use crate::error::{Error, Result};
use crate::grid::{Cell, Grid, GridGeometry};
use crate::types::Color;
use crate::worldsim::{Channel, FeatureMapSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMark {
    pub channel: Channel,
    pub applied_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    pub weights: [f64; Channel::ALL.len()],
    pub fadeout: Grid,
    pub bias_active: Option<BiasMark>,
    pub last_fixation: Option<Cell>,
    cfg: AttentionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub cell: Cell,
    pub world: [f64; 3],
    pub score: f64,
    pub sim_time: u64,
}

impl AttentionState {
    pub fn new(rows: usize, cols: usize, cfg: AttentionConfig) -> Self {
        AttentionState {
            weights: [cfg.w_default; Channel::ALL.len()],
            fadeout: Grid::filled(rows, cols, 1.0),
            bias_active: None,
            last_fixation: None,
            cfg,
        }
    }

    pub fn config(&self) -> &AttentionConfig {
        &self.cfg
    }

    pub fn weight(&self, channel: Channel) -> f64 {
        self.weights[channel.index()]
    }

    pub fn set_weight(&mut self, channel: Channel, w: f64) {
        self.weights[channel.index()] = w.clamp(0.0, self.cfg.w_max);
    }
}

/// Cell-wise product of the motion-difference and skin maps.
pub fn moving_skin(motion: &Grid, skin: &Grid) -> Result<Grid> {
    motion.hadamard(skin)
}

/// `(sum_c w_c * map_c) * fadeout`, then `* manipulation` when given.
pub fn fuse(
    maps: &FeatureMapSet,
    moving_skin: &Grid,
    state: &AttentionState,
    manipulation: Option<&Grid>,
) -> Result<Grid> {
    let dims = maps.dims();
    let check = |g: &Grid| {
        if g.dims() != dims {
            Err(Error::DimMismatch(dims, g.dims()))
        } else {
            Ok(())
        }
    };
    check(moving_skin)?;
    check(&state.fadeout)?;
    if let Some(m) = manipulation {
        check(m)?;
    }
    let mut out = Grid::zeros(dims.0, dims.1);
    for channel in Channel::ALL {
        let w = state.weight(channel);
        if w == 0.0 {
            continue;
        }
        let map = if channel == Channel::MovingSkin { moving_skin } else { maps.get(channel) };
        for (acc, v) in out.as_mut_slice().iter_mut().zip(map.as_slice()) {
            *acc += w * v;
        }
    }
    for (acc, f) in out.as_mut_slice().iter_mut().zip(state.fadeout.as_slice()) {
        *acc *= f;
    }
    if let Some(m) = manipulation {
        for (acc, g) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *acc *= g;
        }
    }
    Ok(out)
}

/// Argmax of the attention grid; ties go to the lowest `(row, col)`.
/// Returns `None` when the peak does not exceed `theta_fix`.
pub fn next_fixation(
    attention: &Grid,
    geom: &GridGeometry,
    theta_fix: f64,
    sim_time: u64,
) -> Option<Fixation> {
    let mut best: Option<(Cell, f64)> = None;
    for ((row, col), v) in attention.cells() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((Cell::new(row, col), v));
        }
    }
    let (cell, score) = best?;
    if score <= theta_fix {
        return None;
    }
    let (x, y) = geom.cell_center(cell);
    Some(Fixation { cell, world: [x, y, 0.0], score, sim_time })
}

pub fn bias_color(state: &AttentionState, color: Color, sim_time: u64) -> Result<AttentionState> {
    let channel =
        Channel::for_color(color).ok_or_else(|| Error::UnknownColor(color.to_string()))?;
    let mut next = state.clone();
    next.set_weight(channel, state.cfg.w_bias);
    next.bias_active = Some(BiasMark { channel, applied_at: sim_time });
    Ok(next)
}

/// Exponential relaxation of every weight toward `w_default`.
pub fn decay(state: &AttentionState, dt_ms: f64) -> AttentionState {
    let mut next = state.clone();
    if dt_ms <= 0.0 {
        return next;
    }
    let k = (-dt_ms / state.cfg.tau_ms).exp();
    let w0 = state.cfg.w_default;
    for w in next.weights.iter_mut() {
        *w = w0 + (*w - w0) * k;
    }
    if let Some(mark) = &next.bias_active {
        if (next.weight(mark.channel) - w0).abs() < state.cfg.bias_epsilon {
            next.bias_active = None;
        }
    }
    next
}

/// Linear recovery of every fadeout cell toward 1.0.
pub fn recover_fadeout(state: &AttentionState, dt_ms: f64) -> AttentionState {
    let mut next = state.clone();
    let step = (dt_ms / state.cfg.recovery_ms).max(0.0);
    if step > 0.0 {
        for f in next.fadeout.as_mut_slice() {
            *f = (*f + step).min(1.0);
        }
    }
    next
}

/// Recovers the fadeout map by `dt_recover_ms`, then zeroes the disc of radius
/// `fadeout_radius` cells around the fixation.
pub fn apply_fadeout(state: &AttentionState, fixation: &Fixation, dt_recover_ms: f64) -> AttentionState {
    let mut next = recover_fadeout(state, dt_recover_ms);
    let r = state.cfg.fadeout_radius;
    let (rows, cols) = next.fadeout.dims();
    let c = fixation.cell;
    let reach = r.ceil() as usize;
    for row in c.row.saturating_sub(reach)..(c.row + reach + 1).min(rows) {
        for col in c.col.saturating_sub(reach)..(c.col + reach + 1).min(cols) {
            if Cell::new(row, col).distance(c) <= r {
                next.fadeout.set(row, col, 0.0);
            }
        }
    }
    next.last_fixation = Some(c);
    next
}
