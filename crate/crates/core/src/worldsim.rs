//! Ground-truth table scene and the synthetic low-level feature maps rendered from it.
//!
//! Objects are rasterized as rotated rectangles sampled at cell centers. Blob
//! channels (intensity, saturation) take 1.0 inside a footprint and 0.8 on its
//! boundary ring, so the saliency peak of an object sits in its interior. The
//! per-color maps are 1.0 over the whole footprint. The edge channel answers
//! weakly (0.2) on the ring.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Grid, GridGeometry};
use crate::types::{Color, Kind, Size};

pub const INTERIOR: f64 = 1.0;
pub const RING: f64 = 0.8;
pub const EDGE_RESPONSE: f64 = 0.2;
pub const WOODEN_SATURATION: f64 = 0.3;
pub const HAND_INTENSITY: f64 = 0.6;
pub const HAND_RADIUS_MM: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub width: f64,
    pub height: f64,
}

impl Default for Table {
    fn default() -> Self {
        Table { width: 800.0, height: 800.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub kind: Kind,
    pub color: Color,
    pub position: [f64; 2],
    #[serde(default)]
    pub major_axis_angle: f64,
    #[serde(default = "default_size")]
    pub size: Size,
    #[serde(default)]
    pub held: bool,
}

fn default_size() -> Size {
    Size::Small
}

impl SceneObject {
    /// Whether a table point lies inside the object's rotated footprint.
    pub fn covers(&self, x: f64, y: f64) -> bool {
        let (len, wid) = self.kind.footprint_mm(self.size);
        let (dx, dy) = (x - self.position[0], y - self.position[1]);
        let (s, c) = self.major_axis_angle.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (-len / 2.0..len / 2.0).contains(&u) && (-wid / 2.0..wid / 2.0).contains(&v)
    }

    /// Footprint rasterized at cell centers.
    pub fn footprint(&self, geom: &GridGeometry) -> Vec<Cell> {
        let (len, wid) = self.kind.footprint_mm(self.size);
        let reach = 0.5 * (len * len + wid * wid).sqrt();
        let (x0, y0) = geom.clamp(self.position[0] - reach, self.position[1] - reach);
        let (x1, y1) = geom.clamp(self.position[0] + reach, self.position[1] + reach);
        let lo = geom.cell_of(x0, y0).unwrap();
        let hi = geom.cell_of(x1, y1).unwrap();
        let mut cells = Vec::new();
        for row in lo.row..=hi.row {
            for col in lo.col..=hi.col {
                let cell = Cell::new(row, col);
                let (x, y) = geom.cell_center(cell);
                if self.covers(x, y) {
                    cells.push(cell);
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub fingertip: [f64; 3],
    pub direction: [f64; 3],
    #[serde(default)]
    pub moving: bool,
    #[serde(default = "yes")]
    pub pointing: bool,
}

fn yes() -> bool {
    true
}

impl HandState {
    /// A still pointing hand whose ray meets the table at `target`.
    pub fn pointing_at(target: (f64, f64), reach_mm: f64, height_mm: f64) -> HandState {
        let fingertip = [target.0, target.1 - reach_mm, height_mm];
        let d = [0.0, reach_mm, -height_mm];
        let n = (d[1] * d[1] + d[2] * d[2]).sqrt();
        HandState {
            fingertip,
            direction: [0.0, d[1] / n, d[2] / n],
            moving: false,
            pointing: true,
        }
    }

    fn validated(mut self) -> Result<HandState> {
        if self.fingertip[2] <= 0.0 {
            return Err(Error::InvalidHand("fingertip must be above the table".into()));
        }
        let n = self.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidHand("direction must be non-zero".into()));
        }
        for d in &mut self.direction {
            *d /= n;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub table: Table,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub hand: Option<HandState>,
    #[serde(default)]
    pub sim_time: u64,
}

impl Scene {
    pub fn geometry(&self, rows: usize, cols: usize) -> GridGeometry {
        GridGeometry::new(self.table.width, self.table.height, rows, cols)
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_mut(&mut self, id: &str) -> Result<&mut SceneObject> {
        self.objects
            .iter_mut()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    /// First unheld object whose footprint contains the center of `cell`.
    pub fn object_at_cell(&self, geom: &GridGeometry, cell: Cell) -> Option<&SceneObject> {
        let (x, y) = geom.cell_center(cell);
        self.objects.iter().find(|o| !o.held && o.covers(x, y))
    }

    /// Nearest unheld object to a table point.
    pub fn nearest_unheld(&self, x: f64, y: f64) -> Option<(&SceneObject, f64)> {
        self.objects
            .iter()
            .filter(|o| !o.held)
            .map(|o| (o, (o.position[0] - x).hypot(o.position[1] - y)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn held_object(&self) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.held)
    }
}

/// Validates a scenario scene section.
pub fn load_scene(mut description: Scene) -> Result<Scene> {
    let table = description.table;
    if table.width <= 0.0 || table.height <= 0.0 {
        return Err(Error::Scenario("table dimensions must be positive".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for obj in &mut description.objects {
        if !seen.insert(obj.id.clone()) {
            return Err(Error::DuplicateObject(obj.id.clone()));
        }
        let [x, y] = obj.position;
        if !(0.0..=table.width).contains(&x) || !(0.0..=table.height).contains(&y) {
            return Err(Error::OffTable(obj.id.clone()));
        }
        obj.major_axis_angle = obj.major_axis_angle.rem_euclid(PI);
    }
    description.hand = description.hand.map(HandState::validated).transpose()?;
    Ok(description)
}

/// Scripted change to the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorldEvent {
    HandAppear { hand: HandState },
    HandMove { hand: HandState },
    HandVanish,
    ObjectPickup { id: String },
    ObjectPlace { id: String, position: [f64; 2] },
}

pub fn apply_event(scene: &Scene, event: &WorldEvent) -> Result<Scene> {
    let mut next = scene.clone();
    match event {
        WorldEvent::HandAppear { hand } | WorldEvent::HandMove { hand } => {
            next.hand = Some(hand.clone().validated()?);
        }
        WorldEvent::HandVanish => next.hand = None,
        WorldEvent::ObjectPickup { id } => {
            let obj = next.object_mut(id)?;
            if obj.held {
                return Err(Error::AlreadyHeld(id.clone()));
            }
            obj.held = true;
        }
        WorldEvent::ObjectPlace { id, position } => {
            let (w, h) = (next.table.width, next.table.height);
            let obj = next.object_mut(id)?;
            if !(0.0..=w).contains(&position[0]) || !(0.0..=h).contains(&position[1]) {
                return Err(Error::OffTable(id.clone()));
            }
            obj.held = false;
            obj.position = *position;
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Edges,
    ColorSaturation,
    Intensity,
    MotionDifference,
    Skin,
    Red,
    Green,
    Blue,
    Yellow,
    /// Derived by attention from motion and skin.
    MovingSkin,
}

impl Channel {
    pub const ALL: [Channel; 10] = [
        Channel::Edges,
        Channel::ColorSaturation,
        Channel::Intensity,
        Channel::MotionDifference,
        Channel::Skin,
        Channel::Red,
        Channel::Green,
        Channel::Blue,
        Channel::Yellow,
        Channel::MovingSkin,
    ];
    /// Channels produced by `render`.
    pub const RENDERED: [Channel; 9] = [
        Channel::Edges,
        Channel::ColorSaturation,
        Channel::Intensity,
        Channel::MotionDifference,
        Channel::Skin,
        Channel::Red,
        Channel::Green,
        Channel::Blue,
        Channel::Yellow,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn for_color(color: Color) -> Option<Channel> {
        match color {
            Color::Red => Some(Channel::Red),
            Color::Green => Some(Channel::Green),
            Color::Blue => Some(Channel::Blue),
            Color::Yellow => Some(Channel::Yellow),
            Color::Wooden => None,
        }
    }
}

/// The rendered low-level feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapSet {
    maps: Vec<Grid>,
}

impl FeatureMapSet {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMapSet { maps: vec![Grid::zeros(rows, cols); Channel::RENDERED.len()] }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.maps[0].dims()
    }

    /// Panics for `Channel::MovingSkin`, which is not a rendered channel.
    pub fn get(&self, channel: Channel) -> &Grid {
        &self.maps[channel.index()]
    }

    pub fn get_mut(&mut self, channel: Channel) -> &mut Grid {
        &mut self.maps[channel.index()]
    }

    pub fn color(&self, color: Color) -> Option<&Grid> {
        Channel::for_color(color).map(|c| self.get(c))
    }
}

fn raise(grid: &mut Grid, cell: Cell, value: f64) {
    if grid.get(cell.row, cell.col) < value {
        grid.set(cell.row, cell.col, value);
    }
}

/// Cells of the hand footprint: cell centers within `HAND_RADIUS_MM` of the fingertip's table projection.
pub fn hand_footprint(hand: &HandState, geom: &GridGeometry) -> Vec<Cell> {
    let (hx, hy) = (hand.fingertip[0], hand.fingertip[1]);
    let mut cells = Vec::new();
    for row in 0..geom.rows {
        for col in 0..geom.cols {
            let cell = Cell::new(row, col);
            let (x, y) = geom.cell_center(cell);
            if (x - hx).hypot(y - hy) <= HAND_RADIUS_MM {
                cells.push(cell);
            }
        }
    }
    cells
}

pub fn render(scene: &Scene, geom: &GridGeometry, previous: Option<&FeatureMapSet>) -> FeatureMapSet {
    let mut maps = FeatureMapSet::zeros(geom.rows, geom.cols);
    for obj in scene.objects.iter().filter(|o| !o.held) {
        let cells = obj.footprint(geom);
        let inside: std::collections::BTreeSet<Cell> = cells.iter().copied().collect();
        let saturation = if obj.color.is_chromatic() { 1.0 } else { WOODEN_SATURATION };
        for &cell in &cells {
            let on_ring = neighbours4(cell, geom).len() < 4
                || neighbours4(cell, geom).iter().any(|n| !inside.contains(n));
            let level = if on_ring { RING } else { INTERIOR };
            raise(maps.get_mut(Channel::Intensity), cell, level);
            raise(maps.get_mut(Channel::ColorSaturation), cell, level * saturation);
            if on_ring {
                raise(maps.get_mut(Channel::Edges), cell, EDGE_RESPONSE);
            }
            if let Some(ch) = Channel::for_color(obj.color) {
                raise(maps.get_mut(ch), cell, 1.0);
            }
        }
    }
    if let Some(hand) = &scene.hand {
        for cell in hand_footprint(hand, geom) {
            raise(maps.get_mut(Channel::Skin), cell, 1.0);
            raise(maps.get_mut(Channel::Intensity), cell, HAND_INTENSITY);
        }
    }
    if let Some(prev) = previous {
        if prev.dims() == maps.dims() {
            let now = maps.get(Channel::Intensity).clone();
            let before = prev.get(Channel::Intensity);
            let motion = maps.get_mut(Channel::MotionDifference);
            for (i, v) in motion.as_mut_slice().iter_mut().enumerate() {
                *v = (now.as_slice()[i] - before.as_slice()[i]).abs().clamp(0.0, 1.0);
            }
        }
    }
    maps
}

fn neighbours4(cell: Cell, geom: &GridGeometry) -> Vec<Cell> {
    let mut out = Vec::with_capacity(4);
    if cell.row > 0 {
        out.push(Cell::new(cell.row - 1, cell.col));
    }
    if cell.row + 1 < geom.rows {
        out.push(Cell::new(cell.row + 1, cell.col));
    }
    if cell.col > 0 {
        out.push(Cell::new(cell.row, cell.col - 1));
    }
    if cell.col + 1 < geom.cols {
        out.push(Cell::new(cell.row, cell.col + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> GridGeometry {
        GridGeometry::new(800.0, 800.0, 64, 64)
    }

    fn obj(id: &str, kind: Kind, color: Color, x: f64, y: f64) -> SceneObject {
        SceneObject {
            id: id.into(),
            kind,
            color,
            position: [x, y],
            major_axis_angle: 0.0,
            size: Size::Small,
            held: false,
        }
    }

    fn scene(objects: Vec<SceneObject>) -> Scene {
        load_scene(Scene { table: Table::default(), objects, hand: None, sim_time: 0 }).unwrap()
    }

    #[test]
    fn empty_scene_renders_zero_skin_and_motion() {
        let s = scene(vec![]);
        let m = render(&s, &geom(), None);
        assert!(m.get(Channel::Skin).is_all_zero());
        assert!(m.get(Channel::MotionDifference).is_all_zero());
    }

    #[test]
    fn off_table_and_duplicate_rejected() {
        let bad = Scene {
            table: Table::default(),
            objects: vec![obj("c", Kind::Cube, Color::Red, 900.0, 400.0)],
            hand: None,
            sim_time: 0,
        };
        assert!(matches!(load_scene(bad), Err(Error::OffTable(id)) if id == "c"));
        let dup = Scene {
            table: Table::default(),
            objects: vec![
                obj("c", Kind::Cube, Color::Red, 100.0, 400.0),
                obj("c", Kind::Cube, Color::Blue, 300.0, 400.0),
            ],
            hand: None,
            sim_time: 0,
        };
        assert!(matches!(load_scene(dup), Err(Error::DuplicateObject(_))));
    }

    #[test]
    fn static_scene_has_no_motion_on_second_render() {
        let s = scene(vec![obj("c", Kind::Cube, Color::Red, 200.0, 200.0)]);
        let first = render(&s, &geom(), None);
        let second = render(&s, &geom(), Some(&first));
        assert!(second.get(Channel::MotionDifference).is_all_zero());
    }

    #[test]
    fn color_map_selective_to_footprint() {
        let g = geom();
        let cube = obj("c", Kind::Cube, Color::Red, 206.25, 206.25);
        let s = scene(vec![cube.clone()]);
        let m = render(&s, &g, None);
        let fp: std::collections::BTreeSet<Cell> = cube.footprint(&g).into_iter().collect();
        assert_eq!(fp.len(), 9);
        for ((r, c), v) in m.get(Channel::Red).cells() {
            assert_eq!(v != 0.0, fp.contains(&Cell::new(r, c)));
        }
        assert!(m.get(Channel::Blue).is_all_zero());
        // interior beats ring in every blob channel
        let center = g.cell_of(206.25, 206.25).unwrap();
        assert_eq!(m.get(Channel::Intensity).get(center.row, center.col), INTERIOR);
        assert_eq!(m.get(Channel::Intensity).get(center.row - 1, center.col), RING);
        assert_eq!(m.get(Channel::Edges).get(center.row, center.col), 0.0);
    }

    #[test]
    fn pickup_hides_object_and_place_moves_it() {
        let g = geom();
        let s = scene(vec![obj("cube1", Kind::Cube, Color::Red, 400.0, 400.0)]);
        let held = apply_event(&s, &WorldEvent::ObjectPickup { id: "cube1".into() }).unwrap();
        assert!(render(&held, &g, None).get(Channel::Intensity).is_all_zero());
        assert!(matches!(
            apply_event(&held, &WorldEvent::ObjectPickup { id: "cube1".into() }),
            Err(Error::AlreadyHeld(_))
        ));
        assert!(matches!(
            apply_event(&s, &WorldEvent::ObjectPickup { id: "nope".into() }),
            Err(Error::UnknownObject(_))
        ));
        let placed = apply_event(
            &held,
            &WorldEvent::ObjectPlace { id: "cube1".into(), position: [200.0, 300.0] },
        )
        .unwrap();
        let m = render(&placed, &g, None);
        // cell-index oracle: floor(x / cell_mm)
        let (row, col) = ((300.0f64 / 12.5).floor() as usize, (200.0f64 / 12.5).floor() as usize);
        assert!(m.get(Channel::Intensity).get(row, col) > 0.0);
        assert!(placed.objects[0].footprint(&g).contains(&Cell::new(row, col)));
        assert!(render(&s, &g, None).get(Channel::Intensity).get(row, col) == 0.0);
    }

    #[test]
    fn hand_appear_lights_skin() {
        let g = geom();
        let s = scene(vec![]);
        let hand = HandState::pointing_at((400.0, 400.0), 150.0, 250.0);
        let s = apply_event(&s, &WorldEvent::HandAppear { hand }).unwrap();
        let m = render(&s, &g, None);
        assert!(m.get(Channel::Skin).count_nonzero() > 0);
        let dir = s.hand.unwrap().direction;
        let n: f64 = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn moved_hand_motion_is_symmetric_difference() {
        let g = geom();
        let h0 = HandState {
            fingertip: [300.0, 300.0, 200.0],
            direction: [0.0, 0.0, -1.0],
            moving: true,
            pointing: false,
        };
        let mut h1 = h0.clone();
        h1.fingertip[0] += 50.0;
        let s0 = apply_event(&scene(vec![]), &WorldEvent::HandAppear { hand: h0.clone() }).unwrap();
        let s1 = apply_event(&s0, &WorldEvent::HandMove { hand: h1.clone() }).unwrap();
        let m0 = render(&s0, &g, None);
        let m1 = render(&s1, &g, Some(&m0));
        // per-cell oracle computed from the disc definitions directly
        let inside = |h: &HandState, r: usize, c: usize| {
            let (x, y) = ((c as f64 + 0.5) * 12.5, (r as f64 + 0.5) * 12.5);
            (x - h.fingertip[0]).hypot(y - h.fingertip[1]) <= HAND_RADIUS_MM
        };
        for ((r, c), v) in m1.get(Channel::MotionDifference).cells() {
            let expected = if inside(&h0, r, c) != inside(&h1, r, c) { HAND_INTENSITY } else { 0.0 };
            assert_eq!(v, expected, "cell ({r},{c})");
        }
    }
}
