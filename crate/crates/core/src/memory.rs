//! Short-term visual memory: fixations are clustered into object hypotheses,
//! which are confirmed once they have been fixated often enough and carry a
//! color label.

use serde::{Deserialize, Serialize};

use crate::attention::Fixation;
use crate::config::MemoryConfig;
use crate::types::{Color, Kind};

pub type HypothesisId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectHypothesis {
    pub id: HypothesisId,
    pub centroid: [f64; 2],
    pub color: Option<Color>,
    pub kind: Option<Kind>,
    pub hits: u32,
    pub last_seen: u64,
    pub confirmed: bool,
}

/// What the simulated blob detector reports at a fixation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blob {
    pub color: Color,
    pub kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    LeftOf,
    RightOf,
    InFrontOf,
    Behind,
    Near,
}

impl Relation {
    pub const ALL: [Relation; 5] =
        [Relation::LeftOf, Relation::RightOf, Relation::InFrontOf, Relation::Behind, Relation::Near];

    pub fn converse(self) -> Relation {
        match self {
            Relation::LeftOf => Relation::RightOf,
            Relation::RightOf => Relation::LeftOf,
            Relation::InFrontOf => Relation::Behind,
            Relation::Behind => Relation::InFrontOf,
            Relation::Near => Relation::Near,
        }
    }
}

/// `(a, b, rel)` reads "a is rel b".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationSet {
    pub pairs: Vec<(HypothesisId, HypothesisId, Relation)>,
}

impl RelationSet {
    pub fn holds(&self, a: HypothesisId, b: HypothesisId, rel: Relation) -> bool {
        self.pairs.iter().any(|&(x, y, r)| x == a && y == b && r == rel)
    }

    pub fn between(&self, a: HypothesisId, b: HypothesisId) -> Vec<Relation> {
        self.pairs.iter().filter(|&&(x, y, _)| x == a && y == b).map(|&(_, _, r)| r).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualMemory {
    hypotheses: Vec<ObjectHypothesis>,
    next_id: HypothesisId,
    cfg: MemoryConfig,
}

impl VisualMemory {
    pub fn new(cfg: MemoryConfig) -> Self {
        VisualMemory { hypotheses: Vec::new(), next_id: 1, cfg }
    }

    pub fn hypotheses(&self) -> &[ObjectHypothesis] {
        &self.hypotheses
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &ObjectHypothesis> {
        self.hypotheses.iter().filter(|h| h.confirmed)
    }

    pub fn get(&self, id: HypothesisId) -> Option<&ObjectHypothesis> {
        self.hypotheses.iter().find(|h| h.id == id)
    }

    pub fn integrate_fixation(&self, fixation: &Fixation, blob: Option<Blob>) -> VisualMemory {
        let mut next = self.clone();
        let (x, y) = (fixation.world[0], fixation.world[1]);
        let k_confirm = self.cfg.k_confirm;
        let nearest = next
            .hypotheses
            .iter_mut()
            .map(|h| {
                let d = (h.centroid[0] - x).hypot(h.centroid[1] - y);
                (h, d)
            })
            .filter(|(_, d)| *d <= self.cfg.r_cluster_mm)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)));
        match nearest {
            Some((h, _)) => {
                let n = h.hits as f64;
                h.hits += 1;
                h.centroid = [(h.centroid[0] * n + x) / (n + 1.0), (h.centroid[1] * n + y) / (n + 1.0)];
                h.last_seen = fixation.sim_time;
                if let Some(blob) = blob {
                    if h.color.is_some_and(|c| c != blob.color) {
                        h.hits = 1;
                    }
                    h.color = Some(blob.color);
                    h.kind = Some(blob.kind);
                }
                h.confirmed = h.hits >= k_confirm && h.color.is_some();
            }
            None => {
                let id = next.next_id;
                next.next_id += 1;
                next.hypotheses.push(ObjectHypothesis {
                    id,
                    centroid: [x, y],
                    color: blob.map(|b| b.color),
                    kind: blob.map(|b| b.kind),
                    hits: 1,
                    last_seen: fixation.sim_time,
                    confirmed: k_confirm <= 1 && blob.is_some(),
                });
            }
        }
        next
    }

    /// Drops hypotheses not seen for longer than the TTL.
    pub fn evict(&self, now: u64) -> VisualMemory {
        let mut next = self.clone();
        let ttl = self.cfg.ttl_ms;
        next.hypotheses.retain(|h| now.saturating_sub(h.last_seen) <= ttl);
        next
    }

    /// Removes one hypothesis (e.g. after its object was picked up).
    pub fn forget(&self, id: HypothesisId) -> VisualMemory {
        let mut next = self.clone();
        next.hypotheses.retain(|h| h.id != id);
        next
    }

    pub fn spatial_relations(&self, viewpoint: &Viewpoint) -> RelationSet {
        let confirmed: Vec<&ObjectHypothesis> = self.confirmed().collect();
        relations_among(&confirmed, viewpoint.seat, viewpoint.look_at, self.cfg.near_mm)
    }

    pub fn snapshot(&self, viewpoint: &Viewpoint) -> MemorySnapshot {
        MemorySnapshot {
            hypotheses: self.confirmed().cloned().collect(),
            relations: self.spatial_relations(viewpoint),
        }
    }
}

/// Where the instructor sits and where they look; relations are expressed in their frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub seat: [f64; 2],
    pub look_at: [f64; 2],
}

impl Viewpoint {
    /// Seated at the middle of the -y table edge, looking at the table center.
    pub fn front_edge(width: f64, height: f64) -> Self {
        Viewpoint { seat: [width / 2.0, 0.0], look_at: [width / 2.0, height / 2.0] }
    }
}

/// Confirmed hypotheses and their pairwise relations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub hypotheses: Vec<ObjectHypothesis>,
    pub relations: RelationSet,
}

impl MemorySnapshot {
    pub fn get(&self, id: HypothesisId) -> Option<&ObjectHypothesis> {
        self.hypotheses.iter().find(|h| h.id == id)
    }
}

/// Viewer axes: depth points from the viewpoint toward `look_at`, lateral is
/// depth rotated clockwise (the viewer's right). A direction is assigned only
/// when its component exceeds the other by a factor of at least sqrt(2).
pub fn relations_among(
    objects: &[&ObjectHypothesis],
    viewpoint: [f64; 2],
    look_at: [f64; 2],
    near_mm: f64,
) -> RelationSet {
    let mut depth = [look_at[0] - viewpoint[0], look_at[1] - viewpoint[1]];
    let n = depth[0].hypot(depth[1]);
    depth = if n > 0.0 { [depth[0] / n, depth[1] / n] } else { [0.0, 1.0] };
    let lateral = [depth[1], -depth[0]];
    let ratio = std::f64::consts::SQRT_2;
    let mut pairs = Vec::new();
    for a in objects {
        for b in objects {
            if a.id == b.id {
                continue;
            }
            // offset of a relative to b
            let d = [a.centroid[0] - b.centroid[0], a.centroid[1] - b.centroid[1]];
            let lat = d[0] * lateral[0] + d[1] * lateral[1];
            let dep = d[0] * depth[0] + d[1] * depth[1];
            if lat.abs() > 0.0 && lat.abs() >= ratio * dep.abs() {
                pairs.push((a.id, b.id, if lat > 0.0 { Relation::RightOf } else { Relation::LeftOf }));
            } else if dep.abs() > 0.0 && dep.abs() >= ratio * lat.abs() {
                // farther from the viewer means behind
                pairs.push((a.id, b.id, if dep > 0.0 { Relation::Behind } else { Relation::InFrontOf }));
            }
            if d[0].hypot(d[1]) < near_mm {
                pairs.push((a.id, b.id, Relation::Near));
            }
        }
    }
    RelationSet { pairs }
}
