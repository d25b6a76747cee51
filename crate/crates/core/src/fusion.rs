//! Bayesian fusion of verbal and visual evidence.
//!
//! Each confirmed memory hypothesis `k` is a visual object with class node
//! `O^vis_k` (color, type, size) and visual evidence `C^vis_k`, `T^vis_k`.
//! The instruction names `N` objects: the intended one (`O_io`, selected by
//! `IO`) and `N - 1` reference objects (`O_ro_j`, selected by `RO_j`), each
//! with verbal evidence nodes `C`, `T`, `S`, `Z`. A relation node `R_j`
//! connects the pose of the selected pair `(IO, RO_j)`.
//!
//! Inference is exact. The joint score of an assignment factorizes as
//! `prior(io) * L_0(io) * prod_j L_j(ro_j) * P(R_j | pose(io, ro_j))`, so the
//! MAP is found per `io` by maximizing each reference independently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::PointingResult;
use crate::language::{InstructionFrame, ObjectDescription, RelationWord};
use crate::memory::{HypothesisId, MemorySnapshot, Relation};
use crate::types::{Color, Kind, Shape, Size};

pub type Table = Vec<Vec<f64>>;

/// Conditional probability tables. Rows are indexed by the class value,
/// columns by the observed value. Tables left unset are generated from
/// `epsilon`: `1 - epsilon` on the diagonal, `epsilon` split evenly off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CptConfig {
    pub epsilon: f64,
    /// P(C | class color)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbal_color: Option<Table>,
    /// P(T | class type)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbal_type: Option<Table>,
    /// P(S | class shape)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbal_shape: Option<Table>,
    /// P(Z | class size)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbal_size: Option<Table>,
    /// P(C^vis | class color)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visual_color: Option<Table>,
    /// P(T^vis | class type)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visual_type: Option<Table>,
    /// Off-diagonal mass of the relation node.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation_epsilon: Option<f64>,
}

impl Default for CptConfig {
    fn default() -> Self {
        CptConfig {
            epsilon: 0.05,
            verbal_color: None,
            verbal_type: None,
            verbal_shape: None,
            verbal_size: None,
            visual_color: None,
            visual_type: None,
            relation_epsilon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CptName {
    VerbalColor,
    VerbalType,
    VerbalShape,
    VerbalSize,
    VisualColor,
    VisualType,
}

impl CptName {
    pub const ALL: [CptName; 6] = [
        CptName::VerbalColor,
        CptName::VerbalType,
        CptName::VerbalShape,
        CptName::VerbalSize,
        CptName::VisualColor,
        CptName::VisualType,
    ];

    pub fn dim(self) -> usize {
        match self {
            CptName::VerbalColor | CptName::VisualColor => Color::ALL.len(),
            CptName::VerbalType | CptName::VisualType => Kind::ALL.len(),
            CptName::VerbalShape => Shape::ALL.len(),
            CptName::VerbalSize => Size::ALL.len(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CptName::VerbalColor => "verbal_color",
            CptName::VerbalType => "verbal_type",
            CptName::VerbalShape => "verbal_shape",
            CptName::VerbalSize => "verbal_size",
            CptName::VisualColor => "visual_color",
            CptName::VisualType => "visual_type",
        }
    }
}

/// Diagonal `1 - eps`, off-diagonal `eps / (dim - 1)`.
pub fn noisy_identity(dim: usize, eps: f64) -> Table {
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| if r == c { 1.0 - eps } else if dim > 1 { eps / (dim - 1) as f64 } else { 0.0 })
                .collect()
        })
        .collect()
}

impl CptConfig {
    pub fn from_json_str(text: &str) -> Result<CptConfig> {
        let cpts: CptConfig = serde_json::from_str(text).map_err(|e| Error::Cpt(e.to_string()))?;
        cpts.validate()?;
        Ok(cpts)
    }

    pub fn from_file(path: &std::path::Path) -> Result<CptConfig> {
        CptConfig::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn slot(&self, name: CptName) -> &Option<Table> {
        match name {
            CptName::VerbalColor => &self.verbal_color,
            CptName::VerbalType => &self.verbal_type,
            CptName::VerbalShape => &self.verbal_shape,
            CptName::VerbalSize => &self.verbal_size,
            CptName::VisualColor => &self.visual_color,
            CptName::VisualType => &self.visual_type,
        }
    }

    pub fn set(&mut self, name: CptName, table: Table) {
        let slot = match name {
            CptName::VerbalColor => &mut self.verbal_color,
            CptName::VerbalType => &mut self.verbal_type,
            CptName::VerbalShape => &mut self.verbal_shape,
            CptName::VerbalSize => &mut self.verbal_size,
            CptName::VisualColor => &mut self.visual_color,
            CptName::VisualType => &mut self.visual_type,
        };
        *slot = Some(table);
    }

    /// The effective table, explicit or generated.
    pub fn table(&self, name: CptName) -> Table {
        self.slot(name).clone().unwrap_or_else(|| noisy_identity(name.dim(), self.epsilon))
    }

    pub fn relation_epsilon(&self) -> f64 {
        self.relation_epsilon.unwrap_or(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.epsilon) || !(0.0..0.5).contains(&self.relation_epsilon()) {
            return Err(Error::Cpt("epsilon must lie in [0, 0.5)".into()));
        }
        for name in CptName::ALL {
            let t = self.table(name);
            let dim = name.dim();
            if t.len() != dim || t.iter().any(|row| row.len() != dim) {
                return Err(Error::Cpt(format!("{} must be {dim}x{dim}", name.as_str())));
            }
            for (r, row) in t.iter().enumerate() {
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::Cpt(format!("{} row {r} has an entry outside [0, 1]", name.as_str())));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Cpt(format!("{} row {r} sums to {sum}", name.as_str())));
                }
                if row.iter().enumerate().any(|(c, &p)| c != r && p > row[r]) {
                    return Err(Error::Cpt(format!("{} row {r}: diagonal is not maximal", name.as_str())));
                }
            }
        }
        Ok(())
    }
}

/// `e^vis` for one visual object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualObject {
    pub id: HypothesisId,
    pub position: [f64; 2],
    /// C^vis_k
    pub color: Option<Color>,
    /// T^vis_k
    pub kind: Option<Kind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionNetwork {
    /// One entry per visual object, ascending by id; `n = objects.len()`.
    pub objects: Vec<VisualObject>,
    /// `e^verb`: index 0 is the intended object, `1..N` the references.
    pub verbal: Vec<ObjectDescription>,
    /// Geometric relation asserted by each `R_j`; `None` attaches no evidence.
    pub relations: Vec<Option<Relation>>,
    /// P(IO = k)
    pub prior: Vec<f64>,
    /// `likelihood[m][k]`: P(e^verb_m, e^vis_k | selector m = k) up to a
    /// constant shared by all k.
    pub likelihood: Vec<Vec<f64>>,
    /// `relation_factor[j][io][ro]` = P(R_j | pose(io, ro)).
    pub relation_factor: Vec<Vec<Vec<f64>>>,
    pub region: Option<PointingResult>,
}

impl FusionNetwork {
    pub fn n(&self) -> usize {
        self.objects.len()
    }

    /// Number of verbally referenced objects.
    #[allow(non_snake_case)]
    pub fn N(&self) -> usize {
        self.verbal.len()
    }

    pub fn evidence_count(&self, m: usize) -> usize {
        let d = &self.verbal[m];
        [d.color.is_some(), d.kind.is_some(), d.shape.is_some(), d.size.is_some()].iter().filter(|b| **b).count()
    }
}

/// Posterior over class values given one visual observation (uniform class prior).
fn class_posterior(table: &Table, observed: Option<usize>) -> Vec<f64> {
    let dim = table.len();
    match observed {
        None => vec![1.0 / dim as f64; dim],
        Some(o) => {
            let col: Vec<f64> = table.iter().map(|row| row[o]).collect();
            let z: f64 = col.iter().sum();
            if z > 0.0 {
                col.iter().map(|p| p / z).collect()
            } else {
                vec![1.0 / dim as f64; dim]
            }
        }
    }
}

/// Verbal likelihood of `desc` for a visual object.
pub fn description_likelihood(desc: &ObjectDescription, obj: &VisualObject, cpts: &CptConfig) -> f64 {
    let mut l = 1.0;
    if let Some(c) = desc.color {
        let post = class_posterior(&cpts.table(CptName::VisualColor), obj.color.map(Color::index));
        let verbal = cpts.table(CptName::VerbalColor);
        l *= post.iter().enumerate().map(|(cls, p)| p * verbal[cls][c.index()]).sum::<f64>();
    }
    if desc.kind.is_some() || desc.shape.is_some() {
        let post = class_posterior(&cpts.table(CptName::VisualType), obj.kind.map(Kind::index));
        let verbal_t = cpts.table(CptName::VerbalType);
        let verbal_s = cpts.table(CptName::VerbalShape);
        l *= Kind::ALL
            .iter()
            .map(|t| {
                let mut p = post[t.index()];
                if let Some(k) = desc.kind {
                    p *= verbal_t[t.index()][k.index()];
                }
                if let Some(s) = desc.shape {
                    p *= verbal_s[t.shape().index()][s.index()];
                }
                p
            })
            .sum::<f64>();
    }
    if let Some(z) = desc.size {
        // vision reports no size, so the class size keeps its uniform prior
        let verbal = cpts.table(CptName::VerbalSize);
        l *= Size::ALL.iter().map(|cls| verbal[cls.index()][z.index()] / Size::ALL.len() as f64).sum::<f64>();
    }
    l
}

/// P(R = rel | relations holding for the pair). The holding set gets `1 - eps`
/// split evenly; the rest shares `eps`. An empty holding set puts `1 - eps` on
/// an implicit "no relation" value.
pub fn relation_probability(rel: Relation, holding: &[Relation], eps: f64) -> f64 {
    let total = Relation::ALL.len() as f64;
    if holding.is_empty() {
        return eps / total;
    }
    if holding.contains(&rel) {
        (1.0 - eps) / holding.len() as f64
    } else {
        eps / (total - holding.len() as f64)
    }
}

/// Instantiates the network for `frame` over the confirmed hypotheses of `snapshot`.
pub fn build(
    snapshot: &MemorySnapshot,
    frame: &InstructionFrame,
    cpts: &CptConfig,
    region: Option<&PointingResult>,
) -> Result<FusionNetwork> {
    let mut objects: Vec<VisualObject> = snapshot
        .hypotheses
        .iter()
        .map(|h| VisualObject { id: h.id, position: h.centroid, color: h.color, kind: h.kind })
        .collect();
    objects.sort_by_key(|o| o.id);
    if objects.is_empty() {
        return Err(Error::NoVisualObjects);
    }
    let n = objects.len();

    let mut verbal = vec![frame.intended.clone()];
    verbal.extend(frame.references.iter().map(|r| r.object.clone()));
    let relations: Vec<Option<Relation>> = frame.references.iter().map(|r| RelationWord::geometric(r.relation)).collect();

    let prior = match region {
        None => vec![1.0 / n as f64; n],
        Some(r) => {
            let sigma2 = r.region_radius * r.region_radius;
            let d2: Vec<f64> = objects
                .iter()
                .map(|o| (o.position[0] - r.target[0]).powi(2) + (o.position[1] - r.target[1]).powi(2))
                .collect();
            // shifting by the smallest distance keeps the nearest object's weight at 1
            let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = d2.iter().map(|d| (-(d - d2_min) / (2.0 * sigma2)).exp()).collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|x| x / z).collect()
        }
    };

    let likelihood = verbal
        .iter()
        .map(|d| objects.iter().map(|o| description_likelihood(d, o, cpts)).collect())
        .collect();

    let eps = cpts.relation_epsilon();
    let relation_factor = relations
        .iter()
        .map(|rel| {
            objects
                .iter()
                .map(|a| {
                    objects
                        .iter()
                        .map(|b| match rel {
                            None => 1.0,
                            Some(rel) if a.id == b.id => relation_probability(*rel, &[], eps),
                            Some(rel) => relation_probability(*rel, &snapshot.relations.between(a.id, b.id), eps),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    Ok(FusionNetwork { objects, verbal, relations, prior, likelihood, relation_factor, region: region.cloned() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutcome {
    pub io: HypothesisId,
    pub ro: Vec<HypothesisId>,
    /// Posterior of the MAP joint assignment.
    pub posterior: f64,
    /// P(IO = k | evidence) per object, ascending id.
    pub marginals: Vec<(HypothesisId, f64)>,
}

/// Relative score difference under which two assignments count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn beats(score: f64, best: f64) -> bool {
    score > best + best.abs() * TIE_TOLERANCE
}

/// Exact MAP over `(IO, RO_1..RO_{N-1})` with `RO_j != IO`; ties (within
/// [`TIE_TOLERANCE`]) go to the lexicographically smallest id tuple.
pub fn map_inference(net: &FusionNetwork) -> Result<FusionOutcome> {
    let n = net.n();
    let refs = net.N() - 1;
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut io_mass = vec![0.0; n];
    for io in 0..n {
        let mut score = net.prior[io] * net.likelihood[0][io];
        let mut mass = score;
        let mut choice = Vec::with_capacity(refs);
        for j in 0..refs {
            let mut top: Option<(f64, usize)> = None;
            let mut sum = 0.0;
            for ro in (0..n).filter(|&ro| ro != io) {
                let s = net.likelihood[j + 1][ro] * net.relation_factor[j][io][ro];
                sum += s;
                if top.is_none_or(|(t, _)| beats(s, t)) {
                    top = Some((s, ro));
                }
            }
            match top {
                Some((s, ro)) => {
                    score *= s;
                    choice.push(ro);
                }
                None => score = 0.0,
            }
            mass *= sum;
        }
        io_mass[io] = mass;
        if choice.len() == refs && best.as_ref().is_none_or(|(b, _, _)| beats(score, *b)) {
            best = Some((score, io, choice));
        }
    }
    let z: f64 = io_mass.iter().sum();
    let Some((score, io, ro)) = best.filter(|(s, _, _)| *s > 0.0 && z > 0.0) else {
        return Err(Error::NoConsistentInterpretation);
    };
    Ok(FusionOutcome {
        io: net.objects[io].id,
        ro: ro.iter().map(|&k| net.objects[k].id).collect(),
        posterior: score / z,
        marginals: net.objects.iter().zip(&io_mass).map(|(o, m)| (o.id, m / z)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambiguity {
    Resolved,
    Ambiguous,
    None,
}

/// Compares the two largest intended-object marginals.
pub fn ambiguity_check(result: &Result<FusionOutcome>, margin: f64) -> Ambiguity {
    let Ok(outcome) = result else {
        return Ambiguity::None;
    };
    let probs: Vec<f64> = outcome.marginals.iter().map(|(_, p)| *p).collect();
    classify_posteriors(&probs, margin)
}

pub fn classify_posteriors(posteriors: &[f64], margin: f64) -> Ambiguity {
    let mut sorted = posteriors.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    match sorted.as_slice() {
        [] => Ambiguity::None,
        [best] if *best > 0.0 => Ambiguity::Resolved,
        [best, second, ..] if *best > 0.0 => {
            if best - second >= margin {
                Ambiguity::Resolved
            } else {
                Ambiguity::Ambiguous
            }
        }
        _ => Ambiguity::None,
    }
}
