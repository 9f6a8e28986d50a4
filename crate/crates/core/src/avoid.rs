//! Avoidance point selection: candidate points are drawn from the potential
//! map, kept when they can be reached along a straight feasible segment, and
//! ranked by a weighted safety/distance/potential/hysteresis score.

use crate::field::PotentialMap;
use crate::geometry::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AvoidError {
    #[error("no feasible avoidance point among the candidates")]
    NoFeasiblePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub safety: f64,
    pub distance: f64,
    pub potential: f64,
    pub hysteresis: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            safety: 1.0,
            distance: 0.2,
            potential: 0.05,
            hysteresis: 0.3,
        }
    }
}

impl ScoreWeights {
    pub fn scaled(&self, c: f64) -> ScoreWeights {
        ScoreWeights {
            safety: self.safety * c,
            distance: self.distance * c,
            potential: self.potential * c,
            hysteresis: self.hysteresis * c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvoidParams {
    pub weights: ScoreWeights,
    pub n_samples: usize,
}

impl Default for AvoidParams {
    fn default() -> Self {
        AvoidParams {
            weights: ScoreWeights::default(),
            n_samples: 200,
        }
    }
}

/// Raw score terms, kept for audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTerms {
    /// Clearance to the nearest claimed cell.
    pub safety: f64,
    /// Distance from the start point.
    pub distance: f64,
    /// Potential at the candidate.
    pub potential: f64,
    /// Distance from the previous selection, zero without one.
    pub hysteresis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: Point,
    pub q_score: f64,
    pub terms: ScoreTerms,
}

/// How candidate points are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CandidateSource {
    /// `n` uniform draws over the map window from a ChaCha8 stream seeded with `seed`.
    Sampled { n: usize, seed: u64 },
    /// Every feasible cell center.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceDecision {
    pub candidates: Vec<Candidate>,
    pub selected: Candidate,
    pub x_prev: Option<Point>,
    pub weights: ScoreWeights,
    pub source: CandidateSource,
}

/// True iff every cell the segment enters with positive length is feasible.
pub fn segment_feasible(map: &PotentialMap, a: &Point, b: &Point) -> bool {
    map.frame.walk(a, b).all(|(c, _)| map.cell_feasible(c))
}

/// Reachability test that also admits segments starting inside the
/// infeasible set: the leading run of infeasible cells must never lose
/// signed clearance, and every cell after it must be feasible. For a
/// feasible start this is exactly [`segment_feasible`].
pub fn segment_escapes(map: &PotentialMap, a: &Point, b: &Point) -> bool {
    let mut escaping = true;
    let mut last = f64::NEG_INFINITY;
    for (c, _) in map.frame.walk(a, b) {
        let Some(clear) = map.cell_clearance(c) else {
            return false;
        };
        if map.cell_feasible(c) {
            escaping = false;
        } else if !escaping || clear < last {
            return false;
        }
        last = clear;
    }
    true
}

/// Scores `x` against the start, the previous selection and the map.
pub fn score_candidate(
    x: &Point,
    x_start: &Point,
    x_prev: Option<&Point>,
    map: &PotentialMap,
    weights: &ScoreWeights,
) -> Candidate {
    let safety = map.distance_to_obstacles(x).unwrap_or(0.0);
    let potential = map.potential_at(x).unwrap_or(f64::INFINITY);
    let distance = (x - x_start).norm();
    let hysteresis = x_prev.map_or(0.0, |p| (x - p).norm());
    let q_score = weights.safety * safety
        - weights.distance * distance
        - weights.potential * potential
        - weights.hysteresis * hysteresis;
    Candidate {
        point: *x,
        q_score,
        terms: ScoreTerms {
            safety,
            distance,
            potential,
            hysteresis,
        },
    }
}

/// Draws `n_samples` uniform points over the map window and keeps those in
/// feasible cells that are reachable from `x_start`.
pub fn sample_candidates(map: &PotentialMap, x_start: &Point, n_samples: usize, rng: &mut impl Rng) -> Vec<Point> {
    let lo = map.frame.min_corner();
    let hi = map.frame.max_corner();
    let mut out = Vec::new();
    for _ in 0..n_samples {
        let p = Point::new(
            lo.x + rng.random::<f64>() * (hi.x - lo.x),
            lo.y + rng.random::<f64>() * (hi.y - lo.y),
        );
        if map.is_feasible(&p) && segment_escapes(map, x_start, &p) {
            out.push(p);
        }
    }
    out
}

/// Every feasible cell center reachable from `x_start`.
pub fn exhaustive_candidates(map: &PotentialMap, x_start: &Point) -> Vec<Point> {
    map.frame
        .cells()
        .filter(|c| map.cell_feasible(*c))
        .map(|c| map.frame.center(c))
        .filter(|p| segment_escapes(map, x_start, p))
        .collect()
}

/// Ranking used for selection: higher score, then smaller distance from the
/// start, then lexicographically smaller point.
pub fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.q_score.partial_cmp(&b.q_score) {
        Some(Ordering::Greater) => return true,
        Some(Ordering::Less) => return false,
        _ => {}
    }
    match a.terms.distance.partial_cmp(&b.terms.distance) {
        Some(Ordering::Less) => return true,
        Some(Ordering::Greater) => return false,
        _ => {}
    }
    (a.point.x, a.point.y) < (b.point.x, b.point.y)
}

pub fn select_avoidance_point(
    map: &PotentialMap,
    x_start: &Point,
    x_prev: Option<&Point>,
    weights: &ScoreWeights,
    source: CandidateSource,
) -> Result<AvoidanceDecision, AvoidError> {
    let points = match source {
        CandidateSource::Sampled { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_candidates(map, x_start, n, &mut rng)
        }
        CandidateSource::Exhaustive => exhaustive_candidates(map, x_start),
    };
    let candidates: Vec<Candidate> = points
        .iter()
        .map(|p| score_candidate(p, x_start, x_prev, map, weights))
        .collect();
    let mut best: Option<&Candidate> = None;
    for c in &candidates {
        if best.is_none_or(|b| better(c, b)) {
            best = Some(c);
        }
    }
    let selected = *best.ok_or(AvoidError::NoFeasiblePoint)?;
    Ok(AvoidanceDecision {
        candidates,
        selected,
        x_prev: x_prev.copied(),
        weights: *weights,
        source,
    })
}
