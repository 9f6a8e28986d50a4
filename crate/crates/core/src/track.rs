//! Euclidean clustering of dynamic points, centroid association across
//! frames, and constant-velocity Kalman filtering per object.
//!
//! With a constant-velocity transition and a position-only measurement both
//! models are linear, so the extended filter reduces exactly to the ordinary
//! Kalman filter implemented here.

use crate::geometry::{BBox, Point, Vector};
use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("measurement is not finite")]
    NonFiniteMeasurement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub points: Vec<Point>,
    pub centroid: Point,
    pub bbox: BBox,
}

impl Cluster {
    pub fn from_points(points: Vec<Point>) -> Option<Cluster> {
        let bbox = BBox::from_points(&points)?;
        let sum = points.iter().fold(Vector::zeros(), |acc, p| acc + p.coords);
        let centroid = Point::from(sum / points.len() as f64);
        Some(Cluster { points, centroid, bbox })
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the graph joining points closer than `radius`.
///
/// Components smaller than `min_points` are dropped as noise. Clusters come
/// back sorted by their lexicographically smallest point, so the partition
/// does not depend on input order.
pub fn cluster_points(points: &[Point], radius: f64, min_points: usize) -> Vec<Cluster> {
    assert!(radius > 0.0, "cluster radius must be positive");
    let key = |p: &Point| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut sets = DisjointSet::new(points.len());
    for (i, p) in points.iter().enumerate() {
        let (kx, ky) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = buckets.get(&(kx + dx, ky + dy)) {
                    for &j in bucket {
                        if j > i && (points[j] - p).norm_squared() <= r2 {
                            sets.union(i, j);
                        }
                    }
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<Point>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        groups.entry(sets.find(i)).or_default().push(*p);
    }
    let lex = |a: &Point, b: &Point| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y));
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .filter(|g| g.len() >= min_points.max(1))
        .map(|mut g| {
            g.sort_by(lex);
            Cluster::from_points(g).expect("nonempty group")
        })
        .collect();
    clusters.sort_by(|a, b| lex(&a.points[0], &b.points[0]));
    clusters
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// (cluster index, track index) pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_clusters: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

/// Greedy globally-nearest pairing of cluster centroids with predicted track
/// positions: the smallest remaining distance within `threshold` is committed
/// first.
pub fn associate(centroids: &[Point], predicted: &[Point], threshold: f64) -> Assignment {
    assert!(threshold > 0.0, "match threshold must be positive");
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, c) in centroids.iter().enumerate() {
        for (m, t) in predicted.iter().enumerate() {
            let d = (c - t).norm();
            if d <= threshold {
                pairs.push((d, i, m));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut cluster_used = vec![false; centroids.len()];
    let mut track_used = vec![false; predicted.len()];
    let mut out = Assignment::default();
    for (_, i, m) in pairs {
        if !cluster_used[i] && !track_used[m] {
            cluster_used[i] = true;
            track_used[m] = true;
            out.matches.push((i, m));
        }
    }
    out.matches.sort_unstable();
    out.unmatched_clusters = (0..centroids.len()).filter(|&i| !cluster_used[i]).collect();
    out.unmatched_tracks = (0..predicted.len()).filter(|&m| !track_used[m]).collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackParams {
    /// Clustering distance (m).
    pub cluster_radius: f64,
    pub min_points: usize,
    /// Maximum centroid distance for association (m).
    pub match_threshold: f64,
    /// Tracks missing for more than this many frames are dropped.
    pub max_missed: u32,
    /// Associated frames before a track is reported downstream.
    pub confirm_hits: u32,
    /// Process noise density on position (m²/s).
    pub process_noise_pos: f64,
    /// Process noise density on velocity (m²/s³).
    pub process_noise_vel: f64,
    /// Position measurement variance (m²).
    pub measurement_noise: f64,
    /// Velocity variance of a freshly spawned track (m²/s²).
    pub initial_velocity_variance: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            cluster_radius: 0.3,
            min_points: 3,
            match_threshold: 0.6,
            max_missed: 5,
            confirm_hits: 2,
            process_noise_pos: 0.01,
            process_noise_vel: 0.01,
            measurement_noise: 0.02,
            initial_velocity_variance: 4.0,
        }
    }
}

/// One moving object. State is (x, y, vx, vy).
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub bbox: BBox,
    /// Frames since creation.
    pub age: u32,
    /// Consecutive frames without an associated cluster.
    pub missed: u32,
    /// Frames with an associated cluster, including the spawning one.
    pub hits: u32,
}

fn measurement_matrix() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

impl Track {
    /// Spawns at the cluster centroid with zero velocity and a wide velocity
    /// prior; a single frame carries no velocity information.
    pub fn spawn(id: u64, cluster: &Cluster, params: &TrackParams) -> Track {
        let r = params.measurement_noise;
        let v = params.initial_velocity_variance;
        Track {
            id,
            state: Vector4::new(cluster.centroid.x, cluster.centroid.y, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(r, r, v, v)),
            bbox: cluster.bbox,
            age: 0,
            missed: 0,
            hits: 1,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> Vector {
        Vector::new(self.state[2], self.state[3])
    }

    /// Constant-velocity prediction over `dt`.
    pub fn kf_predict(&mut self, dt: f64, params: &TrackParams) {
        assert!(dt >= 0.0, "prediction step must be nonnegative");
        if dt == 0.0 {
            return;
        }
        let mut f = Matrix4::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let q = Matrix4::from_diagonal(&Vector4::new(
            params.process_noise_pos,
            params.process_noise_pos,
            params.process_noise_vel,
            params.process_noise_vel,
        )) * dt;
        self.state = f * self.state;
        let p = f * self.covariance * f.transpose() + q;
        self.covariance = (p + p.transpose()) * 0.5;
    }

    /// Position-only Kalman update (Joseph form).
    ///
    /// A non-finite measurement leaves the state untouched and counts as a
    /// missed frame.
    pub fn kf_update(&mut self, z: &Point, params: &TrackParams) -> Result<(), TrackError> {
        if !z.x.is_finite() || !z.y.is_finite() {
            self.missed += 1;
            return Err(TrackError::NonFiniteMeasurement);
        }
        let h = measurement_matrix();
        let r = Matrix2::identity() * params.measurement_noise;
        let innovation = Vector2::new(z.x, z.y) - h * self.state;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().expect("innovation covariance is positive definite");
        let k = self.covariance * h.transpose() * s_inv;
        self.state += k * innovation;
        let i_kh = Matrix4::identity() - k * h;
        let p = i_kh * self.covariance * i_kh.transpose() + k * r * k.transpose();
        self.covariance = (p + p.transpose()) * 0.5;
        Ok(())
    }

    /// Predicted centroids every `step` seconds up to `horizon`, without
    /// measurement updates. The current position is not included.
    pub fn predict_path(&self, horizon: f64, step: f64) -> Vec<Point> {
        assert!(horizon > 0.0 && step > 0.0);
        let n = (horizon / step + 1e-9).floor() as usize;
        let p = self.position();
        let v = self.velocity();
        (1..=n).map(|k| p + v * (k as f64 * step)).collect()
    }
}

/// Serializable view of a track for traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSnapshot {
    pub id: u64,
    pub position: Point,
    pub velocity: Vector,
    pub bbox: BBox,
    pub age: u32,
    pub missed: u32,
    pub hits: u32,
}

impl From<&Track> for TrackSnapshot {
    fn from(t: &Track) -> Self {
        TrackSnapshot {
            id: t.id,
            position: t.position(),
            velocity: t.velocity(),
            bbox: t.bbox,
            age: t.age,
            missed: t.missed,
            hits: t.hits,
        }
    }
}

impl TrackSnapshot {
    /// Rebuilds a track carrying this snapshot's mean state. The covariance is
    /// not recorded and comes back as identity.
    pub fn to_track(&self) -> Track {
        Track {
            id: self.id,
            state: Vector4::new(self.position.x, self.position.y, self.velocity.x, self.velocity.y),
            covariance: Matrix4::identity(),
            bbox: self.bbox,
            age: self.age,
            missed: self.missed,
            hits: self.hits,
        }
    }
}

/// Multi-object tracker: predict, associate, update, spawn, prune.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: TrackParams,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackParams) -> Self {
        Tracker {
            params,
            tracks: Vec::new(),
            next_id: 1,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Tracks that have been associated often enough to be trusted.
    pub fn confirmed(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(move |t| t.hits >= self.params.confirm_hits)
    }

    pub fn step(&mut self, clusters: &[Cluster], dt: f64) {
        let params = self.params;
        for t in &mut self.tracks {
            t.kf_predict(dt, &params);
            t.age += 1;
        }
        let centroids: Vec<Point> = clusters.iter().map(|c| c.centroid).collect();
        let predicted: Vec<Point> = self.tracks.iter().map(Track::position).collect();
        let assignment = associate(&centroids, &predicted, params.match_threshold);

        for &(ci, ti) in &assignment.matches {
            let t = &mut self.tracks[ti];
            if t.kf_update(&clusters[ci].centroid, &params).is_ok() {
                t.missed = 0;
                t.hits += 1;
                t.bbox = clusters[ci].bbox;
            }
        }
        for &ti in &assignment.unmatched_tracks {
            self.tracks[ti].missed += 1;
        }
        self.tracks.retain(|t| t.missed <= params.max_missed);
        for &ci in &assignment.unmatched_clusters {
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track::spawn(id, &clusters[ci], &params));
        }
    }
}
