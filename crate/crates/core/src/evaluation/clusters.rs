//! High-error clusters in the interior APE map.

use std::path::PathBuf;

use crate::geometry::{DomainTag, Point2};
use crate::network::{load_checkpoint, ModelParams};
use crate::physics::PhysicsConfig;
use crate::training::{Dataset, TruthModel};

use super::{evaluate, EvaluationError, PointSelection};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterSettings {
    /// Points with APE strictly above this percentile are flagged.
    pub percentile: f64,
    /// Link radius as a multiple of the median nearest-neighbour spacing.
    pub radius_factor: f64,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self {
            percentile: 90.0,
            radius_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub members: Vec<usize>,
    /// Member count times the area per interior point (m^2).
    pub area: f64,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSnapshot {
    pub epoch: usize,
    pub threshold: f64,
    pub radius: f64,
    pub clusters: Vec<Cluster>,
    pub ape: Vec<f64>,
}

impl ClusterSnapshot {
    pub fn count(&self) -> usize {
        self.clusters.len()
    }

    pub fn total_area(&self) -> f64 {
        self.clusters.iter().map(|c| c.area).sum()
    }
}

/// Linear-interpolation percentile, `p` in [0, 100].
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn dist(a: Point2, b: Point2) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Median distance from each point to its nearest neighbour; 0 below two points.
pub fn median_spacing(points: &[Point2]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let nn: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| dist(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    percentile(&nn, 50.0)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the flagged points under the radius graph.
/// Returns the APE threshold, the link radius and the clusters, largest first.
pub fn error_clusters(
    points: &[Point2],
    ape: &[f64],
    settings: &ClusterSettings,
    cell_area: f64,
) -> (f64, f64, Vec<Cluster>) {
    let threshold = percentile(ape, settings.percentile);
    let radius = settings.radius_factor * median_spacing(points);
    let flagged: Vec<usize> = (0..ape.len()).filter(|&i| ape[i] > threshold).collect();
    let mut parent: Vec<usize> = (0..flagged.len()).collect();
    for a in 0..flagged.len() {
        for b in a + 1..flagged.len() {
            if dist(points[flagged[a]], points[flagged[b]]) <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for a in 0..flagged.len() {
        let r = find(&mut parent, a);
        groups.entry(r).or_default().push(flagged[a]);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .map(|members| Cluster {
            area: members.len() as f64 * cell_area,
            members,
        })
        .collect();
    clusters.sort_by(|a, b| b.size().cmp(&a.size()).then(a.members[0].cmp(&b.members[0])));
    (threshold, radius, clusters)
}

/// Cluster analysis of the interior APE map of one condition for each
/// `(epoch, params)` pair. `fluid_area` is shared evenly by the interior
/// points to give cluster areas.
pub fn cluster_snapshot(
    snapshots: &[(usize, ModelParams)],
    dataset: &Dataset,
    condition: usize,
    truth: &TruthModel,
    physics: &PhysicsConfig,
    fluid_area: f64,
    settings: &ClusterSettings,
) -> Result<Vec<ClusterSnapshot>, EvaluationError> {
    let single = Dataset {
        cloud: dataset.cloud.clone(),
        conditions: vec![dataset.conditions[condition].clone()],
        observations: vec![dataset.observations[condition].clone()],
        displacements: vec![dataset.displacements[condition].clone()],
        split: dataset.split,
    };
    let pts = dataset.cloud.points(DomainTag::PressureAcoustic);
    let area = fluid_area / pts.len().max(1) as f64;
    let mut out = Vec::with_capacity(snapshots.len());
    for (epoch, params) in snapshots {
        let report = evaluate(params, &single, truth, physics, PointSelection::All)?;
        let ape = report.conditions[0].ape[DomainTag::PressureAcoustic].clone();
        let (threshold, radius, clusters) = error_clusters(&pts, &ape, settings, area);
        out.push(ClusterSnapshot {
            epoch: *epoch,
            threshold,
            radius,
            clusters,
            ape,
        });
    }
    Ok(out)
}

/// Loads `(epoch, path)` checkpoints; a missing file is an error.
pub fn load_snapshots(paths: &[(usize, PathBuf)]) -> Result<Vec<(usize, ModelParams)>, EvaluationError> {
    paths
        .iter()
        .map(|(e, p)| {
            if !p.exists() {
                return Err(EvaluationError::MissingCheckpoint(p.display().to_string()));
            }
            Ok((*e, load_checkpoint(p)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Point2> {
        (0..n * n)
            .map(|i| Point2::new((i % n) as f64 * 0.1, (i / n) as f64 * 0.1))
            .collect()
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert!((percentile(&v, 90.0) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn spacing_of_grid() {
        assert!((median_spacing(&grid(5)) - 0.1).abs() < 1e-12);
        assert_eq!(median_spacing(&grid(1)), 0.0);
    }

    #[test]
    fn perfect_predictions_have_no_clusters() {
        let pts = grid(6);
        let (_, _, c) = error_clusters(&pts, &vec![0.0; 36], &ClusterSettings::default(), 0.01);
        assert!(c.is_empty());
    }

    #[test]
    fn single_outlier_is_one_cluster() {
        let pts = grid(6);
        let mut ape = vec![0.0; 36];
        ape[14] = 3.0;
        let (_, _, c) = error_clusters(&pts, &ape, &ClusterSettings::default(), 0.01);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec![14]);
        assert!((c[0].area - 0.01).abs() < 1e-15);
    }

    #[test]
    fn separated_groups_are_distinct() {
        let pts = grid(10);
        let mut ape = vec![0.0; 100];
        // two blobs far apart, 10 points flagged in total
        for i in [0, 1, 10, 11, 2] {
            ape[i] = 1.0;
        }
        for i in [88, 89, 98, 99, 97] {
            ape[i] = 2.0;
        }
        let (_, radius, c) = error_clusters(&pts, &ape, &ClusterSettings::default(), 1.0);
        assert!((radius - 0.2).abs() < 1e-12);
        assert_eq!(c.len(), 2);
        assert_eq!(c.iter().map(Cluster::size).sum::<usize>(), 10);
    }

    #[test]
    fn missing_checkpoint_is_reported() {
        let err = load_snapshots(&[(200, PathBuf::from("/nonexistent/ckpt_200.bin"))]).unwrap_err();
        assert!(matches!(err, EvaluationError::MissingCheckpoint(_)));
    }
}
