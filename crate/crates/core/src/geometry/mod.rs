//! Point clouds for rectangular fluid domains with an embedded solid.
//!
//! The fluid occupies an outer rectangle minus a closed solid rectangle. The
//! outer edges carry the plane-wave radiation condition and the solid surface
//! carries the acoustic-structure coupling condition. The top face of the
//! solid is the metasurface, split into equal-width subunits.

mod io;

pub use io::{read_cloud_csv, read_observations_csv, write_cloud_csv, write_observations_csv};

use std::ops::{Index, IndexMut};
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance below which a point counts as lying on a boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point ({x}, {y}) lies strictly inside the solid")]
    InsideSolid { x: f64, y: f64 },
    #[error("point ({x}, {y}) lies outside the fluid domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("point ({x}, {y}) is not on a boundary")]
    NotOnBoundary { x: f64, y: f64 },
    #[error("invalid case configuration: {0}")]
    InvalidConfig(String),
    #[error("point targets infeasible: {0}")]
    Infeasible(String),
    #[error("requested {requested} {domain} observations but only {available} points exist")]
    TooManyObservations {
        domain: DomainTag,
        requested: usize,
        available: usize,
    },
    #[error("truth for {domain} has {got} values, cloud has {expected} points")]
    TruthLength {
        domain: DomainTag,
        got: usize,
        expected: usize,
    },
    #[error("malformed file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(&self, v: [f64; 2]) -> f64 {
        self.x * v[0] + self.y * v[1]
    }
}

/// Computational domain a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    PressureAcoustic,
    PlaneWaveRadiation,
    AcousticStructureCoupling,
}

impl DomainTag {
    pub const ALL: [DomainTag; 3] = [
        DomainTag::PressureAcoustic,
        DomainTag::PlaneWaveRadiation,
        DomainTag::AcousticStructureCoupling,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::PressureAcoustic => "pressure_acoustic",
            DomainTag::PlaneWaveRadiation => "plane_wave_radiation",
            DomainTag::AcousticStructureCoupling => "acoustic_structure_coupling",
        }
    }
}

impl std::fmt::Display for DomainTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainTag {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| GeometryError::Parse(format!("unknown domain tag `{s}`")))
    }
}

/// One value per computational domain, indexed by [`DomainTag`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerDomain<T>(pub [T; 3]);

impl<T> PerDomain<T> {
    pub fn new(pressure: T, radiation: T, coupling: T) -> Self {
        Self([pressure, radiation, coupling])
    }

    pub fn iter(&self) -> impl Iterator<Item = (DomainTag, &T)> {
        DomainTag::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(DomainTag, &T) -> U) -> PerDomain<U> {
        PerDomain([
            f(DomainTag::ALL[0], &self.0[0]),
            f(DomainTag::ALL[1], &self.0[1]),
            f(DomainTag::ALL[2], &self.0[2]),
        ])
    }
}

impl<T> Index<DomainTag> for PerDomain<T> {
    type Output = T;
    fn index(&self, tag: DomainTag) -> &T {
        &self.0[tag.index()]
    }
}

impl<T> IndexMut<DomainTag> for PerDomain<T> {
    fn index_mut(&mut self, tag: DomainTag) -> &mut T {
        &mut self.0[tag.index()]
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn contains_closed(&self, p: Point2, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1 + tol && p.y >= self.y0 - tol && p.y <= self.y1 + tol
    }

    fn contains_strict(&self, p: Point2, tol: f64) -> bool {
        p.x > self.x0 + tol && p.x < self.x1 - tol && p.y > self.y0 + tol && p.y < self.y1 - tol
    }

    /// Euclidean distance from `p` to the closed rectangle.
    fn distance(&self, p: Point2) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }
}

/// Boundary point with its outward normal and unit tangent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample {
    pub point: Point2,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    /// Metasurface subunit for points on the solid's top face.
    pub subunit: Option<usize>,
}

/// Layout and point budget of one acoustic-structure case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub case_id: String,
    pub outer: Rect,
    /// Solid region; `None` for a fluid-only box.
    pub solid: Option<Rect>,
    /// Metasurface thickness at the top of the solid (m).
    pub metasurface_thickness: f64,
    pub subunits: usize,
    /// Target point counts per domain.
    pub counts: PerDomain<usize>,
    /// Observation points per domain.
    pub observations: PerDomain<usize>,
    /// Width of the refinement band around the solid (m).
    pub refine_band: f64,
    /// Share of interior points placed inside the refinement band.
    pub refine_fraction: f64,
}

impl CaseConfig {
    /// Constant-condition layout: 20 m x 15 m box around a 10 m x 2.08 m solid.
    pub fn case1() -> Self {
        Self {
            case_id: "case1".into(),
            outer: Rect::new(-10.0, 10.0, -4.0, 11.0),
            solid: Some(Rect::new(-5.0, 5.0, -2.0, 0.08)),
            metasurface_thickness: 0.08,
            subunits: 25,
            counts: PerDomain::new(1377, 88, 158),
            observations: PerDomain::new(30, 4, 16),
            refine_band: 3.0,
            refine_fraction: 0.25,
        }
    }

    pub fn case2() -> Self {
        Self {
            case_id: "case2".into(),
            ..Self::case1()
        }
    }

    /// Changeable-condition layout with the solid shifted right.
    pub fn case3() -> Self {
        Self {
            case_id: "case3".into(),
            outer: Rect::new(-6.0, 14.0, -4.0, 11.0),
            solid: Some(Rect::new(0.0, 10.0, -2.0, 0.08)),
            metasurface_thickness: 0.08,
            subunits: 25,
            counts: PerDomain::new(4928, 140, 554),
            observations: PerDomain::new(100, 10, 40),
            refine_band: 3.0,
            refine_fraction: 0.25,
        }
    }

    /// Fluid-only unit square with interior points and observations only.
    pub fn manufactured(interior: usize, observations: usize) -> Self {
        Self {
            case_id: "manufactured".into(),
            outer: Rect::new(0.0, 1.0, 0.0, 1.0),
            solid: None,
            metasurface_thickness: 0.0,
            subunits: 0,
            counts: PerDomain::new(interior, 0, 0),
            observations: PerDomain::new(observations, 0, 0),
            refine_band: 0.0,
            refine_fraction: 0.0,
        }
    }

    pub fn total_points(&self) -> usize {
        self.counts.0.iter().sum()
    }

    pub fn total_observations(&self) -> usize {
        self.observations.0.iter().sum()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let o = &self.outer;
        if !(o.width() > 0.0 && o.height() > 0.0) {
            return Err(GeometryError::InvalidConfig("outer rectangle is empty".into()));
        }
        if let Some(s) = &self.solid {
            if !(s.width() > 0.0 && s.height() > 0.0) {
                return Err(GeometryError::InvalidConfig("solid rectangle is empty".into()));
            }
            if !(s.x0 > o.x0 && s.x1 < o.x1 && s.y0 > o.y0 && s.y1 < o.y1) {
                return Err(GeometryError::InvalidConfig(
                    "solid must lie strictly inside the outer rectangle".into(),
                ));
            }
            if self.metasurface_thickness < 0.0 || self.metasurface_thickness > s.height() {
                return Err(GeometryError::InvalidConfig(
                    "metasurface thickness exceeds the solid".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.refine_fraction) || self.refine_band < 0.0 {
            return Err(GeometryError::InvalidConfig("bad refinement settings".into()));
        }
        Ok(())
    }
}

/// Sampled point cloud of one case.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudSet {
    pub case_id: String,
    pub interior: Vec<Point2>,
    pub radiation: Vec<BoundarySample>,
    pub coupling: Vec<BoundarySample>,
}

impl PointCloudSet {
    pub fn counts(&self) -> PerDomain<usize> {
        PerDomain::new(self.interior.len(), self.radiation.len(), self.coupling.len())
    }

    pub fn len(&self, tag: DomainTag) -> usize {
        self.counts()[tag]
    }

    pub fn total(&self) -> usize {
        self.counts().0.iter().sum()
    }

    pub fn points(&self, tag: DomainTag) -> Vec<Point2> {
        match tag {
            DomainTag::PressureAcoustic => self.interior.clone(),
            DomainTag::PlaneWaveRadiation => self.radiation.iter().map(|b| b.point).collect(),
            DomainTag::AcousticStructureCoupling => self.coupling.iter().map(|b| b.point).collect(),
        }
    }

    /// Boundary samples of `tag`; empty for the interior.
    pub fn boundary(&self, tag: DomainTag) -> &[BoundarySample] {
        match tag {
            DomainTag::PressureAcoustic => &[],
            DomainTag::PlaneWaveRadiation => &self.radiation,
            DomainTag::AcousticStructureCoupling => &self.coupling,
        }
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL
}

fn on_rect_boundary(r: &Rect, p: Point2) -> bool {
    r.contains_closed(p, BOUNDARY_TOL)
        && (near(p.x, r.x0) || near(p.x, r.x1) || near(p.y, r.y0) || near(p.y, r.y1))
}

/// Tag of a point on the closed fluid region.
pub fn classify_point(p: Point2, config: &CaseConfig) -> Result<DomainTag, GeometryError> {
    let o = &config.outer;
    if !p.x.is_finite() || !p.y.is_finite() || !o.contains_closed(p, BOUNDARY_TOL) {
        return Err(GeometryError::OutsideDomain { x: p.x, y: p.y });
    }
    if on_rect_boundary(o, p) {
        return Ok(DomainTag::PlaneWaveRadiation);
    }
    if let Some(s) = &config.solid {
        if s.contains_strict(p, BOUNDARY_TOL) {
            return Err(GeometryError::InsideSolid { x: p.x, y: p.y });
        }
        if on_rect_boundary(s, p) {
            return Ok(DomainTag::AcousticStructureCoupling);
        }
    }
    Ok(DomainTag::PressureAcoustic)
}

/// Outward unit normal of a boundary point.
///
/// Radiation normals point out of the fluid, coupling normals out of the
/// solid. At corners the vertical edge wins.
pub fn boundary_normal(p: Point2, config: &CaseConfig) -> Result<[f64; 2], GeometryError> {
    match classify_point(p, config)? {
        DomainTag::PressureAcoustic => Err(GeometryError::NotOnBoundary { x: p.x, y: p.y }),
        DomainTag::PlaneWaveRadiation => Ok(rect_normal(&config.outer, p)),
        DomainTag::AcousticStructureCoupling => {
            Ok(rect_normal(config.solid.as_ref().expect("coupling implies solid"), p))
        }
    }
}

fn rect_normal(r: &Rect, p: Point2) -> [f64; 2] {
    if near(p.x, r.x0) {
        [-1.0, 0.0]
    } else if near(p.x, r.x1) {
        [1.0, 0.0]
    } else if near(p.y, r.y0) {
        [0.0, -1.0]
    } else {
        [0.0, 1.0]
    }
}

/// Unit tangent: the normal rotated by +90 degrees.
pub fn tangent_of(normal: [f64; 2]) -> [f64; 2] {
    [-normal[1], normal[0]]
}

/// Metasurface subunit of a point on the solid's top face (corners excluded).
pub fn subunit_index(p: Point2, config: &CaseConfig) -> Option<usize> {
    let s = config.solid.as_ref()?;
    if config.subunits == 0 || !near(p.y, s.y1) || near(p.x, s.x0) || near(p.x, s.x1) {
        return None;
    }
    if p.x < s.x0 || p.x > s.x1 {
        return None;
    }
    let n = config.subunits;
    let raw = (n as f64 * (p.x - s.x0) / s.width()).floor();
    Some((raw.max(0.0) as usize).min(n - 1))
}

/// Splits `total` over edges proportionally to `lengths`, at least one each.
fn allocate(total: usize, lengths: &[f64]) -> Vec<usize> {
    let k = lengths.len();
    let mut counts = vec![1usize; k];
    let rest = total - k;
    let sum: f64 = lengths.iter().sum();
    let shares: Vec<f64> = lengths.iter().map(|l| rest as f64 * l / sum).collect();
    let mut assigned = 0;
    for (c, s) in counts.iter_mut().zip(&shares) {
        let f = s.floor() as usize;
        *c += f;
        assigned += f;
    }
    let mut order: Vec<usize> = (0..k).collect();
    // largest remainder, earlier edge first on ties
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(rest - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Equally spaced samples on the four edges of `r`.
///
/// Vertical edges include the corners when they hold two or more points;
/// horizontal edges never do.
fn rect_edge_points(r: &Rect, total: usize) -> Vec<Point2> {
    let c = allocate(total, &[r.height(), r.height(), r.width(), r.width()]);
    let mut pts = Vec::with_capacity(total);
    let vertical = |x: f64, n: usize, pts: &mut Vec<Point2>| {
        if n == 1 {
            pts.push(Point2::new(x, 0.5 * (r.y0 + r.y1)));
        } else {
            for j in 0..n {
                pts.push(Point2::new(x, r.y0 + j as f64 * r.height() / (n - 1) as f64));
            }
        }
    };
    vertical(r.x0, c[0], &mut pts);
    vertical(r.x1, c[1], &mut pts);
    for (y, n) in [(r.y0, c[2]), (r.y1, c[3])] {
        for j in 0..n {
            pts.push(Point2::new(r.x0 + (j + 1) as f64 * r.width() / (n + 1) as f64, y));
        }
    }
    pts
}

fn in_open_fluid(p: Point2, config: &CaseConfig) -> bool {
    if !config.outer.contains_strict(p, BOUNDARY_TOL) {
        return false;
    }
    match &config.solid {
        Some(s) => !s.contains_closed(p, BOUNDARY_TOL),
        None => true,
    }
}

fn sample_uniform(config: &CaseConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Point2>, GeometryError> {
    if n == 0 {
        return Ok(vec![]);
    }
    let o = &config.outer;
    let fluid_area = o.area() - config.solid.map_or(0.0, |s| s.area());
    let mut h = (fluid_area / n as f64).sqrt();
    for _ in 0..200 {
        let nx = (o.width() / h).ceil().max(1.0) as usize;
        let ny = (o.height() / h).ceil().max(1.0) as usize;
        let (cw, ch) = (o.width() / nx as f64, o.height() / ny as f64);
        let mut kept = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let u: f64 = rng.gen_range(0.1..0.9);
                let v: f64 = rng.gen_range(0.1..0.9);
                let p = Point2::new(o.x0 + (i as f64 + u) * cw, o.y0 + (j as f64 + v) * ch);
                if in_open_fluid(p, config) {
                    kept.push(p);
                }
            }
        }
        if kept.len() >= n {
            let mut picked = sample(rng, kept.len(), n).into_vec();
            picked.sort_unstable();
            return Ok(picked.into_iter().map(|i| kept[i]).collect());
        }
        h *= 0.97;
    }
    Err(GeometryError::Infeasible(format!(
        "could not place {n} interior points"
    )))
}

fn sample_band(config: &CaseConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Point2>, GeometryError> {
    let Some(s) = config.solid else {
        return Ok(vec![]);
    };
    let band = config.refine_band;
    let o = &config.outer;
    let bx0 = (s.x0 - band).max(o.x0);
    let bx1 = (s.x1 + band).min(o.x1);
    let by0 = (s.y0 - band).max(o.y0);
    let by1 = (s.y1 + band).min(o.y1);
    let mut pts = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while pts.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 10) {
            return Err(GeometryError::Infeasible("refinement band too thin".into()));
        }
        let p = Point2::new(rng.gen_range(bx0..bx1), rng.gen_range(by0..by1));
        if in_open_fluid(p, config) && s.distance(p) <= band {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Deterministic point cloud for `(config, seed)`.
///
/// Interior points come from a seed-jittered grid over the fluid plus a
/// share drawn inside a band around the solid; boundary points are equally
/// spaced per edge.
pub fn build_case_geometry(config: &CaseConfig, seed: u64) -> Result<PointCloudSet, GeometryError> {
    config.validate()?;
    let n_int = config.counts[DomainTag::PressureAcoustic];
    let n_rad = config.counts[DomainTag::PlaneWaveRadiation];
    let n_cpl = config.counts[DomainTag::AcousticStructureCoupling];
    if n_int == 0 {
        return Err(GeometryError::Infeasible("interior needs at least one point".into()));
    }
    if n_rad > 0 && n_rad < 4 {
        return Err(GeometryError::Infeasible(
            "radiation boundary needs zero or at least four points".into(),
        ));
    }
    match config.solid {
        None if n_cpl > 0 => {
            return Err(GeometryError::Infeasible("coupling points without a solid".into()))
        }
        Some(_) if n_cpl < 4 => {
            return Err(GeometryError::Infeasible(
                "coupling boundary needs at least four points".into(),
            ))
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_band = if config.solid.is_some() && config.refine_band > 0.0 {
        (config.refine_fraction * n_int as f64).round() as usize
    } else {
        0
    };
    let mut interior = sample_uniform(config, n_int - n_band, &mut rng)?;
    interior.extend(sample_band(config, n_band, &mut rng)?);

    let to_samples = |pts: Vec<Point2>| -> Result<Vec<BoundarySample>, GeometryError> {
        pts.into_iter()
            .map(|p| {
                let normal = boundary_normal(p, config)?;
                Ok(BoundarySample {
                    point: p,
                    normal,
                    tangent: tangent_of(normal),
                    subunit: subunit_index(p, config),
                })
            })
            .collect()
    };
    let radiation = if n_rad > 0 {
        to_samples(rect_edge_points(&config.outer, n_rad))?
    } else {
        vec![]
    };
    let coupling = match &config.solid {
        Some(s) => to_samples(rect_edge_points(s, n_cpl))?,
        None => vec![],
    };

    Ok(PointCloudSet {
        case_id: config.case_id.clone(),
        interior,
        radiation,
        coupling,
    })
}

/// One observed scattered-pressure value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub domain: DomainTag,
    pub index: usize,
    pub value: Complex64,
}

/// Fixed observation points with their true scattered pressure (Pa).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSet {
    pub entries: Vec<Observation>,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, tag: DomainTag) -> usize {
        self.entries.iter().filter(|o| o.domain == tag).count()
    }

    pub fn indices(&self, tag: DomainTag) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|o| o.domain == tag)
            .map(|o| o.index)
            .collect()
    }

    /// Same indices with values taken from another truth field.
    pub fn with_truth(&self, truth: &PerDomain<Vec<Complex64>>) -> ObservationSet {
        ObservationSet {
            entries: self
                .entries
                .iter()
                .map(|o| Observation {
                    value: truth[o.domain][o.index],
                    ..*o
                })
                .collect(),
        }
    }
}

/// Uniform sampling without replacement per domain, deterministic per seed.
pub fn sample_observations(
    cloud: &PointCloudSet,
    counts: &PerDomain<usize>,
    seed: u64,
    truth: &PerDomain<Vec<Complex64>>,
) -> Result<ObservationSet, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f62_7365_7276_6564);
    let mut entries = Vec::new();
    for tag in DomainTag::ALL {
        let available = cloud.len(tag);
        let requested = counts[tag];
        if requested > available {
            return Err(GeometryError::TooManyObservations {
                domain: tag,
                requested,
                available,
            });
        }
        if truth[tag].len() != available {
            return Err(GeometryError::TruthLength {
                domain: tag,
                got: truth[tag].len(),
                expected: available,
            });
        }
        let mut picked = sample(&mut rng, available, requested).into_vec();
        picked.sort_unstable();
        entries.extend(picked.into_iter().map(|index| Observation {
            domain: tag,
            index,
            value: truth[tag][index],
        }));
    }
    Ok(ObservationSet { entries })
}
