//! Train/test condition sets and their reference fields.
//!
//! No finite-element solver is available, so reference pressures come from
//! closed-form plane-wave fields: a fixed manufactured wave for the desk
//! case, and a mirror reflection off the metasurface whose amplitude follows
//! the impedance contrast of the subunit parameters for the paper layouts.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    build_case_geometry, sample_observations, CaseConfig, DomainTag, ObservationSet, PerDomain, PointCloudSet,
};
use crate::network::ImplicitStats;
use crate::physics::{
    background_pressure, derived_displacement, manufactured_solution, sample_field, wavenumber, AnalyticField,
    ComplexField, DisplacementField, LossWeights, ParametricCondition, PhysicsConfig, PlaneWave, SUBUNITS, WATER_DENSITY,
    WATER_MODULUS,
};

use super::TrainingError;

/// Sampling intervals of the metasurface parameters and frequency.
pub const DENSITY_RANGE: (f64, f64) = (WATER_DENSITY / 3.0, 2.0 * WATER_DENSITY);
pub const MODULUS_RANGE: (f64, f64) = (WATER_MODULUS / 3.0, 5.0 * WATER_MODULUS);
pub const FREQUENCY_RANGE: (f64, f64) = (300.0, 500.0);

/// Normalization statistics of the implicit code for the sampling intervals.
pub fn sampling_stats() -> ImplicitStats {
    let mut intervals = vec![DENSITY_RANGE; SUBUNITS];
    intervals.extend(vec![MODULUS_RANGE; SUBUNITS]);
    ImplicitStats::from_intervals(&intervals).expect("intervals have positive width")
}

/// Source of reference scattered pressure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthModel {
    /// The same plane wave for every condition (wavenumber from its frequency).
    PlaneWave { amplitude: [f64; 2], direction: [f64; 2] },
    /// Incident wave mirrored at the horizontal surface `y = surface_y`,
    /// scaled by `(Z - Z_f) / (Z + Z_f)` with `Z = sqrt(rho E)` averaged over
    /// subunits and `Z_f = rho_c c`.
    Reflection { surface_y: f64 },
}

/// Reference fields of one condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub pressure: PerDomain<Vec<Complex64>>,
    /// Normal displacement at coupling points, from the total field.
    pub displacement: DisplacementField,
}

impl TruthModel {
    pub fn scattered_wave(&self, condition: &ParametricCondition, physics: &PhysicsConfig) -> Result<PlaneWave, TrainingError> {
        let k = wavenumber(condition.f_hz, &physics.medium, physics.wavenumber_mode);
        Ok(match *self {
            TruthModel::PlaneWave { amplitude, direction } => {
                manufactured_solution(k, Complex64::new(amplitude[0], amplitude[1]), direction)?
            }
            TruthModel::Reflection { surface_y } => {
                let n = condition.densities.len() as f64;
                let z = condition
                    .densities
                    .iter()
                    .zip(&condition.moduli)
                    .map(|(r, e)| (r * e).sqrt())
                    .sum::<f64>()
                    / n;
                let zf = physics.medium.rho * physics.medium.c;
                let r = (z - zf) / (z + zf);
                let [ex, ey] = physics.wave.ek;
                // phase chosen so the reflected wave equals r * p_b on the surface
                let phase = Complex64::from_polar(1.0, -2.0 * k * surface_y * ey);
                manufactured_solution(k, r * physics.wave.p0 * phase, [ex, -ey])?
            }
        })
    }

    pub fn truth(
        &self,
        cloud: &PointCloudSet,
        condition: &ParametricCondition,
        physics: &PhysicsConfig,
    ) -> Result<Truth, TrainingError> {
        let wave = self.scattered_wave(condition, physics)?;
        let pressure = PerDomain(DomainTag::ALL.map(|tag| {
            cloud.points(tag).iter().map(|&p| wave.sample(p).value).collect::<Vec<_>>()
        }));
        let tag = DomainTag::AcousticStructureCoupling;
        let pts = cloud.points(tag);
        let k = wave.k;
        let background: Vec<_> = pts.iter().map(|&p| background_pressure(p, &physics.wave, k)).collect();
        let total = sample_field(&wave, &pts).add(&ComplexField::from_samples(&background))?;
        let normals: Vec<[f64; 2]> = cloud.boundary(tag).iter().map(|b| b.normal).collect();
        let omega = 2.0 * std::f64::consts::PI * condition.f_hz;
        let displacement = derived_displacement(&total, &physics.medium, omega, &normals)?;
        Ok(Truth { pressure, displacement })
    }
}

/// How parametric conditions are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// One fixed condition, used for both training and held-out evaluation.
    Single { condition: ParametricCondition },
    /// Fixed frequency, independent random parameters per subunit.
    FixedFrequency { f_hz: f64, train: usize, test: usize },
    /// Uniform metasurfaces given as (density, modulus) multiples of water;
    /// training frequencies are random, test frequencies are listed.
    Combos {
        combos: Vec<(f64, f64)>,
        train_per_combo: usize,
        test_frequencies: Vec<f64>,
    },
    /// `groups` random parameter sets crossed with `frequencies` random
    /// frequencies, shuffled and split.
    Groups {
        groups: usize,
        frequencies: usize,
        train: usize,
        test: usize,
    },
}

/// Everything needed to build a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub geometry: CaseConfig,
    pub sampling: Sampling,
    pub truth: TruthModel,
}

impl CaseSpec {
    /// Constant-condition layout: 1000 parameter draws at 300 Hz.
    pub fn case1() -> Self {
        let geometry = CaseConfig::case1();
        let surface_y = geometry.solid.expect("case has a solid").y1;
        Self {
            geometry,
            sampling: Sampling::FixedFrequency {
                f_hz: 300.0,
                train: 1000,
                test: 200,
            },
            truth: TruthModel::Reflection { surface_y },
        }
    }

    pub fn case2() -> Self {
        let geometry = CaseConfig::case2();
        let surface_y = geometry.solid.expect("case has a solid").y1;
        Self {
            geometry,
            sampling: Sampling::Combos {
                combos: vec![(1.0, 1.0), (1.5, 3.0), (2.0, 5.0)],
                train_per_combo: 1000,
                test_frequencies: vec![300.0, 400.0, 500.0],
            },
            truth: TruthModel::Reflection { surface_y },
        }
    }

    pub fn case3() -> Self {
        let geometry = CaseConfig::case3();
        let surface_y = geometry.solid.expect("case has a solid").y1;
        Self {
            geometry,
            sampling: Sampling::Groups {
                groups: 12,
                frequencies: 100,
                train: 1000,
                test: 200,
            },
            truth: TruthModel::Reflection { surface_y },
        }
    }

    /// Unit-square fluid box with a plane-wave solution of `k = 6` rad/m.
    pub fn desk(interior: usize, observations: usize, physics: &PhysicsConfig) -> Self {
        let f_hz = desk_frequency(DESK_WAVENUMBER, physics);
        Self {
            geometry: CaseConfig::manufactured(interior, observations),
            sampling: Sampling::Single {
                condition: ParametricCondition::uniform(f_hz, WATER_DENSITY, WATER_MODULUS),
            },
            truth: TruthModel::PlaneWave {
                amplitude: [1.0, 0.0],
                direction: [0.6, 0.8],
            },
        }
    }

    pub fn frequency_range(&self) -> (f64, f64) {
        match &self.sampling {
            Sampling::Single { condition } => (condition.f_hz, condition.f_hz),
            Sampling::FixedFrequency { f_hz, .. } => (*f_hz, *f_hz),
            _ => FREQUENCY_RANGE,
        }
    }
}

/// Wavenumber of the desk case (rad/m); one wavelength spans about the box.
pub const DESK_WAVENUMBER: f64 = 6.0;

/// Desk-case loss weights: the default `beta` divided by `k^2`.
///
/// The interior residual scales like `k^2 |p|`, so at `k = 6` the raw
/// default lets it outweigh the observation loss by two orders of magnitude.
pub fn desk_weights() -> LossWeights {
    let d = LossWeights::default();
    LossWeights {
        alpha: d.alpha,
        beta: d.beta / (DESK_WAVENUMBER * DESK_WAVENUMBER),
    }
}

/// Frequency giving wavenumber `k` under the configured dispersion.
pub fn desk_frequency(k: f64, physics: &PhysicsConfig) -> f64 {
    let c = physics.medium.c;
    match physics.wavenumber_mode {
        crate::physics::WavenumberMode::Standard => k * c / (2.0 * std::f64::consts::PI),
        crate::physics::WavenumberMode::PaperLiteral => (k * c).sqrt() / (2.0 * std::f64::consts::PI),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Conditions over one shared cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub cloud: PointCloudSet,
    pub conditions: Vec<ParametricCondition>,
    /// Observed truth per condition; empty sets for the test split.
    pub observations: Vec<ObservationSet>,
    pub displacements: Vec<DisplacementField>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }
}

fn random_condition(rng: &mut ChaCha8Rng, f_hz: f64) -> ParametricCondition {
    let densities = (0..SUBUNITS).map(|_| rng.gen_range(DENSITY_RANGE.0..=DENSITY_RANGE.1)).collect();
    let moduli = (0..SUBUNITS).map(|_| rng.gen_range(MODULUS_RANGE.0..=MODULUS_RANGE.1)).collect();
    ParametricCondition {
        f_hz,
        densities,
        moduli,
    }
}

fn draw_frequency(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(FREQUENCY_RANGE.0..=FREQUENCY_RANGE.1)
}

/// Condition lists for both splits, disjoint by construction.
pub fn sample_conditions(
    sampling: &Sampling,
    seed: u64,
) -> Result<(Vec<ParametricCondition>, Vec<ParametricCondition>), TrainingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_6e64_6974_696f);
    Ok(match sampling {
        Sampling::Single { condition } => {
            condition.validate()?;
            (vec![condition.clone()], vec![condition.clone()])
        }
        Sampling::FixedFrequency { f_hz, train, test } => {
            let mut all: Vec<ParametricCondition> = Vec::with_capacity(train + test);
            while all.len() < train + test {
                let c = random_condition(&mut rng, *f_hz);
                if !all.contains(&c) {
                    all.push(c);
                }
            }
            let test = all.split_off(*train);
            (all, test)
        }
        Sampling::Combos {
            combos,
            train_per_combo,
            test_frequencies,
        } => {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for &(rd, re) in combos {
                let base = |f| ParametricCondition::uniform(f, rd * WATER_DENSITY, re * WATER_MODULUS);
                for _ in 0..*train_per_combo {
                    let mut f = draw_frequency(&mut rng);
                    while test_frequencies.contains(&f) {
                        f = draw_frequency(&mut rng);
                    }
                    train.push(base(f));
                }
                test.extend(test_frequencies.iter().map(|&f| base(f)));
            }
            (train, test)
        }
        Sampling::Groups {
            groups,
            frequencies,
            train,
            test,
        } => {
            if train + test > groups * frequencies {
                return Err(TrainingError::InvalidConfig(format!(
                    "{train} + {test} conditions requested from {groups} x {frequencies}"
                )));
            }
            let params: Vec<ParametricCondition> = (0..*groups).map(|_| random_condition(&mut rng, 0.0)).collect();
            let mut freqs: Vec<f64> = Vec::with_capacity(*frequencies);
            while freqs.len() < *frequencies {
                let f = draw_frequency(&mut rng);
                if !freqs.contains(&f) {
                    freqs.push(f);
                }
            }
            let mut all: Vec<ParametricCondition> = params
                .iter()
                .flat_map(|p| {
                    freqs.iter().map(move |&f| ParametricCondition {
                        f_hz: f,
                        ..p.clone()
                    })
                })
                .collect();
            all.shuffle(&mut rng);
            all.truncate(train + test);
            let test = all.split_off(*train);
            (all, test)
        }
    })
}

/// Geometry, conditions, and observed truth for both splits.
pub fn build_dataset(spec: &CaseSpec, physics: &PhysicsConfig, seed: u64) -> Result<(Dataset, Dataset), TrainingError> {
    let cloud = build_case_geometry(&spec.geometry, seed)?;
    let (train_c, test_c) = sample_conditions(&spec.sampling, seed)?;
    let mut train_obs = Vec::with_capacity(train_c.len());
    let mut train_u = Vec::with_capacity(train_c.len());
    let mut layout: Option<ObservationSet> = None;
    for c in &train_c {
        let truth = spec.truth.truth(&cloud, c, physics)?;
        let obs = match &layout {
            None => {
                let o = sample_observations(&cloud, &spec.geometry.observations, seed, &truth.pressure)?;
                layout = Some(o.clone());
                o
            }
            Some(l) => l.with_truth(&truth.pressure),
        };
        train_obs.push(obs);
        train_u.push(truth.displacement);
    }
    let mut test_u = Vec::with_capacity(test_c.len());
    for c in &test_c {
        test_u.push(spec.truth.truth(&cloud, c, physics)?.displacement);
    }
    let test_obs = vec![ObservationSet::default(); test_c.len()];
    Ok((
        Dataset {
            cloud: cloud.clone(),
            conditions: train_c,
            observations: train_obs,
            displacements: train_u,
            split: Split::Train,
        },
        Dataset {
            cloud,
            conditions: test_c,
            observations: test_obs,
            displacements: test_u,
            split: Split::Test,
        },
    ))
}
