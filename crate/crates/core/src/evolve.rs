//! The genetic algorithm: roulette selection, point-preserving one-point
//! crossover, per-allele Gaussian mutation and structural add/delete.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Point2;
use crate::fitness::{Evaluation, Evaluator, ProxySettings};
use crate::genome::{
    self, Genome, GenomeError, BASE_RADIUS_RANGE_MM, COMPONENT_RANGE, CONTROL_POINT_COUNT_RANGE,
    HEIGHT_RANGE_MM,
};
use crate::mesh::{assemble, MeshSettings};

pub const MUTATION_RETRIES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        "config-error"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_prob: f64,
    pub allele_mutation_prob: f64,
    pub structural_mutation_prob: f64,
    pub mutation_sigma_fraction: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 5,
            max_generations: 15,
            crossover_prob: 0.8,
            allele_mutation_prob: 0.2,
            structural_mutation_prob: 0.25,
            mutation_sigma_fraction: 0.10,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size < 2 {
            return Err(ConfigError::Invalid(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.max_generations < 1 {
            return Err(ConfigError::Invalid(
                "max_generations must be at least 1".into(),
            ));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("allele_mutation_prob", self.allele_mutation_prob),
            ("structural_mutation_prob", self.structural_mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.mutation_sigma_fraction >= 0.0 && self.mutation_sigma_fraction.is_finite()) {
            return Err(ConfigError::Invalid(
                "mutation_sigma_fraction must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A config file: the GA keys at top level and an optional `[proxy]` table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub ga: GaConfig,
    #[serde(default)]
    pub proxy: ProxySettings,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.ga.validate()?;
        cfg.proxy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGenome {
    pub genome: Genome,
    pub fitness: f64,
}

/// Roulette draw over non-negative weights; uniform when they sum to zero.
pub fn select_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    assert!(!weights.is_empty(), "selection from an empty population");
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if !(total > 0.0) {
        return rng.random_range(0..weights.len());
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w.max(0.0);
        if target < acc {
            return i;
        }
    }
    // rounding left target at the very top; take the last positive weight
    weights
        .iter()
        .rposition(|w| *w > 0.0)
        .unwrap_or(weights.len() - 1)
}

pub fn select_parent<R: Rng + ?Sized>(population: &[ScoredGenome], rng: &mut R) -> usize {
    let weights: Vec<f64> = population.iter().map(|s| s.fitness).collect();
    select_index(&weights, rng)
}

/// Child with `p1.control_points[..k]` followed by `p2.control_points[j..]`,
/// radius and height from `p1`. Not checked for self-intersection.
pub fn crossover_at(p1: &Genome, p2: &Genome, k: usize, j: usize) -> Result<Genome, GenomeError> {
    let a = p1.control_points();
    let b = p2.control_points();
    if k > a.len() || j >= b.len() {
        return Err(GenomeError::ControlPointCount(0));
    }
    let mut pts: Vec<Point2> = a[..k].to_vec();
    pts.extend_from_slice(&b[j..]);
    Genome::new(p1.base_radius(), p1.height(), pts)
}

/// All cut pairs `(k, j)` giving a non-empty suffix of `p2` and a legal count.
pub fn cut_pairs(v1: usize, v2: usize) -> Vec<(usize, usize)> {
    let (lo, hi) = CONTROL_POINT_COUNT_RANGE;
    let mut out = Vec::new();
    for k in 0..=v1 {
        for j in 0..v2 {
            let n = k + v2 - j;
            if (lo..=hi).contains(&n) {
                out.push((k, j));
            }
        }
    }
    out
}

/// Uniform over legal cut pairs, redrawing while the child self-intersects.
/// `None` if every legal pair self-intersects.
pub fn crossover<R: Rng + ?Sized>(p1: &Genome, p2: &Genome, rng: &mut R) -> Option<Genome> {
    let mut pairs = cut_pairs(p1.v(), p2.v());
    while !pairs.is_empty() {
        let (k, j) = pairs.swap_remove(rng.random_range(0..pairs.len()));
        if let Ok(child) = crossover_at(p1, p2, k, j) {
            if child.validate().is_ok() {
                return Some(child);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StructuralEvent {
    None,
    Add { position: usize, point: Point2 },
    Delete { index: usize },
    SkippedAdd,
    SkippedDelete,
}

/// One sampled mutation, with every Gaussian step stored before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationPlan {
    pub radius_step: Option<f64>,
    pub height_step: Option<f64>,
    pub point_steps: Vec<[Option<f64>; 2]>,
    pub structural: StructuralEvent,
}

impl MutationPlan {
    pub fn allele_trials(&self) -> usize {
        2 + 2 * self.point_steps.len()
    }

    pub fn allele_events(&self) -> usize {
        let scalars = [self.radius_step, self.height_step];
        scalars.iter().filter(|s| s.is_some()).count()
            + self
                .point_steps
                .iter()
                .flatten()
                .filter(|s| s.is_some())
                .count()
    }

    pub fn apply(&self, g: &Genome) -> Genome {
        let step = |value: f64, s: Option<f64>, (lo, hi): (f64, f64)| match s {
            Some(d) => (value + d).clamp(lo, hi),
            None => value,
        };
        let r = step(g.base_radius(), self.radius_step, BASE_RADIUS_RANGE_MM);
        let h = step(g.height(), self.height_step, HEIGHT_RANGE_MM);
        let mut pts: Vec<Point2> = g
            .control_points()
            .iter()
            .zip(&self.point_steps)
            .map(|(p, [sx, sy])| {
                Point2::new(
                    step(p.x, *sx, COMPONENT_RANGE),
                    step(p.y, *sy, COMPONENT_RANGE),
                )
            })
            .collect();
        match self.structural {
            StructuralEvent::Add { position, point } => pts.insert(position, point),
            StructuralEvent::Delete { index } => {
                pts.remove(index);
            }
            _ => {}
        }
        Genome::new(r, h, pts).expect("clamped mutation stays within bounds")
    }
}

fn width((lo, hi): (f64, f64)) -> f64 {
    hi - lo
}

fn gaussian_step<R: Rng + ?Sized>(p: f64, sigma: f64, rng: &mut R) -> Option<f64> {
    if rng.random::<f64>() < p {
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
        Some(normal.sample(rng))
    } else {
        None
    }
}

pub fn sample_mutation<R: Rng + ?Sized>(g: &Genome, cfg: &GaConfig, rng: &mut R) -> MutationPlan {
    let mu = cfg.allele_mutation_prob;
    let f = cfg.mutation_sigma_fraction;
    let radius_step = gaussian_step(mu, f * width(BASE_RADIUS_RANGE_MM), rng);
    let height_step = gaussian_step(mu, f * width(HEIGHT_RANGE_MM), rng);
    let cs = f * width(COMPONENT_RANGE);
    let point_steps = (0..g.v())
        .map(|_| [gaussian_step(mu, cs, rng), gaussian_step(mu, cs, rng)])
        .collect();
    let structural = if rng.random::<f64>() < cfg.structural_mutation_prob {
        let v = g.v();
        if rng.random::<f64>() < 0.5 {
            if v >= CONTROL_POINT_COUNT_RANGE.1 {
                StructuralEvent::SkippedAdd
            } else {
                StructuralEvent::Add {
                    position: rng.random_range(0..=v),
                    point: genome::random_point(rng),
                }
            }
        } else if v <= CONTROL_POINT_COUNT_RANGE.0 {
            StructuralEvent::SkippedDelete
        } else {
            StructuralEvent::Delete {
                index: rng.random_range(0..v),
            }
        }
    } else {
        StructuralEvent::None
    };
    MutationPlan {
        radius_step,
        height_step,
        point_steps,
        structural,
    }
}

/// Mutates `g`; a self-intersecting mutant is redrawn from `g` up to
/// [`MUTATION_RETRIES`] times before the control points are reinitialised.
pub fn mutate<R: Rng + ?Sized>(g: &Genome, cfg: &GaConfig, rng: &mut R) -> Genome {
    for _ in 0..MUTATION_RETRIES {
        let child = sample_mutation(g, cfg, rng).apply(g);
        if child.validate().is_ok() {
            return child;
        }
    }
    genome::reinit_control_points(g, rng).unwrap_or_else(|_| g.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    pub genome: Genome,
    /// Indices into the parent generation; one or two entries.
    pub parents: Vec<usize>,
}

pub fn next_generation<R: Rng + ?Sized>(
    scored: &[ScoredGenome],
    cfg: &GaConfig,
    rng: &mut R,
) -> Vec<Offspring> {
    (0..cfg.population_size)
        .map(|_| {
            let a = select_parent(scored, rng);
            let (child, parents) = if rng.random::<f64>() < cfg.crossover_prob {
                let b = select_parent(scored, rng);
                match crossover(&scored[a].genome, &scored[b].genome, rng) {
                    Some(child) => (child, vec![a, b]),
                    None => (scored[a].genome.clone(), vec![a]),
                }
            } else {
                (scored[a].genome.clone(), vec![a])
            };
            Offspring {
                genome: mutate(&child, cfg, rng),
                parents,
            }
        })
        .collect()
}

pub fn initial_population<R: Rng + ?Sized>(
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<Vec<Genome>, GenomeError> {
    (0..cfg.population_size)
        .map(|_| genome::random_genome(rng))
        .collect()
}

pub fn gripper_id(generation: usize, child: usize) -> String {
    format!("gen{generation}_child{child}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Member {
    pub id: String,
    pub genome: Genome,
    pub parents: Vec<usize>,
    pub printable: bool,
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Complete,
    /// Waiting on measurements for this generation.
    Suspended {
        generation: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct History {
    pub generations: Vec<Vec<Member>>,
    pub status: RunStatus,
}

impl History {
    pub fn genome_count(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    /// Best fitness seen up to and including each fully scored generation.
    pub fn best_so_far(&self) -> Vec<f64> {
        best_so_far(
            self.generations
                .iter()
                .map_while(|g| g.iter().map(|m| m.fitness).collect::<Option<Vec<_>>>()),
        )
    }
}

pub fn best_so_far<I: IntoIterator<Item = Vec<f64>>>(generations: I) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    generations
        .into_iter()
        .map(|g| {
            best = g.into_iter().fold(best, f64::max);
            best
        })
        .collect()
}

fn evaluate_generation(
    generation: usize,
    genomes: Vec<(Genome, Vec<usize>)>,
    evaluator: &mut dyn Evaluator,
    mesh: &MeshSettings,
) -> Vec<Member> {
    genomes
        .into_iter()
        .enumerate()
        .map(|(i, (genome, parents))| {
            let id = gripper_id(generation, i);
            let solid = assemble(&genome, mesh);
            let fitness = match evaluator.evaluate(&id, &genome, solid.as_ref()) {
                Evaluation::Pending => None,
                Evaluation::Fitness(f) => Some(f),
            };
            Member {
                id,
                genome,
                parents,
                printable: solid.is_ok(),
                fitness,
            }
        })
        .collect()
}

/// Runs up to `max_generations`, stopping early (not failing) when the
/// evaluator leaves a measurement pending.
pub fn evolve_loop<R: Rng + ?Sized>(
    cfg: &GaConfig,
    evaluator: &mut dyn Evaluator,
    rng: &mut R,
) -> Result<History, GenomeError> {
    let mesh = MeshSettings::for_fitness();
    let first = initial_population(cfg, rng)?
        .into_iter()
        .map(|g| (g, Vec::new()))
        .collect();
    let mut generations = vec![evaluate_generation(0, first, evaluator, &mesh)];
    loop {
        let current = generations.last().expect("at least one generation");
        let g = generations.len() - 1;
        let Some(scored) = current
            .iter()
            .map(|m| {
                m.fitness.map(|fitness| ScoredGenome {
                    genome: m.genome.clone(),
                    fitness,
                })
            })
            .collect::<Option<Vec<_>>>()
        else {
            return Ok(History {
                generations,
                status: RunStatus::Suspended { generation: g },
            });
        };
        if generations.len() >= cfg.max_generations {
            return Ok(History {
                generations,
                status: RunStatus::Complete,
            });
        }
        let children = next_generation(&scored, cfg, rng)
            .into_iter()
            .map(|o| (o.genome, o.parents))
            .collect();
        generations.push(evaluate_generation(g + 1, children, evaluator, &mesh));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{ManualEvaluator, ProxyEvaluator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn genome(pts: &[(f64, f64)]) -> Genome {
        Genome::new(30.0, 40.0, pts.iter().map(|&(x, y)| pt(x, y)).collect()).unwrap()
    }

    #[test]
    fn defaults() {
        let c = GaConfig::default();
        assert_eq!((c.population_size, c.max_generations), (5, 15));
        assert_eq!(
            (
                c.crossover_prob,
                c.allele_mutation_prob,
                c.structural_mutation_prob
            ),
            (0.8, 0.2, 0.25)
        );
        assert_eq!(c.mutation_sigma_fraction, 0.1);
        c.validate().unwrap();
    }

    #[test]
    fn config_from_toml() {
        let cfg = RunConfig::from_toml_str(
            "population_size = 4\ncrossover_prob = 1.0\n[proxy]\nband_mm = 3.0\n",
        )
        .unwrap();
        assert_eq!(cfg.ga.population_size, 4);
        assert_eq!(cfg.ga.max_generations, 15);
        assert_eq!(cfg.ga.crossover_prob, 1.0);
        assert_eq!(cfg.proxy.band_mm, 3.0);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(RunConfig::from_toml_str("population_size = 1").is_err());
        assert!(RunConfig::from_toml_str("crossover_prob = 1.5").is_err());
        assert!(matches!(
            RunConfig::from_toml_str("population_size = \"x\""),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn crossover_example() {
        let p1 = genome(&[(0.9, 0.1), (0.7, 0.3), (0.5, 0.5)]);
        let p2 = Genome::new(35.0, 50.0, vec![pt(0.4, 0.6), pt(0.2, 0.8)]).unwrap();
        let child = crossover_at(&p1, &p2, 2, 1).unwrap();
        assert_eq!(
            child.control_points(),
            &[pt(0.9, 0.1), pt(0.7, 0.3), pt(0.2, 0.8)]
        );
        assert_eq!((child.base_radius(), child.height()), (30.0, 40.0));
    }

    #[test]
    fn cut_pairs_respect_counts() {
        for v1 in 2..=6 {
            for v2 in 2..=6 {
                let pairs = cut_pairs(v1, v2);
                assert!(!pairs.is_empty());
                for (k, j) in pairs {
                    assert!(j < v2);
                    assert!((2..=6).contains(&(k + v2 - j)));
                }
            }
        }
    }

    #[test]
    fn zero_rates_are_identity() {
        let cfg = GaConfig {
            allele_mutation_prob: 0.0,
            structural_mutation_prob: 0.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = genome::random_genome(&mut rng).unwrap();
        for _ in 0..100 {
            assert_eq!(mutate(&g, &cfg, &mut rng), g);
        }
    }

    #[test]
    fn structural_skips_at_bounds() {
        let cfg = GaConfig {
            allele_mutation_prob: 0.0,
            structural_mutation_prob: 1.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let two = genome(&[(0.8, 0.2), (0.3, 0.7)]);
        let six = genome(&[
            (0.9, 0.1),
            (0.8, 0.2),
            (0.7, 0.3),
            (0.6, 0.4),
            (0.5, 0.5),
            (0.4, 0.6),
        ]);
        for _ in 0..200 {
            let s = sample_mutation(&two, &cfg, &mut rng).structural;
            assert!(matches!(
                s,
                StructuralEvent::Add { .. } | StructuralEvent::SkippedDelete
            ));
            let s = sample_mutation(&six, &cfg, &mut rng).structural;
            assert!(matches!(
                s,
                StructuralEvent::Delete { .. } | StructuralEvent::SkippedAdd
            ));
        }
    }

    #[test]
    fn clamping_holds_bounds() {
        let cfg = GaConfig {
            allele_mutation_prob: 1.0,
            mutation_sigma_fraction: 5.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = genome(&[(0.8, 0.2), (0.3, 0.7)]);
        for _ in 0..200 {
            let m = sample_mutation(&g, &cfg, &mut rng).apply(&g);
            assert!((25.0..=40.0).contains(&m.base_radius()));
            assert!((30.0..=60.0).contains(&m.height()));
        }
    }

    #[test]
    fn selection_skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert_eq!(select_index(&[0.0, 2.0, 0.0], &mut rng), 1);
        }
    }

    #[test]
    fn parent_counts_follow_crossover_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pop: Vec<ScoredGenome> = (0..5)
            .map(|i| ScoredGenome {
                genome: genome::random_genome(&mut rng).unwrap(),
                fitness: i as f64,
            })
            .collect();
        for (chi, n) in [(0.0, 1), (1.0, 2)] {
            let cfg = GaConfig {
                crossover_prob: chi,
                ..GaConfig::default()
            };
            for o in next_generation(&pop, &cfg, &mut rng) {
                assert_eq!(o.parents.len(), n);
                assert!(o.parents.iter().all(|&p| p > 0 && p < 5));
            }
        }
    }

    #[test]
    fn single_generation_run() {
        let cfg = GaConfig {
            max_generations: 1,
            ..GaConfig::default()
        };
        let mut eval = ProxyEvaluator::default();
        let h = evolve_loop(&cfg, &mut eval, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(h.generations.len(), 1);
        assert_eq!(h.status, RunStatus::Complete);
        assert!(h.generations[0].iter().all(|m| m.parents.is_empty()));
    }

    #[test]
    fn manual_run_suspends() {
        let mut eval = ManualEvaluator::default();
        let cfg = GaConfig::default();
        let h = evolve_loop(&cfg, &mut eval, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(h.status, RunStatus::Suspended { generation: 0 });
        assert_eq!(h.generations.len(), 1);
        assert!(h.best_so_far().is_empty());
    }

    #[test]
    fn proxy_run_is_deterministic() {
        let cfg = GaConfig::default();
        let run = || {
            let mut eval = ProxyEvaluator::default();
            evolve_loop(&cfg, &mut eval, &mut ChaCha8Rng::seed_from_u64(7)).unwrap()
        };
        let a = run();
        assert_eq!(a.status, RunStatus::Complete);
        assert_eq!(a.generations.len(), 15);
        assert_eq!(a.genome_count(), 75);
        assert_eq!(a, run());
        let best = a.best_so_far();
        assert!(best.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn best_so_far_carries_forward() {
        let b = best_so_far(vec![vec![1.0, 3.0], vec![2.0], vec![5.0, 0.0]]);
        assert_eq!(b, vec![3.0, 3.0, 5.0]);
    }
}
