use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::evolve::RunConfig;
use crate::fitness::{FitnessError, FitnessRecord, ProxyBreakdown};
use crate::genome::Genome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    Manual,
    Proxy,
}

impl std::str::FromStr for EvaluatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manual" => Ok(EvaluatorKind::Manual),
            "proxy" => Ok(EvaluatorKind::Proxy),
            other => Err(format!(
                "unknown evaluator '{other}', expected manual or proxy"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    AwaitingFitness,
    ReadyToAdvance,
    Complete,
}

/// Generator position, stored field by field so journals stay plain JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCheckpoint {
    pub seed: String,
    pub stream: u64,
    /// Decimal `u128`.
    pub word_pos: String,
}

impl From<&ChaCha8Rng> for RngCheckpoint {
    fn from(rng: &ChaCha8Rng) -> Self {
        RngCheckpoint {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }
}

impl RngCheckpoint {
    pub fn restore(&self) -> Result<ChaCha8Rng, CampaignError> {
        let bad = || CampaignError::Corrupt("bad rng checkpoint".into());
        let seed: [u8; 32] = hex::decode(&self.seed)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(bad)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad())?);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewChild {
    pub genome: Genome,
    pub parents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    CampaignCreated {
        campaign_id: String,
        config: RunConfig,
        evaluator: EvaluatorKind,
        seed: u64,
        repeats: usize,
    },
    /// `rng` is the generator state after this generation was drawn.
    GenerationCreated {
        generation: usize,
        children: Vec<NewChild>,
        rng: RngCheckpoint,
    },
    GripperFlaggedUnprintable {
        generation: usize,
        child: usize,
        reason: String,
    },
    ProxyScored {
        generation: usize,
        child: usize,
        breakdown: ProxyBreakdown,
    },
    RepeatRecorded {
        generation: usize,
        child: usize,
        force_newtons: f64,
    },
    GenerationAdvanced {
        generation: usize,
    },
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Child {
    pub id: String,
    pub genome: Genome,
    pub parents: Vec<usize>,
    pub record: FitnessRecord,
    pub unprintable: Option<String>,
    pub proxy: Option<ProxyBreakdown>,
}

impl Child {
    pub fn fitness(&self, kind: EvaluatorKind) -> Option<f64> {
        if self.unprintable.is_some() {
            return Some(0.0);
        }
        match kind {
            EvaluatorKind::Manual => self.record.mean(),
            EvaluatorKind::Proxy => self.proxy.map(|b| b.score),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub index: usize,
    pub children: Vec<Child>,
}

impl Generation {
    pub fn fitnesses(&self, kind: EvaluatorKind) -> Option<Vec<f64>> {
        self.children.iter().map(|c| c.fitness(kind)).collect()
    }

    pub fn is_complete(&self, kind: EvaluatorKind) -> bool {
        self.children.iter().all(|c| c.fitness(kind).is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub campaign_id: String,
    pub config: RunConfig,
    pub evaluator: EvaluatorKind,
    pub seed: u64,
    pub repeats: usize,
    pub current: usize,
    pub generations: Vec<Generation>,
    pub status: Status,
    pub rng: Option<RngCheckpoint>,
}

pub fn campaign_id(seed: u64) -> String {
    format!("campaign-{seed:016x}")
}

impl CampaignState {
    /// State after the first event, which must create the campaign.
    pub fn from_created(event: &Event) -> Result<Self, CampaignError> {
        match event {
            Event::CampaignCreated {
                campaign_id,
                config,
                evaluator,
                seed,
                repeats,
            } => Ok(CampaignState {
                campaign_id: campaign_id.clone(),
                config: config.clone(),
                evaluator: *evaluator,
                seed: *seed,
                repeats: *repeats,
                current: 0,
                generations: Vec::new(),
                status: Status::AwaitingFitness,
                rng: None,
            }),
            _ => Err(CampaignError::Corrupt(
                "journal must start with campaign-created".into(),
            )),
        }
    }

    pub fn replay<'a, I: IntoIterator<Item = &'a Event>>(events: I) -> Result<Self, CampaignError> {
        let mut it = events.into_iter();
        let first = it
            .next()
            .ok_or_else(|| CampaignError::Corrupt("empty journal".into()))?;
        let mut state = CampaignState::from_created(first)?;
        for e in it {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn current_generation(&self) -> Option<&Generation> {
        self.generations.get(self.current)
    }

    pub fn child(&self, generation: usize, child: usize) -> Result<&Child, CampaignError> {
        self.generations
            .get(generation)
            .ok_or_else(|| CampaignError::NotFound(format!("generation {generation}")))?
            .children
            .get(child)
            .ok_or_else(|| {
                CampaignError::NotFound(format!("child {child} of generation {generation}"))
            })
    }

    fn child_mut(&mut self, generation: usize, child: usize) -> Result<&mut Child, CampaignError> {
        self.child(generation, child)?;
        Ok(&mut self.generations[generation].children[child])
    }

    fn refresh_status(&mut self) {
        self.status = match self.generations.get(self.current) {
            Some(g) if g.is_complete(self.evaluator) => {
                if self.current + 1 >= self.config.ga.max_generations {
                    Status::Complete
                } else {
                    Status::ReadyToAdvance
                }
            }
            _ => Status::AwaitingFitness,
        };
    }

    /// Checks a repeat against the current state without applying it.
    pub fn check_repeat(
        &self,
        generation: usize,
        child: usize,
        force: f64,
    ) -> Result<(), CampaignError> {
        if self.evaluator == EvaluatorKind::Proxy {
            return Err(CampaignError::ProxyCampaign);
        }
        let c = self.child(generation, child)?;
        if generation != self.current {
            return Err(CampaignError::WrongGeneration {
                expected: self.current,
                got: generation,
            });
        }
        if c.unprintable.is_some() {
            return Err(CampaignError::UnprintableChild(c.id.clone()));
        }
        let mut probe = c.record.clone();
        probe.record_repeat(force).map_err(CampaignError::from)
    }

    pub fn check_advance(&self) -> Result<(), CampaignError> {
        match self.status {
            Status::ReadyToAdvance => Ok(()),
            Status::Complete => Err(CampaignError::Complete),
            Status::AwaitingFitness => Err(CampaignError::PendingFitness(self.current)),
        }
    }

    /// The pure fold step. Rejects any event that would break generation gating.
    pub fn apply(&mut self, event: &Event) -> Result<(), CampaignError> {
        match event {
            Event::CampaignCreated { .. } => {
                return Err(CampaignError::Corrupt("second campaign-created".into()))
            }
            Event::GenerationCreated {
                generation,
                children,
                rng,
            } => {
                if *generation != self.current || self.generations.len() != self.current {
                    return Err(CampaignError::Corrupt(format!(
                        "generation {generation} created out of order"
                    )));
                }
                if children.len() != self.config.ga.population_size {
                    return Err(CampaignError::Corrupt("wrong population size".into()));
                }
                let prev = generation
                    .checked_sub(1)
                    .map(|p| self.generations[p].children.len());
                for c in children {
                    let ok = match prev {
                        None => c.parents.is_empty(),
                        Some(n) => {
                            (1..=2).contains(&c.parents.len()) && c.parents.iter().all(|&p| p < n)
                        }
                    };
                    if !ok {
                        return Err(CampaignError::Corrupt("bad parent ids".into()));
                    }
                }
                self.generations.push(Generation {
                    index: *generation,
                    children: children
                        .iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let id = crate::evolve::gripper_id(*generation, i);
                            Child {
                                record: FitnessRecord::new(id.clone(), self.repeats),
                                id,
                                genome: c.genome.clone(),
                                parents: c.parents.clone(),
                                unprintable: None,
                                proxy: None,
                            }
                        })
                        .collect(),
                });
                self.rng = Some(rng.clone());
            }
            Event::GripperFlaggedUnprintable {
                generation,
                child,
                reason,
            } => {
                let repeats = self.repeats;
                let c = self.child_mut(*generation, *child)?;
                c.unprintable = Some(reason.clone());
                // fixed at zero, counted as a full record
                c.record.repeats = vec![0.0; repeats];
            }
            Event::ProxyScored {
                generation,
                child,
                breakdown,
            } => {
                self.child_mut(*generation, *child)?.proxy = Some(*breakdown);
            }
            Event::RepeatRecorded {
                generation,
                child,
                force_newtons,
            } => {
                self.check_repeat(*generation, *child, *force_newtons)?;
                self.child_mut(*generation, *child)?
                    .record
                    .record_repeat(*force_newtons)?;
            }
            Event::GenerationAdvanced { generation } => {
                self.check_advance()?;
                if *generation != self.current + 1 {
                    return Err(CampaignError::Corrupt(format!(
                        "advance to {generation} from {}",
                        self.current
                    )));
                }
                self.current = *generation;
            }
        }
        self.refresh_status();
        Ok(())
    }
}

impl From<FitnessError> for CampaignError {
    fn from(e: FitnessError) -> Self {
        match e {
            FitnessError::Overfull(n) => CampaignError::Overfull(n),
            FitnessError::NegativeForce(f) => CampaignError::NegativeForce(f),
            FitnessError::NonFinite => CampaignError::InvalidForce,
            other => CampaignError::Invalid(other.to_string()),
        }
    }
}
