//! Journaled experiment campaigns.
//!
//! All state changes are events appended to a JSON-lines journal; the state is
//! a pure fold over them. A snapshot of the folded state is rewritten after
//! every command for quick inspection, but the journal is authoritative.

mod outputs;
mod state;

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use outputs::{
    ExportManifest, ExportedFile, Lineage, LineageEdge, LineageNode, Report, ReportRow, SkippedFile,
};
pub use state::{
    campaign_id, CampaignState, Child, EvaluatorKind, Event, Generation, JournalEntry, NewChild,
    RngCheckpoint, Status,
};

use crate::evolve::{self, ConfigError, RunConfig, ScoredGenome};
use crate::fitness::{proxy_fitness, ProxyBreakdown, DEFAULT_REPEATS};
use crate::genome::{GenomeError, Profile};
use crate::mesh::{assemble, MeshSettings};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error, PartialEq)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error("generation {got} is not the current generation {expected}")]
    WrongGeneration { expected: usize, got: usize },
    #[error("{0} not found")]
    NotFound(String),
    #[error("record already holds {0} repeats")]
    Overfull(usize),
    #[error("force must be non-negative, got {0}")]
    NegativeForce(f64),
    #[error("force must be a finite number")]
    InvalidForce,
    #[error("{0} is unprintable; its fitness is fixed at 0")]
    UnprintableChild(String),
    #[error("generation {0} still has pending fitness measurements")]
    PendingFitness(usize),
    #[error("campaign is complete")]
    Complete,
    #[error("proxy campaigns are scored automatically")]
    ProxyCampaign,
    #[error("a campaign already exists at {0}")]
    Exists(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("corrupt journal: {0}")]
    Corrupt(String),
    #[error("{0}")]
    Invalid(String),
}

impl CampaignError {
    pub fn code(&self) -> &'static str {
        match self {
            CampaignError::Config(e) => e.code(),
            CampaignError::Genome(e) => e.code(),
            CampaignError::WrongGeneration { .. } => "wrong-generation",
            CampaignError::NotFound(_) => "not-found",
            CampaignError::Overfull(_) => "overfull-record",
            CampaignError::NegativeForce(_) => "negative-force",
            CampaignError::InvalidForce => "invalid-force",
            CampaignError::UnprintableChild(_) => "unprintable-child",
            CampaignError::PendingFitness(_) => "pending-fitness",
            CampaignError::Complete => "complete",
            CampaignError::ProxyCampaign => "proxy-campaign",
            CampaignError::Exists(_) => "campaign-exists",
            CampaignError::Storage(_) => "storage-error",
            CampaignError::Corrupt(_) => "corrupt-journal",
            CampaignError::Invalid(_) => "invalid-request",
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CampaignError {
    CampaignError::Storage(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Memory,
    Directory(PathBuf),
}

impl Storage {
    fn persist(&self, new: &[JournalEntry], state: &CampaignState) -> Result<(), CampaignError> {
        let Storage::Directory(dir) = self else {
            return Ok(());
        };
        let path = dir.join(JOURNAL_FILE);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        let mut buf = String::new();
        for entry in new {
            buf.push_str(&serde_json::to_string(entry).expect("events serialise"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())
            .map_err(|e| io_err(&path, e))?;
        file.sync_data().map_err(|e| io_err(&path, e))?;
        write_snapshot(dir, state)
    }
}

fn write_snapshot(dir: &Path, state: &CampaignState) -> Result<(), CampaignError> {
    let path = dir.join(SNAPSHOT_FILE);
    let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
    fs::write(&tmp, snapshot_json(state)).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
}

pub fn snapshot_json(state: &CampaignState) -> String {
    serde_json::to_string_pretty(state).expect("state serialises")
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, CampaignError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: JournalEntry = serde_json::from_str(&line)
            .map_err(|e| CampaignError::Corrupt(format!("line {}: {e}", n + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Campaign-level summary, as served to the dashboard.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub campaign_id: String,
    pub evaluator: EvaluatorKind,
    pub seed: u64,
    pub status: Status,
    pub current_generation: usize,
    pub max_generations: usize,
    pub population_size: usize,
    pub repeats_required: usize,
    pub genomes: usize,
    pub repeats_recorded: usize,
    pub pending: Vec<String>,
    pub config: RunConfig,
}

pub struct Campaign {
    state: CampaignState,
    journal: Vec<JournalEntry>,
    storage: Storage,
    similarity: outputs::SimilarityCache,
}

impl Campaign {
    pub fn init(
        mut config: RunConfig,
        evaluator: EvaluatorKind,
        seed: u64,
        storage: Storage,
    ) -> Result<Campaign, CampaignError> {
        config.ga.seed = seed;
        config.ga.validate()?;
        config
            .proxy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Storage::Directory(dir) = &storage {
            if dir.join(JOURNAL_FILE).exists() {
                return Err(CampaignError::Exists(dir.display().to_string()));
            }
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let created = Event::CampaignCreated {
            campaign_id: campaign_id(seed),
            config,
            evaluator,
            seed,
            repeats: DEFAULT_REPEATS,
        };
        let state = CampaignState::from_created(&created)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let genomes = evolve::initial_population(&state.config.ga, &mut rng)?;
        let children = genomes
            .into_iter()
            .map(|genome| NewChild {
                genome,
                parents: Vec::new(),
            })
            .collect();
        let mut campaign = Campaign {
            state,
            journal: Vec::new(),
            storage,
            similarity: Default::default(),
        };
        let first = JournalEntry {
            seq: 0,
            timestamp_ms: now_ms(),
            event: created,
        };
        campaign
            .storage
            .persist(std::slice::from_ref(&first), &campaign.state)?;
        campaign.journal.push(first);
        let events = campaign.generation_events(0, children, rng);
        campaign.commit(events)?;
        Ok(campaign)
    }

    pub fn open(dir: &Path) -> Result<Campaign, CampaignError> {
        let journal = read_journal(&dir.join(JOURNAL_FILE))?;
        let campaign = Campaign::from_journal(journal, Storage::Directory(dir.to_path_buf()))?;
        write_snapshot(dir, &campaign.state)?;
        Ok(campaign)
    }

    pub fn from_journal(
        journal: Vec<JournalEntry>,
        storage: Storage,
    ) -> Result<Campaign, CampaignError> {
        let state = CampaignState::replay(journal.iter().map(|e| &e.event))?;
        Ok(Campaign {
            state,
            journal,
            storage,
            similarity: Default::default(),
        })
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.journal.iter().map(|e| &e.event)
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    /// Applies `events` atomically: all or none reach the state and the journal.
    fn commit(&mut self, events: Vec<Event>) -> Result<(), CampaignError> {
        let mut next = self.state.clone();
        for e in &events {
            next.apply(e)?;
        }
        let start = self.journal.len() as u64;
        let ts = now_ms();
        let entries: Vec<JournalEntry> = events
            .into_iter()
            .enumerate()
            .map(|(i, event)| JournalEntry {
                seq: start + i as u64,
                timestamp_ms: ts,
                event,
            })
            .collect();
        self.storage.persist(&entries, &next)?;
        self.journal.extend(entries);
        self.state = next;
        Ok(())
    }

    /// Creation event plus the automatic flags and proxy scores. Meshing and
    /// scoring run on one thread per child; results are joined in order.
    fn generation_events(
        &self,
        generation: usize,
        children: Vec<NewChild>,
        rng: ChaCha8Rng,
    ) -> Vec<Event> {
        let settings = MeshSettings::for_fitness();
        let proxy = self.state.config.proxy;
        let kind = self.state.evaluator;
        let outcomes: Vec<Result<Option<ProxyBreakdown>, String>> = std::thread::scope(|s| {
            let handles: Vec<_> = children
                .iter()
                .map(|c| {
                    s.spawn(move || match assemble(&c.genome, &settings) {
                        Err(e) => Err(e.to_string()),
                        Ok(solid) => Ok((kind == EvaluatorKind::Proxy).then(|| {
                            let profile = c.genome.to_profile(settings.profile_samples);
                            proxy_fitness(&solid, &profile, &proxy).unwrap_or(ProxyBreakdown {
                                contact: 0.0,
                                interlock: 0.0,
                                pocket: 0.0,
                                score: 0.0,
                            })
                        })),
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("meshing worker panicked"))
                .collect()
        });
        let mut events = vec![Event::GenerationCreated {
            generation,
            children,
            rng: RngCheckpoint::from(&rng),
        }];
        for (child, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Err(reason) => events.push(Event::GripperFlaggedUnprintable {
                    generation,
                    child,
                    reason,
                }),
                Ok(Some(breakdown)) => events.push(Event::ProxyScored {
                    generation,
                    child,
                    breakdown,
                }),
                Ok(None) => {}
            }
        }
        events
    }

    pub fn record_fitness(
        &mut self,
        generation: usize,
        child: usize,
        force_newtons: f64,
    ) -> Result<&CampaignState, CampaignError> {
        self.state.check_repeat(generation, child, force_newtons)?;
        self.commit(vec![Event::RepeatRecorded {
            generation,
            child,
            force_newtons,
        }])?;
        Ok(&self.state)
    }

    pub fn advance(&mut self) -> Result<&CampaignState, CampaignError> {
        self.state.check_advance()?;
        let kind = self.state.evaluator;
        let current = self
            .state
            .current_generation()
            .expect("ready implies a generation");
        let scored: Vec<ScoredGenome> = current
            .children
            .iter()
            .map(|c| ScoredGenome {
                genome: c.genome.clone(),
                fitness: c.fitness(kind).expect("ready implies scored"),
            })
            .collect();
        let mut rng = self
            .state
            .rng
            .as_ref()
            .ok_or_else(|| CampaignError::Corrupt("missing rng checkpoint".into()))?
            .restore()?;
        let offspring = evolve::next_generation(&scored, &self.state.config.ga, &mut rng);
        let next = self.state.current + 1;
        let children = offspring
            .into_iter()
            .map(|o| NewChild {
                genome: o.genome,
                parents: o.parents,
            })
            .collect();
        let mut events = vec![Event::GenerationAdvanced { generation: next }];
        events.extend(self.generation_events(next, children, rng));
        self.commit(events)?;
        Ok(&self.state)
    }

    pub fn generation(&self, g: usize) -> Result<&Generation, CampaignError> {
        self.state
            .generations
            .get(g)
            .ok_or_else(|| CampaignError::NotFound(format!("generation {g}")))
    }

    pub fn child(&self, g: usize, i: usize) -> Result<&Child, CampaignError> {
        self.state.child(g, i)
    }

    pub fn child_profile(&self, g: usize, i: usize) -> Result<Profile, CampaignError> {
        Ok(self
            .child(g, i)?
            .genome
            .to_profile(MeshSettings::default().profile_samples))
    }

    pub fn summary(&self) -> Summary {
        let s = &self.state;
        let pending = s
            .current_generation()
            .map(|g| {
                g.children
                    .iter()
                    .filter(|c| c.fitness(s.evaluator).is_none())
                    .map(|c| c.id.clone())
                    .collect()
            })
            .unwrap_or_default();
        Summary {
            campaign_id: s.campaign_id.clone(),
            evaluator: s.evaluator,
            seed: s.seed,
            status: s.status,
            current_generation: s.current,
            max_generations: s.config.ga.max_generations,
            population_size: s.config.ga.population_size,
            repeats_required: s.repeats,
            genomes: s.generations.iter().map(|g| g.children.len()).sum(),
            repeats_recorded: self
                .events()
                .filter(|e| matches!(e, Event::RepeatRecorded { .. }))
                .count(),
            pending,
            config: s.config.clone(),
        }
    }
}
