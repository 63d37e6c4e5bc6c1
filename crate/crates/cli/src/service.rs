//! Command handlers shared by the CLI and the HTTP API.
//!
//! A campaign has a single writer. Every mutation is a [`Command`] passed to
//! [`execute`] while holding the campaign lock, so the lock acts as the
//! command queue and reads taken under it are snapshot-consistent.

use std::sync::{Arc, Mutex, MutexGuard};

use membrane_core::campaign::{Campaign, CampaignError, Child, Generation, Summary};
use membrane_core::{Genome, Point2};
use serde::{Deserialize, Serialize};

pub type SharedCampaign = Arc<Mutex<Campaign>>;

pub fn shared(c: Campaign) -> SharedCampaign {
    Arc::new(Mutex::new(c))
}

pub fn lock(c: &SharedCampaign) -> MutexGuard<'_, Campaign> {
    // a panicked writer never commits a partial event batch
    c.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    RecordRepeat {
        generation: usize,
        child: usize,
        force_newtons: f64,
    },
    Advance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Recorded(ChildView),
    Advanced(Summary),
}

pub fn execute(c: &mut Campaign, cmd: Command) -> Result<Outcome, CampaignError> {
    match cmd {
        Command::RecordRepeat {
            generation,
            child,
            force_newtons,
        } => {
            c.record_fitness(generation, child, force_newtons)?;
            Ok(Outcome::Recorded(child_view(c, generation, child)?))
        }
        Command::Advance => {
            c.advance()?;
            Ok(Outcome::Advanced(c.summary()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChildView {
    pub generation: usize,
    pub child: usize,
    #[serde(flatten)]
    pub inner: Child,
    pub fitness: Option<f64>,
    pub status: membrane_core::campaign::Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationView {
    pub generation: usize,
    pub current: bool,
    pub complete: bool,
    pub children: Vec<ChildView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileView {
    pub id: String,
    pub genome: Genome,
    pub points: Vec<Point2>,
}

pub fn child_view(c: &Campaign, g: usize, i: usize) -> Result<ChildView, CampaignError> {
    let s = c.state();
    let child = c.child(g, i)?;
    Ok(ChildView {
        generation: g,
        child: i,
        fitness: child.fitness(s.evaluator),
        inner: child.clone(),
        status: s.status,
    })
}

pub fn generation_view(c: &Campaign, g: usize) -> Result<GenerationView, CampaignError> {
    let gen: &Generation = c.generation(g)?;
    Ok(GenerationView {
        generation: g,
        current: g == c.state().current,
        complete: gen.is_complete(c.state().evaluator),
        children: (0..gen.children.len())
            .map(|i| child_view(c, g, i))
            .collect::<Result<_, _>>()?,
    })
}

pub fn profile_view(c: &Campaign, g: usize, i: usize) -> Result<ProfileView, CampaignError> {
    let child = c.child(g, i)?;
    Ok(ProfileView {
        id: child.id.clone(),
        genome: child.genome.clone(),
        points: c.child_profile(g, i)?.0,
    })
}
