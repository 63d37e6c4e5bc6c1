use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, Campaign, CampaignError, EvaluatorKind};
use crate::evolve::best_so_far;
use crate::genome::Genome;
use crate::mesh::{assemble, envelope, stl, MeshSettings};
use crate::reeb::{self, MRGraph, DEFAULT_AREA_WEIGHT, DEFAULT_RESOLUTIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageNode {
    pub id: String,
    pub generation: usize,
    pub child: usize,
    pub fitness: Option<f64>,
    pub unprintable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageEdge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub nodes: Vec<LineageNode>,
    pub edges: Vec<LineageEdge>,
}

impl Lineage {
    /// Graphviz description, one rank per generation.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lineage {\n  rankdir=TB;\n  node [shape=box];\n");
        let max_gen = self.nodes.iter().map(|n| n.generation).max();
        for g in 0..=max_gen.unwrap_or(0) {
            let ids: Vec<&LineageNode> = self.nodes.iter().filter(|n| n.generation == g).collect();
            if ids.is_empty() {
                continue;
            }
            out.push_str("  { rank=same;");
            for n in &ids {
                let _ = write!(out, " \"{}\";", n.id);
            }
            out.push_str(" }\n");
        }
        for n in &self.nodes {
            let label = match (n.unprintable, n.fitness) {
                (true, _) => "unprintable".to_string(),
                (false, Some(f)) => format!("{f:.3}"),
                (false, None) => "pending".to_string(),
            };
            let _ = writeln!(out, "  \"{}\" [label=\"{}\\n{}\"];", n.id, n.id, label);
        }
        for e in &self.edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub generation: usize,
    pub max_f: f64,
    pub mean_f: f64,
    /// Similarity to the bag of the fittest gripper (first on ties).
    pub best_similarity: f64,
    pub mean_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperStat {
    pub id: String,
    pub generation: usize,
    pub child: usize,
    pub fitness: Option<f64>,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub campaign_id: String,
    pub evaluator: EvaluatorKind,
    /// Proxy scores are unitless surrogates in [0, 1]; manual scores are newtons.
    pub fitness_unit: String,
    pub rows: Vec<ReportRow>,
    pub best_so_far: Vec<f64>,
    pub grippers: Vec<GripperStat>,
}

impl Report {
    pub const CSV_HEADER: &'static str = "generation,max_f,mean_f,best_similarity,mean_similarity";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.generation, r.max_f, r.mean_f, r.best_similarity, r.mean_similarity
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedFile {
    pub child: usize,
    pub id: String,
    pub file: String,
    pub bytes: usize,
    pub triangles: usize,
    pub sha256: String,
    pub genome: Genome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub child: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub campaign_id: String,
    pub generation: usize,
    pub files: Vec<ExportedFile>,
    pub skipped: Vec<SkippedFile>,
}

fn bag_graph() -> &'static MRGraph {
    static BAG: OnceLock<MRGraph> = OnceLock::new();
    BAG.get_or_init(|| {
        reeb::build_mrg(&reeb::default_bag(), DEFAULT_RESOLUTIONS).expect("bag mesh is watertight")
    })
}

/// Similarity of the gripper's outer envelope to the reference bag.
pub fn bag_similarity(genome: &Genome) -> f64 {
    let settings = MeshSettings::for_fitness();
    let profile = genome.to_profile(settings.profile_samples);
    envelope(&profile, settings.angular_segments)
        .ok()
        .and_then(|m| reeb::build_mrg(&m, DEFAULT_RESOLUTIONS).ok())
        .and_then(|g| reeb::similarity(&g, bag_graph(), DEFAULT_AREA_WEIGHT).ok())
        .unwrap_or(0.0)
}

/// Similarity scores are derived data; they are cached per gripper id rather
/// than journaled.
#[derive(Default)]
pub(super) struct SimilarityCache(Mutex<HashMap<String, f64>>);

impl SimilarityCache {
    fn get(&self, id: &str, genome: &Genome) -> f64 {
        if let Some(v) = self.0.lock().expect("cache lock").get(id) {
            return *v;
        }
        let v = bag_similarity(genome);
        self.0.lock().expect("cache lock").insert(id.to_string(), v);
        v
    }
}

impl Campaign {
    pub fn lineage(&self) -> Lineage {
        let s = self.state();
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for gen in &s.generations {
            for (i, c) in gen.children.iter().enumerate() {
                nodes.push(LineageNode {
                    id: c.id.clone(),
                    generation: gen.index,
                    child: i,
                    fitness: c.fitness(s.evaluator),
                    unprintable: c.unprintable.is_some(),
                });
                for &p in &c.parents {
                    edges.push(LineageEdge {
                        from: s.generations[gen.index - 1].children[p].id.clone(),
                        to: c.id.clone(),
                    });
                }
            }
        }
        Lineage { nodes, edges }
    }

    pub fn report(&self) -> Report {
        let s = self.state();
        let mut rows = Vec::new();
        let mut grippers = Vec::new();
        let mut complete = Vec::new();
        for gen in &s.generations {
            let sims: Vec<f64> = gen
                .children
                .iter()
                .map(|c| self.similarity.get(&c.id, &c.genome))
                .collect();
            for (i, c) in gen.children.iter().enumerate() {
                grippers.push(GripperStat {
                    id: c.id.clone(),
                    generation: gen.index,
                    child: i,
                    fitness: c.fitness(s.evaluator),
                    similarity: sims[i],
                });
            }
            let Some(fit) = gen.fitnesses(s.evaluator) else {
                continue;
            };
            let best = fit
                .iter()
                .enumerate()
                .fold(0, |b, (i, f)| if *f > fit[b] { i } else { b });
            rows.push(ReportRow {
                generation: gen.index,
                max_f: fit[best],
                mean_f: fit.iter().sum::<f64>() / fit.len() as f64,
                best_similarity: sims[best],
                mean_similarity: sims.iter().sum::<f64>() / sims.len() as f64,
            });
            complete.push(fit);
        }
        Report {
            campaign_id: s.campaign_id.clone(),
            evaluator: s.evaluator,
            fitness_unit: match s.evaluator {
                EvaluatorKind::Manual => "N".into(),
                EvaluatorKind::Proxy => "proxy-score".into(),
            },
            rows,
            best_so_far: best_so_far(complete),
            grippers,
        }
    }

    /// Binary STL of the full printable solid.
    pub fn child_stl(&self, g: usize, i: usize) -> Result<Vec<u8>, CampaignError> {
        let c = self.child(g, i)?;
        if c.unprintable.is_some() {
            return Err(CampaignError::UnprintableChild(c.id.clone()));
        }
        let solid = assemble(&c.genome, &MeshSettings::default())
            .map_err(|_| CampaignError::UnprintableChild(c.id.clone()))?;
        Ok(stl::to_stl_bytes(
            &solid.combined,
            &format!("{} {}", self.state().campaign_id, c.id),
        ))
    }

    pub fn export_generation(&self, g: usize, out: &Path) -> Result<ExportManifest, CampaignError> {
        let gen = self.generation(g)?;
        fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        let mut manifest = ExportManifest {
            campaign_id: self.state().campaign_id.clone(),
            generation: g,
            files: Vec::new(),
            skipped: Vec::new(),
        };
        for (i, c) in gen.children.iter().enumerate() {
            match self.child_stl(g, i) {
                Ok(bytes) => {
                    let file = format!("gen{g}_child{i}.stl");
                    let path = out.join(&file);
                    fs::write(&path, &bytes).map_err(|e| io_err(&path, e))?;
                    manifest.files.push(ExportedFile {
                        child: i,
                        id: c.id.clone(),
                        file,
                        bytes: bytes.len(),
                        triangles: (bytes.len() - stl::HEADER_LEN - 4) / stl::TRIANGLE_RECORD_LEN,
                        sha256: hex::encode(Sha256::digest(&bytes)),
                        genome: c.genome.clone(),
                    });
                }
                Err(_) => manifest.skipped.push(SkippedFile {
                    child: i,
                    id: c.id.clone(),
                    reason: c
                        .unprintable
                        .clone()
                        .unwrap_or_else(|| "meshing failed at export resolution".into()),
                }),
            }
        }
        let path = out.join(format!("gen{g}_manifest.json"));
        fs::write(
            &path,
            serde_json::to_string_pretty(&manifest).expect("manifest serialises"),
        )
        .map_err(|e| io_err(&path, e))?;
        Ok(manifest)
    }
}
