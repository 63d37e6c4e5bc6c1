//! `membrane` command line: campaigns, headless runs, meshing, Reeb-graph
//! comparison and the dashboard API server.

pub mod error;
pub mod server;
pub mod service;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use membrane_core::campaign::{Campaign, EvaluatorKind, Storage};
use membrane_core::evolve::RunConfig;
use membrane_core::mesh::{self, stl, MeshReport};
use membrane_core::reeb::{self, MRGraph, DEFAULT_AREA_WEIGHT, DEFAULT_RESOLUTIONS};
use membrane_core::{Genome, MeshSettings, TriangleMesh};
use serde_json::json;

pub use error::CliError;
use service::Command;

pub const DIR_ENV: &str = "MEMBRANE_EVOLVE_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "membrane",
    version,
    about = "Evolve granular-jamming gripper membranes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Top,
}

#[derive(Debug, Subcommand)]
pub enum Top {
    /// Manage a journaled campaign
    Campaign(CampaignArgs),
    /// Headless proxy-evaluated runs
    #[command(subcommand)]
    Evolve(EvolveCmd),
    /// Build and check gripper meshes
    #[command(subcommand)]
    Mesh(MeshCmd),
    /// Multiresolution Reeb graph similarity
    #[command(subcommand)]
    Reeb(ReebCmd),
    /// Serve the dashboard HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = DIR_ENV)]
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Campaign directory
    #[arg(long, global = true, env = DIR_ENV)]
    pub dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CampaignCmd,
}

#[derive(Debug, Subcommand)]
pub enum CampaignCmd {
    Init {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "manual")]
        evaluator: EvaluatorKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Status,
    Report {
        /// Write the per-generation table here instead of printing JSON
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Record {
        #[arg(long = "gen")]
        generation: usize,
        #[arg(long)]
        child: usize,
        #[arg(long, allow_negative_numbers = true)]
        force: f64,
    },
    Advance,
    ExportStl {
        #[arg(long = "gen")]
        generation: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Lineage {
        #[arg(long)]
        dot: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvolveCmd {
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep the journal here; in memory otherwise
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MeshCmd {
    Build {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = MeshSettings::default().angular_segments)]
        segments: usize,
    },
    Validate {
        stl: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReebCmd {
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTIONS)]
        resolutions: usize,
        #[arg(long, default_value_t = DEFAULT_AREA_WEIGHT)]
        weight: f64,
    },
    Batch {
        #[arg(long)]
        dir: PathBuf,
        /// `bag` or a path to a reference STL
        #[arg(long = "ref", default_value = "bag")]
        reference: String,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serialises")
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn campaign_dir(dir: Option<PathBuf>) -> Result<PathBuf, CliError> {
    dir.ok_or_else(|| CliError::new("invalid-request", format!("pass --dir or set {DIR_ENV}")))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_mesh(path: &Path) -> Result<TriangleMesh, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    stl::read_stl(std::io::BufReader::new(f)).map_err(|e| CliError::io(path, e))
}

fn graph(path: &Path, resolutions: usize) -> Result<MRGraph, CliError> {
    reeb::build_mrg(&read_mesh(path)?, resolutions)
        .map_err(|e| CliError::new("reeb-error", format!("{}: {e}", path.display())))
}

/// Runs one command and returns what it prints on stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Top::Campaign(args) => run_campaign(args),
        Top::Evolve(EvolveCmd::Run { config, seed, dir }) => {
            let config = load_config(config.as_deref())?;
            let storage = dir.map_or(Storage::Memory, Storage::Directory);
            let mut c = Campaign::init(config, EvaluatorKind::Proxy, seed, storage)?;
            while c.state().status == membrane_core::campaign::Status::ReadyToAdvance {
                service::execute(&mut c, Command::Advance)?;
            }
            Ok(pretty(&json!({
                "summary": c.summary(),
                "report": c.report(),
            })))
        }
        Top::Mesh(MeshCmd::Build {
            genome,
            out,
            segments,
        }) => {
            let text = fs::read_to_string(&genome).map_err(|e| CliError::io(&genome, e))?;
            let g = Genome::from_text(&text)?;
            let settings = MeshSettings {
                angular_segments: segments,
                ..MeshSettings::default()
            };
            let solid = mesh::assemble(&g, &settings)?;
            let id = out
                .file_stem()
                .map_or("gripper".into(), |s| s.to_string_lossy().into_owned());
            write(&out, stl::to_stl_bytes(&solid.combined, &id))?;
            Ok(pretty(&mesh::validate_mesh(&solid.combined)))
        }
        Top::Mesh(MeshCmd::Validate { stl }) => {
            let report: MeshReport = mesh::validate_mesh(&read_mesh(&stl)?);
            if report.is_valid_solid() && report.euler_characteristic == 2 {
                Ok(pretty(&report))
            } else {
                Err(CliError::new(
                    "invalid-mesh",
                    format!(
                        "{}: watertight={} oriented={} degenerate={} volume={} euler={}",
                        stl.display(),
                        report.watertight,
                        report.oriented,
                        report.degenerate_triangles,
                        report.signed_volume,
                        report.euler_characteristic
                    ),
                ))
            }
        }
        Top::Reeb(ReebCmd::Compare {
            a,
            b,
            resolutions,
            weight,
        }) => {
            let s = reeb::similarity(&graph(&a, resolutions)?, &graph(&b, resolutions)?, weight)?;
            Ok(format!("{:?}", (s * 1e9).round() / 1e9))
        }
        Top::Reeb(ReebCmd::Batch {
            dir,
            reference,
            csv,
        }) => {
            let reference = if reference == "bag" {
                reeb::build_mrg(&reeb::default_bag(), DEFAULT_RESOLUTIONS)?
            } else {
                graph(Path::new(&reference), DEFAULT_RESOLUTIONS)?
            };
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| CliError::io(&dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("stl")))
                .collect();
            files.sort();
            let mut table = String::from("id,similarity\n");
            for f in &files {
                let s = reeb::similarity(
                    &graph(f, DEFAULT_RESOLUTIONS)?,
                    &reference,
                    DEFAULT_AREA_WEIGHT,
                )?;
                let id = f
                    .file_stem()
                    .expect("stl file has a stem")
                    .to_string_lossy();
                table.push_str(&format!("{id},{s}\n"));
            }
            match csv {
                Some(path) => {
                    write(&path, &table)?;
                    Ok(format!("wrote {} rows to {}", files.len(), path.display()))
                }
                None => Ok(table.trim_end().to_string()),
            }
        }
        Top::Serve { addr, dir } => {
            let c = service::shared(Campaign::open(&dir)?);
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| CliError::new("io-error", e.to_string()))?;
            rt.block_on(server::serve(addr, c))
                .map_err(|e| CliError::new("io-error", format!("{addr}: {e}")))?;
            Ok(String::new())
        }
    }
}

fn run_campaign(args: CampaignArgs) -> Result<String, CliError> {
    let dir = campaign_dir(args.dir)?;
    if let CampaignCmd::Init {
        config,
        evaluator,
        seed,
    } = &args.command
    {
        let config = load_config(config.as_deref())?;
        let c = Campaign::init(config, *evaluator, *seed, Storage::Directory(dir))?;
        return Ok(pretty(&c.summary()));
    }
    let mut c = Campaign::open(&dir)?;
    match args.command {
        CampaignCmd::Init { .. } => unreachable!("handled above"),
        CampaignCmd::Status => Ok(pretty(&c.summary())),
        CampaignCmd::Report { csv: Some(path) } => {
            let report = c.report();
            write(&path, report.to_csv())?;
            Ok(format!(
                "wrote {} rows to {}",
                report.rows.len(),
                path.display()
            ))
        }
        CampaignCmd::Report { csv: None } => Ok(pretty(&c.report())),
        CampaignCmd::Record {
            generation,
            child,
            force,
        } => {
            let cmd = Command::RecordRepeat {
                generation,
                child,
                force_newtons: force,
            };
            Ok(pretty(&service::execute(&mut c, cmd)?))
        }
        CampaignCmd::Advance => Ok(pretty(&service::execute(&mut c, Command::Advance)?)),
        CampaignCmd::ExportStl { generation, out } => {
            Ok(pretty(&c.export_generation(generation, &out)?))
        }
        CampaignCmd::Lineage { dot: Some(path) } => {
            let lineage = c.lineage();
            write(&path, lineage.to_dot())?;
            Ok(format!(
                "wrote {} nodes and {} edges to {}",
                lineage.nodes.len(),
                lineage.edges.len(),
                path.display()
            ))
        }
        CampaignCmd::Lineage { dot: None } => Ok(pretty(&c.lineage())),
    }
}
