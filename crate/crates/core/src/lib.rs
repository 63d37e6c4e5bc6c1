//! Evolutionary design of granular-jamming gripper membranes.
//!
//! Genomes are Bezier profiles ([`genome`]), meshed as watertight surfaces of
//! revolution ([`mesh`]), evolved with fitness-proportional selection and
//! point-preserving crossover ([`evolve`]), compared against a spherical bag
//! gripper with multiresolution Reeb graphs ([`reeb`]), scored by hand or by a
//! geometric proxy ([`fitness`]) and tracked in a journaled campaign
//! ([`campaign`]).

pub mod campaign;
pub mod curve;
pub mod evolve;
pub mod fitness;
pub mod genome;
pub mod mesh;
pub mod reeb;

pub use curve::Point2;
pub use genome::{Genome, GenomeError, Profile};
pub use mesh::{GripperSolid, MeshError, MeshSettings, TriangleMesh};
