//! Shared fixtures for the benchmarks.

use membrane_core::genome::random_genome;
use membrane_core::mesh::assemble;
use membrane_core::{Genome, MeshSettings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// First `n` printable genomes drawn from a fixed seed.
pub fn printable_genomes(n: usize) -> Vec<Genome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbe9c);
    let settings = MeshSettings::for_fitness();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let g = random_genome(&mut rng).expect("random genome");
        if assemble(&g, &settings).is_ok() {
            out.push(g);
        }
    }
    out
}

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}
