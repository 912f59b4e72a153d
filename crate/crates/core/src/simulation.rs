//! Seeded trajectory generation and deterministic ensemble traversal.

use rayon::prelude::*;

use crate::error::Result;
use crate::schemes::Scheme;
use crate::sources::{SourceStream, ValidatedSpec};
use crate::trajectory::Trajectory;

/// Anything that can produce a trajectory from an initial condition and a seed.
pub trait System: Sync {
    fn simulate(&self, initial: f64, seed: u64, len: usize) -> Result<Trajectory>;
}

/// A [`Scheme`] fed by a stationary source.
#[derive(Clone, Debug)]
pub struct Driven<S> {
    pub scheme: S,
    pub source: ValidatedSpec,
    pub burn_in: usize,
}

impl<S: Scheme> Driven<S> {
    pub fn new(scheme: S, source: ValidatedSpec, burn_in: usize) -> Self {
        Driven {
            scheme,
            source,
            burn_in,
        }
    }
}

impl<S: Scheme> System for Driven<S> {
    fn simulate(&self, initial: f64, seed: u64, len: usize) -> Result<Trajectory> {
        let mut stream = SourceStream::new(&self.source.reseeded(seed), self.burn_in);
        let mut state = self.scheme.init(initial)?;
        let mut traj = Trajectory::with_capacity(len);
        for _ in 0..len {
            let x = stream.next_sample();
            traj.push(x, self.scheme.observe(&state));
            state = self.scheme.step(&state, x)?;
        }
        Ok(traj)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sub-stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Seed for an initial condition, independent of its position in a list.
pub fn seed_for_initial(master: u64, initial: f64) -> u64 {
    derive_seed(master, initial.to_bits())
}

/// Simulates `seeds.len()` trajectories in parallel and hands them to `visit`
/// strictly in index order, holding at most a few trajectories in memory.
pub fn for_each_trajectory<Y, F>(system: &Y, initial: f64, seeds: &[u64], len: usize, mut visit: F) -> Result<()>
where
    Y: System + ?Sized,
    F: FnMut(usize, Trajectory) -> Result<()>,
{
    let chunk = 2 * rayon::current_num_threads().max(1);
    for (c, block) in seeds.chunks(chunk).enumerate() {
        let trajs: Vec<Result<Trajectory>> = block
            .par_iter()
            .map(|&seed| system.simulate(initial, seed, len))
            .collect();
        for (i, traj) in trajs.into_iter().enumerate() {
            visit(c * chunk + i, traj?)?;
        }
    }
    Ok(())
}

/// Collects a full ensemble. Prefer [`for_each_trajectory`] for large runs.
pub fn simulate_ensemble<Y: System + ?Sized>(system: &Y, initial: f64, seeds: &[u64], len: usize) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(seeds.len());
    for_each_trajectory(system, initial, seeds, len, |_, t| {
        out.push(t);
        Ok(())
    })?;
    Ok(out)
}

pub fn ensemble_seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(master, i)).collect()
}
