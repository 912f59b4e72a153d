use super::check_ensemble;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Bin family for occupation measures. Each coordinate's `n` finite edges
/// give `n + 1` bins: `(-inf, e_0)`, `[e_0, e_1)`, .., `[e_{n-1}, +inf)`.
#[derive(Clone, Debug, PartialEq)]
pub enum BinSpec {
    State(Vec<f64>),
    Joint { x: Vec<f64>, s: Vec<f64> },
}

impl BinSpec {
    fn validate(&self) -> Result<()> {
        let ok = |e: &[f64]| !e.is_empty() && e.iter().all(|v| v.is_finite()) && e.windows(2).all(|w| w[0] < w[1]);
        let valid = match self {
            BinSpec::State(s) => ok(s),
            BinSpec::Joint { x, s } => ok(x) && ok(s),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::BadEdges)
        }
    }

    fn s_edges(&self) -> &[f64] {
        match self {
            BinSpec::State(s) | BinSpec::Joint { s, .. } => s,
        }
    }

    fn x_edges(&self) -> Option<&[f64]> {
        match self {
            BinSpec::State(_) => None,
            BinSpec::Joint { x, .. } => Some(x),
        }
    }

    fn n_bins(&self) -> usize {
        let s = self.s_edges().len() + 1;
        self.x_edges().map_or(s, |x| (x.len() + 1) * s)
    }

    #[inline]
    fn index(&self, x: f64, s: f64) -> usize {
        let sb = bin_of(self.s_edges(), s);
        match self.x_edges() {
            None => sb,
            Some(xe) => bin_of(xe, x) * (self.s_edges().len() + 1) + sb,
        }
    }
}

#[inline]
pub(crate) fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v)
}

/// Binned estimate of the expected occupation measure
/// `(1/(T n)) Σ_traj Σ_{k<T} 1{(x_k, s_k) ∈ B}`.
///
/// Joint masses are stored row-major with the `x` bin as the outer index.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationHistogram {
    pub bins: BinSpec,
    pub mass: Vec<f64>,
    pub t_samples: usize,
    pub n_trajs: usize,
}

impl OccupationHistogram {
    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// State-coordinate bins as `(lo, hi)` including the infinite tails.
    pub fn s_bins(&self) -> Vec<(f64, f64)> {
        intervals(self.bins.s_edges())
    }

    pub fn s_marginal(&self) -> Vec<f64> {
        let ns = self.bins.s_edges().len() + 1;
        let mut out = vec![0.0; ns];
        for (i, m) in self.mass.iter().enumerate() {
            out[i % ns] += m;
        }
        out
    }

    pub fn l1_distance(&self, other: &OccupationHistogram) -> Result<f64> {
        if self.bins != other.bins {
            return Err(Error::BadEdges);
        }
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum())
    }

    /// Bounds on the mass of `{|s| ≥ radius}` from the state marginal: the
    /// mass of bins contained in the set and of bins meeting it.
    pub fn tail_mass_bounds(&self, radius: f64) -> (f64, f64) {
        let mut lower = 0.0;
        let mut upper = 0.0;
        for ((lo, hi), m) in self.s_bins().into_iter().zip(self.s_marginal()) {
            let inside = lo >= radius || hi <= -radius;
            let meets = hi > radius || lo <= -radius;
            if inside {
                lower += m;
            }
            if inside || meets {
                upper += m;
            }
        }
        (lower, upper)
    }
}

fn intervals(edges: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(edges.len() + 1);
    let mut lo = f64::NEG_INFINITY;
    for &e in edges {
        out.push((lo, e));
        lo = e;
    }
    out.push((lo, f64::INFINITY));
    out
}

/// Streaming occupation counts with snapshots at prefix lengths.
#[derive(Clone, Debug)]
pub struct OccupationCounter {
    bins: BinSpec,
    checkpoints: Vec<usize>,
    counts: Vec<Vec<u64>>,
    len: Option<usize>,
    n_trajs: usize,
}

impl OccupationCounter {
    /// `checkpoints` are prefix lengths at which separate histograms are kept;
    /// the full trajectory length is always included.
    pub fn new(bins: BinSpec, mut checkpoints: Vec<usize>) -> Result<Self> {
        bins.validate()?;
        checkpoints.retain(|&c| c > 0);
        checkpoints.sort_unstable();
        checkpoints.dedup();
        let n = bins.n_bins();
        Ok(OccupationCounter {
            counts: vec![vec![0; n]; checkpoints.len() + 1],
            bins,
            checkpoints,
            len: None,
            n_trajs: 0,
        })
    }

    pub fn push(&mut self, traj: &Trajectory) -> Result<()> {
        match self.len {
            Some(len) if len != traj.len() => {
                return Err(Error::RaggedEnsemble {
                    expected: len,
                    found: traj.len(),
                })
            }
            None => {
                if let Some(&c) = self.checkpoints.iter().find(|&&c| c > traj.len()) {
                    return Err(Error::invalid("checkpoints", format!("{c} exceeds trajectory length {}", traj.len())));
                }
                self.len = Some(traj.len());
            }
            _ => {}
        }
        let mut running = vec![0u64; self.bins.n_bins()];
        let mut next = 0;
        for k in 0..traj.len() {
            running[self.bins.index(traj.x[k], traj.s[k])] += 1;
            while next < self.checkpoints.len() && self.checkpoints[next] == k + 1 {
                add(&mut self.counts[next], &running);
                next += 1;
            }
        }
        let last = self.counts.len() - 1;
        add(&mut self.counts[last], &running);
        self.n_trajs += 1;
        Ok(())
    }

    fn build(&self, slot: usize, t_samples: usize) -> Result<OccupationHistogram> {
        if self.n_trajs == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let total = (t_samples * self.n_trajs) as f64;
        Ok(OccupationHistogram {
            bins: self.bins.clone(),
            mass: self.counts[slot].iter().map(|&c| c as f64 / total).collect(),
            t_samples,
            n_trajs: self.n_trajs,
        })
    }

    pub fn histogram(&self) -> Result<OccupationHistogram> {
        let len = self.len.ok_or(Error::EmptyEnsemble)?;
        if len == 0 {
            return Err(Error::invalid("trajectory", "is empty"));
        }
        self.build(self.counts.len() - 1, len)
    }

    /// Histograms at every checkpoint followed by the full-length one.
    pub fn snapshots(&self) -> Result<Vec<OccupationHistogram>> {
        let mut out = Vec::with_capacity(self.counts.len());
        for (i, &c) in self.checkpoints.iter().enumerate() {
            out.push(self.build(i, c)?);
        }
        out.push(self.histogram()?);
        Ok(out)
    }

    /// L1 distances between successive snapshots.
    pub fn l1_deltas(&self) -> Result<Vec<f64>> {
        let snaps = self.snapshots()?;
        snaps.windows(2).map(|w| w[0].l1_distance(&w[1])).collect()
    }
}

fn add(into: &mut [u64], from: &[u64]) {
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

pub fn occupation_histogram(trajs: &[Trajectory], bins: &BinSpec) -> Result<OccupationHistogram> {
    check_ensemble(trajs)?;
    let mut counter = OccupationCounter::new(bins.clone(), Vec::new())?;
    for t in trajs {
        counter.push(t)?;
    }
    counter.histogram()
}

/// L1 distances between occupation histograms over the prefixes `T/2^j`,
/// `j = levels-1, .., 0`, in increasing prefix length.
pub fn occupation_l1_deltas(trajs: &[Trajectory], bins: &BinSpec, levels: u32) -> Result<Vec<f64>> {
    let len = check_ensemble(trajs)?;
    let checkpoints = (1..levels).map(|j| len >> j).collect();
    let mut counter = OccupationCounter::new(bins.clone(), checkpoints)?;
    for t in trajs {
        counter.push(t)?;
    }
    counter.l1_deltas()
}
