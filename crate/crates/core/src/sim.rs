//! The evolving multigraph process.
//!
//! Starting from a single isolated vertex, each time step performs exactly
//! one of:
//!
//! 1. (prob. `alpha1`) add a vertex joined by `m` edges to existing vertices
//!    chosen preferentially, i.e. `w` with probability `d_w / 2e`;
//! 2. (prob. `alpha - alpha1`) add `m` edges whose endpoints are both chosen
//!    preferentially;
//! 3. (prob. `1 - alpha`) delete `min(m, e)` uniformly chosen edges.
//!
//! Loops and parallel edges are kept; vertices are never removed. All
//! preferential draws inside one step see the degrees at the start of the
//! step: new edges are buffered and committed after the draws.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{DegreeHistogram, TrajectorySample};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("preferential sampling needs at least one edge")]
    EmptyGraph,
    #[error("horizon must be >= 1")]
    BadHorizon,
}

/// Identifies one independent random stream: `(seed, stream)` always yields
/// the same ChaCha8 keystream, whatever thread runs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Number of edges a new vertex receives when the graph has no edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColdStart {
    /// One edge to a uniformly chosen vertex.
    #[default]
    One,
    /// `m` parallel edges to one uniformly chosen vertex.
    M,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cold_start: ColdStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    VertexAdded { edges: usize },
    EdgesAdded(usize),
    EdgesDeleted(usize),
    NoOp,
}

#[derive(Debug, Clone)]
pub struct MultigraphState {
    step: u64,
    degree: Vec<u32>,
    edges: Vec<[u32; 2]>,
    pending: Vec<u32>,
}

impl Default for MultigraphState {
    fn default() -> Self {
        Self::new()
    }
}

impl MultigraphState {
    /// `G_1`: one isolated vertex at time 1.
    pub fn new() -> Self {
        MultigraphState {
            step: 1,
            degree: vec![0],
            edges: Vec::new(),
            pending: Vec::new(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn vertex_count(&self) -> usize {
        self.degree.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degree
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    pub fn max_degree(&self) -> u32 {
        self.degree.iter().copied().max().unwrap_or(0)
    }

    /// `sum(degree) == 2 |E|`.
    pub fn degree_sum_consistent(&self) -> bool {
        self.degree.iter().map(|&d| d as u64).sum::<u64>() == 2 * self.edges.len() as u64
    }

    pub fn histogram(&self, trial_id: u64) -> DegreeHistogram {
        let mut counts = vec![0u64; self.max_degree() as usize + 1];
        for &d in &self.degree {
            counts[d as usize] += 1;
        }
        DegreeHistogram {
            t: self.step,
            trial_id,
            counts,
        }
    }

    pub fn sample(&self) -> TrajectorySample {
        TrajectorySample {
            t: self.step,
            edges: self.edges.len() as u64,
            vertices: self.degree.len() as u64,
            max_degree: self.max_degree() as u64,
        }
    }

    /// Draws `w` with probability `degree[w] / 2e`: a uniform edge, then a
    /// uniform end of it (both ends of a loop are the same vertex).
    pub fn sample_preferential<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u32, SimError> {
        if self.edges.is_empty() {
            return Err(SimError::EmptyGraph);
        }
        let edge = self.edges[rng.random_range(0..self.edges.len())];
        Ok(edge[rng.random_range(0..2usize)])
    }

    fn add_vertex(&mut self) -> u32 {
        self.degree.push(0);
        (self.degree.len() - 1) as u32
    }

    fn add_edge(&mut self, a: u32, b: u32) {
        self.degree[a as usize] += 1;
        self.degree[b as usize] += 1;
        self.edges.push([a, b]);
    }

    /// Executes one time step.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        params: &ModelParams,
        config: &SimConfig,
        rng: &mut R,
    ) -> StepOutcome {
        let m = params.m() as usize;
        let e = self.edges.len();
        let u: f64 = rng.random();
        let outcome = if u < params.alpha1() {
            if e > 0 {
                self.pending.clear();
                for _ in 0..m {
                    let w = self.sample_preferential(rng).expect("e > 0");
                    self.pending.push(w);
                }
                let x = self.add_vertex();
                for i in 0..m {
                    let w = self.pending[i];
                    self.add_edge(x, w);
                }
                StepOutcome::VertexAdded { edges: m }
            } else {
                let w = rng.random_range(0..self.degree.len()) as u32;
                let x = self.add_vertex();
                let count = match config.cold_start {
                    ColdStart::One => 1,
                    ColdStart::M => m,
                };
                for _ in 0..count {
                    self.add_edge(x, w);
                }
                StepOutcome::VertexAdded { edges: count }
            }
        } else if u < params.alpha() {
            if e > 0 {
                self.pending.clear();
                for _ in 0..2 * m {
                    let w = self.sample_preferential(rng).expect("e > 0");
                    self.pending.push(w);
                }
                for i in 0..m {
                    let (a, b) = (self.pending[2 * i], self.pending[2 * i + 1]);
                    self.add_edge(a, b);
                }
                StepOutcome::EdgesAdded(m)
            } else {
                StepOutcome::NoOp
            }
        } else {
            let count = m.min(e);
            for _ in 0..count {
                let idx = rng.random_range(0..self.edges.len());
                let [a, b] = self.edges.swap_remove(idx);
                self.degree[a as usize] -= 1;
                self.degree[b as usize] -= 1;
            }
            StepOutcome::EdgesDeleted(count)
        };
        self.step += 1;
        debug_assert!(self.degree_sum_consistent());
        outcome
    }

    /// Writes the edge list as `u v` lines.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for [a, b] in &self.edges {
            writeln!(out, "{a} {b}")?;
        }
        Ok(())
    }
}

/// When to record histograms and trajectory samples during a trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub horizon: u64,
    pub snapshots: Vec<u64>,
    pub trajectory: Vec<u64>,
}

fn powers_of_two_upto(start_exp: u32, horizon: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (start_exp..64)
        .map(|e| 1u64 << e)
        .take_while(|&t| t < horizon)
        .collect();
    v.push(horizon);
    v
}

impl TrialPlan {
    /// Histograms at `2^10, 2^11, ...` and `T`; trajectory at every power of
    /// two and `T`.
    pub fn new(horizon: u64) -> Result<Self, SimError> {
        if horizon == 0 {
            return Err(SimError::BadHorizon);
        }
        Ok(TrialPlan {
            horizon,
            snapshots: powers_of_two_upto(10, horizon),
            trajectory: powers_of_two_upto(0, horizon),
        })
    }

    pub fn with_snapshots(mut self, mut times: Vec<u64>) -> Self {
        times.retain(|&t| t >= 1 && t <= self.horizon);
        times.sort_unstable();
        times.dedup();
        self.snapshots = times;
        self
    }

    /// Only the final state.
    pub fn final_only(horizon: u64) -> Result<Self, SimError> {
        Ok(Self::new(horizon)?.with_snapshots(vec![horizon]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub stream: RngStream,
    pub histograms: Vec<DegreeHistogram>,
    pub trajectory: Vec<TrajectorySample>,
}

impl TrialOutput {
    pub fn final_histogram(&self) -> Option<&DegreeHistogram> {
        self.histograms.last()
    }

    pub fn final_sample(&self) -> Option<&TrajectorySample> {
        self.trajectory.last()
    }
}

/// Runs the process from `G_1` to time `plan.horizon`.
pub fn run_trial(
    params: &ModelParams,
    config: &SimConfig,
    plan: &TrialPlan,
    stream: RngStream,
) -> TrialOutput {
    let mut rng = stream.rng();
    let mut state = MultigraphState::new();
    let mut histograms = Vec::with_capacity(plan.snapshots.len());
    let mut trajectory = Vec::with_capacity(plan.trajectory.len());
    let mut snaps = plan.snapshots.iter().peekable();
    let mut traj = plan.trajectory.iter().peekable();
    loop {
        let t = state.step();
        if snaps.next_if_eq(&&t).is_some() {
            assert!(
                state.degree_sum_consistent(),
                "degree sum mismatch at t = {t}"
            );
            histograms.push(state.histogram(stream.stream));
        }
        if traj.next_if_eq(&&t).is_some() {
            trajectory.push(state.sample());
        }
        if t >= plan.horizon {
            break;
        }
        state.advance(params, config, &mut rng);
    }
    TrialOutput {
        stream,
        histograms,
        trajectory,
    }
}

/// Runs `trials` independent trials in parallel; trial `i` uses stream `i`.
/// The output order and content do not depend on thread scheduling.
pub fn run_trials(
    params: &ModelParams,
    config: &SimConfig,
    plan: &TrialPlan,
    seed: u64,
    trials: u64,
) -> Vec<TrialOutput> {
    (0..trials)
        .into_par_iter()
        .map(|i| run_trial(params, config, plan, RngStream::new(seed, i)))
        .collect()
}
