//! Planners over a manifold sequence: PSM* with per-manifold subtrees, its
//! greedy and single-tree variants, and an RRT* baseline with sampled
//! intersection goals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{project_with, Configuration, ProjectionOptions};
use crate::scene::{FreeSpaceState, Task};
use crate::steering::{psm_steer, steer_point, ManifoldPair, SteerParams, MIN_DIRECTION_NORM};
use crate::tree::{ExtendParams, NodeId, Tree};

/// Probability of sampling the fixed goal in the RRT* baseline.
pub const GOAL_BIAS: f64 = 0.1;
/// Attempts at finding a valid intersection goal in the RRT* baseline.
pub const IK_RETRIES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub rho: f64,
    pub r: f64,
    pub m: usize,
    /// Rewiring scale; `None` means twice the largest side of the bounds.
    #[serde(default)]
    pub gamma_rrt: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_project_iters")]
    pub max_project_iters: usize,
}

fn default_project_iters() -> usize {
    200
}

impl PlannerParams {
    pub fn point_defaults() -> Self {
        PlannerParams {
            alpha: 1.0,
            beta: 0.1,
            eps: 0.01,
            rho: 0.1,
            r: 1.5,
            m: 1200,
            gamma_rrt: None,
            seed: 0,
            max_project_iters: default_project_iters(),
        }
    }

    pub fn robot_defaults() -> Self {
        PlannerParams {
            alpha: 1.0,
            beta: 0.3,
            eps: 1e-5,
            rho: 0.5,
            r: 0.5,
            m: 2000,
            gamma_rrt: None,
            seed: 0,
            max_project_iters: default_project_iters(),
        }
    }

    /// Defaults suited to the task: robot tasks use the tighter tolerances.
    pub fn defaults_for(task: &Task) -> Self {
        match task.body.system() {
            Some(_) => Self::robot_defaults(),
            None => Self::point_defaults(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.into()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1]");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if !(self.rho >= 0.0) {
            return bad("rho must be non-negative");
        }
        if !(self.r > 0.0) {
            return bad("r must be positive");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if let Some(g) = self.gamma_rrt {
            if !(g > 0.0) {
                return bad("gamma_rrt must be positive");
            }
        }
        if self.max_project_iters == 0 {
            return bad("max_project_iters must be at least 1");
        }
        Ok(())
    }

    pub fn gamma(&self, task: &Task) -> f64 {
        self.gamma_rrt.unwrap_or_else(|| 2.0 * task.bounds.span())
    }

    fn steer(&self) -> SteerParams {
        SteerParams::new(self.alpha, self.beta, self.r)
    }

    fn projection(&self) -> ProjectionOptions {
        ProjectionOptions::new(self.eps, self.max_project_iters)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Psm,
    PsmGreedy,
    PsmSingle,
    RrtstarIk,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [
        PlannerKind::Psm,
        PlannerKind::PsmGreedy,
        PlannerKind::PsmSingle,
        PlannerKind::RrtstarIk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Psm => "psm",
            PlannerKind::PsmGreedy => "psm-greedy",
            PlannerKind::PsmSingle => "psm-single",
            PlannerKind::RrtstarIk => "rrtstar-ik",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn run(self, task: &Task, params: &PlannerParams) -> Result<Plan> {
        match self {
            PlannerKind::Psm => psm_star(task, params),
            PlannerKind::PsmGreedy => psm_star_greedy(task, params),
            PlannerKind::PsmSingle => psm_star_single_tree(task, params),
            PlannerKind::RrtstarIk => rrt_star_ik(task, params),
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Piecewise-linear path through the manifold sequence. Segment `i` runs
/// from `configs[segment_bounds[i]]` to `configs[segment_bounds[i + 1]]`;
/// neighbouring segments share their boundary configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub configs: Vec<Configuration>,
    pub segment_bounds: Vec<usize>,
    pub total_cost: f64,
}

impl SolutionPath {
    pub fn new(configs: Vec<Configuration>, segment_bounds: Vec<usize>) -> Self {
        let total_cost = path_length(&configs);
        SolutionPath {
            configs,
            segment_bounds,
            total_cost,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.segment_bounds.len().saturating_sub(1)
    }

    pub fn segment(&self, i: usize) -> &[Configuration] {
        &self.configs[self.segment_bounds[i]..=self.segment_bounds[i + 1]]
    }

    /// The configuration ending each segment.
    pub fn boundaries(&self) -> Vec<Configuration> {
        self.segment_bounds[1..].iter().map(|&b| self.configs[b].clone()).collect()
    }

    pub fn max_edge(&self) -> f64 {
        self.configs.windows(2).map(|w| w[0].distance(&w[1])).fold(0.0, f64::max)
    }
}

pub fn path_length(configs: &[Configuration]) -> f64 {
    configs.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    /// Loop bodies executed, including discarded samples.
    pub iterations: usize,
    /// Node count of each tree (one entry for the single-tree variant).
    pub tree_sizes: Vec<usize>,
    /// Intersection nodes kept after each phase.
    pub goal_counts: Vec<usize>,
    /// Best goal-reaching cost after each iteration of the final phase
    /// (left empty by the RRT* baseline).
    pub best_cost_history: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub path: SolutionPath,
    pub stats: PlanStats,
}

/// Intersection nodes kept at pairwise distance at least `rho`.
#[derive(Clone, Debug)]
pub struct GoalSet {
    rho: f64,
    ids: Vec<NodeId>,
    configs: Vec<Configuration>,
}

impl GoalSet {
    pub fn new(rho: f64) -> Self {
        GoalSet {
            rho,
            ids: Vec::new(),
            configs: Vec::new(),
        }
    }

    /// Adds the node unless an existing member lies closer than `rho`.
    pub fn try_insert(&mut self, id: NodeId, q: &Configuration) -> bool {
        if self.configs.iter().any(|c| c.distance(q) < self.rho) {
            return false;
        }
        self.ids.push(id);
        self.configs.push(q.clone());
        true
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn check_start(task: &Task, params: &PlannerParams) -> Result<()> {
    params.validate()?;
    let res = task.manifolds[0].residual(&task.start);
    if !(res <= params.eps) {
        return Err(Error::StartOffManifold(res));
    }
    Ok(())
}

fn cheapest(tree: &Tree, ids: &[NodeId]) -> Option<NodeId> {
    let mut best: Option<NodeId> = None;
    for &id in ids {
        if best.is_none_or(|b| tree.node(id).cost < tree.node(b).cost) {
            best = Some(id);
        }
    }
    best
}

fn best_cost(tree: &Tree, ids: &[NodeId]) -> Option<f64> {
    cheapest(tree, ids).map(|id| tree.node(id).cost)
}

/// How the next subtree is seeded from the intersection nodes.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Seeding {
    All,
    Cheapest,
}

pub fn psm_star(task: &Task, params: &PlannerParams) -> Result<Plan> {
    subtree_planner(task, params, Seeding::All)
}

/// PSM* seeding each subtree with only the cheapest intersection node.
pub fn psm_star_greedy(task: &Task, params: &PlannerParams) -> Result<Plan> {
    subtree_planner(task, params, Seeding::Cheapest)
}

fn subtree_planner(task: &Task, params: &PlannerParams, seeding: Seeding) -> Result<Plan> {
    check_start(task, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = task.n_segments();
    let (steer, proj) = (params.steer(), params.projection());
    let extend = ExtendParams {
        gamma: params.gamma(task),
        alpha: params.alpha,
        layer: 0,
        entry: false,
    };
    let mut stats = PlanStats::default();
    let mut trees: Vec<Tree> = Vec::with_capacity(n);
    let mut tree = Tree::with_root(task.start.clone(), usize::MAX);
    let mut fs = task.free_space.clone();

    for i in 0..n {
        let pair = ManifoldPair::new(&task.manifolds[i], &task.manifolds[i + 1]);
        let last = i + 1 == n;
        let mut goals = GoalSet::new(params.rho);
        let mut reached: Vec<NodeId> = Vec::new();

        for _ in 0..params.m {
            stats.iterations += 1;
            let q_rand = task.bounds.sample(&mut rng);
            let near = tree.nearest(&q_rand);
            let attempt = psm_steer(&steer, &proj, &pair, &tree.node(near).config, &q_rand, &mut rng);
            if let Ok(q_new) = attempt.result {
                if pair.current.residual(&q_new) <= params.eps && task.in_bounds(&q_new) {
                    let on_next = pair.next.residual(&q_new) < params.eps;
                    let inserted = tree.rrt_star_extend(near, q_new, &extend, |a, b, _| task.segment_free(a, b, &fs));
                    if let (Some(id), true) = (inserted, on_next) {
                        reached.push(id);
                        goals.try_insert(id, &tree.node(id).config);
                    }
                }
            }
            if last {
                stats.best_cost_history.push(best_cost(&tree, &reached));
            }
        }

        stats.tree_sizes.push(tree.len());
        stats.goal_counts.push(goals.len());
        if last {
            let best = cheapest(&tree, &reached).ok_or(Error::PhaseFailed { phase: i })?;
            trees.push(tree);
            return Ok(Plan {
                path: extract_subtree_path(&trees, best),
                stats,
            });
        }
        if goals.is_empty() {
            return Err(Error::PhaseFailed { phase: i });
        }

        fs = task.advance_free_space(i, &fs, &goals.configs()[0])?;
        let seeds: Vec<NodeId> = match seeding {
            Seeding::All => goals.ids().to_vec(),
            Seeding::Cheapest => cheapest(&tree, goals.ids()).into_iter().collect(),
        };
        let mut next = Tree::empty(usize::MAX);
        for id in seeds {
            let node = tree.node(id);
            next.add_seed(node.config.clone(), node.cost, id);
        }
        trees.push(std::mem::replace(&mut tree, next));
    }
    unreachable!("a task has at least one segment")
}

/// Walks back from `best` in the last tree through seed origins.
fn extract_subtree_path(trees: &[Tree], best: NodeId) -> SolutionPath {
    let mut segments: Vec<Vec<Configuration>> = Vec::with_capacity(trees.len());
    let mut t = trees.len() - 1;
    let mut id = best;
    loop {
        let (ids, origin) = trees[t].branch(id);
        // a seed repeats the configuration of its origin
        let skip = usize::from(origin.is_some());
        segments.push(ids[skip..].iter().map(|&i| trees[t].node(i).config.clone()).collect());
        match origin {
            Some(o) => {
                assert!(t > 0, "seed in the first tree");
                t -= 1;
                id = o;
            }
            None => {
                assert_eq!(t, 0, "walk ended before the first tree");
                break;
            }
        }
    }
    segments.reverse();
    let mut configs = Vec::new();
    let mut bounds = vec![0];
    for seg in segments {
        configs.extend(seg);
        bounds.push(configs.len() - 1);
    }
    SolutionPath::new(configs, bounds)
}

/// One tree over the whole sequence; each node carries the index of the
/// manifold it was grown on and free space is tracked per layer.
pub fn psm_star_single_tree(task: &Task, params: &PlannerParams) -> Result<Plan> {
    check_start(task, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = task.n_segments();
    let (steer, proj) = (params.steer(), params.projection());
    let gamma = params.gamma(task);
    let pairs: Vec<ManifoldPair> = (0..n)
        .map(|i| ManifoldPair::new(&task.manifolds[i], &task.manifolds[i + 1]))
        .collect();
    let mut fs_by_layer: Vec<Option<FreeSpaceState>> = vec![None; n];
    fs_by_layer[0] = Some(task.free_space.clone());
    let mut tree = Tree::with_root(task.start.clone(), n);
    let mut reached: Vec<NodeId> = Vec::new();
    let mut stats = PlanStats::default();

    for _ in 0..n * params.m {
        stats.iterations += 1;
        let q_rand = task.bounds.sample(&mut rng);
        let near = tree.nearest(&q_rand);
        let layer = tree.node(near).layer;
        let pair = &pairs[layer];
        let attempt = psm_steer(&steer, &proj, pair, &tree.node(near).config, &q_rand, &mut rng);
        if let Ok(q_new) = attempt.result {
            if pair.current.residual(&q_new) <= params.eps && task.in_bounds(&q_new) {
                let on_next = pair.next.residual(&q_new) < params.eps;
                let extend = ExtendParams {
                    gamma,
                    alpha: params.alpha,
                    layer: layer + usize::from(on_next),
                    entry: on_next,
                };
                let inserted = tree.rrt_star_extend(near, q_new, &extend, |a, b, l| {
                    let fs = fs_by_layer[l].as_ref().expect("free space of an occupied layer");
                    task.segment_free(a, b, fs)
                });
                if let (Some(id), true) = (inserted, on_next) {
                    if layer + 1 == n {
                        reached.push(id);
                    } else if fs_by_layer[layer + 1].is_none() {
                        let fs = fs_by_layer[layer].as_ref().expect("current layer free space");
                        fs_by_layer[layer + 1] = Some(task.advance_free_space(layer, fs, &tree.node(id).config)?);
                    }
                }
            }
        }
        stats.best_cost_history.push(best_cost(&tree, &reached));
    }

    stats.tree_sizes.push(tree.len());
    let best = cheapest(&tree, &reached).ok_or_else(|| Error::NoSolution("goal manifold not reached".into()))?;
    let (ids, _) = tree.branch(best);
    let mut bounds = vec![0];
    for (pos, w) in ids.windows(2).enumerate() {
        if tree.node(w[1]).layer != tree.node(w[0]).layer {
            bounds.push(pos + 1);
        }
    }
    let configs = ids.iter().map(|&i| tree.node(i).config.clone()).collect();
    Ok(Plan {
        path: SolutionPath::new(configs, bounds),
        stats,
    })
}

/// RRT* on each manifold toward a randomly sampled intersection
/// configuration, chaining segments end to start.
pub fn rrt_star_ik(task: &Task, params: &PlannerParams) -> Result<Plan> {
    check_start(task, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = task.n_segments();
    let proj = params.projection();
    let extend = ExtendParams {
        gamma: params.gamma(task),
        alpha: params.alpha,
        layer: 0,
        entry: false,
    };
    let mut stats = PlanStats::default();
    let mut fs = task.free_space.clone();
    let mut start = task.start.clone();
    let mut configs = vec![start.clone()];
    let mut bounds = vec![0];

    for i in 0..n {
        let pair = ManifoldPair::new(&task.manifolds[i], &task.manifolds[i + 1]);
        let goal = sample_intersection_goal(task, &pair, &fs, &proj, &mut rng)
            .ok_or_else(|| Error::NoSolution(format!("no intersection goal for segment {i}")))?;
        let mut tree = Tree::with_root(start.clone(), usize::MAX);
        for _ in 0..params.m {
            stats.iterations += 1;
            let q_rand = if rng.gen::<f64>() < GOAL_BIAS {
                goal.clone()
            } else {
                task.bounds.sample(&mut rng)
            };
            let near = tree.nearest(&q_rand);
            let from = &tree.node(near).config;
            let d = steer_point(from, &q_rand, &pair.current);
            let norm = d.norm();
            if norm >= MIN_DIRECTION_NORM {
                let stepped = Configuration::new(from.coords() + d * (params.alpha / norm));
                if let Ok(q_new) = project_with(&stepped, &pair.current, &proj) {
                    if task.in_bounds(&q_new) {
                        tree.rrt_star_extend(near, q_new, &extend, |a, b, _| task.segment_free(a, b, &fs));
                    }
                }
            }
        }
        stats.tree_sizes.push(tree.len());
        let (node, _) = connection(task, &tree, &goal, params.alpha, &fs)
            .ok_or_else(|| Error::NoSolution(format!("segment {i} did not reach its goal")))?;
        let (ids, _) = tree.branch(node);
        configs.extend(ids[1..].iter().map(|&id| tree.node(id).config.clone()));
        if configs.last().is_none_or(|q| q.distance(&goal) > 0.0) {
            configs.push(goal.clone());
        }
        bounds.push(configs.len() - 1);
        if i + 1 < n {
            fs = task.advance_free_space(i, &fs, &goal)?;
        }
        start = goal;
    }
    Ok(Plan {
        path: SolutionPath::new(configs, bounds),
        stats,
    })
}

/// Cheapest node within `alpha` of `goal` with a free straight connection.
fn connection(task: &Task, tree: &Tree, goal: &Configuration, alpha: f64, fs: &FreeSpaceState) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    for (id, node) in tree.nodes().iter().enumerate() {
        let d = node.config.distance(goal);
        if d > alpha {
            continue;
        }
        let c = node.cost + d;
        if best.is_none_or(|(_, bc)| c < bc) && task.segment_free(&node.config, goal, fs) {
            best = Some((id, c));
        }
    }
    best
}

fn sample_intersection_goal<R: Rng>(
    task: &Task,
    pair: &ManifoldPair,
    fs: &FreeSpaceState,
    proj: &ProjectionOptions,
    rng: &mut R,
) -> Option<Configuration> {
    for _ in 0..IK_RETRIES {
        let q = task.bounds.sample(rng);
        if let Ok(g) = project_with(&q, &pair.both, proj) {
            if task.in_bounds(&g) && task.body.config_free(g.as_slice(), fs) {
                return Some(g);
            }
        }
    }
    None
}
