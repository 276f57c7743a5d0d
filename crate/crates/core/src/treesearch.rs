//! Optimistic tree search over the mixture simplex.
//!
//! Every node is a simplicial cell. Expanding a leaf splits its cell and
//! evaluates both children: SGD warm-started from the parent's model trains
//! on samples from the child's representative mixture, and the validation
//! loss of the result becomes the child's score. The next leaf to expand is
//! the one with the smallest optimistic score `val_loss − 2·ν₂·ρ₂^h`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::problems::{Counting, MixtureSampler, ProblemSuite, TrainedModel};
use crate::rng;
use crate::sgd::{self, StepSchedule, TraceSpec};
use crate::simplex::{MixtureWeights, PartitionStrategy, SimplexCell, MAX_HEIGHT};

/// Optimistic score `val_loss − 2·nu2·rho2^h`.
pub fn b_value(val_loss: f64, nu2: f64, rho2: f64, h: u32) -> f64 {
    val_loss - 2.0 * nu2 * rho2.powf(f64::from(h))
}

/// SGD steps per evaluated child, by child height.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeBudget {
    /// The same number of steps at every height.
    Constant(u64),
    /// Steps for heights `0, 1, 2, …`; the last entry repeats.
    PerHeight(Vec<u64>),
}

impl NodeBudget {
    pub fn at(&self, h: u32) -> u64 {
        match self {
            NodeBudget::Constant(n) => *n,
            NodeBudget::PerHeight(v) => v[(h as usize).min(v.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            NodeBudget::Constant(n) => *n >= 1,
            NodeBudget::PerHeight(v) => !v.is_empty() && v.iter().all(|&n| n >= 1),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("every node budget must be at least one step"))
        }
    }
}

/// Which nodes compete for the final answer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FinalPool {
    /// Only evaluated nodes at the deepest height reached.
    #[default]
    Deepest,
    /// Every evaluated leaf.
    AllLeaves,
}

/// Everything one search needs besides the suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Total SGD step budget `Λ`.
    pub budget: u64,
    pub node_steps: NodeBudget,
    pub strategy: PartitionStrategy,
    pub schedule: StepSchedule,
    pub seed: u64,
    pub nu2: f64,
    pub rho2: f64,
    /// Root model; zeros when `None`.
    pub w0: Option<Vec<f64>>,
    pub final_pool: FinalPool,
}

impl SearchConfig {
    /// Defaults: longest-edge bisection, `ν₂` and `ρ₂` from the suite's
    /// constants, zero root model, deepest-level final pool.
    pub fn new(suite: &ProblemSuite, budget: u64, node_steps: u64, schedule: StepSchedule, seed: u64) -> Self {
        let c = suite.constants();
        SearchConfig {
            budget,
            node_steps: NodeBudget::Constant(node_steps),
            strategy: PartitionStrategy::LongestEdgeBisection,
            schedule,
            seed,
            nu2: c.nu2,
            rho2: c.rho2,
            w0: None,
            final_pool: FinalPool::Deepest,
        }
    }
}

/// A node of the search tree.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchNode {
    pub cell: SimplexCell,
    /// Representative mixture of the cell (its centroid).
    pub alpha: MixtureWeights,
    /// Initial SGD iterate: the parent's model (or `w0` at the root).
    pub start: Vec<f64>,
    /// Final SGD iterate. The root of a multi-source search keeps `w0`.
    pub model: Vec<f64>,
    /// `None` for a root that was never trained.
    pub val_loss: Option<f64>,
    pub b_value: Option<f64>,
    /// SGD steps spent evaluating this node.
    pub steps: u64,
    /// Steps along the warm-start chain ending at this node.
    pub chain_steps: u64,
    pub parent: Option<usize>,
    pub children: Option<(usize, usize)>,
}

impl SearchNode {
    pub fn height(&self) -> u32 {
        self.cell.height()
    }

    pub fn index(&self) -> u128 {
        self.cell.index()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// One evaluated node, in evaluation order.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditEntry {
    pub order: usize,
    /// Arena id of the evaluated node.
    pub node: usize,
    /// Arena id of the node whose expansion produced it.
    pub expanded: Option<usize>,
    pub height: u32,
    pub index: u128,
    pub alpha: MixtureWeights,
    pub steps: u64,
    pub val_loss: f64,
    pub b_value: f64,
}

/// Outcome of [`mix_and_match`].
#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub mixture: MixtureWeights,
    pub model: TrainedModel,
    /// Arena id of the chosen node.
    pub chosen: usize,
    /// `h(Λ)`, the deepest height in the tree.
    pub tree_height: u32,
    /// SGD steps spent, `C`.
    pub total_steps: u64,
    /// Draws counted at the training oracle during the search.
    pub oracle_draws: u64,
    pub expansions: usize,
    pub nodes: Vec<SearchNode>,
    pub audit: Vec<AuditEntry>,
}

impl SearchResult {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug)]
struct LeafKey {
    b: f64,
    height: u32,
    index: u128,
    id: usize,
}

impl LeafKey {
    fn rank(&self, other: &Self) -> Ordering {
        self.b
            .total_cmp(&other.b)
            .then(self.height.cmp(&other.height))
            .then(self.index.cmp(&other.index))
    }
}

impl PartialEq for LeafKey {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}

impl Eq for LeafKey {}

impl PartialOrd for LeafKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LeafKey {
    // Reversed so the max-heap pops the smallest key.
    fn cmp(&self, other: &Self) -> Ordering {
        other.rank(self)
    }
}

/// The leaf with the smallest b-value; ties go to the smaller height, then
/// the smaller index. Leaves without a b-value are not eligible.
pub fn select_leaf<'a>(leaves: &[&'a SearchNode]) -> Result<&'a SearchNode> {
    leaves
        .iter()
        .filter(|n| n.b_value.is_some())
        .min_by(|a, b| {
            a.b_value
                .unwrap()
                .total_cmp(&b.b_value.unwrap())
                .then(a.height().cmp(&b.height()))
                .then(a.index().cmp(&b.index()))
        })
        .copied()
        .ok_or_else(|| Error::param("select_leaf needs at least one evaluated leaf"))
}

/// A search tree under construction.
pub struct SearchTree<'s> {
    suite: &'s ProblemSuite,
    nodes: Vec<SearchNode>,
    audit: Vec<AuditEntry>,
    draws: u64,
}

impl<'s> SearchTree<'s> {
    /// A tree holding only the root cell with model `w0`.
    pub fn new(suite: &'s ProblemSuite, w0: Vec<f64>) -> Result<Self> {
        if w0.len() != suite.model_dim() {
            return Err(Error::DimensionMismatch {
                expected: suite.model_dim(),
                got: w0.len(),
            });
        }
        let cell = SimplexCell::root(suite.k())?;
        let root = SearchNode {
            alpha: cell.representative(),
            cell,
            start: w0.clone(),
            model: w0,
            val_loss: None,
            b_value: None,
            steps: 0,
            chain_steps: 0,
            parent: None,
            children: None,
        };
        Ok(SearchTree {
            suite,
            nodes: vec![root],
            audit: Vec::new(),
            draws: 0,
        })
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    /// Training-oracle draws made by this tree.
    pub fn oracle_draws(&self) -> u64 {
        self.draws
    }

    /// Trains node `id` for `steps` SGD steps from its start model and
    /// scores it. Returns the trained model.
    fn evaluate(
        &mut self,
        id: usize,
        steps: u64,
        schedule: &StepSchedule,
        seed: u64,
        nu2: f64,
        rho2: f64,
        expanded: Option<usize>,
    ) -> Result<TrainedModel> {
        let node = &self.nodes[id];
        let (h, i) = (node.height(), node.index());
        let mut stream = rng::derived_stream(seed, &[u64::from(h), i as u64, (i >> 64) as u64]);
        let mut sampler = Counting::new(MixtureSampler::new(self.suite, &node.alpha)?);
        let prior = match node.parent {
            Some(p) => self.nodes[p].chain_steps,
            None => 0,
        };
        let run = sgd::run_sgd_with(
            self.suite.loss(),
            &mut sampler,
            &node.start,
            steps,
            schedule,
            &mut stream,
            TraceSpec::Off,
            prior,
        )?;
        self.draws += sampler.count();
        let val_loss = self.suite.validation_loss(&run.model)?;
        let b = b_value(val_loss, nu2, rho2, h);
        let node = &mut self.nodes[id];
        node.model = run.model.weights().to_vec();
        node.val_loss = Some(val_loss);
        node.b_value = Some(b);
        node.steps = steps;
        node.chain_steps = run.model.steps();
        self.audit.push(AuditEntry {
            order: self.audit.len(),
            node: id,
            expanded,
            height: h,
            index: i,
            alpha: node.alpha.clone(),
            steps,
            val_loss,
            b_value: b,
        });
        Ok(run.model)
    }

    /// Splits leaf `id` and evaluates both children with `steps` SGD steps
    /// each, warm-started from the leaf's model. Child streams are derived
    /// from `(seed, child height, child index)`.
    #[allow(clippy::too_many_arguments)]
    pub fn expand(
        &mut self,
        id: usize,
        steps: u64,
        strategy: &PartitionStrategy,
        schedule: &StepSchedule,
        seed: u64,
        nu2: f64,
        rho2: f64,
    ) -> Result<(usize, usize)> {
        if steps == 0 {
            return Err(Error::param("node budget must be at least one step"));
        }
        let parent = self.nodes.get(id).ok_or_else(|| Error::param(format!("no node {id}")))?;
        if parent.children.is_some() {
            return Err(Error::param(format!("node {id} is already expanded")));
        }
        let (c1, c2) = parent.cell.split(strategy)?;
        let start = parent.model.clone();
        let mut ids = [0usize; 2];
        for (slot, cell) in ids.iter_mut().zip([c1, c2]) {
            *slot = self.nodes.len();
            self.nodes.push(SearchNode {
                alpha: cell.representative(),
                cell,
                start: start.clone(),
                model: start.clone(),
                val_loss: None,
                b_value: None,
                steps: 0,
                chain_steps: 0,
                parent: Some(id),
                children: None,
            });
        }
        self.nodes[id].children = Some((ids[0], ids[1]));
        for &child in &ids {
            self.evaluate(child, steps, schedule, seed, nu2, rho2, Some(id))?;
        }
        Ok((ids[0], ids[1]))
    }

    pub fn into_parts(self) -> (Vec<SearchNode>, Vec<AuditEntry>, u64) {
        (self.nodes, self.audit, self.draws)
    }
}

/// Shorthand for [`SearchTree::expand`].
#[allow(clippy::too_many_arguments)]
pub fn expand_node(
    tree: &mut SearchTree<'_>,
    id: usize,
    lambda_h: u64,
    strategy: &PartitionStrategy,
    schedule: &StepSchedule,
    seed: u64,
    nu2: f64,
    rho2: f64,
) -> Result<(usize, usize)> {
    tree.expand(id, lambda_h, strategy, schedule, seed, nu2, rho2)
}

/// Runs the search with budget `config.budget`.
///
/// The root expansion costs `2λ(0)`. While the spent budget `C` is at most
/// `Λ`, the leaf with the smallest b-value at height `h` is expanded at cost
/// `2λ(h+1)`. The answer is the node with the lowest validation loss at the
/// deepest height reached.
pub fn mix_and_match(suite: &ProblemSuite, config: &SearchConfig) -> Result<SearchResult> {
    config.node_steps.validate()?;
    if !(config.rho2 > 0.0 && config.rho2 < 1.0) || !(config.nu2 >= 0.0 && config.nu2.is_finite()) {
        return Err(Error::param(format!(
            "need 0 < rho2 < 1 and nu2 >= 0, got rho2={}, nu2={}",
            config.rho2, config.nu2
        )));
    }
    let root_cost = 2 * config.node_steps.at(0);
    let k = suite.k();
    let w0 = config.w0.clone().unwrap_or_else(|| vec![0.0; suite.model_dim()]);
    let mut tree = SearchTree::new(suite, w0)?;
    let (nu2, rho2, seed) = (config.nu2, config.rho2, config.seed);

    if k == 1 {
        // A single point: train the root and return it.
        let steps = config.node_steps.at(0);
        if config.budget < steps {
            return Err(Error::param(format!("budget {} is below the root cost {steps}", config.budget)));
        }
        let model = tree.evaluate(0, steps, &config.schedule, seed, nu2, rho2, None)?;
        let (nodes, audit, draws) = tree.into_parts();
        return Ok(SearchResult {
            mixture: nodes[0].alpha.clone(),
            model,
            chosen: 0,
            tree_height: 0,
            total_steps: steps,
            oracle_draws: draws,
            expansions: 0,
            nodes,
            audit,
        });
    }
    if config.budget < root_cost {
        return Err(Error::param(format!(
            "budget {} is below the root expansion cost {root_cost}",
            config.budget
        )));
    }

    let mut heap = BinaryHeap::new();
    let push_children = |tree: &SearchTree<'_>, heap: &mut BinaryHeap<LeafKey>, pair: (usize, usize)| {
        for id in [pair.0, pair.1] {
            let n = &tree.nodes[id];
            heap.push(LeafKey {
                b: n.b_value.expect("children are evaluated"),
                height: n.height(),
                index: n.index(),
                id,
            });
        }
    };
    let pair = tree.expand(0, config.node_steps.at(0), &config.strategy, &config.schedule, seed, nu2, rho2)?;
    push_children(&tree, &mut heap, pair);
    let mut spent = root_cost;
    let mut expansions = 1;
    while spent <= config.budget {
        let Some(leaf) = heap.pop() else { break };
        if leaf.height >= MAX_HEIGHT {
            // Cells at the depth limit are frozen leaves.
            continue;
        }
        let steps = config.node_steps.at(leaf.height + 1);
        let pair = tree.expand(leaf.id, steps, &config.strategy, &config.schedule, seed, nu2, rho2)?;
        push_children(&tree, &mut heap, pair);
        spent += 2 * steps;
        expansions += 1;
    }

    let (nodes, audit, draws) = tree.into_parts();
    let tree_height = nodes.iter().map(SearchNode::height).max().unwrap_or(0);
    let eligible = |n: &&SearchNode| {
        n.val_loss.is_some()
            && match config.final_pool {
                FinalPool::Deepest => n.height() == tree_height,
                FinalPool::AllLeaves => n.is_leaf(),
            }
    };
    let chosen = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| eligible(n))
        .min_by(|(_, a), (_, b)| {
            a.val_loss
                .unwrap()
                .total_cmp(&b.val_loss.unwrap())
                .then(a.height().cmp(&b.height()))
                .then(a.index().cmp(&b.index()))
        })
        .map(|(id, _)| id)
        .expect("the deepest level holds evaluated nodes");
    let best = &nodes[chosen];
    Ok(SearchResult {
        mixture: best.alpha.clone(),
        model: TrainedModel::new(best.model.clone(), best.chain_steps),
        chosen,
        tree_height,
        total_steps: spent,
        oracle_draws: draws,
        expansions,
        nodes,
        audit,
    })
}

/// Half the budget to the search, the other half to SGD on the returned
/// mixture, warm-started from the returned model with every step scaled by
/// `step_scale`.
pub fn mix_and_match_then_sgd(
    suite: &ProblemSuite,
    config: &SearchConfig,
    step_scale: f64,
) -> Result<(SearchResult, TrainedModel)> {
    let half = config.budget / 2;
    let search_config = SearchConfig {
        budget: half,
        ..config.clone()
    };
    let result = mix_and_match(suite, &search_config)?;
    let rest = config.budget.saturating_sub(result.total_steps).max(1);
    let schedule = config.schedule.scaled(step_scale)?;
    let mut stream = rng::derived_stream(config.seed, &[rng::label_tag("refine")]);
    let run = sgd::continue_sgd(suite, &result.mixture, &result.model, rest, &schedule, &mut stream)?;
    Ok((result, run.model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SuiteConfig;
    use proptest::prelude::*;

    fn practical() -> StepSchedule {
        StepSchedule::practical(0.05).unwrap()
    }

    #[test]
    fn b_value_examples() {
        assert_eq!(b_value(0.5, 1.0, 0.5, 1), -0.5);
        assert_eq!(b_value(0.5, 1.0, 0.5, 0), -1.5);
        assert!((b_value(0.5, 1.0, 0.5, 200) - 0.5).abs() < 1e-15);
    }

    fn leaf(h: u32, i: u128, b: f64) -> SearchNode {
        let mut cell = SimplexCell::root(2).unwrap();
        for step in 0..h {
            let (a, c) = cell.split(&PartitionStrategy::LongestEdgeBisection).unwrap();
            let bit = ((i - 1) >> (h - 1 - step)) & 1;
            cell = if bit == 0 { a } else { c };
        }
        assert_eq!((cell.height(), cell.index()), (h, i));
        SearchNode {
            alpha: cell.representative(),
            cell,
            start: vec![0.0],
            model: vec![0.0],
            val_loss: Some(b + 1.0),
            b_value: Some(b),
            steps: 1,
            chain_steps: 1,
            parent: None,
            children: None,
        }
    }

    #[test]
    fn select_leaf_examples() {
        let a = leaf(1, 1, 0.3);
        let b = leaf(1, 2, 0.1);
        assert_eq!(select_leaf(&[&a, &b]).unwrap().index(), 2);
        let c = leaf(1, 1, 0.1);
        let d = leaf(2, 3, 0.1);
        let pick = select_leaf(&[&d, &c]).unwrap();
        assert_eq!((pick.height(), pick.index()), (1, 1));
        assert_eq!(select_leaf(&[&a]).unwrap().index(), 1);
        assert!(select_leaf(&[]).is_err());
    }

    #[test]
    fn heap_order_matches_select_leaf() {
        let leaves = [leaf(2, 3, 0.1), leaf(1, 2, 0.1), leaf(2, 1, -0.2), leaf(3, 5, -0.2)];
        let mut heap: BinaryHeap<LeafKey> = leaves
            .iter()
            .enumerate()
            .map(|(id, n)| LeafKey { b: n.b_value.unwrap(), height: n.height(), index: n.index(), id })
            .collect();
        let refs: Vec<&SearchNode> = leaves.iter().collect();
        let expected = select_leaf(&refs).unwrap();
        let top = heap.pop().unwrap();
        assert_eq!((top.height, top.index), (expected.height(), expected.index()));
    }

    #[test]
    fn expansion_structure_and_warm_start() {
        let suite = SuiteConfig::planar_quadratic().build().unwrap();
        let mut tree = SearchTree::new(&suite, vec![0.0, 0.0]).unwrap();
        let s = PartitionStrategy::LongestEdgeBisection;
        let (a, b) = expand_node(&mut tree, 0, 50, &s, &practical(), 1, 1.0, 0.5).unwrap();
        let (c, d) = tree.expand(a, 50, &s, &practical(), 1, 1.0, 0.5).unwrap();
        let nodes = tree.nodes();
        for &id in &[a, b] {
            assert_eq!(nodes[id].height(), 1);
            assert_eq!(nodes[id].start, vec![0.0, 0.0]);
            assert_eq!(nodes[id].alpha, nodes[id].cell.representative());
        }
        for &id in &[c, d] {
            assert_eq!(nodes[id].height(), 2);
            assert_eq!(nodes[id].start, nodes[a].model);
            assert_eq!(nodes[id].chain_steps, 100);
            let n = &nodes[id];
            assert_eq!(n.b_value.unwrap(), b_value(n.val_loss.unwrap(), 1.0, 0.5, 2));
        }
        assert!(tree.expand(a, 50, &s, &practical(), 1, 1.0, 0.5).is_err());
        assert_eq!(tree.oracle_draws(), 200);
    }

    #[test]
    fn loop_runs_once_more_at_exact_root_budget() {
        let suite = SuiteConfig::planar_quadratic().build().unwrap();
        let mut cfg = SearchConfig::new(&suite, 200, 100, practical(), 3);
        let r = mix_and_match(&suite, &cfg).unwrap();
        assert_eq!(r.expansions, 2);
        assert_eq!(r.tree_height, 2);
        assert_eq!(r.total_steps, 400);
        assert_eq!(r.mixture.k(), 3);
        cfg.budget = 199;
        assert!(mix_and_match(&suite, &cfg).is_err());
    }

    #[test]
    fn single_source_returns_root() {
        let suite = SuiteConfig::noisy_scalar().build().unwrap();
        let cfg = SearchConfig::new(&suite, 1000, 100, practical(), 3);
        let r = mix_and_match(&suite, &cfg).unwrap();
        assert_eq!(r.mixture.as_slice(), &[1.0]);
        assert_eq!(r.tree_height, 0);
        assert_eq!(r.total_steps, 100);
        assert_eq!(r.model.steps(), 100);
        assert_eq!(r.audit.len(), 1);
    }

    #[test]
    fn budget_and_determinism() {
        let suite = SuiteConfig::latent_quadratic().build().unwrap();
        let cfg = SearchConfig::new(&suite, 20_000, 500, practical(), 8);
        let r1 = mix_and_match(&suite, &cfg).unwrap();
        let r2 = mix_and_match(&suite, &cfg).unwrap();
        assert_eq!(r1, r2);
        let audited: u64 = r1.audit.iter().map(|e| e.steps).sum();
        assert_eq!(audited, r1.total_steps);
        assert_eq!(r1.oracle_draws, r1.total_steps);
        assert!(r1.total_steps <= cfg.budget + 2 * 500);
        assert_eq!(r1.total_steps, 2 * 500 * r1.expansions as u64);
        let chosen = &r1.nodes[r1.chosen];
        assert_eq!(chosen.height(), r1.tree_height);
    }

    #[test]
    fn runs_are_prefix_stable_across_budgets() {
        let suite = SuiteConfig::latent_quadratic().build().unwrap();
        let small = mix_and_match(&suite, &SearchConfig::new(&suite, 10_000, 500, practical(), 4)).unwrap();
        let large = mix_and_match(&suite, &SearchConfig::new(&suite, 30_000, 500, practical(), 4)).unwrap();
        assert_eq!(&large.audit[..small.audit.len()], &small.audit[..]);
        assert!(large.tree_height >= small.tree_height);
    }

    #[test]
    fn all_leaves_pool() {
        let suite = SuiteConfig::latent_quadratic().build().unwrap();
        let mut cfg = SearchConfig::new(&suite, 10_000, 500, practical(), 4);
        cfg.final_pool = FinalPool::AllLeaves;
        let r = mix_and_match(&suite, &cfg).unwrap();
        let best = r
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.val_loss.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.nodes[r.chosen].val_loss.unwrap(), best);
    }

    #[test]
    fn split_budget_variant_spends_everything() {
        let suite = SuiteConfig::latent_quadratic().build().unwrap();
        let cfg = SearchConfig::new(&suite, 20_000, 500, practical(), 4);
        let before = suite.training_draws();
        let (r, model) = mix_and_match_then_sgd(&suite, &cfg, 0.1).unwrap();
        assert!(r.total_steps <= 10_000 + 1000);
        assert_eq!(model.steps(), r.model.steps() + (20_000 - r.total_steps));
        assert_eq!(suite.training_draws() - before, 20_000);
    }

    #[test]
    fn height_dependent_budget() {
        let suite = SuiteConfig::planar_quadratic().build().unwrap();
        let mut cfg = SearchConfig::new(&suite, 2000, 100, practical(), 3);
        cfg.node_steps = NodeBudget::PerHeight(vec![100, 50, 30]);
        let r = mix_and_match(&suite, &cfg).unwrap();
        let expected: u64 = 2 * 100
            + r.audit[2..]
                .chunks(2)
                .map(|pair| 2 * cfg.node_steps.at(pair[0].height))
                .sum::<u64>();
        assert_eq!(r.total_steps, expected);
        assert!(r.total_steps <= cfg.budget + 2 * cfg.node_steps.at(r.tree_height));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tree_invariants(budget in 400u64..6000, lambda in 50u64..300, seed in any::<u64>(), coord in any::<bool>()) {
            let suite = SuiteConfig::planar_quadratic().build().unwrap();
            prop_assume!(budget >= 2 * lambda);
            let mut cfg = SearchConfig::new(&suite, budget, lambda, practical(), seed);
            if coord {
                cfg.strategy = PartitionStrategy::CoordinateHalving { seed };
            }
            let r = mix_and_match(&suite, &cfg).unwrap();
            prop_assert!(r.total_steps <= budget + 2 * lambda);
            prop_assert!(r.total_steps - 2 * lambda <= budget);
            for (id, n) in r.nodes.iter().enumerate() {
                if let Some((a, b)) = n.children {
                    prop_assert_eq!(r.nodes[a].parent, Some(id));
                    prop_assert_eq!(r.nodes[b].parent, Some(id));
                    prop_assert_eq!(r.nodes[a].height(), n.height() + 1);
                    prop_assert_eq!(&r.nodes[a].start, &n.model);
                    prop_assert_eq!(&r.nodes[b].start, &n.model);
                }
                if let (Some(v), Some(b)) = (n.val_loss, n.b_value) {
                    prop_assert!(b < v);
                    prop_assert_eq!(b, b_value(v, cfg.nu2, cfg.rho2, n.height()));
                }
            }
            // Leaves tile the simplex: their volumes add up to the root's.
            let leaf_volume: f64 = r.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.cell.volume()).sum();
            prop_assert!((leaf_volume - r.nodes[0].cell.volume()).abs() < 1e-9);
        }
    }
}
