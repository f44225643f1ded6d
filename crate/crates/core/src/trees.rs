//! Lindstedt trees, scale labels, self-energy clusters and the counting
//! inequalities.
//!
//! Tree rules, fixed by agreement with the direct recursion:
//!
//! - a node carrying mode `m = (ν_m, μ_m)` with `p` ordered children
//!   contributes `c_m e^{iμ_m·β0} i^{p+1} m Π_i (m·V_i) / p!`, where `V_i` is
//!   the vector value of the `i`-th child subtree;
//! - a line with momentum `ν ≠ 0` carries `1/(ω·ν)²`;
//! - a line with momentum `0` exists only in the `β` sector and carries
//!   `−H⁻¹` on the `β` components (zero on the `α` ones), where `H` is the
//!   Hessian of `f_0` at `β0`;
//! - the order of a `ν ≠ 0` line is one plus the orders of its children; a
//!   `ν = 0` line has the order of its children combined, must have at least
//!   one child, and may not sit directly on top of another `ν = 0` line
//!   through a `ν_m = 0` node.
//!
//! Because of the last rule a subtree can have more nodes than its `ε` order.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::arithmetic::{BryunoProfile, RotationVector};
pub use crate::multiscale::BETA;
use crate::error::{Error, Result};
use crate::fourier::{add_vec, C64};
use crate::model::FourierModel;
use crate::norm1;

/// Default cap on generated subtrees per order.
pub const TREE_BUDGET: u64 = 10_000_000;

/// A subtree: the node on top of a line, together with everything below.
#[derive(Debug)]
pub struct Node {
    pub mode: usize,
    pub children: Vec<Arc<Node>>,
    /// Momentum of the line leaving this node.
    pub momentum: Vec<i32>,
    /// `ε` order of the subtree.
    pub order: usize,
}

impl Node {
    pub fn is_zero_line(&self) -> bool {
        self.momentum.iter().all(|&k| k == 0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }
}

/// Subtrees of order `1..=K` grouped by root momentum.
pub struct TreeForest {
    pub levels: Vec<BTreeMap<Vec<i32>, Vec<Arc<Node>>>>,
    r: usize,
}

struct Sequence {
    children: Vec<Arc<Node>>,
    momentum: Vec<i32>,
}

impl TreeForest {
    /// Generates every subtree of order `≤ k_max` for `model`.
    pub fn generate(model: &FourierModel, k_max: usize, budget: u64) -> Result<Self> {
        let r = model.r;
        let zero = vec![0i32; r];
        let mut levels: Vec<BTreeMap<Vec<i32>, Vec<Arc<Node>>>> = Vec::with_capacity(k_max);
        // seqs[t]: ordered child sequences of total order t, built from
        // completed levels.
        let mut seqs: Vec<Vec<Sequence>> = vec![vec![Sequence {
            children: Vec::new(),
            momentum: zero.clone(),
        }]];
        let mut generated: u64 = 0;
        for k in 1..=k_max {
            let mut level: BTreeMap<Vec<i32>, Vec<Arc<Node>>> = BTreeMap::new();
            for (mi, m) in model.modes.iter().enumerate() {
                for seq in &seqs[k - 1] {
                    let momentum = add_vec(&m.nu, &seq.momentum);
                    if momentum == zero {
                        continue;
                    }
                    generated += 1;
                    if generated > budget {
                        return Err(Error::Budget {
                            what: format!("tree enumeration at order {k}"),
                            limit: budget,
                        });
                    }
                    level.entry(momentum.clone()).or_default().push(Arc::new(Node {
                        mode: mi,
                        children: seq.children.clone(),
                        momentum,
                        order: k,
                    }));
                }
            }
            if model.s > 0 {
                levels.push(level);
                let partial = build_sequences(&levels, &seqs, k);
                let mut zero_lines = Vec::new();
                for (mi, m) in model.modes.iter().enumerate() {
                    for seq in &partial {
                        if seq.children.is_empty() || add_vec(&m.nu, &seq.momentum) != zero {
                            continue;
                        }
                        if m.is_zero_nu() && seq.children.len() == 1 && seq.children[0].is_zero_line() {
                            continue;
                        }
                        generated += 1;
                        if generated > budget {
                            return Err(Error::Budget {
                                what: format!("tree enumeration at order {k}"),
                                limit: budget,
                            });
                        }
                        zero_lines.push(Arc::new(Node {
                            mode: mi,
                            children: seq.children.clone(),
                            momentum: zero.clone(),
                            order: k,
                        }));
                    }
                }
                let mut level = levels.pop().unwrap();
                if !zero_lines.is_empty() {
                    level.insert(zero.clone(), zero_lines);
                }
                levels.push(level);
            } else {
                levels.push(level);
            }
            if k < k_max {
                let full = build_sequences(&levels, &seqs, k);
                seqs.push(full);
            }
        }
        Ok(Self { levels, r })
    }

    pub fn k_max(&self) -> usize {
        self.levels.len()
    }

    /// Subtrees of order `k` with root momentum `ν`.
    pub fn trees(&self, k: usize, nu: &[i32]) -> &[Arc<Node>] {
        self.levels
            .get(k.wrapping_sub(1))
            .and_then(|l| l.get(nu))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Root momenta reachable at order `k`.
    pub fn momenta(&self, k: usize) -> Vec<Vec<i32>> {
        self.levels
            .get(k.wrapping_sub(1))
            .map(|l| l.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn count(&self, k: usize) -> usize {
        self.levels
            .get(k.wrapping_sub(1))
            .map(|l| l.values().map(|v| v.len()).sum())
            .unwrap_or(0)
    }

    pub fn r(&self) -> usize {
        self.r
    }
}

/// Ordered sequences of total order `t` whose elements come from
/// `levels[..t]` (the last level as currently populated).
fn build_sequences(
    levels: &[BTreeMap<Vec<i32>, Vec<Arc<Node>>>],
    seqs: &[Vec<Sequence>],
    t: usize,
) -> Vec<Sequence> {
    let mut out = Vec::new();
    for k1 in 1..=t {
        let rest = &seqs[t - k1];
        for nodes in levels[k1 - 1].values() {
            for first in nodes {
                for tail in rest {
                    let mut children = Vec::with_capacity(tail.children.len() + 1);
                    children.push(first.clone());
                    children.extend(tail.children.iter().cloned());
                    out.push(Sequence {
                        momentum: add_vec(&first.momentum, &tail.momentum),
                        children,
                    });
                }
            }
        }
    }
    out
}

/// Evaluates bare tree values.
pub struct TreeEvaluator<'a> {
    model: &'a FourierModel,
    omega: &'a RotationVector,
    h_inv: Option<DMatrix<f64>>,
    coeffs: Vec<C64>,
    full: Vec<Vec<f64>>,
}

impl<'a> TreeEvaluator<'a> {
    pub fn new(model: &'a FourierModel, omega: &'a RotationVector) -> Result<Self> {
        let h_inv = if model.s > 0 {
            Some(model.hessian.clone().try_inverse().ok_or(Error::ZeroEigenvalue {
                index: 0,
                value: 0.0,
            })?)
        } else {
            None
        };
        Ok(Self {
            model,
            omega,
            h_inv,
            coeffs: model.modes.iter().map(|m| model.shifted_coefficient(m)).collect(),
            full: model
                .modes
                .iter()
                .map(|m| m.full().iter().map(|&k| k as f64).collect())
                .collect(),
        })
    }

    /// Vector value of the subtree, propagator of its root line included.
    pub fn value(&self, node: &Node) -> Vec<C64> {
        let m = &self.full[node.mode];
        let p = node.children.len();
        let mut scalar = self.coeffs[node.mode] * C64::new(0.0, 1.0).powu(p as u32 + 1);
        scalar /= (1..=p).product::<usize>() as f64;
        for child in &node.children {
            let v = self.value(child);
            let dot: C64 = v.iter().zip(m).map(|(c, k)| c * *k).sum();
            scalar *= dot;
        }
        let d = self.model.d();
        let r = self.model.r;
        if node.is_zero_line() {
            let h_inv = self.h_inv.as_ref().expect("zero lines need a β sector");
            let mut out = vec![C64::new(0.0, 0.0); d];
            for i in 0..self.model.s {
                for j in 0..self.model.s {
                    out[r + i] -= scalar * h_inv[(i, j)] * m[r + j];
                }
            }
            out
        } else {
            let x = self.omega.dot(&node.momentum);
            let g = 1.0 / (x * x);
            m.iter().map(|k| scalar * (k * g)).collect()
        }
    }

    /// `Σ_θ Val(θ)` over subtrees of order `k` and momentum `ν`.
    pub fn tree_sum(&self, forest: &TreeForest, k: usize, nu: &[i32]) -> Vec<C64> {
        let d = self.model.d();
        forest
            .trees(k, nu)
            .par_iter()
            .map(|t| self.value(t))
            .reduce(
                || vec![C64::new(0.0, 0.0); d],
                |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
            )
    }
}

/// Flattened tree with per-line data. Node `0` is the root; nodes are in
/// preorder, and line `v` is the line leaving node `v` toward its parent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    pub parent: Vec<Option<usize>>,
    pub modes: Vec<usize>,
    pub node_nu: Vec<Vec<i32>>,
    pub line_momentum: Vec<Vec<i32>>,
    pub order: usize,
    /// `None` for unassigned lines and for `ν = 0` lines.
    pub scales: Vec<Option<usize>>,
}

impl Tree {
    pub fn from_node(root: &Node, model: &FourierModel) -> Self {
        let mut t = Tree {
            parent: Vec::new(),
            modes: Vec::new(),
            node_nu: Vec::new(),
            line_momentum: Vec::new(),
            order: root.order,
            scales: Vec::new(),
        };
        fn walk(n: &Node, parent: Option<usize>, model: &FourierModel, t: &mut Tree) {
            let id = t.parent.len();
            t.parent.push(parent);
            t.modes.push(n.mode);
            t.node_nu.push(model.modes[n.mode].nu.clone());
            t.line_momentum.push(n.momentum.clone());
            t.scales.push(None);
            for c in &n.children {
                walk(c, Some(id), model, t);
            }
        }
        walk(root, None, model, &mut t);
        t
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    /// `M(θ) = Σ_v |ν_v|`.
    pub fn mass(&self) -> u32 {
        self.node_nu.iter().map(|nu| norm1(nu)).sum()
    }

    pub fn is_zero_line(&self, v: usize) -> bool {
        self.line_momentum[v].iter().all(|&k| k == 0)
    }

    /// Bitmask of the subtree rooted at `v` (preorder makes it contiguous).
    pub fn subtree_mask(&self, v: usize) -> u64 {
        let mut mask = 1u64 << v;
        for u in v + 1..self.node_count() {
            match self.parent[u] {
                Some(p) if mask & (1u64 << p) != 0 => mask |= 1u64 << u,
                _ => break,
            }
        }
        mask
    }

    /// Line-oriented dump: parents, node modes and line scales.
    pub fn to_line(&self) -> String {
        let parents: Vec<String> = self
            .parent
            .iter()
            .map(|p| p.map(|x| x.to_string()).unwrap_or_else(|| "-1".into()))
            .collect();
        let modes: Vec<String> = self
            .node_nu
            .iter()
            .map(|nu| format!("({})", nu.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        let scales: Vec<String> = self
            .scales
            .iter()
            .map(|s| s.map(|x| x.to_string()).unwrap_or_else(|| "-".into()))
            .collect();
        format!(
            "parents={} modes={} scales={}",
            parents.join(","),
            modes.join("|"),
            scales.join(",")
        )
    }
}

/// Every subtree of order `k` with root momentum `ν`, flattened.
pub fn enumerate_trees(
    model: &FourierModel,
    k: usize,
    nu: &[i32],
    budget: u64,
) -> Result<Vec<Tree>> {
    let forest = TreeForest::generate(model, k, budget)?;
    Ok(forest
        .trees(k, nu)
        .iter()
        .map(|t| Tree::from_node(t, model))
        .collect())
}

/// Scale labels `n` compatible with a bare line of frequency `x`:
/// `β C0 γ*_n / 2 < |x|`, and `|x| < β C0 γ*_{n−1}` for `n ≥ 1`.
pub fn bare_scales(x: f64, profile: &BryunoProfile) -> Result<Vec<usize>> {
    let ax = x.abs();
    let mut out = Vec::new();
    for n in 0..=profile.n_max() {
        if n >= 1 && ax >= BETA * profile.alpha_star(n - 1) {
            break;
        }
        if ax > BETA * profile.alpha_star(n) / 2.0 {
            out.push(n);
        }
    }
    if ax <= BETA * profile.alpha_star(profile.n_max()) / 2.0 {
        return Err(Error::Precondition(format!(
            "|x| = {ax:e} needs scales beyond the profile range {}",
            profile.n_max()
        )));
    }
    Ok(out)
}

/// `N_n(θ)`: number of lines on each scale, and `M(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleStatistics {
    pub counts: BTreeMap<usize, usize>,
    pub mass: u32,
}

pub fn scale_statistics(tree: &Tree) -> ScaleStatistics {
    let mut counts = BTreeMap::new();
    for s in tree.scales.iter().flatten() {
        *counts.entry(*s).or_insert(0) += 1;
    }
    ScaleStatistics {
        counts,
        mass: tree.mass(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfEnergyCluster {
    /// Node whose line exits the cluster.
    pub top: usize,
    /// Node whose line enters the cluster.
    pub entry: usize,
    pub nodes: u64,
    /// Largest internal scale, `−1` without internal lines.
    pub scale: i64,
    pub mass: u32,
    /// Contains no other self-energy cluster.
    pub renormalized: bool,
}

impl SelfEnergyCluster {
    pub fn node_list(&self) -> Vec<usize> {
        (0..64).filter(|i| self.nodes & (1u64 << i) != 0).collect()
    }
}

/// All node sets `T = subtree(top) \ subtree(entry)` with zero total mode,
/// one entering and one exiting line, and internal scales strictly below
/// both external ones (`ν = 0` lines count as above every scale).
pub fn detect_self_energy_clusters(tree: &Tree) -> Vec<SelfEnergyCluster> {
    let n = tree.node_count();
    assert!(n <= 64, "cluster detection supports at most 64 nodes");
    let masks: Vec<u64> = (0..n).map(|v| tree.subtree_mask(v)).collect();
    let scale_of = |v: usize| -> Option<i64> {
        if tree.is_zero_line(v) {
            None
        } else {
            tree.scales[v].map(|s| s as i64)
        }
    };
    let mut found = Vec::new();
    for top in 0..n {
        for entry in top + 1..n {
            if masks[top] & (1u64 << entry) == 0 {
                continue;
            }
            if tree.line_momentum[top] != tree.line_momentum[entry] {
                continue;
            }
            let nodes = masks[top] & !masks[entry];
            let mut internal_max: i64 = -1;
            let mut ok = true;
            for u in 0..n {
                if u == top || nodes & (1u64 << u) == 0 {
                    continue;
                }
                match scale_of(u) {
                    Some(s) => internal_max = internal_max.max(s),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let external_min = [scale_of(top), scale_of(entry)]
                .into_iter()
                .flatten()
                .min()
                .unwrap_or(i64::MAX);
            if internal_max >= external_min {
                continue;
            }
            let mass = (0..n)
                .filter(|u| nodes & (1u64 << u) != 0)
                .map(|u| norm1(&tree.node_nu[u]))
                .sum();
            found.push(SelfEnergyCluster {
                top,
                entry,
                nodes,
                scale: internal_max,
                mass,
                renormalized: true,
            });
        }
    }
    let sets: Vec<u64> = found.iter().map(|c| c.nodes).collect();
    for c in &mut found {
        c.renormalized = !sets
            .iter()
            .any(|&other| other != c.nodes && other & c.nodes == other);
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingMode {
    /// `N_n ≤ K 2^{-n} M`.
    Theorem1,
    /// `N_n ≤ K 2^{-n/2} M`.
    Theorem2,
}

impl CountingMode {
    fn bound(self, k: f64, n: usize, mass: f64) -> f64 {
        match self {
            CountingMode::Theorem1 => k * 2f64.powi(-(n as i32)) * mass,
            CountingMode::Theorem2 => k * 2f64.powf(-(n as f64) / 2.0) * mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingWitness {
    pub check: String,
    pub tree: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingReport {
    pub trees: usize,
    pub assignments: usize,
    pub renormalized_assignments: usize,
    pub clusters: usize,
    pub renormalized_clusters: usize,
    pub failures: usize,
    pub witness: Option<CountingWitness>,
}

impl CountingReport {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }

    fn merge(mut self, other: Self) -> Self {
        self.trees += other.trees;
        self.assignments += other.assignments;
        self.renormalized_assignments += other.renormalized_assignments;
        self.clusters += other.clusters;
        self.renormalized_clusters += other.renormalized_clusters;
        self.failures += other.failures;
        if self.witness.is_none() {
            self.witness = other.witness;
        }
        self
    }

    fn empty() -> Self {
        Self {
            trees: 0,
            assignments: 0,
            renormalized_assignments: 0,
            clusters: 0,
            renormalized_clusters: 0,
            failures: 0,
            witness: None,
        }
    }
}

/// Checks one scale-labelled tree:
/// a line on scale `n ≥ 1` has `|ν_ℓ| > 2^{n−1}`; a tree without
/// self-energy clusters has `N_n ≤ K 2^{-n} M`; every cluster with
/// `n_T ≥ 0` has `M(T) > 2^{n_T − 1}`, and a renormalized one also
/// `N_n(T) ≤ K 2^{-n} M(T)` for `n ≤ n_T`.
pub fn verify_counting_lemma(tree: &Tree, k_const: f64, mode: CountingMode) -> CountingReport {
    let mut report = CountingReport::empty();
    report.trees = 0;
    report.assignments = 1;
    let fail = |report: &mut CountingReport, check: &str, detail: String| {
        report.failures += 1;
        if report.witness.is_none() {
            report.witness = Some(CountingWitness {
                check: check.into(),
                tree: tree.to_line(),
                detail,
            });
        }
    };
    for (v, s) in tree.scales.iter().enumerate() {
        if let Some(n) = *s {
            let m = norm1(&tree.line_momentum[v]) as f64;
            if n >= 1 && m <= 2f64.powi(n as i32 - 1) {
                fail(&mut report, "scale_support", format!("line {v} on scale {n} has |ν| = {m}"));
            }
        }
    }
    let clusters = detect_self_energy_clusters(tree);
    report.clusters = clusters.len();
    report.renormalized_clusters = clusters.iter().filter(|c| c.renormalized).count();
    let mass = tree.mass() as f64;
    if clusters.is_empty() {
        report.renormalized_assignments = 1;
        for (n, count) in scale_statistics(tree).counts {
            let bound = mode.bound(k_const, n, mass);
            if count as f64 > bound {
                fail(&mut report, "tree_count", format!("N_{n} = {count} > {bound}"));
            }
        }
    }
    for c in &clusters {
        if c.scale < 0 {
            continue;
        }
        let lower = 2f64.powi(c.scale as i32 - 1);
        if c.mass as f64 <= lower {
            fail(
                &mut report,
                "cluster_mass",
                format!("cluster {:?} on scale {} has M(T) = {}", c.node_list(), c.scale, c.mass),
            );
        }
        if c.renormalized {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for u in c.node_list() {
                if u != c.top {
                    if let Some(s) = tree.scales[u] {
                        *counts.entry(s).or_insert(0) += 1;
                    }
                }
            }
            for (n, count) in counts {
                let bound = mode.bound(k_const, n, c.mass as f64);
                if count as f64 > bound {
                    fail(
                        &mut report,
                        "cluster_count",
                        format!("cluster {:?}: N_{n}(T) = {count} > {bound}", c.node_list()),
                    );
                }
            }
        }
    }
    report
}

/// Every assignment of bare-admissible scales to the lines of `tree`.
pub fn scale_assignments(tree: &Tree, omega: &RotationVector, profile: &BryunoProfile) -> Result<Vec<Vec<Option<usize>>>> {
    let mut options: Vec<Vec<Option<usize>>> = Vec::with_capacity(tree.node_count());
    for v in 0..tree.node_count() {
        if tree.is_zero_line(v) {
            options.push(vec![None]);
        } else {
            let x = omega.dot(&tree.line_momentum[v]);
            options.push(bare_scales(x, profile)?.into_iter().map(Some).collect());
        }
    }
    let mut out = vec![Vec::new()];
    for opts in options {
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for prefix in &out {
            for o in &opts {
                let mut p = prefix.clone();
                p.push(*o);
                next.push(p);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Exhaustive counting check over all trees of order `≤ k_max` and all their
/// admissible scale assignments.
pub fn counting_sweep(
    model: &FourierModel,
    omega: &RotationVector,
    profile: &BryunoProfile,
    k_max: usize,
    mode: CountingMode,
    budget: u64,
) -> Result<CountingReport> {
    let forest = TreeForest::generate(model, k_max, budget)?;
    let roots: Vec<&Arc<Node>> = forest
        .levels
        .iter()
        .flat_map(|l| l.values().flatten())
        .collect();
    let reports: Vec<Result<CountingReport>> = roots
        .par_iter()
        .map(|root| {
            let mut tree = Tree::from_node(root, model);
            let mut acc = CountingReport::empty();
            acc.trees = 1;
            for assignment in scale_assignments(&tree, omega, profile)? {
                tree.scales = assignment;
                let mut rep = verify_counting_lemma(&tree, 2.0, mode);
                rep.trees = 0;
                acc = acc.merge(rep);
            }
            Ok(acc)
        })
        .collect();
    let mut total = CountingReport::empty();
    for r in reports {
        total = total.merge(r?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{make_profile, ProfileKind};
    use crate::expansion::expand_torus;
    use crate::model::bundled;

    fn identity(omega: &RotationVector) -> BryunoProfile {
        make_profile(omega, 0.2, &ProfileKind::Identity, 8).unwrap()
    }

    #[test]
    fn small_orders_counts() {
        let model = bundled::get("one_mode").unwrap();
        assert_eq!(enumerate_trees(&model, 1, &[1, 0], TREE_BUDGET).unwrap().len(), 1);
        let model = bundled::maximal();
        assert_eq!(enumerate_trees(&model, 1, &[3, 0], TREE_BUDGET).unwrap().len(), 0);
        // (1,0) on top of (1,0) is the only way to reach (2,0) at order 2.
        let trees = enumerate_trees(&model, 2, &[2, 0], TREE_BUDGET).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].parent, vec![None, Some(0)]);
    }

    #[test]
    fn order_two_count_matches_brute_force() {
        // Parent/child ordered pairs (m1, m2) with ν1 + ν2 = ν, ν2 ≠ 0.
        let model = bundled::maximal();
        let forest = TreeForest::generate(&model, 2, TREE_BUDGET).unwrap();
        for nu in forest.momenta(2) {
            let brute = model
                .modes
                .iter()
                .flat_map(|a| model.modes.iter().map(move |b| (a, b)))
                .filter(|(a, b)| add_vec(&a.nu, &b.nu) == nu && b.nu.iter().any(|&k| k != 0))
                .count();
            assert_eq!(forest.trees(2, &nu).len(), brute, "ν = {nu:?}");
        }
    }

    fn crosscheck(model: &FourierModel, omega: &RotationVector, k_max: usize) {
        let exp = expand_torus(model, omega, &identity(omega), k_max).unwrap();
        let forest = TreeForest::generate(model, k_max, TREE_BUDGET).unwrap();
        let eval = TreeEvaluator::new(model, omega).unwrap();
        for k in 1..=k_max {
            let mut keys: Vec<Vec<i32>> = exp.orders[k - 1].keys().cloned().collect();
            keys.extend(forest.momenta(k));
            keys.sort();
            keys.dedup();
            for nu in keys {
                let sum = eval.tree_sum(&forest, k, &nu);
                let rec = exp
                    .coefficient(k, &nu)
                    .map(|v| v.to_vec())
                    .unwrap_or_else(|| vec![C64::new(0.0, 0.0); model.d()]);
                for (a, b) in sum.iter().zip(&rec) {
                    let scale = b.norm().max(1e-30);
                    assert!(
                        (a - b).norm() / scale < 1e-9 || (a - b).norm() < 1e-13,
                        "{}: k = {k}, ν = {nu:?}: {a} vs {b}",
                        model.name
                    );
                }
            }
        }
    }

    #[test]
    fn tree_sums_match_recursion() {
        crosscheck(&bundled::maximal(), &RotationVector::golden(), 4);
        crosscheck(&bundled::elliptic(), &RotationVector::new(&[1.0]).unwrap(), 4);
        crosscheck(&bundled::cantor(), &RotationVector::golden(), 4);
    }

    #[test]
    fn zero_lines_make_order_smaller_than_node_count() {
        let model = bundled::elliptic();
        let forest = TreeForest::generate(&model, 2, TREE_BUDGET).unwrap();
        let zero = forest.trees(1, &[0]);
        assert!(!zero.is_empty());
        assert!(zero.iter().all(|t| t.node_count() >= 2));
    }

    #[test]
    fn single_node_statistics() {
        let model = bundled::maximal();
        let mut t = enumerate_trees(&model, 1, &[1, 1], TREE_BUDGET).unwrap().remove(0);
        t.scales = vec![Some(0)];
        let st = scale_statistics(&t);
        assert_eq!(st.counts, BTreeMap::from([(0, 1)]));
        assert_eq!(st.mass, 2);
    }

    #[test]
    fn bare_scale_windows() {
        let omega = RotationVector::golden();
        let p = identity(&omega);
        assert_eq!(bare_scales(omega.dot(&[-3, 2]), &p).unwrap(), vec![0, 1]);
        assert_eq!(bare_scales(omega.dot(&[5, -3]), &p).unwrap(), vec![0, 1, 2]);
    }

    fn chain(nus: &[[i32; 2]], scales: &[Option<usize>]) -> Tree {
        let n = nus.len();
        let mut line_momentum = Vec::new();
        for v in 0..n {
            let mut m = [0, 0];
            for u in v..n {
                m[0] += nus[u][0];
                m[1] += nus[u][1];
            }
            line_momentum.push(m.to_vec());
        }
        Tree {
            parent: (0..n).map(|v| v.checked_sub(1)).collect(),
            modes: vec![0; n],
            node_nu: nus.iter().map(|v| v.to_vec()).collect(),
            line_momentum,
            order: n,
            scales: scales.to_vec(),
        }
    }

    #[test]
    fn two_node_cluster_detected() {
        // Nodes (1,1), (−1,−1) have zero total mode; the lines above and
        // below both carry (1,0).
        let t = chain(&[[1, 1], [-1, -1], [1, 0]], &[Some(3), Some(0), Some(3)]);
        let c = detect_self_energy_clusters(&t);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].node_list(), vec![0, 1]);
        assert_eq!(c[0].scale, 0);
        assert!(c[0].renormalized);
    }

    #[test]
    fn distinct_momenta_no_clusters() {
        let t = chain(&[[1, 0], [1, 1], [1, 0]], &[Some(0), Some(0), Some(0)]);
        assert!(detect_self_energy_clusters(&t).is_empty());
    }

    #[test]
    fn nested_cluster_only_inner_is_renormalized() {
        // Outer cluster {0,1,2,3} around inner {1,2}.
        let t = chain(
            &[[1, 0], [1, 1], [-1, -1], [-1, 0], [0, 1]],
            &[Some(5), Some(2), Some(0), Some(2), Some(5)],
        );
        let c = detect_self_energy_clusters(&t);
        let outer = c.iter().find(|x| x.node_list() == vec![0, 1, 2, 3]).unwrap();
        let inner = c.iter().find(|x| x.node_list() == vec![1, 2]).unwrap();
        assert!(!outer.renormalized);
        assert!(inner.renormalized);
    }

    #[test]
    fn light_cluster_flagged() {
        let t = chain(&[[1, 0], [-1, 0], [1, 0]], &[Some(4), Some(3), Some(4)]);
        let rep = verify_counting_lemma(&t, 2.0, CountingMode::Theorem1);
        assert!(!rep.pass());
    }

    #[test]
    fn exhaustive_counting_small_orders() {
        let omega = RotationVector::golden();
        let rep = counting_sweep(&bundled::maximal(), &omega, &identity(&omega), 4, CountingMode::Theorem1, TREE_BUDGET).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert_eq!(rep.trees, TreeForest::generate(&bundled::maximal(), 4, TREE_BUDGET).unwrap().levels.iter().map(|l| l.values().map(Vec::len).sum::<usize>()).sum::<usize>());
    }

    #[test]
    fn inflated_profile_breaks_scale_support() {
        let omega = RotationVector::golden();
        let inflated = identity(&omega).scaled(16.0);
        let rep = counting_sweep(&bundled::maximal(), &omega, &inflated, 3, CountingMode::Theorem1, TREE_BUDGET).unwrap();
        assert!(!rep.pass());
        assert_eq!(rep.witness.unwrap().check, "scale_support");
    }

    #[test]
    fn dump_format() {
        let t = chain(&[[1, 0], [0, 1]], &[Some(0), None]);
        assert_eq!(t.to_line(), "parents=-1,0 modes=(1,0)|(0,1) scales=0,-");
    }
}
