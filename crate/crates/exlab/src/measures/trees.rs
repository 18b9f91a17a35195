//! Depth-truncated homogeneous trees and their stationary product families.
//!
//! The ambient graph is the 3-regular tree, realized as reduced words over
//! three generators: each vertex has exactly one incident edge per
//! generator, and appending a generator either extends the word or cancels
//! its last letter (walking back toward the root).
//!
//! Three inequivalent rate assignments give each vertex outgoing and
//! incoming rates `q, r, s`:
//! - [`TreeCase::ThreeTypeAlternating`]: one edge of each asymmetric pair
//!   `{q,r}`, `{r,s}`, `{s,q}` at every vertex,
//! - [`TreeCase::LinesWithBridges`]: two `{q,r}` edges forming bi-infinite
//!   lines, bridged by symmetric `{s,s}` edges,
//! - [`TreeCase::FullySymmetric`]: symmetric rates `q`, `r`, `s` per
//!   generator.
//!
//! Truncation at a finite depth pads missing edges with self-loops (null
//! moves) to keep rows stochastic. Leaves lose their interior balance and
//! are exempted from stationarity checks; reversible families satisfy
//! detailed balance edge by edge and survive truncation exactly.

use super::MeasureError;
use crate::kernels::{make_graph_kernel, GraphKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeCase {
    ThreeTypeAlternating,
    LinesWithBridges,
    FullySymmetric,
}

/// One undirected edge of the truncated tree; `parent` is the shorter word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    pub generator: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub case: TreeCase,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub depth: usize,
    /// Reduced words, breadth-first; index 0 is the root (empty word).
    vertices: Vec<Vec<u8>>,
    edges: Vec<TreeEdge>,
    /// Maximal `{q,r}`-edge paths (LinesWithBridges only), each listed in
    /// walk order from its canonical end; singleton fragments excluded.
    lines: Vec<Vec<usize>>,
}

impl TreeModel {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn word(&self, i: usize) -> &[u8] {
        &self.vertices[i]
    }

    pub fn depth_of(&self, i: usize) -> usize {
        self.vertices[i].len()
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    /// Indices of maximal-depth vertices; these lost edges to truncation
    /// and are the exemption set for stationarity checks.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&i| self.depth_of(i) == self.depth).collect()
    }

    /// Multi-vertex line fragments (LinesWithBridges case; empty otherwise).
    pub fn lines(&self) -> &[Vec<usize>] {
        &self.lines
    }
}

fn validate_qrs(q: f64, r: f64, s: f64) -> Result<(), MeasureError> {
    for (name, v) in [("q", q), ("r", r), ("s", s)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(MeasureError::BadParameter(format!(
                "rate {name} = {v} outside (0,1)"
            )));
        }
    }
    if (q + r + s - 1.0).abs() > 1e-12 {
        return Err(MeasureError::BadParameter(format!(
            "rates must sum to 1, got {}",
            q + r + s
        )));
    }
    if (q - r).abs() <= 1e-9 || (r - s).abs() <= 1e-9 || (s - q).abs() <= 1e-9 {
        return Err(MeasureError::BadParameter(
            "rates q, r, s must be pairwise distinct".into(),
        ));
    }
    Ok(())
}

const MAX_TREE_DEPTH: usize = 8;

/// All reduced words of length <= depth, breadth-first, plus the edge list.
fn build_word_tree(depth: usize) -> (Vec<Vec<u8>>, Vec<TreeEdge>) {
    let mut vertices: Vec<Vec<u8>> = vec![vec![]];
    let mut edges: Vec<TreeEdge> = Vec::new();
    let mut frontier: Vec<usize> = vec![0];
    for _ in 1..=depth {
        let mut next = Vec::new();
        for &pi in &frontier {
            let parent_word = vertices[pi].clone();
            for g in 0u8..3 {
                if parent_word.last() == Some(&g) {
                    continue; // that generator walks back toward the root
                }
                let mut w = parent_word.clone();
                w.push(g);
                let ci = vertices.len();
                vertices.push(w);
                edges.push(TreeEdge { parent: pi, child: ci, generator: g });
                next.push(ci);
            }
        }
        frontier = next;
    }
    (vertices, edges)
}

/// Build a depth-truncated tree model and its jump kernel.
///
/// Every interior vertex has outgoing rates `{q, r, s}` across its three
/// edges and the same incoming multiset; vertices at the truncation depth
/// carry a self-loop absorbing their missing rates.
pub fn build_tree_case(
    case: TreeCase,
    q: f64,
    r: f64,
    s: f64,
    depth: usize,
) -> Result<(TreeModel, GraphKernel), MeasureError> {
    validate_qrs(q, r, s)?;
    if depth == 0 || depth > MAX_TREE_DEPTH {
        return Err(MeasureError::BadParameter(format!(
            "depth must lie in 1..={MAX_TREE_DEPTH}, got {depth}"
        )));
    }
    let (vertices, edges) = build_word_tree(depth);
    let n = vertices.len();
    let mut rates = vec![0.0f64; n * n];

    let mut set = |from: usize, to: usize, p: f64| rates[from * n + to] = p;

    match case {
        TreeCase::ThreeTypeAlternating => {
            // Outgoing rates per generator alternate with depth parity:
            // (q,r,s) at even depth, (r,s,q) at odd. Each edge then carries
            // the asymmetric pair its generator dictates, and each vertex
            // sends and receives {q,r,s}.
            let pattern = |depth: usize, g: u8| -> f64 {
                let even = [q, r, s];
                let odd = [r, s, q];
                if depth % 2 == 0 {
                    even[g as usize]
                } else {
                    odd[g as usize]
                }
            };
            for e in &edges {
                let dp = vertices[e.parent].len();
                set(e.parent, e.child, pattern(dp, e.generator));
                set(e.child, e.parent, pattern(dp + 1, e.generator));
            }
        }
        TreeCase::FullySymmetric => {
            let by_gen = [q, r, s];
            for e in &edges {
                let p = by_gen[e.generator as usize];
                set(e.parent, e.child, p);
                set(e.child, e.parent, p);
            }
        }
        TreeCase::LinesWithBridges => {
            // Generators 0 and 1 form the lines; generator 2 bridges them
            // symmetrically at rate s.
            for e in &edges {
                if e.generator == 2 {
                    set(e.parent, e.child, s);
                    set(e.child, e.parent, s);
                }
            }
            // Line fragments are walked endpoint to endpoint; rate q in the
            // walk direction, r backwards, so each interior line vertex has
            // one q-exit and one r-exit.
            for line in line_fragments(&vertices, &edges) {
                for w in line.windows(2) {
                    set(w[0], w[1], q);
                    set(w[1], w[0], r);
                }
            }
        }
    }

    // Self-loops absorb whatever truncation removed.
    for i in 0..n {
        let row_sum: f64 = (0..n).filter(|&j| j != i).map(|j| rates[i * n + j]).sum();
        rates[i * n + i] = 1.0 - row_sum;
    }

    let lines = match case {
        TreeCase::LinesWithBridges => line_fragments(&vertices, &edges),
        _ => Vec::new(),
    };
    let labels = vertices.iter().map(|w| word_label(w)).collect();
    let kernel = make_graph_kernel(labels, rates).expect("tree rows are stochastic");
    Ok((TreeModel { case, q, r, s, depth, vertices, edges, lines }, kernel))
}

fn word_label(w: &[u8]) -> String {
    if w.is_empty() {
        "root".to_string()
    } else {
        w.iter().map(|g| (b'a' + g) as char).collect()
    }
}

/// Connected components of the generator-0/1 subgraph, as ordered paths.
/// Singletons (deep vertices whose line got fully cut) are dropped. The
/// walk starts at the endpoint with the smaller word, fixing orientation.
fn line_fragments(vertices: &[Vec<u8>], edges: &[TreeEdge]) -> Vec<Vec<usize>> {
    let n = vertices.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in edges.iter().filter(|e| e.generator != 2) {
        adj[e.parent].push(e.child);
        adj[e.child].push(e.parent);
    }
    let mut seen = vec![false; n];
    let mut fragments = Vec::new();
    for start in 0..n {
        if seen[start] || adj[start].is_empty() {
            seen[start] = true;
            continue;
        }
        // Collect the component, then identify its two endpoints.
        let mut comp = vec![start];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        let mut ends: Vec<usize> =
            comp.iter().copied().filter(|&u| adj[u].len() == 1).collect();
        ends.sort_by(|&a, &b| vertices[a].cmp(&vertices[b]));
        let first = ends[0];
        let mut path = vec![first];
        let mut prev = usize::MAX;
        let mut cur = first;
        loop {
            let next = adj[cur].iter().copied().find(|&w| w != prev);
            match next {
                Some(w) => {
                    path.push(w);
                    prev = cur;
                    cur = w;
                }
                None => break,
            }
        }
        debug_assert_eq!(path.len(), comp.len(), "line fragment must be a path");
        fragments.push(path);
    }
    fragments
}

/// One stationary product family on a truncated tree, as odds per vertex
/// normalized to 1 at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFamily {
    pub kind: FamilyKind,
    /// LinesWithBridges: per-line geometric flags, in `lines()` order.
    pub line_choices: Vec<bool>,
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Homogeneous,
    Reversible,
    Mixed,
}

/// Enumerate every stationary product family of the model, up to scale.
///
/// - ThreeTypeAlternating: the homogeneous family and the detailed-balance
///   family; nothing else.
/// - LinesWithBridges: odds equal across bridges, and per line either
///   constant or geometric with ratio `q/r`; one family per choice vector.
/// - FullySymmetric: homogeneous only.
pub fn tree_stationary_families(model: &TreeModel) -> Result<Vec<TreeFamily>, MeasureError> {
    let n = model.vertex_count();
    let homogeneous = TreeFamily {
        kind: FamilyKind::Homogeneous,
        line_choices: vec![false; model.lines.len()],
        pi: vec![1.0; n],
    };
    match model.case {
        TreeCase::FullySymmetric => Ok(vec![homogeneous]),
        TreeCase::ThreeTypeAlternating => {
            let mut pi = vec![1.0; n];
            // Detailed balance along each edge fixes the child's odds.
            for e in &model.edges {
                let (fwd, bwd) = edge_rates(model, e);
                pi[e.child] = pi[e.parent] * fwd / bwd;
            }
            Ok(vec![
                homogeneous,
                TreeFamily { kind: FamilyKind::Reversible, line_choices: vec![], pi },
            ])
        }
        TreeCase::LinesWithBridges => {
            let m = model.lines.len();
            if m > 16 {
                return Err(MeasureError::BadParameter(format!(
                    "{m} line fragments; enumeration capped at 16"
                )));
            }
            let mut line_of = vec![usize::MAX; n];
            for (li, line) in model.lines.iter().enumerate() {
                for &v in line {
                    line_of[v] = li;
                }
            }
            let mut families = Vec::with_capacity(1 << m);
            for mask in 0u32..(1u32 << m) {
                let geometric: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 1).collect();
                let mut pi = vec![1.0; n];
                for e in &model.edges {
                    let on_geometric_line =
                        e.generator != 2 && geometric[line_of[e.parent]];
                    pi[e.child] = if on_geometric_line {
                        let (fwd, bwd) = edge_rates(model, e);
                        pi[e.parent] * fwd / bwd
                    } else {
                        // Constant along the line, equal across bridges.
                        pi[e.parent]
                    };
                }
                let kind = if mask == 0 {
                    FamilyKind::Homogeneous
                } else if mask == (1u32 << m) - 1 {
                    FamilyKind::Reversible
                } else {
                    FamilyKind::Mixed
                };
                families.push(TreeFamily { kind, line_choices: geometric, pi });
            }
            Ok(families)
        }
    }
}

/// Rates (parent -> child, child -> parent) of a tree edge, reconstructed
/// from the case rules rather than the kernel to keep this module
/// self-contained for family building.
fn edge_rates(model: &TreeModel, e: &TreeEdge) -> (f64, f64) {
    match model.case {
        TreeCase::FullySymmetric => {
            let p = [model.q, model.r, model.s][e.generator as usize];
            (p, p)
        }
        TreeCase::ThreeTypeAlternating => {
            let pat = |depth: usize, g: u8| {
                let even = [model.q, model.r, model.s];
                let odd = [model.r, model.s, model.q];
                if depth % 2 == 0 {
                    even[g as usize]
                } else {
                    odd[g as usize]
                }
            };
            let dp = model.depth_of(e.parent);
            (pat(dp, e.generator), pat(dp + 1, e.generator))
        }
        TreeCase::LinesWithBridges => {
            if e.generator == 2 {
                (model.s, model.s)
            } else {
                // Orientation comes from the stored line walk.
                let line = &model.lines[model
                    .lines
                    .iter()
                    .position(|l| l.contains(&e.parent))
                    .expect("line edge endpoints lie on a stored line")];
                let ip = line.iter().position(|&v| v == e.parent).unwrap();
                let forward = ip + 1 < line.len() && line[ip + 1] == e.child;
                if forward {
                    (model.q, model.r)
                } else {
                    (model.r, model.q)
                }
            }
        }
    }
}

/// The rooted binary tree grown upward from its root: two rate-`q` edges up
/// from every vertex, one rate-`1-2q` edge down, truncated at `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    pub q: f64,
    pub depth: usize,
    /// Binary words, breadth-first; index 0 is the root.
    vertices: Vec<Vec<u8>>,
}

impl RootedTree {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn depth_of(&self, i: usize) -> usize {
        self.vertices[i].len()
    }

    /// Odds of the reversible stationary family, root normalized to 1:
    /// `pi = lambda^depth` with `lambda = q/(1-2q)`.
    pub fn reversible_pi(&self) -> Vec<f64> {
        let lambda = self.q / (1.0 - 2.0 * self.q);
        (0..self.vertex_count()).map(|i| lambda.powi(self.depth_of(i) as i32)).collect()
    }
}

/// Build the truncated rooted binary tree and its kernel. The root's
/// missing downward edge and the leaves' missing upward edges become
/// self-loops, so detailed balance holds on every remaining edge and the
/// reversible family is stationary on the truncation exactly.
pub fn build_rooted_tree(
    q: f64,
    depth: usize,
) -> Result<(RootedTree, GraphKernel), MeasureError> {
    if !(q > 0.0 && q < 0.5) {
        return Err(MeasureError::BadParameter(format!(
            "upward rate must lie in (0, 1/2), got {q}"
        )));
    }
    if depth == 0 || depth > MAX_TREE_DEPTH {
        return Err(MeasureError::BadParameter(format!(
            "depth must lie in 1..={MAX_TREE_DEPTH}, got {depth}"
        )));
    }
    let s = 1.0 - 2.0 * q;
    let mut vertices: Vec<Vec<u8>> = vec![vec![]];
    let mut parent: Vec<usize> = vec![usize::MAX];
    let mut frontier = vec![0usize];
    for _ in 1..=depth {
        let mut next = Vec::new();
        for &pi in &frontier {
            for bit in 0u8..2 {
                let mut w = vertices[pi].clone();
                w.push(bit);
                vertices.push(w);
                parent.push(pi);
                next.push(vertices.len() - 1);
            }
        }
        frontier = next;
    }
    let n = vertices.len();
    let mut rates = vec![0.0f64; n * n];
    for i in 1..n {
        rates[parent[i] * n + i] = q; // upward
        rates[i * n + parent[i]] = s; // downward
    }
    for i in 0..n {
        let row: f64 = (0..n).filter(|&j| j != i).map(|j| rates[i * n + j]).sum();
        rates[i * n + i] = 1.0 - row;
    }
    let labels = vertices
        .iter()
        .map(|w| {
            if w.is_empty() {
                "root".into()
            } else {
                w.iter().map(|b| char::from(b'0' + b)).collect()
            }
        })
        .collect();
    let kernel = make_graph_kernel(labels, rates).expect("rooted tree rows stochastic");
    Ok((RootedTree { q, depth, vertices }, kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{stationarity_check, stationarity_check_exempting};
    use approx::assert_abs_diff_eq;

    const Q: f64 = 0.2;
    const R: f64 = 0.5;
    const S: f64 = 0.3;

    fn alpha_of_pi(pi: &[f64]) -> Vec<f64> {
        pi.iter().map(|p| p / (1.0 + p)).collect()
    }

    #[test]
    fn word_tree_counts() {
        let (v, e) = build_word_tree(3);
        // 1 + 3 + 6 + 12 vertices, one edge per non-root vertex.
        assert_eq!(v.len(), 22);
        assert_eq!(e.len(), 21);
    }

    #[test]
    fn alternating_case_has_one_edge_of_each_type() {
        let (model, kernel) = build_tree_case(TreeCase::ThreeTypeAlternating, Q, R, S, 2).unwrap();
        let pair_of = |a: f64, b: f64| {
            let mut p = [a, b];
            p.sort_by(f64::total_cmp);
            p
        };
        let type_pairs =
            [pair_of(Q, R), pair_of(R, S), pair_of(S, Q)];
        // Interior vertices: three incident edges realize the three pairs.
        for v in 0..model.vertex_count() {
            if model.depth_of(v) == model.depth {
                continue;
            }
            let full_cmp = |a: &[f64; 2], b: &[f64; 2]| {
                a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
            };
            let mut seen: Vec<[f64; 2]> = model
                .edges()
                .iter()
                .filter(|e| e.parent == v || e.child == v)
                .map(|e| pair_of(kernel.rate(e.parent, e.child), kernel.rate(e.child, e.parent)))
                .collect();
            seen.sort_by(full_cmp);
            let mut want = type_pairs;
            want.sort_by(|a, b| full_cmp(a, b));
            assert_eq!(seen, want.to_vec(), "vertex {v}");
        }
    }

    #[test]
    fn every_vertex_sends_and_receives_qrs() {
        for case in [
            TreeCase::ThreeTypeAlternating,
            TreeCase::LinesWithBridges,
            TreeCase::FullySymmetric,
        ] {
            let (model, kernel) = build_tree_case(case, Q, R, S, 3).unwrap();
            let mut want = [Q, R, S];
            want.sort_by(f64::total_cmp);
            for v in 0..model.vertex_count() {
                if model.depth_of(v) == model.depth {
                    continue;
                }
                let mut out: Vec<f64> = (0..kernel.n())
                    .filter(|&j| j != v)
                    .map(|j| kernel.rate(v, j))
                    .filter(|p| *p > 0.0)
                    .collect();
                let mut inc: Vec<f64> = (0..kernel.n())
                    .filter(|&j| j != v)
                    .map(|j| kernel.rate(j, v))
                    .filter(|p| *p > 0.0)
                    .collect();
                out.sort_by(f64::total_cmp);
                inc.sort_by(f64::total_cmp);
                assert_eq!(out, want.to_vec(), "{case:?} vertex {v} out");
                assert_eq!(inc, want.to_vec(), "{case:?} vertex {v} in");
            }
        }
    }

    #[test]
    fn symmetric_case_kernel_is_symmetric() {
        let (_, kernel) = build_tree_case(TreeCase::FullySymmetric, Q, R, S, 3).unwrap();
        for i in 0..kernel.n() {
            for j in 0..kernel.n() {
                assert_eq!(kernel.rate(i, j), kernel.rate(j, i));
            }
        }
    }

    #[test]
    fn bridges_form_a_matching_between_lines() {
        let (model, kernel) = build_tree_case(TreeCase::LinesWithBridges, Q, R, S, 3).unwrap();
        let mut line_of = vec![usize::MAX; model.vertex_count()];
        for (li, line) in model.lines().iter().enumerate() {
            for &v in line {
                line_of[v] = li;
            }
        }
        let mut seen_pairs = Vec::new();
        for e in model.edges().iter().filter(|e| e.generator == 2) {
            assert_eq!(kernel.rate(e.parent, e.child), S);
            assert_eq!(kernel.rate(e.child, e.parent), S);
            let (a, b) = (line_of[e.parent], line_of[e.child]);
            if a != usize::MAX && b != usize::MAX {
                assert_ne!(a, b, "bridge inside one line");
                let pair = (a.min(b), a.max(b));
                assert!(!seen_pairs.contains(&pair), "two bridges join the same lines");
                seen_pairs.push(pair);
            }
        }
    }

    #[test]
    fn line_interior_has_one_q_exit_and_one_r_exit() {
        let (model, kernel) = build_tree_case(TreeCase::LinesWithBridges, Q, R, S, 3).unwrap();
        for line in model.lines() {
            for w in line.windows(3) {
                let exits = [kernel.rate(w[1], w[0]), kernel.rate(w[1], w[2])];
                let mut sorted = exits;
                sorted.sort_by(f64::total_cmp);
                let mut want = [Q, R];
                want.sort_by(f64::total_cmp);
                assert_eq!(sorted, want);
            }
        }
    }

    #[test]
    fn alternating_families_homogeneous_and_reversible() {
        let (model, kernel) = build_tree_case(TreeCase::ThreeTypeAlternating, Q, R, S, 3).unwrap();
        let families = tree_stationary_families(&model).unwrap();
        assert_eq!(families.len(), 2);
        let leaves = model.leaves();
        for fam in &families {
            let verdict = stationarity_check_exempting(
                &kernel,
                &alpha_of_pi(&fam.pi),
                &leaves,
                1e-9,
            )
            .unwrap();
            assert!(verdict.stationary, "{:?}", fam.kind);
            match fam.kind {
                FamilyKind::Reversible => assert!(verdict.reversible),
                FamilyKind::Homogeneous => assert!(!verdict.reversible),
                FamilyKind::Mixed => panic!("unexpected mixed family"),
            }
        }
        // The reversible family really is inhomogeneous.
        let rev = families.iter().find(|f| f.kind == FamilyKind::Reversible).unwrap();
        assert!(rev.pi.iter().any(|p| (p - 1.0).abs() > 1e-9));
    }

    #[test]
    fn line_families_follow_choice_vectors() {
        let (model, kernel) = build_tree_case(TreeCase::LinesWithBridges, Q, R, S, 3).unwrap();
        let m = model.lines().len();
        assert!(m >= 2, "depth-3 truncation has at least two lines");
        let families = tree_stationary_families(&model).unwrap();
        assert_eq!(families.len(), 1 << m);
        let leaves = model.leaves();
        for fam in &families {
            let verdict = stationarity_check_exempting(
                &kernel,
                &alpha_of_pi(&fam.pi),
                &leaves,
                1e-9,
            )
            .unwrap();
            assert!(verdict.stationary, "choices {:?}", fam.line_choices);
        }
        // All-geometric is reversible; families are pairwise distinct when
        // their multi-vertex line choices differ.
        let rev = families.iter().find(|f| f.kind == FamilyKind::Reversible).unwrap();
        assert!(rev.line_choices.iter().all(|&g| g));
        for (i, a) in families.iter().enumerate() {
            for b in families.iter().skip(i + 1) {
                assert!(
                    a.pi.iter().zip(&b.pi).any(|(x, y)| (x - y).abs() > 1e-12),
                    "families with choices {:?} and {:?} coincide",
                    a.line_choices,
                    b.line_choices
                );
            }
        }
    }

    #[test]
    fn geometric_lines_step_by_rate_ratio() {
        let (model, _) = build_tree_case(TreeCase::LinesWithBridges, Q, R, S, 3).unwrap();
        let families = tree_stationary_families(&model).unwrap();
        let rev = families.iter().find(|f| f.kind == FamilyKind::Reversible).unwrap();
        for line in model.lines() {
            for w in line.windows(2) {
                let ratio = rev.pi[w[1]] / rev.pi[w[0]];
                assert_abs_diff_eq!(ratio, Q / R, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_case_has_homogeneous_family_only() {
        let (model, kernel) = build_tree_case(TreeCase::FullySymmetric, Q, R, S, 3).unwrap();
        let families = tree_stationary_families(&model).unwrap();
        assert_eq!(families.len(), 1);
        let verdict =
            stationarity_check(&kernel, &alpha_of_pi(&families[0].pi), 1e-9).unwrap();
        // Symmetric rates: stationary and reversible without exemptions.
        assert!(verdict.stationary && verdict.reversible);
    }

    #[test]
    fn rooted_tree_reversible_without_exemptions() {
        let (tree, kernel) = build_rooted_tree(0.3, 4).unwrap();
        assert_eq!(tree.vertex_count(), 31);
        let verdict =
            stationarity_check(&kernel, &alpha_of_pi(&tree.reversible_pi()), 1e-9)
                .unwrap();
        assert!(verdict.stationary && verdict.reversible);
    }

    #[test]
    fn rooted_tree_homogeneous_not_stationary() {
        // Upward rate 2q never equals downward rate s when q != 1/3, so the
        // constant-odds family fails even away from the truncation.
        let (_, kernel) = build_rooted_tree(0.3, 3).unwrap();
        let n = kernel.n();
        let verdict = stationarity_check(&kernel, &vec![0.5; n], 1e-9).unwrap();
        assert!(!verdict.stationary);
    }

    #[test]
    fn rooted_tree_odds_are_geometric_in_depth() {
        let (tree, _) = build_rooted_tree(0.2, 3).unwrap();
        let pi = tree.reversible_pi();
        let lambda = 0.2f64 / 0.6;
        for i in 0..tree.vertex_count() {
            assert_abs_diff_eq!(
                pi[i],
                lambda.powi(tree.depth_of(i) as i32),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(build_tree_case(TreeCase::FullySymmetric, 0.2, 0.2, 0.6, 2).is_err());
        assert!(build_tree_case(TreeCase::FullySymmetric, 0.2, 0.5, 0.2, 2).is_err());
        assert!(build_tree_case(TreeCase::FullySymmetric, Q, R, S, 0).is_err());
        assert!(build_rooted_tree(0.6, 2).is_err());
    }
}
