//! Spectral clustering on the symmetric normalized graph Laplacian.

use ndarray::Array2;
use std::collections::BTreeMap;

use crate::cluster::agglomerative::ward_merge;
use crate::cluster::kmeans::kmeans_fit;
use crate::cluster::{
    pairwise_distances, validate_input, ClusterAssignment, ClusteringStrategy, OptionParser,
};
use crate::error::{Error, Result};
use crate::linalg::jacobi_eigh;
use crate::seed;

/// How the similarity graph is built from point coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Affinity {
    /// Gaussian kernel `exp(-gamma * squared distance)`. `gamma: None`
    /// selects `1 / (2 * median^2)` of the pairwise distances.
    Rbf { gamma: Option<f64> },
    /// Binary mutual-or k-nearest-neighbor graph: an edge exists when either
    /// endpoint ranks the other among its `neighbors` closest points.
    Knn { neighbors: usize },
}

/// Spectral clustering: build an affinity graph, embed each vertex with the
/// eigenvectors of the `k` smallest eigenvalues of the symmetric normalized
/// Laplacian `I - D^{-1/2} A D^{-1/2}`, row-normalize, and run k-means in
/// the embedding.
///
/// Disconnected graphs are valid input. With exactly `k` components each
/// component becomes one cluster; with fewer than `k`, cluster counts are
/// apportioned to components by size and each component is embedded
/// separately; with more than `k`, whole components are grouped by Ward
/// merging of their centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectral {
    pub affinity: Affinity,
    /// Restarts of the k-means step in the embedding.
    pub n_init: usize,
}

impl Default for Spectral {
    fn default() -> Self {
        Spectral { affinity: Affinity::Rbf { gamma: None }, n_init: 10 }
    }
}

impl Spectral {
    pub fn from_options(opts: &BTreeMap<String, String>) -> Result<Self> {
        let mut p = OptionParser::new(opts);
        let kind = p.parse_str("affinity", "rbf");
        let gamma = p.parse_str("gamma", "auto");
        let neighbors = p.parse("neighbors", 10usize)?;
        let n_init = p.parse("n_init", 10usize)?;
        p.finish()?;
        let affinity = match kind.as_str() {
            "rbf" => {
                let gamma = match gamma.as_str() {
                    "auto" => None,
                    raw => Some(raw.parse::<f64>().map_err(|_| {
                        Error::invalid(format!("gamma must be 'auto' or a number, got '{raw}'"))
                    })?),
                };
                if let Some(g) = gamma {
                    if !(g > 0.0) || !g.is_finite() {
                        return Err(Error::invalid("gamma must be positive and finite"));
                    }
                }
                Affinity::Rbf { gamma }
            }
            "knn" => {
                if neighbors == 0 {
                    return Err(Error::invalid("neighbors must be at least 1"));
                }
                Affinity::Knn { neighbors }
            }
            other => {
                return Err(Error::invalid(format!(
                    "affinity must be 'rbf' or 'knn', got '{other}'"
                )))
            }
        };
        Ok(Spectral { affinity, n_init })
    }

    fn build_affinity(&self, data: &Array2<f64>) -> Array2<f64> {
        let dist = pairwise_distances(data);
        let n = dist.nrows();
        match &self.affinity {
            Affinity::Rbf { gamma } => {
                let gamma = gamma.unwrap_or_else(|| {
                    let mut all: Vec<f64> = (0..n)
                        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                        .map(|(i, j)| dist[(i, j)])
                        .collect();
                    all.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
                    let median = if all.is_empty() { 0.0 } else { all[all.len() / 2] };
                    if median > 0.0 {
                        1.0 / (2.0 * median * median)
                    } else {
                        1.0
                    }
                });
                let mut aff = Array2::<f64>::zeros((n, n));
                for i in 0..n {
                    for j in (i + 1)..n {
                        let w = (-gamma * dist[(i, j)] * dist[(i, j)]).exp();
                        aff[(i, j)] = w;
                        aff[(j, i)] = w;
                    }
                }
                aff
            }
            Affinity::Knn { neighbors } => {
                let m = (*neighbors).min(n.saturating_sub(1));
                let mut aff = Array2::<f64>::zeros((n, n));
                for i in 0..n {
                    let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    order.sort_by(|&a, &b| {
                        dist[(i, a)]
                            .partial_cmp(&dist[(i, b)])
                            .expect("distances are finite")
                            .then(a.cmp(&b))
                    });
                    for &j in order.iter().take(m) {
                        aff[(i, j)] = 1.0;
                        aff[(j, i)] = 1.0;
                    }
                }
                aff
            }
        }
    }
}

/// Connected components of the graph `affinity > 0`, each sorted, ordered by
/// smallest member.
fn components(aff: &Array2<f64>) -> Vec<Vec<usize>> {
    let n = aff.nrows();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut queue = vec![start];
        let mut members = Vec::new();
        seen[start] = true;
        while let Some(v) = queue.pop() {
            members.push(v);
            for u in 0..n {
                if !seen[u] && aff[(v, u)] > 0.0 {
                    seen[u] = true;
                    queue.push(u);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

/// Laplacian embedding of one connected subgraph followed by k-means.
fn embed_and_cluster(
    aff: &Array2<f64>,
    members: &[usize],
    k: usize,
    run_seed: u64,
    n_init: usize,
) -> Result<Vec<usize>> {
    let m = members.len();
    if k == 1 || m == 1 {
        return Ok(vec![0; m]);
    }
    let mut degree = vec![0.0f64; m];
    for (a, &i) in members.iter().enumerate() {
        for &j in members.iter() {
            degree[a] += aff[(i, j)];
        }
    }
    // Inside a connected component of ≥ 2 vertices every degree is positive.
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let mut lap = Array2::<f64>::zeros((m, m));
    for a in 0..m {
        lap[(a, a)] = 1.0;
        for b in 0..m {
            if a != b {
                lap[(a, b)] = -inv_sqrt[a] * aff[(members[a], members[b])] * inv_sqrt[b];
            }
        }
    }
    let (_, vectors) = jacobi_eigh(&lap)?;
    // Eigenpairs arrive in descending order; the embedding wants the k
    // smallest, i.e. the trailing columns.
    let mut embedding = Array2::<f64>::zeros((m, k));
    for a in 0..m {
        for (c, col) in ((m - k)..m).enumerate() {
            embedding[(a, c)] = vectors[(a, col)];
        }
        let norm: f64 = (0..k).map(|c| embedding[(a, c)].powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in 0..k {
                embedding[(a, c)] /= norm;
            }
        }
    }
    let fit = kmeans_fit(&embedding, k, run_seed, n_init, 100, 1e-9)?;
    Ok(fit.labels)
}

/// Apportions `k` clusters over component sizes: proportional shares with
/// largest-remainder rounding, clamped to `1..=size` per component.
fn apportion(sizes: &[usize], k: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let c = sizes.len();
    let mut alloc: Vec<usize> = Vec::with_capacity(c);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(c);
    for (i, &s) in sizes.iter().enumerate() {
        let ideal = k as f64 * s as f64 / total as f64;
        alloc.push(ideal.floor() as usize);
        remainders.push((ideal - ideal.floor(), i));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(&b.1)));
    let mut assigned: usize = alloc.iter().sum();
    for &(_, i) in remainders.iter().cycle() {
        if assigned == k {
            break;
        }
        alloc[i] += 1;
        assigned += 1;
    }
    // Clamp into [1, size], preserving the total.
    loop {
        let mut moved = false;
        for i in 0..c {
            if alloc[i] == 0 {
                let donor = (0..c)
                    .filter(|&j| alloc[j] > 1)
                    .max_by_key(|&j| (alloc[j], std::cmp::Reverse(j)))
                    .expect("k >= c guarantees a donor");
                alloc[donor] -= 1;
                alloc[i] += 1;
                moved = true;
            }
            if alloc[i] > sizes[i] {
                let recipient = (0..c)
                    .filter(|&j| alloc[j] < sizes[j])
                    .max_by_key(|&j| (sizes[j] - alloc[j], std::cmp::Reverse(j)))
                    .expect("k <= n guarantees spare capacity");
                alloc[i] -= 1;
                alloc[recipient] += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    alloc
}

/// Clusters the vertices of a precomputed affinity graph.
///
/// `affinity` must be square, finite and non-negative; it is symmetrized as
/// `(A + Aᵀ)/2` and the diagonal is ignored. With more than `k` connected
/// components (all groupings of which cut zero weight), whole components are
/// packed into `k` groups by greedy size balancing.
pub fn spectral_from_affinity(
    affinity: &Array2<f64>,
    k: usize,
    run_seed: u64,
    n_init: usize,
) -> Result<ClusterAssignment> {
    let n = affinity.nrows();
    if n == 0 || affinity.ncols() != n {
        return Err(Error::invalid(format!(
            "affinity must be square and nonempty, got {}x{}",
            affinity.nrows(),
            affinity.ncols()
        )));
    }
    if affinity.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("affinity entries must be finite and non-negative"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k must lie in 1..={n} for {n} vertices, got {k}"
        )));
    }
    let mut aff = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                aff[(i, j)] = 0.5 * (affinity[(i, j)] + affinity[(j, i)]);
            }
        }
    }
    let comps = components(&aff);
    let labels = if comps.len() > k {
        // Every grouping of whole components cuts zero weight; pack by size,
        // largest component first into the currently lightest group.
        let mut order: Vec<usize> = (0..comps.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(comps[i].len()), i));
        let mut group_load = vec![0usize; k];
        let mut comp_group = vec![0usize; comps.len()];
        for &ci in &order {
            let g = (0..k).min_by_key(|&g| (group_load[g], g)).expect("k >= 1");
            comp_group[ci] = g;
            group_load[g] += comps[ci].len();
        }
        let mut labels = vec![0usize; n];
        for (ci, members) in comps.iter().enumerate() {
            for &v in members {
                labels[v] = comp_group[ci];
            }
        }
        labels
    } else {
        cluster_components(&aff, &comps, k, run_seed, n_init)?
    };
    // Compact labels in first-occurrence order so they are dense and stable.
    let mut order: Vec<usize> = Vec::new();
    let compact: Vec<usize> = labels
        .iter()
        .map(|&l| match order.iter().position(|&o| o == l) {
            Some(pos) => pos,
            None => {
                order.push(l);
                order.len() - 1
            }
        })
        .collect();
    ClusterAssignment::new(compact, k, Vec::new(), run_seed)
}

/// Embeds and clusters each component with its apportioned cluster count
/// (requires `components.len() <= k`).
fn cluster_components(
    aff: &Array2<f64>,
    comps: &[Vec<usize>],
    k: usize,
    run_seed: u64,
    n_init: usize,
) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = comps.iter().map(|c| c.len()).collect();
    let alloc = apportion(&sizes, k);
    let n = aff.nrows();
    let mut labels = vec![0usize; n];
    let mut offset = 0;
    for (ci, members) in comps.iter().enumerate() {
        let comp_seed = seed::derive(run_seed, &[seed::tag("component"), ci as u64]);
        let local = embed_and_cluster(aff, members, alloc[ci], comp_seed, n_init)?;
        for (a, &v) in members.iter().enumerate() {
            labels[v] = offset + local[a];
        }
        offset += alloc[ci];
    }
    Ok(labels)
}

impl ClusteringStrategy for Spectral {
    fn id(&self) -> &'static str {
        "spectral"
    }

    fn label(&self) -> &'static str {
        "SC"
    }

    fn cluster(&self, data: &Array2<f64>, k: usize, run_seed: u64) -> Result<ClusterAssignment> {
        validate_input(data, k)?;
        let aff = self.build_affinity(data);
        let comps = components(&aff);
        if comps.len() > k {
            // With data coordinates available, group whole components by
            // Ward-merging their centroids instead of blind size packing.
            let d = data.ncols();
            let mut centroids = Array2::<f64>::zeros((comps.len(), d));
            let mut sizes = Vec::with_capacity(comps.len());
            for (ci, members) in comps.iter().enumerate() {
                for &v in members {
                    for j in 0..d {
                        centroids[(ci, j)] += data[(v, j)];
                    }
                }
                for j in 0..d {
                    centroids[(ci, j)] /= members.len() as f64;
                }
                sizes.push(members.len() as f64);
            }
            let (comp_labels, _) = ward_merge(&centroids, &sizes, k)?;
            let mut labels = vec![0usize; data.nrows()];
            for (ci, members) in comps.iter().enumerate() {
                for &v in members {
                    labels[v] = comp_labels[ci];
                }
            }
            let mut order: Vec<usize> = Vec::new();
            let compact: Vec<usize> = labels
                .iter()
                .map(|&l| match order.iter().position(|&o| o == l) {
                    Some(pos) => pos,
                    None => {
                        order.push(l);
                        order.len() - 1
                    }
                })
                .collect();
            return ClusterAssignment::new(compact, k, Vec::new(), run_seed);
        }
        let labels = cluster_components(&aff, &comps, k, run_seed, self.n_init)?;
        let mut order: Vec<usize> = Vec::new();
        let compact: Vec<usize> = labels
            .iter()
            .map(|&l| match order.iter().position(|&o| o == l) {
                Some(pos) => pos,
                None => {
                    order.push(l);
                    order.len() - 1
                }
            })
            .collect();
        ClusterAssignment::new(compact, k, Vec::new(), run_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_rings(n_per: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (ring, radius) in [(0usize, 1.0f64), (1, 5.0)] {
            for i in 0..n_per {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n_per as f64;
                rows.push([radius * theta.cos(), radius * theta.sin()]);
                truth.push(ring);
            }
        }
        let data = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]);
        (data, truth)
    }

    fn agrees_up_to_relabeling(a: &[usize], b: &[usize]) -> bool {
        let norm = |labels: &[usize]| {
            let mut order = Vec::new();
            labels
                .iter()
                .map(|&l| match order.iter().position(|&o| o == l) {
                    Some(p) => p,
                    None => {
                        order.push(l);
                        order.len() - 1
                    }
                })
                .collect::<Vec<usize>>()
        };
        norm(a) == norm(b)
    }

    #[test]
    fn concentric_rings_split_by_ring() {
        let (data, truth) = two_rings(40);
        let spectral = Spectral { affinity: Affinity::Knn { neighbors: 3 }, n_init: 10 };
        let out = spectral.cluster(&data, 2, 11).unwrap();
        assert!(agrees_up_to_relabeling(&out.labels, &truth));
    }

    #[test]
    fn rbf_with_explicit_gamma_also_splits_rings() {
        let (data, truth) = two_rings(40);
        let spectral = Spectral { affinity: Affinity::Rbf { gamma: Some(8.0) }, n_init: 10 };
        let out = spectral.cluster(&data, 2, 3).unwrap();
        assert!(agrees_up_to_relabeling(&out.labels, &truth));
    }

    #[test]
    fn block_diagonal_affinity_recovers_blocks_exactly() {
        let mut aff = Array2::<f64>::zeros((7, 7));
        for block in [&[0usize, 1, 2][..], &[3, 4, 5, 6][..]] {
            for &i in block {
                for &j in block {
                    if i != j {
                        aff[(i, j)] = 1.0;
                    }
                }
            }
        }
        let out = spectral_from_affinity(&aff, 2, 0, 10).unwrap();
        assert_eq!(out.labels, vec![0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn matches_exhaustive_normalized_cut_on_weighted_graph() {
        // Two triangles joined by one weak edge.
        let mut aff = Array2::<f64>::zeros((6, 6));
        let edges: &[(usize, usize, f64)] = &[
            (0, 1, 1.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
            (3, 4, 1.0),
            (3, 5, 1.0),
            (4, 5, 1.0),
            (2, 3, 0.2),
        ];
        for &(i, j, w) in edges {
            aff[(i, j)] = w;
            aff[(j, i)] = w;
        }
        // Oracle: the bipartition minimizing Ncut = cut/assoc(A) + cut/assoc(B).
        let n = 6;
        let total_degree: Vec<f64> = (0..n).map(|i| (0..n).map(|j| aff[(i, j)]).sum()).collect();
        let mut best = f64::INFINITY;
        let mut best_mask = 0u32;
        for mask in 1..(1u32 << n) - 1 {
            let mut cut = 0.0;
            let mut assoc_a = 0.0;
            let mut assoc_b = 0.0;
            for i in 0..n {
                let in_a = (mask >> i) & 1 == 1;
                if in_a {
                    assoc_a += total_degree[i];
                } else {
                    assoc_b += total_degree[i];
                }
                for j in (i + 1)..n {
                    if in_a != ((mask >> j) & 1 == 1) {
                        cut += aff[(i, j)];
                    }
                }
            }
            let ncut = cut / assoc_a + cut / assoc_b;
            if ncut < best {
                best = ncut;
                best_mask = mask;
            }
        }
        let oracle: Vec<usize> = (0..n).map(|i| ((best_mask >> i) & 1) as usize).collect();
        let out = spectral_from_affinity(&aff, 2, 0, 10).unwrap();
        assert!(
            agrees_up_to_relabeling(&out.labels, &oracle),
            "spectral {:?} vs ncut oracle {:?}",
            out.labels,
            oracle
        );
    }

    #[test]
    fn fewer_components_than_k_apportions_by_size() {
        // Two lumps of 5 near each other plus a far lump of 15. Each
        // 5-point lump has only 4 in-lump mates, so its 7-NN list reaches
        // across the small gap and the two near lumps join into one
        // component of 10; the far lump's 14 mates keep it self-contained.
        // With K = 3 the 15-point component should receive two clusters and
        // the 10-point component one.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows = Vec::new();
        for &c in &[0.0, 10.0] {
            for _ in 0..5 {
                rows.push([c + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]);
            }
        }
        for _ in 0..15 {
            rows.push([1000.0 + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]);
        }
        let data = Array2::from_shape_fn((25, 2), |(i, j)| rows[i][j]);
        let spectral = Spectral { affinity: Affinity::Knn { neighbors: 7 }, n_init: 10 };
        let comps = components(&spectral.build_affinity(&data));
        assert_eq!(comps.len(), 2, "construction should give two components");
        assert_eq!(comps[0].len(), 10);
        let out = spectral.cluster(&data, 3, 5).unwrap();
        let near_label = out.labels[0];
        assert!(out.labels[..10].iter().all(|&l| l == near_label));
        let far_labels: std::collections::BTreeSet<usize> =
            out.labels[10..].iter().copied().collect();
        assert_eq!(far_labels.len(), 2);
        assert!(!far_labels.contains(&near_label));
    }

    #[test]
    fn more_components_than_k_groups_nearby_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let centers = [0.0, 10.0, 1000.0];
        let mut rows = Vec::new();
        for &c in &centers {
            for _ in 0..8 {
                rows.push([c + rng.random_range(-0.3..0.3)]);
            }
        }
        let data = Array2::from_shape_fn((24, 1), |(i, j)| rows[i][j]);
        let spectral = Spectral { affinity: Affinity::Knn { neighbors: 3 }, n_init: 10 };
        assert_eq!(components(&spectral.build_affinity(&data)).len(), 3);
        let out = spectral.cluster(&data, 2, 0).unwrap();
        assert!(out.labels[..16].iter().all(|&l| l == out.labels[0]));
        assert!(out.labels[16..].iter().all(|&l| l != out.labels[0]));
    }

    #[test]
    fn duplicate_points_are_fine() {
        let data = array![[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]];
        let out = Spectral::default().cluster(&data, 2, 0).unwrap();
        assert_eq!(out.labels[0], out.labels[1]);
        assert_eq!(out.labels[2], out.labels[3]);
        assert_ne!(out.labels[0], out.labels[2]);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let data = Array2::from_shape_fn((40, 2), |_| rng.random_range(-1.0..1.0));
        let a = Spectral::default().cluster(&data, 3, 8).unwrap();
        let b = Spectral::default().cluster(&data, 3, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn apportionment_respects_bounds_and_total() {
        assert_eq!(apportion(&[20, 10], 3), vec![2, 1]);
        assert_eq!(apportion(&[5, 5], 2), vec![1, 1]);
        assert_eq!(apportion(&[1, 30], 4), vec![1, 3]);
        assert_eq!(apportion(&[2, 2, 2], 5), vec![2, 2, 1]);
        let alloc = apportion(&[3, 17, 9], 7);
        assert_eq!(alloc.iter().sum::<usize>(), 7);
        assert!(alloc.iter().all(|&a| a >= 1));
    }

    #[test]
    fn option_parsing_covers_both_affinities() {
        let mut opts = BTreeMap::new();
        opts.insert("affinity".to_string(), "knn".to_string());
        opts.insert("neighbors".to_string(), "5".to_string());
        let s = Spectral::from_options(&opts).unwrap();
        assert_eq!(s.affinity, Affinity::Knn { neighbors: 5 });

        let mut opts = BTreeMap::new();
        opts.insert("gamma".to_string(), "1.5".to_string());
        let s = Spectral::from_options(&opts).unwrap();
        assert_eq!(s.affinity, Affinity::Rbf { gamma: Some(1.5) });

        let mut opts = BTreeMap::new();
        opts.insert("affinity".to_string(), "cosine".to_string());
        assert!(Spectral::from_options(&opts).is_err());

        let mut opts = BTreeMap::new();
        opts.insert("bandwidth".to_string(), "2".to_string());
        assert!(Spectral::from_options(&opts).is_err());
    }
}
