//! Comparing and clustering similarity networks.
//!
//! Distance correlation treats the similarity profile of each node (its row) as
//! one sample point, so two networks on the same node set become two paired
//! samples of size `n`. Clustering is Louvain modularity optimization with a
//! seeded sweep order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simbuild::SimilarityLayer;

/// Minimum modularity improvement for a move or a level to count.
pub const MODULARITY_EPS: f64 = 1e-12;

const MAX_SWEEPS: usize = 10_000;

fn check_pair(a: &SimilarityLayer, b: &SimilarityLayer) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionError {
            expected: a.n(),
            found: b.n(),
        });
    }
    if a.labels() != b.labels() {
        return Err(Error::InvalidInput(
            "networks have different node labels".into(),
        ));
    }
    Ok(())
}

/// Double-centered Euclidean distance matrix of the sample rows, row-major.
fn centered_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = x[i]
                .iter()
                .zip(&x[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let row_means: Vec<f64> = (0..n)
        .map(|i| d[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            // symmetric, so column means equal row means
            d[i * n + j] += grand - row_means[i] - row_means[j];
        }
    }
    d
}

/// Sample distance correlation between paired multivariate samples.
///
/// Returns 0 when either sample has zero distance variance.
pub fn distance_correlation_samples(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionError {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(
            "distance correlation needs at least 2 samples".into(),
        ));
    }
    let a = centered_distances(x);
    let b = centered_distances(y);
    let nn = a.len() as f64;
    let dcov2 = a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() / nn;
    let dvar_a = a.iter().map(|p| p * p).sum::<f64>() / nn;
    let dvar_b = b.iter().map(|q| q * q).sum::<f64>() / nn;
    if !(dvar_a > 0.0) || !(dvar_b > 0.0) {
        return Ok(0.0);
    }
    let dcor = dcov2.max(0.0).sqrt() / (dvar_a.sqrt() * dvar_b.sqrt()).sqrt();
    Ok(dcor.clamp(0.0, 1.0))
}

/// Distance correlation between two networks over the same nodes, using row profiles.
pub fn distance_correlation(a: &SimilarityLayer, b: &SimilarityLayer) -> Result<f64> {
    check_pair(a, b)?;
    distance_correlation_samples(&a.matrix().rows(), &b.matrix().rows())
}

/// Symmetric table of pairwise distance correlations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn correlation_table(
    names: &[String],
    networks: &[SimilarityLayer],
) -> Result<CorrelationTable> {
    if names.len() != networks.len() {
        return Err(Error::DimensionError {
            expected: networks.len(),
            found: names.len(),
        });
    }
    let k = networks.len();
    let mut values = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let v = distance_correlation(&networks[i], &networks[j])?;
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(CorrelationTable {
        names: names.to_vec(),
        values,
    })
}

/// Community assignment with contiguous 0-based indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    labels: Vec<String>,
    community: Vec<usize>,
    modularity: f64,
}

impl Partition {
    /// Relabels `assignment` to `0..c` in order of first appearance and scores it.
    pub fn from_assignment(
        s: &SimilarityLayer,
        assignment: &[usize],
        resolution: f64,
    ) -> Result<Self> {
        if assignment.len() != s.n() {
            return Err(Error::InvalidInput(format!(
                "partition covers {} nodes, network has {}",
                assignment.len(),
                s.n()
            )));
        }
        let community = canonical(assignment);
        let graph = Graph::from_layer(s)?;
        let modularity = graph.modularity(&community, resolution);
        Ok(Partition {
            labels: s.labels().to_vec(),
            community,
            modularity,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn community(&self) -> &[usize] {
        &self.community
    }

    pub fn modularity(&self) -> f64 {
        self.modularity
    }

    pub fn communities(&self) -> usize {
        self.community.iter().max().map_or(0, |c| c + 1)
    }
}

fn canonical(assignment: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    assignment
        .iter()
        .map(|c| {
            let next = map.len();
            *map.entry(*c).or_insert(next)
        })
        .collect()
}

/// Dense weighted graph; `w[i][i]` holds self-loop weight of aggregated nodes.
struct Graph {
    w: Vec<Vec<f64>>,
    degree: Vec<f64>,
    total: f64,
}

impl Graph {
    fn from_layer(s: &SimilarityLayer) -> Result<Self> {
        let n = s.n();
        let m = s.matrix();
        let w: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { m.get(i, j) })
                    .collect()
            })
            .collect();
        if w.iter().flatten().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("negative edge weight".into()));
        }
        Ok(Self::new(w))
    }

    fn new(w: Vec<Vec<f64>>) -> Self {
        let degree: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
        let total = degree.iter().sum();
        Graph { w, degree, total }
    }

    fn n(&self) -> usize {
        self.w.len()
    }

    /// `sum_c [in_c / 2W - resolution * (tot_c / 2W)^2]`; 0 for an edgeless graph.
    fn modularity(&self, community: &[usize], resolution: f64) -> f64 {
        if !(self.total > 0.0) {
            return 0.0;
        }
        let c = community.iter().max().map_or(0, |c| c + 1);
        let mut inside = vec![0.0; c];
        let mut tot = vec![0.0; c];
        for i in 0..self.n() {
            tot[community[i]] += self.degree[i];
            for j in 0..self.n() {
                if community[i] == community[j] {
                    inside[community[i]] += self.w[i][j];
                }
            }
        }
        let two_w = self.total;
        (0..c)
            .map(|k| inside[k] / two_w - resolution * (tot[k] / two_w) * (tot[k] / two_w))
            .sum()
    }

    /// Local moving phase; returns the community of each node and whether anything moved.
    fn local_moves(&self, resolution: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.n();
        let mut community: Vec<usize> = (0..n).collect();
        let mut tot = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let two_w = self.total;
        let mut moved_any = false;
        let mut links = vec![0.0; n];

        for _ in 0..MAX_SWEEPS {
            let mut moved = false;
            for &i in &order {
                let ki = self.degree[i];
                let own = community[i];
                tot[own] -= ki;

                let mut touched: Vec<usize> = Vec::new();
                for j in 0..n {
                    if j != i && self.w[i][j] > 0.0 {
                        let c = community[j];
                        if links[c] == 0.0 && !touched.contains(&c) {
                            touched.push(c);
                        }
                        links[c] += self.w[i][j];
                    }
                }
                touched.sort_unstable();

                let gain = |c: usize, links_c: f64| links_c - resolution * tot[c] * ki / two_w;
                let mut best = own;
                let mut best_gain = gain(own, links[own]);
                for &c in &touched {
                    if c == own {
                        continue;
                    }
                    let g = gain(c, links[c]);
                    if g - best_gain > MODULARITY_EPS * two_w {
                        best = c;
                        best_gain = g;
                    }
                }
                for &c in &touched {
                    links[c] = 0.0;
                }
                links[own] = 0.0;

                tot[best] += ki;
                if best != own {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (canonical(&community), moved_any)
    }

    fn aggregate(&self, community: &[usize]) -> Graph {
        let c = community.iter().max().map_or(0, |c| c + 1);
        let mut w = vec![vec![0.0; c]; c];
        for i in 0..self.n() {
            for j in 0..self.n() {
                w[community[i]][community[j]] += self.w[i][j];
            }
        }
        Graph::new(w)
    }
}

/// Weighted modularity of `p` on `s`, self-loops excluded.
pub fn modularity(s: &SimilarityLayer, p: &Partition, resolution: f64) -> Result<f64> {
    if p.labels() != s.labels() {
        return Err(Error::InvalidInput(
            "partition labels do not match the network".into(),
        ));
    }
    Ok(Graph::from_layer(s)?.modularity(p.community(), resolution))
}

/// Louvain modularity optimization with a seeded node sweep order.
pub fn louvain_communities(s: &SimilarityLayer, resolution: f64, seed: u64) -> Result<Partition> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "resolution = {resolution} must be positive"
        )));
    }
    let base = Graph::from_layer(s)?;
    if !(base.total > 0.0) {
        return Err(Error::InvalidInput("graph has no edges".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut membership: Vec<usize> = (0..base.n()).collect();
    let mut current_q = base.modularity(&membership, resolution);
    let mut graph = Graph::new(base.w.clone());
    loop {
        let (level, moved) = graph.local_moves(resolution, &mut rng);
        if !moved {
            break;
        }
        let candidate: Vec<usize> = membership.iter().map(|&c| level[c]).collect();
        let q = base.modularity(&candidate, resolution);
        if q - current_q <= MODULARITY_EPS {
            break;
        }
        membership = candidate;
        current_q = q;
        graph = graph.aggregate(&level);
    }
    Partition::from_assignment(s, &membership, resolution)
}
