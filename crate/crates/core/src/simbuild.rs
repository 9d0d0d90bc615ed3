//! Similarity layers built from raw measurements or from bipartite incidence data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;

/// Per-entity observation vectors for one layer.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != rows.len() {
            return Err(Error::DimensionError {
                expected: labels.len(),
                found: rows.len(),
            });
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("feature table has no rows".into()));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidInput("feature rows have dimension 0".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionError {
                expected: p,
                found: bad.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "feature table has non-finite values".into(),
            ));
        }
        Ok(FeatureTable { labels, rows })
    }

    /// One scalar observation per entity.
    pub fn scalar(labels: Vec<String>, values: &[f64]) -> Result<Self> {
        Self::new(labels, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn squared_distances(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v: f64 = self.rows[i]
                    .iter()
                    .zip(&self.rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }
}

/// Binary `items x groups` membership matrix.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    items: Vec<String>,
    groups: Vec<String>,
    entries: Vec<Vec<u8>>,
}

impl IncidenceMatrix {
    pub fn new(items: Vec<String>, groups: Vec<String>, entries: Vec<Vec<u8>>) -> Result<Self> {
        if entries.len() != items.len() {
            return Err(Error::DimensionError {
                expected: items.len(),
                found: entries.len(),
            });
        }
        for row in &entries {
            if row.len() != groups.len() {
                return Err(Error::DimensionError {
                    expected: groups.len(),
                    found: row.len(),
                });
            }
            if row.iter().any(|&b| b > 1) {
                return Err(Error::InvalidInput(
                    "incidence entries must be 0 or 1".into(),
                ));
            }
        }
        Ok(IncidenceMatrix {
            items,
            groups,
            entries,
        })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn entries(&self) -> &[Vec<u8>] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    Rbf,
    Presence,
    Jaccard,
    Cosine,
    External,
}

impl SimilarityKind {
    fn has_unit_diagonal(self) -> bool {
        !matches!(self, SimilarityKind::External)
    }
}

/// A labeled similarity matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityLayer {
    labels: Vec<String>,
    matrix: SymMatrix,
    kind: SimilarityKind,
}

impl SimilarityLayer {
    pub fn new(labels: Vec<String>, matrix: SymMatrix, kind: SimilarityKind) -> Result<Self> {
        if labels.len() != matrix.n() {
            return Err(Error::DimensionError {
                expected: matrix.n(),
                found: labels.len(),
            });
        }
        let n = matrix.n();
        for i in 0..n {
            for j in 0..n {
                let v = matrix.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "similarity ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
            }
            if kind.has_unit_diagonal() && matrix.get(i, i) != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "{kind:?} similarity has diagonal entry {} at {i}",
                    matrix.get(i, i)
                )));
            }
        }
        Ok(SimilarityLayer {
            labels,
            matrix,
            kind,
        })
    }

    /// Labels `0..n` for matrices that come without names.
    pub fn unlabeled(matrix: SymMatrix, kind: SimilarityKind) -> Result<Self> {
        let labels = (0..matrix.n()).map(|i| i.to_string()).collect();
        Self::new(labels, matrix, kind)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

/// Mean squared pairwise distance over distinct pairs; `1.0` when that mean is zero.
pub fn default_sigma(t: &FeatureTable) -> f64 {
    let n = t.len();
    if n < 2 {
        return 1.0;
    }
    let d = t.squared_distances();
    let mut total = 0.0;
    for (i, row) in d.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                total += v;
            }
        }
    }
    let mean = total / (n * (n - 1)) as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Gaussian similarity `exp(-|x_i - x_j|^2 / sigma)`.
pub fn rbf_similarity(t: &FeatureTable, sigma: f64) -> Result<SimilarityLayer> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let d = t.squared_distances();
    let s = SymMatrix::from_fn(t.len(), |i, j| {
        if i == j {
            1.0
        } else {
            (-d[i][j] / sigma).exp()
        }
    })?;
    SimilarityLayer::new(t.labels.clone(), s, SimilarityKind::Rbf)
}

/// Joint presence/absence: 1 where two binary observations agree.
pub fn presence_similarity(t: &FeatureTable) -> Result<SimilarityLayer> {
    if t.rows.iter().flatten().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput("presence data must be 0 or 1".into()));
    }
    let s = SymMatrix::from_fn(
        t.len(),
        |i, j| {
            if t.rows[i] == t.rows[j] {
                1.0
            } else {
                0.0
            }
        },
    )?;
    SimilarityLayer::new(t.labels.clone(), s, SimilarityKind::Presence)
}

/// Co-membership counts `B^T B` over the groups.
pub fn one_mode_projection(b: &IncidenceMatrix) -> SymMatrix {
    let n = b.groups.len();
    let mut g = nalgebra::DMatrix::<f64>::zeros(n, n);
    for row in &b.entries {
        for i in 0..n {
            if row[i] == 0 {
                continue;
            }
            for j in 0..n {
                if row[j] == 1 {
                    g[(i, j)] += 1.0;
                }
            }
        }
    }
    SymMatrix::symmetrized(g)
}

fn check_projection(g: &SymMatrix, labels: &[String]) -> Result<()> {
    if labels.len() != g.n() {
        return Err(Error::DimensionError {
            expected: g.n(),
            found: labels.len(),
        });
    }
    match (0..g.n()).find(|&i| g.get(i, i) <= 0.0) {
        Some(index) => Err(Error::DegenerateGroup { index }),
        None => Ok(()),
    }
}

/// Jaccard index `g_ij / (g_ii + g_jj - g_ij)` of a one-mode projection.
pub fn jaccard_from_projection(g: &SymMatrix, labels: Vec<String>) -> Result<SimilarityLayer> {
    check_projection(g, &labels)?;
    let s = SymMatrix::from_fn(g.n(), |i, j| {
        if i == j {
            1.0
        } else {
            let gij = g.get(i, j);
            gij / (g.get(i, i) + g.get(j, j) - gij)
        }
    })?;
    SimilarityLayer::new(labels, s, SimilarityKind::Jaccard)
}

/// Cosine similarity `g_ij / sqrt(g_ii g_jj)` of a one-mode projection.
pub fn cosine_from_projection(g: &SymMatrix, labels: Vec<String>) -> Result<SimilarityLayer> {
    check_projection(g, &labels)?;
    let s = SymMatrix::from_fn(g.n(), |i, j| {
        if i == j {
            1.0
        } else {
            (g.get(i, j) / (g.get(i, i) * g.get(j, j)).sqrt()).min(1.0)
        }
    })?;
    SimilarityLayer::new(labels, s, SimilarityKind::Cosine)
}

/// Named similarity layers over one shared node set.
#[derive(Debug, Clone)]
pub struct Multiplex {
    names: Vec<String>,
    layers: Vec<SimilarityLayer>,
}

impl Multiplex {
    pub fn new(names: Vec<String>, layers: Vec<SimilarityLayer>) -> Result<Self> {
        if names.len() != layers.len() {
            return Err(Error::DimensionError {
                expected: layers.len(),
                found: names.len(),
            });
        }
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidInput("multiplex has no layers".into()))?;
        for layer in &layers[1..] {
            if layer.labels() != first.labels() {
                return Err(Error::InvalidInput(
                    "all layers must share the same node labels".into(),
                ));
            }
        }
        Ok(Multiplex { names, layers })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[String] {
        self.layers[0].labels()
    }

    pub fn layers(&self) -> &[SimilarityLayer] {
        &self.layers
    }

    pub fn matrices(&self) -> Vec<SymMatrix> {
        self.layers.iter().map(|l| l.matrix().clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn n(&self) -> usize {
        self.layers[0].n()
    }
}
