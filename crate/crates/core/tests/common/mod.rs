#![allow(dead_code)]

use multifuse_core::{SimilarityKind, SimilarityLayer, SymMatrix};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn dm(s: &SymMatrix) -> DMatrix<f64> {
    s.as_matrix().clone()
}

pub fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new(m).unwrap()
}

/// `f` applied to the eigenvalues of a symmetric matrix, straight from nalgebra.
pub fn spectral(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

pub fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral(m, |x| x.max(0.0).sqrt())
}

pub fn inv_sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral(m, |x| 1.0 / x.sqrt())
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    g.qr().q()
}

/// Random SPD matrix with eigenvalues log-uniform in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let u = random_orthogonal(rng, n);
    let d = DVector::from_fn(n, |_, _| (rng.gen_range(lo.ln()..=hi.ln())).exp());
    sym(&u * DMatrix::from_diagonal(&d) * u.transpose())
}

/// Random RBF similarity layer from `n` points in `dim` dimensions.
pub fn random_rbf(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> SymMatrix {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let d2 = |i: usize, j: usize| -> f64 {
        pts[i]
            .iter()
            .zip(&pts[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += d2(i, j);
            }
        }
    }
    let sigma = total / (n * (n - 1)) as f64;
    SymMatrix::from_fn(n, |i, j| (-d2(i, j) / sigma).exp()).unwrap()
}

/// Random nonnegative PSD similarity layer: a Gram matrix of nonnegative unit vectors.
pub fn random_nonneg_psd(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> SymMatrix {
    let x = DMatrix::<f64>::from_fn(n, dim, |_, _| rng.gen_range(0.0..1.0));
    let mut g: DMatrix<f64> = &x * x.transpose();
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] /= d[i] * d[j];
        }
        g[(i, i)] = 1.0;
    }
    sym(g)
}

pub fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// Geometric mean of two SPD matrices.
pub fn geometric_mean(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let ah = sqrtm(a);
    let aih = inv_sqrtm(a);
    &ah * sqrtm(&(&aih * b * &aih)) * &ah
}

/// Two-point Bures-Wasserstein barycenter in closed form.
pub fn wasserstein_pair(a: &DMatrix<f64>, b: &DMatrix<f64>, w1: f64, w2: f64) -> DMatrix<f64> {
    let ah = sqrtm(a);
    let aih = inv_sqrtm(a);
    // (AB)^{1/2} = A^{1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2}
    let ab = &ah * sqrtm(&(&ah * b * &ah)) * &aih;
    let cross = &ab + ab.transpose();
    a * (w1 * w1) + b * (w2 * w2) + cross * (w1 * w2)
}

/// Plain fixed-point Wasserstein iteration run for a fixed number of steps.
pub fn wasserstein_reference(layers: &[DMatrix<f64>], w: &[f64], steps: usize) -> DMatrix<f64> {
    let n = layers[0].nrows();
    let mut x = DMatrix::zeros(n, n);
    for (s, wl) in layers.iter().zip(w) {
        x += s * *wl;
    }
    for _ in 0..steps {
        let xh = sqrtm(&x);
        let xih = inv_sqrtm(&x);
        let mut t = DMatrix::zeros(n, n);
        for (s, wl) in layers.iter().zip(w) {
            t += sqrtm(&(&xh * s * &xh)) * *wl;
        }
        x = &xih * &t * &t * &xih;
        x = (&x + x.transpose()) * 0.5;
    }
    x
}

/// Modularity with self-loops dropped, computed from scratch.
pub fn brute_modularity(w: &[Vec<f64>], community: &[usize], resolution: f64) -> f64 {
    let n = w.len();
    let a = |i: usize, j: usize| if i == j { 0.0 } else { w[i][j] };
    let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a(i, j)).sum()).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if community[i] == community[j] {
                q += a(i, j) - resolution * k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &p in &idx[i..=j] {
            r[p] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da * db).sqrt()
}

pub fn off_diagonal(s: &SymMatrix) -> Vec<f64> {
    let n = s.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(s.get(i, j));
        }
    }
    out
}

/// One literal cross-diffusion update with explicit loops.
pub fn literal_cdp_step(p: &[Vec<Vec<f64>>], q: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
    let m = p.len();
    let n = p[0].len();
    let mut out = Vec::with_capacity(m);
    for l in 0..m {
        let mut avg = vec![vec![0.0; n]; n];
        for h in (0..m).filter(|&h| h != l) {
            for i in 0..n {
                for j in 0..n {
                    avg[i][j] += p[h][i][j] / (m - 1) as f64;
                }
            }
        }
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += q[l][i][a] * avg[a][b] * q[l][j][b];
                    }
                }
                next[i][j] = acc;
            }
        }
        out.push(next);
    }
    out
}

pub type Stack = Vec<Vec<Vec<f64>>>;

/// Literal status and kernel matrices for a list of layers.
pub fn literal_initial(layers: &[Vec<Vec<f64>>], k: usize) -> (Stack, Stack) {
    let n = layers[0].len();
    let mut p = Vec::new();
    let mut q = Vec::new();
    for s in layers {
        let total: f64 = s.iter().flatten().sum();
        p.push(
            s.iter()
                .map(|r| r.iter().map(|v| v / total).collect())
                .collect(),
        );
        let mut ql = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            cand.sort_by(|&a, &b| s[i][b].partial_cmp(&s[i][a]).unwrap().then(a.cmp(&b)));
            let nb = &cand[..k];
            let denom: f64 = nb.iter().map(|&j| s[i][j]).sum();
            for &j in nb {
                ql[i][j] = s[i][j] / denom;
            }
        }
        q.push(ql);
    }
    (p, q)
}

pub fn frob_vec(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Literal SNF: iterate to `epsilon` or `max_iter`, average, re-weight by the largest off-diagonal entry.
pub fn literal_snf(
    layers: &[Vec<Vec<f64>>],
    k: usize,
    epsilon: f64,
    max_iter: usize,
) -> (Vec<Vec<f64>>, bool) {
    let (mut p, q) = literal_initial(layers, k);
    let mut converged = false;
    for _ in 0..max_iter {
        let next = literal_cdp_step(&p, &q);
        let r = p
            .iter()
            .zip(&next)
            .map(|(a, b)| frob_vec(a, b))
            .fold(0.0, f64::max);
        if r < epsilon {
            converged = true;
            break;
        }
        p = next;
    }
    let n = p[0].len();
    let m = p.len() as f64;
    let mut avg = vec![vec![0.0; n]; n];
    for pl in &p {
        for i in 0..n {
            for j in 0..n {
                avg[i][j] += pl[i][j] / m;
            }
        }
    }
    let mut top = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                top = top.max(avg[i][j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            avg[i][j] = if i == j { 1.0 } else { avg[i][j] / top };
        }
    }
    (avg, converged)
}

pub fn rows<const N: usize>(m: &[[f64; N]; N]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

pub const SNF_S1: [[f64; 3]; 3] = [[1.0, 0.8, 0.2], [0.8, 1.0, 0.3], [0.2, 0.3, 1.0]];
pub const SNF_S2: [[f64; 3]; 3] = [[1.0, 0.7, 0.4], [0.7, 1.0, 0.1], [0.4, 0.1, 1.0]];
/// Monoplex of the two layers above (k = 1, 100 steps), frozen from an independent numpy run.
pub const SNF_FIXTURE_FROZEN: [[f64; 3]; 3] = [
    [1.0, 0.8306451612903226, 0.9395161290322581],
    [0.8306451612903226, 1.0, 1.0],
    [0.9395161290322581, 1.0, 1.0],
];

pub const DCOR_A: [[f64; 4]; 4] = [
    [1.0, 0.9, 0.2, 0.1],
    [0.9, 1.0, 0.3, 0.2],
    [0.2, 0.3, 1.0, 0.8],
    [0.1, 0.2, 0.8, 1.0],
];
pub const DCOR_B: [[f64; 4]; 4] = [
    [1.0, 0.5, 0.4, 0.3],
    [0.5, 1.0, 0.6, 0.1],
    [0.4, 0.6, 1.0, 0.7],
    [0.3, 0.1, 0.7, 1.0],
];
/// dCor of the pair above, frozen from an independent numpy implementation.
pub const DCOR_FROZEN: f64 = 0.9283706004040658;

/// Textbook V-statistic: distance matrices, double centering, then the three averages.
pub fn dcor_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let dist = |x: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        x[i].iter()
                            .zip(&x[j])
                            .map(|(p, q)| (p - q) * (p - q))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect()
    };
    let v2 = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> f64 {
        let nn = (n * n) as f64;
        let s1: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| x[i][j] * y[i][j])
            .sum::<f64>()
            / nn;
        let mx: f64 = x.iter().flatten().sum::<f64>() / nn;
        let my: f64 = y.iter().flatten().sum::<f64>() / nn;
        let s3: f64 = (0..n)
            .map(|i| x[i].iter().sum::<f64>() / n as f64 * y[i].iter().sum::<f64>() / n as f64)
            .sum::<f64>()
            / n as f64;
        s1 + mx * my - 2.0 * s3
    };
    let (da, db) = (dist(a), dist(b));
    let ab = v2(&da, &db);
    let aa = v2(&da, &da);
    let bb = v2(&db, &db);
    ab.max(0.0).sqrt() / (aa * bb).sqrt().sqrt()
}

pub fn planted_two_block() -> SimilarityLayer {
    let m = SymMatrix::from_fn(10, |i, j| {
        if i == j {
            1.0
        } else if (i < 5) == (j < 5) {
            0.9
        } else {
            0.1
        }
    })
    .unwrap();
    SimilarityLayer::unlabeled(m, SimilarityKind::External).unwrap()
}

pub fn snf_fixture_layers() -> Vec<SymMatrix> {
    vec![
        SymMatrix::from_rows(&rows(&SNF_S1)).unwrap(),
        SymMatrix::from_rows(&rows(&SNF_S2)).unwrap(),
    ]
}

pub fn layer<const N: usize>(m: &[[f64; N]; N]) -> SimilarityLayer {
    SimilarityLayer::unlabeled(
        SymMatrix::from_rows(&rows(m)).unwrap(),
        SimilarityKind::External,
    )
    .unwrap()
}
