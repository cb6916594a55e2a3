#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subspace_ir::corpus::{Document, TermId};
use subspace_ir::linalg::{LowRankDensity, Projector, SparseVector};

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_dense(v: &SparseVector, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for &(t, w) in v.entries() {
        out[t as usize] = w;
    }
    out
}

pub fn zeros(dim: usize) -> Dense {
    vec![vec![0.0; dim]; dim]
}

pub fn add_outer(m: &mut Dense, a: &[f64], b: &[f64], c: f64) {
    for i in 0..a.len() {
        for j in 0..b.len() {
            m[i][j] += c * a[i] * b[j];
        }
    }
}

pub fn scatter(vectors: &[Vec<f64>]) -> Dense {
    let d = vectors.first().map_or(0, Vec::len);
    let mut m = zeros(d);
    for v in vectors {
        add_outer(&mut m, v, v, 1.0);
    }
    m
}

pub fn density_dense(rho: &LowRankDensity, dim: usize) -> Dense {
    let mut m = zeros(dim);
    for (l, v) in rho.pairs() {
        let v = to_dense(v, dim);
        add_outer(&mut m, &v, &v, l);
    }
    m
}

pub fn trace(m: &Dense) -> f64 {
    (0..m.len()).map(|i| m[i][i]).sum()
}

pub fn scale(m: &Dense, c: f64) -> Dense {
    m.iter().map(|r| r.iter().map(|x| x * c).collect()).collect()
}

pub fn frobenius_distance(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).powi(2)))
        .sum::<f64>()
        .sqrt()
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = random_vector(rng, dim);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Sparse non-negative unit vector over `dim` terms, like a fragment vector.
pub fn random_fragment(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.1..3.0) } else { 0.0 })
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

pub fn sparse(v: &[f64]) -> SparseVector {
    SparseVector::from_dense(v)
}

/// Largest deviation of `BᵀB` from the identity.
pub fn orthonormality_error(basis: &[SparseVector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.dot(b) - want).abs());
        }
    }
    worst
}

pub fn projector_error(p: &Projector) -> f64 {
    orthonormality_error(p.basis())
}

const WORDS: &[&str] = &[
    "apple", "river", "stone", "cloud", "tiger", "piano", "garden", "window", "rocket", "forest", "candle", "marble",
    "violin", "desert", "harbor", "lantern", "meadow", "pepper", "silver", "thunder",
];

/// Random documents over a small word list, with paragraphs and sentences.
pub fn random_documents(rng: &mut ChaCha8Rng, n_docs: usize, vocab: usize) -> Vec<Document> {
    let words = &WORDS[..vocab.min(WORDS.len())];
    (0..n_docs)
        .map(|d| {
            let paragraphs = (0..rng.gen_range(1..=3))
                .map(|_| {
                    (0..rng.gen_range(1..=3))
                        .map(|_| {
                            let n = rng.gen_range(1..=6);
                            let s: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
                            let mut s = s.join(" ");
                            s[..1].make_ascii_uppercase();
                            s + "."
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            Document::new(format!("d{d:03}"), paragraphs).unwrap()
        })
        .collect()
}

pub fn term_ids(v: &SparseVector) -> Vec<TermId> {
    v.support().collect()
}
