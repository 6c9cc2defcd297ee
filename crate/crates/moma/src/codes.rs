//! Code construction: the unitary code matrix, its disjoint class partition,
//! the overloading matrices and the per-user effective signatures.
//!
//! Each user spreads with one column of U_c * W_c, where U_c holds the class's
//! disjoint subset of the unitary matrix columns and W_c packs unit-norm
//! overloading sequences. MD and LD signatures are exactly orthogonal because
//! they live in orthogonal column spaces of the same unitary matrix.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("Hadamard order {0} is not a power of two")]
    InvalidOrder(usize),
    #[error("partition size {n_md} must satisfy 1 <= N_MD < N = {n}")]
    PartitionOutOfRange { n_md: usize, n: usize },
    #[error("identity overloading needs K <= N, got K = {k}, N = {n}")]
    IdentityOverloaded { k: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Hadamard,
    Dft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserClass {
    Md,
    Ld,
}

impl std::fmt::Display for UserClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UserClass::Md => write!(f, "md"),
            UserClass::Ld => write!(f, "ld"),
        }
    }
}

/// N x N unitary code matrix with unit-norm columns.
#[derive(Debug, Clone)]
pub struct CodeMatrix {
    pub kind: CodeKind,
    pub order: usize,
    /// Column-major.
    cols: Vec<Vec<Complex64>>,
}

impl CodeMatrix {
    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.cols[j]
    }
}

/// Builds the unitary code matrix. Hadamard requires a power-of-two order.
pub fn build_code_matrix(kind: CodeKind, n: usize) -> Result<CodeMatrix, CodeError> {
    if n < 2 {
        return Err(CodeError::InvalidOrder(n));
    }
    let cols = match kind {
        CodeKind::Dft => {
            let scale = 1.0 / (n as f64).sqrt();
            (0..n)
                .map(|c| {
                    (0..n)
                        .map(|r| {
                            let phase = -2.0 * PI * (r * c) as f64 / n as f64;
                            Complex64::from_polar(scale, phase)
                        })
                        .collect()
                })
                .collect()
        }
        CodeKind::Hadamard => {
            if !n.is_power_of_two() {
                return Err(CodeError::InvalidOrder(n));
            }
            // Sylvester construction, then 1/sqrt(N) scaling.
            let mut h = vec![vec![1.0f64]];
            while h.len() < n {
                let m = h.len();
                let mut next = vec![vec![0.0; 2 * m]; 2 * m];
                for (i, row) in h.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        next[i][j] = v;
                        next[i][j + m] = v;
                        next[i + m][j] = v;
                        next[i + m][j + m] = -v;
                    }
                }
                h = next;
            }
            let scale = 1.0 / (n as f64).sqrt();
            (0..n)
                .map(|c| (0..n).map(|r| Complex64::new(h[r][c] * scale, 0.0)).collect())
                .collect()
        }
    };
    Ok(CodeMatrix { kind, order: n, cols })
}

/// The disjoint split of U's columns between the two classes.
#[derive(Debug, Clone)]
pub struct ClassPartition {
    pub u_md: Vec<Vec<Complex64>>,
    pub u_ld: Vec<Vec<Complex64>>,
    pub md_column_indices: Vec<usize>,
    pub ld_column_indices: Vec<usize>,
    pub order: usize,
}

/// First N_MD columns go to MD, the rest to LD. Any unitary column subset is
/// equivalent in exact arithmetic; the convention is fixed for determinism.
pub fn partition(u: &CodeMatrix, n_md: usize) -> Result<ClassPartition, CodeError> {
    if n_md == 0 || n_md >= u.order {
        return Err(CodeError::PartitionOutOfRange { n_md, n: u.order });
    }
    Ok(ClassPartition {
        u_md: u.cols[..n_md].to_vec(),
        u_ld: u.cols[n_md..].to_vec(),
        md_column_indices: (0..n_md).collect(),
        ld_column_indices: (n_md..u.order).collect(),
        order: u.order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generation {
    /// Columns drawn uniformly on the complex unit sphere (normalized
    /// circularly-symmetric Gaussian vectors) from a seeded generator.
    RandomSphere,
    /// First K standard basis vectors; only legal when K <= N_c.
    Identity,
}

/// N_c x K_c overloading matrix; every column has unit Euclidean norm.
#[derive(Debug, Clone)]
pub struct OverloadingMatrix {
    pub class: UserClass,
    pub n_c: usize,
    pub generation: Generation,
    pub seed: u64,
    cols: Vec<Vec<Complex64>>,
}

impl OverloadingMatrix {
    pub fn num_users(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.cols[j]
    }
}

pub fn build_overloading(
    class: UserClass,
    n_c: usize,
    k_c: usize,
    generation: Generation,
    seed_val: u64,
) -> Result<OverloadingMatrix, CodeError> {
    if k_c == 0 || n_c == 0 {
        return Err(CodeError::ShapeMismatch("K_c and N_c must be positive".into()));
    }
    let cols = match generation {
        Generation::Identity => {
            if k_c > n_c {
                return Err(CodeError::IdentityOverloaded { k: k_c, n: n_c });
            }
            (0..k_c)
                .map(|j| {
                    let mut e = vec![Complex64::ZERO; n_c];
                    e[j] = Complex64::ONE;
                    e
                })
                .collect()
        }
        Generation::RandomSphere => {
            let class_tag = match class {
                UserClass::Md => 0,
                UserClass::Ld => 1,
            };
            let mut rng = seed::rng(seed_val, &[seed::domain::OVERLOADING, class_tag]);
            (0..k_c)
                .map(|_| {
                    let mut v: Vec<Complex64> = (0..n_c)
                        .map(|_| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            Complex64::new(re, im)
                        })
                        .collect();
                    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    for z in &mut v {
                        *z /= norm;
                    }
                    v
                })
                .collect()
        }
    };
    Ok(OverloadingMatrix {
        class,
        n_c,
        generation,
        seed: seed_val,
        cols,
    })
}

/// One user's effective spreading code: an N-chip unit-norm vector U_c * w.
#[derive(Debug, Clone)]
pub struct Signature {
    pub user: usize,
    pub class: UserClass,
    pub chips: Vec<Complex64>,
}

/// All per-user signatures; MD users first, then LD, ids 0..K_MD+K_LD.
#[derive(Debug, Clone)]
pub struct SignatureSet {
    pub signatures: Vec<Signature>,
}

impl SignatureSet {
    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn class_count(&self, class: UserClass) -> usize {
        self.signatures.iter().filter(|s| s.class == class).count()
    }
}

fn basis_combination(basis: &[Vec<Complex64>], w: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut chips = vec![Complex64::ZERO; n];
    for (col, &coef) in basis.iter().zip(w) {
        for (c, &u) in chips.iter_mut().zip(col) {
            *c += coef * u;
        }
    }
    chips
}

pub fn signatures(
    part: &ClassPartition,
    w_md: &OverloadingMatrix,
    w_ld: &OverloadingMatrix,
) -> Result<SignatureSet, CodeError> {
    if w_md.n_c != part.u_md.len() {
        return Err(CodeError::ShapeMismatch(format!(
            "W_MD has {} rows but U_MD has {} columns",
            w_md.n_c,
            part.u_md.len()
        )));
    }
    if w_ld.n_c != part.u_ld.len() {
        return Err(CodeError::ShapeMismatch(format!(
            "W_LD has {} rows but U_LD has {} columns",
            w_ld.n_c,
            part.u_ld.len()
        )));
    }
    let mut sigs = Vec::with_capacity(w_md.num_users() + w_ld.num_users());
    for j in 0..w_md.num_users() {
        sigs.push(Signature {
            user: sigs.len(),
            class: UserClass::Md,
            chips: basis_combination(&part.u_md, w_md.column(j), part.order),
        });
    }
    for j in 0..w_ld.num_users() {
        sigs.push(Signature {
            user: sigs.len(),
            class: UserClass::Ld,
            chips: basis_combination(&part.u_ld, w_ld.column(j), part.order),
        });
    }
    Ok(SignatureSet { signatures: sigs })
}

/// G[i][j] = s_i^H s_j. Hermitian with unit diagonal.
pub fn gram(set: &SignatureSet) -> Vec<Vec<Complex64>> {
    let k = set.len();
    let mut g = vec![vec![Complex64::ZERO; k]; k];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = set.signatures[i]
                .chips
                .iter()
                .zip(&set.signatures[j].chips)
                .map(|(a, b)| a.conj() * b)
                .sum();
        }
    }
    g
}
