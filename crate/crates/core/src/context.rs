use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rug::Complex;

use crate::characters::TildeCharacter;
use crate::numerics::{embed_phase, Scalar, DEFAULT_PRECISION};

/// Working precision plus the read-mostly memo caches shared by a computation.
///
/// A `Context` is `Sync`; scans share one across worker threads.
#[derive(Debug)]
pub struct Context {
    prec: u32,
    eps_perturbation: f64,
    roots: RwLock<HashMap<u64, Arc<Vec<Complex>>>>,
    eps_memo: RwLock<HashMap<TildeCharacter, Scalar>>,
}

impl Default for Context {
    fn default() -> Self {
        Context::new(DEFAULT_PRECISION)
    }
}

impl Context {
    pub fn new(prec: u32) -> Self {
        Context {
            prec,
            eps_perturbation: 0.0,
            roots: RwLock::new(HashMap::new()),
            eps_memo: RwLock::new(HashMap::new()),
        }
    }

    /// Scale every ramified GL(1) epsilon factor by `1 + delta`.
    ///
    /// Only useful for checking that the verification harness notices corrupted input.
    pub fn with_eps_perturbation(mut self, delta: f64) -> Self {
        self.eps_perturbation = delta;
        self
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn eps_perturbation(&self) -> f64 {
        self.eps_perturbation
    }

    pub fn zero(&self) -> Scalar {
        Scalar::zero(self.prec)
    }

    pub fn one(&self) -> Scalar {
        Scalar::one(self.prec)
    }

    /// `e^{2 pi i j / n}` for `0 <= j < n`.
    pub fn root_table(&self, n: u64) -> Arc<Vec<Complex>> {
        if let Some(t) = self.roots.read().expect("root table poisoned").get(&n) {
            return t.clone();
        }
        let table: Vec<Complex> = (0..n).map(|j| embed_phase(j, n, self.prec)).collect();
        self.roots.write().expect("root table poisoned").entry(n).or_insert_with(|| Arc::new(table)).clone()
    }

    /// `sum_j counts[j] e^{2 pi i j / n}` with `n = counts.len()`.
    pub fn sum_roots(&self, counts: &[i64]) -> Scalar {
        let n = counts.len() as u64;
        let table = self.root_table(n);
        let mut acc = Complex::new(self.prec);
        for (c, z) in counts.iter().zip(table.iter()) {
            if *c != 0 {
                acc += Complex::with_val(self.prec, z * *c);
            }
        }
        Scalar::from_complex(acc)
    }

    pub(crate) fn cached_eps(&self, mu: &TildeCharacter) -> Option<Scalar> {
        self.eps_memo.read().expect("epsilon memo poisoned").get(mu).cloned()
    }

    pub(crate) fn store_eps(&self, mu: &TildeCharacter, eps: &Scalar) {
        self.eps_memo.write().expect("epsilon memo poisoned").insert(mu.clone(), eps.clone());
    }
}
