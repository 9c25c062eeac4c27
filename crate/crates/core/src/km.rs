//! Körner–Marton syndrome code: `m = h s`, and maximum-likelihood recovery of
//! the sum from the sum of syndromes.

use rand::Rng;

use crate::error::{check_budget, Error, Result};
use crate::galois::{CosetWalker, FieldMatrix, FieldVector, PrimeField, Residue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KmCode {
    h: FieldMatrix,
}

impl KmCode {
    pub fn new(h: FieldMatrix) -> Result<Self> {
        if h.rows() > h.cols() {
            return Err(Error::Argument(format!(
                "parity-check matrix has {} rows for blocklength {}",
                h.rows(),
                h.cols()
            )));
        }
        Ok(Self { h })
    }

    pub fn field(&self) -> PrimeField {
        self.h.field()
    }

    pub fn n(&self) -> usize {
        self.h.cols()
    }

    pub fn l(&self) -> usize {
        self.h.rows()
    }

    pub fn h(&self) -> &FieldMatrix {
        &self.h
    }
}

/// Draws `h` uniformly from F_q^{l x n}.
pub fn km_build<R: Rng + ?Sized>(field: PrimeField, n: usize, l: usize, rng: &mut R) -> Result<KmCode> {
    if l > n {
        return Err(Error::Argument(format!("l = {l} exceeds n = {n}")));
    }
    KmCode::new(FieldMatrix::sample_uniform(field, l, n, rng))
}

/// Syndrome `h s`.
pub fn km_encode(code: &KmCode, s: &FieldVector) -> Result<FieldVector> {
    code.h.mul_vec(s)
}

/// Returns the most likely `z` with `h z = m` under the iid law `pz`; ties go
/// to the lexicographically smallest `z`.
///
/// The likelihood is computed from the symbol counts, so sequences of equal
/// type score identically and ties are exact.
pub fn km_sum_decode(code: &KmCode, m: &FieldVector, pz: &[f64], budget_bits: u32) -> Result<FieldVector> {
    let f = code.field();
    let q = f.q() as usize;
    if pz.len() != q {
        return Err(Error::Dimension(format!("pmf of Z has {} entries, expected {q}", pz.len())));
    }
    let sol = code
        .h
        .solve_affine(m)?
        .ok_or_else(|| Error::DecodeFailure("syndrome is outside the image of h".into()))?;
    let dim = sol.null_basis.len();
    check_budget(dim as f64 * f.bits(), budget_bits)?;
    let logp: Vec<f64> = pz.iter().map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect();
    let rows: Vec<&[Residue]> = sol.null_basis.iter().map(|v| v.entries()).collect();
    let mut walker = CosetWalker::new(f, rows, sol.particular.entries().to_vec());
    let mut counts = vec![0u32; q];
    let mut best: Option<(f64, Vec<Residue>)> = None;
    while let Some((_, z)) = walker.next_item() {
        counts.iter_mut().for_each(|c| *c = 0);
        for &s in z {
            counts[s as usize] += 1;
        }
        let score: f64 = counts
            .iter()
            .zip(&logp)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &lp)| c as f64 * lp)
            .sum();
        let better = match &best {
            None => true,
            Some((b, bz)) => score > *b || (score == *b && z < bz.as_slice()),
        };
        if better {
            best = Some((score, z.to_vec()));
        }
    }
    let (_, z) = best.expect("the solution set is nonempty");
    FieldVector::new(f, z)
}
