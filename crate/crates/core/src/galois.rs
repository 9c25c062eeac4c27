//! Arithmetic and dense linear algebra over prime fields F_q.
//!
//! Residues are stored as `u16` so every prime up to 257 fits. Vectors and
//! matrices carry their modulus and every binary operation checks that the
//! moduli agree.

use rand::Rng;

use crate::error::{Error, Result};

/// A residue in `[0, q)`.
pub type Residue = u16;

/// Largest supported modulus.
pub const MAX_MODULUS: u16 = 257;

/// The prime field F_q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u16,
}

/// Field operations addressable by name (used by the `field_op` entry point).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Mul,
    Neg,
    Inv,
}

fn is_prime(q: u16) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u16;
    while (d as u32) * (d as u32) <= q as u32 {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(q: u16) -> Result<Self> {
        if q > MAX_MODULUS || !is_prime(q) {
            return Err(Error::Construction(format!(
                "modulus {q} is not a prime <= {MAX_MODULUS}"
            )));
        }
        Ok(Self { q })
    }

    #[inline]
    pub fn q(self) -> u16 {
        self.q
    }

    /// log2(q), the number of bits carried by one field symbol.
    pub fn bits(self) -> f64 {
        (self.q as f64).log2()
    }

    #[inline]
    pub fn add(self, a: Residue, b: Residue) -> Residue {
        ((a as u32 + b as u32) % self.q as u32) as Residue
    }

    #[inline]
    pub fn sub(self, a: Residue, b: Residue) -> Residue {
        ((a as u32 + self.q as u32 - b as u32) % self.q as u32) as Residue
    }

    #[inline]
    pub fn mul(self, a: Residue, b: Residue) -> Residue {
        ((a as u32 * b as u32) % self.q as u32) as Residue
    }

    #[inline]
    pub fn neg(self, a: Residue) -> Residue {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self, a: Residue) -> Result<Residue> {
        if a % self.q == 0 {
            return Err(Error::Domain(format!("zero has no inverse in F_{}", self.q)));
        }
        Ok(self.pow(a, self.q as u32 - 2))
    }

    pub fn pow(self, a: Residue, mut e: u32) -> Residue {
        let mut base = a % self.q;
        let mut acc: Residue = 1 % self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Applies `op` to residues after range-checking them.
    pub fn apply(self, op: FieldOp, a: Residue, b: Option<Residue>) -> Result<Residue> {
        self.check(a)?;
        if let Some(b) = b {
            self.check(b)?;
        }
        let need_b = || b.ok_or_else(|| Error::Argument("binary operation needs two operands".into()));
        match op {
            FieldOp::Add => Ok(self.add(a, need_b()?)),
            FieldOp::Mul => Ok(self.mul(a, need_b()?)),
            FieldOp::Neg => Ok(self.neg(a)),
            FieldOp::Inv => self.inv(a),
        }
    }

    fn check(self, a: Residue) -> Result<()> {
        if a >= self.q {
            Err(Error::Domain(format!("{a} is not a residue mod {}", self.q)))
        } else {
            Ok(())
        }
    }
}

/// One-shot field operation: builds F_q, checks operands, evaluates.
pub fn field_op(q: u16, op: FieldOp, a: Residue, b: Option<Residue>) -> Result<Residue> {
    PrimeField::new(q)?.apply(op, a, b)
}

/// A vector over F_q.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldVector {
    field: PrimeField,
    entries: Vec<Residue>,
}

impl FieldVector {
    pub fn new(field: PrimeField, entries: Vec<Residue>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|&&e| e >= field.q) {
            return Err(Error::Domain(format!("{bad} is not a residue mod {}", field.q)));
        }
        Ok(Self { field, entries })
    }

    pub fn zeros(field: PrimeField, n: usize) -> Self {
        Self {
            field,
            entries: vec![0; n],
        }
    }

    pub(crate) fn from_raw(field: PrimeField, entries: Vec<Residue>) -> Self {
        debug_assert!(entries.iter().all(|&e| e < field.q));
        Self { field, entries }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Residue] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.field != other.field {
            return Err(Error::Dimension(format!(
                "moduli differ: {} vs {}",
                self.field.q, other.field.q
            )));
        }
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "vector lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let f = self.field;
        Ok(Self::from_raw(
            f,
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f.add(a, b))
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let f = self.field;
        Ok(Self::from_raw(
            f,
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f.sub(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, c: Residue) -> Self {
        let f = self.field;
        Self::from_raw(f, self.entries.iter().map(|&a| f.mul(a, c)).collect())
    }

    /// In-place `self += c * other`, unchecked lengths (internal hot path).
    #[inline]
    pub(crate) fn axpy_raw(dst: &mut [Residue], c: Residue, src: &[Residue], f: PrimeField) {
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = f.add(*d, f.mul(c, s));
        }
    }

    /// Uniform vector with independent entries.
    pub fn sample_uniform<R: Rng + ?Sized>(field: PrimeField, n: usize, rng: &mut R) -> Self {
        Self::from_raw(field, (0..n).map(|_| rng.gen_range(0..field.q)).collect())
    }
}

/// Dense row-major matrix over F_q.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<Residue>,
}

impl FieldMatrix {
    pub fn new(field: PrimeField, rows: usize, cols: usize, data: Vec<Residue>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries given for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&e| e >= field.q) {
            return Err(Error::Domain(format!("{bad} is not a residue mod {}", field.q)));
        }
        Ok(Self {
            field,
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows(field: PrimeField, rows: &[Vec<Residue>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(field, rows.len(), cols, rows.concat())
    }

    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Residue {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Residue] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[Residue] {
        &self.data
    }

    /// `self * v` (syndrome form: r x n times n-vector).
    pub fn mul_vec(&self, v: &FieldVector) -> Result<FieldVector> {
        if self.field != v.field {
            return Err(Error::Dimension("moduli differ".into()));
        }
        if self.cols != v.len() {
            return Err(Error::Dimension(format!(
                "matrix has {} columns, vector has length {}",
                self.cols,
                v.len()
            )));
        }
        let f = self.field;
        let out = (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v.entries())
                    .fold(0, |acc, (&a, &b)| f.add(acc, f.mul(a, b)))
            })
            .collect();
        Ok(FieldVector::from_raw(f, out))
    }

    /// Row-vector product `u * self` (generator form: k-vector times k x n).
    pub fn vec_mul(&self, u: &FieldVector) -> Result<FieldVector> {
        if self.field != u.field {
            return Err(Error::Dimension("moduli differ".into()));
        }
        if self.rows != u.len() {
            return Err(Error::Dimension(format!(
                "matrix has {} rows, vector has length {}",
                self.rows,
                u.len()
            )));
        }
        let mut out = vec![0; self.cols];
        for (r, &c) in u.entries().iter().enumerate() {
            if c != 0 {
                FieldVector::axpy_raw(&mut out, c, self.row(r), self.field);
            }
        }
        Ok(FieldVector::from_raw(self.field, out))
    }

    /// Stacks `self` on top of `other`.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        if self.field != other.field || self.cols != other.cols {
            return Err(Error::Dimension("cannot stack matrices of different shape".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            field: self.field,
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn rank(&self) -> usize {
        self.row_reduce().pivots.len()
    }

    /// Reduced row echelon form together with pivot columns.
    fn row_reduce(&self) -> Echelon {
        let f = self.field;
        let mut m = self.data.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| m[i * cols + c] != 0) else {
                continue;
            };
            if p != r {
                for j in 0..cols {
                    m.swap(p * cols + j, r * cols + j);
                }
            }
            let inv = f.inv(m[r * cols + c]).expect("pivot is nonzero");
            for j in 0..cols {
                m[r * cols + j] = f.mul(m[r * cols + j], inv);
            }
            for i in 0..rows {
                let factor = m[i * cols + c];
                if i != r && factor != 0 {
                    let neg = f.neg(factor);
                    for j in 0..cols {
                        let v = m[r * cols + j];
                        m[i * cols + j] = f.add(m[i * cols + j], f.mul(neg, v));
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        Echelon { data: m, pivots }
    }

    /// Solves `self * z = m`, returning one solution and a basis of the null
    /// space, or `None` when `m` is outside the column space.
    pub fn solve_affine(&self, m: &FieldVector) -> Result<Option<AffineSolution>> {
        if m.len() != self.rows || m.field() != self.field {
            return Err(Error::Dimension(format!(
                "right-hand side has length {}, matrix has {} rows",
                m.len(),
                self.rows
            )));
        }
        let f = self.field;
        // Augment with the right-hand side as an extra column.
        let cols = self.cols + 1;
        let mut aug = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            aug.extend_from_slice(self.row(r));
            aug.push(m.entries()[r]);
        }
        let ech = FieldMatrix {
            field: f,
            rows: self.rows,
            cols,
            data: aug,
        }
        .row_reduce();
        if ech.pivots.last() == Some(&self.cols) {
            return Ok(None);
        }
        let mut particular = vec![0; self.cols];
        for (i, &c) in ech.pivots.iter().enumerate() {
            particular[c] = ech.data[i * cols + self.cols];
        }
        let free: Vec<usize> = (0..self.cols).filter(|c| !ech.pivots.contains(c)).collect();
        let null_basis = free
            .iter()
            .map(|&fc| {
                let mut v = vec![0; self.cols];
                v[fc] = 1;
                for (i, &pc) in ech.pivots.iter().enumerate() {
                    v[pc] = f.neg(ech.data[i * cols + fc]);
                }
                FieldVector::from_raw(f, v)
            })
            .collect();
        Ok(Some(AffineSolution {
            particular: FieldVector::from_raw(f, particular),
            null_basis,
        }))
    }

    /// Uniform matrix with independent entries.
    pub fn sample_uniform<R: Rng + ?Sized>(
        field: PrimeField,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            field,
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.gen_range(0..field.q)).collect(),
        }
    }
}

struct Echelon {
    data: Vec<Residue>,
    pivots: Vec<usize>,
}

/// Solution set `particular + span(null_basis)` of a linear system.
#[derive(Debug, Clone)]
pub struct AffineSolution {
    pub particular: FieldVector,
    pub null_basis: Vec<FieldVector>,
}

/// Walks the affine set `{ base + sum_i a_i * rows_i : a in F_q^k }` in
/// lexicographic order of `a` (first coordinate most significant).
///
/// Each step adds one generator row to the running vector, so a full walk
/// costs `q^k * n` field operations.
pub struct CosetWalker<'a> {
    field: PrimeField,
    rows: Vec<&'a [Residue]>,
    digits: Vec<Residue>,
    current: Vec<Residue>,
    started: bool,
    done: bool,
}

impl<'a> CosetWalker<'a> {
    pub fn new(field: PrimeField, rows: Vec<&'a [Residue]>, base: Vec<Residue>) -> Self {
        let k = rows.len();
        Self {
            field,
            rows,
            digits: vec![0; k],
            current: base,
            started: false,
            done: false,
        }
    }

    /// Advances to the next element; returns `(coefficients, vector)`.
    pub fn next_item(&mut self) -> Option<(&[Residue], &[Residue])> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some((&self.digits, &self.current));
        }
        let q = self.field.q;
        let mut j = self.rows.len();
        loop {
            if j == 0 {
                self.done = true;
                return None;
            }
            j -= 1;
            FieldVector::axpy_raw(&mut self.current, 1, self.rows[j], self.field);
            self.digits[j] += 1;
            if self.digits[j] < q {
                break;
            }
            self.digits[j] = 0;
        }
        Some((&self.digits, &self.current))
    }
}

/// Iterates all vectors of F_q^k in lexicographic order.
pub fn all_vectors(field: PrimeField, k: usize) -> impl Iterator<Item = Vec<Residue>> {
    let q = field.q;
    let total = (q as u64).checked_pow(k as u32).unwrap_or(u64::MAX);
    (0..total).map(move |mut idx| {
        let mut v = vec![0; k];
        for slot in v.iter_mut().rev() {
            *slot = (idx % q as u64) as Residue;
            idx /= q as u64;
        }
        v
    })
}

/// Index of `v` in the lexicographic order used by [`all_vectors`].
pub fn vector_index(field: PrimeField, v: &[Residue]) -> usize {
    v.iter().fold(0usize, |acc, &d| acc * field.q as usize + d as usize)
}
