//! Nested coset codes: construction, typicality encoding into cosets and
//! joint-typicality decoding of the coset of the sum.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::error::{check_budget, Error, Result};
use crate::galois::{CosetWalker, FieldMatrix, FieldVector, PrimeField, Residue};
use crate::model::{Mac, SourcePair, TestChannel};
use crate::probability::{JointPmf, TypicalityTest};

/// Codewords `v(a, m) = a G_I + m G_OI + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedCosetCode {
    g_i: FieldMatrix,
    g_oi: FieldMatrix,
    b: FieldVector,
}

impl NestedCosetCode {
    pub fn new(g_i: FieldMatrix, g_oi: FieldMatrix, b: FieldVector) -> Result<Self> {
        let f = b.field();
        if g_i.field() != f || g_oi.field() != f {
            return Err(Error::Construction("generator and bias fields differ".into()));
        }
        if g_i.cols() != b.len() || g_oi.cols() != b.len() {
            return Err(Error::Dimension(format!(
                "generators have {} and {} columns, bias has length {}",
                g_i.cols(),
                g_oi.cols(),
                b.len()
            )));
        }
        if g_i.rows() + g_oi.rows() > b.len() {
            return Err(Error::Construction(format!(
                "k + l = {} exceeds n = {}",
                g_i.rows() + g_oi.rows(),
                b.len()
            )));
        }
        Ok(Self { g_i, g_oi, b })
    }

    pub fn field(&self) -> PrimeField {
        self.b.field()
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn k(&self) -> usize {
        self.g_i.rows()
    }

    pub fn l(&self) -> usize {
        self.g_oi.rows()
    }

    pub fn g_i(&self) -> &FieldMatrix {
        &self.g_i
    }

    pub fn g_oi(&self) -> &FieldMatrix {
        &self.g_oi
    }

    pub fn bias(&self) -> &FieldVector {
        &self.b
    }

    pub fn codeword(&self, a: &FieldVector, m: &FieldVector) -> Result<FieldVector> {
        self.g_i.vec_mul(a)?.add(&self.g_oi.vec_mul(m)?)?.add(&self.b)
    }

    /// `m G_OI + b`.
    fn coset_base(&self, m: &FieldVector) -> Result<Vec<Residue>> {
        Ok(self.g_oi.vec_mul(m)?.add(&self.b)?.entries().to_vec())
    }

    /// Walks the `q^k` codewords of coset `m` in lexicographic order of `a`.
    pub fn coset_walker(&self, m: &FieldVector) -> Result<CosetWalker<'_>> {
        if m.len() != self.l() {
            return Err(Error::Dimension(format!("message has length {}, expected {}", m.len(), self.l())));
        }
        let rows = (0..self.k()).map(|r| self.g_i.row(r)).collect();
        Ok(CosetWalker::new(self.field(), rows, self.coset_base(m)?))
    }

    /// Walks all `q^(k+l)` codewords; digits are `(a, m)`.
    pub fn full_walker(&self) -> CosetWalker<'_> {
        let rows = (0..self.k())
            .map(|r| self.g_i.row(r))
            .chain((0..self.l()).map(|r| self.g_oi.row(r)))
            .collect();
        CosetWalker::new(self.field(), rows, self.b.entries().to_vec())
    }

    pub fn enumerate_coset(&self, m: &FieldVector, budget_bits: u32) -> Result<Vec<FieldVector>> {
        check_budget(self.k() as f64 * self.field().bits(), budget_bits)?;
        let mut w = self.coset_walker(m)?;
        let mut out = Vec::new();
        while let Some((_, v)) = w.next_item() {
            out.push(FieldVector::new(self.field(), v.to_vec())?);
        }
        Ok(out)
    }
}

/// Shared generators with one bias per user; the decoder uses `b1 + b2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodePair {
    g_i: FieldMatrix,
    g_oi: FieldMatrix,
    b1: FieldVector,
    b2: FieldVector,
    decoder: NestedCosetCode,
}

impl CodePair {
    pub fn new(g_i: FieldMatrix, g_oi: FieldMatrix, b1: FieldVector, b2: FieldVector) -> Result<Self> {
        let b = b1.add(&b2)?;
        let decoder = NestedCosetCode::new(g_i.clone(), g_oi.clone(), b)?;
        Self::with_decoder(g_i, g_oi, b1, b2, decoder)
    }

    /// Builds a pair with an arbitrary decoder bias. Only useful for
    /// exercising checks against a miswired decoder.
    pub fn with_decoder_bias(
        g_i: FieldMatrix,
        g_oi: FieldMatrix,
        b1: FieldVector,
        b2: FieldVector,
        decoder_bias: FieldVector,
    ) -> Result<Self> {
        let decoder = NestedCosetCode::new(g_i.clone(), g_oi.clone(), decoder_bias)?;
        Self::with_decoder(g_i, g_oi, b1, b2, decoder)
    }

    fn with_decoder(
        g_i: FieldMatrix,
        g_oi: FieldMatrix,
        b1: FieldVector,
        b2: FieldVector,
        decoder: NestedCosetCode,
    ) -> Result<Self> {
        if b1.len() != b2.len() {
            return Err(Error::Dimension("biases have different lengths".into()));
        }
        Ok(Self {
            g_i,
            g_oi,
            b1,
            b2,
            decoder,
        })
    }

    pub fn field(&self) -> PrimeField {
        self.b1.field()
    }

    pub fn n(&self) -> usize {
        self.b1.len()
    }

    pub fn k(&self) -> usize {
        self.g_i.rows()
    }

    pub fn l(&self) -> usize {
        self.g_oi.rows()
    }

    pub fn g_i(&self) -> &FieldMatrix {
        &self.g_i
    }

    pub fn g_oi(&self) -> &FieldMatrix {
        &self.g_oi
    }

    pub fn bias(&self, user: usize) -> &FieldVector {
        if user == 1 {
            &self.b1
        } else {
            &self.b2
        }
    }

    /// Code used by encoder `user` (1 or 2).
    pub fn user_code(&self, user: usize) -> NestedCosetCode {
        NestedCosetCode {
            g_i: self.g_i.clone(),
            g_oi: self.g_oi.clone(),
            b: self.bias(user).clone(),
        }
    }

    pub fn decoder_code(&self) -> &NestedCosetCode {
        &self.decoder
    }
}

/// Samples `G_I`, `G_OI`, `B1`, `B2` independently and uniformly, in that order.
pub fn ncc_build<R: Rng + ?Sized>(field: PrimeField, n: usize, k: usize, l: usize, rng: &mut R) -> Result<CodePair> {
    if k + l > n {
        return Err(Error::Construction(format!("k + l = {} exceeds n = {n}", k + l)));
    }
    let g_i = FieldMatrix::sample_uniform(field, k, n, rng);
    let g_oi = FieldMatrix::sample_uniform(field, l, n, rng);
    let b1 = FieldVector::sample_uniform(field, n, rng);
    let b2 = FieldVector::sample_uniform(field, n, rng);
    CodePair::new(g_i, g_oi, b1, b2)
}

/// Whether `v1(a1, m1) + v2(a2, m2) = v(a1 + a2, m1 + m2)` for every tuple.
pub fn closure_identity_holds(pair: &CodePair, budget_bits: u32) -> Result<bool> {
    let f = pair.field();
    let (k, l) = (pair.k(), pair.l());
    check_budget(2.0 * (k + l) as f64 * f.bits(), budget_bits)?;
    let c1 = pair.user_code(1);
    let c2 = pair.user_code(2);
    let dec = pair.decoder_code();
    let split = |d: &[Residue]| -> Result<(FieldVector, FieldVector)> {
        Ok((FieldVector::new(f, d[..k].to_vec())?, FieldVector::new(f, d[k..].to_vec())?))
    };
    let mut w1 = c1.full_walker();
    while let Some((d1, v1)) = w1.next_item() {
        let (a1, m1) = split(d1)?;
        let v1 = v1.to_vec();
        let mut w2 = c2.full_walker();
        while let Some((d2, v2)) = w2.next_item() {
            let (a2, m2) = split(d2)?;
            let lhs: Vec<Residue> = v1.iter().zip(v2).map(|(&x, &y)| f.add(x, y)).collect();
            let rhs = dec.codeword(&a1.add(&a2)?, &m1.add(&m2)?)?;
            if lhs != rhs.entries() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Rate conditions tying (k, l) to a test channel, in base-q units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCheck {
    pub k_over_n: f64,
    pub l_over_n: f64,
    /// `k/n - (1 - min H(V_j) / log2 q)`; holds when >= 0.
    pub inner_slack: f64,
    pub inner_ok: bool,
    /// `(1 - H(V1 + V2) / log2 q) - (k + l)/n`; holds when >= 0.
    pub outer_slack: f64,
    pub outer_ok: bool,
    /// `(min H(V_j) - H(V1 + V2 | Y)) / log2 q - l/n`; holds when > 0.
    pub message_slack: Option<f64>,
    pub message_ok: Option<bool>,
}

pub fn ncc_validate_rates(
    n: usize,
    k: usize,
    l: usize,
    src: &SourcePair,
    tc: &TestChannel,
    mac: Option<&Mac>,
) -> Result<RateCheck> {
    if n == 0 {
        return Err(Error::Argument("blocklength must be positive".into()));
    }
    let f = src.field();
    let (c1, c2) = src.coeffs();
    let logq = f.bits();
    let joint = tc.p1().product(tc.p2())?;
    let zmap = |v: &[usize]| f.add(f.mul(c1, v[0] as Residue), f.mul(c2, v[1] as Residue)) as usize;
    let with_z = joint.pushforward(&["V1", "V2"], "Z", src.q(), zmap)?;
    let min_hv = with_z.entropy(&["V1"])?.min(with_z.entropy(&["V2"])?);
    let hz = with_z.entropy(&["Z"])?;
    let kn = k as f64 / n as f64;
    let ln = l as f64 / n as f64;
    let inner_slack = kn - (1.0 - min_hv / logq);
    let outer_slack = (1.0 - hz / logq) - (k + l) as f64 / n as f64;
    let message_slack = match mac {
        None => None,
        Some(m) => {
            tc.check_compatible(m)?;
            let j = joint
                .compose(m.transition())?
                .pushforward(&["V1", "V2"], "Z", src.q(), zmap)?;
            Some((min_hv - j.conditional_entropy(&["Z"], &["Y"])?) / logq - ln)
        }
    };
    Ok(RateCheck {
        k_over_n: kn,
        l_over_n: ln,
        inner_slack,
        inner_ok: inner_slack >= -1e-12,
        outer_slack,
        outer_ok: outer_slack >= -1e-12,
        message_slack,
        message_ok: message_slack.map(|s| s > 0.0),
    })
}

/// Per-user encoder settings.
#[derive(Debug, Clone)]
pub struct EncoderConfig {
    p_v: Vec<f64>,
    /// Cumulative rows of `p(x | v)`.
    x_cdf: Vec<Vec<f64>>,
    eta2: f64,
}

impl EncoderConfig {
    /// `x_given_v[v][x] = p(x | v)`.
    pub fn new(p_v: Vec<f64>, x_given_v: Vec<Vec<f64>>, eta2: f64) -> Result<Self> {
        if p_v.len() != x_given_v.len() {
            return Err(Error::Dimension("p_V and p(x|v) disagree on |V|".into()));
        }
        let x_cdf = x_given_v
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self { p_v, x_cdf, eta2 })
    }

    pub fn from_test_channel(tc: &TestChannel, user: usize, eta2: f64) -> Self {
        let cond = tc.x_given_v(user);
        let xs = cond.target_cells();
        let rows = (0..tc.field().q() as usize).map(|v| cond.row(v).to_vec()).collect::<Vec<_>>();
        debug_assert!(rows.iter().all(|r| r.len() == xs));
        Self::new(tc.pv(user), rows, eta2).expect("test channel shapes agree")
    }

    pub fn p_v(&self) -> &[f64] {
        &self.p_v
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    fn sample_x<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let cdf = &self.x_cdf[v];
        let u: f64 = rng.gen();
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeOutcome {
    Encoded {
        a: FieldVector,
        v: FieldVector,
        x: Vec<usize>,
    },
    /// No codeword of the coset is typical.
    Failure,
}

/// Picks a typical codeword of coset `m` uniformly at random and generates
/// the channel input memorylessly from it.
pub fn ncc_encode<R: Rng + ?Sized>(
    pair: &CodePair,
    user: usize,
    m: &FieldVector,
    cfg: &EncoderConfig,
    rng: &mut R,
    budget_bits: u32,
) -> Result<EncodeOutcome> {
    let f = pair.field();
    if cfg.p_v.len() != f.q() as usize {
        return Err(Error::Dimension("encoder p_V is not over F_q".into()));
    }
    check_budget(pair.k() as f64 * f.bits(), budget_bits)?;
    let code = pair.user_code(user);
    let test = TypicalityTest::new(&cfg.p_v, pair.n(), cfg.eta2);
    let mut counts = vec![0u32; f.q() as usize];
    let mut typical = |v: &[Residue]| {
        counts.iter_mut().for_each(|c| *c = 0);
        for &s in v {
            counts[s as usize] += 1;
        }
        test.accepts_counts(&counts)
    };
    let mut total = 0u64;
    let mut w = code.coset_walker(m)?;
    while let Some((_, v)) = w.next_item() {
        if typical(v) {
            total += 1;
        }
    }
    if total == 0 {
        return Ok(EncodeOutcome::Failure);
    }
    let pick = rng.gen_range(0..total);
    let mut seen = 0u64;
    let mut w = code.coset_walker(m)?;
    while let Some((a, v)) = w.next_item() {
        if typical(v) {
            if seen == pick {
                let x = v.iter().map(|&s| cfg.sample_x(s as usize, rng)).collect();
                return Ok(EncodeOutcome::Encoded {
                    a: FieldVector::new(f, a.to_vec())?,
                    v: FieldVector::new(f, v.to_vec())?,
                    x,
                });
            }
            seen += 1;
        }
    }
    unreachable!("second pass visits the same typical codewords")
}

/// Decoder settings: the law of `(Z, Y)` with `Z = V1 + V2`, and `eta1`.
#[derive(Debug, Clone)]
pub struct DecoderConfig {
    pzy: Vec<f64>,
    py: Vec<f64>,
    y_size: usize,
    eta1: f64,
}

impl DecoderConfig {
    /// `pzy[z * y_size + y]`.
    pub fn new(q: usize, y_size: usize, pzy: Vec<f64>, eta1: f64) -> Result<Self> {
        if pzy.len() != q * y_size {
            return Err(Error::Dimension("p(z, y) has the wrong size".into()));
        }
        let mut py = vec![0.0; y_size];
        for (i, p) in pzy.iter().enumerate() {
            py[i % y_size] += p;
        }
        Ok(Self {
            pzy,
            py,
            y_size,
            eta1,
        })
    }

    /// Requires plain-sum coefficients; normalize the instance first.
    pub fn from_test_channel(src: &SourcePair, mac: &Mac, tc: &TestChannel, eta1: f64) -> Result<Self> {
        if src.coeffs() != (1, 1) {
            return Err(Error::Validation("decoder expects a normalized instance (coefficients 1, 1)".into()));
        }
        let f = src.field();
        let j: JointPmf = tc
            .p1()
            .product(tc.p2())?
            .compose(mac.transition())?
            .pushforward(&["V1", "V2"], "Z", src.q(), |v| {
                f.add(v[0] as Residue, v[1] as Residue) as usize
            })?;
        let m = j.marginal(&["Z", "Y"])?;
        Self::new(src.q(), mac.y_size(), m.table().to_vec(), eta1)
    }

    pub fn pzy(&self) -> &[f64] {
        &self.pzy
    }

    pub fn py(&self) -> &[f64] {
        &self.py
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    /// Conditional entropy H(Z | Y) in bits.
    pub fn h_z_given_y(&self) -> f64 {
        crate::probability::entropy_bits(&self.pzy) - crate::probability::entropy_bits(&self.py)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DecodeOutcome {
    Decoded(Vec<Residue>),
    /// `y` is not typical for `p_Y` at `eta1 / 2`.
    YAtypical,
    NoTypicalCodeword,
    /// The typical list spans more than one coset.
    MultipleCosets,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeReport {
    pub outcome: DecodeOutcome,
    /// Distinct cosets holding a jointly typical codeword, sorted.
    pub typical_cosets: Vec<Vec<Residue>>,
}

/// Lists the decoder codewords jointly typical with `y` and returns the
/// coset if they all share one.
pub fn ncc_decode(pair: &CodePair, y: &[usize], cfg: &DecoderConfig, budget_bits: u32) -> Result<DecodeReport> {
    let f = pair.field();
    let n = pair.n();
    let q = f.q() as usize;
    if y.len() != n {
        return Err(Error::Dimension(format!("received {} symbols, expected {n}", y.len())));
    }
    if cfg.pzy.len() != q * cfg.y_size {
        return Err(Error::Dimension("decoder p(z, y) is not over F_q".into()));
    }
    check_budget((pair.k() + pair.l()) as f64 * f.bits(), budget_bits)?;
    if y.iter().any(|&s| s >= cfg.y_size) || !TypicalityTest::new(&cfg.py, n, cfg.eta1 / 2.0).accepts(y) {
        return Ok(DecodeReport {
            outcome: DecodeOutcome::YAtypical,
            typical_cosets: Vec::new(),
        });
    }
    let test = TypicalityTest::new(&cfg.pzy, n, cfg.eta1);
    let k = pair.k();
    let mut counts = vec![0u32; cfg.pzy.len()];
    let mut cosets = BTreeSet::new();
    let mut w = pair.decoder_code().full_walker();
    while let Some((digits, v)) = w.next_item() {
        counts.iter_mut().for_each(|c| *c = 0);
        for (&z, &ys) in v.iter().zip(y) {
            counts[z as usize * cfg.y_size + ys] += 1;
        }
        if test.accepts_counts(&counts) {
            cosets.insert(digits[k..].to_vec());
        }
    }
    let typical_cosets: Vec<Vec<Residue>> = cosets.into_iter().collect();
    let outcome = match typical_cosets.len() {
        0 => DecodeOutcome::NoTypicalCodeword,
        1 => DecodeOutcome::Decoded(typical_cosets[0].clone()),
        _ => DecodeOutcome::MultipleCosets,
    };
    Ok(DecodeReport {
        outcome,
        typical_cosets,
    })
}

/// `q^{-n (1 - (k+l)/n - H(Z|Y)/log2 q - 3 eta1)}`, clamped to [0, 1].
pub fn theoretical_error_bound(n: usize, k: usize, l: usize, q: u16, h_zy_bits: f64, eta1: f64) -> f64 {
    let nf = n as f64;
    let hq = h_zy_bits / (q as f64).log2();
    let exponent = nf * (1.0 - (k + l) as f64 / nf - hq - 3.0 * eta1);
    (q as f64).powf(-exponent).clamp(0.0, 1.0)
}
