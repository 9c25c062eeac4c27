//! End-to-end simulation of the computation code and exact checks of the
//! code-ensemble lemmas.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{check_budget, Error, Result};
use crate::galois::{FieldVector, PrimeField, Residue};
use crate::km::{km_encode, km_sum_decode, KmCode};
use crate::model::{Instance, Mac};
use crate::ncc::{
    ncc_build, ncc_decode, ncc_encode, CodePair, DecodeOutcome, DecoderConfig, EncodeOutcome, EncoderConfig,
};

/// Per-trial rng: stream `trial` of the generator seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Which channel code the trials use.
#[derive(Debug, Clone)]
pub enum CodeChoice {
    Fixed(CodePair),
    /// A fresh ensemble draw at the start of every trial.
    RedrawPerTrial,
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub trials: u64,
    pub seed: u64,
    pub jobs: usize,
    pub budget_bits: u32,
}

/// Exactly one per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Ok,
    EncoderFailure,
    YAtypical,
    NoTypicalCodeword,
    MultiCoset,
    WrongUniqueCoset,
    KmDecodeError,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Ok,
        Category::EncoderFailure,
        Category::YAtypical,
        Category::NoTypicalCodeword,
        Category::MultiCoset,
        Category::WrongUniqueCoset,
        Category::KmDecodeError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Ok => "ok",
            Category::EncoderFailure => "encoder-failure",
            Category::YAtypical => "y-atypical",
            Category::NoTypicalCodeword => "no-typical-codeword",
            Category::MultiCoset => "multi-coset",
            Category::WrongUniqueCoset => "wrong-unique-coset",
            Category::KmDecodeError => "km-decode-error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TrialOutcome {
    category: Category,
    enc_fail: [bool; 2],
    /// Encoders succeeded and `y` was typical.
    eps3_eligible: bool,
    /// A jointly typical codeword sat in a coset other than the true sum.
    eps3: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimParams {
    pub q: u16,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub trials: u64,
    pub seed: u64,
    pub fixed_code: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub params: SimParams,
    pub categories: BTreeMap<&'static str, u64>,
    pub encoder_failures: [u64; 2],
    pub errors: u64,
    pub error_rate: f64,
    pub wilson95: (f64, f64),
    pub eps3_events: u64,
    pub eps3_eligible: u64,
}

impl SimReport {
    pub fn count(&self, c: Category) -> u64 {
        self.categories.get(c.name()).copied().unwrap_or(0)
    }

    /// `P(eps3)` estimated over all trials.
    pub fn eps3_rate(&self) -> f64 {
        if self.params.trials == 0 {
            0.0
        } else {
            self.eps3_events as f64 / self.params.trials as f64
        }
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    row.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

/// Samples `y` memorylessly from the MAC.
pub fn transmit(mac: &Mac, x1: &[usize], x2: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    x1.iter()
        .zip(x2)
        .map(|(&a, &b)| draw(&cumulative(mac.row(a, b)), rng))
        .collect()
}

struct Pipeline<'a> {
    inst: Instance,
    km: &'a KmCode,
    code: &'a CodeChoice,
    cfg: &'a TrialConfig,
    enc: [EncoderConfig; 2],
    dec: DecoderConfig,
    source_cdf: Vec<f64>,
    mac_cdf: Vec<Vec<f64>>,
    pz: Vec<f64>,
}

impl Pipeline<'_> {
    fn trial(&self, t: u64) -> Result<TrialOutcome> {
        let f = self.inst.source.field();
        let q = f.q() as usize;
        let n = self.cfg.n;
        let mut rng = trial_rng(self.cfg.seed, t);
        let mut s1 = Vec::with_capacity(n);
        let mut s2 = Vec::with_capacity(n);
        for _ in 0..n {
            let i = draw(&self.source_cdf, &mut rng);
            s1.push((i / q) as Residue);
            s2.push((i % q) as Residue);
        }
        let s1 = FieldVector::new(f, s1)?;
        let s2 = FieldVector::new(f, s2)?;
        let m1 = km_encode(self.km, &s1)?;
        let m2 = km_encode(self.km, &s2)?;
        let drawn;
        let pair = match self.code {
            CodeChoice::Fixed(p) => p,
            CodeChoice::RedrawPerTrial => {
                drawn = ncc_build(f, n, self.cfg.k, self.cfg.l, &mut rng)?;
                &drawn
            }
        };
        let e1 = ncc_encode(pair, 1, &m1, &self.enc[0], &mut rng, self.cfg.budget_bits)?;
        let e2 = ncc_encode(pair, 2, &m2, &self.enc[1], &mut rng, self.cfg.budget_bits)?;
        let (x1, x2) = match (e1, e2) {
            (EncodeOutcome::Encoded { x: x1, .. }, EncodeOutcome::Encoded { x: x2, .. }) => (x1, x2),
            (a, b) => {
                return Ok(TrialOutcome {
                    category: Category::EncoderFailure,
                    enc_fail: [a == EncodeOutcome::Failure, b == EncodeOutcome::Failure],
                    eps3_eligible: false,
                    eps3: false,
                })
            }
        };
        let x2s = self.inst.mac.x2_size();
        let y: Vec<usize> = x1
            .iter()
            .zip(&x2)
            .map(|(&a, &b)| draw(&self.mac_cdf[a * x2s + b], &mut rng))
            .collect();
        let rep = ncc_decode(pair, &y, &self.dec, self.cfg.budget_bits)?;
        let msum = m1.add(&m2)?;
        let eps3_eligible = rep.outcome != DecodeOutcome::YAtypical;
        let eps3 = rep.typical_cosets.iter().any(|c| c.as_slice() != msum.entries());
        let category = match rep.outcome {
            DecodeOutcome::YAtypical => Category::YAtypical,
            DecodeOutcome::NoTypicalCodeword => Category::NoTypicalCodeword,
            DecodeOutcome::MultipleCosets => Category::MultiCoset,
            DecodeOutcome::Decoded(mhat) => {
                if mhat.as_slice() != msum.entries() {
                    Category::WrongUniqueCoset
                } else {
                    let mhat = FieldVector::new(f, mhat)?;
                    let zhat = km_sum_decode(self.km, &mhat, &self.pz, self.cfg.budget_bits)?;
                    if zhat == s1.add(&s2)? {
                        Category::Ok
                    } else {
                        Category::KmDecodeError
                    }
                }
            }
        };
        Ok(TrialOutcome {
            category,
            enc_fail: [false, false],
            eps3_eligible,
            eps3,
        })
    }
}

/// Runs `cfg.trials` independent trials of the full pipeline: source draw,
/// syndrome, coset encoding, channel, coset decoding and sum recovery.
///
/// Trial `t` uses [`trial_rng`]`(seed, t)`, so the report does not depend on
/// `cfg.jobs`.
pub fn run_computation_trials(inst: &Instance, km: &KmCode, code: &CodeChoice, cfg: &TrialConfig) -> Result<SimReport> {
    let inst = inst.normalized();
    let f = inst.source.field();
    let q = f.q() as usize;
    let tc = inst
        .test_channel
        .clone()
        .ok_or_else(|| Error::Validation("simulation needs a test channel".into()))?;
    tc.check_compatible(&inst.mac)?;
    if km.field() != f || km.n() != cfg.n || km.l() != cfg.l {
        return Err(Error::Dimension(format!(
            "KM code is (q={}, n={}, l={}), trials use (q={q}, n={}, l={})",
            km.field().q(),
            km.n(),
            km.l(),
            cfg.n,
            cfg.l
        )));
    }
    if cfg.k + cfg.l > cfg.n {
        return Err(Error::Construction(format!("k + l = {} exceeds n = {}", cfg.k + cfg.l, cfg.n)));
    }
    if let CodeChoice::Fixed(p) = code {
        if p.field() != f || p.n() != cfg.n || p.k() != cfg.k || p.l() != cfg.l {
            return Err(Error::Dimension("fixed code does not match (q, n, k, l)".into()));
        }
    }
    check_budget((cfg.k + cfg.l) as f64 * f.bits(), cfg.budget_bits)?;
    check_budget((cfg.n - km.h().rank()) as f64 * f.bits(), cfg.budget_bits)?;

    let mac = &inst.mac;
    let mac_cdf = (0..mac.x1_size() * mac.x2_size())
        .map(|i| cumulative(mac.row(i / mac.x2_size(), i % mac.x2_size())))
        .collect();
    let p = Pipeline {
        km,
        code,
        cfg,
        enc: [
            EncoderConfig::from_test_channel(&tc, 1, cfg.eta2),
            EncoderConfig::from_test_channel(&tc, 2, cfg.eta2),
        ],
        dec: DecoderConfig::from_test_channel(&inst.source, mac, &tc, cfg.eta1)?,
        source_cdf: cumulative(inst.source.joint().table()),
        mac_cdf,
        pz: inst.source.target_pmf(),
        inst: inst.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> =
        pool.install(|| (0..cfg.trials).into_par_iter().map(|t| p.trial(t)).collect::<Result<_>>())?;

    let mut categories: BTreeMap<&'static str, u64> = Category::ALL.iter().map(|c| (c.name(), 0)).collect();
    let mut encoder_failures = [0u64; 2];
    let (mut eps3_events, mut eps3_eligible) = (0, 0);
    for o in &outcomes {
        *categories.get_mut(o.category.name()).expect("all categories present") += 1;
        for (acc, &fail) in encoder_failures.iter_mut().zip(&o.enc_fail) {
            *acc += u64::from(fail);
        }
        eps3_eligible += u64::from(o.eps3_eligible);
        eps3_events += u64::from(o.eps3);
    }
    let errors = cfg.trials - categories["ok"];
    Ok(SimReport {
        params: SimParams {
            q: f.q(),
            n: cfg.n,
            k: cfg.k,
            l: cfg.l,
            eta1: cfg.eta1,
            eta2: cfg.eta2,
            trials: cfg.trials,
            seed: cfg.seed,
            fixed_code: matches!(code, CodeChoice::Fixed(_)),
        },
        categories,
        encoder_failures,
        errors,
        error_rate: if cfg.trials == 0 {
            0.0
        } else {
            errors as f64 / cfg.trials as f64
        },
        wilson95: wilson_interval(errors, cfg.trials),
        eps3_events,
        eps3_eligible,
    })
}

// ---------------------------------------------------------------------------
// Exact ensemble verification
// ---------------------------------------------------------------------------

/// How the decoder bias is formed from the user biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BiasWiring {
    /// `b1 + b2`, as the construction requires.
    Sum,
    /// `b1` alone; a deliberately broken decoder for negative tests.
    FirstOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseResult {
    pub name: String,
    /// Whether the observed counts match the claimed law.
    pub holds: bool,
    /// Whether `holds` is what the lemma requires.
    pub expected: bool,
    pub detail: String,
}

impl ClauseResult {
    pub fn passed(&self) -> bool {
        self.holds == self.expected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub q: u16,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub ensemble_size: u64,
    pub clauses: Vec<ClauseResult>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(ClauseResult::passed)
    }
}

/// One member of the code ensemble, stored flat.
struct Member<'a> {
    f: PrimeField,
    n: usize,
    k: usize,
    l: usize,
    digits: &'a [Residue],
    wiring: BiasWiring,
}

impl Member<'_> {
    fn g_i(&self, r: usize) -> &[Residue] {
        &self.digits[r * self.n..(r + 1) * self.n]
    }

    fn g_oi(&self, r: usize) -> &[Residue] {
        let o = self.k * self.n;
        &self.digits[o + r * self.n..o + (r + 1) * self.n]
    }

    fn bias(&self, user: usize) -> &[Residue] {
        let o = (self.k + self.l + user - 1) * self.n;
        &self.digits[o..o + self.n]
    }

    /// Codeword of user 1, user 2, or the decoder (0), as an index.
    fn word(&self, user: usize, a: &[Residue], m: &[Residue]) -> usize {
        let f = self.f;
        let mut v = vec![0; self.n];
        match (user, self.wiring) {
            (0, BiasWiring::Sum) => {
                for ((d, &x), &y) in v.iter_mut().zip(self.bias(1)).zip(self.bias(2)) {
                    *d = f.add(x, y);
                }
            }
            (0, BiasWiring::FirstOnly) => v.copy_from_slice(self.bias(1)),
            (u, _) => v.copy_from_slice(self.bias(u)),
        }
        for (r, &c) in a.iter().enumerate() {
            for (d, &g) in v.iter_mut().zip(self.g_i(r)) {
                *d = f.add(*d, f.mul(c, g));
            }
        }
        for (r, &c) in m.iter().enumerate() {
            for (d, &g) in v.iter_mut().zip(self.g_oi(r)) {
                *d = f.add(*d, f.mul(c, g));
            }
        }
        crate::galois::vector_index(f, &v)
    }

    /// Coset of user `u` for message `m`, as sorted codeword indices.
    fn coset(&self, user: usize, m: &[Residue]) -> Vec<usize> {
        let mut out: Vec<usize> = crate::galois::all_vectors(self.f, self.k)
            .map(|a| self.word(user, &a, m))
            .collect();
        out.sort_unstable();
        out
    }
}

fn for_each_member(f: PrimeField, n: usize, k: usize, l: usize, wiring: BiasWiring, mut g: impl FnMut(&Member)) {
    let len = (k + l + 2) * n;
    let q = f.q();
    let mut digits = vec![0 as Residue; len];
    loop {
        g(&Member {
            f,
            n,
            k,
            l,
            digits: &digits,
            wiring,
        });
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < q {
                break;
            }
            digits[i] = 0;
        }
    }
}

fn ensemble_log2(f: PrimeField, n: usize, k: usize, l: usize) -> f64 {
    ((k + l + 2) * n) as f64 * f.bits()
}

/// Whether every cell of a histogram over `cells` outcomes equals `total / cells`.
fn is_uniform(counts: &BTreeMap<Vec<usize>, u64>, cells: u64, total: u64) -> bool {
    total % cells == 0 && counts.len() as u64 == cells && counts.values().all(|&c| c == total / cells)
}

fn add_sum(f: PrimeField, a: &[Residue], b: &[Residue]) -> Vec<Residue> {
    a.iter().zip(b).map(|(&x, &y)| f.add(x, y)).collect()
}

/// Exact counts over the whole ensemble for the three uniformity claims and
/// the `m̂ = m1 + m2` negative control. `k + l` may exceed `n`; the claims do
/// not need full-rank generators.
pub fn verify_lemma1_exact(q: u16, n: usize, k: usize, l: usize, wiring: BiasWiring, budget_bits: u32) -> Result<LemmaReport> {
    let f = PrimeField::new(q)?;
    let ens = ensemble_log2(f, n, k, l);
    check_budget(ens + 3.0 * (k + l) as f64 * f.bits(), budget_bits)?;
    let total = (q as u64).pow(((k + l + 2) * n) as u32);
    let qn = (q as u64).pow(n as u32);
    let msgs: Vec<Vec<Residue>> = crate::galois::all_vectors(f, l).collect();
    let inner: Vec<Vec<Residue>> = crate::galois::all_vectors(f, k).collect();
    let zero_a = vec![0; k];

    // (a) and (b): keyed by the index tuple
    let mut a_counts: BTreeMap<(usize, usize), BTreeMap<Vec<usize>, u64>> = BTreeMap::new();
    let mut b_counts: BTreeMap<(usize, usize, usize, usize), BTreeMap<Vec<usize>, u64>> = BTreeMap::new();
    let mut c_counts: BTreeMap<(usize, usize, usize), BTreeMap<Vec<usize>, u64>> = BTreeMap::new();
    let mut ctrl_counts: BTreeMap<(usize, usize), BTreeMap<Vec<usize>, u64>> = BTreeMap::new();

    for_each_member(f, n, k, l, wiring, |mem| {
        for (ia, a) in inner.iter().enumerate() {
            for (im, m) in msgs.iter().enumerate() {
                let v = mem.word(1, a, m);
                *a_counts.entry((ia, im)).or_default().entry(vec![v]).or_default() += 1;
            }
        }
        for (ia1, a1) in inner.iter().enumerate() {
            for (im1, m1) in msgs.iter().enumerate() {
                let v1 = mem.word(1, a1, m1);
                for (ia2, a2) in inner.iter().enumerate() {
                    for (im2, m2) in msgs.iter().enumerate() {
                        let v2 = mem.word(2, a2, m2);
                        *b_counts
                            .entry((ia1, im1, ia2, im2))
                            .or_default()
                            .entry(vec![v1, v2])
                            .or_default() += 1;
                    }
                }
            }
        }
        for (im1, m1) in msgs.iter().enumerate() {
            let u1 = mem.word(1, &zero_a, m1);
            for (im2, m2) in msgs.iter().enumerate() {
                let u2 = mem.word(2, &zero_a, m2);
                let sum = add_sum(f, m1, m2);
                for (imh, mh) in msgs.iter().enumerate() {
                    let w = mem.word(0, &zero_a, mh);
                    let key = vec![u1, u2, w];
                    if *mh == sum {
                        *ctrl_counts.entry((im1, im2)).or_default().entry(key).or_default() += 1;
                    } else {
                        *c_counts.entry((im1, im2, imh)).or_default().entry(key).or_default() += 1;
                    }
                }
            }
        }
    });

    let a_ok = a_counts.values().all(|h| is_uniform(h, qn, total));
    let b_ok = b_counts.values().all(|h| is_uniform(h, qn * qn, total));
    let c_ok = !c_counts.is_empty() && c_counts.values().all(|h| is_uniform(h, qn * qn * qn, total));
    let ctrl_uniform = ctrl_counts.values().filter(|h| is_uniform(h, qn * qn * qn, total)).count();
    let clauses = vec![
        ClauseResult {
            name: "lemma1(a) P(V(a,m)=v) = q^-n".into(),
            holds: a_ok,
            expected: true,
            detail: format!("{} (a,m) pairs, each cell count {} of {total}", a_counts.len(), total / qn),
        },
        ClauseResult {
            name: "lemma1(b) P(V1=v1, V2=v2) = q^-2n".into(),
            holds: b_ok,
            expected: true,
            detail: format!("{} index tuples, each cell count {} of {total}", b_counts.len(), total / (qn * qn)),
        },
        ClauseResult {
            name: "lemma1(c) P(V1(0,m1), V2(0,m2), V(0,m^)) = q^-3n for m^ != m1+m2".into(),
            holds: c_ok,
            expected: true,
            detail: format!(
                "{} message triples, each cell count {}/{total}",
                c_counts.len(),
                total as f64 / (qn * qn * qn) as f64
            ),
        },
        ClauseResult {
            name: "negative control: m^ = m1+m2 is not uniform".into(),
            holds: ctrl_uniform > 0,
            expected: false,
            detail: format!("{ctrl_uniform} of {} message pairs looked uniform", ctrl_counts.len()),
        },
    ];
    Ok(LemmaReport {
        q,
        n,
        k,
        l,
        ensemble_size: total,
        clauses,
    })
}

/// Whether the joint counts over `(x, y)` factorize as marginal counts,
/// exactly: `total * N(x, y) = N(x) * N(y)` for every pair.
fn factorizes<X: Ord + Clone, Y: Ord + Clone>(joint: &BTreeMap<(X, Y), u64>, total: u64) -> bool {
    let mut mx: BTreeMap<X, u64> = BTreeMap::new();
    let mut my: BTreeMap<Y, u64> = BTreeMap::new();
    for ((x, y), &c) in joint {
        *mx.entry(x.clone()).or_default() += c;
        *my.entry(y.clone()).or_default() += c;
    }
    for (x, &cx) in &mx {
        for (y, &cy) in &my {
            let c = joint.get(&(x.clone(), y.clone())).copied().unwrap_or(0);
            if (total as u128) * (c as u128) != (cx as u128) * (cy as u128) {
                return false;
            }
        }
    }
    true
}

/// Exact check that the pair of transmitted cosets is independent of any
/// codeword in a competing coset, plus the `m̂ = m1 + m2` control.
pub fn verify_lemma2_exact(q: u16, n: usize, k: usize, l: usize, wiring: BiasWiring, budget_bits: u32) -> Result<LemmaReport> {
    let f = PrimeField::new(q)?;
    let ens = ensemble_log2(f, n, k, l);
    check_budget(ens + (3 * l + k) as f64 * f.bits(), budget_bits)?;
    let total = (q as u64).pow(((k + l + 2) * n) as u32);
    let msgs: Vec<Vec<Residue>> = crate::galois::all_vectors(f, l).collect();
    let inner: Vec<Vec<Residue>> = crate::galois::all_vectors(f, k).collect();

    type Joint = BTreeMap<((Vec<usize>, Vec<usize>), usize), u64>;
    let mut off: BTreeMap<(usize, usize, usize, usize), Joint> = BTreeMap::new();
    let mut ctrl: BTreeMap<(usize, usize, usize), Joint> = BTreeMap::new();
    for_each_member(f, n, k, l, wiring, |mem| {
        let cos1: Vec<Vec<usize>> = msgs.iter().map(|m| mem.coset(1, m)).collect();
        let cos2: Vec<Vec<usize>> = msgs.iter().map(|m| mem.coset(2, m)).collect();
        for (im1, m1) in msgs.iter().enumerate() {
            for (im2, m2) in msgs.iter().enumerate() {
                let sum = add_sum(f, m1, m2);
                let key = (cos1[im1].clone(), cos2[im2].clone());
                for (imh, mh) in msgs.iter().enumerate() {
                    for (ia, a) in inner.iter().enumerate() {
                        let w = mem.word(0, a, mh);
                        let bucket = if *mh == sum {
                            ctrl.entry((im1, im2, ia)).or_default()
                        } else {
                            off.entry((im1, im2, imh, ia)).or_default()
                        };
                        *bucket.entry((key.clone(), w)).or_default() += 1;
                    }
                }
            }
        }
    });
    let off_ok = !off.is_empty() && off.values().all(|j| factorizes(j, total));
    let ctrl_factor = ctrl.values().filter(|j| factorizes(j, total)).count();
    Ok(LemmaReport {
        q,
        n,
        k,
        l,
        ensemble_size: total,
        clauses: vec![
            ClauseResult {
                name: "lemma2 (C1, C2) independent of V(a^, m^) for m^ != m1+m2".into(),
                holds: off_ok,
                expected: true,
                detail: format!("{} (m1, m2, m^, a^) tuples checked", off.len()),
            },
            ClauseResult {
                name: "negative control: m^ = m1+m2 does not factorize".into(),
                holds: ctrl_factor > 0,
                expected: false,
                detail: format!("{ctrl_factor} of {} tuples factorized", ctrl.len()),
            },
        ],
    })
}

// ---------------------------------------------------------------------------
// Statistical checks
// ---------------------------------------------------------------------------

/// Which decoder codeword is compared with `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Remark2Target {
    /// `V(0, m1 + m2 + e1)`: a competing coset.
    OffSum,
    /// `V(a1 + a2, m1 + m2)`: the transmitted sum codeword.
    TrueSum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
    pub draws: u64,
}

impl ChiSquareReport {
    /// Independence is not rejected at significance `alpha`.
    pub fn independent(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Pearson chi-square test on a contingency table; empty rows and columns
/// are dropped. With no degrees of freedom the p-value is 1.
pub fn chi_square_independence(table: &BTreeMap<(usize, usize), u64>) -> ChiSquareReport {
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    let mut total = 0u64;
    for (&(r, c), &v) in table {
        *rows.entry(r).or_default() += v;
        *cols.entry(c).or_default() += v;
        total += v;
    }
    let rows: Vec<(usize, u64)> = rows.into_iter().filter(|&(_, v)| v > 0).collect();
    let cols: Vec<(usize, u64)> = cols.into_iter().filter(|&(_, v)| v > 0).collect();
    let df = (rows.len().saturating_sub(1) * cols.len().saturating_sub(1)) as u64;
    if df == 0 {
        return ChiSquareReport {
            statistic: 0.0,
            df,
            p_value: 1.0,
            draws: total,
        };
    }
    let nf = total as f64;
    let mut stat = 0.0;
    for &(r, rv) in &rows {
        for &(c, cv) in &cols {
            let e = rv as f64 * cv as f64 / nf;
            let o = table.get(&(r, c)).copied().unwrap_or(0) as f64;
            stat += (o - e) * (o - e) / e;
        }
    }
    let p = 1.0 - ChiSquared::new(df as f64).expect("positive df").cdf(stat);
    ChiSquareReport {
        statistic: stat,
        df,
        p_value: p,
        draws: total,
    }
}

/// Index of the type (symbol histogram) of `v`.
fn type_index(v: &[usize], alphabet: usize) -> usize {
    let mut h = vec![0usize; alphabet];
    for &s in v {
        h[s] += 1;
    }
    h.iter().fold(0, |acc, &c| acc * (v.len() + 1) + c)
}

/// Monte Carlo over the code ensemble: is `Y` independent of a decoder
/// codeword from a competing coset? Both are bucketed by type.
pub fn verify_remark2_mc(
    inst: &Instance,
    n: usize,
    k: usize,
    l: usize,
    target: Remark2Target,
    draws: u64,
    seed: u64,
) -> Result<ChiSquareReport> {
    if l == 0 {
        return Err(Error::Argument("a competing coset needs l >= 1".into()));
    }
    let inst = inst.normalized();
    let f = inst.source.field();
    let q = f.q() as usize;
    let tc = inst
        .test_channel
        .clone()
        .ok_or_else(|| Error::Validation("remark check needs a test channel".into()))?;
    check_budget(k as f64 * f.bits(), 24)?;
    let vacuous = (q - 1) as f64;
    let enc = [
        EncoderConfig::from_test_channel(&tc, 1, vacuous),
        EncoderConfig::from_test_channel(&tc, 2, vacuous),
    ];
    let ys = inst.mac.y_size();
    let one = |t: u64| -> Result<Option<(usize, usize)>> {
        let mut rng = trial_rng(seed, t);
        let pair = ncc_build(f, n, k, l, &mut rng)?;
        let m1 = FieldVector::sample_uniform(f, l, &mut rng);
        let m2 = FieldVector::sample_uniform(f, l, &mut rng);
        let e1 = ncc_encode(&pair, 1, &m1, &enc[0], &mut rng, 24)?;
        let e2 = ncc_encode(&pair, 2, &m2, &enc[1], &mut rng, 24)?;
        let (
            EncodeOutcome::Encoded { a: a1, x: x1, .. },
            EncodeOutcome::Encoded { a: a2, x: x2, .. },
        ) = (e1, e2)
        else {
            return Ok(None);
        };
        let y = transmit(&inst.mac, &x1, &x2, &mut rng);
        let msum = m1.add(&m2)?;
        let w = match target {
            Remark2Target::OffSum => {
                let mut e = vec![0; l];
                e[0] = 1;
                let mhat = msum.add(&FieldVector::new(f, e)?)?;
                pair.decoder_code().codeword(&FieldVector::zeros(f, k), &mhat)?
            }
            Remark2Target::TrueSum => pair.decoder_code().codeword(&a1.add(&a2)?, &msum)?,
        };
        let wv: Vec<usize> = w.entries().iter().map(|&s| s as usize).collect();
        Ok(Some((type_index(&y, ys), type_index(&wv, q))))
    };
    let cells: Vec<Option<(usize, usize)>> = (0..draws).into_par_iter().map(one).collect::<Result<_>>()?;
    let mut table = BTreeMap::new();
    for c in cells.into_iter().flatten() {
        *table.entry(c).or_insert(0u64) += 1;
    }
    Ok(chi_square_independence(&table))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub empirical: f64,
    pub bound: f64,
    pub sigma: f64,
    /// False when the bound is vacuous (= 1).
    pub applicable: bool,
    pub holds: bool,
}

/// Empirical `P(eps3) <= bound + 3 sigma`, with sigma the binomial standard
/// error at the bound. Always holds when the bound is 1.
pub fn check_error_bound(report: &SimReport, bound: f64) -> BoundCheck {
    let empirical = report.eps3_rate();
    let n = report.params.trials.max(1) as f64;
    let sigma = (bound * (1.0 - bound) / n).sqrt();
    let applicable = bound < 1.0;
    BoundCheck {
        empirical,
        bound,
        sigma,
        applicable,
        holds: !applicable || empirical <= bound + 3.0 * sigma,
    }
}
