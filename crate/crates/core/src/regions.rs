//! Rate computations: the nested coset code rate, the LCC and separation
//! baselines, a search over test channels, and the two-layer regions with a
//! feasibility test.
//!
//! Every quantity here is in bits.

use serde::Serialize;

use crate::error::{check_budget, Error, Result};
use crate::galois::{PrimeField, Residue};
use crate::model::{Instance, LayeredChannelTest, LayeredSourceTest, Mac, SourcePair, TestChannel};
use crate::probability::{entropy_bits, JointPmf};

/// Tolerance used when deciding feasibility of a linear system.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Joint of (V1, X1, V2, X2, Y, Z) with `Z = c1 V1 + c2 V2`.
fn channel_joint(src: &SourcePair, mac: &Mac, tc: &TestChannel) -> Result<JointPmf> {
    if tc.field() != src.field() {
        return Err(Error::Validation("test channel field differs from source field".into()));
    }
    tc.check_compatible(mac)?;
    let f = src.field();
    let (c1, c2) = src.coeffs();
    tc.p1()
        .product(tc.p2())?
        .compose(mac.transition())?
        .pushforward(&["V1", "V2"], "Z", src.q(), |v| {
            f.add(f.mul(c1, v[0] as Residue), f.mul(c2, v[1] as Residue)) as usize
        })
}

/// Entropy terms entering the achievable rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaTerms {
    pub h_v1: f64,
    pub h_v2: f64,
    pub h_z_given_y: f64,
}

impl AlphaTerms {
    pub fn min_hv(&self) -> f64 {
        self.h_v1.min(self.h_v2)
    }

    /// `max(0, min(H(V1), H(V2)) - H(Z|Y))`.
    pub fn alpha(&self) -> f64 {
        (self.min_hv() - self.h_z_given_y).max(0.0)
    }
}

pub fn alpha_terms(src: &SourcePair, mac: &Mac, tc: &TestChannel) -> Result<AlphaTerms> {
    let j = channel_joint(src, mac, tc)?;
    Ok(AlphaTerms {
        h_v1: j.entropy(&["V1"])?,
        h_v2: j.entropy(&["V2"])?,
        h_z_given_y: j.conditional_entropy(&["Z"], &["Y"])?,
    })
}

/// Achievable computation rate for one test channel.
pub fn alpha_rate(src: &SourcePair, mac: &Mac, tc: &TestChannel) -> Result<f64> {
    Ok(alpha_terms(src, mac, tc)?.alpha())
}

/// Source symbols per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Lambda {
    Value(f64),
    /// H(Z) = 0: the target is known in advance.
    Unbounded,
}

impl Lambda {
    pub fn value(self) -> Option<f64> {
        match self {
            Lambda::Value(v) => Some(v),
            Lambda::Unbounded => None,
        }
    }
}

/// `rate_bits / H(Z)`.
pub fn computation_lambda(src: &SourcePair, rate_bits: f64) -> Lambda {
    let hz = src.target_entropy();
    if hz <= 1e-15 {
        Lambda::Unbounded
    } else {
        Lambda::Value(rate_bits / hz)
    }
}

/// Outcome of the LCC baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LccRate {
    Bits(f64),
    Inapplicable(String),
}

impl LccRate {
    pub fn bits(&self) -> Option<f64> {
        match self {
            LccRate::Bits(b) => Some(*b),
            LccRate::Inapplicable(_) => None,
        }
    }
}

/// Whether W(y | x1, x2) depends on the inputs only through `x1 + x2 mod q`.
pub fn is_additive(mac: &Mac, q: usize) -> bool {
    if mac.x1_size() != q || mac.x2_size() != q {
        return false;
    }
    for x1 in 0..q {
        for x2 in 0..q {
            let reference = mac.row((x1 + x2) % q, 0);
            if mac
                .row(x1, x2)
                .iter()
                .zip(reference)
                .any(|(a, b)| (a - b).abs() > 1e-12)
            {
                return false;
            }
        }
    }
    true
}

/// Symmetric capacity of the induced channel W -> Y when the MAC is additive.
pub fn lcc_rate(mac: &Mac, q: usize) -> LccRate {
    if mac.x1_size() != q || mac.x2_size() != q {
        return LccRate::Inapplicable(format!("input alphabets are not F_{q}"));
    }
    if !is_additive(mac, q) {
        return LccRate::Inapplicable("channel does not depend on the inputs only through their sum".into());
    }
    let ys = mac.y_size();
    let mut py = vec![0.0; ys];
    let mut h_cond = 0.0;
    for w in 0..q {
        let row = mac.row(w, 0);
        for (acc, p) in py.iter_mut().zip(row) {
            *acc += p / q as f64;
        }
        h_cond += entropy_bits(row) / q as f64;
    }
    LccRate::Bits((entropy_bits(&py) - h_cond).max(0.0))
}

// ---------------------------------------------------------------------------
// Separation baseline
// ---------------------------------------------------------------------------

/// Calls `f` on every composition of `total` into `parts` nonnegative parts,
/// in lexicographic order.
pub(crate) fn for_each_composition(total: u32, parts: usize, mut f: impl FnMut(&[u32])) {
    if parts == 0 {
        return;
    }
    let mut c = vec![0u32; parts];
    c[parts - 1] = total;
    loop {
        f(&c);
        // advance: find rightmost position < last that can take one from the tail
        let tail = c[parts - 1];
        if parts == 1 {
            return;
        }
        let mut i = parts - 2;
        if tail > 0 {
            c[i] += 1;
            c[parts - 1] = tail - 1;
            continue;
        }
        // tail is empty: move the rightmost nonzero interior entry back into the tail
        loop {
            if c[i] > 0 {
                break;
            }
            if i == 0 {
                return;
            }
            i -= 1;
        }
        if i == 0 {
            return;
        }
        let moved = c[i];
        c[i] = 0;
        c[i - 1] += 1;
        c[parts - 1] = moved - 1;
    }
}

/// log2 of C(n, k).
fn log2_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).log2() - ((i + 1) as f64).log2()).sum()
}

/// Maximizes `H(p V) - p . c` over the simplex (bits). `v` is row-major
/// `xs x ys`. Returns the attained value; stops early once the upper bound
/// drops to `floor`.
fn concave_inner_max(v: &[f64], c: &[f64], ys: usize, floor: f64) -> f64 {
    let xs = c.len();
    let ln2 = std::f64::consts::LN_2;
    let h_rows: Vec<f64> = v.chunks(ys).map(|r| entropy_bits(r) * ln2).collect();
    let c_nats: Vec<f64> = c.iter().map(|x| x * ln2).collect();
    let mut p = vec![1.0 / xs as f64; xs];
    let mut qy = vec![0.0; ys];
    let mut d = vec![0.0; xs];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..20_000 {
        qy.iter_mut().for_each(|x| *x = 0.0);
        for (px, row) in p.iter().zip(v.chunks(ys)) {
            for (acc, w) in qy.iter_mut().zip(row) {
                *acc += px * w;
            }
        }
        let mut lower = 0.0;
        let mut upper = f64::NEG_INFINITY;
        for x in 0..xs {
            let row = &v[x * ys..(x + 1) * ys];
            let mut kl = 0.0;
            for (w, qv) in row.iter().zip(&qy) {
                if *w > 0.0 {
                    kl += w * (w / qv).ln();
                }
            }
            d[x] = kl + h_rows[x] - c_nats[x];
            lower += p[x] * d[x];
            upper = upper.max(d[x]);
        }
        let lower_bits = lower / ln2;
        let upper_bits = upper / ln2;
        best = best.max(lower_bits);
        if upper_bits - lower_bits < 1e-11 || upper_bits <= floor {
            break;
        }
        let shift = upper;
        let mut s = 0.0;
        for x in 0..xs {
            p[x] *= (d[x] - shift).exp();
            s += p[x];
        }
        p.iter_mut().for_each(|x| *x /= s);
    }
    best
}

/// Sum capacity over independent inputs.
///
/// User 1 ranges over the grid of input pmfs with denominator `grid` (which
/// contains every deterministic input); for each such input the inner
/// maximization over user 2 is concave and is solved to 1e-11 bits.
pub fn sum_capacity(mac: &Mac, grid: u32) -> Result<f64> {
    if grid < 2 {
        return Err(Error::Argument("grid resolution must be at least 2".into()));
    }
    let (x1s, x2s, ys) = (mac.x1_size(), mac.x2_size(), mac.y_size());
    let h_w: Vec<f64> = (0..x1s * x2s).map(|i| entropy_bits(mac.row(i / x2s, i % x2s))).collect();
    let mut best: f64 = 0.0;
    let mut v = vec![0.0; x2s * ys];
    let mut c = vec![0.0; x2s];
    for_each_composition(grid, x1s, |comp| {
        v.iter_mut().for_each(|x| *x = 0.0);
        c.iter_mut().for_each(|x| *x = 0.0);
        for (x1, &k) in comp.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let p = k as f64 / grid as f64;
            for x2 in 0..x2s {
                for (acc, w) in v[x2 * ys..(x2 + 1) * ys].iter_mut().zip(mac.row(x1, x2)) {
                    *acc += p * w;
                }
                c[x2] += p * h_w[x1 * x2s + x2];
            }
        }
        best = best.max(concave_inner_max(&v, &c, ys, best));
    });
    Ok(best)
}

/// Separation baseline `C_sum / (H(S1) + H(S2))`.
pub fn separation_lambda(src: &SourcePair, mac: &Mac, grid: u32) -> Result<Lambda> {
    if !src.is_independent(1e-12) {
        return Err(Error::NotSupported(
            "separation baseline is implemented for independent sources only".into(),
        ));
    }
    let c = sum_capacity(mac, grid)?;
    let h = src.joint().entropy(&["S1"])? + src.joint().entropy(&["S2"])?;
    Ok(if h <= 1e-15 {
        Lambda::Unbounded
    } else {
        Lambda::Value(c / h)
    })
}

/// Outer bound `log2 |Y| / (H(S1) + H(S2))`: separation needs at least
/// H(S1) + H(S2) bits per source symbol through at most log2 |Y| bits per use.
pub fn separation_outer_lambda(src: &SourcePair, mac: &Mac) -> Lambda {
    let h = src.joint().entropy(&["S1"]).expect("S1") + src.joint().entropy(&["S2"]).expect("S2");
    if h <= 1e-15 {
        Lambda::Unbounded
    } else {
        Lambda::Value((mac.y_size() as f64).log2() / h)
    }
}

// ---------------------------------------------------------------------------
// Search over test channels
// ---------------------------------------------------------------------------

/// Candidate families for [`alpha_sup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestFamily {
    /// `p_V` on a grid, `X = f(V)` for every map `f` on the support of `p_V`.
    DeterministicMaps,
    /// `p_{VX}` on a grid over the joint simplex.
    Grid,
}

#[derive(Debug, Clone)]
pub struct AlphaSearch {
    pub family: TestFamily,
    pub resolution: u32,
    /// Maximum log2 of the per-user family size.
    pub budget_bits: u32,
    pub max_rounds: u32,
    /// Extra starting points; the uniform `V = X` channel is always added
    /// when the input alphabets are F_q.
    pub seeds: Vec<TestChannel>,
}

impl AlphaSearch {
    pub fn new(family: TestFamily, resolution: u32) -> Self {
        Self {
            family,
            resolution,
            budget_bits: 20,
            max_rounds: 8,
            seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlphaSup {
    pub bits: f64,
    pub test_channel: TestChannel,
    pub resolution: u32,
    pub evaluations: u64,
}

/// log2 of the number of candidates per user.
pub fn family_size_log2(q: usize, x_size: usize, family: TestFamily, resolution: u32) -> f64 {
    let r = resolution as u64;
    match family {
        TestFamily::Grid => {
            let parts = (q * x_size) as u64;
            log2_binomial(r + parts - 1, parts - 1)
        }
        TestFamily::DeterministicMaps => {
            let mut total = 0.0f64;
            for s in 1..=q.min(resolution as usize) as u64 {
                let lg = log2_binomial(q as u64, s) + log2_binomial(r - 1, s - 1) + s as f64 * (x_size as f64).log2();
                total += lg.exp2();
            }
            total.log2()
        }
    }
}

/// Largest resolution in `2..=max_resolution` whose family fits the budget
/// for both users.
pub fn largest_resolution(
    q: usize,
    x1_size: usize,
    x2_size: usize,
    family: TestFamily,
    max_resolution: u32,
    budget_bits: u32,
) -> Option<u32> {
    (2..=max_resolution).rev().find(|&r| {
        family_size_log2(q, x1_size, family, r) <= budget_bits as f64
            && family_size_log2(q, x2_size, family, r) <= budget_bits as f64
    })
}

/// Sparse test-channel half: nonzero `(v, x, p)` entries.
type Half = Vec<(usize, usize, f64)>;

fn for_each_candidate(q: usize, xs: usize, family: TestFamily, r: u32, mut f: impl FnMut(&Half, f64)) {
    let rf = r as f64;
    match family {
        TestFamily::Grid => for_each_composition(r, q * xs, |c| {
            let half: Half = c
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| (i / xs, i % xs, k as f64 / rf))
                .collect();
            let mut pv = vec![0.0; q];
            for &(v, _, p) in &half {
                pv[v] += p;
            }
            f(&half, entropy_bits(&pv));
        }),
        TestFamily::DeterministicMaps => for_each_composition(r, q, |c| {
            let support: Vec<usize> = (0..q).filter(|&v| c[v] > 0).collect();
            let pv: Vec<f64> = c.iter().map(|&k| k as f64 / rf).collect();
            let hv = entropy_bits(&pv);
            let mut map = vec![0usize; support.len()];
            loop {
                let half: Half = support.iter().zip(&map).map(|(&v, &x)| (v, x, pv[v])).collect();
                f(&half, hv);
                let mut i = map.len();
                loop {
                    if i == 0 {
                        return;
                    }
                    i -= 1;
                    map[i] += 1;
                    if map[i] < xs {
                        break;
                    }
                    map[i] = 0;
                }
            }
        }),
    }
}

/// Fast evaluator of H(Z|Y) for sparse test-channel halves.
struct Evaluator<'a> {
    mac: &'a Mac,
    field: PrimeField,
    coeffs: (Residue, Residue),
    pzy: Vec<f64>,
    py: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(src: &SourcePair, mac: &'a Mac) -> Self {
        let q = src.q();
        Self {
            mac,
            field: src.field(),
            coeffs: src.coeffs(),
            pzy: vec![0.0; q * mac.y_size()],
            py: vec![0.0; mac.y_size()],
        }
    }

    fn h_z_given_y(&mut self, a: &Half, b: &Half) -> f64 {
        let ys = self.mac.y_size();
        let f = self.field;
        self.pzy.iter_mut().for_each(|x| *x = 0.0);
        self.py.iter_mut().for_each(|x| *x = 0.0);
        for &(v1, x1, p1) in a {
            let z1 = f.mul(self.coeffs.0, v1 as Residue);
            for &(v2, x2, p2) in b {
                let z = f.add(z1, f.mul(self.coeffs.1, v2 as Residue)) as usize;
                let w = p1 * p2;
                let row = self.mac.row(x1, x2);
                let cell = &mut self.pzy[z * ys..(z + 1) * ys];
                for ((acc, py), r) in cell.iter_mut().zip(self.py.iter_mut()).zip(row) {
                    let m = w * r;
                    *acc += m;
                    *py += m;
                }
            }
        }
        (entropy_bits(&self.pzy) - entropy_bits(&self.py)).max(0.0)
    }

    fn alpha(&mut self, a: &Half, ha: f64, b: &Half, hb: f64) -> f64 {
        (ha.min(hb) - self.h_z_given_y(a, b)).max(0.0)
    }
}

fn sparse_half(p: &JointPmf) -> (Half, f64) {
    let xs = p.axes()[1].size;
    let half: Half = p
        .table()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (i / xs, i % xs, w))
        .collect();
    let hv = p.entropy(&[p.axes()[0].name.as_str()]).expect("V axis");
    (half, hv)
}

fn dense_half(h: &Half, q: usize, xs: usize) -> Vec<f64> {
    let mut t = vec![0.0; q * xs];
    for &(v, x, p) in h {
        t[v * xs + x] += p;
    }
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|x| *x /= s);
    t
}

/// Maximizes the achievable rate over a family of test channels by
/// alternating exhaustive searches over each user's family. The result is a
/// lower bound on the supremum over all test channels.
pub fn alpha_sup(src: &SourcePair, mac: &Mac, opts: &AlphaSearch) -> Result<AlphaSup> {
    let q = src.q();
    let (x1s, x2s) = (mac.x1_size(), mac.x2_size());
    if opts.resolution < 1 {
        return Err(Error::Argument("resolution must be positive".into()));
    }
    check_budget(family_size_log2(q, x1s, opts.family, opts.resolution), opts.budget_bits)?;
    check_budget(family_size_log2(q, x2s, opts.family, opts.resolution), opts.budget_bits)?;

    let mut ev = Evaluator::new(src, mac);
    let mut evaluations = 0u64;
    let mut seeds: Vec<TestChannel> = opts.seeds.clone();
    if x1s == q && x2s == q {
        seeds.push(TestChannel::uniform_identity(src.field()));
    }
    // a deterministic starting point that is always available
    let pv: Vec<f64> = (0..q).map(|v| if v == 0 { 1.0 } else { 0.0 }).collect();
    seeds.push(TestChannel::deterministic(src.field(), &pv, &vec![0; q], x1s, &pv, &vec![0; q], x2s)?);

    let mut best = (f64::NEG_INFINITY, Half::new(), 0.0, Half::new(), 0.0);
    for s in &seeds {
        s.check_compatible(mac)?;
        let (a, ha) = sparse_half(s.p1());
        let (b, hb) = sparse_half(s.p2());
        let val = ev.alpha(&a, ha, &b, hb);
        evaluations += 1;
        if val > best.0 + 1e-12 {
            best = (val, a, ha, b, hb);
        }
    }
    if x1s == x2s {
        for_each_candidate(q, x1s, opts.family, opts.resolution, |c, hc| {
            let val = ev.alpha(c, hc, c, hc);
            evaluations += 1;
            if val > best.0 + 1e-12 {
                best = (val, c.clone(), hc, c.clone(), hc);
            }
        });
    }
    for _ in 0..opts.max_rounds {
        let before = best.0;
        let (b, hb) = (best.3.clone(), best.4);
        for_each_candidate(q, x1s, opts.family, opts.resolution, |c, hc| {
            let val = ev.alpha(c, hc, &b, hb);
            evaluations += 1;
            if val > best.0 + 1e-12 {
                best = (val, c.clone(), hc, b.clone(), hb);
            }
        });
        let (a, ha) = (best.1.clone(), best.2);
        for_each_candidate(q, x2s, opts.family, opts.resolution, |c, hc| {
            let val = ev.alpha(&a, ha, c, hc);
            evaluations += 1;
            if val > best.0 + 1e-12 {
                best = (val, a.clone(), ha, c.clone(), hc);
            }
        });
        if best.0 <= before + 1e-12 {
            break;
        }
    }
    let tc = TestChannel::new(
        src.field(),
        x1s,
        dense_half(&best.1, q, x1s),
        x2s,
        dense_half(&best.3, q, x2s),
    )?;
    Ok(AlphaSup {
        bits: best.0,
        test_channel: tc,
        resolution: opts.resolution,
        evaluations,
    })
}

// ---------------------------------------------------------------------------
// Two-layer regions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
}

/// `coeffs . (R11, R12, R2) sense constant`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub coeffs: [f64; 3],
    pub sense: Sense,
    pub constant: f64,
}

impl Inequality {
    pub fn le(coeffs: [f64; 3], constant: f64) -> Self {
        Self {
            coeffs,
            sense: Sense::Le,
            constant,
        }
    }

    pub fn ge(coeffs: [f64; 3], constant: f64) -> Self {
        Self {
            coeffs,
            sense: Sense::Ge,
            constant,
        }
    }

    /// As `a . r <= b`.
    fn as_le(&self) -> ([f64; 3], f64) {
        match self.sense {
            Sense::Le => (self.coeffs, self.constant),
            Sense::Ge => (self.coeffs.map(|c| -c), -self.constant),
        }
    }

    pub fn holds(&self, r: [f64; 3], tol: f64) -> bool {
        let (a, b) = self.as_le();
        a[0] * r[0] + a[1] * r[1] + a[2] * r[2] <= b + tol
    }
}

impl std::fmt::Display for Inequality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names = ["R11", "R12", "R2"];
        let lhs: Vec<&str> = names
            .iter()
            .zip(self.coeffs)
            .filter(|(_, c)| *c != 0.0)
            .map(|(n, _)| *n)
            .collect();
        let op = match self.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
        };
        write!(f, "{} {op} {:.6}", lhs.join(" + "), self.constant)
    }
}

/// A polyhedron in (R11, R12, R2).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRegion3 {
    pub label: String,
    pub inequalities: Vec<Inequality>,
}

impl RateRegion3 {
    pub fn new(label: impl Into<String>, inequalities: Vec<Inequality>) -> Self {
        Self {
            label: label.into(),
            inequalities,
        }
    }

    /// Multiplies every constant by `factor` (source bits per symbol to bits
    /// per channel use at `factor` symbols per use).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            label: format!("{} x {factor}", self.label),
            inequalities: self
                .inequalities
                .iter()
                .map(|i| Inequality {
                    constant: i.constant * factor,
                    ..i.clone()
                })
                .collect(),
        }
    }

    pub fn contains(&self, r: [f64; 3], tol: f64) -> bool {
        r.iter().all(|&x| x >= -tol) && self.inequalities.iter().all(|i| i.holds(r, tol))
    }
}

fn target_axis(pmf: JointPmf, a: &str, b: &str, field: PrimeField, coeffs: (Residue, Residue)) -> Result<JointPmf> {
    pmf.pushforward(&[a, b], "Z", field.q() as usize, |v| {
        field.add(field.mul(coeffs.0, v[0] as Residue), field.mul(coeffs.1, v[1] as Residue)) as usize
    })
}

/// Source-side region for a layered source test channel.
pub fn beta_s(src: &SourcePair, lt: &LayeredSourceTest) -> Result<RateRegion3> {
    let j = target_axis(lt.pmf().clone(), "S1", "S2", src.field(), src.coeffs())?;
    let i1 = j.conditional_mutual_information(&["T1"], &["S1"], &["T2"])?;
    let i2 = j.conditional_mutual_information(&["T2"], &["S2"], &["T1"])?;
    let i12 = j.mutual_information(&["T1", "T2"], &["S1", "S2"])?;
    let hz = j.conditional_entropy(&["Z"], &["T1", "T2"])?;
    Ok(RateRegion3::new(
        "beta_S",
        vec![
            Inequality::ge([1.0, 0.0, 0.0], i1),
            Inequality::ge([0.0, 1.0, 0.0], i2),
            Inequality::ge([0.0, 0.0, 1.0], hz),
            Inequality::ge([1.0, 1.0, 0.0], i12),
        ],
    ))
}

/// Channel-side region for a layered channel test channel.
pub fn beta_c(src: &SourcePair, ct: &LayeredChannelTest, mac: &Mac) -> Result<RateRegion3> {
    ct.check_compatible(mac)?;
    if ct.field() != src.field() {
        return Err(Error::Validation("layered test channel field differs from source field".into()));
    }
    let joint = ct.p1().product(ct.p2())?.compose(mac.transition())?;
    let j = target_axis(joint, "V1", "V2", src.field(), src.coeffs())?;
    let hmin = j
        .conditional_entropy(&["V1"], &["U1"])?
        .min(j.conditional_entropy(&["V2"], &["U2"])?);
    let hu1 = j.entropy(&["U1"])?;
    let hu2 = j.entropy(&["U2"])?;
    Ok(RateRegion3::new(
        "beta_C",
        vec![
            Inequality::le([1.0, 0.0, 0.0], j.mutual_information(&["U1"], &["Y", "U2", "Z"])?),
            Inequality::le([0.0, 1.0, 0.0], j.mutual_information(&["U2"], &["Y", "U1", "Z"])?),
            Inequality::le([1.0, 1.0, 0.0], j.mutual_information(&["U1", "U2"], &["Y", "Z"])?),
            Inequality::le([0.0, 0.0, 1.0], hmin - j.conditional_entropy(&["Z"], &["Y", "U1", "U2"])?),
            Inequality::le(
                [1.0, 0.0, 1.0],
                hmin + hu1 - j.conditional_entropy(&["Z", "U1"], &["Y", "U2"])?,
            ),
            Inequality::le(
                [0.0, 1.0, 1.0],
                hmin + hu2 - j.conditional_entropy(&["Z", "U2"], &["Y", "U1"])?,
            ),
            Inequality::le(
                [1.0, 1.0, 1.0],
                hmin + hu1 + hu2 - j.conditional_entropy(&["Z", "U1", "U2"], &["Y"])?,
            ),
        ],
    ))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let factor = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= factor * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Result of a feasibility test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intersection {
    pub feasible: bool,
    pub witness: Option<[f64; 3]>,
}

/// Decides whether `a ∩ b ∩ {R >= 0}` is nonempty.
///
/// The nonnegativity bounds make the polyhedron pointed, so it is nonempty
/// iff some vertex (three tight constraints) satisfies every constraint.
pub fn regions_intersect(a: &RateRegion3, b: &RateRegion3) -> Intersection {
    let mut cons: Vec<([f64; 3], f64)> = vec![
        ([-1.0, 0.0, 0.0], 0.0),
        ([0.0, -1.0, 0.0], 0.0),
        ([0.0, 0.0, -1.0], 0.0),
    ];
    cons.extend(a.inequalities.iter().chain(&b.inequalities).map(Inequality::as_le));
    let ok = |r: [f64; 3]| {
        cons.iter()
            .all(|(c, k)| c[0] * r[0] + c[1] * r[1] + c[2] * r[2] <= k + FEASIBILITY_TOLERANCE)
    };
    let m = cons.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                if let Some(r) = solve3([cons[i].0, cons[j].0, cons[k].0], [cons[i].1, cons[j].1, cons[k].1]) {
                    if ok(r) {
                        return Intersection {
                            feasible: true,
                            witness: Some(r.map(|x| if x.abs() < 1e-15 { 0.0 } else { x })),
                        };
                    }
                }
            }
        }
    }
    Intersection {
        feasible: false,
        witness: None,
    }
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SummaryOptions {
    pub separation_grid: u32,
    /// `None` skips the search.
    pub search: Option<AlphaSearch>,
}

/// All rate figures for one instance.
#[derive(Debug, Clone)]
pub struct RateSummary {
    pub h_z: f64,
    pub lcc: LccRate,
    pub lcc_lambda: Option<Lambda>,
    /// `Err` carries the reason the baseline does not apply.
    pub separation_lambda: std::result::Result<Lambda, String>,
    pub alpha: Option<AlphaTerms>,
    pub ncc_lambda: Option<Lambda>,
    pub alpha_sup: Option<AlphaSup>,
    pub alpha_sup_lambda: Option<Lambda>,
}

pub fn rate_summary(inst: &Instance, opts: &SummaryOptions) -> Result<RateSummary> {
    let src = &inst.source;
    let lcc = lcc_rate(&inst.mac, src.q());
    let lcc_lambda = lcc.bits().map(|b| computation_lambda(src, b));
    let separation = match separation_lambda(src, &inst.mac, opts.separation_grid) {
        Ok(l) => Ok(l),
        Err(Error::NotSupported(m)) => Err(m),
        Err(e) => return Err(e),
    };
    let alpha = inst
        .test_channel
        .as_ref()
        .map(|tc| alpha_terms(src, &inst.mac, tc))
        .transpose()?;
    let ncc_lambda = alpha.map(|t| computation_lambda(src, t.alpha()));
    let sup = match &opts.search {
        None => None,
        Some(s) => {
            let mut s = s.clone();
            if let Some(tc) = &inst.test_channel {
                s.seeds.push(tc.clone());
            }
            Some(alpha_sup(src, &inst.mac, &s)?)
        }
    };
    let sup_lambda = sup.as_ref().map(|s| computation_lambda(src, s.bits));
    Ok(RateSummary {
        h_z: src.target_entropy(),
        lcc,
        lcc_lambda,
        separation_lambda: separation,
        alpha,
        ncc_lambda,
        alpha_sup: sup,
        alpha_sup_lambda: sup_lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_example;
    use crate::probability::{binary_entropy, Axis};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn compositions_are_complete_and_ordered() {
        let mut seen = Vec::new();
        for_each_composition(3, 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
        assert!(seen.iter().all(|c| c.iter().sum::<u32>() == 3));
        let mut n = 0;
        for_each_composition(16, 5, |_| n += 1);
        assert_eq!(n, 4845);
        let mut one = Vec::new();
        for_each_composition(4, 1, |c| one.push(c.to_vec()));
        assert_eq!(one, vec![vec![4]]);
    }

    #[test]
    fn family_sizes_match_enumeration() {
        for (q, xs, r) in [(2usize, 2usize, 4u32), (3, 2, 3), (5, 5, 4), (2, 3, 5)] {
            for fam in [TestFamily::Grid, TestFamily::DeterministicMaps] {
                let mut n = 0u64;
                for_each_candidate(q, xs, fam, r, |_, _| n += 1);
                assert!(close((n as f64).log2(), family_size_log2(q, xs, fam, r), 1e-9), "{q} {xs} {r} {fam:?}");
            }
        }
    }

    #[test]
    fn example_one_alpha_is_one_bit() {
        let inst = builtin_example(1).unwrap();
        let t = alpha_terms(&inst.source, &inst.mac, inst.test_channel.as_ref().unwrap()).unwrap();
        assert!(close(t.h_v1, 1.0, 1e-12));
        assert!(close(t.h_z_given_y, 0.0, 1e-12));
        assert!(close(t.alpha(), 1.0, 1e-12));
        let l = computation_lambda(&inst.source, t.alpha()).value().unwrap();
        assert!(close(l, 1.0 / 5f64.log2(), 1e-12));
    }

    #[test]
    fn example_three_alpha_oracle() {
        // H(Z|Y) for Z uniform on F_3, Y = 1{Z != 0} through BSC(0.1):
        // P(Y=0) = 1/3*0.9 + 2/3*0.1 = 0.3667; closed-form oracle below.
        let py0: f64 = 0.9 / 3.0 + 0.2 / 3.0;
        let hzy = |py: f64, z0: f64, zo: f64| -> f64 {
            // z0 = P(Z=0, Y=y), zo = P(Z=j, Y=y) for j = 1, 2
            -(z0 / py) * (z0 / py).log2() - 2.0 * (zo / py) * (zo / py).log2()
        };
        let oracle = py0 * hzy(py0, 0.3, 1.0 / 30.0) + (1.0 - py0) * hzy(1.0 - py0, 1.0 / 30.0, 0.3);
        let inst = builtin_example(3).unwrap();
        let t = alpha_terms(&inst.source, &inst.mac, inst.test_channel.as_ref().unwrap()).unwrap();
        assert!(close(t.h_z_given_y, oracle, 1e-12));
        assert!(close(t.alpha(), 3f64.log2() - oracle, 1e-12));
        assert!(close(t.alpha(), 0.4790, 5e-4));
        assert!(close(computation_lambda(&inst.source, t.alpha()).value().unwrap(), 0.3022, 5e-4));
    }

    #[test]
    fn example_three_normalized_matches_weighted() {
        let inst = builtin_example(3).unwrap();
        let a = alpha_rate(&inst.source, &inst.mac, inst.test_channel.as_ref().unwrap()).unwrap();
        let n = inst.normalized();
        let b = alpha_rate(&n.source, &n.mac, n.test_channel.as_ref().unwrap()).unwrap();
        assert!(close(a, b, 1e-12));
    }

    #[test]
    fn deterministic_v1_gives_zero() {
        let f = PrimeField::new(3).unwrap();
        let tc = TestChannel::deterministic(
            f,
            &[1.0, 0.0, 0.0],
            &[0, 1, 2],
            3,
            &[1.0 / 3.0; 3],
            &[0, 1, 2],
            3,
        )
        .unwrap();
        let inst = builtin_example(3).unwrap();
        assert_eq!(alpha_rate(&inst.source, &inst.mac, &tc).unwrap(), 0.0);
    }

    #[test]
    fn lcc_examples() {
        let e1 = builtin_example(1).unwrap();
        let b = lcc_rate(&e1.mac, 5).bits().unwrap();
        assert!(close(b, 0.6 * 3f64.log2(), 1e-12));
        assert!(close(b / 5f64.log2(), 0.4096, 5e-5));
        let e2 = builtin_example(2).unwrap();
        let b2 = lcc_rate(&e2.mac, 5).bits().unwrap();
        // oracle: H(Y) = log2 3; H(Y|W) = 3/5 h(0.9, 0.05, 0.05) + 2/5 log2 3
        let h3 = -(0.9f64 * 0.9f64.log2() + 2.0 * 0.05 * 0.05f64.log2());
        assert!(close(b2, 3f64.log2() - 0.6 * h3 - 0.4 * 3f64.log2(), 1e-12));
        assert!(close(b2, 0.6096, 5e-5));
        let e4 = builtin_example(4).unwrap();
        assert!(matches!(lcc_rate(&e4.mac, 2), LccRate::Inapplicable(_)));
        assert!(!is_additive(&e4.mac, 2));
        assert!(is_additive(&Mac::binary_adder(0.1).unwrap(), 2));
    }

    #[test]
    fn separation_examples() {
        let e1 = builtin_example(1).unwrap();
        let c = sum_capacity(&e1.mac, 16).unwrap();
        assert!(close(c, 3f64.log2(), 1e-9), "{c}");
        let l = separation_lambda(&e1.source, &e1.mac, 16).unwrap().value().unwrap();
        assert!(close(l, 0.3413, 5e-5));
        let e2 = builtin_example(2).unwrap();
        // noisy even symbols: the best is one user fixed, the other uniform on
        // {0, 2, 4}, giving log2 3 - H(0.9, 0.05, 0.05)
        let l2 = separation_lambda(&e2.source, &e2.mac, 16).unwrap().value().unwrap();
        let h3 = -(0.9f64 * 0.9f64.log2() + 2.0 * 0.05 * 0.05f64.log2());
        assert!(close(l2, (3f64.log2() - h3) / (2.0 * 5f64.log2()), 1e-9), "{l2}");
        assert!(close(separation_outer_lambda(&e2.source, &e2.mac).value().unwrap(), 0.3413, 5e-5));
        // noiseless real adder: independent inputs reach H(1/4, 1/2, 1/4) = 1.5
        // bits; log2 3 would need correlated inputs
        let adder = Mac::binary_adder(0.0).unwrap();
        let adder3 = Mac::from_fn(2, 2, 3, |a, b, y| if a + b == y { 1.0 } else { 0.0 }).unwrap();
        let src = SourcePair::uniform_independent(PrimeField::new(2).unwrap());
        assert!(close(sum_capacity(&adder3, 8).unwrap(), 1.5, 1e-9));
        assert!(close(separation_lambda(&src, &adder3, 8).unwrap().value().unwrap(), 0.75, 1e-9));
        // the mod-2 adder only reaches one bit
        assert!(close(sum_capacity(&adder, 8).unwrap(), 1.0, 1e-9));
        let corr = SourcePair::doubly_symmetric_binary(0.1).unwrap();
        assert!(matches!(separation_lambda(&corr, &adder, 8), Err(Error::NotSupported(_))));
    }

    /// Double-grid brute force over both input simplices.
    fn brute_sum_capacity(mac: &Mac, r: u32) -> f64 {
        let (x1s, x2s) = (mac.x1_size(), mac.x2_size());
        let mut best: f64 = 0.0;
        for_each_composition(r, x1s, |a| {
            for_each_composition(r, x2s, |b| {
                let p = JointPmf::from_fn(vec![Axis::new("X1", x1s), Axis::new("X2", x2s)], |i| {
                    a[i[0]] as f64 * b[i[1]] as f64 / (r * r) as f64
                })
                .unwrap();
                let j = p.compose(mac.transition()).unwrap();
                best = best.max(j.mutual_information(&["X1", "X2"], &["Y"]).unwrap());
            });
        });
        best
    }

    #[test]
    fn sum_capacity_dominates_double_grid() {
        let e4 = builtin_example(4).unwrap();
        let mac3 = builtin_example(3).unwrap().mac;
        for mac in [e4.mac, mac3, Mac::binary_adder(0.1).unwrap()] {
            let ours = sum_capacity(&mac, 8).unwrap();
            let brute = brute_sum_capacity(&mac, 8);
            assert!(ours >= brute - 1e-9, "{ours} < {brute}");
            // a finer double grid never beats it by more than the grid gap
            assert!(ours <= brute_sum_capacity(&mac, 16) + 2e-3);
        }
    }

    #[test]
    fn fast_evaluator_matches_generic_path() {
        let inst = builtin_example(3).unwrap();
        let mut ev = Evaluator::new(&inst.source, &inst.mac);
        let mut checked = 0;
        for_each_candidate(3, 3, TestFamily::DeterministicMaps, 3, |a, ha| {
            checked += 1;
            if checked % 7 != 0 {
                return;
            }
            let b: Half = vec![(0, 1, 0.5), (2, 2, 0.5)];
            let hb = 1.0;
            let fast = ev.alpha(a, ha, &b, hb);
            let tc = TestChannel::new(inst.source.field(), 3, dense_half(a, 3, 3), 3, dense_half(&b, 3, 3)).unwrap();
            let slow = alpha_rate(&inst.source, &inst.mac, &tc).unwrap();
            assert!(close(fast, slow, 1e-12), "{fast} vs {slow}");
        });
        assert!(checked > 20);
    }

    #[test]
    fn search_reaches_example_one_value() {
        let inst = builtin_example(1).unwrap();
        let r = largest_resolution(5, 5, 5, TestFamily::DeterministicMaps, 16, 18).unwrap();
        let mut opts = AlphaSearch::new(TestFamily::DeterministicMaps, r);
        opts.budget_bits = 18;
        let sup = alpha_sup(&inst.source, &inst.mac, &opts).unwrap();
        assert!(sup.bits >= 1.0 - 1e-12, "{}", sup.bits);
        let check = alpha_rate(&inst.source, &inst.mac, &sup.test_channel).unwrap();
        assert!(close(check, sup.bits, 1e-9));
    }

    #[test]
    fn search_budget_is_enforced() {
        let inst = builtin_example(1).unwrap();
        let mut opts = AlphaSearch::new(TestFamily::Grid, 16);
        opts.budget_bits = 20;
        assert!(matches!(alpha_sup(&inst.source, &inst.mac, &opts), Err(Error::Budget { .. })));
    }

    #[test]
    fn identity_channel_gives_one_bit() {
        // Y = (X1, X2) as a 4-symbol output
        let mac = Mac::from_fn(2, 2, 4, |a, b, y| if y == 2 * a + b { 1.0 } else { 0.0 }).unwrap();
        let src = SourcePair::uniform_independent(PrimeField::new(2).unwrap());
        let sup = alpha_sup(&src, &mac, &AlphaSearch::new(TestFamily::Grid, 4)).unwrap();
        assert!(close(sup.bits, 1.0, 1e-12));
    }

    #[test]
    fn useless_channel_gives_zero_by_grid_oracle() {
        let mac = Mac::from_fn(2, 2, 2, |_, _, y| if y == 0 { 0.3 } else { 0.7 }).unwrap();
        let src = SourcePair::uniform_independent(PrimeField::new(2).unwrap());
        let sup = alpha_sup(&src, &mac, &AlphaSearch::new(TestFamily::Grid, 8)).unwrap();
        assert!(sup.bits <= 1e-12, "{}", sup.bits);
        // grid oracle: min(H(V1), H(V2)) <= H(V1 + V2) for independent V's
        let mut worst = f64::NEG_INFINITY;
        for_each_composition(8, 2, |a| {
            for_each_composition(8, 2, |b| {
                let pa = [a[0] as f64 / 8.0, a[1] as f64 / 8.0];
                let pb = [b[0] as f64 / 8.0, b[1] as f64 / 8.0];
                let pz = [pa[0] * pb[0] + pa[1] * pb[1], pa[0] * pb[1] + pa[1] * pb[0]];
                worst = worst.max(entropy_bits(&pa).min(entropy_bits(&pb)) - entropy_bits(&pz));
            })
        });
        assert!(worst <= 1e-12);
    }

    #[test]
    fn lcc_never_exceeds_search() {
        for id in [1, 2] {
            let inst = builtin_example(id).unwrap();
            let lcc = lcc_rate(&inst.mac, 5).bits().unwrap();
            let mut opts = AlphaSearch::new(TestFamily::DeterministicMaps, 4);
            opts.max_rounds = 1;
            let sup = alpha_sup(&inst.source, &inst.mac, &opts).unwrap();
            assert!(lcc <= sup.bits + 1e-12, "{lcc} > {}", sup.bits);
        }
    }

    #[test]
    fn beta_s_examples() {
        let src = SourcePair::doubly_symmetric_binary(0.1).unwrap();
        let deg = beta_s(&src, &LayeredSourceTest::degenerate(&src)).unwrap();
        let consts: Vec<f64> = deg.inequalities.iter().map(|i| i.constant).collect();
        assert!(close(consts[0], 0.0, 1e-12) && close(consts[1], 0.0, 1e-12) && close(consts[3], 0.0, 1e-12));
        assert!(close(consts[2], binary_entropy(0.1), 1e-12));

        let full = beta_s(&src, &LayeredSourceTest::full(&src)).unwrap();
        let c: Vec<f64> = full.inequalities.iter().map(|i| i.constant).collect();
        let hb = binary_entropy(0.1);
        assert!(close(c[0], hb, 1e-12)); // H(S1|S2)
        assert!(close(c[1], hb, 1e-12));
        assert!(close(c[2], 0.0, 1e-12));
        assert!(close(c[3], 1.0 + hb, 1e-12)); // H(S1, S2)

        // T1 = S1, T2 degenerate
        let id = vec![1.0, 0.0, 0.0, 1.0];
        let lt = LayeredSourceTest::from_conditionals(&src, 2, id, 1, vec![1.0, 1.0]).unwrap();
        let r = beta_s(&src, &lt).unwrap();
        assert!(close(r.inequalities[0].constant, 1.0, 1e-12));
        assert!(close(r.inequalities[2].constant, hb, 1e-12));
    }

    #[test]
    fn beta_c_reductions() {
        let inst = builtin_example(1).unwrap();
        let tc = inst.test_channel.clone().unwrap();
        let r = beta_c(&inst.source, &LayeredChannelTest::computation_only(&tc), &inst.mac).unwrap();
        let c: Vec<f64> = r.inequalities.iter().map(|i| i.constant).collect();
        assert!(close(c[3], 1.0, 1e-12));
        for &i in &[0usize, 1, 2] {
            assert!(close(c[i], 0.0, 1e-12));
        }
        // degenerate V with X uniform on {0, 2}
        let px = [0.5, 0.0, 0.5, 0.0, 0.0];
        let sep = LayeredChannelTest::separation_only(inst.source.field(), &px, &px).unwrap();
        let r = beta_c(&inst.source, &sep, &inst.mac).unwrap();
        let c: Vec<f64> = r.inequalities.iter().map(|i| i.constant).collect();
        assert!(close(c[3], 0.0, 1e-12));
        assert!(close(c[0], 1.0, 1e-12)); // I(X1; Y | X2)
        assert!(close(c[2], 1.5, 1e-12)); // I(X1 X2; Y)
        assert!(close(c[4], 1.0, 1e-12));
        assert!(close(c[6], 1.5, 1e-12));
    }

    #[test]
    fn intersect_examples() {
        let a = RateRegion3::new("a", vec![Inequality::ge([0.0, 0.0, 1.0], 1.0)]);
        let b = RateRegion3::new("b", vec![Inequality::le([0.0, 0.0, 1.0], 2.0)]);
        let r = regions_intersect(&a, &b);
        assert!(r.feasible);
        let w = r.witness.unwrap();
        assert!(a.contains(w, 1e-9) && b.contains(w, 1e-9));
        let c = RateRegion3::new("c", vec![Inequality::le([0.0, 0.0, 1.0], 0.5)]);
        assert!(!regions_intersect(&a, &c).feasible);
    }

    #[test]
    fn remark_reduction_on_example_one() {
        let inst = builtin_example(1).unwrap();
        let tc = inst.test_channel.clone().unwrap();
        let bs = beta_s(&inst.source, &LayeredSourceTest::degenerate(&inst.source)).unwrap();
        let bc = beta_c(&inst.source, &LayeredChannelTest::computation_only(&tc), &inst.mac).unwrap();
        let edge = 1.0 / 5f64.log2();
        assert!(regions_intersect(&bs.scaled(0.43), &bc).feasible);
        assert!(regions_intersect(&bs.scaled(edge - 1e-7), &bc).feasible);
        assert!(!regions_intersect(&bs.scaled(edge + 1e-7), &bc).feasible);
        assert!(!regions_intersect(&bs.scaled(0.5), &bc).feasible);
    }

    fn random_pmf(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn alpha_bounded_by_min_entropy(raw1 in prop::collection::vec(0.01f64..1.0, 9),
                                        raw2 in prop::collection::vec(0.01f64..1.0, 9)) {
            let inst = builtin_example(3).unwrap();
            let f = inst.source.field();
            let tc = TestChannel::new(f, 3, random_pmf(&raw1), 3, random_pmf(&raw2)).unwrap();
            let t = alpha_terms(&inst.source, &inst.mac, &tc).unwrap();
            prop_assert!(t.alpha() <= t.min_hv() + 1e-12);
            prop_assert!(t.min_hv() <= 3f64.log2() + 1e-12);
            // relabeling V2 by the coefficient leaves the rate unchanged
            let n = inst.normalized();
            let b = alpha_rate(&n.source, &n.mac, &tc.relabeled(1, 2)).unwrap();
            prop_assert!((t.alpha() - b).abs() < 1e-12);
        }

        #[test]
        fn fast_and_generic_agree(raw1 in prop::collection::vec(0.0f64..1.0, 4),
                                  raw2 in prop::collection::vec(0.0f64..1.0, 4),
                                  e in 0.0f64..0.5) {
            prop_assume!(raw1.iter().sum::<f64>() > 0.1 && raw2.iter().sum::<f64>() > 0.1);
            let mac = Mac::binary_adder(e).unwrap();
            let src = SourcePair::uniform_independent(PrimeField::new(2).unwrap());
            let tc = TestChannel::new(src.field(), 2, random_pmf(&raw1), 2, random_pmf(&raw2)).unwrap();
            let (a, ha) = sparse_half(tc.p1());
            let (b, hb) = sparse_half(tc.p2());
            let fast = Evaluator::new(&src, &mac).alpha(&a, ha, &b, hb);
            prop_assert!((fast - alpha_rate(&src, &mac, &tc).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn reduction_matches_one_dimensional_condition(lambda in 0.0f64..1.0, noise in 0.0f64..0.3) {
            let src = SourcePair::uniform_independent(PrimeField::new(2).unwrap());
            let mac = Mac::binary_adder(noise).unwrap();
            let tc = TestChannel::uniform_identity(src.field());
            let alpha = alpha_rate(&src, &mac, &tc).unwrap();
            prop_assume!((lambda * src.target_entropy() - alpha).abs() > 1e-8);
            let bs = beta_s(&src, &LayeredSourceTest::degenerate(&src)).unwrap().scaled(lambda);
            let bc = beta_c(&src, &LayeredChannelTest::computation_only(&tc), &mac).unwrap();
            prop_assert_eq!(regions_intersect(&bs, &bc).feasible, lambda * src.target_entropy() <= alpha);
        }

        #[test]
        fn witness_satisfies_both(c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, c3 in 0.0f64..3.0, d in 0.0f64..4.0) {
            let a = RateRegion3::new("a", vec![
                Inequality::ge([1.0, 0.0, 0.0], c1),
                Inequality::ge([0.0, 1.0, 0.0], c2),
                Inequality::ge([1.0, 1.0, 1.0], c3),
            ]);
            let b = RateRegion3::new("b", vec![Inequality::le([1.0, 1.0, 1.0], d)]);
            let r = regions_intersect(&a, &b);
            prop_assert_eq!(r.feasible, c1 + c2 <= d + 1e-9 && c3 <= d + 1e-9);
            if let Some(w) = r.witness {
                prop_assert!(a.contains(w, 1e-9) && b.contains(w, 1e-9));
            }
        }
    }
}
