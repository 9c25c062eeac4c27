//! Problem instances: a pair of sources over F_q, a two-user MAC, test
//! channels, and the text interchange format.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::galois::{PrimeField, Residue};
use crate::probability::{Axis, ConditionalPmf, JointPmf, SUM_TOLERANCE};

/// Two correlated sources over F_q and the target `Z = c1 S1 + c2 S2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePair {
    field: PrimeField,
    joint: JointPmf,
    coeffs: (Residue, Residue),
}

impl SourcePair {
    /// `table[s1 * q + s2] = P(S1 = s1, S2 = s2)`.
    pub fn new(field: PrimeField, table: Vec<f64>, coeffs: (Residue, Residue)) -> Result<Self> {
        let q = field.q() as usize;
        if coeffs.0 == 0 || coeffs.1 == 0 || coeffs.0 >= q as u16 || coeffs.1 >= q as u16 {
            return Err(Error::Validation(format!(
                "coefficients {coeffs:?} must be nonzero residues mod {q}"
            )));
        }
        let joint = JointPmf::new(vec![Axis::new("S1", q), Axis::new("S2", q)], table)?;
        Ok(Self {
            field,
            joint,
            coeffs,
        })
    }

    pub fn uniform_independent(field: PrimeField) -> Self {
        let q = field.q() as usize;
        Self::new(field, vec![1.0 / (q * q) as f64; q * q], (1, 1)).expect("uniform table")
    }

    /// Binary sources that disagree with probability `flip`, each uniform.
    pub fn doubly_symmetric_binary(flip: f64) -> Result<Self> {
        let f = PrimeField::new(2)?;
        Self::new(
            f,
            vec![(1.0 - flip) / 2.0, flip / 2.0, flip / 2.0, (1.0 - flip) / 2.0],
            (1, 1),
        )
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn q(&self) -> usize {
        self.field.q() as usize
    }

    pub fn joint(&self) -> &JointPmf {
        &self.joint
    }

    pub fn coeffs(&self) -> (Residue, Residue) {
        self.coeffs
    }

    /// Joint of (S1, S2, Z) with the target appended as axis `Z`.
    pub fn with_target(&self) -> JointPmf {
        let f = self.field;
        let (c1, c2) = self.coeffs;
        self.joint
            .pushforward(&["S1", "S2"], "Z", self.q(), |s| {
                f.add(f.mul(c1, s[0] as Residue), f.mul(c2, s[1] as Residue)) as usize
            })
            .expect("target axis is well formed")
    }

    /// Law of the target Z on F_q.
    pub fn target_pmf(&self) -> Vec<f64> {
        self.with_target().marginal(&["Z"]).expect("Z axis").table().to_vec()
    }

    /// H(Z) in bits.
    pub fn target_entropy(&self) -> f64 {
        self.with_target().entropy(&["Z"]).expect("Z axis")
    }

    /// Whether P(S1, S2) = P(S1) P(S2) within `tol`.
    pub fn is_independent(&self, tol: f64) -> bool {
        let m1 = self.joint.marginal(&["S1"]).expect("S1");
        let m2 = self.joint.marginal(&["S2"]).expect("S2");
        let prod = m1.product(&m2).expect("disjoint axes");
        self.joint.max_abs_diff(&prod).map(|d| d <= tol).unwrap_or(false)
    }

    /// Relabels S_j -> c_j S_j so the target becomes the plain sum.
    pub fn normalized(&self) -> SourcePair {
        let (c1, c2) = self.coeffs;
        let joint = self
            .joint
            .relabel("S1", &scaling_perm(self.field, c1))
            .and_then(|j| j.relabel("S2", &scaling_perm(self.field, c2)))
            .expect("scaling by a nonzero residue is a permutation");
        SourcePair {
            field: self.field,
            joint,
            coeffs: (1, 1),
        }
    }
}

/// The permutation `v -> c v` of F_q.
pub fn scaling_perm(field: PrimeField, c: Residue) -> Vec<usize> {
    (0..field.q()).map(|v| field.mul(c, v) as usize).collect()
}

/// Two-user discrete memoryless MAC `W(y | x1, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mac {
    x1_size: usize,
    x2_size: usize,
    y_size: usize,
    w: ConditionalPmf,
}

impl Mac {
    /// `rows[(x1 * x2_size + x2) * y_size + y] = W(y | x1, x2)`.
    pub fn new(x1_size: usize, x2_size: usize, y_size: usize, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != x1_size * x2_size * y_size {
            return Err(Error::Validation(format!(
                "MAC table has {} entries, expected {}",
                rows.len(),
                x1_size * x2_size * y_size
            )));
        }
        for (r, row) in rows.chunks(y_size.max(1)).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE || row.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::Validation(format!(
                    "MAC row (x1={}, x2={}) sums to {s}, not 1",
                    r / x2_size,
                    r % x2_size
                )));
            }
        }
        let w = ConditionalPmf::new(
            vec![Axis::new("X1", x1_size), Axis::new("X2", x2_size)],
            vec![Axis::new("Y", y_size)],
            rows,
        )?;
        Ok(Self {
            x1_size,
            x2_size,
            y_size,
            w,
        })
    }

    /// Builds a MAC from a transition function.
    pub fn from_fn(
        x1_size: usize,
        x2_size: usize,
        y_size: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(x1_size * x2_size * y_size);
        for x1 in 0..x1_size {
            for x2 in 0..x2_size {
                for y in 0..y_size {
                    rows.push(f(x1, x2, y));
                }
            }
        }
        Self::new(x1_size, x2_size, y_size, rows)
    }

    /// Binary adder `Y = X1 + X2 + N mod 2` with `P(N = 1) = crossover`.
    pub fn binary_adder(crossover: f64) -> Result<Self> {
        Self::from_fn(2, 2, 2, |x1, x2, y| {
            if (x1 ^ x2) == y {
                1.0 - crossover
            } else {
                crossover
            }
        })
    }

    pub fn x1_size(&self) -> usize {
        self.x1_size
    }

    pub fn x2_size(&self) -> usize {
        self.x2_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn transition(&self) -> &ConditionalPmf {
        &self.w
    }

    #[inline]
    pub fn prob(&self, y: usize, x1: usize, x2: usize) -> f64 {
        self.w.table()[(x1 * self.x2_size + x2) * self.y_size + y]
    }

    pub fn row(&self, x1: usize, x2: usize) -> &[f64] {
        self.w.row(x1 * self.x2_size + x2)
    }
}

/// Product-form test channel `p(v1, x1) p(v2, x2)` with V alphabets F_q.
#[derive(Debug, Clone, PartialEq)]
pub struct TestChannel {
    field: PrimeField,
    p1: JointPmf,
    p2: JointPmf,
}

impl TestChannel {
    /// `p1[v * x1_size + x1] = p(v1, x1)`, likewise for `p2`.
    pub fn new(field: PrimeField, x1_size: usize, p1: Vec<f64>, x2_size: usize, p2: Vec<f64>) -> Result<Self> {
        let q = field.q() as usize;
        let p1 = JointPmf::new(vec![Axis::new("V1", q), Axis::new("X1", x1_size)], p1)?;
        let p2 = JointPmf::new(vec![Axis::new("V2", q), Axis::new("X2", x2_size)], p2)?;
        Ok(Self { field, p1, p2 })
    }

    /// `V_j ~ pv_j` and `X_j = map_j(V_j)`.
    pub fn deterministic(
        field: PrimeField,
        pv1: &[f64],
        map1: &[usize],
        x1_size: usize,
        pv2: &[f64],
        map2: &[usize],
        x2_size: usize,
    ) -> Result<Self> {
        let lift = |pv: &[f64], map: &[usize], xs: usize| -> Result<Vec<f64>> {
            if pv.len() != field.q() as usize || map.len() != pv.len() || map.iter().any(|&x| x >= xs) {
                return Err(Error::Validation("deterministic test channel has wrong shape".into()));
            }
            let mut t = vec![0.0; pv.len() * xs];
            for (v, (&p, &x)) in pv.iter().zip(map).enumerate() {
                t[v * xs + x] = p;
            }
            Ok(t)
        };
        Self::new(field, x1_size, lift(pv1, map1, x1_size)?, x2_size, lift(pv2, map2, x2_size)?)
    }

    /// Uniform V_j on F_q with X_j = V_j (requires |X_j| = q).
    pub fn uniform_identity(field: PrimeField) -> Self {
        let q = field.q() as usize;
        let pv = vec![1.0 / q as f64; q];
        let id: Vec<usize> = (0..q).collect();
        Self::deterministic(field, &pv, &id, q, &pv, &id, q).expect("identity channel")
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn p1(&self) -> &JointPmf {
        &self.p1
    }

    pub fn p2(&self) -> &JointPmf {
        &self.p2
    }

    pub fn x1_size(&self) -> usize {
        self.p1.axes()[1].size
    }

    pub fn x2_size(&self) -> usize {
        self.p2.axes()[1].size
    }

    /// Marginal of V_j.
    pub fn pv(&self, user: usize) -> Vec<f64> {
        let (p, name) = if user == 1 { (&self.p1, "V1") } else { (&self.p2, "V2") };
        p.marginal(&[name]).expect("V axis").table().to_vec()
    }

    /// `p(x_j | v_j)`; rows with zero mass are uniform.
    pub fn x_given_v(&self, user: usize) -> ConditionalPmf {
        let (p, v, x) = if user == 1 {
            (&self.p1, "V1", "X1")
        } else {
            (&self.p2, "V2", "X2")
        };
        p.conditional(&[x], &[v]).expect("test channel axes")
    }

    /// Relabels V_j -> c_j V_j.
    pub fn relabeled(&self, c1: Residue, c2: Residue) -> TestChannel {
        TestChannel {
            field: self.field,
            p1: self.p1.relabel("V1", &scaling_perm(self.field, c1)).expect("permutation"),
            p2: self.p2.relabel("V2", &scaling_perm(self.field, c2)).expect("permutation"),
        }
    }

    pub fn check_compatible(&self, mac: &Mac) -> Result<()> {
        if self.x1_size() != mac.x1_size() || self.x2_size() != mac.x2_size() {
            return Err(Error::Validation(format!(
                "test channel inputs ({}, {}) do not match MAC inputs ({}, {})",
                self.x1_size(),
                self.x2_size(),
                mac.x1_size(),
                mac.x2_size()
            )));
        }
        Ok(())
    }
}

/// Two-layer source test channel over (T1, T2, S1, S2) with the Markov chain
/// T1 - S1 - S2 - T2.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSourceTest {
    pmf: JointPmf,
    field: PrimeField,
}

impl LayeredSourceTest {
    /// Builds the pmf from `p(t1 | s1)` and `p(t2 | s2)`, which makes the
    /// Markov chain hold by construction.
    pub fn from_conditionals(
        src: &SourcePair,
        t1_size: usize,
        t1_given_s1: Vec<f64>,
        t2_size: usize,
        t2_given_s2: Vec<f64>,
    ) -> Result<Self> {
        let q = src.q();
        let c1 = ConditionalPmf::new(vec![Axis::new("S1", q)], vec![Axis::new("T1", t1_size)], t1_given_s1)?;
        let c2 = ConditionalPmf::new(vec![Axis::new("S2", q)], vec![Axis::new("T2", t2_size)], t2_given_s2)?;
        let pmf = JointPmf::from_fn(
            vec![
                Axis::new("T1", t1_size),
                Axis::new("T2", t2_size),
                Axis::new("S1", q),
                Axis::new("S2", q),
            ],
            |i| src.joint().prob(&[i[2], i[3]]) * c1.row(i[2])[i[0]] * c2.row(i[3])[i[1]],
        )?;
        Ok(Self {
            pmf,
            field: src.field(),
        })
    }

    /// Validates a full pmf over axes named T1, T2, S1, S2.
    pub fn new(src: &SourcePair, pmf: JointPmf) -> Result<Self> {
        let pmf = pmf.marginal(&["T1", "T2", "S1", "S2"])?;
        let ws = pmf.marginal(&["S1", "S2"])?;
        if ws.max_abs_diff(src.joint())? > SUM_TOLERANCE {
            return Err(Error::Validation("layered source test does not reproduce W_S".into()));
        }
        let t1s1 = pmf.conditional(&["T1"], &["S1"])?;
        let t2s2 = pmf.conditional(&["T2"], &["S2"])?;
        let sizes: Vec<usize> = pmf.axes().iter().map(|a| a.size).collect();
        let mut worst: f64 = 0.0;
        pmf.for_each(|i, p| {
            let ps = src.joint().prob(&[i[2], i[3]]);
            if ps > 0.0 {
                let cond = p / ps;
                let fact = t1s1.row(i[2])[i[0]] * t2s2.row(i[3])[i[1]];
                worst = worst.max((cond - fact).abs());
            }
        });
        let _ = sizes;
        if worst > 1e-9 {
            return Err(Error::Validation(format!(
                "T1 - S1 - S2 - T2 is not a Markov chain (deviation {worst:.3e})"
            )));
        }
        Ok(Self {
            pmf,
            field: src.field(),
        })
    }

    /// Single-point T1, T2.
    pub fn degenerate(src: &SourcePair) -> Self {
        let q = src.q();
        Self::from_conditionals(src, 1, vec![1.0; q], 1, vec![1.0; q]).expect("degenerate layers")
    }

    /// T_j = S_j.
    pub fn full(src: &SourcePair) -> Self {
        let q = src.q();
        let id: Vec<f64> = (0..q * q).map(|i| if i / q == i % q { 1.0 } else { 0.0 }).collect();
        Self::from_conditionals(src, q, id.clone(), q, id).expect("identity layers")
    }

    pub fn pmf(&self) -> &JointPmf {
        &self.pmf
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }
}

/// Two-layer channel test channel `p(u1, v1, x1) p(u2, v2, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredChannelTest {
    field: PrimeField,
    p1: JointPmf,
    p2: JointPmf,
}

impl LayeredChannelTest {
    /// `p1[(u * q + v) * x1_size + x]`, likewise `p2`.
    pub fn new(
        field: PrimeField,
        u1_size: usize,
        x1_size: usize,
        p1: Vec<f64>,
        u2_size: usize,
        x2_size: usize,
        p2: Vec<f64>,
    ) -> Result<Self> {
        let q = field.q() as usize;
        let p1 = JointPmf::new(
            vec![Axis::new("U1", u1_size), Axis::new("V1", q), Axis::new("X1", x1_size)],
            p1,
        )?;
        let p2 = JointPmf::new(
            vec![Axis::new("U2", u2_size), Axis::new("V2", q), Axis::new("X2", x2_size)],
            p2,
        )?;
        Ok(Self { field, p1, p2 })
    }

    /// Single-point U's around an ordinary test channel.
    pub fn computation_only(tc: &TestChannel) -> Self {
        Self::new(
            tc.field(),
            1,
            tc.x1_size(),
            tc.p1().table().to_vec(),
            1,
            tc.x2_size(),
            tc.p2().table().to_vec(),
        )
        .expect("same tables")
    }

    /// V's fixed at zero and U_j = X_j with the given input laws.
    pub fn separation_only(field: PrimeField, px1: &[f64], px2: &[f64]) -> Result<Self> {
        let q = field.q() as usize;
        let lift = |px: &[f64]| {
            let xs = px.len();
            let mut t = vec![0.0; xs * q * xs];
            for (x, &p) in px.iter().enumerate() {
                // u = x, v = 0
                t[(x * q) * xs + x] = p;
            }
            t
        };
        Self::new(field, px1.len(), px1.len(), lift(px1), px2.len(), px2.len(), lift(px2))
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn p1(&self) -> &JointPmf {
        &self.p1
    }

    pub fn p2(&self) -> &JointPmf {
        &self.p2
    }

    pub fn relabeled(&self, c1: Residue, c2: Residue) -> Self {
        Self {
            field: self.field,
            p1: self.p1.relabel("V1", &scaling_perm(self.field, c1)).expect("permutation"),
            p2: self.p2.relabel("V2", &scaling_perm(self.field, c2)).expect("permutation"),
        }
    }

    pub fn check_compatible(&self, mac: &Mac) -> Result<()> {
        let x1 = self.p1.axes()[2].size;
        let x2 = self.p2.axes()[2].size;
        if x1 != mac.x1_size() || x2 != mac.x2_size() {
            return Err(Error::Validation(format!(
                "layered test channel inputs ({x1}, {x2}) do not match MAC inputs ({}, {})",
                mac.x1_size(),
                mac.x2_size()
            )));
        }
        Ok(())
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub source: SourcePair,
    pub mac: Mac,
    pub test_channel: Option<TestChannel>,
    pub source_layers: Option<LayeredSourceTest>,
    pub channel_layers: Option<LayeredChannelTest>,
}

impl Instance {
    pub fn new(source: SourcePair, mac: Mac, test_channel: Option<TestChannel>) -> Result<Self> {
        if let Some(tc) = &test_channel {
            if tc.field() != source.field() {
                return Err(Error::Validation("test channel and source use different fields".into()));
            }
            tc.check_compatible(&mac)?;
        }
        Ok(Self {
            source,
            mac,
            test_channel,
            source_layers: None,
            channel_layers: None,
        })
    }

    /// Applies the relabeling S_j -> c_j S_j, V_j -> c_j V_j so the target
    /// is the plain sum. Entropies are unchanged.
    pub fn normalized(&self) -> Instance {
        let (c1, c2) = self.source.coeffs();
        let source = self.source.normalized();
        let source_layers = self.source_layers.as_ref().map(|l| {
            let pmf = l
                .pmf()
                .relabel("S1", &scaling_perm(source.field(), c1))
                .and_then(|p| p.relabel("S2", &scaling_perm(source.field(), c2)))
                .expect("permutation");
            LayeredSourceTest::new(&source, pmf).expect("relabeling keeps the Markov chain")
        });
        Instance {
            source,
            mac: self.mac.clone(),
            test_channel: self.test_channel.as_ref().map(|t| t.relabeled(c1, c2)),
            source_layers,
            channel_layers: self.channel_layers.as_ref().map(|l| l.relabeled(c1, c2)),
        }
    }
}

/// The four worked examples.
pub fn builtin_example(id: u32) -> Result<Instance> {
    match id {
        1 | 2 => {
            let f5 = PrimeField::new(5)?;
            let noisy = id == 2;
            // Y alphabet {0, 2, 4} stored as indices 0, 1, 2.
            let mac = Mac::from_fn(5, 5, 3, |x1, x2, y| {
                let w = (x1 + x2) % 5;
                if w % 2 == 1 {
                    1.0 / 3.0
                } else if noisy {
                    if y == w / 2 {
                        0.90
                    } else {
                        0.05
                    }
                } else if y == w / 2 {
                    1.0
                } else {
                    0.0
                }
            })?;
            let pv = [0.5, 0.0, 0.5, 0.0, 0.0];
            let id_map: Vec<usize> = (0..5).collect();
            let tc = TestChannel::deterministic(f5, &pv, &id_map, 5, &pv, &id_map, 5)?;
            Instance::new(SourcePair::uniform_independent(f5), mac, Some(tc))
        }
        3 => {
            let f3 = PrimeField::new(3)?;
            let mac = Mac::from_fn(3, 3, 2, |x1, x2, y| {
                let w = usize::from(x1 != x2);
                if y == w {
                    0.9
                } else {
                    0.1
                }
            })?;
            let source = SourcePair::new(f3, vec![1.0 / 9.0; 9], (1, 2))?;
            Instance::new(source, mac, Some(TestChannel::uniform_identity(f3)))
        }
        4 => {
            let f2 = PrimeField::new(2)?;
            let p0 = |x1: usize, x2: usize| match (x1, x2) {
                (0, 0) => 0.8,
                (1, 1) => 0.9,
                _ => 0.1,
            };
            let mac = Mac::from_fn(2, 2, 2, |x1, x2, y| if y == 0 { p0(x1, x2) } else { 1.0 - p0(x1, x2) })?;
            Instance::new(SourcePair::uniform_independent(f2), mac, Some(TestChannel::uniform_identity(f2)))
        }
        _ => Err(Error::Argument(format!("no builtin example {id}; choose 1..4"))),
    }
}

/// Named instances for simulation.
///
/// - `adder`: uniform binary sources, noiseless mod-2 adder, `V = X` uniform.
/// - `bsc-adder`: doubly symmetric binary sources (flip 0.05), mod-2 adder
///   followed by a BSC(0.1), `V = X` uniform.
/// - `noise`: uniform binary sources, output independent of the inputs.
pub fn preset(name: &str) -> Result<Instance> {
    let f2 = PrimeField::new(2)?;
    let tc = Some(TestChannel::uniform_identity(f2));
    match name {
        "adder" => Instance::new(SourcePair::uniform_independent(f2), Mac::binary_adder(0.0)?, tc),
        "bsc-adder" => Instance::new(SourcePair::doubly_symmetric_binary(0.05)?, Mac::binary_adder(0.1)?, tc),
        "noise" => Instance::new(
            SourcePair::uniform_independent(f2),
            Mac::from_fn(2, 2, 2, |_, _, _| 0.5)?,
            tc,
        ),
        other => Err(Error::Argument(format!(
            "unknown preset `{other}`; choose adder, bsc-adder or noise"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(out: &mut String, key: &str, table: &[f64], width: usize) {
    for row in table.chunks(width) {
        let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        let _ = writeln!(out, "{key} = {}", cells.join(" "));
    }
}

/// Serializes an instance. Probabilities carry 17 significant digits so
/// reloading reproduces every value exactly.
pub fn save_instance(inst: &Instance) -> String {
    let mut out = String::new();
    let q = inst.source.q();
    let (c1, c2) = inst.source.coeffs();
    let _ = writeln!(out, "[source]\nq = {q}\ncoeffs = {c1} {c2}");
    write_rows(&mut out, "row", inst.source.joint().table(), q);
    let m = &inst.mac;
    let _ = writeln!(
        out,
        "\n[mac]\nx1_size = {}\nx2_size = {}\ny_size = {}",
        m.x1_size(),
        m.x2_size(),
        m.y_size()
    );
    write_rows(&mut out, "row", m.transition().table(), m.y_size());
    if let Some(tc) = &inst.test_channel {
        out.push_str("\n[test_channel]\n");
        write_rows(&mut out, "p1", tc.p1().table(), tc.x1_size());
        write_rows(&mut out, "p2", tc.p2().table(), tc.x2_size());
    }
    if let Some(sl) = &inst.source_layers {
        let t1 = sl.pmf().conditional(&["T1"], &["S1"]).expect("axes");
        let t2 = sl.pmf().conditional(&["T2"], &["S2"]).expect("axes");
        let _ = writeln!(
            out,
            "\n[source_layers]\nt1_size = {}\nt2_size = {}",
            t1.target_cells(),
            t2.target_cells()
        );
        write_rows(&mut out, "t1", t1.table(), t1.target_cells());
        write_rows(&mut out, "t2", t2.table(), t2.target_cells());
    }
    if let Some(cl) = &inst.channel_layers {
        let _ = writeln!(
            out,
            "\n[channel_layers]\nu1_size = {}\nu2_size = {}",
            cl.p1().axes()[0].size,
            cl.p2().axes()[0].size
        );
        write_rows(&mut out, "p1", cl.p1().table(), cl.p1().axes()[2].size);
        write_rows(&mut out, "p2", cl.p2().table(), cl.p2().axes()[2].size);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Source,
    Mac,
    TestChannel,
    SourceLayers,
    ChannelLayers,
}

/// A `key = values` line with its position.
#[derive(Debug)]
struct Entry {
    key: String,
    values: Vec<f64>,
    line: usize,
    column: usize,
}

#[derive(Default, Debug)]
struct Sections {
    source: Vec<Entry>,
    mac: Vec<Entry>,
    test_channel: Option<Vec<Entry>>,
    source_layers: Option<Vec<Entry>>,
    channel_layers: Option<Vec<Entry>>,
}

fn parse_number(tok: &str, line: usize, column: usize) -> Result<f64> {
    let perr = |m: String| Error::Parse {
        line,
        column,
        message: m,
    };
    if let Some((a, b)) = tok.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| perr(format!("bad numerator in `{tok}`")))?;
        let b: i64 = b.trim().parse().map_err(|_| perr(format!("bad denominator in `{tok}`")))?;
        if b == 0 {
            return Err(perr(format!("zero denominator in `{tok}`")));
        }
        Ok(a as f64 / b as f64)
    } else {
        tok.parse::<f64>().map_err(|_| perr(format!("`{tok}` is not a number")))
    }
}

fn allowed_keys(s: Section) -> &'static [&'static str] {
    match s {
        Section::Source => &["q", "coeffs", "row"],
        Section::Mac => &["x1_size", "x2_size", "y_size", "row"],
        Section::TestChannel => &["p1", "p2"],
        Section::SourceLayers => &["t1_size", "t2_size", "t1", "t2"],
        Section::ChannelLayers => &["u1_size", "u2_size", "p1", "p2"],
    }
}

fn tokenize(text: &str) -> Result<Sections> {
    let mut out = Sections::default();
    let mut current: Option<Section> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if trimmed.starts_with('[') {
            let name = trimmed.trim_start_matches('[').trim_end_matches(']').trim();
            let sec = match name {
                "source" => Section::Source,
                "mac" => Section::Mac,
                "test_channel" => Section::TestChannel,
                "source_layers" => Section::SourceLayers,
                "channel_layers" => Section::ChannelLayers,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: indent + 1,
                        message: format!("unknown section `[{other}]`"),
                    })
                }
            };
            match sec {
                Section::TestChannel => out.test_channel = Some(Vec::new()),
                Section::SourceLayers => out.source_layers = Some(Vec::new()),
                Section::ChannelLayers => out.channel_layers = Some(Vec::new()),
                _ => {}
            }
            current = Some(sec);
            continue;
        }
        let Some(sec) = current else {
            return Err(Error::Parse {
                line: line_no,
                column: indent + 1,
                message: "entry outside of any section".into(),
            });
        };
        let Some((key, rest)) = content.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                column: indent + 1,
                message: "expected `key = value`".into(),
            });
        };
        let key = key.trim();
        if !allowed_keys(sec).contains(&key) {
            return Err(Error::Parse {
                line: line_no,
                column: indent + 1,
                message: format!("unknown key `{key}`"),
            });
        }
        let value_col = content.find('=').map_or(0, |i| i + 1);
        let mut values = Vec::new();
        let mut offset = value_col;
        for tok in rest.split_whitespace() {
            let rel = content[offset..].find(tok).map_or(0, |i| i + offset);
            values.push(parse_number(tok, line_no, rel + 1)?);
            offset = rel + tok.len();
        }
        let entry = Entry {
            key: key.to_string(),
            values,
            line: line_no,
            column: indent + 1,
        };
        let bucket = match sec {
            Section::Source => &mut out.source,
            Section::Mac => &mut out.mac,
            Section::TestChannel => out.test_channel.as_mut().expect("opened"),
            Section::SourceLayers => out.source_layers.as_mut().expect("opened"),
            Section::ChannelLayers => out.channel_layers.as_mut().expect("opened"),
        };
        bucket.push(entry);
    }
    Ok(out)
}

fn scalar(entries: &[Entry], key: &str, section: &str) -> Result<usize> {
    let e = entries
        .iter()
        .find(|e| e.key == key)
        .ok_or_else(|| Error::Validation(format!("[{section}] is missing `{key}`")))?;
    match e.values.as_slice() {
        [v] if *v >= 0.0 && v.fract() == 0.0 => Ok(*v as usize),
        _ => Err(Error::Parse {
            line: e.line,
            column: e.column,
            message: format!("`{key}` must be a single nonnegative integer"),
        }),
    }
}

fn rows(entries: &[Entry], key: &str, count: usize, width: usize, section: &str) -> Result<Vec<f64>> {
    let rs: Vec<&Entry> = entries.iter().filter(|e| e.key == key).collect();
    if rs.len() != count {
        return Err(Error::Validation(format!(
            "[{section}] needs {count} `{key}` rows, found {}",
            rs.len()
        )));
    }
    let mut out = Vec::with_capacity(count * width);
    for r in rs {
        if r.values.len() != width {
            return Err(Error::Parse {
                line: r.line,
                column: r.column,
                message: format!("`{key}` row needs {width} entries, found {}", r.values.len()),
            });
        }
        out.extend_from_slice(&r.values);
    }
    Ok(out)
}

fn check_row_sums(table: &[f64], width: usize, section: &str, key: &str) -> Result<()> {
    for (i, row) in table.chunks(width).enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Validation(format!(
                "[{section}] `{key}` row {} sums to {s}, not 1",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Parses the instance text format.
pub fn load_instance(text: &str) -> Result<Instance> {
    let secs = tokenize(text)?;
    if secs.source.is_empty() {
        return Err(Error::Validation("missing [source] section".into()));
    }
    if secs.mac.is_empty() {
        return Err(Error::Validation("missing [mac] section".into()));
    }
    let q = scalar(&secs.source, "q", "source")?;
    let field = PrimeField::new(u16::try_from(q).map_err(|_| Error::Validation(format!("q = {q} too large")))?)?;
    let coeffs = match secs.source.iter().find(|e| e.key == "coeffs") {
        None => (1, 1),
        Some(e) => match e.values.as_slice() {
            [a, b] if a.fract() == 0.0 && b.fract() == 0.0 && *a >= 0.0 && *b >= 0.0 => (*a as Residue, *b as Residue),
            _ => {
                return Err(Error::Parse {
                    line: e.line,
                    column: e.column,
                    message: "`coeffs` needs two integers".into(),
                })
            }
        },
    };
    let joint = rows(&secs.source, "row", q, q, "source")?;
    let total: f64 = joint.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Validation(format!("[source] table sums to {total}, not 1")));
    }
    let source = SourcePair::new(field, joint, coeffs)?;

    let x1 = scalar(&secs.mac, "x1_size", "mac")?;
    let x2 = scalar(&secs.mac, "x2_size", "mac")?;
    let y = scalar(&secs.mac, "y_size", "mac")?;
    let w = rows(&secs.mac, "row", x1 * x2, y, "mac")?;
    check_row_sums(&w, y, "mac", "row")?;
    let mac = Mac::new(x1, x2, y, w)?;

    let test_channel = match &secs.test_channel {
        None => None,
        Some(e) => {
            let p1 = rows(e, "p1", q, x1, "test_channel")?;
            let p2 = rows(e, "p2", q, x2, "test_channel")?;
            Some(TestChannel::new(field, x1, p1, x2, p2)?)
        }
    };
    let mut inst = Instance::new(source, mac, test_channel)?;

    if let Some(e) = &secs.source_layers {
        let t1 = scalar(e, "t1_size", "source_layers")?;
        let t2 = scalar(e, "t2_size", "source_layers")?;
        let c1 = rows(e, "t1", q, t1, "source_layers")?;
        let c2 = rows(e, "t2", q, t2, "source_layers")?;
        check_row_sums(&c1, t1, "source_layers", "t1")?;
        check_row_sums(&c2, t2, "source_layers", "t2")?;
        inst.source_layers = Some(LayeredSourceTest::from_conditionals(&inst.source, t1, c1, t2, c2)?);
    }
    if let Some(e) = &secs.channel_layers {
        let u1 = scalar(e, "u1_size", "channel_layers")?;
        let u2 = scalar(e, "u2_size", "channel_layers")?;
        let p1 = rows(e, "p1", u1 * q, x1, "channel_layers")?;
        let p2 = rows(e, "p2", u2 * q, x2, "channel_layers")?;
        let cl = LayeredChannelTest::new(field, u1, x1, p1, u2, x2, p2)?;
        cl.check_compatible(&inst.mac)?;
        inst.channel_layers = Some(cl);
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_one_channel_is_noiseless_on_even_sums() {
        let inst = builtin_example(1).unwrap();
        assert_eq!(inst.mac.y_size(), 3);
        for x1 in 0..5 {
            for x2 in 0..5 {
                let w = (x1 + x2) % 5;
                let row = inst.mac.row(x1, x2);
                if w % 2 == 0 {
                    assert_eq!(row[w / 2], 1.0);
                } else {
                    assert!(row.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
                }
            }
        }
    }

    #[test]
    fn builtin_rows_are_normalized() {
        for id in 1..=4 {
            let inst = builtin_example(id).unwrap();
            let m = &inst.mac;
            for x1 in 0..m.x1_size() {
                for x2 in 0..m.x2_size() {
                    let s: f64 = m.row(x1, x2).iter().sum();
                    assert!((s - 1.0).abs() <= 1e-15, "example {id}");
                }
            }
        }
        assert_eq!(builtin_example(3).unwrap().source.coeffs(), (1, 2));
        assert!(matches!(builtin_example(5), Err(Error::Argument(_))));
        assert!(matches!(builtin_example(0), Err(Error::Argument(_))));
    }

    #[test]
    fn builtin_test_channels_satisfy_product_and_channel_conditions() {
        for id in 1..=4 {
            let inst = builtin_example(id).unwrap();
            let tc = inst.test_channel.as_ref().unwrap();
            let joint = tc.p1().product(tc.p2()).unwrap().compose(inst.mac.transition()).unwrap();
            let vx = joint.marginal(&["V1", "X1", "V2", "X2"]).unwrap();
            let prod = joint
                .marginal(&["V1", "X1"])
                .unwrap()
                .product(&joint.marginal(&["V2", "X2"]).unwrap())
                .unwrap();
            assert!(vx.max_abs_diff(&prod).unwrap() < 1e-12);
            let back = joint.conditional(&["Y"], &["X1", "X2", "V1", "V2"]).unwrap();
            let q = inst.source.q();
            let (x1s, x2s) = (inst.mac.x1_size(), inst.mac.x2_size());
            for x1 in 0..x1s {
                for x2 in 0..x2s {
                    for v1 in 0..q {
                        for v2 in 0..q {
                            if joint.marginal(&["X1", "X2", "V1", "V2"]).unwrap().prob(&[x1, x2, v1, v2]) > 0.0 {
                                let flat = ((x1 * x2s + x2) * q + v1) * q + v2;
                                let r = back.row(flat);
                                for (a, b) in r.iter().zip(inst.mac.row(x1, x2)) {
                                    assert!((a - b).abs() < 1e-12);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_builtins() {
        for id in 1..=4 {
            let inst = builtin_example(id).unwrap();
            let text = save_instance(&inst);
            assert_eq!(load_instance(&text).unwrap(), inst, "example {id}");
        }
    }

    #[test]
    fn round_trip_with_layers() {
        let mut inst = builtin_example(1).unwrap();
        inst.source_layers = Some(LayeredSourceTest::full(&inst.source));
        inst.channel_layers = Some(LayeredChannelTest::computation_only(inst.test_channel.as_ref().unwrap()));
        let back = load_instance(&save_instance(&inst)).unwrap();
        assert_eq!(back, inst);
    }

    const SMALL: &str = "\
# binary adder
[source]
q = 2
row = 1/4 1/4
row = 1/4 1/4
[mac]
x1_size = 2
x2_size = 2
y_size = 2
row = 1 0
row = 0 1
row = 0 1
row = 1 0
";

    #[test]
    fn parses_fractions_and_comments() {
        let inst = load_instance(SMALL).unwrap();
        assert_eq!(inst.source.joint().table(), &[0.25; 4]);
        assert!(inst.test_channel.is_none());
        assert_eq!(inst.mac.prob(1, 0, 1), 1.0);
    }

    #[test]
    fn bad_row_sum_is_a_validation_error_naming_the_row() {
        let text = SMALL.replacen("row = 0 1\nrow = 0 1", "row = 0 0.9\nrow = 0 1", 1);
        match load_instance(&text) {
            Err(Error::Validation(m)) => assert!(m.contains("row 2"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = SMALL.replace("y_size = 2", "  z_size = 2");
        match load_instance(&text) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!((line, column), (9, 3));
            }
            other => panic!("{other:?}"),
        }
        let text = SMALL.replace("row = 1/4 1/4\nrow", "row = 1/4 x\nrow");
        assert!(matches!(load_instance(&text), Err(Error::Parse { line: 4, column: 11, .. })));
    }

    #[test]
    fn normalization_turns_weighted_target_into_plain_sum() {
        let inst = builtin_example(3).unwrap();
        let norm = inst.normalized();
        assert_eq!(norm.source.coeffs(), (1, 1));
        assert!((norm.source.target_entropy() - inst.source.target_entropy()).abs() < 1e-12);
        let tc = norm.test_channel.unwrap();
        // X2 = V2 before relabeling, so now p(v2', x2) is supported on v2' = 2 x2.
        assert!((tc.p2().prob(&[2, 1]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(tc.p2().prob(&[1, 1]), 0.0);
    }

    #[test]
    fn layered_source_markov_check() {
        let src = SourcePair::doubly_symmetric_binary(0.1).unwrap();
        let full = LayeredSourceTest::full(&src);
        assert!(LayeredSourceTest::new(&src, full.pmf().clone()).is_ok());
        // T1 depends on S2 directly: breaks the chain
        let bad = JointPmf::from_fn(
            vec![Axis::new("T1", 2), Axis::new("T2", 1), Axis::new("S1", 2), Axis::new("S2", 2)],
            |i| if i[0] == i[3] { src.joint().prob(&[i[2], i[3]]) } else { 0.0 },
        )
        .unwrap();
        assert!(matches!(LayeredSourceTest::new(&src, bad), Err(Error::Validation(_))));
    }
}
