//! Dense probability tables over products of finite alphabets, information
//! functionals in bits, and robust typicality tests.

use std::collections::HashSet;

use crate::error::{check_budget, Error, Result};

/// Tolerance on the total mass of a table at construction.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Tolerance used when comparing information identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// A named finite alphabet `{0, .., size-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

/// Shannon entropy in bits of a (not necessarily normalized) mass vector,
/// with `0 log 0 = 0`.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Binary entropy function.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

fn strides(axes: &[Axis]) -> Vec<usize> {
    let mut s = vec![1; axes.len()];
    for i in (0..axes.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * axes[i + 1].size;
    }
    s
}

fn decode_index(mut flat: usize, axes: &[Axis], out: &mut [usize]) {
    for i in (0..axes.len()).rev() {
        out[i] = flat % axes[i].size;
        flat /= axes[i].size;
    }
}

/// Joint probability table. The last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    axes: Vec<Axis>,
    table: Vec<f64>,
}

impl JointPmf {
    pub fn new(axes: Vec<Axis>, table: Vec<f64>) -> Result<Self> {
        let mut names = HashSet::new();
        for a in &axes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Axis(format!("duplicate axis name `{}`", a.name)));
            }
            if a.size == 0 {
                return Err(Error::Axis(format!("axis `{}` is empty", a.name)));
            }
        }
        let cells: usize = axes.iter().map(|a| a.size).product();
        if table.len() != cells {
            return Err(Error::Validation(format!(
                "table has {} entries, axes need {cells}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Validation(format!("invalid probability {bad}")));
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Validation(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { axes, table })
    }

    /// Builds a table by evaluating `f` on every index tuple.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let cells: usize = axes.iter().map(|a| a.size).product();
        let mut idx = vec![0; axes.len()];
        let table = (0..cells)
            .map(|flat| {
                decode_index(flat, &axes, &mut idx);
                f(&idx)
            })
            .collect();
        Self::new(axes, table)
    }

    /// Single-axis pmf.
    pub fn single(name: &str, probs: Vec<f64>) -> Result<Self> {
        Self::new(vec![Axis::new(name, probs.len())], probs)
    }

    /// Uniform distribution on one axis.
    pub fn uniform(name: &str, size: usize) -> Result<Self> {
        Self::single(name, vec![1.0 / size as f64; size])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::Axis(format!("unknown axis `{name}`")))
    }

    pub fn axis_size(&self, name: &str) -> Result<usize> {
        Ok(self.axes[self.axis_index(name)?].size)
    }

    /// Probability of one index tuple given in axis order.
    pub fn prob(&self, index: &[usize]) -> f64 {
        let flat = index
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.size + i);
        self.table[flat]
    }

    /// Visits every cell as `(index tuple, probability)`.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], f64)) {
        let mut idx = vec![0; self.axes.len()];
        for (flat, &p) in self.table.iter().enumerate() {
            decode_index(flat, &self.axes, &mut idx);
            f(&idx, p);
        }
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let pos = names
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<Vec<_>>>()?;
        let unique: HashSet<_> = pos.iter().collect();
        if unique.len() != pos.len() {
            return Err(Error::Axis(format!("repeated axis in {names:?}")));
        }
        Ok(pos)
    }

    /// Marginal on `names`, axes in the order given.
    pub fn marginal(&self, names: &[&str]) -> Result<JointPmf> {
        let pos = self.positions(names)?;
        let axes: Vec<Axis> = pos.iter().map(|&i| self.axes[i].clone()).collect();
        let out_strides = strides(&axes);
        let mut table = vec![0.0; axes.iter().map(|a| a.size).product()];
        self.for_each(|idx, p| {
            let flat: usize = pos.iter().zip(&out_strides).map(|(&i, s)| idx[i] * s).sum();
            table[flat] += p;
        });
        Ok(JointPmf { axes, table })
    }

    /// Entropy of the marginal on `names`, in bits.
    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        if names.is_empty() {
            return Err(Error::Axis("entropy of an empty axis set".into()));
        }
        Ok(entropy_bits(&self.marginal(names)?.table))
    }

    fn joint_entropy_or_zero(&self, names: &[&str]) -> Result<f64> {
        if names.is_empty() {
            Ok(0.0)
        } else {
            self.entropy(names)
        }
    }

    fn disjoint(a: &[&str], b: &[&str]) -> Result<()> {
        if let Some(x) = a.iter().find(|x| b.contains(x)) {
            return Err(Error::Axis(format!("axis `{x}` appears on both sides")));
        }
        Ok(())
    }

    /// H(target | given) = H(target, given) - H(given).
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        Self::disjoint(target, given)?;
        let both: Vec<&str> = target.iter().chain(given).copied().collect();
        let h = self.entropy(&both)? - self.joint_entropy_or_zero(given)?;
        Ok(h.max(0.0))
    }

    /// I(a; b), clamped at zero against rounding.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        self.conditional_mutual_information(a, b, &[])
    }

    /// I(a; b | given).
    pub fn conditional_mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        given: &[&str],
    ) -> Result<f64> {
        Self::disjoint(a, b)?;
        Self::disjoint(a, given)?;
        Self::disjoint(b, given)?;
        let ag: Vec<&str> = a.iter().chain(given).copied().collect();
        let bg: Vec<&str> = b.iter().chain(given).copied().collect();
        let abg: Vec<&str> = a.iter().chain(b).chain(given).copied().collect();
        let i = self.joint_entropy_or_zero(&ag)? + self.joint_entropy_or_zero(&bg)?
            - self.entropy(&abg)?
            - self.joint_entropy_or_zero(given)?;
        Ok(i.max(0.0))
    }

    /// Independent product; axis names must not collide.
    pub fn product(&self, other: &JointPmf) -> Result<JointPmf> {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        let mut table = Vec::with_capacity(self.table.len() * other.table.len());
        for &p in &self.table {
            for &r in &other.table {
                table.push(p * r);
            }
        }
        JointPmf::new(axes, table)
    }

    /// Extends the joint with the channel's target axes:
    /// `p(x, y) = p(x) * channel(y | given(x))`.
    pub fn compose(&self, channel: &ConditionalPmf) -> Result<JointPmf> {
        let given_pos = channel
            .given
            .iter()
            .map(|a| {
                let i = self.axis_index(&a.name)?;
                if self.axes[i].size != a.size {
                    return Err(Error::Axis(format!(
                        "axis `{}` has size {} but the channel expects {}",
                        a.name, self.axes[i].size, a.size
                    )));
                }
                Ok(i)
            })
            .collect::<Result<Vec<_>>>()?;
        for t in &channel.target {
            if self.axis_index(&t.name).is_ok() {
                return Err(Error::Axis(format!("target axis `{}` already present", t.name)));
            }
        }
        let given_strides = strides(&channel.given);
        let tsize = channel.target_cells();
        let mut table = Vec::with_capacity(self.table.len() * tsize);
        self.for_each(|idx, p| {
            let g: usize = given_pos.iter().zip(&given_strides).map(|(&i, s)| idx[i] * s).sum();
            let row = &channel.table[g * tsize..(g + 1) * tsize];
            table.extend(row.iter().map(|w| p * w));
        });
        let mut axes = self.axes.clone();
        axes.extend(channel.target.iter().cloned());
        JointPmf::new(axes, table)
    }

    /// Appends an axis `name` holding `f` of the `sources` axes.
    pub fn pushforward(
        &self,
        sources: &[&str],
        name: &str,
        size: usize,
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<JointPmf> {
        let pos = self.positions(sources)?;
        if self.axis_index(name).is_ok() {
            return Err(Error::Axis(format!("axis `{name}` already present")));
        }
        let mut table = vec![0.0; self.table.len() * size];
        let mut args = vec![0; pos.len()];
        let mut bad = None;
        self.for_each(|idx, p| {
            for (a, &i) in args.iter_mut().zip(&pos) {
                *a = idx[i];
            }
            let v = f(&args);
            if v >= size {
                bad = Some(v);
                return;
            }
            let flat = idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.size + i);
            table[flat * size + v] = p;
        });
        if let Some(v) = bad {
            return Err(Error::Axis(format!("map value {v} outside new axis of size {size}")));
        }
        let mut axes = self.axes.clone();
        axes.push(Axis::new(name, size));
        JointPmf::new(axes, table)
    }

    /// Conditional law of `target` given `given`. Slices whose conditioning
    /// event has probability zero are filled with the uniform distribution.
    pub fn conditional(&self, target: &[&str], given: &[&str]) -> Result<ConditionalPmf> {
        Self::disjoint(target, given)?;
        let names: Vec<&str> = given.iter().chain(target).copied().collect();
        let m = self.marginal(&names)?;
        let gaxes: Vec<Axis> = m.axes[..given.len()].to_vec();
        let taxes: Vec<Axis> = m.axes[given.len()..].to_vec();
        let tsize: usize = taxes.iter().map(|a| a.size).product();
        let mut table = m.table;
        for row in table.chunks_mut(tsize) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|p| *p /= s);
            } else {
                row.iter_mut().for_each(|p| *p = 1.0 / tsize as f64);
            }
        }
        ConditionalPmf::new(gaxes, taxes, table)
    }

    /// Relabels axis `name` by the permutation `perm` (old value -> new value).
    pub fn relabel(&self, name: &str, perm: &[usize]) -> Result<JointPmf> {
        let i = self.axis_index(name)?;
        let size = self.axes[i].size;
        let mut seen = vec![false; size];
        if perm.len() != size || perm.iter().any(|&p| p >= size || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Argument(format!("relabeling of `{name}` is not a permutation")));
        }
        let st = strides(&self.axes);
        let mut table = vec![0.0; self.table.len()];
        self.for_each(|idx, p| {
            let flat: usize = idx
                .iter()
                .enumerate()
                .map(|(j, &v)| if j == i { perm[v] } else { v } * st[j])
                .sum();
            table[flat] = p;
        });
        Ok(JointPmf {
            axes: self.axes.clone(),
            table,
        })
    }

    /// Renames an axis.
    pub fn rename(&self, from: &str, to: &str) -> Result<JointPmf> {
        let i = self.axis_index(from)?;
        let mut axes = self.axes.clone();
        axes[i].name = to.to_string();
        JointPmf::new(axes, self.table.clone())
    }

    /// Largest absolute difference between two tables over identical axes.
    pub fn max_abs_diff(&self, other: &JointPmf) -> Result<f64> {
        if self.axes != other.axes {
            return Err(Error::Axis("tables have different axes".into()));
        }
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Conditional table `p(target | given)`, one normalized slice per given
/// index tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPmf {
    given: Vec<Axis>,
    target: Vec<Axis>,
    table: Vec<f64>,
}

impl ConditionalPmf {
    pub fn new(given: Vec<Axis>, target: Vec<Axis>, table: Vec<f64>) -> Result<Self> {
        let gcells: usize = given.iter().map(|a| a.size).product();
        let tcells: usize = target.iter().map(|a| a.size).product();
        if table.len() != gcells * tcells {
            return Err(Error::Validation(format!(
                "conditional table has {} entries, expected {}",
                table.len(),
                gcells * tcells
            )));
        }
        for (g, row) in table.chunks(tcells.max(1)).enumerate() {
            if let Some(bad) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(Error::Validation(format!("row {g}: invalid probability {bad}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::Validation(format!("row {g} sums to {s}, not 1")));
            }
        }
        Ok(Self {
            given,
            target,
            table,
        })
    }

    pub fn given(&self) -> &[Axis] {
        &self.given
    }

    pub fn target(&self) -> &[Axis] {
        &self.target
    }

    pub fn target_cells(&self) -> usize {
        self.target.iter().map(|a| a.size).product()
    }

    /// The slice `p(. | given)` for a flat given index.
    pub fn row(&self, given_flat: usize) -> &[f64] {
        let t = self.target_cells();
        &self.table[given_flat * t..(given_flat + 1) * t]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Robust typicality against a flat pmf, expressed as admissible count
/// ranges so a length-`n` sequence can be checked from its histogram.
#[derive(Debug, Clone)]
pub struct TypicalityTest {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: usize,
}

impl TypicalityTest {
    pub fn new(p: &[f64], n: usize, eta: f64) -> Self {
        // Slack absorbs rounding when a count sits exactly on a boundary.
        let slack = 1e-9;
        let nf = n as f64;
        let lo = p.iter().map(|&pa| nf * pa * (1.0 - eta) - slack).collect();
        let hi = p
            .iter()
            .map(|&pa| if pa > 0.0 { nf * pa * (1.0 + eta) + slack } else { 0.0 })
            .collect();
        Self { lo, hi, n }
    }

    pub fn cells(&self) -> usize {
        self.lo.len()
    }

    /// Checks a histogram of a length-`n` sequence.
    #[inline]
    pub fn accepts_counts(&self, counts: &[u32]) -> bool {
        counts.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&c, (&lo, &hi))| {
            let c = c as f64;
            c >= lo && c <= hi
        })
    }

    pub fn accepts(&self, seq: &[usize]) -> bool {
        if seq.len() != self.n {
            return false;
        }
        let mut counts = vec![0u32; self.cells()];
        for &s in seq {
            match counts.get_mut(s) {
                Some(c) => *c += 1,
                None => return false,
            }
        }
        self.accepts_counts(&counts)
    }
}

/// True iff `|nu(a) - p(a)| <= eta p(a)` for every symbol, where `nu` is the
/// empirical distribution of `seq`; symbols outside the support of `p` must
/// not occur.
pub fn is_typical(seq: &[usize], p: &[f64], eta: f64) -> bool {
    TypicalityTest::new(p, seq.len(), eta).accepts(seq)
}

/// Joint robust typicality of parallel sequences, one per axis of `p` in
/// axis order.
pub fn is_jointly_typical(seqs: &[&[usize]], p: &JointPmf, eta: f64) -> bool {
    if seqs.len() != p.axes.len() || seqs.is_empty() {
        return false;
    }
    let n = seqs[0].len();
    if seqs.iter().any(|s| s.len() != n) {
        return false;
    }
    let mut flat = Vec::with_capacity(n);
    for t in 0..n {
        let mut f = 0;
        for (s, a) in seqs.iter().zip(&p.axes) {
            if s[t] >= a.size {
                return false;
            }
            f = f * a.size + s[t];
        }
        flat.push(f);
    }
    is_typical(&flat, &p.table, eta)
}

/// Exact size of the robust typical set of length-`n` sequences, counted by
/// exhaustive enumeration of all `|A|^n` sequences.
pub fn typical_set_size(p: &[f64], n: usize, eta: f64, budget_bits: u32) -> Result<u64> {
    let a = p.len();
    if a == 0 {
        return Err(Error::Argument("empty alphabet".into()));
    }
    check_budget(n as f64 * (a as f64).log2(), budget_bits)?;
    let test = TypicalityTest::new(p, n, eta);
    let mut seq = vec![0usize; n];
    let mut counts = vec![0u32; a];
    counts[0] = n as u32;
    let mut total = 0u64;
    loop {
        if test.accepts_counts(&counts) {
            total += 1;
        }
        // odometer step, maintaining the histogram
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(total);
            }
            j -= 1;
            counts[seq[j]] -= 1;
            seq[j] += 1;
            if seq[j] < a {
                counts[seq[j]] += 1;
                break;
            }
            seq[j] = 0;
            counts[0] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_examples() {
        let u5 = JointPmf::uniform("A", 5).unwrap();
        assert!(close(u5.entropy(&["A"]).unwrap(), 5f64.log2(), 1e-12));
        assert!(close(u5.entropy(&["A"]).unwrap(), 2.3219, 1e-4));
        let point = JointPmf::single("A", vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(point.entropy(&["A"]).unwrap(), 0.0);
        // closed form h_b(0.1) = -0.1 log 0.1 - 0.9 log 0.9
        let hb = -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2());
        let bern = JointPmf::single("A", vec![0.9, 0.1]).unwrap();
        assert!(close(bern.entropy(&["A"]).unwrap(), hb, 1e-12));
        assert!(close(hb, 0.4690, 1e-4));
        assert!(matches!(bern.entropy(&["B"]), Err(Error::Axis(_))));
    }

    #[test]
    fn construction_validation() {
        assert!(JointPmf::single("A", vec![0.5, 0.4]).is_err());
        assert!(JointPmf::single("A", vec![1.5, -0.5]).is_err());
        assert!(JointPmf::new(vec![Axis::new("A", 1), Axis::new("A", 1)], vec![1.0]).is_err());
        assert!(ConditionalPmf::new(vec![Axis::new("X", 2)], vec![Axis::new("Y", 2)], vec![0.5, 0.5, 0.9, 0.0]).is_err());
    }

    #[test]
    fn conditional_entropy_examples() {
        let a = JointPmf::single("A", vec![0.3, 0.7]).unwrap();
        let b = JointPmf::single("B", vec![0.2, 0.5, 0.3]).unwrap();
        let ab = a.product(&b).unwrap();
        assert!(close(
            ab.conditional_entropy(&["A"], &["B"]).unwrap(),
            ab.entropy(&["A"]).unwrap(),
            1e-12
        ));
        let f = ab.pushforward(&["B"], "F", 2, |v| v[0] % 2).unwrap();
        assert!(close(f.conditional_entropy(&["F"], &["B"]).unwrap(), 0.0, 1e-12));
        assert!(matches!(ab.conditional_entropy(&["A"], &["A"]), Err(Error::Axis(_))));
    }

    /// Z = V1 + 2 V2 mod 3 with uniform V's, Y = BSC(0.1) of 1{Z != 0}.
    #[test]
    fn ternary_weighted_sum_conditional_entropy() {
        // Independent oracle: explicit 3x2 table p(z, y).
        let mut pzy = [[0.0f64; 2]; 3];
        for v1 in 0..3 {
            for v2 in 0..3 {
                let z = (v1 + 2 * v2) % 3;
                let w = usize::from(v1 != v2);
                for y in 0..2 {
                    let pyw = if y == w { 0.9 } else { 0.1 };
                    pzy[z][y] += pyw / 9.0;
                }
            }
        }
        let py: Vec<f64> = (0..2).map(|y| pzy.iter().map(|r| r[y]).sum()).collect();
        let hzy = entropy_bits(&pzy.concat()) - entropy_bits(&py);
        assert!(close(hzy, 1.1059, 1e-4), "{hzy}");

        let v = JointPmf::uniform("V1", 3)
            .unwrap()
            .product(&JointPmf::uniform("V2", 3).unwrap())
            .unwrap();
        let ch = ConditionalPmf::new(
            vec![Axis::new("V1", 3), Axis::new("V2", 3)],
            vec![Axis::new("Y", 2)],
            (0..9)
                .flat_map(|i| if i / 3 != i % 3 { [0.1, 0.9] } else { [0.9, 0.1] })
                .collect(),
        )
        .unwrap();
        let j = v
            .compose(&ch)
            .unwrap()
            .pushforward(&["V1", "V2"], "Z", 3, |v| (v[0] + 2 * v[1]) % 3)
            .unwrap();
        assert!(close(j.conditional_entropy(&["Z"], &["Y"]).unwrap(), hzy, 1e-12));
    }

    #[test]
    fn mutual_information_examples() {
        let ab = JointPmf::uniform("A", 2)
            .unwrap()
            .product(&JointPmf::uniform("B", 4).unwrap())
            .unwrap();
        assert!(close(ab.mutual_information(&["A"], &["B"]).unwrap(), 0.0, 1e-12));
        let same = JointPmf::new(
            vec![Axis::new("A", 2), Axis::new("B", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        assert!(close(same.mutual_information(&["A"], &["B"]).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn symmetric_capacity_of_noisy_pentary_channel() {
        // W uniform on F_5, Y in {0,2,4}: odd W scatter uniformly, even W
        // are received correctly w.p. 0.9.
        let mut rows = Vec::new();
        for w in 0..5 {
            if w % 2 == 1 {
                rows.extend([1.0 / 3.0; 3]);
            } else {
                let mut r = [0.05; 3];
                r[w / 2] = 0.9;
                rows.extend(r);
            }
        }
        let ch = ConditionalPmf::new(vec![Axis::new("W", 5)], vec![Axis::new("Y", 3)], rows).unwrap();
        let j = JointPmf::uniform("W", 5).unwrap().compose(&ch).unwrap();
        assert!(close(j.mutual_information(&["W"], &["Y"]).unwrap(), 0.6096, 5e-5));
    }

    #[test]
    fn compose_and_marginalize() {
        let x = JointPmf::single("X", vec![0.2, 0.3, 0.5]).unwrap();
        let det = ConditionalPmf::new(
            vec![Axis::new("X", 3)],
            vec![Axis::new("Y", 2)],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        let j = x.compose(&det).unwrap();
        assert!(close(j.conditional_entropy(&["Y"], &["X"]).unwrap(), 0.0, 1e-12));
        assert!(j.marginal(&["X"]).unwrap().max_abs_diff(&x).unwrap() < 1e-12);
        let bad = ConditionalPmf::new(vec![Axis::new("Q", 3)], vec![Axis::new("Y", 1)], vec![1.0; 3]).unwrap();
        assert!(matches!(x.compose(&bad), Err(Error::Axis(_))));
    }

    #[test]
    fn pushforward_examples() {
        let a = JointPmf::single("A", vec![0.1, 0.6, 0.3]).unwrap();
        let dup = a.pushforward(&["A"], "B", 3, |v| v[0]).unwrap();
        assert!(close(dup.conditional_entropy(&["B"], &["A"]).unwrap(), 0.0, 1e-12));

        let bits = JointPmf::uniform("X", 2).unwrap().product(&JointPmf::uniform("Y", 2).unwrap()).unwrap();
        let x = bits.pushforward(&["X", "Y"], "Z", 2, |v| v[0] ^ v[1]).unwrap();
        assert!(close(x.entropy(&["Z"]).unwrap(), 1.0, 1e-12));

        // V1, V2 uniform on {0,2} in F_5: enumerate the 4 equally likely cases.
        let mut oracle = [0.0; 5];
        for v1 in [0, 2] {
            for v2 in [0, 2] {
                oracle[(v1 + v2) % 5] += 0.25;
            }
        }
        let half = vec![0.5, 0.0, 0.5, 0.0, 0.0];
        let v = JointPmf::single("V1", half.clone()).unwrap().product(&JointPmf::single("V2", half).unwrap()).unwrap();
        let z = v.pushforward(&["V1", "V2"], "Z", 5, |v| (v[0] + v[1]) % 5).unwrap();
        assert_eq!(z.marginal(&["Z"]).unwrap().table(), &oracle);
        assert_eq!(oracle, [0.25, 0.0, 0.5, 0.0, 0.25]);
    }

    #[test]
    fn typicality_examples() {
        let p = [0.25, 0.5, 0.25];
        assert!(is_typical(&[0, 1, 1, 2], &p, 1e-6));
        assert!(is_typical(&[0, 1, 1, 2, 3], &[0.2, 0.4, 0.2, 0.2, 0.0], 0.5));
        assert!(!is_typical(&[0, 1, 1, 2, 4], &[0.2, 0.4, 0.2, 0.2, 0.0], 0.5));
        assert!(!is_typical(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 0], &[0.5, 0.5], 0.2));
        let j = JointPmf::new(vec![Axis::new("A", 2), Axis::new("B", 2)], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(is_jointly_typical(&[&[0, 1], &[0, 1]], &j, 0.1));
        assert!(!is_jointly_typical(&[&[0, 1], &[1, 1]], &j, 0.1));
    }

    #[test]
    fn typical_set_size_examples() {
        assert_eq!(typical_set_size(&[1.0, 0.0], 8, 0.1, 24).unwrap(), 1);
        assert_eq!(typical_set_size(&[0.5, 0.5], 10, 10.0, 24).unwrap(), 1024);
        let n = 10;
        let eta = 0.1;
        let p = [0.7, 0.3];
        let count = typical_set_size(&p, n, eta, 24).unwrap();
        let bound = 2f64.powf(n as f64 * (entropy_bits(&p) + 3.0 * eta));
        assert!(count as f64 <= bound);
        // independent brute force over all 1024 bit patterns
        let brute = (0u32..1 << n)
            .filter(|x| {
                let ones = x.count_ones() as f64 / n as f64;
                (ones - 0.3).abs() <= eta * 0.3 && ((1.0 - ones) - 0.7).abs() <= eta * 0.7 + 1e-12
            })
            .count() as u64;
        assert_eq!(count, brute);
        assert!(matches!(typical_set_size(&[0.5, 0.5], 30, 0.1, 24), Err(Error::Budget { .. })));
    }

    fn random_pmf(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        let mut v: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let fix: f64 = v[1..].iter().sum();
        v[0] = 1.0 - fix;
        v
    }

    proptest! {
        #[test]
        fn chain_rule_and_nonnegative_information(raw in prop::collection::vec(0.01f64..1.0, 12)) {
            let p = JointPmf::new(vec![Axis::new("A", 3), Axis::new("B", 4)], random_pmf(&raw)).unwrap();
            let hab = p.entropy(&["A", "B"]).unwrap();
            let ha = p.entropy(&["A"]).unwrap();
            let hb_a = p.conditional_entropy(&["B"], &["A"]).unwrap();
            prop_assert!((hab - ha - hb_a).abs() < IDENTITY_TOLERANCE);
            prop_assert!(p.mutual_information(&["A"], &["B"]).unwrap() >= 0.0);
            let a = p.marginal(&["A"]).unwrap();
            let b = p.marginal(&["B"]).unwrap();
            let prod = a.product(&b).unwrap();
            prop_assert!(prod.mutual_information(&["A"], &["B"]).unwrap() < IDENTITY_TOLERANCE);
        }

        #[test]
        fn compose_preserves_channel(raw in prop::collection::vec(0.0f64..1.0, 6), wraw in prop::collection::vec(0.01f64..1.0, 6)) {
            prop_assume!(raw.iter().sum::<f64>() > 0.1);
            let input = JointPmf::new(vec![Axis::new("V", 2), Axis::new("X", 3)], random_pmf(&raw)).unwrap();
            let w: Vec<f64> = wraw.chunks(2).flat_map(random_pmf).collect();
            let ch = ConditionalPmf::new(vec![Axis::new("X", 3)], vec![Axis::new("Y", 2)], w.clone()).unwrap();
            let j = input.compose(&ch).unwrap();
            let back = j.conditional(&["Y"], &["V", "X"]).unwrap();
            for v in 0..2 {
                for x in 0..3 {
                    if input.prob(&[v, x]) > 0.0 {
                        for y in 0..2 {
                            prop_assert!((back.row(v * 3 + x)[y] - w[x * 2 + y]).abs() < 1e-9);
                        }
                    }
                }
            }
        }

        #[test]
        fn typical_set_obeys_exponential_bound(p0 in 0.05f64..0.95, n in 1usize..=12, eta in 0.01f64..0.5) {
            let p = [p0, 1.0 - p0];
            let count = typical_set_size(&p, n, eta, 24).unwrap();
            prop_assert!(count as f64 <= 2f64.powf(n as f64 * (entropy_bits(&p) + 3.0 * eta)));
        }
    }
}
