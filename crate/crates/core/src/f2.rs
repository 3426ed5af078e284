//! Dense linear algebra over GF(2): bit vectors, echelon bases, kernels and
//! subspace intersections. Spaces here are small (local cohomology has
//! dimension at most 6, global ambient spaces a few dozen bits), so plain
//! Gaussian elimination on `u64` words is all that is needed.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Low `len` bits of `x`, bit `i` at index `i`.
    pub fn from_u64(x: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut v = Self::zeros(len);
        if len > 0 {
            v.words[0] = if len == 64 { x } else { x & ((1 << len) - 1) };
        }
        v
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(i, true);
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &Self) -> Self {
        let mut v = self.clone();
        v.xor_assign(other);
        v
    }

    pub fn dot(&self, other: &Self) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum::<u32>()
            % 2
            == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut v = Self::zeros(self.len + other.len);
        for i in self.ones() {
            v.set(i, true);
        }
        for i in other.ones() {
            v.set(self.len + i, true);
        }
        v
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        let mut v = Self::zeros(end - start);
        for i in start..end {
            if self.get(i) {
                v.set(i - start, true);
            }
        }
        v
    }

    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A subspace held in reduced echelon form.
#[derive(Debug, Clone, Default)]
pub struct Echelon {
    dim_ambient: usize,
    rows: Vec<(usize, BitVec)>,
}

impl Echelon {
    pub fn new(dim_ambient: usize) -> Self {
        Self {
            dim_ambient,
            rows: Vec::new(),
        }
    }

    pub fn from_vectors<'a>(dim_ambient: usize, vs: impl IntoIterator<Item = &'a BitVec>) -> Self {
        let mut e = Self::new(dim_ambient);
        for v in vs {
            e.insert(v);
        }
        e
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn ambient(&self) -> usize {
        self.dim_ambient
    }

    fn reduce(&self, v: &BitVec) -> BitVec {
        let mut r = v.clone();
        for (pivot, row) in &self.rows {
            if r.get(*pivot) {
                r.xor_assign(row);
            }
        }
        r
    }

    /// Adds `v`; returns true if it enlarged the span.
    pub fn insert(&mut self, v: &BitVec) -> bool {
        debug_assert_eq!(v.len(), self.dim_ambient);
        let r = self.reduce(v);
        let Some(pivot) = r.first_one() else {
            return false;
        };
        for (_, row) in self.rows.iter_mut() {
            if row.get(pivot) {
                row.xor_assign(&r);
            }
        }
        let at = self.rows.partition_point(|(p, _)| *p < pivot);
        self.rows.insert(at, (pivot, r));
        true
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v).is_zero()
    }

    /// Reduced basis, sorted by pivot.
    pub fn basis(&self) -> Vec<BitVec> {
        self.rows.iter().map(|(_, r)| r.clone()).collect()
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.rows.iter().map(|(p, _)| *p).collect()
    }
}

pub fn rank(vs: &[BitVec]) -> usize {
    match vs.first() {
        None => 0,
        Some(v) => Echelon::from_vectors(v.len(), vs).dim(),
    }
}

/// Basis of `{x : row · x = 0 for every row}` in `F2^ncols`, one vector per
/// free column of the reduced row echelon form, in column order.
pub fn kernel(rows: &[BitVec], ncols: usize) -> Vec<BitVec> {
    let e = Echelon::from_vectors(ncols, rows);
    let pivots = e.pivots();
    let reduced = e.basis();
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut x = BitVec::unit(ncols, free);
        for (p, row) in pivots.iter().zip(&reduced) {
            if row.get(free) {
                x.set(*p, true);
            }
        }
        out.push(x);
    }
    out
}

/// Basis of the intersection of the spans of `a` and `b`.
pub fn intersection(a: &[BitVec], b: &[BitVec], ambient: usize) -> Vec<BitVec> {
    let ea = Echelon::from_vectors(ambient, a).basis();
    let eb = Echelon::from_vectors(ambient, b).basis();
    let (na, nb) = (ea.len(), eb.len());
    // columns of M are the vectors of ea then eb; find dependencies
    let mut rows = Vec::with_capacity(ambient);
    for i in 0..ambient {
        let mut r = BitVec::zeros(na + nb);
        for (j, v) in ea.iter().chain(&eb).enumerate() {
            if v.get(i) {
                r.set(j, true);
            }
        }
        rows.push(r);
    }
    let mut out = Echelon::new(ambient);
    for dep in kernel(&rows, na + nb) {
        let mut w = BitVec::zeros(ambient);
        for j in dep.ones().filter(|&j| j < na) {
            w.xor_assign(&ea[j]);
        }
        out.insert(&w);
    }
    out.basis()
}

/// `dim span(a) + dim span(b) − dim span(a ∪ b)`.
pub fn intersection_dim(a: &[BitVec], b: &[BitVec], ambient: usize) -> usize {
    let da = Echelon::from_vectors(ambient, a).dim();
    let db = Echelon::from_vectors(ambient, b).dim();
    let dab = Echelon::from_vectors(ambient, a.iter().chain(b)).dim();
    da + db - dab
}

/// Images `M·x` of each `x` where `columns[j]` is the image of the j-th unit
/// vector.
pub fn apply(columns: &[BitVec], x: &BitVec, out_len: usize) -> BitVec {
    let mut y = BitVec::zeros(out_len);
    for j in x.ones() {
        y.xor_assign(&columns[j]);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(bits: &str) -> BitVec {
        BitVec::from_bits(&bits.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn echelon_insert_and_contains() {
        let mut e = Echelon::new(4);
        assert!(e.insert(&v("1100")));
        assert!(e.insert(&v("0110")));
        assert!(!e.insert(&v("1010")));
        assert!(e.contains(&v("0000")));
        assert!(!e.contains(&v("0001")));
        assert_eq!(e.dim(), 2);
    }

    #[test]
    fn kernel_small() {
        let rows = [v("110"), v("011")];
        let k = kernel(&rows, 3);
        assert_eq!(k, vec![v("111")]);
        assert_eq!(kernel(&[], 2).len(), 2);
    }

    #[test]
    fn intersection_small() {
        let a = [v("1000"), v("0100")];
        let b = [v("1100"), v("0010")];
        let i = intersection(&a, &b, 4);
        assert_eq!(i, vec![v("1100")]);
        assert_eq!(intersection_dim(&a, &b, 4), 1);
    }

    #[test]
    fn wide_vectors() {
        let mut x = BitVec::zeros(130);
        x.set(129, true);
        x.set(3, true);
        assert_eq!(x.ones().collect::<Vec<_>>(), vec![3, 129]);
        assert_eq!(x.first_one(), Some(3));
        let y = x.concat(&BitVec::unit(5, 1));
        assert_eq!(y.len(), 135);
        assert!(y.get(131));
        assert_eq!(y.slice(130, 135), BitVec::unit(5, 1));
    }

    fn arb_rows(n: usize, m: usize) -> impl Strategy<Value = Vec<BitVec>> {
        prop::collection::vec(prop::collection::vec(any::<bool>(), m), 0..n)
            .prop_map(|rows| rows.iter().map(|r| BitVec::from_bits(r)).collect())
    }

    proptest! {
        #[test]
        fn kernel_is_annihilated_and_rank_nullity(rows in arb_rows(8, 10)) {
            let k = kernel(&rows, 10);
            for x in &k {
                for r in &rows {
                    prop_assert!(!r.dot(x));
                }
            }
            prop_assert_eq!(rank(&k), k.len());
            prop_assert_eq!(k.len() + rank(&rows), 10);
        }

        #[test]
        fn intersection_lies_in_both(a in arb_rows(5, 7), b in arb_rows(5, 7)) {
            let i = intersection(&a, &b, 7);
            let ea = Echelon::from_vectors(7, &a);
            let eb = Echelon::from_vectors(7, &b);
            for w in &i {
                prop_assert!(ea.contains(w) && eb.contains(w));
            }
            prop_assert_eq!(i.len(), intersection_dim(&a, &b, 7));
        }
    }
}
