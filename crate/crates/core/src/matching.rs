//! Maximum-weight assignment of clients to webpage slots.
//!
//! Each client takes at most one slot and each slot at most one client. Pairs
//! marked ineligible carry [`INELIGIBLE`] and are never used; edges with
//! weight `<= 0` are never chosen, so leaving everything empty is always
//! admissible and the optimum is nonnegative.
//!
//! For up to [`SUBSET_DP_MAX_SLOTS`] slots the solver is an exact dynamic
//! program over clients and sets of used slots. Totals are accumulated in
//! client order, which makes the result bit-identical to brute-force
//! enumeration. Wider pages fall back to the Hungarian algorithm.
//!
//! Tie-breaking: among optimal matchings, a lower-index client keeps a slot
//! rather than ceding it to a higher-index client with equal gain, and the
//! final set of occupied slots is the lowest in binary order.

use serde::Serialize;

use crate::error::{Error, Result};

/// Weight of a pair that may not be matched.
pub const INELIGIBLE: f64 = f64::NEG_INFINITY;

/// Largest `L` handled by the subset dynamic program.
pub const SUBSET_DP_MAX_SLOTS: usize = 12;

/// Guard on the number of partial matchings visited by
/// [`enumerate_assignments`].
pub const ENUMERATION_LIMIT: usize = 2_000_000;

/// Dense `clients x slots` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    clients: usize,
    slots: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    /// All pairs start ineligible.
    pub fn new(clients: usize, slots: usize) -> Self {
        WeightMatrix {
            clients,
            slots,
            w: vec![INELIGIBLE; clients * slots],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let clients = rows.len();
        let slots = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(clients, slots);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), slots, "ragged weight matrix");
            for (s, &x) in row.iter().enumerate() {
                m.set(i, s, x);
            }
        }
        m
    }

    #[inline]
    pub fn clients(&self) -> usize {
        self.clients
    }

    #[inline]
    pub fn slots(&self) -> usize {
        self.slots
    }

    #[inline]
    pub fn get(&self, i: usize, s: usize) -> f64 {
        self.w[i * self.slots + s]
    }

    #[inline]
    pub fn set(&mut self, i: usize, s: usize, x: f64) {
        self.w[i * self.slots + s] = x;
    }

    #[inline]
    pub fn is_eligible(&self, i: usize, s: usize) -> bool {
        self.get(i, s) != INELIGIBLE
    }

    pub fn fill_ineligible(&mut self) {
        self.w.fill(INELIGIBLE);
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for x in &mut out.w {
            if *x != INELIGIBLE {
                *x *= k;
            }
        }
        out
    }
}

/// A matching, stored as the slot held by each client.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Assignment {
    pub slot_of: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(clients: usize) -> Self {
        Assignment {
            slot_of: vec![None; clients],
        }
    }

    /// `(client, slot)` pairs in client order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.slot_of
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
    }

    pub fn is_empty(&self) -> bool {
        self.slot_of.iter().all(Option::is_none)
    }

    /// Dense 0/1 matrix `assign[i][s]`.
    pub fn to_matrix(&self, slots: usize) -> Vec<Vec<u8>> {
        self.slot_of
            .iter()
            .map(|s| {
                let mut row = vec![0u8; slots];
                if let Some(s) = s {
                    row[*s] = 1;
                }
                row
            })
            .collect()
    }

    /// Sum of matched weights, accumulated in client order.
    pub fn total(&self, w: &WeightMatrix) -> f64 {
        self.pairs().fold(0.0, |acc, (i, s)| acc + w.get(i, s))
    }

    /// One slot per client, one client per slot, eligible pairs only.
    pub fn is_valid_for(&self, w: &WeightMatrix) -> bool {
        let mut used = vec![false; w.slots()];
        self.slot_of.len() == w.clients()
            && self.pairs().all(|(i, s)| {
                s < w.slots() && w.is_eligible(i, s) && !std::mem::replace(&mut used[s], true)
            })
    }
}

/// Reusable solver. Keeps its scratch buffers between calls so that the
/// per-slot matching in a simulation does not allocate.
#[derive(Debug, Default, Clone)]
pub struct Matcher {
    value: Vec<f64>,
    choice: Vec<u8>,
}

const SKIP: u8 = u8::MAX;

impl Matcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves into `out` and returns the total weight.
    pub fn solve_into(&mut self, w: &WeightMatrix, out: &mut Assignment) -> f64 {
        out.slot_of.clear();
        out.slot_of.resize(w.clients(), None);
        if w.slots() <= SUBSET_DP_MAX_SLOTS {
            self.subset_dp(w, out)
        } else {
            *out = hungarian(w);
            out.total(w)
        }
    }

    pub fn solve(&mut self, w: &WeightMatrix) -> (Assignment, f64) {
        let mut out = Assignment::default();
        let total = self.solve_into(w, &mut out);
        (out, total)
    }

    fn subset_dp(&mut self, w: &WeightMatrix, out: &mut Assignment) -> f64 {
        let (n, l) = (w.clients(), w.slots());
        let width = 1usize << l;
        self.value.clear();
        self.value.resize((n + 1) * width, f64::NEG_INFINITY);
        self.choice.clear();
        self.choice.resize((n + 1) * width, SKIP);
        self.value[0] = 0.0;

        for i in 0..n {
            let (cur, next) = self.value.split_at_mut((i + 1) * width);
            let cur = &cur[i * width..];
            let next = &mut next[..width];
            let choice = &mut self.choice[(i + 1) * width..(i + 2) * width];
            // Skipping the client first, so a strict improvement is needed to
            // take a slot away from an earlier client.
            next.copy_from_slice(cur);
            for mask in 0..width {
                let base = cur[mask];
                if base == f64::NEG_INFINITY {
                    continue;
                }
                for s in 0..l {
                    let bit = 1 << s;
                    if mask & bit != 0 {
                        continue;
                    }
                    let x = w.get(i, s);
                    if !(x > 0.0) {
                        continue;
                    }
                    let cand = base + x;
                    let to = mask | bit;
                    if cand > next[to] {
                        next[to] = cand;
                        choice[to] = s as u8;
                    }
                }
            }
        }

        let last = &self.value[n * width..];
        let mut best_mask = 0;
        for mask in 1..width {
            if last[mask] > last[best_mask] {
                best_mask = mask;
            }
        }
        let total = last[best_mask];

        let mut mask = best_mask;
        for i in (0..n).rev() {
            let c = self.choice[(i + 1) * width + mask];
            if c != SKIP {
                out.slot_of[i] = Some(c as usize);
                mask &= !(1 << c);
            }
        }
        total
    }
}

/// Maximum-weight matching over eligible pairs with positive weight.
pub fn max_weight_assignment(w: &WeightMatrix) -> (Assignment, f64) {
    Matcher::new().solve(w)
}

/// Hungarian algorithm on the positive-weight eligible subgraph. Used for
/// pages wider than the subset program handles.
pub fn hungarian(w: &WeightMatrix) -> Assignment {
    let l = w.slots();
    let rows: Vec<usize> = (0..w.clients())
        .filter(|&i| (0..l).any(|s| w.get(i, s) > 0.0))
        .collect();
    let mut out = Assignment::empty(w.clients());
    let n = rows.len();
    if n == 0 {
        return out;
    }
    let m = n.max(l);
    let cost = |r: usize, c: usize| -> f64 {
        if r > n || c > l {
            return 0.0;
        }
        let x = w.get(rows[r - 1], c - 1);
        if x > 0.0 {
            -x
        } else {
            0.0
        }
    };

    // Potentials u (rows), v (columns); p[c] is the row matched to column c.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for r in 1..=n {
        p[0] = r;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    for c in 1..=l {
        let r = p[c];
        if r >= 1 && r <= n {
            let i = rows[r - 1];
            if w.get(i, c - 1) > 0.0 {
                out.slot_of[i] = Some(c - 1);
            }
        }
    }
    out
}

/// Exhaustive search over every partial matching of eligible pairs. Test
/// oracle; fails with [`Error::TooLarge`] beyond [`ENUMERATION_LIMIT`] nodes.
pub fn enumerate_assignments(w: &WeightMatrix) -> Result<(Assignment, f64)> {
    struct Search<'a> {
        w: &'a WeightMatrix,
        used: Vec<bool>,
        cur: Vec<Option<usize>>,
        best: Vec<Option<usize>>,
        best_total: f64,
        visited: usize,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, acc: f64) -> Result<()> {
            self.visited += 1;
            if self.visited > ENUMERATION_LIMIT {
                return Err(Error::TooLarge {
                    what: "matching enumeration",
                    size: self.visited,
                    limit: ENUMERATION_LIMIT,
                });
            }
            if i == self.w.clients() {
                if acc > self.best_total {
                    self.best_total = acc;
                    self.best.clone_from(&self.cur);
                }
                return Ok(());
            }
            self.go(i + 1, acc)?;
            for s in 0..self.w.slots() {
                if self.used[s] || !self.w.is_eligible(i, s) {
                    continue;
                }
                self.used[s] = true;
                self.cur[i] = Some(s);
                self.go(i + 1, acc + self.w.get(i, s))?;
                self.cur[i] = None;
                self.used[s] = false;
            }
            Ok(())
        }
    }

    let mut search = Search {
        w,
        used: vec![false; w.slots()],
        cur: vec![None; w.clients()],
        best: vec![None; w.clients()],
        best_total: 0.0,
        visited: 0,
    };
    search.go(0, 0.0)?;
    Ok((
        Assignment {
            slot_of: search.best,
        },
        search.best_total,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two() {
        let w = WeightMatrix::from_rows(&[vec![3.0, 1.0], vec![2.0, 2.0]]);
        let (a, total) = max_weight_assignment(&w);
        assert_eq!(a.slot_of, vec![Some(0), Some(1)]);
        assert_eq!(total, 5.0);
        assert_eq!(enumerate_assignments(&w).unwrap().1, 5.0);
    }

    #[test]
    fn negative_weights_post_nothing() {
        let w = WeightMatrix::from_rows(&[vec![-1.0, -0.5], vec![-2.0, -0.1]]);
        let (a, total) = max_weight_assignment(&w);
        assert!(a.is_empty());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn single_edge() {
        let w = WeightMatrix::from_rows(&[vec![0.4]]);
        assert_eq!(
            max_weight_assignment(&w),
            (
                Assignment {
                    slot_of: vec![Some(0)]
                },
                0.4
            )
        );
    }

    #[test]
    fn oracle_edge_cases() {
        let w = WeightMatrix::new(3, 2);
        assert_eq!(enumerate_assignments(&w).unwrap().1, 0.0);
        assert!(enumerate_assignments(&w).unwrap().0.is_empty());
        let mut w = WeightMatrix::new(2, 2);
        w.set(1, 0, -0.1);
        let (a, t) = enumerate_assignments(&w).unwrap();
        assert!(a.is_empty());
        assert_eq!(t, 0.0);
    }

    #[test]
    fn oracle_guard() {
        let w = WeightMatrix::from_rows(&vec![vec![1.0; 12]; 12]);
        assert!(matches!(
            enumerate_assignments(&w),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn ties_favour_lower_client_then_lower_slot() {
        let w = WeightMatrix::from_rows(&[vec![1.0], vec![1.0]]);
        assert_eq!(max_weight_assignment(&w).0.slot_of, vec![Some(0), None]);
        let w = WeightMatrix::from_rows(&[vec![1.0, 1.0]]);
        assert_eq!(max_weight_assignment(&w).0.slot_of, vec![Some(0)]);
    }

    #[test]
    fn zero_weight_edges_are_not_used() {
        let w = WeightMatrix::from_rows(&[vec![0.0, 0.0]]);
        assert!(max_weight_assignment(&w).0.is_empty());
    }

    #[test]
    fn oracle_agreement_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut m = Matcher::new();
        for _ in 0..10_000 {
            let n = rng.gen_range(1..=4);
            let l = rng.gen_range(1..=3);
            let mut w = WeightMatrix::new(n, l);
            for i in 0..n {
                for s in 0..l {
                    if rng.gen_bool(0.85) {
                        w.set(i, s, rng.gen_range(-1.0..=1.0));
                    }
                }
            }
            let (a, t) = m.solve(&w);
            assert!(a.is_valid_for(&w));
            assert_eq!(t, enumerate_assignments(&w).unwrap().1);
            assert_eq!(t, a.total(&w));
        }
    }

    #[test]
    fn hungarian_matches_subset_program() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..2000 {
            let n = rng.gen_range(1..=7);
            let l = rng.gen_range(1..=6);
            let mut w = WeightMatrix::new(n, l);
            for i in 0..n {
                for s in 0..l {
                    if rng.gen_bool(0.7) {
                        w.set(i, s, rng.gen_range(-1.0..=1.0));
                    }
                }
            }
            let h = hungarian(&w);
            assert!(h.is_valid_for(&w));
            let (_, t) = max_weight_assignment(&w);
            assert!((h.total(&w) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn wide_page_uses_hungarian() {
        let l = SUBSET_DP_MAX_SLOTS + 2;
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..l)
                    .map(|s| ((i * 7 + s * 3) % 11) as f64 - 2.0)
                    .collect()
            })
            .collect();
        let w = WeightMatrix::from_rows(&rows);
        let (a, t) = max_weight_assignment(&w);
        assert!(a.is_valid_for(&w));
        assert_eq!(t, 8.0 + 8.0 + 8.0);
    }

    fn weights() -> impl Strategy<Value = WeightMatrix> {
        (1usize..=4, 1usize..=3).prop_flat_map(|(n, l)| {
            proptest::collection::vec(proptest::option::weighted(0.85, -1.0..1.0f64), n * l)
                .prop_map(move |cells| {
                    let mut w = WeightMatrix::new(n, l);
                    for (k, c) in cells.into_iter().enumerate() {
                        if let Some(x) = c {
                            w.set(k / l, k % l, x);
                        }
                    }
                    w
                })
        })
    }

    proptest! {
        #[test]
        fn equals_oracle(w in weights()) {
            let (a, t) = max_weight_assignment(&w);
            prop_assert!(a.is_valid_for(&w));
            prop_assert!(t >= 0.0);
            prop_assert_eq!(t, enumerate_assignments(&w).unwrap().1);
        }

        #[test]
        fn scaling_keeps_argmax(w in weights(), k in 0.01..100.0f64) {
            prop_assert_eq!(max_weight_assignment(&w).0, max_weight_assignment(&w.scaled(k)).0);
        }

        #[test]
        fn raising_a_chosen_edge_keeps_it(w in weights()) {
            let (a, _) = max_weight_assignment(&w);
            for (i, s) in a.pairs() {
                let mut bumped = w.clone();
                bumped.set(i, s, w.get(i, s) + 1.0);
                prop_assert_eq!(max_weight_assignment(&bumped).0.slot_of[i], Some(s));
            }
        }
    }
}
