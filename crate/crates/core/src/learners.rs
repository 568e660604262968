//! Non-neural predictors: reference baselines (constant-zero, averaging,
//! nearest neighbors) and exact learning oracles (literal elimination for
//! conjunctions/disjunctions, Gaussian elimination over GF(2) for parities).
//!
//! Every learner is a pure function of a labeled prefix and a query point:
//! given `(x_1, y_1), …, (x_k, y_k)` it predicts a label for the next input.
//! [`Learner::predict_sequence`] runs that prediction online over a whole
//! prompt; implementations may carry incremental state across positions, but
//! must agree with the naive per-position form (see tests).

use crate::bits::{cmp_cosine, BitVec};
use crate::boolfn::Literal;
use crate::{Error, Result};

/// Neighbor counts the evaluation harness tunes over for the nearest-neighbor
/// baseline.
pub const KNN_NEIGHBOR_GRID: [usize; 3] = [1, 3, 5];

/// An online predictor over labeled binary examples.
///
/// Predictions are causal: the label for position `k` depends only on the
/// first `k` labeled pairs and the query point, never on later positions.
pub trait Learner: Send + Sync {
    /// Short identifier used in reports and CLI output.
    fn name(&self) -> String;

    /// Predict the label of `query` from a labeled prefix.
    fn predict(&self, prefix: &[(BitVec, u8)], query: &BitVec) -> u8;

    /// Online scan over one prompt: `out[k]` is the prediction for `xs[k]`
    /// given the first `k` labeled pairs. The default builds the prefix
    /// incrementally and calls [`Learner::predict`] at each position.
    fn predict_sequence(&self, xs: &[BitVec], ys: &[u8]) -> Vec<u8> {
        assert_eq!(xs.len(), ys.len(), "xs/ys length mismatch");
        let mut prefix: Vec<(BitVec, u8)> = Vec::with_capacity(xs.len());
        let mut out = Vec::with_capacity(xs.len());
        for (x, &y) in xs.iter().zip(ys) {
            out.push(self.predict(&prefix, x));
            prefix.push((x.clone(), y));
        }
        out
    }
}

/// Construct a learner from its CLI name.
///
/// Accepted names: `null`, `avg` (alias `averaging`), `knn` (alias `nn`,
/// optionally suffixed with a neighbor count as in `knn5`), `pac-conj`,
/// `pac-disj`, `gf2`.
pub fn by_name(name: &str) -> Result<Box<dyn Learner>> {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "null" => Ok(Box::new(NullLearner)),
        "avg" | "averaging" => Ok(Box::new(AveragingLearner)),
        "knn" | "nn" => Ok(Box::new(KnnLearner::new(3)?)),
        "pac-conj" => Ok(Box::new(PacConjunctionLearner)),
        "pac-disj" => Ok(Box::new(PacDisjunctionLearner)),
        "gf2" => Ok(Box::new(Gf2Learner)),
        _ => {
            if let Some(digits) = lower.strip_prefix("knn") {
                let k: usize = digits
                    .parse()
                    .map_err(|_| Error::invalid("learner name", format!("unknown learner {name:?}")))?;
                return Ok(Box::new(KnnLearner::new(k)?));
            }
            Err(Error::invalid("learner name", format!("unknown learner {name:?}")))
        }
    }
}

/// Predicts 0 regardless of input. On balanced prompts its accuracy is the
/// majority-class rate, which makes it the floor every trained model must
/// clear.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullLearner;

impl Learner for NullLearner {
    fn name(&self) -> String {
        "null".into()
    }

    fn predict(&self, _prefix: &[(BitVec, u8)], _query: &BitVec) -> u8 {
        0
    }
}

/// Linear classifier with the averaged-example weight vector.
///
/// Inputs and labels are mapped to `{-1,+1}` (bit `b` becomes `2b-1`), the
/// weight vector is the sum of label-weighted inputs, and the prediction is 1
/// exactly when the weight/query dot product is positive (ties give 0, as
/// does an empty prefix). All arithmetic is integer, so predictions are exact.
#[derive(Debug, Clone, Copy, Default)]
pub struct AveragingLearner;

fn signed(bit: u8) -> i64 {
    2 * bit as i64 - 1
}

impl Learner for AveragingLearner {
    fn name(&self) -> String {
        "avg".into()
    }

    fn predict(&self, prefix: &[(BitVec, u8)], query: &BitVec) -> u8 {
        let mut dot = 0i64;
        for (x, y) in prefix {
            let mut example_dot = 0i64;
            for (&xb, &qb) in x.bits().iter().zip(query.bits()) {
                example_dot += signed(xb) * signed(qb);
            }
            dot += signed(*y) * example_dot;
        }
        (dot > 0) as u8
    }

    fn predict_sequence(&self, xs: &[BitVec], ys: &[u8]) -> Vec<u8> {
        assert_eq!(xs.len(), ys.len(), "xs/ys length mismatch");
        let n = xs.first().map(|x| x.len()).unwrap_or(0);
        let mut w = vec![0i64; n];
        let mut out = Vec::with_capacity(xs.len());
        for (x, &y) in xs.iter().zip(ys) {
            let dot: i64 = x
                .bits()
                .iter()
                .zip(&w)
                .map(|(&b, &wi)| signed(b) * wi)
                .sum();
            out.push((dot > 0) as u8);
            let label = signed(y);
            for (wi, &b) in w.iter_mut().zip(x.bits()) {
                *wi += label * signed(b);
            }
        }
        out
    }
}

/// Majority vote over the most cosine-similar prefix points.
///
/// Similarity is cosine over the raw 0/1 vectors, compared exactly via
/// integer cross-multiplication; similarity ties break toward the smaller
/// index. When fewer than `neighbors` points are available the vote is over
/// all of them. The prediction is 1 exactly when more than half the voting
/// labels are 1 (a split vote gives 0), and an empty prefix gives 0.
#[derive(Debug, Clone, Copy)]
pub struct KnnLearner {
    neighbors: usize,
}

impl KnnLearner {
    pub fn new(neighbors: usize) -> Result<Self> {
        if neighbors == 0 {
            return Err(Error::invalid("knn", "neighbor count must be at least 1"));
        }
        Ok(KnnLearner { neighbors })
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }
}

impl Learner for KnnLearner {
    fn name(&self) -> String {
        format!("knn{}", self.neighbors)
    }

    fn predict(&self, prefix: &[(BitVec, u8)], query: &BitVec) -> u8 {
        if prefix.is_empty() {
            return 0;
        }
        // (dot with query, squared norm, index) per prefix point; for 0/1
        // vectors the squared norm is the popcount.
        let scored: Vec<(u64, u64, usize)> = prefix
            .iter()
            .enumerate()
            .map(|(i, (x, _))| (x.dot(query), x.ones() as u64, i))
            .collect();
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            let (da, na, ia) = scored[a];
            let (db, nb, ib) = scored[b];
            // Descending similarity, then ascending index.
            cmp_cosine(db, nb, da, na).then(ia.cmp(&ib))
        });
        let take = self.neighbors.min(order.len());
        let votes: u32 = order[..take].iter().map(|&i| prefix[i].1 as u32).sum();
        (2 * votes > take as u32) as u8
    }
}

/// Classical elimination state shared by the conjunction and disjunction
/// oracles: a set of live literals over `n` variables, shrunk by informative
/// examples (positive examples for conjunctions, negative for disjunctions).
#[derive(Debug, Clone)]
pub struct Elimination {
    conjunctive: bool,
    pos: Vec<bool>,
    neg: Vec<bool>,
}

impl Elimination {
    /// Most-specific start for conjunctions: all `2n` literals live, so the
    /// hypothesis is unsatisfiable and predicts 0 until a positive example
    /// arrives.
    pub fn conjunction(n: usize) -> Self {
        Elimination { conjunctive: true, pos: vec![true; n], neg: vec![true; n] }
    }

    /// Most-general start for disjunctions: all `2n` literals live, so the
    /// hypothesis is a tautology and predicts 1 until a negative example
    /// arrives.
    pub fn disjunction(n: usize) -> Self {
        Elimination { conjunctive: false, pos: vec![true; n], neg: vec![true; n] }
    }

    /// Incorporate one labeled example. Conjunctions learn from positives
    /// (a literal falsified by a positive example cannot be in the target);
    /// disjunctions learn from negatives (a literal satisfied by a negative
    /// example cannot be in the target).
    pub fn observe(&mut self, x: &BitVec, y: u8) {
        if self.conjunctive != (y == 1) {
            return;
        }
        for (i, &b) in x.bits().iter().enumerate() {
            // For a positive conjunction example, drop literals the point
            // falsifies; for a negative disjunction example, drop literals it
            // satisfies. Both rules delete `x_i` when b disagrees with the
            // informative polarity and `!x_i` otherwise.
            if b == 1 {
                self.neg[i] &= !self.conjunctive;
                self.pos[i] &= self.conjunctive;
            } else {
                self.pos[i] &= !self.conjunctive;
                self.neg[i] &= self.conjunctive;
            }
        }
    }

    /// Evaluate the current hypothesis: AND of live literals (conjunction
    /// mode) or OR of live literals (disjunction mode).
    pub fn predict(&self, x: &BitVec) -> u8 {
        if self.conjunctive {
            for (i, &b) in x.bits().iter().enumerate() {
                if (self.pos[i] && b == 0) || (self.neg[i] && b == 1) {
                    return 0;
                }
            }
            1
        } else {
            for (i, &b) in x.bits().iter().enumerate() {
                if (self.pos[i] && b == 1) || (self.neg[i] && b == 0) {
                    return 1;
                }
            }
            0
        }
    }

    /// The live literal set, sorted by index with the positive literal first.
    pub fn live_literals(&self) -> Vec<Literal> {
        let mut out = Vec::new();
        for i in 0..self.pos.len() {
            if self.pos[i] {
                out.push(Literal::pos(i));
            }
            if self.neg[i] {
                out.push(Literal::negated(i));
            }
        }
        out
    }
}

fn eliminate_over(prefix: &[(BitVec, u8)], query: &BitVec, conjunctive: bool) -> u8 {
    let mut state = if conjunctive {
        Elimination::conjunction(query.len())
    } else {
        Elimination::disjunction(query.len())
    };
    for (x, y) in prefix {
        state.observe(x, *y);
    }
    state.predict(query)
}

/// Elimination oracle for conjunctions: exact on realizable prefixes, with
/// one-sided error (it never predicts 1 on a point the target labels 0).
#[derive(Debug, Clone, Copy, Default)]
pub struct PacConjunctionLearner;

impl Learner for PacConjunctionLearner {
    fn name(&self) -> String {
        "pac-conj".into()
    }

    fn predict(&self, prefix: &[(BitVec, u8)], query: &BitVec) -> u8 {
        eliminate_over(prefix, query, true)
    }

    fn predict_sequence(&self, xs: &[BitVec], ys: &[u8]) -> Vec<u8> {
        assert_eq!(xs.len(), ys.len(), "xs/ys length mismatch");
        let n = xs.first().map(|x| x.len()).unwrap_or(0);
        let mut state = Elimination::conjunction(n);
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let p = state.predict(x);
                state.observe(x, y);
                p
            })
            .collect()
    }
}

/// Elimination oracle for disjunctions; the exact dual of
/// [`PacConjunctionLearner`] (it never predicts 0 on a point the target
/// labels 1).
#[derive(Debug, Clone, Copy, Default)]
pub struct PacDisjunctionLearner;

impl Learner for PacDisjunctionLearner {
    fn name(&self) -> String {
        "pac-disj".into()
    }

    fn predict(&self, prefix: &[(BitVec, u8)], query: &BitVec) -> u8 {
        eliminate_over(prefix, query, false)
    }

    fn predict_sequence(&self, xs: &[BitVec], ys: &[u8]) -> Vec<u8> {
        assert_eq!(xs.len(), ys.len(), "xs/ys length mismatch");
        let n = xs.first().map(|x| x.len()).unwrap_or(0);
        let mut state = Elimination::disjunction(n);
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let p = state.predict(x);
                state.observe(x, y);
                p
            })
            .collect()
    }
}

/// An incrementally row-reduced linear system over GF(2) with at most 64
/// unknowns: one unknown per input coordinate, one equation per labeled
/// example (`x · s = y mod 2`).
#[derive(Debug, Clone)]
pub struct Gf2System {
    n: usize,
    /// `(pivot, mask, rhs)` rows in reduced row-echelon form: each mask
    /// contains its own pivot and no other row's pivot.
    rows: Vec<(usize, u64, u8)>,
    consistent: bool,
    ones: usize,
    total: usize,
}

impl Gf2System {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::invalid("gf2 system", format!("n = {n} outside 1..=64")));
        }
        Ok(Gf2System { n, rows: Vec::new(), consistent: true, ones: 0, total: 0 })
    }

    fn reduce(&self, mut mask: u64, mut rhs: u8) -> (u64, u8) {
        for &(pivot, m, b) in &self.rows {
            if (mask >> pivot) & 1 == 1 {
                mask ^= m;
                rhs ^= b;
            }
        }
        (mask, rhs)
    }

    /// Add one labeled example as an equation. A dependent consistent row is
    /// a no-op; a dependent contradictory row marks the system inconsistent.
    pub fn observe(&mut self, x: &BitVec, y: u8) {
        assert_eq!(x.len(), self.n, "point width does not match system");
        self.total += 1;
        self.ones += y as usize;
        let (mask, rhs) = self.reduce(x.mask(), y);
        if mask == 0 {
            if rhs == 1 {
                self.consistent = false;
            }
            return;
        }
        let pivot = mask.trailing_zeros() as usize;
        for row in &mut self.rows {
            if (row.1 >> pivot) & 1 == 1 {
                row.1 ^= mask;
                row.2 ^= rhs;
            }
        }
        self.rows.push((pivot, mask, rhs));
        self.rows.sort_unstable_by_key(|r| r.0);
    }

    /// If the query is in the row space, the label every consistent
    /// hypothesis assigns it; otherwise `None`.
    pub fn determine(&self, x: &BitVec) -> Option<u8> {
        let (mask, rhs) = self.reduce(x.mask(), 0);
        (mask == 0).then_some(rhs)
    }

    /// The specific consistent hypothesis with all free coordinates set to 0,
    /// as a coefficient mask. Exact once the rank reaches `n`.
    pub fn zero_completion(&self) -> u64 {
        self.rows
            .iter()
            .filter(|&&(_, _, rhs)| rhs == 1)
            .fold(0u64, |acc, &(pivot, _, _)| acc | (1u64 << pivot))
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// Majority of observed labels, ties toward 0; the fallback prediction
    /// once the system is contradictory (possible only with label noise).
    pub fn majority_label(&self) -> u8 {
        (2 * self.ones > self.total) as u8
    }

    /// Predict the query's label under the zero-completion hypothesis, or the
    /// majority label if the system is inconsistent.
    pub fn predict(&self, x: &BitVec) -> u8 {
        if !self.consistent {
            return self.majority_label();
        }
        ((self.zero_completion() & x.mask()).count_ones() & 1) as u8
    }
}

/// Gaussian-elimination oracle for parities: exact once the observed points
/// span all of GF(2)^n, consistent with every noise-free prefix before that.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gf2Learner;

impl Learner for Gf2Learner {
    fn name(&self) -> String {
        "gf2".into()
    }

    fn predict(&self, prefix: &[(BitVec, u8)], query: &BitVec) -> u8 {
        let mut sys = Gf2System::new(query.len()).expect("query width outside 1..=64");
        for (x, y) in prefix {
            sys.observe(x, *y);
        }
        sys.predict(query)
    }

    fn predict_sequence(&self, xs: &[BitVec], ys: &[u8]) -> Vec<u8> {
        assert_eq!(xs.len(), ys.len(), "xs/ys length mismatch");
        let Some(first) = xs.first() else {
            return Vec::new();
        };
        let mut sys = Gf2System::new(first.len()).expect("point width outside 1..=64");
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let p = sys.predict(x);
                sys.observe(x, y);
                p
            })
            .collect()
    }
}
