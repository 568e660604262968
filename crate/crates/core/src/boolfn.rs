//! Boolean function classes over `{0,1}^n`: literal-based classes
//! (conjunctions, disjunctions, DNF/CNF), parities, majorities, and integer
//! threshold functions, together with pointwise evaluation, exhaustive
//! enumeration for small `n`, and the consistency oracle used to verify that
//! a set of labeled examples pins down a unique function in its class.

use crate::bits::BitVec;
use crate::{Error, Result};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use std::collections::BTreeSet;

/// Hard cap on how many functions [`enumerate_class`] will materialize.
pub const ENUMERATION_LIMIT: u128 = 2_000_000;

/// A variable or its negation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub index: usize,
    pub neg: bool,
}

impl Literal {
    pub fn pos(index: usize) -> Self {
        Literal { index, neg: false }
    }

    pub fn negated(index: usize) -> Self {
        Literal { index, neg: true }
    }

    pub fn satisfied_by(&self, x: &BitVec) -> bool {
        (x.get(self.index) == 1) != self.neg
    }

    /// The bit value that makes this literal true.
    pub fn satisfying_bit(&self) -> u8 {
        if self.neg {
            0
        } else {
            1
        }
    }

    /// The bit value that makes this literal false.
    pub fn falsifying_bit(&self) -> u8 {
        1 - self.satisfying_bit()
    }
}

/// One concrete Boolean function, tagged by the class it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSpec {
    pub n: usize,
    pub kind: FunctionKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FunctionKind {
    /// AND of literals; the empty conjunction is the constant 1.
    Conjunction(Vec<Literal>),
    /// OR of literals; the empty disjunction is the constant 0.
    Disjunction(Vec<Literal>),
    /// Disjunction with at most `max_literals` literals.
    SparseDisjunction {
        literals: Vec<Literal>,
        max_literals: usize,
    },
    /// OR of exactly three conjunctive clauses.
    Dnf3([Vec<Literal>; 3]),
    /// AND of exactly three disjunctive clauses.
    Cnf3([Vec<Literal>; 3]),
    /// XOR over a subset of variables; the empty parity is the constant 0.
    Parity(Vec<usize>),
    /// Parity with an exact relevant-set size (the size is the sparsity).
    SparseParity(Vec<usize>),
    /// 1 iff strictly more than half of the selected variables are 1
    /// (ties, possible for even subsets, give 0).
    Majority(Vec<usize>),
    /// 1 iff sum_i w_i * sx_i - bias > 0 on the {-1,+1} view `sx`,
    /// with weights in {0,1}. Ties give 0.
    ThresholdZeroOne { weights: Vec<u8>, bias: i32 },
    /// 1 iff sum_i w_i * sx_i > 1/2 on the {-1,+1} view, with small integer
    /// weights; the sum is an integer, so this is sum >= 1.
    IntegerHalfspace { weights: Vec<i32> },
    /// Marker for the sequence-level nearest-neighbor labeling task; has no
    /// pointwise evaluation (see the sampler's sequence labeler).
    NearestNeighbor { seed_len: usize },
}

fn check_literals(n: usize, literals: &[Literal]) -> Result<()> {
    let mut seen = vec![false; n];
    for lit in literals {
        if lit.index >= n {
            return Err(Error::invalid("literal", format!("index {} out of range for n={n}", lit.index)));
        }
        if seen[lit.index] {
            return Err(Error::invalid("literal set", format!("index {} appears twice", lit.index)));
        }
        seen[lit.index] = true;
    }
    Ok(())
}

fn check_indices(n: usize, indices: &[usize]) -> Result<()> {
    for window in indices.windows(2) {
        if window[0] >= window[1] {
            return Err(Error::invalid("index set", "indices must be strictly ascending".to_string()));
        }
    }
    if let Some(&last) = indices.last() {
        if last >= n {
            return Err(Error::invalid("index set", format!("index {last} out of range for n={n}")));
        }
    }
    Ok(())
}

fn sort_literals(mut literals: Vec<Literal>) -> Vec<Literal> {
    literals.sort_by_key(|l| l.index);
    literals
}

impl FunctionSpec {
    pub fn conjunction(n: usize, literals: Vec<Literal>) -> Result<Self> {
        let literals = sort_literals(literals);
        check_literals(n, &literals)?;
        Ok(FunctionSpec { n, kind: FunctionKind::Conjunction(literals) })
    }

    pub fn disjunction(n: usize, literals: Vec<Literal>) -> Result<Self> {
        let literals = sort_literals(literals);
        check_literals(n, &literals)?;
        Ok(FunctionSpec { n, kind: FunctionKind::Disjunction(literals) })
    }

    pub fn sparse_disjunction(n: usize, literals: Vec<Literal>, max_literals: usize) -> Result<Self> {
        let literals = sort_literals(literals);
        check_literals(n, &literals)?;
        if literals.len() > max_literals {
            return Err(Error::invalid(
                "sparse disjunction",
                format!("{} literals exceed the bound {max_literals}", literals.len()),
            ));
        }
        Ok(FunctionSpec { n, kind: FunctionKind::SparseDisjunction { literals, max_literals } })
    }

    pub fn dnf3(n: usize, clauses: [Vec<Literal>; 3]) -> Result<Self> {
        let clauses = clauses.map(sort_literals);
        for clause in &clauses {
            check_literals(n, clause)?;
        }
        Ok(FunctionSpec { n, kind: FunctionKind::Dnf3(clauses) })
    }

    pub fn cnf3(n: usize, clauses: [Vec<Literal>; 3]) -> Result<Self> {
        let clauses = clauses.map(sort_literals);
        for clause in &clauses {
            check_literals(n, clause)?;
        }
        Ok(FunctionSpec { n, kind: FunctionKind::Cnf3(clauses) })
    }

    pub fn parity(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        check_indices(n, &indices)?;
        Ok(FunctionSpec { n, kind: FunctionKind::Parity(indices) })
    }

    pub fn sparse_parity(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        check_indices(n, &indices)?;
        Ok(FunctionSpec { n, kind: FunctionKind::SparseParity(indices) })
    }

    pub fn majority(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        check_indices(n, &indices)?;
        Ok(FunctionSpec { n, kind: FunctionKind::Majority(indices) })
    }

    pub fn threshold_zero_one(n: usize, weights: Vec<u8>, bias: i32) -> Result<Self> {
        if weights.len() != n {
            return Err(Error::DimMismatch { expected: n, got: weights.len() });
        }
        if weights.iter().any(|&w| w > 1) {
            return Err(Error::invalid("threshold weights", "weights must lie in {0,1}".to_string()));
        }
        Ok(FunctionSpec { n, kind: FunctionKind::ThresholdZeroOne { weights, bias } })
    }

    pub fn integer_halfspace(n: usize, weights: Vec<i32>) -> Result<Self> {
        if weights.len() != n {
            return Err(Error::DimMismatch { expected: n, got: weights.len() });
        }
        Ok(FunctionSpec { n, kind: FunctionKind::IntegerHalfspace { weights } })
    }

    pub fn nearest_neighbor(n: usize, seed_len: usize) -> Self {
        FunctionSpec { n, kind: FunctionKind::NearestNeighbor { seed_len } }
    }

    /// Canonical class name used in the JSON encoding and CLI.
    pub fn class_name(&self) -> &'static str {
        match &self.kind {
            FunctionKind::Conjunction(_) => "conjunction",
            FunctionKind::Disjunction(_) => "disjunction",
            FunctionKind::SparseDisjunction { .. } => "sparse_disjunction",
            FunctionKind::Dnf3(_) => "dnf3",
            FunctionKind::Cnf3(_) => "cnf3",
            FunctionKind::Parity(_) => "parity",
            FunctionKind::SparseParity(_) => "sparse_parity",
            FunctionKind::Majority(_) => "majority",
            FunctionKind::ThresholdZeroOne { .. } => "threshold01",
            FunctionKind::IntegerHalfspace { .. } => "integer_halfspace",
            FunctionKind::NearestNeighbor { .. } => "nearest_neighbor",
        }
    }

    /// Truth table packed into one word; requires `n <= 6`.
    pub fn table_u64(&self) -> Result<u64> {
        if self.n > 6 {
            return Err(Error::invalid("table_u64", format!("n={} exceeds 6", self.n)));
        }
        Ok(truth_table(self)?[0])
    }
}

fn eval_conj_clause(literals: &[Literal], x: &BitVec) -> bool {
    literals.iter().all(|l| l.satisfied_by(x))
}

fn eval_disj_clause(literals: &[Literal], x: &BitVec) -> bool {
    literals.iter().any(|l| l.satisfied_by(x))
}

/// Evaluate `f` on one input. The nearest-neighbor task has no pointwise
/// value and is rejected here.
pub fn evaluate(f: &FunctionSpec, x: &BitVec) -> Result<u8> {
    if x.len() != f.n {
        return Err(Error::DimMismatch { expected: f.n, got: x.len() });
    }
    let value = match &f.kind {
        FunctionKind::Conjunction(lits) => eval_conj_clause(lits, x),
        FunctionKind::Disjunction(lits) | FunctionKind::SparseDisjunction { literals: lits, .. } => {
            eval_disj_clause(lits, x)
        }
        FunctionKind::Dnf3(clauses) => clauses.iter().any(|c| eval_conj_clause(c, x)),
        FunctionKind::Cnf3(clauses) => clauses.iter().all(|c| eval_disj_clause(c, x)),
        FunctionKind::Parity(indices) | FunctionKind::SparseParity(indices) => {
            indices.iter().fold(0u8, |acc, &i| acc ^ x.get(i)) == 1
        }
        FunctionKind::Majority(indices) => {
            let ones: usize = indices.iter().map(|&i| x.get(i) as usize).sum();
            2 * ones > indices.len()
        }
        FunctionKind::ThresholdZeroOne { weights, bias } => {
            let s: i64 = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| w as i64 * (2 * x.get(i) as i64 - 1))
                .sum();
            s - *bias as i64 > 0
        }
        FunctionKind::IntegerHalfspace { weights } => {
            let s: i64 = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| w as i64 * (2 * x.get(i) as i64 - 1))
                .sum();
            // sum - 1/2 > 0 for an integer sum means sum >= 1.
            s >= 1
        }
        FunctionKind::NearestNeighbor { .. } => {
            return Err(Error::Unsupported(
                "the nearest-neighbor task labels whole sequences, not points".to_string(),
            ))
        }
    };
    Ok(value as u8)
}

/// Full truth table as packed 64-bit words; entry `u` (input
/// [`BitVec::from_index`] of `u`) is bit `u % 64` of word `u / 64`.
/// Guarded at `n <= 20`.
pub fn truth_table(f: &FunctionSpec) -> Result<Vec<u64>> {
    if f.n > 20 {
        return Err(Error::invalid("truth table", format!("n={} exceeds the table guard 20", f.n)));
    }
    let entries = 1u64 << f.n;
    let mut words = vec![0u64; entries.div_ceil(64) as usize];
    for u in 0..entries {
        let x = BitVec::from_index(f.n, u);
        if evaluate(f, &x)? == 1 {
            words[(u / 64) as usize] |= 1 << (u % 64);
        }
    }
    Ok(words)
}

/// A function class at fixed dimension — the unit that can be enumerated,
/// sampled from, and searched for consistent members.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FunctionClass {
    Conjunction { n: usize },
    Disjunction { n: usize },
    SparseDisjunction { n: usize, max_literals: usize },
    Dnf3 { n: usize },
    Cnf3 { n: usize },
    Parity { n: usize },
    SparseParity { n: usize, k: usize },
    Majority { n: usize },
    ThresholdZeroOne { n: usize, bias_bound: i32 },
    IntegerHalfspace { n: usize, weight_bound: i32 },
}

impl FunctionClass {
    pub fn n(&self) -> usize {
        match *self {
            FunctionClass::Conjunction { n }
            | FunctionClass::Disjunction { n }
            | FunctionClass::SparseDisjunction { n, .. }
            | FunctionClass::Dnf3 { n }
            | FunctionClass::Cnf3 { n }
            | FunctionClass::Parity { n }
            | FunctionClass::SparseParity { n, .. }
            | FunctionClass::Majority { n }
            | FunctionClass::ThresholdZeroOne { n, .. }
            | FunctionClass::IntegerHalfspace { n, .. } => n,
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for j in 0..k.min(n - k) {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// Number of representations yielded by [`enumerate_class`]. For most
/// classes distinct representations are distinct functions; Dnf3/Cnf3
/// enumerate ordered clause triples, so function-level queries on them
/// should deduplicate by truth table.
pub fn class_size(class: &FunctionClass) -> u128 {
    match *class {
        FunctionClass::Conjunction { n } | FunctionClass::Disjunction { n } => 3u128.pow(n as u32),
        FunctionClass::SparseDisjunction { n, max_literals } => (0..=max_literals)
            .map(|j| binomial(n, j) << j)
            .sum(),
        FunctionClass::Dnf3 { n } | FunctionClass::Cnf3 { n } => {
            let clauses = 3u128.pow(n as u32) - 1;
            clauses * clauses * clauses
        }
        FunctionClass::Parity { n } | FunctionClass::Majority { n } => 1u128 << n,
        FunctionClass::SparseParity { n, k } => binomial(n, k),
        FunctionClass::ThresholdZeroOne { n, bias_bound } => {
            (1u128 << n) * (2 * bias_bound as u128 + 1)
        }
        FunctionClass::IntegerHalfspace { n, weight_bound } => {
            (2 * weight_bound as u128 + 1).pow(n as u32)
        }
    }
}

/// Literal set for one base-3 code: digit 0 = absent, 1 = positive,
/// 2 = negated; index 0 is the least significant digit.
fn literals_of_code(n: usize, mut code: u64) -> Vec<Literal> {
    let mut lits = Vec::new();
    for index in 0..n {
        match code % 3 {
            1 => lits.push(Literal::pos(index)),
            2 => lits.push(Literal::negated(index)),
            _ => {}
        }
        code /= 3;
    }
    lits
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Enumerate every member of the class in a canonical deterministic order.
/// Refuses classes larger than [`ENUMERATION_LIMIT`].
pub fn enumerate_class(class: &FunctionClass) -> Result<Vec<FunctionSpec>> {
    let size = class_size(class);
    if size > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { size, limit: ENUMERATION_LIMIT });
    }
    let size = size as usize;
    let mut out = Vec::with_capacity(size);
    match *class {
        FunctionClass::Conjunction { n } => {
            for code in 0..3u64.pow(n as u32) {
                out.push(FunctionSpec::conjunction(n, literals_of_code(n, code))?);
            }
        }
        FunctionClass::Disjunction { n } => {
            for code in 0..3u64.pow(n as u32) {
                out.push(FunctionSpec::disjunction(n, literals_of_code(n, code))?);
            }
        }
        FunctionClass::SparseDisjunction { n, max_literals } => {
            for j in 0..=max_literals {
                for subset in combinations(n, j) {
                    for signs in 0..(1u64 << j) {
                        let lits = subset
                            .iter()
                            .enumerate()
                            .map(|(pos, &index)| Literal { index, neg: (signs >> pos) & 1 == 1 })
                            .collect();
                        out.push(FunctionSpec::sparse_disjunction(n, lits, max_literals)?);
                    }
                }
            }
        }
        FunctionClass::Dnf3 { n } | FunctionClass::Cnf3 { n } => {
            let clause_count = 3u64.pow(n as u32) - 1;
            let is_dnf = matches!(class, FunctionClass::Dnf3 { .. });
            for a in 1..=clause_count {
                for b in 1..=clause_count {
                    for c in 1..=clause_count {
                        let clauses = [
                            literals_of_code(n, a),
                            literals_of_code(n, b),
                            literals_of_code(n, c),
                        ];
                        out.push(if is_dnf {
                            FunctionSpec::dnf3(n, clauses)?
                        } else {
                            FunctionSpec::cnf3(n, clauses)?
                        });
                    }
                }
            }
        }
        FunctionClass::Parity { n } => {
            for mask in 0..(1u64 << n) {
                let indices = (0..n).filter(|&i| (mask >> i) & 1 == 1).collect();
                out.push(FunctionSpec::parity(n, indices)?);
            }
        }
        FunctionClass::SparseParity { n, k } => {
            for subset in combinations(n, k) {
                out.push(FunctionSpec::sparse_parity(n, subset)?);
            }
        }
        FunctionClass::Majority { n } => {
            for mask in 0..(1u64 << n) {
                let indices = (0..n).filter(|&i| (mask >> i) & 1 == 1).collect();
                out.push(FunctionSpec::majority(n, indices)?);
            }
        }
        FunctionClass::ThresholdZeroOne { n, bias_bound } => {
            for mask in 0..(1u64 << n) {
                let weights: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                for bias in -bias_bound..=bias_bound {
                    out.push(FunctionSpec::threshold_zero_one(n, weights.clone(), bias)?);
                }
            }
        }
        FunctionClass::IntegerHalfspace { n, weight_bound } => {
            let base = (2 * weight_bound + 1) as u64;
            for mut code in 0..base.pow(n as u32) {
                let mut weights = Vec::with_capacity(n);
                for _ in 0..n {
                    weights.push((code % base) as i32 - weight_bound);
                    code /= base;
                }
                out.push(FunctionSpec::integer_halfspace(n, weights)?);
            }
        }
    }
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

/// All members of the class (representation-level) that agree with every
/// labeled example. A contradictory example list yields the empty list.
pub fn consistent_functions(
    class: &FunctionClass,
    examples: &[(BitVec, u8)],
) -> Result<Vec<FunctionSpec>> {
    let all = enumerate_class(class)?;
    let mut out = Vec::new();
    for f in all {
        let mut ok = true;
        for (x, y) in examples {
            if evaluate(&f, x)? != *y {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(f);
        }
    }
    Ok(out)
}

/// Truth tables of nonempty single clauses over `n <= 6` variables, packed
/// into one word each. `monotone` restricts to positive literals;
/// `disjunctive` selects OR-clauses instead of AND-clauses.
fn clause_tables(n: usize, monotone: bool, disjunctive: bool) -> Vec<u64> {
    let entries = 1u64 << n;
    let mut tables = Vec::new();
    let codes = if monotone {
        // Positive-literal subsets, skipping the empty one.
        (1..(1u64 << n)).collect::<Vec<_>>()
    } else {
        (1..3u64.pow(n as u32)).collect::<Vec<_>>()
    };
    for code in codes {
        let lits = if monotone {
            (0..n).filter(|&i| (code >> i) & 1 == 1).map(Literal::pos).collect::<Vec<_>>()
        } else {
            literals_of_code(n, code)
        };
        if lits.is_empty() {
            continue;
        }
        let mut t = 0u64;
        for u in 0..entries {
            let x = BitVec::from_index(n, u);
            let hit = if disjunctive { eval_disj_clause(&lits, &x) } else { eval_conj_clause(&lits, &x) };
            if hit {
                t |= 1 << u;
            }
        }
        tables.push(t);
    }
    tables.sort_unstable();
    tables.dedup();
    tables
}

fn example_masks(n: usize, examples: &[(BitVec, u8)]) -> Result<(u64, u64)> {
    let mut ones = 0u64;
    let mut zeros = 0u64;
    for (x, y) in examples {
        if x.len() != n {
            return Err(Error::DimMismatch { expected: n, got: x.len() });
        }
        let bit = 1u64 << x.index();
        if *y == 1 {
            ones |= bit;
        } else {
            zeros |= bit;
        }
    }
    Ok((ones, zeros))
}

/// Distinct truth tables of 3-clause DNFs over `n <= 6` variables consistent
/// with the examples. This searches the full class without materializing all
/// clause triples: a clause firing on any 0-labeled point disqualifies the
/// whole formula, so clauses are filtered first and only filtered triples are
/// expanded. `monotone` restricts clauses to positive literals — the setting
/// in which short teaching sequences are uniquely identifying.
pub fn consistent_dnf3_tables(
    n: usize,
    examples: &[(BitVec, u8)],
    monotone: bool,
) -> Result<Vec<u64>> {
    if n > 6 {
        return Err(Error::invalid("dnf3 consistency", format!("n={n} exceeds 6")));
    }
    let (ones, zeros) = example_masks(n, examples)?;
    if ones & zeros != 0 {
        return Ok(Vec::new()); // contradictory examples
    }
    let admissible: Vec<u64> = clause_tables(n, monotone, false)
        .into_iter()
        .filter(|t| t & zeros == 0)
        .collect();
    let mut tables = BTreeSet::new();
    let k = admissible.len();
    for i in 0..k {
        for j in i..k {
            let tij = admissible[i] | admissible[j];
            for &third in &admissible[j..] {
                let t = tij | third;
                if t & ones == ones {
                    tables.insert(t);
                }
            }
        }
    }
    Ok(tables.into_iter().collect())
}

/// Dual of [`consistent_dnf3_tables`] for 3-clause CNFs: clauses failing on
/// any 1-labeled point are filtered, then clause triples must evaluate to 0
/// on every 0-labeled point.
pub fn consistent_cnf3_tables(
    n: usize,
    examples: &[(BitVec, u8)],
    monotone: bool,
) -> Result<Vec<u64>> {
    if n > 6 {
        return Err(Error::invalid("cnf3 consistency", format!("n={n} exceeds 6")));
    }
    let (ones, zeros) = example_masks(n, examples)?;
    if ones & zeros != 0 {
        return Ok(Vec::new());
    }
    let admissible: Vec<u64> = clause_tables(n, monotone, true)
        .into_iter()
        .filter(|t| t & ones == ones)
        .collect();
    let mut tables = BTreeSet::new();
    let k = admissible.len();
    for i in 0..k {
        for j in i..k {
            let tij = admissible[i] & admissible[j];
            for &third in &admissible[j..] {
                let t = tij & third;
                if t & zeros == 0 {
                    tables.insert(t);
                }
            }
        }
    }
    Ok(tables.into_iter().collect())
}

// --- canonical JSON encoding -----------------------------------------------

#[derive(Serialize)]
struct LiteralParams<'a> {
    literals: &'a [Literal],
}

#[derive(Serialize)]
struct SparseDisjunctionParams<'a> {
    literals: &'a [Literal],
    max_literals: usize,
}

#[derive(Serialize)]
struct ClauseParams<'a> {
    clauses: &'a [Vec<Literal>; 3],
}

#[derive(Serialize)]
struct IndexParams<'a> {
    indices: &'a [usize],
}

#[derive(Serialize)]
struct ThresholdParams<'a> {
    weights: &'a [u8],
    bias: i32,
}

#[derive(Serialize)]
struct HalfspaceParams<'a> {
    weights: &'a [i32],
}

#[derive(Serialize)]
struct SeedLenParams {
    seed_len: usize,
}

struct ParamsView<'a>(&'a FunctionSpec);

impl Serialize for ParamsView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.0.kind {
            FunctionKind::Conjunction(literals) | FunctionKind::Disjunction(literals) => {
                LiteralParams { literals }.serialize(s)
            }
            FunctionKind::SparseDisjunction { literals, max_literals } => {
                SparseDisjunctionParams { literals, max_literals: *max_literals }.serialize(s)
            }
            FunctionKind::Dnf3(clauses) | FunctionKind::Cnf3(clauses) => {
                ClauseParams { clauses }.serialize(s)
            }
            FunctionKind::Parity(indices)
            | FunctionKind::SparseParity(indices)
            | FunctionKind::Majority(indices) => IndexParams { indices }.serialize(s),
            FunctionKind::ThresholdZeroOne { weights, bias } => {
                ThresholdParams { weights, bias: *bias }.serialize(s)
            }
            FunctionKind::IntegerHalfspace { weights } => HalfspaceParams { weights }.serialize(s),
            FunctionKind::NearestNeighbor { seed_len } => {
                SeedLenParams { seed_len: *seed_len }.serialize(s)
            }
        }
    }
}

impl Serialize for FunctionSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FunctionSpec", 3)?;
        st.serialize_field("class", self.class_name())?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("params", &ParamsView(self))?;
        st.end()
    }
}

#[derive(Deserialize)]
struct SpecDto {
    class: String,
    n: usize,
    params: serde_json::Value,
}

#[derive(Deserialize)]
struct LiteralParamsOwned {
    literals: Vec<Literal>,
}

#[derive(Deserialize)]
struct SparseDisjunctionParamsOwned {
    literals: Vec<Literal>,
    max_literals: usize,
}

#[derive(Deserialize)]
struct ClauseParamsOwned {
    clauses: [Vec<Literal>; 3],
}

#[derive(Deserialize)]
struct IndexParamsOwned {
    indices: Vec<usize>,
}

#[derive(Deserialize)]
struct ThresholdParamsOwned {
    weights: Vec<u8>,
    bias: i32,
}

#[derive(Deserialize)]
struct HalfspaceParamsOwned {
    weights: Vec<i32>,
}

#[derive(Deserialize)]
struct SeedLenParamsOwned {
    seed_len: usize,
}

impl<'de> Deserialize<'de> for FunctionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let dto = SpecDto::deserialize(d)?;
        let n = dto.n;
        let parse = |e: Error| DeError::custom(e.to_string());
        let params = dto.params;
        let spec = match dto.class.as_str() {
            "conjunction" => {
                let p: LiteralParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::conjunction(n, p.literals).map_err(parse)?
            }
            "disjunction" => {
                let p: LiteralParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::disjunction(n, p.literals).map_err(parse)?
            }
            "sparse_disjunction" => {
                let p: SparseDisjunctionParamsOwned =
                    serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::sparse_disjunction(n, p.literals, p.max_literals).map_err(parse)?
            }
            "dnf3" => {
                let p: ClauseParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::dnf3(n, p.clauses).map_err(parse)?
            }
            "cnf3" => {
                let p: ClauseParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::cnf3(n, p.clauses).map_err(parse)?
            }
            "parity" => {
                let p: IndexParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::parity(n, p.indices).map_err(parse)?
            }
            "sparse_parity" => {
                let p: IndexParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::sparse_parity(n, p.indices).map_err(parse)?
            }
            "majority" => {
                let p: IndexParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::majority(n, p.indices).map_err(parse)?
            }
            "threshold01" => {
                let p: ThresholdParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::threshold_zero_one(n, p.weights, p.bias).map_err(parse)?
            }
            "integer_halfspace" => {
                let p: HalfspaceParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::integer_halfspace(n, p.weights).map_err(parse)?
            }
            "nearest_neighbor" => {
                let p: SeedLenParamsOwned = serde_json::from_value(params).map_err(DeError::custom)?;
                FunctionSpec::nearest_neighbor(n, p.seed_len)
            }
            other => return Err(DeError::custom(format!("unknown function class {other:?}"))),
        };
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent truth-table construction by bit-parallel set algebra on
    /// packed words (n <= 6), used as the reference the pointwise evaluator
    /// is checked against. Selection masks and popcounts replace per-input
    /// evaluation so the two paths share no code.
    mod oracle {
        use super::super::{FunctionKind, FunctionSpec, Literal};

        /// Bits u with (u >> i) & 1 == 1.
        pub fn var(n: usize, i: usize) -> u64 {
            let mut t = 0u64;
            for u in 0..(1u64 << n) {
                if (u >> i) & 1 == 1 {
                    t |= 1 << u;
                }
            }
            t
        }

        pub fn full(n: usize) -> u64 {
            if n == 6 {
                u64::MAX
            } else {
                (1u64 << (1 << n)) - 1
            }
        }

        fn lit(n: usize, l: &Literal) -> u64 {
            if l.neg {
                !var(n, l.index) & full(n)
            } else {
                var(n, l.index)
            }
        }

        fn conj(n: usize, lits: &[Literal]) -> u64 {
            lits.iter().fold(full(n), |acc, l| acc & lit(n, l))
        }

        fn disj(n: usize, lits: &[Literal]) -> u64 {
            lits.iter().fold(0, |acc, l| acc | lit(n, l))
        }

        pub fn table(f: &FunctionSpec) -> u64 {
            let n = f.n;
            match &f.kind {
                FunctionKind::Conjunction(lits) => conj(n, lits),
                FunctionKind::Disjunction(lits)
                | FunctionKind::SparseDisjunction { literals: lits, .. } => disj(n, lits),
                FunctionKind::Dnf3(cs) => cs.iter().fold(0, |acc, c| acc | conj(n, c)),
                FunctionKind::Cnf3(cs) => cs.iter().fold(full(n), |acc, c| acc & disj(n, c)),
                FunctionKind::Parity(idx) | FunctionKind::SparseParity(idx) => {
                    idx.iter().fold(0, |acc, &i| acc ^ var(n, i))
                }
                FunctionKind::Majority(idx) => {
                    let mask: u64 = idx.iter().map(|&i| 1u64 << i).sum();
                    let mut t = 0u64;
                    for u in 0..(1u64 << n) {
                        if 2 * (u & mask).count_ones() as usize > idx.len() {
                            t |= 1 << u;
                        }
                    }
                    t
                }
                FunctionKind::ThresholdZeroOne { weights, bias } => {
                    let mask: u64 =
                        weights.iter().enumerate().filter(|(_, &w)| w == 1).map(|(i, _)| 1u64 << i).sum();
                    let total = mask.count_ones() as i64;
                    let mut t = 0u64;
                    for u in 0..(1u64 << n) {
                        let s = 2 * (u & mask).count_ones() as i64 - total;
                        if s - *bias as i64 > 0 {
                            t |= 1 << u;
                        }
                    }
                    t
                }
                FunctionKind::IntegerHalfspace { weights } => {
                    let mut t = 0u64;
                    for u in 0..(1u64 << n) {
                        let s: i64 = weights
                            .iter()
                            .enumerate()
                            .map(|(i, &w)| if (u >> i) & 1 == 1 { w as i64 } else { -(w as i64) })
                            .sum();
                        if 2 * s > 1 {
                            t |= 1 << u;
                        }
                    }
                    t
                }
                FunctionKind::NearestNeighbor { .. } => unreachable!("no pointwise table"),
            }
        }
    }

    fn bv(s: &str) -> BitVec {
        s.parse().unwrap()
    }

    #[test]
    fn literal_basics() {
        let l = Literal::negated(2);
        assert!(!l.satisfied_by(&bv("0010")));
        assert!(l.satisfied_by(&bv("0000")));
        assert_eq!(l.satisfying_bit(), 0);
        assert_eq!(l.falsifying_bit(), 1);
        assert_eq!(Literal::pos(0).satisfying_bit(), 1);
    }

    #[test]
    fn evaluate_hand_cases() {
        // x1 AND (NOT x5) AND x6 over ten variables.
        let f = FunctionSpec::conjunction(
            10,
            vec![Literal::pos(1), Literal::negated(5), Literal::pos(6)],
        )
        .unwrap();
        assert_eq!(evaluate(&f, &bv("0100001000")).unwrap(), 1);
        assert_eq!(evaluate(&f, &bv("0100011000")).unwrap(), 0); // x5 breaks it
        assert_eq!(evaluate(&f, &bv("0000001000")).unwrap(), 0); // x1 missing

        // Empty conjunction/disjunction/parity are the constants 1 / 0 / 0.
        let top = FunctionSpec::conjunction(3, vec![]).unwrap();
        let bot = FunctionSpec::disjunction(3, vec![]).unwrap();
        let zero = FunctionSpec::parity(3, vec![]).unwrap();
        for u in 0..8 {
            let x = BitVec::from_index(3, u);
            assert_eq!(evaluate(&top, &x).unwrap(), 1);
            assert_eq!(evaluate(&bot, &x).unwrap(), 0);
            assert_eq!(evaluate(&zero, &x).unwrap(), 0);
        }

        // Majority over an even subset: exactly half ones is a tie, and ties
        // give 0.
        let maj = FunctionSpec::majority(8, vec![1, 3, 4, 6]).unwrap();
        assert_eq!(evaluate(&maj, &bv("01010000")).unwrap(), 0); // 2 of 4
        assert_eq!(evaluate(&maj, &bv("01011010")).unwrap(), 1); // 3 of 4
        assert_eq!(evaluate(&maj, &bv("00000000")).unwrap(), 0);

        // Threshold with 0/1 weights on the {-1,1} view; sum == bias is 0.
        let th = FunctionSpec::threshold_zero_one(4, vec![1, 1, 1, 0], 1).unwrap();
        assert_eq!(evaluate(&th, &bv("1100")).unwrap(), 0); // s = 1, tie
        assert_eq!(evaluate(&th, &bv("1110")).unwrap(), 1); // s = 3
        assert_eq!(evaluate(&th, &bv("1111")).unwrap(), 1); // irrelevant bit

        // Integer halfspace: threshold 1/2, so an integer sum must be >= 1.
        let hs = FunctionSpec::integer_halfspace(3, vec![2, -1, 0]).unwrap();
        assert_eq!(evaluate(&hs, &bv("100")).unwrap(), 1); // 2 + 1 + 0 = 3
        assert_eq!(evaluate(&hs, &bv("110")).unwrap(), 1); // 2 - 1 = 1
        assert_eq!(evaluate(&hs, &bv("010")).unwrap(), 0); // -2 - 1 = -3
        let hs0 = FunctionSpec::integer_halfspace(2, vec![1, -1]).unwrap();
        assert_eq!(evaluate(&hs0, &bv("11")).unwrap(), 0); // sum = 0 < 1/2

        // The sequence-level task has no pointwise value.
        let nn = FunctionSpec::nearest_neighbor(4, 2);
        assert!(matches!(evaluate(&nn, &bv("0000")), Err(Error::Unsupported(_))));

        // Dimension mismatches are rejected.
        assert!(matches!(
            evaluate(&top, &bv("0000")),
            Err(Error::DimMismatch { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(FunctionSpec::conjunction(3, vec![Literal::pos(3)]).is_err());
        assert!(FunctionSpec::conjunction(3, vec![Literal::pos(1), Literal::negated(1)]).is_err());
        assert!(FunctionSpec::sparse_disjunction(
            5,
            vec![Literal::pos(0), Literal::pos(1), Literal::pos(2), Literal::pos(3)],
            3
        )
        .is_err());
        assert!(FunctionSpec::parity(4, vec![1, 1]).is_err());
        assert!(FunctionSpec::threshold_zero_one(3, vec![1, 2, 0], 0).is_err());
        assert!(FunctionSpec::threshold_zero_one(3, vec![1, 0], 0).is_err());
        // Constructors sort literal/index arguments into canonical order.
        let f = FunctionSpec::parity(5, vec![4, 0, 2]).unwrap();
        assert!(matches!(&f.kind, FunctionKind::Parity(v) if v == &vec![0, 2, 4]));
    }

    #[test]
    fn pointwise_matches_set_algebra_oracle() {
        let mut checked = 0usize;
        for n in 1..=4usize {
            let mut classes = vec![
                FunctionClass::Conjunction { n },
                FunctionClass::Disjunction { n },
                FunctionClass::SparseDisjunction { n, max_literals: 2 },
                FunctionClass::Parity { n },
                FunctionClass::Majority { n },
                FunctionClass::ThresholdZeroOne { n, bias_bound: 2 },
                FunctionClass::IntegerHalfspace { n, weight_bound: 1 },
            ];
            if n >= 2 {
                classes.push(FunctionClass::SparseParity { n, k: 2 });
            }
            if n <= 3 {
                classes.push(FunctionClass::Dnf3 { n });
                classes.push(FunctionClass::Cnf3 { n });
            }
            for class in classes {
                for f in enumerate_class(&class).unwrap() {
                    assert_eq!(
                        truth_table(&f).unwrap()[0],
                        oracle::table(&f),
                        "table mismatch for {f:?}"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 30_000, "oracle comparison covered only {checked} functions");
    }

    #[test]
    fn enumeration_counts_and_canonical_sizes() {
        let cases = [
            (FunctionClass::Conjunction { n: 3 }, 27u128),
            (FunctionClass::Parity { n: 3 }, 8),
            (FunctionClass::SparseParity { n: 4, k: 2 }, 6),
            (FunctionClass::Majority { n: 2 }, 4),
            (FunctionClass::SparseDisjunction { n: 5, max_literals: 3 }, 131),
            (FunctionClass::Dnf3 { n: 2 }, 512),
            (FunctionClass::ThresholdZeroOne { n: 3, bias_bound: 3 }, 56),
            (FunctionClass::IntegerHalfspace { n: 2, weight_bound: 3 }, 49),
        ];
        for (class, expect) in cases {
            assert_eq!(class_size(&class), expect, "size of {class:?}");
            assert_eq!(enumerate_class(&class).unwrap().len() as u128, expect);
        }

        // Sparse disjunctions are function-distinct, not just
        // representation-distinct: dedup by truth table preserves the count.
        let all = enumerate_class(&FunctionClass::SparseDisjunction { n: 5, max_literals: 3 }).unwrap();
        let mut tables: Vec<u64> = all.iter().map(|f| f.table_u64().unwrap()).collect();
        tables.sort_unstable();
        tables.dedup();
        assert_eq!(tables.len(), 131);

        assert!(matches!(
            enumerate_class(&FunctionClass::Conjunction { n: 14 }),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn truth_table_packs_words_in_index_order() {
        // Parity on variable 0 alternates with the table index, across words.
        let f = FunctionSpec::parity(7, vec![0]).unwrap();
        let words = truth_table(&f).unwrap();
        assert_eq!(words, vec![0xAAAA_AAAA_AAAA_AAAA; 2]);
        let g = FunctionSpec::parity(7, vec![6]).unwrap();
        assert_eq!(truth_table(&g).unwrap(), vec![0, u64::MAX]);
    }

    #[test]
    fn demorgan_duality_exhaustive() {
        let n = 3;
        let full = oracle::full(n);
        for f in enumerate_class(&FunctionClass::Conjunction { n }).unwrap() {
            let FunctionKind::Conjunction(lits) = &f.kind else { unreachable!() };
            let negated = lits
                .iter()
                .map(|l| Literal { index: l.index, neg: !l.neg })
                .collect();
            let dual = FunctionSpec::disjunction(n, negated).unwrap();
            assert_eq!(f.table_u64().unwrap(), !dual.table_u64().unwrap() & full);
        }
    }

    #[test]
    fn consistency_oracle_basics() {
        let class = FunctionClass::Parity { n: 3 };
        assert_eq!(consistent_functions(&class, &[]).unwrap().len(), 8);
        let x = bv("101");
        assert!(consistent_functions(&class, &[(x.clone(), 0), (x.clone(), 1)])
            .unwrap()
            .is_empty());
        // Three basis evaluations pin a parity down to one candidate pair
        // component-by-component; with the all-ones point it is unique.
        let target = FunctionSpec::parity(3, vec![0, 2]).unwrap();
        let examples: Vec<(BitVec, u8)> = ["100", "010", "001"]
            .iter()
            .map(|s| {
                let x = bv(s);
                let y = evaluate(&target, &x).unwrap();
                (x, y)
            })
            .collect();
        let survivors = consistent_functions(&class, &examples).unwrap();
        assert_eq!(survivors.len(), 1);
        assert_eq!(survivors[0], target);
    }

    #[test]
    fn dnf3_uniqueness_holds_monotone_but_not_general() {
        // Target: x0 OR x1 OR x2 over six variables, written as a three-term
        // formula with singleton terms. Four labeled points separate it from
        // every other *monotone* three-term formula, yet in the general class
        // (x0 AND NOT x3) OR (x1 AND NOT x4) OR (x2 AND NOT x5) also fits.
        let n = 6;
        let target = FunctionSpec::dnf3(
            n,
            [vec![Literal::pos(0)], vec![Literal::pos(1)], vec![Literal::pos(2)]],
        )
        .unwrap();
        let rival = FunctionSpec::dnf3(
            n,
            [
                vec![Literal::pos(0), Literal::negated(3)],
                vec![Literal::pos(1), Literal::negated(4)],
                vec![Literal::pos(2), Literal::negated(5)],
            ],
        )
        .unwrap();
        let examples: Vec<(BitVec, u8)> = [("100000", 1u8), ("010000", 1), ("001000", 1), ("000000", 0)]
            .iter()
            .map(|(s, y)| (bv(s), *y))
            .collect();
        for (x, y) in &examples {
            assert_eq!(evaluate(&target, x).unwrap(), *y);
            assert_eq!(evaluate(&rival, x).unwrap(), *y);
        }
        assert_ne!(target.table_u64().unwrap(), rival.table_u64().unwrap());

        let monotone = consistent_dnf3_tables(n, &examples, true).unwrap();
        assert_eq!(monotone, vec![target.table_u64().unwrap()]);

        let general = consistent_dnf3_tables(n, &examples, false).unwrap();
        assert!(general.len() >= 2);
        assert!(general.contains(&target.table_u64().unwrap()));
        assert!(general.contains(&rival.table_u64().unwrap()));
    }

    #[test]
    fn cnf3_consistency_dual() {
        let n = 3;
        let target = FunctionSpec::cnf3(
            n,
            [vec![Literal::pos(0)], vec![Literal::pos(1)], vec![Literal::pos(2)]],
        )
        .unwrap();
        let examples: Vec<(BitVec, u8)> = [("111", 1u8), ("011", 0), ("101", 0), ("110", 0)]
            .iter()
            .map(|(s, y)| (bv(s), *y))
            .collect();
        let monotone = consistent_cnf3_tables(n, &examples, true).unwrap();
        assert_eq!(monotone, vec![target.table_u64().unwrap()]);
        // Contradictions empty out both searches.
        let contra = vec![(bv("111"), 1u8), (bv("111"), 0u8)];
        assert!(consistent_cnf3_tables(n, &contra, false).unwrap().is_empty());
        assert!(consistent_dnf3_tables(n, &contra, false).unwrap().is_empty());
    }

    #[test]
    fn consistent_tables_match_brute_force_at_n2() {
        // Cross-check the filtered triple search against raw enumeration.
        let n = 2;
        let examples = vec![(bv("10"), 1u8), (bv("01"), 0u8)];
        for (class, fast) in [
            (
                FunctionClass::Dnf3 { n },
                consistent_dnf3_tables(n, &examples, false).unwrap(),
            ),
            (
                FunctionClass::Cnf3 { n },
                consistent_cnf3_tables(n, &examples, false).unwrap(),
            ),
        ] {
            let mut brute: Vec<u64> = consistent_functions(&class, &examples)
                .unwrap()
                .iter()
                .map(|f| f.table_u64().unwrap())
                .collect();
            brute.sort_unstable();
            brute.dedup();
            assert_eq!(fast, brute, "mismatch for {class:?}");
        }
    }

    #[test]
    fn canonical_json_encoding() {
        let f = FunctionSpec::conjunction(4, vec![Literal::negated(3), Literal::pos(1)]).unwrap();
        assert_eq!(
            serde_json::to_string(&f).unwrap(),
            r#"{"class":"conjunction","n":4,"params":{"literals":[{"index":1,"neg":false},{"index":3,"neg":true}]}}"#
        );

        let specs = vec![
            f,
            FunctionSpec::disjunction(3, vec![Literal::pos(0)]).unwrap(),
            FunctionSpec::sparse_disjunction(5, vec![Literal::negated(2)], 3).unwrap(),
            FunctionSpec::dnf3(4, [vec![Literal::pos(0)], vec![Literal::pos(1)], vec![Literal::negated(2)]])
                .unwrap(),
            FunctionSpec::cnf3(4, [vec![Literal::pos(0), Literal::pos(3)], vec![Literal::pos(1)], vec![]])
                .unwrap(),
            FunctionSpec::parity(6, vec![0, 5]).unwrap(),
            FunctionSpec::sparse_parity(6, vec![1, 2]).unwrap(),
            FunctionSpec::majority(5, vec![0, 1, 4]).unwrap(),
            FunctionSpec::threshold_zero_one(3, vec![1, 0, 1], -2).unwrap(),
            FunctionSpec::integer_halfspace(3, vec![-3, 0, 2]).unwrap(),
            FunctionSpec::nearest_neighbor(8, 20),
        ];
        for spec in specs {
            let json = serde_json::to_string(&spec).unwrap();
            let back: FunctionSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec, "round trip failed for {json}");
        }
        assert!(serde_json::from_str::<FunctionSpec>(r#"{"class":"cubic","n":3,"params":{}}"#).is_err());
    }

    proptest! {
        #[test]
        fn parity_is_linear_over_xor(
            member in proptest::collection::vec(any::<bool>(), 8),
            xs in proptest::collection::vec(any::<bool>(), 8),
            ys in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let indices: Vec<usize> = member.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
            let f = FunctionSpec::parity(8, indices).unwrap();
            let x = BitVec::from_bits(xs.iter().map(|&b| b as u8).collect()).unwrap();
            let y = BitVec::from_bits(ys.iter().map(|&b| b as u8).collect()).unwrap();
            let fx = evaluate(&f, &x).unwrap();
            let fy = evaluate(&f, &y).unwrap();
            let fxy = evaluate(&f, &x.xor(&y)).unwrap();
            prop_assert_eq!(fxy, fx ^ fy);
        }

        #[test]
        fn conjunction_ignores_irrelevant_variables(
            xs in proptest::collection::vec(any::<bool>(), 6),
            flip in 0usize..6,
        ) {
            let f = FunctionSpec::conjunction(6, vec![Literal::pos(0), Literal::negated(1)]).unwrap();
            let x = BitVec::from_bits(xs.iter().map(|&b| b as u8).collect()).unwrap();
            let mut z = x.clone();
            z.set(flip, 1 - z.get(flip));
            if flip >= 2 {
                prop_assert_eq!(evaluate(&f, &x).unwrap(), evaluate(&f, &z).unwrap());
            }
        }
    }
}
