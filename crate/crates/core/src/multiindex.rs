//! Finitely supported multi-indices, downward-closed index sets and the
//! weight algebra (`rho^nu`, factorials, componentwise binomials, `b_nu`).

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::{Error, Result};

/// A finitely supported sequence of non-negative integer exponents.
///
/// Stored sparsely as strictly increasing `(dimension, exponent)` pairs with
/// 1-based dimensions and no zero exponents; the total degree is cached.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
    degree: u32,
}

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex {
            entries: Vec::new(),
            degree: 0,
        }
    }

    /// The Kronecker index `e_j` (1-based `j`).
    pub fn unit(j: u32) -> Self {
        debug_assert!(j >= 1);
        MultiIndex {
            entries: alloc::vec![(j, 1)],
            degree: 1,
        }
    }

    /// Build from a dense exponent prefix `(nu_1, nu_2, ...)`; zeros are dropped.
    pub fn from_exponents(exps: &[u32]) -> Self {
        let entries: Vec<(u32, u32)> = exps
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| (i as u32 + 1, e))
            .collect();
        let degree = entries.iter().map(|&(_, e)| e).sum();
        MultiIndex { entries, degree }
    }

    /// Build from sparse `(dimension, exponent)` pairs.
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Result<Self> {
        let mut entries: Vec<(u32, u32)> = pairs.iter().copied().filter(|&(_, e)| e > 0).collect();
        entries.sort_unstable();
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidParameter(format!(
                    "duplicate dimension {} in multi-index",
                    w[0].0
                )));
            }
        }
        if entries.first().is_some_and(|&(j, _)| j == 0) {
            return Err(Error::InvalidParameter(
                "multi-index dimensions are 1-based".into(),
            ));
        }
        let degree = entries.iter().map(|&(_, e)| e).sum();
        Ok(MultiIndex { entries, degree })
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    /// Total degree `|nu|`.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exponent in dimension `j` (1-based).
    pub fn get(&self, j: u32) -> u32 {
        self.entries
            .binary_search_by_key(&j, |&(d, _)| d)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Dimensions with nonzero exponent.
    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(j, _)| j)
    }

    /// `max_j nu_j`.
    pub fn max_exponent(&self) -> u32 {
        self.entries.iter().map(|&(_, e)| e).max().unwrap_or(0)
    }

    /// Largest active dimension, 0 for the zero index.
    pub fn max_dim(&self) -> u32 {
        self.entries.last().map(|&(j, _)| j).unwrap_or(0)
    }

    /// `nu + e_j`.
    pub fn incremented(&self, j: u32) -> Self {
        debug_assert!(j >= 1);
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&j, |&(d, _)| d) {
            Ok(i) => entries[i].1 += 1,
            Err(i) => entries.insert(i, (j, 1)),
        }
        MultiIndex {
            entries,
            degree: self.degree + 1,
        }
    }

    /// `nu - e_j`, or `None` if `nu_j = 0`.
    pub fn decremented(&self, j: u32) -> Option<Self> {
        let i = self.entries.binary_search_by_key(&j, |&(d, _)| d).ok()?;
        let mut entries = self.entries.clone();
        if entries[i].1 == 1 {
            entries.remove(i);
        } else {
            entries[i].1 -= 1;
        }
        Some(MultiIndex {
            entries,
            degree: self.degree - 1,
        })
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.entries.iter().all(|&(j, e)| e <= other.get(j))
    }
}

/// Order by total degree first, then lexicographically on the sparse entries.
/// This makes ordered containers iterate layer by layer.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| self.entries.cmp(&other.entries))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Positive weights `rho_j` for `j = 1..=len`, with a constant tail beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    values: Vec<f64>,
    tail: f64,
}

impl WeightSequence {
    /// Weights must be finite and non-negative; the tail defaults to the last
    /// stored value. Operations that need strict bounds (envelope generation,
    /// Hoelder factorization) validate those separately.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidWeights);
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights);
        }
        let tail = *values.last().expect("nonempty");
        Ok(WeightSequence { values, tail })
    }

    pub fn constant(value: f64, len: usize) -> Result<Self> {
        Self::new(alloc::vec![value; len.max(1)])
    }

    /// `rho_j` (1-based); the constant tail applies beyond the stored range.
    pub fn get(&self, j: u32) -> f64 {
        debug_assert!(j >= 1);
        self.values
            .get(j as usize - 1)
            .copied()
            .unwrap_or(self.tail)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scale every weight (including the tail) by `tau`.
    pub fn scaled(&self, tau: f64) -> Self {
        WeightSequence {
            values: self.values.iter().map(|v| v * tau).collect(),
            tail: self.tail * tau,
        }
    }
}

/// `nu! = prod_j nu_j!` with `0! = 1`.
///
/// Guarded by `|nu| <= 20` so the product stays well inside `u128`.
pub fn factorial(nu: &MultiIndex) -> Result<u128> {
    if nu.degree() > 20 {
        return Err(Error::Overflow("factorial of multi-index with |nu| > 20"));
    }
    let mut acc: u128 = 1;
    for &(_, e) in nu.entries() {
        for k in 2..=e as u128 {
            acc = acc.checked_mul(k).ok_or(Error::Overflow("factorial"))?;
        }
    }
    Ok(acc)
}

/// `rho^nu = prod_j rho_j^{nu_j}`; the empty product is 1.
pub fn weight_power(rho: &WeightSequence, nu: &MultiIndex) -> f64 {
    let mut acc = 1.0;
    for &(j, e) in nu.entries() {
        acc *= rho.get(j).powi(e as i32);
    }
    acc
}

fn binomial_scalar(n: u32, k: u32) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc
            .checked_mul(n as u128 - k as u128 + i)
            .ok_or(Error::Overflow("binomial"))?;
        acc /= i;
    }
    Ok(acc)
}

/// Componentwise binomial `prod_j C(nu_j, mu_j)`, zero when `mu` is not
/// componentwise below `nu`.
pub fn binomial(nu: &MultiIndex, mu: &MultiIndex) -> Result<u128> {
    if !mu.le(nu) {
        return Ok(0);
    }
    let mut acc: u128 = 1;
    for &(j, m) in mu.entries() {
        acc = acc
            .checked_mul(binomial_scalar(nu.get(j), m)?)
            .ok_or(Error::Overflow("binomial"))?;
    }
    Ok(acc)
}

/// `b_nu = sum_{mu <= nu, ||mu||_inf <= r} C(nu, mu) rho^{2 mu}`.
///
/// The sum factorizes over dimensions, which keeps it exact and cheap.
pub fn b_weight(nu: &MultiIndex, rho: &WeightSequence, r: u32) -> Result<f64> {
    if r < 1 {
        return Err(Error::InvalidParameter("b_weight needs r >= 1".into()));
    }
    let mut acc = 1.0;
    for &(j, e) in nu.entries() {
        let rho2 = rho.get(j) * rho.get(j);
        let mut dim_sum = 0.0;
        for m in 0..=e.min(r) {
            dim_sum += binomial_scalar(e, m)? as f64 * rho2.powi(m as i32);
        }
        acc *= dim_sum;
    }
    Ok(acc)
}

/// A finite downward-closed subset of the index family, always containing the
/// zero index. Iteration order is layer by layer (degree, then lexicographic).
#[derive(Debug, Clone)]
pub struct DownwardClosedSet {
    members: BTreeSet<MultiIndex>,
    generation_order: Vec<MultiIndex>,
}

impl DownwardClosedSet {
    /// Validating constructor; records the given order as generation order.
    pub fn from_indices(indices: Vec<MultiIndex>) -> Result<Self> {
        let members: BTreeSet<MultiIndex> = indices.iter().cloned().collect();
        if !members.contains(&MultiIndex::zero()) {
            return Err(Error::NotDownwardClosed("missing zero index".into()));
        }
        for nu in &members {
            for j in nu.support().collect::<Vec<_>>() {
                let parent = nu.decremented(j).expect("support dimension");
                if !members.contains(&parent) {
                    return Err(Error::NotDownwardClosed(format!("{:?}", nu.entries())));
                }
            }
        }
        Ok(DownwardClosedSet {
            members,
            generation_order: indices,
        })
    }

    /// All indices over dimensions `1..=dims` with `|nu| <= max_degree`.
    pub fn total_degree(dims: u32, max_degree: u32) -> Self {
        let mut out: Vec<MultiIndex> = alloc::vec![MultiIndex::zero()];
        let mut frontier = alloc::vec![MultiIndex::zero()];
        for _ in 0..max_degree {
            let mut next = Vec::new();
            for nu in &frontier {
                // extend only in dimensions >= max active dim so each index is
                // enumerated exactly once
                let lo = nu.max_dim().max(1);
                for j in lo..=dims {
                    next.push(nu.incremented(j));
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        let members: BTreeSet<MultiIndex> = out.iter().cloned().collect();
        DownwardClosedSet {
            members,
            generation_order: out,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.members.contains(nu)
    }

    /// Layer-ordered iteration (degree ascending, lexicographic within).
    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.members.iter()
    }

    /// The order in which indices were generated or supplied.
    pub fn generation_order(&self) -> &[MultiIndex] {
        &self.generation_order
    }

    pub fn max_degree(&self) -> u32 {
        self.members.iter().map(|nu| nu.degree()).max().unwrap_or(0)
    }

    /// All members with `|nu| = n`, in deterministic (lexicographic) order.
    pub fn layer(&self, n: u32) -> Vec<MultiIndex> {
        self.members
            .iter()
            .filter(|nu| nu.degree() == n)
            .cloned()
            .collect()
    }

    /// Whether the set contains every index of degree `n` over `dims`
    /// dimensions, by counting against `C(dims + n - 1, n)`.
    pub fn layer_is_complete(&self, n: u32, dims: u32) -> bool {
        if n == 0 {
            return true;
        }
        let expected = match binomial_scalar(dims + n - 1, n) {
            Ok(c) => c,
            Err(_) => return false,
        };
        self.members.iter().filter(|nu| nu.degree() == n).count() as u128 == expected
    }

    pub fn is_downward_closed(&self) -> bool {
        self.members.contains(&MultiIndex::zero())
            && self.members.iter().all(|nu| {
                nu.support().all(|j| {
                    let parent = nu.decremented(j).expect("support dimension");
                    self.members.contains(&parent)
                })
            })
    }
}

#[derive(Debug)]
struct Candidate {
    surrogate: f64,
    index: MultiIndex,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap pops the preferred candidate: larger surrogate first, ties
        // by smaller degree, then lexicographically smaller entries.
        self.surrogate
            .partial_cmp(&other.surrogate)
            .expect("finite surrogates")
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy a-priori candidate set: the `budget` indices with the largest
/// surrogate `rho^{-nu}`. The surrogate is monotone under increments, so the
/// frontier expansion stays downward closed by construction.
pub fn generate_envelope(
    rho: &WeightSequence,
    budget: usize,
    max_degree: u32,
) -> Result<DownwardClosedSet> {
    for (i, &v) in rho.values().iter().enumerate() {
        if v <= 1.0 {
            return Err(Error::SurrogateNotSummable { j: i + 1, value: v });
        }
    }
    if budget == 0 {
        return Err(Error::InvalidParameter(
            "envelope budget must be >= 1".into(),
        ));
    }
    let dims = rho.len() as u32;
    let mut heap = BinaryHeap::new();
    let mut seen = BTreeSet::new();
    let zero = MultiIndex::zero();
    seen.insert(zero.clone());
    heap.push(Candidate {
        surrogate: 1.0,
        index: zero,
    });
    let mut order = Vec::with_capacity(budget);
    while order.len() < budget {
        let Some(cand) = heap.pop() else { break };
        for j in 1..=dims {
            if cand.index.degree() < max_degree {
                let child = cand.index.incremented(j);
                if !seen.contains(&child) {
                    seen.insert(child.clone());
                    heap.push(Candidate {
                        surrogate: cand.surrogate / rho.get(j),
                        index: child,
                    });
                }
            }
        }
        order.push(cand.index);
    }
    let members: BTreeSet<MultiIndex> = order.iter().cloned().collect();
    Ok(DownwardClosedSet {
        members,
        generation_order: order,
    })
}
