//! Graded enumeration of monomial exponents.

use std::collections::HashMap;

/// Exponent vector of a holomorphic monomial `z^α`.
pub type MultiIndex = Vec<u32>;

pub fn degree(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// All multiindices in `n` variables of total degree at most `max_degree`,
/// ordered by degree and, within a degree, lexicographically decreasing.
///
/// Indices of degree `<= k` always form a prefix, so nested truncations share
/// their leading entries.
#[derive(Debug, Clone)]
pub struct MonomialSet {
    n: usize,
    max_degree: u32,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    degree_start: Vec<usize>,
}

impl MonomialSet {
    pub fn new(n: usize, max_degree: u32) -> Self {
        let mut indices = Vec::new();
        let mut degree_start = Vec::with_capacity(max_degree as usize + 2);
        for d in 0..=max_degree {
            degree_start.push(indices.len());
            let mut current = vec![0u32; n];
            push_degree(&mut indices, &mut current, 0, d);
        }
        degree_start.push(indices.len());
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Self {
            n,
            max_degree,
            indices,
            lookup,
            degree_start,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.indices[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }

    pub fn index_of(&self, alpha: &[u32]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    pub fn degree_of(&self, i: usize) -> u32 {
        degree(&self.indices[i])
    }

    /// Position of the first index of degree `d` (or `len()` when `d > max_degree`).
    pub fn first_of_degree(&self, d: u32) -> usize {
        if d > self.max_degree {
            self.indices.len()
        } else {
            self.degree_start[d as usize]
        }
    }

    /// Number of indices of degree at most `d`.
    pub fn count_up_to(&self, d: u32) -> usize {
        self.first_of_degree(d.saturating_add(1))
    }

    /// `z^α` for every index, using cached coordinate powers.
    pub fn evaluate(&self, z: &[crate::C64]) -> Vec<crate::C64> {
        let powers = coordinate_powers(z, self.max_degree);
        self.indices
            .iter()
            .map(|a| {
                a.iter()
                    .enumerate()
                    .fold(crate::C64::new(1.0, 0.0), |acc, (j, &e)| acc * powers[j][e as usize])
            })
            .collect()
    }
}

fn push_degree(out: &mut Vec<MultiIndex>, current: &mut [u32], pos: usize, remaining: u32) {
    let n = current.len();
    if n == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.to_vec());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        push_degree(out, current, pos + 1, remaining - k);
    }
    current[pos] = 0;
}

pub(crate) fn coordinate_powers(z: &[crate::C64], max: u32) -> Vec<Vec<crate::C64>> {
    z.iter()
        .map(|&zj| {
            let mut p = Vec::with_capacity(max as usize + 1);
            let mut acc = crate::C64::new(1.0, 0.0);
            p.push(acc);
            for _ in 0..max {
                acc *= zj;
                p.push(acc);
            }
            p
        })
        .collect()
}

/// Number of multiindices in `n` variables of degree at most `d`, i.e. `C(n + d, n)`.
pub fn count(n: usize, d: u32) -> usize {
    let mut c: u128 = 1;
    for i in 1..=n as u128 {
        c = c * (d as u128 + i) / i;
    }
    c as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn egg_space_has_28_monomials_of_degree_at_most_6() {
        let set = MonomialSet::new(2, 6);
        assert_eq!(set.len(), 28);
        assert_eq!(count(2, 6), 28);
    }

    #[test]
    fn ordering_is_graded_with_prefix_property() {
        let set = MonomialSet::new(2, 3);
        assert_eq!(set.get(0), &[0, 0]);
        assert_eq!(set.get(1), &[1, 0]);
        assert_eq!(set.get(2), &[0, 1]);
        assert_eq!(set.first_of_degree(2), 3);
        assert_eq!(set.count_up_to(2), 6);
        let small = MonomialSet::new(2, 2);
        for i in 0..small.len() {
            assert_eq!(small.get(i), set.get(i));
        }
        for (i, a) in set.iter().enumerate() {
            assert_eq!(set.index_of(a), Some(i));
        }
    }

    #[test]
    fn counts_match_binomials() {
        assert_eq!(MonomialSet::new(3, 32).len(), 6545);
        assert_eq!(MonomialSet::new(1, 64).len(), 65);
        assert_eq!(MonomialSet::new(2, 32).len(), 561);
    }
}
