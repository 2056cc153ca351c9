use num_complex::Complex64;

use crate::error::{Error, Result};

/// Contiguous partition of `N = num_groups * group_size` indices into
/// equal-sized groups. Group `g` occupies `[g * p, (g + 1) * p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupPartition {
    num_groups: usize,
    group_size: usize,
}

impl GroupPartition {
    pub fn new(num_groups: usize, group_size: usize) -> Result<Self> {
        if num_groups == 0 || group_size == 0 {
            return Err(Error::InvalidPartition(format!(
                "need at least one group of at least one element, got G={num_groups}, p={group_size}"
            )));
        }
        Ok(Self { num_groups, group_size })
    }

    #[inline]
    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    #[inline]
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Total coefficient count `N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.num_groups * self.group_size
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn range(&self, g: usize) -> std::ops::Range<usize> {
        g * self.group_size..(g + 1) * self.group_size
    }

    /// Group owning coefficient `index`.
    #[inline]
    pub fn group_of(&self, index: usize) -> usize {
        index / self.group_size
    }
}

/// A length-`N` complex vector viewed through a [`GroupPartition`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedComplexVector {
    values: Vec<Complex64>,
    partition: GroupPartition,
}

impl GroupedComplexVector {
    pub fn zeros(partition: GroupPartition) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); partition.len()], partition }
    }

    pub fn from_vec(values: Vec<Complex64>, partition: GroupPartition) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::DimensionMismatch { expected: partition.len(), actual: values.len(), context: "grouped vector length" });
        }
        Ok(Self { values, partition })
    }

    #[inline]
    pub fn partition(&self) -> GroupPartition {
        self.partition
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn group(&self, g: usize) -> &[Complex64] {
        &self.values[self.partition.range(g)]
    }

    #[inline]
    pub fn group_mut(&mut self, g: usize) -> &mut [Complex64] {
        let range = self.partition.range(g);
        &mut self.values[range]
    }

    pub fn groups(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.values.chunks_exact(self.partition.group_size())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Indices of groups with at least one nonzero coefficient.
    pub fn nonzero_groups(&self) -> Vec<usize> {
        self.groups().enumerate().filter(|(_, block)| block.iter().any(|v| *v != Complex64::new(0.0, 0.0))).map(|(g, _)| g).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_layout() {
        let p = GroupPartition::new(3, 4).unwrap();
        assert_eq!(p.len(), 12);
        assert_eq!(p.range(1), 4..8);
        assert_eq!(p.group_of(11), 2);
        assert!(GroupPartition::new(0, 4).is_err());
        assert!(GroupPartition::new(2, 0).is_err());
    }

    #[test]
    fn length_checked() {
        let p = GroupPartition::new(2, 2).unwrap();
        assert!(GroupedComplexVector::from_vec(vec![Complex64::new(1.0, 0.0); 3], p).is_err());
    }

    #[test]
    fn group_mutation_touches_only_its_range() {
        let p = GroupPartition::new(4, 3).unwrap();
        let mut v = GroupedComplexVector::zeros(p);
        for x in v.group_mut(2) {
            *x = Complex64::new(1.0, -1.0);
        }
        for (i, x) in v.values().iter().enumerate() {
            let inside = (6..9).contains(&i);
            assert_eq!(*x != Complex64::new(0.0, 0.0), inside, "index {i}");
        }
        assert_eq!(v.nonzero_groups(), vec![2]);
        assert_eq!(v.group(2).len(), 3);
    }
}
