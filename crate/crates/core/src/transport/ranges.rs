use std::collections::BTreeMap;

/// Set of half-open `u64` ranges, merged on insert.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RangeSet {
    // start -> end (exclusive)
    ranges: BTreeMap<u64, u64>,
    covered: u64,
}

impl RangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `[start, end)` and returns how many bytes were not covered
    /// before.
    pub fn insert(&mut self, start: u64, end: u64) -> u64 {
        if start >= end {
            return 0;
        }
        let mut new_start = start;
        let mut new_end = end;
        let mut overlap = 0;

        // a range starting before `start` may reach into it
        if let Some((&s, &e)) = self.ranges.range(..=start).next_back() {
            if e >= start {
                new_start = s;
                new_end = new_end.max(e);
                overlap += e.min(end).saturating_sub(start);
                self.ranges.remove(&s);
            }
        }
        let following: Vec<(u64, u64)> = self
            .ranges
            .range(start..=end)
            .map(|(&s, &e)| (s, e))
            .collect();
        for (s, e) in following {
            overlap += e.min(end) - s;
            new_end = new_end.max(e);
            self.ranges.remove(&s);
        }
        self.ranges.insert(new_start, new_end);
        let added = (end - start) - overlap;
        self.covered += added;
        added
    }

    pub fn contains_range(&self, start: u64, end: u64) -> bool {
        if start >= end {
            return true;
        }
        match self.ranges.range(..=start).next_back() {
            Some((_, &e)) => e >= end,
            None => false,
        }
    }

    /// Length of the contiguous prefix starting at zero.
    pub fn contiguous_prefix(&self) -> u64 {
        match self.ranges.first_key_value() {
            Some((&0, &e)) => e,
            _ => 0,
        }
    }

    /// Total bytes covered.
    pub fn covered(&self) -> u64 {
        self.covered
    }

    pub fn range_count(&self) -> usize {
        self.ranges.len()
    }
}
