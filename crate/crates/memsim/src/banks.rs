//! Banked scratchpad model. A request names one channel of one feature;
//! under the feature-major layout the channel is ignored because the whole
//! vector sits in one wide bank row.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutMode {
    FeatureMajor,
    ChannelMajor,
}

impl std::str::FromStr for LayoutMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "feature_major" => Ok(Self::FeatureMajor),
            "channel_major" => Ok(Self::ChannelMajor),
            _ => Err(format!("unknown bank layout `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("feature {feature} channel {channel} is outside the resident block ({features} features x {channels} channels)")]
    Unmapped { feature: u64, channel: u32, features: u64, channels: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub feature: u64,
    pub channel: u32,
}

impl Access {
    pub fn new(feature: u64, channel: u32) -> Self {
        Self { feature, channel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankLayout {
    pub mode: LayoutMode,
    pub banks: usize,
    pub features: u64,
    pub channels: u32,
}

impl BankLayout {
    pub fn new(mode: LayoutMode, banks: usize, features: u64, channels: u32) -> Self {
        assert!(banks >= 1, "need at least one bank");
        Self { mode, banks, features, channels }
    }

    /// Bank and row of one access.
    pub fn map(&self, a: Access) -> Result<(usize, u64), LayoutError> {
        if a.feature >= self.features || a.channel >= self.channels {
            return Err(LayoutError::Unmapped { feature: a.feature, channel: a.channel, features: self.features, channels: self.channels });
        }
        let b = self.banks as u64;
        Ok(match self.mode {
            LayoutMode::FeatureMajor => ((a.feature % b) as usize, a.feature / b),
            LayoutMode::ChannelMajor => {
                let c = a.channel as u64;
                ((c % b) as usize, a.feature * (self.channels as u64).div_ceil(b) + c / b)
            }
        })
    }
}

/// Requests issued together, stored flat.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IssueGroups {
    accesses: Vec<Access>,
    ends: Vec<usize>,
}

impl IssueGroups {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, group: impl IntoIterator<Item = Access>) {
        self.accesses.extend(group);
        self.ends.push(self.accesses.len());
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn request_count(&self) -> usize {
        self.accesses.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Access]> + '_ {
        let mut start = 0;
        self.ends.iter().map(move |&e| {
            let g = &self.accesses[start..e];
            start = e;
            g
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BankStats {
    pub cycles: u64,
    pub stall_cycles: u64,
    pub issued: u64,
    pub served: u64,
    /// Non-empty groups, i.e. the cycle count with no conflicts.
    pub groups: u64,
}

impl BankStats {
    pub fn conflict_rate(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.stall_cycles as f64 / self.cycles as f64
        }
    }
}

/// Each bank serves up to `ports` distinct rows per cycle; identical rows
/// are merged. A group takes as many cycles as its busiest bank needs.
pub fn simulate_banks(groups: &IssueGroups, layout: &BankLayout, ports: usize) -> Result<BankStats, LayoutError> {
    assert!(ports >= 1, "need at least one port");
    let mut stats = BankStats::default();
    let mut rows: Vec<Vec<u64>> = vec![Vec::new(); layout.banks];
    for g in groups.iter() {
        if g.is_empty() {
            continue;
        }
        for r in rows.iter_mut() {
            r.clear();
        }
        for &a in g {
            let (bank, row) = layout.map(a)?;
            if !rows[bank].contains(&row) {
                rows[bank].push(row);
            }
        }
        let cycles = rows.iter().map(|r| r.len().div_ceil(ports) as u64).max().unwrap_or(1).max(1);
        stats.cycles += cycles;
        stats.stall_cycles += cycles - 1;
        stats.issued += g.len() as u64;
        stats.served += g.len() as u64;
        stats.groups += 1;
    }
    Ok(stats)
}

/// Ray-lane issue: rays are processed `lanes` at a time and in cycle `t`
/// lane `i` requests the `t`-th feature of its ray.
pub fn feature_major_groups<S: AsRef<[u64]>>(streams: &[S], lanes: usize) -> IssueGroups {
    let mut out = IssueGroups::new();
    for batch in streams.chunks(lanes.max(1)) {
        let steps = batch.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
        for t in 0..steps {
            out.push(batch.iter().filter_map(|s| s.as_ref().get(t)).map(|&f| Access::new(f, 0)));
        }
    }
    out
}

/// Channel-lane issue: lanes read consecutive channels of one feature, in
/// chunks of at most one channel per bank.
pub fn channel_major_groups<S: AsRef<[u64]>>(streams: &[S], channels: u32, lanes: usize, banks: usize) -> IssueGroups {
    let chunk = lanes.min(banks).max(1) as u32;
    let mut out = IssueGroups::new();
    for s in streams {
        for &f in s.as_ref() {
            let mut c = 0;
            while c < channels {
                let end = (c + chunk).min(channels);
                out.push((c..end).map(|ch| Access::new(f, ch)));
                c = end;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(accesses: &[Access]) -> IssueGroups {
        let mut g = IssueGroups::new();
        g.push(accesses.iter().copied());
        g
    }

    #[test]
    fn feature_major_same_bank_conflicts() {
        let layout = BankLayout::new(LayoutMode::FeatureMajor, 4, 16, 4);
        let s = simulate_banks(&one(&[Access::new(1, 0), Access::new(5, 0)]), &layout, 1).unwrap();
        assert_eq!((s.cycles, s.stall_cycles), (2, 1));
    }

    #[test]
    fn channel_major_spreads_one_feature() {
        let layout = BankLayout::new(LayoutMode::ChannelMajor, 4, 16, 4);
        let g = one(&(0..4).map(|c| Access::new(7, c)).collect::<Vec<_>>());
        let s = simulate_banks(&g, &layout, 1).unwrap();
        assert_eq!((s.cycles, s.stall_cycles), (1, 0));
    }

    #[test]
    fn same_row_is_merged() {
        let layout = BankLayout::new(LayoutMode::FeatureMajor, 4, 16, 4);
        let s = simulate_banks(&one(&[Access::new(3, 0), Access::new(3, 0)]), &layout, 1).unwrap();
        assert_eq!(s.cycles, 1);
    }

    #[test]
    fn unmapped_is_an_error() {
        let layout = BankLayout::new(LayoutMode::ChannelMajor, 4, 16, 4);
        assert!(simulate_banks(&one(&[Access::new(16, 0)]), &layout, 1).is_err());
        assert!(simulate_banks(&one(&[Access::new(0, 4)]), &layout, 1).is_err());
    }

    #[test]
    fn channel_major_rows_wrap() {
        let layout = BankLayout::new(LayoutMode::ChannelMajor, 4, 8, 6);
        assert_eq!(layout.map(Access::new(0, 4)).unwrap(), (0, 1));
        assert_eq!(layout.map(Access::new(1, 0)).unwrap(), (0, 2));
    }
}
