//! Filter-wheel windows. Channel 1 is the blank window used for live
//! video; channels 2..=10 are the long-pass filter followed by the eight
//! bandpass filters and are the feature dimensions everywhere else.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DociError, Result};

pub const CHANNEL_COUNT: usize = 9;
pub const BLANK_CHANNEL: u8 = 1;
pub const FIRST_CHANNEL: u8 = 2;
pub const LAST_CHANNEL: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterChannel {
    pub index: u8,
    /// `None` for the long-pass filter.
    pub center_nm: Option<f64>,
    pub passband_nm: (f64, f64),
}

const TABLE: [FilterChannel; CHANNEL_COUNT] = [
    FilterChannel {
        index: 2,
        center_nm: None,
        passband_nm: (405.0, 620.0),
    },
    FilterChannel {
        index: 3,
        center_nm: Some(415.0),
        passband_nm: (405.0, 425.0),
    },
    FilterChannel {
        index: 4,
        center_nm: Some(434.0),
        passband_nm: (424.0, 444.0),
    },
    FilterChannel {
        index: 5,
        center_nm: Some(465.0),
        passband_nm: (455.0, 475.0),
    },
    FilterChannel {
        index: 6,
        center_nm: Some(494.0),
        passband_nm: (484.0, 504.0),
    },
    FilterChannel {
        index: 7,
        center_nm: Some(520.0),
        passband_nm: (510.0, 530.0),
    },
    FilterChannel {
        index: 8,
        center_nm: Some(542.0),
        passband_nm: (528.0, 556.0),
    },
    FilterChannel {
        index: 9,
        center_nm: Some(572.0),
        passband_nm: (558.0, 586.0),
    },
    FilterChannel {
        index: 10,
        center_nm: Some(605.0),
        passband_nm: (597.0, 613.0),
    },
];

impl FilterChannel {
    pub fn all() -> &'static [FilterChannel; CHANNEL_COUNT] {
        &TABLE
    }

    pub fn get(index: u8) -> Result<FilterChannel> {
        Self::slot_of(index).map(|s| TABLE[s])
    }

    /// Position of channel `index` in per-channel arrays.
    pub fn slot_of(index: u8) -> Result<usize> {
        if (FIRST_CHANNEL..=LAST_CHANNEL).contains(&index) {
            Ok((index - FIRST_CHANNEL) as usize)
        } else {
            Err(DociError::UnknownChannel(index))
        }
    }

    pub fn slot(&self) -> usize {
        (self.index - FIRST_CHANNEL) as usize
    }
}

/// Ordered channel subset, printed in bracket notation: `[6 8 10]`, or
/// `[2 - 10]` for the full set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelSet(pub Vec<u8>);

impl ChannelSet {
    pub fn new(mut channels: Vec<u8>) -> Result<Self> {
        channels.sort_unstable();
        channels.dedup();
        for &c in &channels {
            FilterChannel::slot_of(c)?;
        }
        if channels.is_empty() {
            return Err(DociError::InvalidParameter("empty channel set".into()));
        }
        Ok(ChannelSet(channels))
    }

    pub fn all() -> Self {
        ChannelSet((FIRST_CHANNEL..=LAST_CHANNEL).collect())
    }

    pub fn channels(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parse `"[6 8 10]"`, `"6,8,10"`, `"[2 - 10]"` or `"2-10"`.
    pub fn parse(text: &str) -> Result<Self> {
        let inner = text
            .trim()
            .trim_start_matches('[')
            .trim_end_matches(']')
            .trim();
        let bad = || DociError::InvalidParameter(format!("cannot parse channel set `{text}`"));
        if let Some((a, b)) = inner.split_once('-') {
            let a: u8 = a.trim().parse().map_err(|_| bad())?;
            let b: u8 = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            return Self::new((a..=b).collect());
        }
        let channels = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<u8>().map_err(|_| bad()))
            .collect::<Result<Vec<u8>>>()?;
        Self::new(channels)
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.0;
        if c.len() == CHANNEL_COUNT {
            return write!(f, "[{} - {}]", c[0], c[c.len() - 1]);
        }
        write!(f, "[")?;
        for (i, ch) in c.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{ch}")?;
        }
        write!(f, "]")
    }
}
