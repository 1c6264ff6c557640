//! Event carriers shared by the generator, the counting engine and the file formats.

use std::ops::Deref;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

/// An emission at the source, before splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceEvent {
    pub time: f64,
    pub spin: Spin,
}

/// Detector arm. D1 sits on the transmitted beam, D2 on the reflected one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Transmitted,
    Reflected,
}

impl Channel {
    pub fn code(self) -> u8 {
        match self {
            Channel::Transmitted => 0,
            Channel::Reflected => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Channel> {
        match code {
            0 => Some(Channel::Transmitted),
            1 => Some(Channel::Reflected),
            _ => None,
        }
    }
}

/// Time-ordered detection timestamps of one channel, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub channel: Channel,
    pub timestamps: Vec<f64>,
}

impl EventStream {
    pub fn new(channel: Channel, timestamps: Vec<f64>) -> Self {
        EventStream {
            channel,
            timestamps,
        }
    }

    pub fn is_sorted(&self) -> bool {
        first_unsorted(&self.timestamps).is_none()
    }
}

impl Deref for EventStream {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.timestamps
    }
}

/// Index of the first element that breaks non-decreasing order (NaN counts as a break).
pub(crate) fn first_unsorted(ts: &[f64]) -> Option<usize> {
    if let Some(i) = ts.iter().position(|t| t.is_nan()) {
        return Some(i);
    }
    ts.windows(2).position(|w| w[0] > w[1]).map(|i| i + 1)
}
