//! Knowledge-unit identifiers and per-file occurrence vectors.

use std::fmt;
use std::ops::{Add, AddAssign, Index};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of Java knowledge units.
pub const KU_COUNT: usize = 28;

const KU_NAMES: [&str; KU_COUNT] = [
    "Data Type",
    "Operator and Decision",
    "Array",
    "Loop",
    "Method and Encapsulation",
    "Inheritance",
    "Advanced Class Design",
    "Generics and Collection",
    "Functional Interface",
    "Stream API",
    "Exception",
    "Date Time API",
    "IO",
    "NIO",
    "String Processing",
    "Concurrency",
    "Database",
    "Localization",
    "Java Persistence",
    "Enterprise Java Bean",
    "Java Message Service API",
    "SOAP Web Service",
    "Servlet",
    "Java REST API",
    "Websocket",
    "Java Server Faces",
    "Contexts and Dependency Injection",
    "Batch Processing",
];

/// One of the 28 knowledge units, `K1` through `K28`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KuId(u8);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("knowledge unit index {0} is outside 1..=28")]
pub struct InvalidKuId(pub i64);

impl KuId {
    pub fn new(index: u8) -> Result<Self, InvalidKuId> {
        if (1..=KU_COUNT as u8).contains(&index) {
            Ok(KuId(index))
        } else {
            Err(InvalidKuId(index as i64))
        }
    }

    /// 1-based index as printed in `K<n>`.
    pub fn index(self) -> u8 {
        self.0
    }

    /// 0-based position inside a [`KuVector`].
    pub fn position(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_position(pos: usize) -> Self {
        assert!(pos < KU_COUNT, "KU position {pos} out of range");
        KuId(pos as u8 + 1)
    }

    pub fn name(self) -> &'static str {
        KU_NAMES[self.position()]
    }

    pub fn all() -> impl Iterator<Item = KuId> + Clone {
        (1..=KU_COUNT as u8).map(KuId)
    }
}

impl fmt::Display for KuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "K{}", self.0)
    }
}

impl TryFrom<i64> for KuId {
    type Error = InvalidKuId;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        u8::try_from(value)
            .ok()
            .and_then(|v| KuId::new(v).ok())
            .ok_or(InvalidKuId(value))
    }
}

impl FromStr for KuId {
    type Err = InvalidKuId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.trim().trim_start_matches(['K', 'k']);
        let value: i64 = digits.parse().map_err(|_| InvalidKuId(-1))?;
        KuId::try_from(value)
    }
}

impl Serialize for KuId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for KuId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = i64::deserialize(deserializer)?;
        KuId::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// A key capability of a knowledge unit, written `K8.C2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CapabilityId {
    pub ku: KuId,
    #[serde(rename = "capability")]
    pub cap_index: u16,
}

impl CapabilityId {
    pub fn new(ku: KuId, cap_index: u16) -> Self {
        CapabilityId { ku, cap_index }
    }
}

impl fmt::Display for CapabilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.C{}", self.ku, self.cap_index)
    }
}

/// Occurrence counts of every knowledge unit in one file (or an aggregate of files).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct KuVector([u64; KU_COUNT]);

impl KuVector {
    pub fn zero() -> Self {
        KuVector([0; KU_COUNT])
    }

    pub fn from_counts(counts: [u64; KU_COUNT]) -> Self {
        KuVector(counts)
    }

    pub fn get(&self, ku: KuId) -> u64 {
        self.0[ku.position()]
    }

    pub fn add_to(&mut self, ku: KuId, n: u64) {
        self.0[ku.position()] += n;
    }

    pub fn counts(&self) -> &[u64; KU_COUNT] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Knowledge units with a positive count, in index order.
    pub fn present(&self) -> impl Iterator<Item = KuId> + '_ {
        KuId::all().filter(move |k| self.get(*k) > 0)
    }

    /// True when every entry is at least the corresponding entry of `other`.
    pub fn dominates(&self, other: &KuVector) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a >= b)
    }
}

impl Index<KuId> for KuVector {
    type Output = u64;

    fn index(&self, ku: KuId) -> &u64 {
        &self.0[ku.position()]
    }
}

impl Add for KuVector {
    type Output = KuVector;

    fn add(mut self, rhs: KuVector) -> KuVector {
        self += rhs;
        self
    }
}

impl AddAssign for KuVector {
    fn add_assign(&mut self, rhs: KuVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl<'a> AddAssign<&'a KuVector> for KuVector {
    fn add_assign(&mut self, rhs: &'a KuVector) {
        *self += *rhs;
    }
}

impl std::iter::Sum for KuVector {
    fn sum<I: Iterator<Item = KuVector>>(iter: I) -> Self {
        iter.fold(KuVector::zero(), |acc, v| acc + v)
    }
}

// Serialized as a plain array of 28 counts.
impl Serialize for KuVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KuVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<u64>::deserialize(deserializer)?;
        let counts: [u64; KU_COUNT] = raw
            .try_into()
            .map_err(|v: Vec<u64>| serde::de::Error::invalid_length(v.len(), &"exactly 28 knowledge-unit counts"))?;
        Ok(KuVector(counts))
    }
}

/// Column labels used in delimited output, e.g. `K8_Generics_and_Collection`.
pub fn ku_column_names() -> Vec<String> {
    KuId::all()
        .map(|k| format!("{}_{}", k, k.name().replace(' ', "_")))
        .collect()
}
