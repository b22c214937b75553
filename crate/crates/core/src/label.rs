//! The entity label vocabulary.
//!
//! Ids are fixed: `PAD` is 0 and the 19 entity classes follow in
//! alphabetical order. Checkpoints record this order and refuse to load
//! under a different one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Number of labels including `PAD`.
pub const NUM_LABELS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum EntityLabel {
    Pad = 0,
    Address,
    Background,
    Ban,
    CreditCard,
    Datetime,
    EmailAddress,
    Float,
    HashOrKey,
    Integer,
    Ipv4,
    Ipv6,
    MacAddress,
    Ordinal,
    Person,
    PhoneNumber,
    Quantity,
    Ssn,
    Url,
    Uuid,
}

use EntityLabel::*;

impl EntityLabel {
    /// All labels in id order.
    pub const ALL: [EntityLabel; NUM_LABELS] = [
        Pad,
        Address,
        Background,
        Ban,
        CreditCard,
        Datetime,
        EmailAddress,
        Float,
        HashOrKey,
        Integer,
        Ipv4,
        Ipv6,
        MacAddress,
        Ordinal,
        Person,
        PhoneNumber,
        Quantity,
        Ssn,
        Url,
        Uuid,
    ];

    /// The 18 entity classes a generator can produce values for
    /// (everything except `PAD` and `BACKGROUND`).
    pub fn value_entities() -> impl Iterator<Item = EntityLabel> {
        Self::ALL
            .into_iter()
            .filter(|l| !matches!(l, Pad | Background))
    }

    /// The 19 real classes (everything except `PAD`).
    pub fn entities() -> impl Iterator<Item = EntityLabel> {
        Self::ALL.into_iter().skip(1)
    }

    /// Entities whose generated values are fully covered by their regex
    /// pattern set.
    pub const GRAMMAR_CONFORMANT: [EntityLabel; 10] = [
        Ssn,
        Uuid,
        Ipv4,
        Ipv6,
        MacAddress,
        CreditCard,
        EmailAddress,
        Url,
        Ban,
        PhoneNumber,
    ];

    #[inline]
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<EntityLabel> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Pad => "PAD",
            Address => "ADDRESS",
            Background => "BACKGROUND",
            Ban => "BAN",
            CreditCard => "CREDIT_CARD",
            Datetime => "DATETIME",
            EmailAddress => "EMAIL_ADDRESS",
            Float => "FLOAT",
            HashOrKey => "HASH_OR_KEY",
            Integer => "INTEGER",
            Ipv4 => "IPV4",
            Ipv6 => "IPV6",
            MacAddress => "MAC_ADDRESS",
            Ordinal => "ORDINAL",
            Person => "PERSON",
            PhoneNumber => "PHONE_NUMBER",
            Quantity => "QUANTITY",
            Ssn => "SSN",
            Url => "URL",
            Uuid => "UUID",
        }
    }

    /// The 14 sensitive (NPI) classes.
    pub fn is_sensitive(self) -> bool {
        !matches!(
            self,
            Pad | Background | Float | Integer | Ordinal | Quantity
        )
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

impl Serialize for EntityLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EntityLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Canonical label order, as written into checkpoints and reports.
pub fn label_order() -> Vec<&'static str> {
    EntityLabel::ALL.iter().map(|l| l.name()).collect()
}
