//! Timestamp conventions shared across the framework.
//!
//! Registry and catalog documents carry UTC timestamps at second precision
//! rendered as `YYYY-MM-DDTHH:MM:SSZ`. Invocation records use the
//! `MM/DD/YYYY HH:MM:SS` rendering instead.

use chrono::{DateTime, SubsecRound, Utc};

pub const ENTRY_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
pub const RECORD_DATE_FORMAT: &str = "%m/%d/%Y %H:%M:%S";

/// Current UTC time truncated to whole seconds.
pub fn now_utc() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}

/// Render a timestamp in the entry document format.
pub fn format_entry_time(ts: &DateTime<Utc>) -> String {
    ts.format(ENTRY_TIME_FORMAT).to_string()
}

/// Parse a timestamp in the entry document format.
pub fn parse_entry_time(text: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
    let naive = chrono::NaiveDateTime::parse_from_str(text, ENTRY_TIME_FORMAT)?;
    Ok(DateTime::from_naive_utc_and_offset(naive, Utc))
}

/// Render a timestamp in the invocation record format.
pub fn format_record_date(ts: &DateTime<Utc>) -> String {
    ts.format(RECORD_DATE_FORMAT).to_string()
}

/// Serde adapter for `DateTime<Utc>` fields in entry documents.
pub mod entry_time {
    use chrono::{DateTime, Utc};
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S>(ts: &DateTime<Utc>, serializer: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
    {
        serializer.serialize_str(&super::format_entry_time(ts))
    }

    pub fn deserialize<'de, D>(deserializer: D) -> Result<DateTime<Utc>, D::Error>
    where
        D: Deserializer<'de>,
    {
        let text = String::deserialize(deserializer)?;
        super::parse_entry_time(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for optional `DateTime<Utc>` fields in entry documents.
pub mod entry_time_opt {
    use chrono::{DateTime, Utc};
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S>(ts: &Option<DateTime<Utc>>, serializer: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
    {
        match ts {
            Some(ts) => serializer.serialize_some(&super::format_entry_time(ts)),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D>(deserializer: D) -> Result<Option<DateTime<Utc>>, D::Error>
    where
        D: Deserializer<'de>,
    {
        let text: Option<String> = Option::deserialize(deserializer)?;
        match text {
            Some(text) => super::parse_entry_time(&text)
                .map(Some)
                .map_err(serde::de::Error::custom),
            None => Ok(None),
        }
    }
}
