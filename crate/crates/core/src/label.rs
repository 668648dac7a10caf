//! Activity label normalization.
//!
//! Labels are the only join key between log events and model activities, so
//! both sides go through the same normalization: Unicode NFC plus whitespace
//! trim.

use unicode_normalization::UnicodeNormalization;

/// Normalize an activity label for comparison across model and log.
pub fn normalize_label(raw: &str) -> String {
    raw.trim().nfc().collect()
}
