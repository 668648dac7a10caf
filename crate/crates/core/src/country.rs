//! Country code handling for third-country transfer checks.

/// EEA member states (EU-27 plus Iceland, Liechtenstein, Norway).
///
/// Default home jurisdiction for the third-country lint rules; overridable
/// through `LintConfig::home_countries`.
pub const EEA_COUNTRIES: &[&str] = &[
    "AT", "BE", "BG", "HR", "CY", "CZ", "DK", "EE", "FI", "FR", "DE", "GR", "HU", "IE", "IS",
    "IT", "LI", "LV", "LT", "LU", "MT", "NL", "NO", "PL", "PT", "RO", "SE", "SI", "SK", "ES",
];

/// Whether `code` has the shape of an ISO-3166-1 alpha-2 code (two uppercase
/// ASCII letters). No registry lookup is performed.
pub fn is_valid_country_code(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase())
}
