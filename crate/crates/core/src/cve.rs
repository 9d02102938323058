// SPDX-License-Identifier: Apache-2.0

//! CVE record schema: identifiers, severity bands, lifecycle statuses and
//! affected-version ranges.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::identity::ParticipantId;

pub const MIN_CVE_YEAR: u32 = 1999;
pub const MAX_DESCRIPTION_BYTES: usize = 16 * 1024;
pub const DISPUTED_PREFIX: &str = "DISPUTED: ";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CveIdError {
    #[error("malformed CVE id {0:?}")]
    MalformedId(String),
    #[error("CVE year {0} is before {MIN_CVE_YEAR}")]
    YearOutOfRange(u32),
}

// ---------------------------------------------------------------------------
// CveId
// ---------------------------------------------------------------------------

/// `CVE-<year>-<sequence>`; orders by year, then sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CveId {
    pub year: u32,
    pub sequence: u64,
}

impl CveId {
    pub fn new(year: u32, sequence: u64) -> Result<Self, CveIdError> {
        if year < MIN_CVE_YEAR {
            return Err(CveIdError::YearOutOfRange(year));
        }
        if sequence == 0 {
            return Err(CveIdError::MalformedId(format!("CVE-{year}-{sequence:04}")));
        }
        Ok(Self { year, sequence })
    }

    /// The numeric portion used as the last merge tie-break.
    pub fn numeric_portion(&self) -> u64 {
        self.sequence
    }
}

pub fn parse_cve_id(text: &str) -> Result<CveId, CveIdError> {
    let malformed = || CveIdError::MalformedId(text.to_string());
    let rest = text.strip_prefix("CVE-").ok_or_else(malformed)?;
    let (year, seq) = rest.split_once('-').ok_or_else(malformed)?;
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if year.len() != 4 || !all_digits(year) || seq.len() < 4 || !all_digits(seq) {
        return Err(malformed());
    }
    let year: u32 = year.parse().map_err(|_| malformed())?;
    let sequence: u64 = seq.parse().map_err(|_| malformed())?;
    if year < MIN_CVE_YEAR {
        return Err(CveIdError::YearOutOfRange(year));
    }
    if sequence == 0 {
        return Err(malformed());
    }
    Ok(CveId { year, sequence })
}

impl fmt::Display for CveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CVE-{}-{:04}", self.year, self.sequence)
    }
}

impl FromStr for CveId {
    type Err = CveIdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cve_id(s)
    }
}

impl Serialize for CveId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CveId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let id = parse_cve_id(&s).map_err(serde::de::Error::custom)?;
        if id.to_string() != s {
            return Err(serde::de::Error::custom(format!("non-canonical CVE id {s:?}")));
        }
        Ok(id)
    }
}

// ---------------------------------------------------------------------------
// Severity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SeverityLevel {
    None,
    Low,
    Medium,
    High,
    Critical,
}

impl SeverityLevel {
    /// Qualitative CVSS v3 band for a score expressed in tenths (0..=100).
    pub fn for_score_tenths(tenths: u16) -> Self {
        match tenths {
            0 => SeverityLevel::None,
            1..=39 => SeverityLevel::Low,
            40..=69 => SeverityLevel::Medium,
            70..=89 => SeverityLevel::High,
            _ => SeverityLevel::Critical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Severity {
    pub level: SeverityLevel,
    #[serde(default)]
    pub cvss_score: Option<f64>,
}

impl Severity {
    pub fn new(level: SeverityLevel, cvss_score: Option<f64>) -> Self {
        Self { level, cvss_score }
    }

    /// Scores are quoted with one decimal; this is the score times ten, or
    /// `None` when absent, out of range or more precise than a tenth.
    pub fn score_tenths(&self) -> Option<u16> {
        let score = self.cvss_score?;
        if !score.is_finite() || !(0.0..=10.0).contains(&score) {
            return None;
        }
        let scaled = score * 10.0;
        let tenths = scaled.round();
        ((scaled - tenths).abs() < 1e-6).then_some(tenths as u16)
    }
}

// ---------------------------------------------------------------------------
// Status machine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CveStatus {
    Draft,
    Published,
    Archived,
    Rejected,
    Disputed,
}

impl CveStatus {
    pub const ALL: [CveStatus; 5] = [
        CveStatus::Draft,
        CveStatus::Published,
        CveStatus::Archived,
        CveStatus::Rejected,
        CveStatus::Disputed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CveStatus::Draft => "DRAFT",
            CveStatus::Published => "PUBLISHED",
            CveStatus::Archived => "ARCHIVED",
            CveStatus::Rejected => "REJECTED",
            CveStatus::Disputed => "DISPUTED",
        }
    }
}

impl fmt::Display for CveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CveStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CveStatus::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}

pub const LEGAL_TRANSITIONS: [(CveStatus, CveStatus); 7] = {
    use CveStatus::*;
    [
        (Draft, Published),
        (Published, Archived),
        (Draft, Rejected),
        (Published, Rejected),
        (Published, Disputed),
        (Disputed, Published),
        (Disputed, Rejected),
    ]
};

pub fn status_transition_valid(from: CveStatus, to: CveStatus) -> bool {
    use CveStatus::*;
    matches!(
        (from, to),
        (Draft, Published)
            | (Published, Archived)
            | (Draft, Rejected)
            | (Published, Rejected)
            | (Published, Disputed)
            | (Disputed, Published)
            | (Disputed, Rejected)
    )
}

// ---------------------------------------------------------------------------
// Versions
// ---------------------------------------------------------------------------

/// `major.minor.patch`, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Self { major, minor, patch }
    }

    /// The immediately following version.
    pub fn successor(self) -> Option<Self> {
        Some(Self { patch: self.patch.checked_add(1)?, ..self })
    }

    /// The immediately preceding version. `x.y.0` has none: infinitely many
    /// `x.(y-1).*` patches lie below it.
    pub fn predecessor(self) -> Option<Self> {
        Some(Self { patch: self.patch.checked_sub(1)?, ..self })
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

impl FromStr for Version {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        let [major, minor, patch] = parts.as_slice() else {
            return Err(format!("version {s:?} is not major.minor.patch"));
        };
        let num = |p: &str| -> Result<u64, String> {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) || (p.len() > 1 && p.starts_with('0')) {
                return Err(format!("bad version component {p:?} in {s:?}"));
            }
            p.parse().map_err(|_| format!("version component {p:?} too large"))
        };
        Ok(Version::new(num(major)?, num(minor)?, num(patch)?))
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_true() -> bool {
    true
}

/// A contiguous run of versions. `lo` is always inclusive; `hi` is inclusive
/// unless `hi_inclusive` is false, which is only needed when the range ends
/// just below an `x.y.0` version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VersionRange {
    pub lo: Version,
    pub hi: Version,
    #[serde(default = "default_true")]
    pub hi_inclusive: bool,
}

impl VersionRange {
    pub fn inclusive(lo: Version, hi: Version) -> Self {
        Self { lo, hi, hi_inclusive: true }
    }

    pub fn is_well_formed(&self) -> bool {
        if self.hi_inclusive {
            self.lo <= self.hi && self.hi.successor().is_some()
        } else {
            self.lo < self.hi
        }
    }

    pub fn contains(&self, v: Version) -> bool {
        v >= self.lo && if self.hi_inclusive { v <= self.hi } else { v < self.hi }
    }

    /// Half-open form `[start, end)`.
    fn half_open(&self) -> (Version, Version) {
        let end = if self.hi_inclusive {
            self.hi.successor().expect("well-formed range")
        } else {
            self.hi
        };
        (self.lo, end)
    }

    fn from_half_open(start: Version, end: Version) -> Self {
        match end.predecessor() {
            Some(hi) => Self { lo: start, hi, hi_inclusive: true },
            None => Self { lo: start, hi: end, hi_inclusive: false },
        }
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hi_inclusive {
            write!(f, "[{}, {}]", self.lo, self.hi)
        } else {
            write!(f, "[{}, {})", self.lo, self.hi)
        }
    }
}

/// Sorted, disjoint, non-adjacent half-open intervals covering `ranges`.
fn normalize(ranges: &[VersionRange]) -> Vec<(Version, Version)> {
    let mut spans: Vec<_> = ranges.iter().map(VersionRange::half_open).collect();
    spans.sort();
    let mut out: Vec<(Version, Version)> = Vec::with_capacity(spans.len());
    for (start, end) in spans {
        match out.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => out.push((start, end)),
        }
    }
    out
}

/// Canonical form of a range list: sorted, disjoint and maximal.
pub fn normalize_ranges(ranges: &[VersionRange]) -> Vec<VersionRange> {
    normalize(ranges).into_iter().map(|(s, e)| VersionRange::from_half_open(s, e)).collect()
}

/// Versions covered by `a` but not by `b`, as sorted, disjoint, maximal
/// ranges.
pub fn version_ranges_subtract(a: &[VersionRange], b: &[VersionRange]) -> Vec<VersionRange> {
    let cut = normalize(b);
    let mut out = Vec::new();
    for (mut start, end) in normalize(a) {
        for &(cs, ce) in &cut {
            if ce <= start || cs >= end {
                continue;
            }
            if cs > start {
                out.push((start, cs));
            }
            start = start.max(ce);
            if start >= end {
                break;
            }
        }
        if start < end {
            out.push((start, end));
        }
    }
    out.into_iter().map(|(s, e)| VersionRange::from_half_open(s, e)).collect()
}

pub fn ranges_overlap(a: &[VersionRange], b: &[VersionRange]) -> bool {
    let (a, b) = (normalize(a), normalize(b));
    a.iter().any(|&(s1, e1)| b.iter().any(|&(s2, e2)| s1 < e2 && s2 < e1))
}

pub fn ranges_equal(a: &[VersionRange], b: &[VersionRange]) -> bool {
    normalize(a) == normalize(b)
}

// ---------------------------------------------------------------------------
// Record
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnnotationKind {
    RejectionReason,
    DisputeNote,
    MergePointer,
    SplitOrigin,
    PartialDupNote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub note: String,
    /// Related record, e.g. the canonical id of a merge.
    #[serde(default)]
    pub target: Option<CveId>,
    #[serde(default)]
    pub external_ref: Option<String>,
    pub at: u64,
}

/// Commitment to the content of an embargoed record.
///
/// While the record is a draft the plaintext is held only in `envelope`
/// (encrypted); on release the envelope is dropped and `salt` is revealed so
/// anyone can check `commitment == sha256(salt || content)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ContentSeal {
    pub commitment: String,
    #[serde(default)]
    pub envelope: Option<String>,
    #[serde(default)]
    pub salt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CveRecord {
    #[serde(rename = "cveID")]
    pub cve_id: CveId,
    pub description: String,
    pub product: String,
    pub version: Vec<VersionRange>,
    pub severity: Severity,
    pub status: CveStatus,
    pub embargo_until: Option<u64>,
    pub submitter_cna: ParticipantId,
    pub references: Vec<CveId>,
    pub annotations: Vec<Annotation>,
    pub created_at: u64,
    pub updated_at: u64,
    #[serde(default)]
    pub seal: Option<ContentSeal>,
}

impl CveRecord {
    /// True while the content fields are blanked and held encrypted.
    pub fn is_sealed(&self) -> bool {
        self.seal.as_ref().is_some_and(|s| s.envelope.is_some())
    }

    pub fn has_annotation(&self, kind: AnnotationKind) -> bool {
        self.annotations.iter().any(|a| a.kind == kind)
    }

    pub fn add_reference(&mut self, id: CveId) {
        if id != self.cve_id && !self.references.contains(&id) {
            self.references.push(id);
            self.references.sort();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptyDescription,
    DescriptionTooLong,
    EmptyProduct,
    EmptyVersion,
    InvalidVersionRange,
    InvalidCvssScore,
    SeverityBandMismatch,
    RejectedWithoutReason,
    DisputedWithoutPrefix,
    DisputedWithoutNote,
    DraftWithoutEmbargo,
    TimestampsInverted,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub field: String,
}

impl Violation {
    fn new(code: ViolationCode, field: &str) -> Self {
        Self { code, field: field.to_string() }
    }
}

/// Every violated field constraint of `record`, sorted by code. Content
/// fields of a sealed draft are not checked (they were checked before
/// sealing).
pub fn validate_schema(record: &CveRecord) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();
    if !record.is_sealed() {
        if record.description.trim().is_empty() {
            out.push(Violation::new(EmptyDescription, "description"));
        }
        if record.description.len() > MAX_DESCRIPTION_BYTES {
            out.push(Violation::new(DescriptionTooLong, "description"));
        }
        if record.product.trim().is_empty() {
            out.push(Violation::new(EmptyProduct, "product"));
        }
        if record.version.is_empty() {
            out.push(Violation::new(EmptyVersion, "version"));
        }
        if record.version.iter().any(|r| !r.is_well_formed()) {
            out.push(Violation::new(InvalidVersionRange, "version"));
        }
    }
    if record.severity.cvss_score.is_some() {
        match record.severity.score_tenths() {
            None => out.push(Violation::new(InvalidCvssScore, "severity.cvssScore")),
            Some(t) if SeverityLevel::for_score_tenths(t) != record.severity.level => {
                out.push(Violation::new(SeverityBandMismatch, "severity"))
            }
            Some(_) => {}
        }
    }
    match record.status {
        CveStatus::Rejected
            if !record.has_annotation(AnnotationKind::RejectionReason)
                && !record.has_annotation(AnnotationKind::MergePointer) =>
        {
            out.push(Violation::new(RejectedWithoutReason, "annotations"))
        }
        CveStatus::Disputed => {
            if !record.description.starts_with(DISPUTED_PREFIX) {
                out.push(Violation::new(DisputedWithoutPrefix, "description"));
            }
            if !record.has_annotation(AnnotationKind::DisputeNote) {
                out.push(Violation::new(DisputedWithoutNote, "annotations"));
            }
        }
        CveStatus::Draft if record.embargo_until.is_none() => {
            out.push(Violation::new(DraftWithoutEmbargo, "embargoUntil"))
        }
        _ => {}
    }
    if record.updated_at < record.created_at {
        out.push(Violation::new(TimestampsInverted, "updatedAt"));
    }
    out.sort();
    out
}

pub fn add_dispute_prefix(description: &str) -> String {
    if description.starts_with(DISPUTED_PREFIX) {
        description.to_string()
    } else {
        format!("{DISPUTED_PREFIX}{description}")
    }
}

pub fn strip_dispute_prefix(description: &str) -> String {
    description.strip_prefix(DISPUTED_PREFIX).unwrap_or(description).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Version {
        s.parse().unwrap()
    }

    fn r(lo: &str, hi: &str) -> VersionRange {
        VersionRange::inclusive(v(lo), v(hi))
    }

    pub(crate) fn sample_record() -> CveRecord {
        CveRecord {
            cve_id: parse_cve_id("CVE-2025-0001").unwrap(),
            description: "Heap overflow in parser".into(),
            product: "libfoo".into(),
            version: vec![r("1.0.0", "1.4.2")],
            severity: Severity::new(SeverityLevel::High, Some(7.5)),
            status: CveStatus::Published,
            embargo_until: None,
            submitter_cna: ParticipantId::new("cna.redhat").unwrap(),
            references: vec![],
            annotations: vec![],
            created_at: 10,
            updated_at: 10,
            seal: None,
        }
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_cve_id("CVE-2025-0001"), Ok(CveId { year: 2025, sequence: 1 }));
        assert_eq!(parse_cve_id("CVE-1998-0001"), Err(CveIdError::YearOutOfRange(1998)));
        assert!(matches!(parse_cve_id("CVE-2025-123"), Err(CveIdError::MalformedId(_))));
        for bad in ["cve-2025-0001", "CVE-2025-0000", "CVE-2025-00a1", "CVE-25-0001", "CVE-2025", "CVE-2025-+001"] {
            assert!(matches!(parse_cve_id(bad), Err(CveIdError::MalformedId(_))), "{bad}");
        }
        assert_eq!(parse_cve_id("CVE-2024-1234567").unwrap().to_string(), "CVE-2024-1234567");
        assert_eq!(parse_cve_id("CVE-2024-00042").unwrap().to_string(), "CVE-2024-0042");
    }

    #[test]
    fn valid_record_has_no_violations() {
        assert!(validate_schema(&sample_record()).is_empty());
    }

    #[test]
    fn band_mismatch_and_empty_description() {
        let mut rec = sample_record();
        rec.severity = Severity::new(SeverityLevel::Critical, Some(5.0));
        let codes: Vec<_> = validate_schema(&rec).into_iter().map(|v| v.code).collect();
        assert_eq!(codes, [ViolationCode::SeverityBandMismatch]);

        let mut rec = sample_record();
        rec.description.clear();
        let codes: Vec<_> = validate_schema(&rec).into_iter().map(|v| v.code).collect();
        assert_eq!(codes, [ViolationCode::EmptyDescription]);
    }

    #[test]
    fn band_edges() {
        let cases = [(0.0, SeverityLevel::None), (0.1, SeverityLevel::Low), (3.9, SeverityLevel::Low),
            (4.0, SeverityLevel::Medium), (6.9, SeverityLevel::Medium), (7.0, SeverityLevel::High),
            (8.9, SeverityLevel::High), (9.0, SeverityLevel::Critical), (10.0, SeverityLevel::Critical)];
        for (score, level) in cases {
            let s = Severity::new(level, Some(score));
            assert_eq!(SeverityLevel::for_score_tenths(s.score_tenths().unwrap()), level, "{score}");
        }
        assert_eq!(Severity::new(SeverityLevel::Low, Some(10.1)).score_tenths(), None);
        assert_eq!(Severity::new(SeverityLevel::Low, Some(3.95)).score_tenths(), None);
        assert_eq!(Severity::new(SeverityLevel::Low, Some(f64::NAN)).score_tenths(), None);
    }

    #[test]
    fn status_invariants_checked() {
        let mut rec = sample_record();
        rec.status = CveStatus::Rejected;
        assert_eq!(validate_schema(&rec)[0].code, ViolationCode::RejectedWithoutReason);
        rec.status = CveStatus::Disputed;
        let codes: Vec<_> = validate_schema(&rec).into_iter().map(|v| v.code).collect();
        assert_eq!(codes, [ViolationCode::DisputedWithoutPrefix, ViolationCode::DisputedWithoutNote]);
        rec.status = CveStatus::Draft;
        assert_eq!(validate_schema(&rec)[0].code, ViolationCode::DraftWithoutEmbargo);
        rec.embargo_until = Some(100);
        rec.updated_at = 5;
        assert_eq!(validate_schema(&rec)[0].code, ViolationCode::TimestampsInverted);
    }

    #[test]
    fn transition_matrix_has_seven_cells() {
        let mut allowed = 0;
        for from in CveStatus::ALL {
            for to in CveStatus::ALL {
                let expected = LEGAL_TRANSITIONS.contains(&(from, to));
                assert_eq!(status_transition_valid(from, to), expected, "{from}->{to}");
                allowed += expected as usize;
            }
        }
        assert_eq!(allowed, 7);
        assert!(status_transition_valid(CveStatus::Draft, CveStatus::Published));
        assert!(!status_transition_valid(CveStatus::Archived, CveStatus::Published));
    }

    #[test]
    fn subtract_examples() {
        let a = [r("1.0.0", "3.0.0")];
        let b = [r("2.0.0", "2.5.0")];
        let out = version_ranges_subtract(&a, &b);
        assert_eq!(
            out,
            [
                VersionRange { lo: v("1.0.0"), hi: v("2.0.0"), hi_inclusive: false },
                r("2.5.1", "3.0.0"),
            ]
        );
        assert_eq!(version_ranges_subtract(&a, &[]), a);
        assert!(version_ranges_subtract(&a, &a).is_empty());
        // keep [1.0.0, 2.0.0], revise [1.5.0, 3.0.0] -> (2.0.0, 3.0.0]
        assert_eq!(version_ranges_subtract(&[r("1.5.0", "3.0.0")], &[r("1.0.0", "2.0.0")]), [r("2.0.1", "3.0.0")]);
    }

    #[test]
    fn normalization_merges_adjacent_ranges() {
        let out = normalize_ranges(&[r("1.0.3", "1.0.9"), r("1.0.0", "1.0.2"), r("1.1.0", "1.2.0")]);
        assert_eq!(out, [r("1.0.0", "1.0.9"), r("1.1.0", "1.2.0")]);
        let open = VersionRange { lo: v("1.0.0"), hi: v("2.0.0"), hi_inclusive: false };
        assert_eq!(normalize_ranges(&[open, r("2.0.0", "2.1.0")]), [r("1.0.0", "2.1.0")]);
    }

    #[test]
    fn record_json_fields_are_sorted_and_embargo_null() {
        let text = crate::canonical::to_string(&sample_record());
        assert!(text.starts_with(r#"{"annotations":[],"createdAt":10,"cveID":"CVE-2025-0001","description""#));
        assert!(text.contains(r#""embargoUntil":null"#));
    }

    #[test]
    fn dispute_prefix_is_idempotent() {
        let once = add_dispute_prefix("x");
        assert_eq!(add_dispute_prefix(&once), "DISPUTED: x");
        assert_eq!(strip_dispute_prefix(&once), "x");
    }
}
