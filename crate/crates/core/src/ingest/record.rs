use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Metadata for one image-text pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub uid: String,
    pub url: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_image: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_text: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_boxes: Option<Vec<FaceBox>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

/// Pixel rectangle of a detected face, with the row of its crop embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<usize>,
}

/// Per-line failure. Never fatal: the stream counts it and moves on.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("empty uid")]
    EmptyUid,
    #[error("duplicate uid {0:?} within shard")]
    DuplicateUid(String),
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("score out of range: {0}")]
    ScoreOutOfRange(f64),
    #[error("face box {index} has non-positive or non-finite size")]
    BadFaceBox { index: usize },
    #[error("invalid language code {0:?}")]
    BadLanguage(String),
}

impl RecordError {
    /// Short stable name used as the key of skip tallies.
    pub fn reason(&self) -> &'static str {
        match self {
            RecordError::Malformed(_) => "malformed",
            RecordError::EmptyUid => "empty_uid",
            RecordError::DuplicateUid(_) => "duplicate_uid",
            RecordError::InvalidUrl(_) => "invalid_url",
            RecordError::ScoreOutOfRange(_) => "score_out_of_range",
            RecordError::BadFaceBox { .. } => "bad_face_box",
            RecordError::BadLanguage(_) => "bad_language",
        }
    }
}

/// Parse one line of the record format and validate it.
pub fn parse_record(line: &str) -> Result<SampleRecord, RecordError> {
    let mut record: SampleRecord =
        serde_json::from_str(line).map_err(|e| RecordError::Malformed(e.to_string()))?;
    record.validate()?;
    if let Some(lang) = record.language.as_mut() {
        lang.make_ascii_lowercase();
    }
    Ok(record)
}

impl SampleRecord {
    pub fn new(uid: impl Into<String>, url: impl Into<String>, text: impl Into<String>) -> Self {
        SampleRecord {
            uid: uid.into(),
            url: url.into(),
            text: text.into(),
            clip_score: None,
            embedding_image: None,
            embedding_text: None,
            face_boxes: None,
            language: None,
        }
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.uid.is_empty() {
            return Err(RecordError::EmptyUid);
        }
        match url::Url::parse(&self.url) {
            Ok(u) if u.has_host() => {}
            _ => return Err(RecordError::InvalidUrl(self.url.clone())),
        }
        if let Some(s) = self.clip_score {
            if !s.is_finite() || !(-1.0..=1.0).contains(&s) {
                return Err(RecordError::ScoreOutOfRange(s));
            }
        }
        if let Some(boxes) = &self.face_boxes {
            for (index, b) in boxes.iter().enumerate() {
                let finite = [b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite());
                if !finite || b.w <= 0.0 || b.h <= 0.0 {
                    return Err(RecordError::BadFaceBox { index });
                }
            }
        }
        if let Some(lang) = &self.language {
            if !is_language_code(lang) {
                return Err(RecordError::BadLanguage(lang.clone()));
            }
        }
        Ok(())
    }

    /// Number of detected faces; `None` when face detection was not run.
    pub fn face_count(&self) -> Option<usize> {
        self.face_boxes.as_ref().map(Vec::len)
    }
}

// ISO-639-1, optionally with a region subtag as emitted by common detectors ("zh-cn").
fn is_language_code(code: &str) -> bool {
    let lower = code.to_ascii_lowercase();
    let mut parts = lower.split('-');
    let two_letters = |s: &str| s.len() == 2 && s.bytes().all(|b| b.is_ascii_lowercase());
    match (parts.next(), parts.next(), parts.next()) {
        (Some(l), None, None) => two_letters(l),
        (Some(l), Some(r), None) => two_letters(l) && two_letters(r),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_record_with_score() {
        let r = parse_record(
            r#"{"uid":"a1","url":"https://x.com/i.jpg","text":"red dress","clip_score":0.31}"#,
        )
        .unwrap();
        assert_eq!(r.uid, "a1");
        assert_eq!(r.clip_score, Some(0.31));
        assert_eq!(r.embedding_image, None);
        assert_eq!(r.embedding_text, None);
        assert!(r.face_boxes.is_none());
    }

    #[test]
    fn rejects_relative_url() {
        let e = parse_record(r#"{"uid":"a2","url":"not a url","text":"t"}"#).unwrap_err();
        assert!(matches!(e, RecordError::InvalidUrl(_)));
    }

    #[test]
    fn rejects_score_out_of_range() {
        let e = parse_record(r#"{"uid":"a3","url":"https://y.org/p.png","text":"","clip_score":1.5}"#)
            .unwrap_err();
        assert_eq!(e, RecordError::ScoreOutOfRange(1.5));
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let r = parse_record(r#"{"uid":"a","url":"https://a.b/","text":"x","sha256":"ff","width":3}"#)
            .unwrap();
        assert_eq!(r.text, "x");
    }

    #[test]
    fn face_boxes_must_have_positive_size() {
        let ok = parse_record(
            r#"{"uid":"f","url":"https://a.b/","text":"","face_boxes":[{"x":1,"y":2,"w":3,"h":4,"embedding":0}]}"#,
        )
        .unwrap();
        assert_eq!(ok.face_count(), Some(1));
        let bad = parse_record(
            r#"{"uid":"f","url":"https://a.b/","text":"","face_boxes":[{"x":1,"y":2,"w":0,"h":4}]}"#,
        )
        .unwrap_err();
        assert_eq!(bad, RecordError::BadFaceBox { index: 0 });
    }

    #[test]
    fn empty_uid_and_garbage_lines_fail() {
        assert_eq!(
            parse_record(r#"{"uid":"","url":"https://a.b/","text":""}"#).unwrap_err(),
            RecordError::EmptyUid
        );
        assert_eq!(parse_record("{not json").unwrap_err().reason(), "malformed");
        assert_eq!(parse_record(r#"{"url":"https://a.b/"}"#).unwrap_err().reason(), "malformed");
    }

    #[test]
    fn language_is_normalized() {
        let r = parse_record(r#"{"uid":"l","url":"https://a.b/","text":"","language":"EN"}"#).unwrap();
        assert_eq!(r.language.as_deref(), Some("en"));
        let zh = parse_record(r#"{"uid":"l","url":"https://a.b/","text":"","language":"zh-cn"}"#);
        assert!(zh.is_ok());
        let bad = parse_record(r#"{"uid":"l","url":"https://a.b/","text":"","language":"english"}"#);
        assert!(matches!(bad, Err(RecordError::BadLanguage(_))));
    }
}
