use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ClientError, FetchMode, FixtureStore, RequestKey, Service, Transport};

/// Requests issued per service and how many returned a non-empty answer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Coverage {
    pub requested: u64,
    pub answered: u64,
}

impl Coverage {
    pub fn rate(&self) -> Option<f64> {
        (self.requested > 0).then(|| self.answered as f64 / self.requested as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceRegion {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceAttributes {
    pub region: FaceRegion,
    pub gender: Option<String>,
    pub age: Option<(u32, u32)>,
}

pub struct Client {
    store: FixtureStore,
    mode: FetchMode,
    transport: Arc<dyn Transport>,
    coverage: Mutex<BTreeMap<Service, Coverage>>,
}

fn malformed(service: Service, reason: impl Into<String>) -> ClientError {
    ClientError::Malformed {
        service: service.name().to_string(),
        reason: reason.into(),
    }
}

fn json(service: Service, body: &[u8]) -> Result<Value, ClientError> {
    serde_json::from_slice(body).map_err(|e| malformed(service, e.to_string()))
}

impl Client {
    pub fn new(store: FixtureStore, mode: FetchMode, transport: Arc<dyn Transport>) -> Self {
        Client {
            store,
            mode,
            transport,
            coverage: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn mode(&self) -> FetchMode {
        self.mode
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }

    pub fn coverage(&self) -> BTreeMap<Service, Coverage> {
        self.coverage.lock().unwrap().clone()
    }

    fn count(&self, service: Service, answered: bool) {
        let mut c = self.coverage.lock().unwrap();
        let e = c.entry(service).or_default();
        e.requested += 1;
        e.answered += answered as u64;
    }

    fn live(&self, key: &RequestKey) -> Result<(u16, Vec<u8>), ClientError> {
        let (status, body) = self.transport.fetch(key)?;
        if !(200..300).contains(&status) {
            return Err(ClientError::Http {
                service: key.service.name().to_string(),
                status,
                message: String::from_utf8_lossy(&body).chars().take(200).collect(),
            });
        }
        Ok((status, body))
    }

    /// Replay returns stored bytes; record fetches, stores, then returns the
    /// stored bytes; live bypasses the store.
    pub fn fetch_with_replay(&self, key: &RequestKey) -> Result<Vec<u8>, ClientError> {
        match self.mode {
            FetchMode::Replay => self.store.get(key)?.ok_or_else(|| ClientError::FixtureMissing {
                service: key.service.name().to_string(),
                key: key.canonical.clone(),
            }),
            FetchMode::Record => {
                if let Some(b) = self.store.get(key)? {
                    return Ok(b);
                }
                let (status, body) = self.live(key)?;
                let now = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                self.store.put(key, &body, status, now)?;
                Ok(self.store.get(key)?.unwrap_or(body))
            }
            FetchMode::Live => self.live(key).map(|(_, b)| b),
        }
    }

    pub fn fetch_domain_categories(&self, domain: &str) -> Result<BTreeSet<String>, ClientError> {
        let body = self.fetch_with_replay(&RequestKey::categories(domain))?;
        let cats = parse_categories(&body)?;
        self.count(Service::Categories, !cats.is_empty());
        Ok(cats)
    }

    pub fn fetch_wayback_first(&self, url: &str) -> Result<Option<String>, ClientError> {
        let body = self.fetch_with_replay(&RequestKey::wayback(url))?;
        let ts = parse_wayback(&body)?;
        self.count(Service::Wayback, ts.is_some());
        Ok(ts)
    }

    pub fn fetch_face_attributes(&self, uid: &str) -> Result<Vec<FaceAttributes>, ClientError> {
        let body = self.fetch_with_replay(&RequestKey::faces(uid))?;
        let faces = parse_face_details(&body)?;
        self.count(Service::Faces, !faces.is_empty());
        Ok(faces)
    }

    pub fn resolve_ipv4(&self, host: &str) -> Result<Option<u32>, ClientError> {
        let body = self.fetch_with_replay(&RequestKey::dns(host))?;
        let ip = parse_dns(&body)?;
        self.count(Service::Dns, ip.is_some());
        Ok(ip)
    }
}

/// Domain-intelligence response: `result.content_categories[].name`.
/// A missing or null list means the domain is uncategorised.
pub fn parse_categories(body: &[u8]) -> Result<BTreeSet<String>, ClientError> {
    let s = Service::Categories;
    let v = json(s, body)?;
    if v.get("success").and_then(Value::as_bool) == Some(false) {
        return Err(malformed(s, format!("service reported failure: {}", v["errors"])));
    }
    let result = v.get("result").ok_or_else(|| malformed(s, "no `result` object"))?;
    let Some(list) = result.get("content_categories").filter(|l| !l.is_null()) else {
        return Ok(BTreeSet::new());
    };
    let list = list.as_array().ok_or_else(|| malformed(s, "`content_categories` is not an array"))?;
    list.iter()
        .map(|c| {
            c.get("name")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| malformed(s, "category without a name"))
        })
        .collect()
}

/// Availability response: `archived_snapshots.closest.timestamp`.
pub fn parse_wayback(body: &[u8]) -> Result<Option<String>, ClientError> {
    let s = Service::Wayback;
    let v = json(s, body)?;
    let snaps = v
        .get("archived_snapshots")
        .ok_or_else(|| malformed(s, "no `archived_snapshots`"))?;
    let Some(closest) = snaps.get("closest") else {
        return Ok(None);
    };
    if closest.get("available").and_then(Value::as_bool) == Some(false) {
        return Ok(None);
    }
    let ts = closest
        .get("timestamp")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(s, "snapshot without a timestamp"))?;
    if ts.len() != 14 || !ts.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(s, format!("bad timestamp {ts:?}")));
    }
    Ok(Some(ts.to_string()))
}

/// Face-detection response in the `FaceDetails` shape.
pub fn parse_face_details(body: &[u8]) -> Result<Vec<FaceAttributes>, ClientError> {
    let s = Service::Faces;
    let v = json(s, body)?;
    let list = v
        .get("FaceDetails")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(s, "no `FaceDetails` array"))?;
    list.iter()
        .map(|f| {
            let bb = f.get("BoundingBox").ok_or_else(|| malformed(s, "face without BoundingBox"))?;
            let num = |k: &str| {
                bb.get(k)
                    .and_then(Value::as_f64)
                    .ok_or_else(|| malformed(s, format!("BoundingBox.{k} missing")))
            };
            let region = FaceRegion {
                left: num("Left")?,
                top: num("Top")?,
                width: num("Width")?,
                height: num("Height")?,
            };
            let gender = f
                .get("Gender")
                .and_then(|g| g.get("Value"))
                .and_then(Value::as_str)
                .map(str::to_string);
            let age = match f.get("AgeRange") {
                None => None,
                Some(a) => {
                    let lo = a.get("Low").and_then(Value::as_u64);
                    let hi = a.get("High").and_then(Value::as_u64);
                    match (lo, hi) {
                        (Some(lo), Some(hi)) if lo <= hi => Some((lo as u32, hi as u32)),
                        _ => return Err(malformed(s, format!("bad AgeRange {a}"))),
                    }
                }
            };
            Ok(FaceAttributes { region, gender, age })
        })
        .collect()
}

/// `{"host": ..., "ipv4": ["a.b.c.d", ...]}`; the first address is used.
pub fn parse_dns(body: &[u8]) -> Result<Option<u32>, ClientError> {
    let s = Service::Dns;
    let v = json(s, body)?;
    let list = v
        .get("ipv4")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(s, "no `ipv4` array"))?;
    match list.first() {
        None => Ok(None),
        Some(a) => a
            .as_str()
            .and_then(crate::source_annot::parse_ipv4)
            .map(Some)
            .ok_or_else(|| malformed(s, format!("bad address {a}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::FailingTransport;

    struct Canned(Vec<u8>);

    impl Transport for Canned {
        fn fetch(&self, _: &RequestKey) -> Result<(u16, Vec<u8>), ClientError> {
            Ok((200, self.0.clone()))
        }
    }

    const STOCK: &str = r#"{"success":true,"errors":[],"messages":[],"result":{"domain":"shutterstock.com","content_categories":[{"id":133,"super_category_id":89,"name":"Stock Photos"}],"additional_information":{}}}"#;

    #[test]
    fn categories() {
        assert_eq!(
            parse_categories(STOCK.as_bytes()).unwrap(),
            BTreeSet::from(["Stock Photos".to_string()])
        );
        let none = br#"{"success":true,"result":{"domain":"x.com"}}"#;
        assert!(parse_categories(none).unwrap().is_empty());
        assert!(parse_categories(b"{").is_err());
        assert!(parse_categories(br#"{"success":false,"errors":[{"code":10000}]}"#).is_err());
    }

    #[test]
    fn wayback() {
        let hit = br#"{"url":"example.com","archived_snapshots":{"closest":{"status":"200","available":true,"url":"http://web.archive.org/web/20130415000000/http://example.com/","timestamp":"20130415000000"}}}"#;
        assert_eq!(parse_wayback(hit).unwrap().as_deref(), Some("20130415000000"));
        assert_eq!(parse_wayback(br#"{"url":"x","archived_snapshots":{}}"#).unwrap(), None);
        assert!(parse_wayback(br#"{"url":"x"}"#).is_err());
    }

    #[test]
    fn faces() {
        let one = br#"{"FaceDetails":[{"BoundingBox":{"Width":0.2,"Height":0.3,"Left":0.1,"Top":0.1},"AgeRange":{"Low":20,"High":29},"Gender":{"Value":"Female","Confidence":99.2}}]}"#;
        let f = parse_face_details(one).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].gender.as_deref(), Some("Female"));
        assert_eq!(f[0].age, Some((20, 29)));
        assert!(parse_face_details(br#"{"FaceDetails":[]}"#).unwrap().is_empty());
    }

    #[test]
    fn dns() {
        assert_eq!(parse_dns(br#"{"host":"a","ipv4":["1.0.0.84"]}"#).unwrap(), Some(16777300));
        assert_eq!(parse_dns(br#"{"host":"a","ipv4":[]}"#).unwrap(), None);
    }

    #[test]
    fn replay_miss_names_key_and_skips_network() {
        let dir = tempfile::tempdir().unwrap();
        let t = Arc::new(FailingTransport::default());
        let c = Client::new(FixtureStore::new(dir.path()), FetchMode::Replay, t.clone());
        match c.fetch_domain_categories("Example.com") {
            Err(ClientError::FixtureMissing { service, key }) => {
                assert_eq!(service, "categories");
                assert_eq!(key, "domain=example.com");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(t.calls(), 0);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Client::new(
            FixtureStore::new(dir.path()),
            FetchMode::Record,
            Arc::new(Canned(STOCK.as_bytes().to_vec())),
        );
        let first = rec.fetch_with_replay(&RequestKey::categories("shutterstock.com")).unwrap();
        let t = Arc::new(FailingTransport::default());
        let rep = Client::new(FixtureStore::new(dir.path()), FetchMode::Replay, t.clone());
        let a = rep.fetch_with_replay(&RequestKey::categories("SHUTTERSTOCK.com")).unwrap();
        let b = rep.fetch_with_replay(&RequestKey::categories("shutterstock.com")).unwrap();
        assert_eq!(first, a);
        assert_eq!(a, b);
        assert_eq!(t.calls(), 0);
        assert_eq!(rep.fetch_domain_categories("shutterstock.com").unwrap().len(), 1);
        assert_eq!(rep.coverage()[&Service::Categories], Coverage { requested: 1, answered: 1 });
    }

    #[test]
    fn live_error_carries_status() {
        struct NotFound;
        impl Transport for NotFound {
            fn fetch(&self, _: &RequestKey) -> Result<(u16, Vec<u8>), ClientError> {
                Ok((429, b"slow down".to_vec()))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let c = Client::new(FixtureStore::new(dir.path()), FetchMode::Live, Arc::new(NotFound));
        assert!(matches!(
            c.fetch_with_replay(&RequestKey::dns("a.com")),
            Err(ClientError::Http { status: 429, .. })
        ));
    }
}
