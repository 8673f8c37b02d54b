use std::fmt;

/// External services with fixture support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Service {
    Categories,
    Wayback,
    Faces,
    Dns,
}

impl Service {
    pub const ALL: [Service; 4] = [Service::Categories, Service::Wayback, Service::Faces, Service::Dns];

    pub fn name(self) -> &'static str {
        match self {
            Service::Categories => "categories",
            Service::Wayback => "wayback",
            Service::Faces => "faces",
            Service::Dns => "dns",
        }
    }
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A service plus a canonical request string. Fields are sorted by name
/// and form-encoded, so distinct field sets never collide.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RequestKey {
    pub service: Service,
    pub canonical: String,
}

fn normalize_host(host: &str) -> String {
    host.trim().trim_end_matches('.').to_ascii_lowercase()
}

impl RequestKey {
    pub fn new(service: Service, fields: &[(&str, &str)]) -> Self {
        let mut sorted: Vec<_> = fields.to_vec();
        sorted.sort();
        let canonical = url::form_urlencoded::Serializer::new(String::new())
            .extend_pairs(sorted)
            .finish();
        RequestKey { service, canonical }
    }

    pub fn categories(domain: &str) -> Self {
        Self::new(Service::Categories, &[("domain", &normalize_host(domain))])
    }

    /// URLs go through WHATWG parsing, which lowercases the scheme and host.
    /// Unparseable input is kept verbatim.
    pub fn wayback(target: &str) -> Self {
        let canon = url::Url::parse(target.trim())
            .map(String::from)
            .unwrap_or_else(|_| target.trim().to_string());
        Self::new(Service::Wayback, &[("url", &canon)])
    }

    pub fn faces(uid: &str) -> Self {
        Self::new(Service::Faces, &[("uid", uid.trim())])
    }

    pub fn dns(host: &str) -> Self {
        Self::new(Service::Dns, &[("host", &normalize_host(host))])
    }

    pub fn field(&self, name: &str) -> Option<String> {
        url::form_urlencoded::parse(self.canonical.as_bytes())
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.into_owned())
    }
}

impl fmt::Display for RequestKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}?{}", self.service, self.canonical)
    }
}
