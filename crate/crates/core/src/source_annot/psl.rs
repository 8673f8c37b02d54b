use std::collections::HashMap;

/// Vendored public-suffix snapshot.
pub const PSL_DAT: &str = include_str!("../../data/public_suffix_list.dat");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Normal,
    Wildcard,
    Exception,
}

/// Public-suffix rules, keyed by their ASCII (punycode) form.
#[derive(Debug, Clone)]
pub struct PublicSuffixList {
    rules: HashMap<String, Rule>,
    version: Option<String>,
}

fn to_ascii(label_seq: &str) -> Option<String> {
    if label_seq.is_ascii() {
        return Some(label_seq.to_ascii_lowercase());
    }
    match url::Host::parse(label_seq) {
        Ok(url::Host::Domain(d)) => Some(d),
        _ => None,
    }
}

impl PublicSuffixList {
    /// Parse the standard `.dat` format. Rules after the
    /// `===BEGIN PRIVATE DOMAINS===` marker are kept only if `include_private`.
    pub fn parse(text: &str, include_private: bool) -> Self {
        let mut rules = HashMap::new();
        let mut version = None;
        for line in text.lines() {
            let line = line.trim();
            if let Some(v) = line.strip_prefix("// VERSION:") {
                version = Some(v.trim().to_string());
            }
            if line.contains("===BEGIN PRIVATE DOMAINS===") && !include_private {
                break;
            }
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let rule = line.split_whitespace().next().unwrap_or_default();
            let (kind, body) = if let Some(r) = rule.strip_prefix('!') {
                (Rule::Exception, r)
            } else if let Some(r) = rule.strip_prefix("*.") {
                (Rule::Wildcard, r)
            } else {
                (Rule::Normal, rule)
            };
            if let Some(ascii) = to_ascii(body) {
                // A name can be both a normal rule and a wildcard parent.
                let key = match kind {
                    Rule::Wildcard => format!("*.{ascii}"),
                    Rule::Exception => format!("!{ascii}"),
                    Rule::Normal => ascii,
                };
                rules.insert(key, kind);
            }
        }
        PublicSuffixList { rules, version }
    }

    pub fn bundled() -> &'static PublicSuffixList {
        static LIST: std::sync::OnceLock<PublicSuffixList> = std::sync::OnceLock::new();
        LIST.get_or_init(|| PublicSuffixList::parse(PSL_DAT, false))
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Number of trailing labels forming the public suffix of `host`.
    pub fn suffix_labels(&self, host: &str) -> usize {
        let labels: Vec<&str> = host.split('.').collect();
        let n = labels.len();
        let mut best = 1; // implicit "*" rule
        for i in 0..n {
            let candidate = labels[i..].join(".");
            if self.rules.contains_key(&format!("!{candidate}")) {
                return n - i - 1;
            }
            if self.rules.contains_key(&candidate) {
                best = best.max(n - i);
            }
            if i + 1 < n && self.rules.contains_key(&format!("*.{}", labels[i + 1..].join("."))) {
                best = best.max(n - i);
            }
        }
        best
    }

    /// Public suffix plus one label, or `None` when `host` is itself a suffix.
    pub fn registered_domain(&self, host: &str) -> Option<String> {
        let labels: Vec<&str> = host.split('.').collect();
        let s = self.suffix_labels(host);
        (labels.len() > s).then(|| labels[labels.len() - s - 1..].join("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_loads_icann_section() {
        let psl = PublicSuffixList::bundled();
        assert!(psl.len() > 5_000);
        assert!(psl.version().unwrap().starts_with("20"));
    }

    #[test]
    fn standard_cases() {
        let psl = PublicSuffixList::bundled();
        assert_eq!(psl.registered_domain("www.shutterstock.com").as_deref(), Some("shutterstock.com"));
        assert_eq!(psl.registered_domain("img.example.co.uk").as_deref(), Some("example.co.uk"));
        assert_eq!(psl.registered_domain("co.uk"), None);
        assert_eq!(psl.registered_domain("a.b.example.com.au").as_deref(), Some("example.com.au"));
        // Unlisted TLD falls back to the implicit "*" rule.
        assert_eq!(psl.registered_domain("foo.bar.example").as_deref(), Some("bar.example"));
    }

    #[test]
    fn wildcard_and_exception_rules() {
        let psl = PublicSuffixList::parse("*.ck\n!www.ck\n", false);
        assert_eq!(psl.registered_domain("a.b.ck").as_deref(), Some("a.b.ck"));
        assert_eq!(psl.registered_domain("www.ck").as_deref(), Some("www.ck"));
        assert_eq!(psl.registered_domain("x.www.ck").as_deref(), Some("www.ck"));
    }

    #[test]
    fn private_section_is_optional() {
        let text = "com\n// ===BEGIN PRIVATE DOMAINS===\nblogspot.com\n";
        let icann = PublicSuffixList::parse(text, false);
        let all = PublicSuffixList::parse(text, true);
        assert_eq!(icann.registered_domain("me.blogspot.com").as_deref(), Some("blogspot.com"));
        assert_eq!(all.registered_domain("me.blogspot.com").as_deref(), Some("me.blogspot.com"));
    }

    #[test]
    fn unicode_rules_are_matched_in_punycode() {
        let psl = PublicSuffixList::parse("公司.cn\ncn\n", false);
        assert_eq!(psl.registered_domain("www.example.xn--55qx5d.cn").as_deref(), Some("example.xn--55qx5d.cn"));
    }
}
