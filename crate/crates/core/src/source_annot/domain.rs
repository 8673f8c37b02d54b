use std::net::IpAddr;

use super::psl::PublicSuffixList;
use super::tables::RegionTable;
use super::SourceError;

/// How the registered domain is derived from a host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SuffixMode {
    /// Vendored public-suffix snapshot, ICANN section.
    #[default]
    Snapshot,
    /// Last two labels, no suffix knowledge.
    Naive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainInfo {
    pub host: String,
    pub registered: String,
    pub cctld: Option<String>,
    pub western: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct DomainExtractor<'a> {
    psl: &'a PublicSuffixList,
    regions: &'a RegionTable,
    mode: SuffixMode,
}

impl<'a> DomainExtractor<'a> {
    pub fn new(psl: &'a PublicSuffixList, regions: &'a RegionTable, mode: SuffixMode) -> Self {
        DomainExtractor { psl, regions, mode }
    }

    pub fn bundled() -> DomainExtractor<'static> {
        DomainExtractor {
            psl: PublicSuffixList::bundled(),
            regions: RegionTable::bundled(),
            mode: SuffixMode::Snapshot,
        }
    }

    pub fn with_mode(mut self, mode: SuffixMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn extract(&self, raw: &str) -> Result<DomainInfo, SourceError> {
        let bad = |reason: String| SourceError::Url {
            url: raw.to_string(),
            reason,
        };
        let parsed = url::Url::parse(raw).map_err(|e| bad(e.to_string()))?;
        let host = match parsed.host() {
            Some(url::Host::Domain(d)) => d.trim_end_matches('.').to_ascii_lowercase(),
            Some(url::Host::Ipv4(ip)) => return Ok(self.ip_host(ip.into())),
            Some(url::Host::Ipv6(ip)) => return Ok(self.ip_host(ip.into())),
            None => return Err(bad("no host".into())),
        };
        if host.is_empty() || host.split('.').any(str::is_empty) {
            return Err(bad("empty host label".into()));
        }
        let registered = match self.mode {
            SuffixMode::Snapshot => self.psl.registered_domain(&host),
            SuffixMode::Naive => {
                let labels: Vec<&str> = host.split('.').collect();
                Some(labels[labels.len().saturating_sub(2)..].join("."))
            }
        }
        .unwrap_or_else(|| host.clone());
        let last = host.rsplit('.').next().unwrap_or_default();
        let cctld = (host.contains('.') && last.len() == 2 && last.bytes().all(|b| b.is_ascii_alphabetic()))
            .then(|| last.to_string());
        let western = cctld.as_deref().and_then(|c| self.regions.western(c));
        Ok(DomainInfo {
            host,
            registered,
            cctld,
            western,
        })
    }

    fn ip_host(&self, ip: IpAddr) -> DomainInfo {
        let host = ip.to_string();
        DomainInfo {
            registered: host.clone(),
            host,
            cctld: None,
            western: None,
        }
    }
}

/// Extract with the bundled snapshot and region table.
pub fn extract_base_domain(url: &str) -> Result<DomainInfo, SourceError> {
    DomainExtractor::bundled().extract(url)
}
