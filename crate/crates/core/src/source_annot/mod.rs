//! Source-side group keys derived from sample URLs: registered domain,
//! ccTLD, IP-geolocated country, merged website category, news-site
//! membership and the first web-archive capture year.

mod domain;
mod ipdb;
mod psl;
mod tables;

use thiserror::Error;

pub use domain::{extract_base_domain, DomainExtractor, DomainInfo, SuffixMode};
pub use ipdb::{ip_country, parse_ipv4, IpRange, IpRangeDb};
pub use psl::{PublicSuffixList, PSL_DAT};
pub use tables::{
    earliest_index_year, map_categories, match_news_site, CategoryMap, NewsSite, NewsSites, RegionTable,
};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("unparseable url {url:?}: {reason}")]
    Url { url: String, reason: String },
    #[error("ip db row {row}: {reason}")]
    IpDb { row: usize, reason: String },
    #[error("{table} table row {row}: {reason}")]
    Table { table: &'static str, row: usize, reason: String },
    #[error("malformed archive timestamp {0:?}")]
    Timestamp(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
