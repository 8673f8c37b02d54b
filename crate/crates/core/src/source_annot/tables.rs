use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::domain::DomainInfo;
use super::SourceError;

const CATEGORY_CSV: &str = include_str!("../../data/category_map.csv");
const NEWS_CSV: &str = include_str!("../../data/news_sites.csv");
const REGIONS_CSV: &str = include_str!("../../data/regions.csv");

fn read_table<T: for<'de> Deserialize<'de>>(table: &'static str, reader: impl Read) -> Result<Vec<T>, SourceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| SourceError::Table {
                table,
                row: i + 2,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn open(path: &Path) -> Result<std::fs::File, SourceError> {
    std::fs::File::open(path).map_err(|source| SourceError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Raw service category name to merged category name.
#[derive(Debug, Clone, Default)]
pub struct CategoryMap {
    map: HashMap<String, String>,
}

#[derive(Deserialize)]
struct CategoryRow {
    raw_name: String,
    merged_name: String,
}

impl CategoryMap {
    pub fn from_reader(reader: impl Read) -> Result<Self, SourceError> {
        let rows: Vec<CategoryRow> = read_table("category", reader)?;
        let mut map = HashMap::with_capacity(rows.len());
        for (i, r) in rows.into_iter().enumerate() {
            if let Some(prev) = map.insert(r.raw_name.clone(), r.merged_name.clone()) {
                if prev != r.merged_name {
                    return Err(SourceError::Table {
                        table: "category",
                        row: i + 2,
                        reason: format!("{:?} mapped to both {prev:?} and {:?}", r.raw_name, r.merged_name),
                    });
                }
            }
        }
        Ok(CategoryMap { map })
    }

    pub fn load(path: &Path) -> Result<Self, SourceError> {
        Self::from_reader(open(path)?)
    }

    pub fn bundled() -> &'static CategoryMap {
        static MAP: std::sync::OnceLock<CategoryMap> = std::sync::OnceLock::new();
        MAP.get_or_init(|| CategoryMap::from_reader(CATEGORY_CSV.as_bytes()).expect("bundled category map"))
    }

    pub fn map<'a>(&'a self, raw: &'a str) -> &'a str {
        self.map.get(raw).map(String::as_str).unwrap_or(raw)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn map_categories<'a, I>(raw: I, map: &CategoryMap) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a str>,
{
    raw.into_iter().map(|r| map.map(r).to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct NewsSite {
    pub domain: String,
    pub name: String,
    pub country: String,
}

#[derive(Debug, Clone, Default)]
pub struct NewsSites {
    by_domain: HashMap<String, NewsSite>,
}

impl NewsSites {
    pub fn from_reader(reader: impl Read) -> Result<Self, SourceError> {
        let rows: Vec<NewsSite> = read_table("news", reader)?;
        let by_domain = rows
            .into_iter()
            .map(|mut r| {
                r.domain = r.domain.to_ascii_lowercase();
                (r.domain.clone(), r)
            })
            .collect();
        Ok(NewsSites { by_domain })
    }

    pub fn load(path: &Path) -> Result<Self, SourceError> {
        Self::from_reader(open(path)?)
    }

    pub fn bundled() -> &'static NewsSites {
        static SITES: std::sync::OnceLock<NewsSites> = std::sync::OnceLock::new();
        SITES.get_or_init(|| NewsSites::from_reader(NEWS_CSV.as_bytes()).expect("bundled news sites"))
    }

    pub fn get(&self, registered: &str) -> Option<&NewsSite> {
        self.by_domain.get(registered)
    }

    pub fn len(&self) -> usize {
        self.by_domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_domain.is_empty()
    }
}

pub fn match_news_site<'a>(domain: &DomainInfo, list: &'a NewsSites) -> Option<&'a NewsSite> {
    list.get(&domain.registered)
}

/// Country code to (country name, western) lookup. Codes are lowercase ccTLDs.
#[derive(Debug, Clone, Default)]
pub struct RegionTable {
    rows: HashMap<String, (String, bool)>,
}

#[derive(Deserialize)]
struct RegionRow {
    code: String,
    country: String,
    western: bool,
}

impl RegionTable {
    pub fn from_reader(reader: impl Read) -> Result<Self, SourceError> {
        let rows: Vec<RegionRow> = read_table("region", reader)?;
        Ok(RegionTable {
            rows: rows
                .into_iter()
                .map(|r| (r.code.to_ascii_lowercase(), (r.country, r.western)))
                .collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SourceError> {
        Self::from_reader(open(path)?)
    }

    pub fn bundled() -> &'static RegionTable {
        static REGIONS: std::sync::OnceLock<RegionTable> = std::sync::OnceLock::new();
        REGIONS.get_or_init(|| RegionTable::from_reader(REGIONS_CSV.as_bytes()).expect("bundled region table"))
    }

    pub fn western(&self, code: &str) -> Option<bool> {
        self.rows.get(&code.to_ascii_lowercase()).map(|r| r.1)
    }

    pub fn country(&self, code: &str) -> Option<&str> {
        self.rows.get(&code.to_ascii_lowercase()).map(|r| r.0.as_str())
    }
}

/// Year of a `YYYYMMDDhhmmss` archive timestamp.
pub fn earliest_index_year(timestamp: &str) -> Result<i32, SourceError> {
    let bad = || SourceError::Timestamp(timestamp.to_string());
    if timestamp.len() != 14 || !timestamp.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let field = |a: usize, b: usize| timestamp[a..b].parse::<u32>().map_err(|_| bad());
    let (month, day, hour, min, sec) = (field(4, 6)?, field(6, 8)?, field(8, 10)?, field(10, 12)?, field(12, 14)?);
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) || hour > 23 || min > 59 || sec > 60 {
        return Err(bad());
    }
    Ok(field(0, 4)? as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn categories_merge() {
        let m = CategoryMap::bundled();
        assert_eq!(map_categories(["Fine Art"], m), BTreeSet::from(["Arts".to_string()]));
        assert_eq!(map_categories(["Pornography", "Nudity"], m), BTreeSet::from(["NSFW".to_string()]));
        assert_eq!(map_categories(["Gardening"], m), BTreeSet::from(["Gardening".to_string()]));
    }

    #[test]
    fn conflicting_category_rows_are_rejected() {
        let csv = "raw_name,merged_name\nRadio,Audio\nRadio,Music\n";
        assert!(matches!(CategoryMap::from_reader(csv.as_bytes()), Err(SourceError::Table { row: 3, .. })));
    }

    #[test]
    fn news_sites_match_registered_domain() {
        let sites = NewsSites::bundled();
        let d = crate::source_annot::extract_base_domain("https://static.nytimes.com/a.jpg").unwrap();
        let hit = match_news_site(&d, sites).unwrap();
        assert_eq!((hit.name.as_str(), hit.country.as_str()), ("The New York Times", "US"));
        let d = crate::source_annot::extract_base_domain("https://example.org/").unwrap();
        assert!(match_news_site(&d, sites).is_none());
    }

    #[test]
    fn regions() {
        let r = RegionTable::bundled();
        assert_eq!(r.western("US"), Some(true));
        assert_eq!(r.western("in"), Some(false));
        assert_eq!(r.western("zz"), None);
    }

    #[test]
    fn archive_years() {
        assert_eq!(earliest_index_year("20130415000000").unwrap(), 2013);
        assert_eq!(earliest_index_year("19960101000000").unwrap(), 1996);
        assert!(earliest_index_year("2013").is_err());
        assert!(earliest_index_year("2013041500000x").is_err());
        assert!(earliest_index_year("20131315000000").is_err());
    }

    proptest! {
        #[test]
        fn year_matches_string_prefix(y in 1990u32..2100, mo in 1u32..=12, d in 1u32..=28, h in 0u32..24) {
            let ts = format!("{y:04}{mo:02}{d:02}{h:02}0000");
            prop_assert_eq!(earliest_index_year(&ts).unwrap(), y as i32);
        }

        #[test]
        fn category_mapping_is_order_independent(mut names in prop::collection::vec(
            prop::sample::select(vec!["Arts", "Fine Art", "Nudity", "Pornography", "Gardening", "Radio", "Stock Photos"]), 0..10)
        ) {
            let m = CategoryMap::bundled();
            let a = map_categories(names.iter().copied(), m);
            names.reverse();
            prop_assert_eq!(a, map_categories(names.iter().copied(), m));
        }
    }
}
