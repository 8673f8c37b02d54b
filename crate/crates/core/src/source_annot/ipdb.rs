use std::io::Read;
use std::net::Ipv4Addr;
use std::path::Path;

use super::SourceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpRange {
    pub ip_from: u32,
    pub ip_to: u32,
    /// `None` for the `-` placeholder rows of the LITE layout.
    pub country_code: Option<String>,
}

/// Sorted, disjoint IPv4 ranges with a country code each.
#[derive(Debug, Clone, Default)]
pub struct IpRangeDb {
    rows: Vec<IpRange>,
    skipped_ipv6: usize,
}

impl IpRangeDb {
    /// Validate ordering and disjointness. `row` numbers in errors are 1-based.
    pub fn from_rows(rows: Vec<IpRange>) -> Result<Self, SourceError> {
        for (i, r) in rows.iter().enumerate() {
            if r.ip_from > r.ip_to {
                return Err(SourceError::IpDb {
                    row: i + 1,
                    reason: format!("ip_from {} > ip_to {}", r.ip_from, r.ip_to),
                });
            }
            if i > 0 {
                let prev = &rows[i - 1];
                if r.ip_from < prev.ip_from {
                    return Err(SourceError::IpDb {
                        row: i + 1,
                        reason: format!("unsorted: ip_from {} after {}", r.ip_from, prev.ip_from),
                    });
                }
                if r.ip_from <= prev.ip_to {
                    return Err(SourceError::IpDb {
                        row: i + 1,
                        reason: format!("overlaps previous range ending at {}", prev.ip_to),
                    });
                }
            }
        }
        Ok(IpRangeDb { rows, skipped_ipv6: 0 })
    }

    /// Parse the `ip_from,ip_to,country_code[,country_name]` CSV layout.
    /// A header row is tolerated; rows whose bounds exceed `u32` are IPv6 and
    /// skipped. Error row numbers refer to file lines.
    pub fn from_reader(reader: impl Read) -> Result<Self, SourceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<IpRange> = Vec::new();
        let mut lines: Vec<usize> = Vec::new();
        let mut skipped_ipv6 = 0;
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| SourceError::IpDb {
                row: line,
                reason: e.to_string(),
            })?;
            if rec.len() < 3 {
                return Err(SourceError::IpDb {
                    row: line,
                    reason: format!("expected at least 3 fields, got {}", rec.len()),
                });
            }
            let (from, to) = (&rec[0], &rec[1]);
            if i == 0 && from.parse::<u128>().is_err() {
                continue; // header
            }
            let parse = |s: &str| {
                s.parse::<u128>().map_err(|_| SourceError::IpDb {
                    row: line,
                    reason: format!("not an integer address: {s:?}"),
                })
            };
            let (from, to) = (parse(from)?, parse(to)?);
            if from > u32::MAX as u128 || to > u32::MAX as u128 {
                skipped_ipv6 += 1;
                continue;
            }
            let code = rec[2].trim();
            let country_code = (!code.is_empty() && code != "-").then(|| code.to_ascii_uppercase());
            rows.push(IpRange {
                ip_from: from as u32,
                ip_to: to as u32,
                country_code,
            });
            lines.push(line);
        }
        if skipped_ipv6 > 0 {
            log::warn!("ip db: skipped {skipped_ipv6} IPv6 rows");
        }
        let mut db = IpRangeDb::from_rows(rows).map_err(|e| match e {
            SourceError::IpDb { row, reason } => SourceError::IpDb {
                row: lines[row - 1],
                reason,
            },
            other => other,
        })?;
        db.skipped_ipv6 = skipped_ipv6;
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self, SourceError> {
        let f = std::fs::File::open(path).map_err(|source| SourceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn rows(&self) -> &[IpRange] {
        &self.rows
    }

    pub fn skipped_ipv6(&self) -> usize {
        self.skipped_ipv6
    }

    pub fn lookup(&self, ip: u32) -> Option<&str> {
        let idx = self.rows.partition_point(|r| r.ip_from <= ip);
        let row = self.rows.get(idx.checked_sub(1)?)?;
        if ip > row.ip_to {
            return None;
        }
        row.country_code.as_deref()
    }
}

pub fn ip_country(db: &IpRangeDb, ip: u32) -> Option<&str> {
    db.lookup(ip)
}

pub fn parse_ipv4(s: &str) -> Option<u32> {
    s.trim().parse::<Ipv4Addr>().ok().map(u32::from)
}
