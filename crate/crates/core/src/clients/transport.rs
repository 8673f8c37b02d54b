use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{ClientError, RequestKey, Service};

/// Performs one live request for a key and returns `(status, body)`.
pub trait Transport: Send + Sync {
    fn fetch(&self, key: &RequestKey) -> Result<(u16, Vec<u8>), ClientError>;
}

/// Transport that refuses every call and counts attempts. Used to prove
/// replay runs never touch the network.
#[derive(Debug, Default)]
pub struct FailingTransport {
    calls: AtomicUsize,
}

impl FailingTransport {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for FailingTransport {
    fn fetch(&self, key: &RequestKey) -> Result<(u16, Vec<u8>), ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(ClientError::Transport {
            service: key.service.name().to_string(),
            message: format!("network disabled; refused {key}"),
        })
    }
}

/// Token bucket limiter; `acquire` blocks until a token is available.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, capacity: f64) -> Self {
        assert!(rate_per_sec > 0.0 && capacity >= 1.0, "token bucket needs a positive rate and capacity >= 1");
        TokenBucket {
            rate: rate_per_sec,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Time to wait before a token is available; takes the token if none.
    pub fn try_acquire(&self) -> Option<Duration> {
        let mut st = self.state.lock().unwrap();
        let now = Instant::now();
        let refill = now.duration_since(st.1).as_secs_f64() * self.rate;
        st.0 = (st.0 + refill).min(self.capacity);
        st.1 = now;
        if st.0 >= 1.0 {
            st.0 -= 1.0;
            None
        } else {
            Some(Duration::from_secs_f64((1.0 - st.0) / self.rate))
        }
    }

    pub fn acquire(&self) {
        while let Some(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

/// HTTP transport for live and record modes.
///
/// Endpoints and credentials come from the environment:
/// `POOLAUDIT_CF_ACCOUNT` / `POOLAUDIT_CF_TOKEN` for categories,
/// `POOLAUDIT_WAYBACK_ENDPOINT` (optional), `POOLAUDIT_FACES_ENDPOINT`
/// for a face-attribute proxy keyed by uid. DNS uses the system resolver.
pub struct LiveTransport {
    agent: ureq::Agent,
    limiter: TokenBucket,
}

impl LiveTransport {
    pub fn new(requests_per_sec: f64) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        LiveTransport {
            agent,
            limiter: TokenBucket::new(requests_per_sec, 1.0),
        }
    }

    fn env(service: Service, var: &str) -> Result<String, ClientError> {
        std::env::var(var).map_err(|_| ClientError::NotConfigured {
            service: service.name().to_string(),
            reason: format!("{var} is not set"),
        })
    }

    fn get(&self, key: &RequestKey, url: &str, bearer: Option<&str>) -> Result<(u16, Vec<u8>), ClientError> {
        let service = key.service.name().to_string();
        let mut req = self.agent.get(url);
        if let Some(t) = bearer {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.call().map_err(|e| ClientError::Transport {
            service: service.clone(),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().map_err(|e| ClientError::Transport {
            service,
            message: e.to_string(),
        })?;
        Ok((status, body))
    }

    fn field(key: &RequestKey, name: &str) -> String {
        key.field(name).unwrap_or_default()
    }
}

impl Transport for LiveTransport {
    fn fetch(&self, key: &RequestKey) -> Result<(u16, Vec<u8>), ClientError> {
        self.limiter.acquire();
        let enc = |s: &str| url::form_urlencoded::byte_serialize(s.as_bytes()).collect::<String>();
        match key.service {
            Service::Categories => {
                let account = Self::env(key.service, "POOLAUDIT_CF_ACCOUNT")?;
                let token = Self::env(key.service, "POOLAUDIT_CF_TOKEN")?;
                let url = format!(
                    "https://api.cloudflare.com/client/v4/accounts/{account}/intel/domain?domain={}",
                    enc(&Self::field(key, "domain"))
                );
                self.get(key, &url, Some(&token))
            }
            Service::Wayback => {
                let base = std::env::var("POOLAUDIT_WAYBACK_ENDPOINT")
                    .unwrap_or_else(|_| "https://archive.org/wayback/available".into());
                // The availability API returns the capture closest to the
                // requested timestamp, so asking for 1996 yields the earliest.
                let url = format!("{base}?url={}&timestamp=19960101", enc(&Self::field(key, "url")));
                self.get(key, &url, None)
            }
            Service::Faces => {
                let base = Self::env(key.service, "POOLAUDIT_FACES_ENDPOINT")?;
                let url = format!("{base}?uid={}", enc(&Self::field(key, "uid")));
                self.get(key, &url, std::env::var("POOLAUDIT_FACES_TOKEN").ok().as_deref())
            }
            Service::Dns => {
                use std::net::ToSocketAddrs;
                let host = Self::field(key, "host");
                let addrs: Vec<String> = match (host.as_str(), 80).to_socket_addrs() {
                    Ok(it) => {
                        let mut v: Vec<String> = it.filter(|a| a.is_ipv4()).map(|a| a.ip().to_string()).collect();
                        v.sort();
                        v.dedup();
                        v
                    }
                    Err(_) => Vec::new(),
                };
                let body = serde_json::json!({ "host": host, "ipv4": addrs });
                Ok((200, serde_json::to_vec(&body).expect("json")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_transport_counts() {
        let t = FailingTransport::default();
        assert!(t.fetch(&RequestKey::dns("x.com")).is_err());
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn bucket_allows_burst_then_waits() {
        let b = TokenBucket::new(1.0, 2.0);
        assert!(b.try_acquire().is_none());
        assert!(b.try_acquire().is_none());
        let wait = b.try_acquire().expect("bucket empty");
        assert!(wait > Duration::from_millis(900) && wait <= Duration::from_secs(1));
    }

    #[test]
    fn bucket_refills() {
        let b = TokenBucket::new(50.0, 1.0);
        assert!(b.try_acquire().is_none());
        let start = Instant::now();
        b.acquire();
        assert!(start.elapsed() >= Duration::from_millis(15));
    }
}
