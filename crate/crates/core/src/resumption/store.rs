use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use super::{decode_frame, encode_frame, BdpFrame, FrameError};

/// How saved parameters travel between sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenMode {
    /// Kept by the server; the client holds nothing.
    LocalStorage,
    /// Held by the client as bytes it does not interpret.
    OpaqueToken,
    /// Held by the client as a frame it can read.
    BdpFrame,
}

impl TokenMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenMode::LocalStorage => "local_storage",
            TokenMode::OpaqueToken => "opaque_token",
            TokenMode::BdpFrame => "bdp_frame",
        }
    }
}

impl fmt::Display for TokenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "local_storage" | "local" => Ok(TokenMode::LocalStorage),
            "opaque_token" | "opaque" => Ok(TokenMode::OpaqueToken),
            "bdp_frame" | "bdp" => Ok(TokenMode::BdpFrame),
            other => Err(format!("unknown token mode `{other}`")),
        }
    }
}

/// A stored set of path characteristics for one server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRecord {
    pub server_name: String,
    pub mode: TokenMode,
    pub issued_at_s: u64,
    pub frame: BdpFrame,
    /// Bytes the client returns verbatim (`OpaqueToken` only).
    pub opaque_bytes: Option<Vec<u8>>,
}

impl TokenRecord {
    pub fn new(
        server_name: impl Into<String>,
        mode: TokenMode,
        issued_at_s: u64,
        frame: BdpFrame,
    ) -> Self {
        let opaque_bytes = (mode == TokenMode::OpaqueToken).then(|| encode_frame(&frame));
        Self {
            server_name: server_name.into(),
            mode,
            issued_at_s,
            frame,
            opaque_bytes,
        }
    }

    /// Rebuilds a record from bytes presented on the wire.
    pub fn from_wire(
        server_name: impl Into<String>,
        mode: TokenMode,
        issued_at_s: u64,
        bytes: &[u8],
    ) -> Result<Self, FrameError> {
        let frame = decode_frame(bytes)?;
        let mut record = Self::new(server_name, mode, issued_at_s, frame);
        if mode == TokenMode::OpaqueToken {
            record.opaque_bytes = Some(bytes.to_vec());
        }
        Ok(record)
    }

    /// Bytes that travel on the wire or into the persistence file.
    pub fn wire_bytes(&self) -> Vec<u8> {
        match &self.opaque_bytes {
            Some(bytes) => bytes.clone(),
            None => encode_frame(&self.frame),
        }
    }

    /// The frame as the server reads it. Opaque tokens are decoded from
    /// their bytes.
    pub fn server_view(&self) -> Result<BdpFrame, FrameError> {
        match (&self.mode, &self.opaque_bytes) {
            (TokenMode::OpaqueToken, Some(bytes)) => decode_frame(bytes),
            _ => Ok(self.frame),
        }
    }

    pub fn client_ip(&self) -> IpAddr {
        self.frame.client_ip
    }

    pub fn expires_at_s(&self) -> u64 {
        self.issued_at_s.saturating_add(self.frame.lifetime_s)
    }

    pub fn is_expired(&self, now_s: u64) -> bool {
        now_s > self.expires_at_s()
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.server_name,
            self.mode,
            self.issued_at_s,
            hex::encode_upper(self.wire_bytes())
        )
    }

    fn from_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [server_name, mode, issued_at, bytes] = fields[..] else {
            return Err(format!(
                "expected 4 tab-separated fields, got {}",
                fields.len()
            ));
        };
        if server_name.is_empty() {
            return Err("empty server name".into());
        }
        let mode: TokenMode = mode.parse()?;
        let issued_at_s = issued_at
            .parse()
            .map_err(|e| format!("bad issued_at_s `{issued_at}`: {e}"))?;
        let bytes = hex::decode(bytes).map_err(|e| format!("bad hex: {e}"))?;
        Self::from_wire(server_name, mode, issued_at_s, &bytes).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("token store I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("token store {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("server name must not contain tabs or newlines")]
    BadServerName,
}

type Key = (String, IpAddr, TokenMode);

/// Records keyed by `(server_name, client_ip, mode)`, last write wins.
///
/// With a backing file every `put` rewrites the file: one record per line,
/// `server_name`, `mode`, `issued_at_s` and the hex frame bytes separated
/// by tabs.
#[derive(Debug, Clone, Default)]
pub struct TokenStore {
    records: BTreeMap<Key, (u64, TokenRecord)>,
    writes: u64,
    path: Option<PathBuf>,
}

impl TokenStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a file-backed store, loading the file if it exists.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut store = Self {
            path: Some(path.clone()),
            ..Self::default()
        };
        match fs::read_to_string(&path) {
            Ok(text) => {
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let record =
                        TokenRecord::from_line(line).map_err(|message| StoreError::Parse {
                            path: path.clone(),
                            line: i + 1,
                            message,
                        })?;
                    store.insert(record);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(source) => return Err(StoreError::Io { path, source }),
        }
        Ok(store)
    }

    fn insert(&mut self, record: TokenRecord) {
        self.writes += 1;
        let key = (record.server_name.clone(), record.client_ip(), record.mode);
        self.records.insert(key, (self.writes, record));
    }

    pub fn put(&mut self, record: TokenRecord) -> Result<(), StoreError> {
        if record.server_name.contains(['\t', '\n', '\r']) {
            return Err(StoreError::BadServerName);
        }
        self.insert(record);
        self.flush()
    }

    /// Most recently written live record for the server and client address.
    pub fn get(&self, server_name: &str, client_ip: IpAddr, now_s: u64) -> Option<&TokenRecord> {
        self.records
            .iter()
            .filter(|((s, ip, _), (_, r))| {
                s == server_name && *ip == client_ip && !r.is_expired(now_s)
            })
            .max_by_key(|(_, (seq, _))| *seq)
            .map(|(_, (_, r))| r)
    }

    pub fn get_mode(
        &self,
        server_name: &str,
        client_ip: IpAddr,
        mode: TokenMode,
        now_s: u64,
    ) -> Option<&TokenRecord> {
        self.records
            .get(&(server_name.to_string(), client_ip, mode))
            .map(|(_, r)| r)
            .filter(|r| !r.is_expired(now_s))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in write order.
    pub fn records(&self) -> Vec<&TokenRecord> {
        let mut all: Vec<_> = self.records.values().collect();
        all.sort_by_key(|(seq, _)| *seq);
        all.into_iter().map(|(_, r)| r).collect()
    }

    /// Serialized file contents.
    pub fn to_text(&self) -> String {
        self.records()
            .into_iter()
            .map(|r| r.to_line() + "\n")
            .collect()
    }

    pub fn flush(&self) -> Result<(), StoreError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        fs::write(path, self.to_text()).map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(issued_at_s: u64, capacity: u64) -> TokenRecord {
        let frame = BdpFrame::new(600, capacity, 500_000, "192.0.2.1".parse().unwrap()).unwrap();
        TokenRecord::new("sat.example", TokenMode::BdpFrame, issued_at_s, frame)
    }

    fn ip() -> IpAddr {
        "192.0.2.1".parse().unwrap()
    }

    #[test]
    fn put_then_get() {
        let mut store = TokenStore::in_memory();
        store.put(record(100, 3_125_000)).unwrap();
        assert_eq!(
            store.get("sat.example", ip(), 100),
            Some(&record(100, 3_125_000))
        );
        assert_eq!(store.get("other", ip(), 100), None);
    }

    #[test]
    fn expired_records_are_hidden() {
        let mut store = TokenStore::in_memory();
        store.put(record(100, 3_125_000)).unwrap();
        assert!(store.get("sat.example", ip(), 700).is_some());
        assert_eq!(store.get("sat.example", ip(), 701), None);
    }

    #[test]
    fn last_write_wins() {
        let mut store = TokenStore::in_memory();
        store.put(record(100, 3_125_000)).unwrap();
        store.put(record(200, 1_000_000)).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(
            store
                .get("sat.example", ip(), 200)
                .unwrap()
                .frame
                .saved_capacity_bytes,
            1_000_000
        );
    }

    #[test]
    fn latest_mode_is_returned() {
        let mut store = TokenStore::in_memory();
        store.put(record(100, 3_125_000)).unwrap();
        let opaque = TokenRecord::new(
            "sat.example",
            TokenMode::OpaqueToken,
            150,
            record(0, 5_000).frame,
        );
        store.put(opaque.clone()).unwrap();
        assert_eq!(store.get("sat.example", ip(), 150), Some(&opaque));
        assert_eq!(
            store.get_mode("sat.example", ip(), TokenMode::BdpFrame, 150),
            Some(&record(100, 3_125_000))
        );
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tokens.tsv");
        let mut store = TokenStore::open(&path).unwrap();
        store.put(record(100, 3_125_000)).unwrap();
        store
            .put(TokenRecord::new(
                "sat.example",
                TokenMode::OpaqueToken,
                120,
                record(0, 9_000).frame,
            ))
            .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "sat.example\tbdp_frame\t100\t2A4258802FAF088007A12004C0000201"
        );
        let reloaded = TokenStore::open(&path).unwrap();
        assert_eq!(reloaded.records(), store.records());
    }

    #[test]
    fn io_failure_is_an_error_not_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        // a directory cannot be written as a file
        let mut store = TokenStore::open(dir.path()).unwrap_or_else(|_| TokenStore {
            path: Some(dir.path().to_path_buf()),
            ..TokenStore::default()
        });
        assert!(matches!(
            store.put(record(1, 3_000)),
            Err(StoreError::Io { .. })
        ));
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tokens.tsv");
        fs::write(
            &path,
            "a\tbdp_frame\t1\t2A4258802FAF088007A12004C0000201\nb\tbdp_frame\t1\tZZ\n",
        )
        .unwrap();
        match TokenStore::open(&path) {
            Err(StoreError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
