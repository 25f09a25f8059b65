use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde_json::Value;

use super::protocol::{ErrorResponse, Meta, QueryRequest, QueryResponse};
use crate::beacon::{BeaconQuery, Snapshot};
use crate::error::{ReconError, Result};
use crate::genotype::SnpDef;

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// Extra attempts after a transport failure.
    pub retries: usize,
    pub timeout: Duration,
    pub backoff: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            retries: 3,
            timeout: Duration::from_secs(5),
            backoff: Duration::from_millis(50),
        }
    }
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// Line-protocol client holding one persistent connection, reopened on
/// transport failure.
pub struct BeaconClient {
    addr: SocketAddr,
    config: ClientConfig,
    conn: Option<Connection>,
}

impl BeaconClient {
    /// Resolves `endpoint`; the connection opens on first use.
    pub fn new(endpoint: impl ToSocketAddrs, config: ClientConfig) -> Result<Self> {
        let addr = endpoint
            .to_socket_addrs()
            .map_err(|e| ReconError::Transport {
                attempts: 0,
                source: e,
            })?
            .next()
            .ok_or_else(|| ReconError::Transport {
                attempts: 0,
                source: io::Error::new(
                    io::ErrorKind::InvalidInput,
                    "endpoint resolved to no address",
                ),
            })?;
        Ok(Self {
            addr,
            config,
            conn: None,
        })
    }

    fn open(&self) -> io::Result<Connection> {
        let stream = TcpStream::connect_timeout(&self.addr, self.config.timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(self.config.timeout))?;
        stream.set_write_timeout(Some(self.config.timeout))?;
        Ok(Connection {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    fn exchange_once(&mut self, line: &str) -> io::Result<String> {
        if self.conn.is_none() {
            self.conn = Some(self.open()?);
        }
        let conn = self.conn.as_mut().expect("connection just opened");
        conn.writer.write_all(line.as_bytes())?;
        conn.writer.write_all(b"\n")?;
        conn.writer.flush()?;
        let mut reply = String::new();
        if conn.reader.read_line(&mut reply)? == 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "server closed the connection",
            ));
        }
        Ok(reply)
    }

    fn exchange(&mut self, line: &str) -> Result<String> {
        let attempts = self.config.retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            match self.exchange_once(line) {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    log::debug!("attempt {} to {} failed: {e}", attempt + 1, self.addr);
                    self.conn = None;
                    last = Some(e);
                    if attempt + 1 < attempts {
                        thread::sleep(self.config.backoff);
                    }
                }
            }
        }
        Err(ReconError::Transport {
            attempts,
            source: last.expect("at least one attempt"),
        })
    }

    fn call<T: DeserializeOwned>(&mut self, request: &str) -> Result<T> {
        let reply = self.exchange(request)?;
        let value: Value = serde_json::from_str(&reply).map_err(|e| ReconError::Protocol {
            code: "bad_response".into(),
            message: e.to_string(),
        })?;
        if value.get("error").is_some() {
            let err: ErrorResponse = serde_json::from_value(value)?;
            return Err(ReconError::Protocol {
                code: err.error,
                message: err.message,
            });
        }
        serde_json::from_value(value).map_err(|e| ReconError::Protocol {
            code: "bad_response".into(),
            message: e.to_string(),
        })
    }

    pub fn query(&mut self, request: &QueryRequest) -> Result<bool> {
        let line = serde_json::to_string(request)?;
        Ok(self.call::<QueryResponse>(&line)?.exists)
    }

    pub fn meta(&mut self) -> Result<Meta> {
        self.call(r#"{"op":"meta"}"#)
    }

    /// Sends a raw line and returns the raw reply, for protocol testing.
    pub fn raw(&mut self, line: &str) -> Result<String> {
        self.exchange(line).map(|r| r.trim_end().to_string())
    }

    pub fn snapshot_scan(&mut self, panel: &[SnpDef]) -> Result<Snapshot> {
        self.snapshot_scan_with(panel, |_| {})
    }

    /// Queries every panel locus between two metadata reads. A version change
    /// between the reads restarts the scan once; a second change is a torn
    /// snapshot. `observer` sees the index of each answered locus.
    pub fn snapshot_scan_with(
        &mut self,
        panel: &[SnpDef],
        mut observer: impl FnMut(usize),
    ) -> Result<Snapshot> {
        let mut torn = (0, 0);
        for _ in 0..2 {
            let before = self.meta()?;
            let mut answers = Vec::with_capacity(panel.len());
            for (j, snp) in panel.iter().enumerate() {
                answers.push(self.query(&request_for(snp))?);
                observer(j);
            }
            let after = self.meta()?;
            if before.version == after.version {
                return Ok(Snapshot {
                    version: after.version,
                    answers,
                    member_count: after.member_count,
                });
            }
            log::warn!(
                "beacon moved from version {} to {} mid-scan",
                before.version,
                after.version
            );
            torn = (before.version, after.version);
        }
        Err(ReconError::TornSnapshot {
            before: torn.0,
            after: torn.1,
        })
    }
}

fn request_for(snp: &SnpDef) -> QueryRequest {
    QueryRequest {
        chromosome: snp.chromosome.clone(),
        position: snp.position,
        allele: String::new(),
    }
}

/// A remote beacon addressed by panel index.
pub struct RemoteBeacon {
    client: BeaconClient,
    panel: Vec<SnpDef>,
}

impl RemoteBeacon {
    pub fn new(client: BeaconClient, panel: Vec<SnpDef>) -> Self {
        Self { client, panel }
    }

    pub fn client(&mut self) -> &mut BeaconClient {
        &mut self.client
    }
}

impl BeaconQuery for RemoteBeacon {
    fn query_locus(&mut self, locus: usize) -> Result<bool> {
        let snp = self.panel.get(locus).ok_or(ReconError::InvalidLocus {
            locus,
            panel_len: self.panel.len(),
        })?;
        self.client.query(&request_for(snp))
    }
}
