use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};

use super::protocol::{decode_request, Meta, QueryResponse, Request};
use crate::beacon::BeaconState;
use crate::error::{ReconError, Result};
use crate::genotype::{Genotype, SnpDef};

/// Beacon state plus the `(chromosome, position)` index used to resolve
/// queries.
pub struct BeaconService {
    beacon: Arc<RwLock<BeaconState>>,
    index: HashMap<(String, u64), usize>,
}

impl BeaconService {
    pub fn new(beacon: BeaconState, panel: &[SnpDef]) -> Result<Self> {
        if panel.len() != beacon.panel_len() {
            return Err(ReconError::PanelMismatch(panel.len(), beacon.panel_len()));
        }
        let index = panel
            .iter()
            .enumerate()
            .map(|(j, s)| ((s.chromosome.clone(), s.position), j))
            .collect();
        Ok(Self {
            beacon: Arc::new(RwLock::new(beacon)),
            index,
        })
    }

    /// Response line for one request line, without the newline.
    pub fn respond(&self, line: &str) -> String {
        let reply = match decode_request(line) {
            Err(e) => serde_json::to_string(&e),
            Ok(Request::Meta) => {
                let b = self.beacon.read().expect("beacon lock poisoned");
                serde_json::to_string(&Meta {
                    member_count: b.member_count(),
                    version: b.version(),
                })
            }
            Ok(Request::Query(q)) => {
                // unknown coordinates answer "no"
                let exists = match self.index.get(&(q.chromosome, q.position)) {
                    Some(&j) => self
                        .beacon
                        .read()
                        .expect("beacon lock poisoned")
                        .query(j)
                        .unwrap_or(false),
                    None => false,
                };
                serde_json::to_string(&QueryResponse { exists })
            }
        };
        reply.expect("response types serialize")
    }
}

/// A running server. Dropping the handle shuts it down.
pub struct ServiceHandle {
    addr: SocketAddr,
    service: Arc<BeaconService>,
    stop: Arc<AtomicBool>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Shared state; writers hold the lock between requests, never during one.
    pub fn beacon(&self) -> Arc<RwLock<BeaconState>> {
        Arc::clone(&self.service.beacon)
    }

    /// Applies a membership update and returns the new version.
    pub fn update(&self, add: Vec<Genotype>, remove: &[&str]) -> Result<u64> {
        let mut b = self.service.beacon.write().expect("beacon lock poisoned");
        b.apply_update(add, remove)?;
        Ok(b.version())
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if self.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        for s in self.streams.lock().expect("stream list poisoned").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

fn handle_connection(stream: TcpStream, service: &BeaconService) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writer.write_all(service.respond(&line).as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Serves `service` on `bind`, one thread per connection.
pub fn serve(service: BeaconService, bind: impl ToSocketAddrs) -> Result<ServiceHandle> {
    let listener = TcpListener::bind(bind)?;
    let addr = listener.local_addr()?;
    let service = Arc::new(service);
    let stop = Arc::new(AtomicBool::new(false));
    let streams = Arc::new(Mutex::new(Vec::new()));
    let acceptor = {
        let (service, stop, streams) = (
            Arc::clone(&service),
            Arc::clone(&stop),
            Arc::clone(&streams),
        );
        thread::spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                if let Ok(clone) = stream.try_clone() {
                    streams.lock().expect("stream list poisoned").push(clone);
                }
                let service = Arc::clone(&service);
                thread::spawn(move || {
                    if let Err(e) = handle_connection(stream, &service) {
                        log::debug!("connection closed: {e}");
                    }
                });
            }
        })
    };
    log::info!("beacon service listening on {addr}");
    Ok(ServiceHandle {
        addr,
        service,
        stop,
        streams,
        acceptor: Some(acceptor),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn service() -> BeaconService {
        let panel: Vec<SnpDef> = (0..2)
            .map(|j| SnpDef {
                id: format!("s{j}"),
                chromosome: "1".into(),
                position: 100 + j as u64,
                maf: 0.1,
            })
            .collect();
        let beacon =
            BeaconState::with_members(2, vec![Genotype::from_dosages("a", &[1, 0])]).unwrap();
        BeaconService::new(beacon, &panel).unwrap()
    }

    #[test]
    fn responses() {
        let s = service();
        assert_eq!(
            s.respond(r#"{"chromosome":"1","position":100,"allele":"T"}"#),
            r#"{"exists":true}"#
        );
        assert_eq!(
            s.respond(r#"{"chromosome":"1","position":101,"allele":"T"}"#),
            r#"{"exists":false}"#
        );
        assert_eq!(
            s.respond(r#"{"chromosome":"7","position":100,"allele":"T"}"#),
            r#"{"exists":false}"#
        );
        assert_eq!(
            s.respond(r#"{"op":"meta"}"#),
            r#"{"member_count":1,"version":0}"#
        );
        assert!(s.respond("not json").contains(r#""error":"bad_request""#));
    }

    #[test]
    fn panel_must_match() {
        let beacon = BeaconState::empty(3);
        assert!(BeaconService::new(beacon, &[]).is_err());
    }
}
