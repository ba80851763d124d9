use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use super::wire::{
    decode_request, encode_response, handshake, handshake_with, parse_handshake, Request, Response,
    Status, DEFAULT_MAX_FRAME, FLAG_CLIENT_SCALE, HANDSHAKE_LEN, VERSION,
};
use crate::policy::{scale_action, PolicyError, Vinn};

/// Decodes one request payload and runs the policy on it. Never fails:
/// every error maps to a status code.
pub fn handle_request(vinn: &Vinn, payload: &[u8]) -> Response {
    let req = match decode_request(payload) {
        Ok(r) => r,
        Err(_) => return Response::error(Status::BadFrame),
    };
    respond(vinn, &req)
}

fn respond(vinn: &Vinn, req: &Request) -> Response {
    if req.observation.len() != vinn.encoder.obs_dim() {
        return Response::error(Status::DimMismatch);
    }
    let run = || -> Result<Response, PolicyError> {
        let p = vinn.predict(&req.observation)?;
        let action = if req.flags & FLAG_CLIENT_SCALE != 0 {
            p.action
        } else {
            scale_action(&p.action, &vinn.cfg.action_scale)?
        };
        Ok(Response {
            status: Status::Ok,
            translation: action.translation,
            gripper: action.gripper,
            nearest_distance: p.nearest_distance,
        })
    };
    run().unwrap_or_else(|_| Response::error(Status::Internal))
}

struct Shared {
    vinn: Vinn,
    max_frame: usize,
    stopping: AtomicBool,
    next_id: AtomicU64,
    /// Clones of open connections so shutdown can unblock their reads.
    conns: Mutex<HashMap<u64, TcpStream>>,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

impl Server {
    pub fn bind(vinn: Vinn, addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            shared: Arc::new(Shared {
                vinn,
                max_frame: DEFAULT_MAX_FRAME,
                stopping: AtomicBool::new(false),
                next_id: AtomicU64::new(0),
                conns: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn with_max_frame(mut self, max_frame: usize) -> Self {
        Arc::get_mut(&mut self.shared)
            .expect("not yet running")
            .max_frame = max_frame;
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until shut down, one thread per connection.
    pub fn run(self) {
        accept_loop(self.listener, self.shared)
    }

    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let shared = self.shared.clone();
        let acceptor = thread::Builder::new()
            .name("vinn-accept".into())
            .spawn(move || self.run())?;
        Ok(ServerHandle {
            addr,
            shared,
            acceptor: Some(acceptor),
        })
    }
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, lets in-flight requests finish, and waits for every
    /// connection thread.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        let Some(acceptor) = self.acceptor.take() else {
            return;
        };
        self.shared.stopping.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        let _ = acceptor.join();
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    let mut workers = Vec::new();
    for stream in listener.incoming() {
        if shared.stopping.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
        if let Ok(clone) = stream.try_clone() {
            shared.conns.lock().unwrap().insert(id, clone);
        }
        let shared = shared.clone();
        let spawned = thread::Builder::new()
            .name(format!("vinn-conn-{id}"))
            .spawn(move || {
                let _ = handle_connection(&shared, stream);
                shared.conns.lock().unwrap().remove(&id);
            });
        if let Ok(h) = spawned {
            workers.push(h);
        }
        workers.retain(|h| !h.is_finished());
    }
    // Half-close every connection: blocked reads see EOF, a request already
    // read still gets its response written.
    for conn in shared.conns.lock().unwrap().values() {
        let _ = conn.shutdown(Shutdown::Read);
    }
    for h in workers {
        let _ = h.join();
    }
}

/// `Ok(None)` on a clean EOF before the first byte of a frame.
fn read_frame_len(stream: &mut TcpStream) -> io::Result<Option<usize>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match stream.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Some(u32::from_be_bytes(len) as usize))
}

fn write_frame(stream: &mut TcpStream, payload: &[u8]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(4 + payload.len());
    buf.extend((payload.len() as u32).to_be_bytes());
    buf.extend(payload);
    stream.write_all(&buf)
}

fn handle_connection(shared: &Shared, mut stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut hs = [0u8; HANDSHAKE_LEN];
    stream.read_exact(&mut hs)?;
    if parse_handshake(&hs) != Some(VERSION) {
        stream.write_all(&handshake_with(VERSION))?;
        return Ok(());
    }
    stream.write_all(&handshake())?;
    let mut payload = Vec::new();
    while let Some(len) = read_frame_len(&mut stream)? {
        let resp = if len > shared.max_frame {
            io::copy(&mut (&mut stream).take(len as u64), &mut io::sink())?;
            Response::error(Status::BadFrame)
        } else {
            payload.resize(len, 0);
            stream.read_exact(&mut payload)?;
            handle_request(&shared.vinn, &payload)
        };
        write_frame(&mut stream, &encode_response(&resp))?;
    }
    Ok(())
}

/// Serves `vinn` on `addr` until the process exits.
pub fn serve(vinn: Vinn, addr: impl ToSocketAddrs) -> io::Result<()> {
    Server::bind(vinn, addr)?.run();
    Ok(())
}
