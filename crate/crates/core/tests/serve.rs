mod common;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use vinn::data::GripperState;
use vinn::policy::{scale_action, PolicyConfig, Vinn};
use vinn::rng;
use vinn::serve::wire::{
    encode_request, handshake, handshake_with, parse_handshake, FLAG_CLIENT_SCALE, HANDSHAKE_LEN,
};
use vinn::serve::{client_query, Client, Request, ServeError, Server, Status};

fn policy() -> Vinn {
    common::expert_vinn(10, 1, PolicyConfig::default())
}

fn connect(addr: std::net::SocketAddr) -> Client {
    Client::connect(addr, Duration::from_secs(5)).unwrap()
}

#[test]
fn remote_matches_local() {
    let vinn = policy();
    let server = Server::bind(vinn.clone(), "127.0.0.1:0")
        .unwrap()
        .spawn()
        .unwrap();
    let mut client = connect(server.local_addr());
    let mut r = rng::seeded(3);
    for obs in common::wire_observations(&mut r, 100, vinn.encoder.obs_dim()) {
        let local =
            scale_action(&vinn.predict(&obs).unwrap().action, &vinn.cfg.action_scale).unwrap();
        let remote = client.query(&obs).unwrap();
        for c in 0..3 {
            assert!((local.translation[c] - remote.translation[c]).abs() < 1e-6);
        }
        assert_eq!(local.gripper, remote.gripper);
    }
    let obs = common::wire_observations(&mut r, 1, vinn.encoder.obs_dim())
        .pop()
        .unwrap();
    assert_eq!(
        client_query(server.local_addr(), &obs).unwrap(),
        client.query(&obs).unwrap()
    );
    server.shutdown();
}

#[test]
fn training_frame_returns_its_scaled_action() {
    let vinn = common::expert_vinn(
        5,
        2,
        PolicyConfig {
            k: 1,
            ..PolicyConfig::default()
        },
    );
    let server = Server::bind(vinn.clone(), "127.0.0.1:0")
        .unwrap()
        .spawn()
        .unwrap();
    let mut client = connect(server.local_addr());
    let row = 17;
    let obs = vinn.index.embedding(row).to_vec();
    let a = vinn.index.actions()[row];
    let resp = client
        .request(&Request {
            flags: 0,
            observation: obs.clone(),
        })
        .unwrap();
    assert_eq!(resp.status, Status::Ok);
    assert_eq!(resp.nearest_distance, 0.0);
    for c in 0..3 {
        assert!((resp.translation[c] - 0.5 * a[c]).abs() < 1e-6);
    }
    assert_eq!(resp.gripper, GripperState::from_code(a[3] as u8).unwrap());
    // client-side scaling returns the unscaled action
    let raw = client
        .request(&Request {
            flags: FLAG_CLIENT_SCALE,
            observation: obs,
        })
        .unwrap();
    for c in 0..3 {
        assert!((raw.translation[c] - a[c]).abs() < 1e-6);
    }
}

#[test]
fn faults_leave_the_connection_usable() {
    let vinn = policy();
    let dim = vinn.encoder.obs_dim();
    let server = Server::bind(vinn, "127.0.0.1:0")
        .unwrap()
        .with_max_frame(4096)
        .spawn()
        .unwrap();
    let mut client = connect(server.local_addr());
    let good = vec![1.0; dim];
    let expected = client.query(&good).unwrap();

    let wrong_dim = client
        .request(&Request {
            flags: 0,
            observation: vec![1.0; dim - 1],
        })
        .unwrap();
    assert_eq!(wrong_dim.status, Status::DimMismatch);
    assert!(matches!(
        client.query(&[0.0; 3]),
        Err(ServeError::Status(Status::DimMismatch))
    ));

    let mut trailing = encode_request(&Request {
        flags: 0,
        observation: good.clone(),
    });
    trailing.extend([0u8; 8]);
    assert_eq!(client.send_raw(&trailing).unwrap().status, Status::BadFrame);
    let mut truncated = encode_request(&Request {
        flags: 0,
        observation: good.clone(),
    });
    truncated.truncate(20);
    assert_eq!(
        client.send_raw(&truncated).unwrap().status,
        Status::BadFrame
    );
    assert_eq!(
        client.send_raw(b"garbage").unwrap().status,
        Status::BadFrame
    );
    assert_eq!(client.send_raw(&[]).unwrap().status, Status::BadFrame);
    assert_eq!(
        client.send_raw(&vec![7u8; 10_000]).unwrap().status,
        Status::BadFrame
    );

    assert_eq!(client.query(&good).unwrap(), expected);
    assert_eq!(connect(server.local_addr()).query(&good).unwrap(), expected);
}

#[test]
fn concurrent_clients_get_identical_answers() {
    let vinn = policy();
    let dim = vinn.encoder.obs_dim();
    let server = Server::bind(vinn, "127.0.0.1:0").unwrap().spawn().unwrap();
    let addr = server.local_addr();
    let obs: Vec<f64> = (0..dim).map(|i| i as f64 * 0.25 - 1.0).collect();
    let answers: Vec<_> = (0..100)
        .map(|_| {
            let obs = obs.clone();
            thread::spawn(move || connect(addr).query(&obs).unwrap())
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    assert!(answers.iter().all(|a| *a == answers[0]));
    server.shutdown();
}

#[test]
fn unresponsive_server_times_out() {
    // bound but never accepting: the handshake is never answered
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let err = Client::connect(addr, Duration::from_millis(200)).unwrap_err();
    assert!(matches!(err, ServeError::Timeout), "{err:?}");
    drop(listener);
    assert!(client_query(addr, &[0.0]).is_err());
}

#[test]
fn version_mismatch_is_reported_both_ways() {
    let fake = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = fake.local_addr().unwrap();
    let peer = thread::spawn(move || {
        let (mut s, _) = fake.accept().unwrap();
        let mut hs = [0u8; HANDSHAKE_LEN];
        s.read_exact(&mut hs).unwrap();
        s.write_all(&handshake_with(2)).unwrap();
    });
    let err = Client::connect(addr, Duration::from_secs(2)).unwrap_err();
    assert!(
        matches!(err, ServeError::ProtocolMismatch { server: Some(2) }),
        "{err:?}"
    );
    peer.join().unwrap();

    let server = Server::bind(policy(), "127.0.0.1:0")
        .unwrap()
        .spawn()
        .unwrap();
    let mut s = TcpStream::connect(server.local_addr()).unwrap();
    s.write_all(&handshake_with(9)).unwrap();
    let mut hs = [0u8; HANDSHAKE_LEN];
    s.read_exact(&mut hs).unwrap();
    assert_eq!(parse_handshake(&hs), Some(1));
    assert_eq!(
        s.read(&mut [0u8; 1]).unwrap(),
        0,
        "server closes after a mismatch"
    );

    let mut ok = TcpStream::connect(server.local_addr()).unwrap();
    ok.write_all(&handshake()).unwrap();
    ok.read_exact(&mut hs).unwrap();
    assert_eq!(hs, handshake());
}

#[test]
fn shutdown_with_idle_connections() {
    let server = Server::bind(policy(), "127.0.0.1:0")
        .unwrap()
        .spawn()
        .unwrap();
    let idle: Vec<Client> = (0..3).map(|_| connect(server.local_addr())).collect();
    server.shutdown();
    drop(idle);
}
