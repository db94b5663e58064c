use std::net::TcpListener;
use std::thread;

use prs_wire::*;

fn exchange<C: Channel>(mut m: Metered<C>, lead: bool) -> (MeterReport, Counters, [u8; 32]) {
    for phase in [1u16, 3, 4] {
        m.enter(phase).unwrap();
        for i in 0..phase as usize {
            let payload = vec![phase as u8; 100 * i + 1];
            if lead {
                m.send(MsgType::HeQuery, payload.clone()).unwrap();
                assert_eq!(m.recv(MsgType::HeResult).unwrap(), payload);
            } else {
                let got = m.recv(MsgType::HeQuery).unwrap();
                m.send(MsgType::HeResult, got).unwrap();
            }
        }
    }
    (m.report(), m.counters(), m.transcript().digest())
}

#[test]
fn loopback_totals_reconcile() {
    let (a, b) = loopback_pair();
    let peer = thread::spawn(move || exchange(Metered::new(b), false));
    let (report, counters, digest) = exchange(Metered::new(a), true);
    let (peer_report, peer_counters, _) = peer.join().unwrap();
    assert_eq!(report.sent, counters.sent);
    assert_eq!(report.received, counters.received);
    assert_eq!(report.sent, peer_report.received);
    assert_eq!(peer_report.sent, peer_counters.sent);
    let phase_sum: u64 = report.phases.values().map(|p| p.sent + p.received).sum();
    assert_eq!(phase_sum, report.total());
    assert_eq!(report.phases.keys().copied().collect::<Vec<_>>(), vec![1, 3, 4]);

    let (a, b) = loopback_pair();
    let peer = thread::spawn(move || exchange(Metered::new(b), false));
    let (_, _, again) = exchange(Metered::new(a), true);
    peer.join().unwrap();
    assert_eq!(digest, again);
}

#[test]
fn tcp_totals_match_socket_counts() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        exchange(Metered::new(TcpChannel::new(stream).unwrap()), false)
    });
    let (report, counters, _) = exchange(Metered::new(TcpChannel::connect(&addr).unwrap()), true);
    let (server_report, server_counters, _) = server.join().unwrap();
    assert_eq!(report.sent, counters.sent);
    assert_eq!(report.received, counters.received);
    assert_eq!(server_report.sent, server_counters.sent);
    assert_eq!(server_report.received, server_counters.received);
    assert_eq!(report.sent, server_report.received);
}

#[test]
fn abort_surfaces_reason() {
    let (a, b) = loopback_pair();
    let mut a = Metered::new(a);
    let mut b = Metered::new(b);
    a.abort("noise budget exhausted");
    match b.recv(MsgType::HeResult) {
        Err(WireError::Aborted(reason)) => assert_eq!(reason, "noise budget exhausted"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dropped_peer_is_a_disconnect() {
    let (a, b) = loopback_pair();
    drop(b);
    let mut a = Metered::new(a);
    assert!(matches!(a.recv(MsgType::Ack), Err(WireError::Disconnected)));
}
