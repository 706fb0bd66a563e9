use std::net::{IpAddr, Ipv4Addr};

use bdpsim_core::resumption::TokenMode;
use bdpsim_core::scenarios::{prime, resumed_world, ScenarioConfig, MB};
use bdpsim_core::world::PresentedToken;
use bdpsim_core::{
    encode_frame, BdpFrame, FlowSpec, ResumeMode, SeedOutcome, TokenStore, World, INITIAL_WINDOW,
};

fn small_prime_cfg() -> ScenarioConfig {
    ScenarioConfig {
        prime_size_bytes: 20 * MB,
        file_size_bytes: MB / 2,
        ..Default::default()
    }
}

#[test]
fn reference_frame_seeds_half_its_capacity() {
    let cfg = ScenarioConfig::default();
    let wcfg = cfg.world_config();
    let frame = BdpFrame::new(
        600,
        3_125_000,
        500_000,
        IpAddr::V4(Ipv4Addr::new(192, 0, 2, 1)),
    )
    .unwrap();
    let mut flow = FlowSpec::new(1, MB / 2)
        .with_mode(ResumeMode::ResumeBdp)
        .with_client_ip(cfg.client_ip());
    flow.presented_token = Some(PresentedToken {
        issued_at_s: wcfg.wall_clock_origin_s,
        bytes: encode_frame(&frame),
    });
    let mut world = World::new(wcfg, vec![flow]);
    world.run();
    let r = world.result(1).unwrap();
    let d = r.decision.unwrap();
    assert_eq!(d.outcome, SeedOutcome::Seeded);
    assert_eq!(d.seeded_cwnd_bytes, Some(1_562_500));
    assert!(r.is_complete());
}

#[test]
fn long_transfer_captures_the_path_bdp() {
    let primed = prime(&ScenarioConfig::default());
    let record = primed
        .state
        .client_store
        .get_mode(
            "server.example",
            ScenarioConfig::default().client_ip(),
            TokenMode::BdpFrame,
            primed.resume_at_s,
        )
        .expect("token stored");
    let f = record.frame;
    // 50 Mbps x 500 ms
    let bdp = 3_125_000.0;
    assert!(
        (f.saved_capacity_bytes as f64 - bdp).abs() / bdp < 0.05,
        "{f:?}"
    );
    assert!(
        (f.saved_min_rtt_us as f64 - 500_000.0).abs() / 500_000.0 < 0.01,
        "{f:?}"
    );
    assert_eq!(f.lifetime_s, 600);
}

#[test]
fn every_token_mode_seeds() {
    for mode in [
        TokenMode::LocalStorage,
        TokenMode::OpaqueToken,
        TokenMode::BdpFrame,
    ] {
        let cfg = ScenarioConfig {
            token_mode: mode,
            ..small_prime_cfg()
        };
        let primed = prime(&cfg);
        match mode {
            TokenMode::LocalStorage => {
                assert!(primed.state.client_store.is_empty());
                assert_eq!(primed.state.server_store.len(), 1);
            }
            _ => assert_eq!(primed.state.client_store.len(), 1),
        }
        let mut world = resumed_world(&cfg, &primed, ResumeMode::ResumeBdp, |_, _| {});
        world.run();
        let d = world.result(1).unwrap().decision.unwrap();
        assert_eq!(d.outcome, SeedOutcome::Seeded, "{mode:?}");
        assert!(d.seeded_cwnd_bytes.unwrap() >= INITIAL_WINDOW);
    }
}

#[test]
fn opaque_token_bytes_match_frame_layout() {
    let cfg = ScenarioConfig {
        token_mode: TokenMode::OpaqueToken,
        ..small_prime_cfg()
    };
    let primed = prime(&cfg);
    let rec = primed.state.client_store.records()[0].clone();
    assert_eq!(
        rec.opaque_bytes.as_deref(),
        Some(encode_frame(&rec.frame).as_slice())
    );
}

#[test]
fn expired_client_token_runs_as_fresh() {
    let cfg = ScenarioConfig {
        resume_gap_s: 900,
        ..small_prime_cfg()
    };
    let primed = prime(&cfg);
    let run = |mode| {
        let mut w = resumed_world(&cfg, &primed, mode, |wc, _| wc.record_trace = true);
        w.run();
        w
    };
    let fresh = run(ResumeMode::Fresh);
    let bdp = run(ResumeMode::ResumeBdp);
    let r = bdp.result(1).unwrap();
    assert!(r.fallback);
    assert_eq!(r.effective_mode, ResumeMode::Fresh);
    assert_eq!(fresh.trace().to_bytes(), bdp.trace().to_bytes());
}

#[test]
fn loss_during_seeded_startup_discards_the_seed() {
    // the path lost most of its capacity since the token was issued
    let cfg = small_prime_cfg();
    let primed = prime(&ScenarioConfig {
        prime_size_bytes: 100 * MB,
        ..cfg.clone()
    });
    let slower = ScenarioConfig {
        file_size_bytes: 5 * MB,
        ..cfg.with_path(500_000, 10_000_000, 10_000_000)
    };
    let mut world = resumed_world(&slower, &primed, ResumeMode::ResumeBdp, |_, _| {});
    world.run();
    let r = world.result(1).unwrap();
    assert_eq!(r.decision.unwrap().outcome, SeedOutcome::Seeded);
    assert_eq!(r.seed_discards, 1);
    assert!(r.congestion_events >= 1);
    assert!(r.is_complete());
    let conn = world.connection(1).unwrap();
    assert!(!conn.seed_active());
}

#[test]
fn token_store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tokens.tsv");
    let primed = prime(&small_prime_cfg());
    let record = primed.state.client_store.records()[0].clone();
    {
        let mut store = TokenStore::open(&path).unwrap();
        store.put(record.clone()).unwrap();
    }
    let text = std::fs::read_to_string(&path).unwrap();
    let fields: Vec<&str> = text.trim_end().split('\t').collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0], "server.example");
    assert_eq!(fields[1], "bdp_frame");
    assert_eq!(fields[3], hex::encode_upper(encode_frame(&record.frame)));
    let reopened = TokenStore::open(&path).unwrap();
    let got = reopened
        .get("server.example", record.client_ip(), record.issued_at_s)
        .unwrap();
    assert_eq!(got, &record);
}
