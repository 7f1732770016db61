use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aescpa::aes::Block;
use aescpa::sim::{acquire_campaign, capture_rng, simulate_capture, LeakageConfig};

fn key() -> Block {
    Block(std::array::from_fn(|i| (i * 11 + 5) as u8))
}

#[test]
fn campaigns_are_reproducible() {
    let config = LeakageConfig {
        jitter_max: 3,
        drift_sigma: 0.01,
        drop_probability: 0.1,
        repeats: 3,
        ..Default::default()
    };
    let a = acquire_campaign(&key(), 50, &config, 77).unwrap();
    let b = acquire_campaign(&key(), 50, &config, 77).unwrap();
    assert_eq!(a, b);
    let c = acquire_campaign(&key(), 50, &config, 78).unwrap();
    assert_ne!(a.records()[0], c.records()[0]);
}

#[test]
fn drop_count_is_binomial() {
    let config = LeakageConfig {
        drop_probability: 0.5,
        repeats: 1,
        samples_per_trace: 200,
        trigger_index: 10,
        byte_spacing: 10,
        sbox_offset: 5,
        ..Default::default()
    };
    let n = 1000;
    let ts = acquire_campaign(&key(), n, &config, 5).unwrap();
    let dropped = (n - ts.len()) as f64;
    // mean 500, sd sqrt(250)
    assert!(
        (dropped - 500.0).abs() < 5.0 * 250f64.sqrt(),
        "dropped {dropped}"
    );
}

#[test]
fn retained_traces_keep_their_plaintext() {
    // Noiseless captures are a function of the plaintext alone, so any
    // mis-pairing after drops would show up as a sample mismatch.
    let clean = LeakageConfig::noiseless();
    let lossy = LeakageConfig {
        drop_probability: 0.4,
        repeats: 1,
        ..clean.clone()
    };
    let ts = acquire_campaign(&key(), 300, &lossy, 9).unwrap();
    assert!(ts.len() < 300);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for r in ts.records() {
        let fresh = simulate_capture(&r.plaintext, &key(), &clean, &mut rng).unwrap();
        let fresh: Vec<f32> = fresh.samples.iter().map(|&v| v as f32).collect();
        assert_eq!(r.samples, fresh);
    }
}

#[test]
fn leak_lands_at_configured_index() {
    let config = LeakageConfig::noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pt = Block(rng.random());
    let cap = simulate_capture(&pt, &key(), &config, &mut rng).unwrap();
    let leaks: Vec<usize> = (0..16)
        .flat_map(|j| [config.xor_leak_index(j), config.sbox_leak_index(j)])
        .collect();
    for (i, &v) in cap.samples.iter().enumerate() {
        if !leaks.contains(&i) {
            assert_eq!(v, config.baseline, "sample {i}");
        }
    }
    let j = 4;
    let hw = (pt[j] ^ key()[j]).count_ones() as f64;
    let expect = config.baseline - config.leak_coefficient * hw;
    assert_eq!(cap.samples[config.xor_leak_index(j)], expect);
}

#[test]
fn repeat_streams_are_independent() {
    let config = LeakageConfig::default();
    let pt = Block([0; 16]);
    let a = simulate_capture(&pt, &key(), &config, &mut capture_rng(1, 0, 0)).unwrap();
    let b = simulate_capture(&pt, &key(), &config, &mut capture_rng(1, 0, 1)).unwrap();
    assert_ne!(a.samples, b.samples);
}
