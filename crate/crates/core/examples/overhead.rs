//! Ciphertext size and encryption time for a model of `e` parameters.
//!
//! `cargo run --release --example overhead -- 100000 2048`

use std::time::Instant;

use fedsecure::avnet::KeySetup;
use fedsecure::group::GroupParams;
use fedsecure::metrics::{elements_from_uncompressed_bytes, overhead_report};
use fedsecure::model::ModelVector;
use fedsecure::secure_agg::{encrypt_model, quantize, round_id, QuantizationScheme};

fn main() {
    let mut args = std::env::args().skip(1);
    let e: u64 = args.next().map_or(10_000, |s| s.parse().expect("element count"));
    let bits: u64 = args.next().map_or(2048, |s| s.parse().expect("group bits"));

    let params = GroupParams::generate(bits, 1).unwrap();
    let keys = KeySetup::run(&params, 4, |i| i as u64);
    let scheme = QuantizationScheme::with_defaults(4).unwrap();
    let model: ModelVector = (0..e)
        .map(|i| ((i % 200) as f64 - 100.0) / 100.0)
        .collect::<Vec<_>>()
        .into();
    let q = quantize(&model, &scheme);
    let samples: Vec<_> = (1..=3)
        .map(|r| {
            let t = Instant::now();
            let _ = encrypt_model(&q, keys.secrets[0].s(), &round_id(r), &params);
            t.elapsed()
        })
        .collect();
    let r = overhead_report(e, params.modulus_bits(), &samples);
    println!("{e} parameters, {}-bit group", r.group_bits);
    println!("  encrypt: {:.2} ms per vector", r.encrypt_ms_per_vector.unwrap());
    println!(
        "  points uncompressed: {} B, compressed: {} B",
        r.bytes_uncompressed, r.bytes_compressed
    );

    let e160 = elements_from_uncompressed_bytes(992_000_000, 160);
    let big = overhead_report(e160, 160, &[]);
    println!(
        "160-bit points: 992 MB uncompressed is {e160} parameters, {:.1} MB compressed (ratio {:.3})",
        big.bytes_compressed as f64 / 1e6,
        big.compression_ratio()
    );
}
