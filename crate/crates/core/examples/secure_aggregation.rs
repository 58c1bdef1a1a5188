//! Quantize, encrypt and aggregate three model vectors; the server recovers
//! only the average.

use fedsecure::avnet::KeySetup;
use fedsecure::dlog::DlogAlgorithm;
use fedsecure::group::GroupParams;
use fedsecure::model::ModelVector;
use fedsecure::secure_agg::{
    aggregate_recover, dequantize_average, encrypt_model, quantize, round_id, QuantizationScheme,
};

fn main() {
    let params = GroupParams::generate(512, 9).unwrap();
    let parties = 3;
    let keys = KeySetup::run(&params, parties, |i| i as u64);
    let scheme = QuantizationScheme::with_defaults(parties).unwrap();

    let models = [
        ModelVector::new(vec![0.10, -0.50, 1.25]),
        ModelVector::new(vec![0.30, -0.25, 0.75]),
        ModelVector::new(vec![0.20, 0.00, -1.00]),
    ];
    let rid = round_id(1);
    let ciphers: Vec<_> = models
        .iter()
        .zip(&keys.secrets)
        .map(|(m, s)| encrypt_model(&quantize(m, &scheme), s.s(), &rid, &params))
        .collect();
    println!(
        "each ciphertext: {} entries, {} bytes on the wire",
        ciphers[0].len(),
        ciphers[0].wire_len(&params)
    );

    let sum = aggregate_recover(
        &ciphers,
        &keys.aggregation_key,
        &rid,
        &scheme,
        &params,
        DlogAlgorithm::Bsgs,
        0,
    )
    .unwrap();
    let avg = dequantize_average(&sum, &scheme).unwrap();
    println!("recovered quantized sum: {sum:?}");
    println!("recovered average:       {:?}", avg.values());
    let plain: Vec<f64> = (0..3).map(|j| models.iter().map(|m| m[j]).sum::<f64>() / 3.0).collect();
    println!("plaintext average:       {plain:?}");
    println!(
        "max error: {:.2e} (bound {:.2e})",
        avg.max_abs_diff(&plain.into()),
        0.5 / scheme.scale()
    );
}
