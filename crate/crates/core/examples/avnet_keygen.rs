//! Decentralized key setup: per-party secrets, masked bases, subset keys and
//! the aggregation key, with the mask cancellation checked.

use fedsecure::avnet::{masked_base, KeySetup};
use fedsecure::group::GroupParams;

fn main() {
    let params = GroupParams::generate(128, 3).unwrap();
    let parties = 4;
    let setup = KeySetup::run(&params, parties, |i| 1000 + i as u64);

    for (s, key) in setup.secrets.iter().zip(&setup.subset_keys) {
        let gy = masked_base(&params, &setup.board, s.index()).unwrap();
        println!("party {}: g^x = {}", s.index(), s.commitment(&params));
        println!("          g^y = {gy}");
        println!("          S   = {}", key.0);
    }
    let expected = setup.expected_key(&params);
    println!("AK         = {}", setup.aggregation_key.value());
    println!("g^(sum s)  = {expected}");
    println!("masks cancel: {}", *setup.aggregation_key.value() == expected);
    println!("setup traffic: {} bytes", setup.wire_bytes(&params));
}
