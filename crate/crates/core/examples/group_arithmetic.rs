//! Prime-order subgroup arithmetic and bounded discrete logs.

use fedsecure::dlog::{discrete_log, DlogAlgorithm};
use fedsecure::group::GroupParams;

fn main() {
    let toy = GroupParams::from_u64(23, 11, 4).unwrap();
    let g = toy.generator();
    let a = toy.exp_u64(&g, 2);
    println!("toy group p=23 q=11 g=4");
    println!(
        "  4^2 = {a}, 16*4 = {}, inv(6) = {}",
        toy.mul(&a, &g),
        toy.inv(&toy.exp_u64(&g, 6))
    );

    let params = GroupParams::generate(256, 42).unwrap();
    println!(
        "generated group: {} bit p, {} bit q",
        params.modulus_bits(),
        params.q().bits()
    );
    let g = params.generator();
    let secret = 123_456u64;
    let target = params.exp_u64(&g, secret);
    for alg in [DlogAlgorithm::Bsgs, DlogAlgorithm::PollardRho] {
        let found = discrete_log(&params, &target, &g, 1 << 20, alg, 7).unwrap();
        println!("  {alg}: log_g(g^{secret}) = {found}");
    }
    let h = params.hash_to_scalar(b"round:1");
    println!("  H(\"round:1\") = {h}");
}
