//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fedsecure::avnet::{aggregation_key, masked_base, subset_key, KeySetup, PartySecret, Round1Board};
use fedsecure::config::{ScenarioConfig, DEFAULT_SCENARIO};
use fedsecure::dlog::{exhaustive_log, BsgsTable, DlogAlgorithm, Kangaroo};
use fedsecure::fl::{Mode, Simulation};
use fedsecure::group::GroupParams;
use fedsecure::metrics::{dice_from_iou, elements_from_uncompressed_bytes, overhead_report, ConfusionTotals, Mask};
use fedsecure::model::ModelVector;
use fedsecure::orbit::{visibility_windows, VisibilitySchedule};
use fedsecure::secure_agg::{
    aggregate_recover, dequantize_average, encrypt_model, plaintext_sum, quantize, round_id, QuantizationScheme,
};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

fn secure_aggregation_exactness() -> Outcome {
    let start = Instant::now();
    let groups: Vec<GroupParams> = [32u64, 40, 48, 56, 64]
        .iter()
        .map(|&b| GroupParams::generate(b, b).unwrap())
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let trials = 120;
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let params = &groups[rng.gen_range(0..groups.len())];
        let parties = rng.gen_range(2..=6usize);
        let e = rng.gen_range(1..=256usize);
        let scheme = QuantizationScheme::with_defaults(parties).unwrap();
        let keys = KeySetup::run(params, parties, |i| rng_seed(trial, i));
        let models: Vec<ModelVector> = (0..parties)
            .map(|_| {
                (0..e)
                    .map(|_| rng.gen_range(-scheme.clip()..=scheme.clip()))
                    .collect::<Vec<_>>()
                    .into()
            })
            .collect();
        let q: Vec<_> = models.iter().map(|m| quantize(m, &scheme)).collect();
        let rid = round_id(trial as u64);
        let ciphers: Vec<_> = q
            .iter()
            .zip(&keys.secrets)
            .map(|(v, s)| encrypt_model(v, s.s(), &rid, params))
            .collect();
        let alg = if trial % 2 == 0 {
            DlogAlgorithm::Bsgs
        } else {
            DlogAlgorithm::PollardRho
        };
        let sum = aggregate_recover(
            &ciphers,
            &keys.aggregation_key,
            &rid,
            &scheme,
            params,
            alg,
            trial as u64,
        )
        .map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(
            sum == plaintext_sum(&q).unwrap(),
            format!("trial {trial}: recovered sum differs"),
        )?;
        let avg = dequantize_average(&sum, &scheme).unwrap();
        for (mu, a) in avg.values().iter().enumerate() {
            let plain = models.iter().map(|m| m[mu]).sum::<f64>() / parties as f64;
            worst = worst.max((a - plain).abs());
        }
        let tol = 1.0 / (2.0 * scheme.scale());
        ensure(
            worst <= tol + 1e-12,
            format!("trial {trial}: average error {worst} > {tol}"),
        )?;
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{trials} trials, sums exact, max average error {worst:.2e}, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn rng_seed(trial: usize, party: usize) -> u64 {
    (trial as u64) << 8 | party as u64
}

fn avnet_identities() -> Outcome {
    let start = Instant::now();
    let params = GroupParams::generate(64, 7).unwrap();
    let mut checked = 0;
    for parties in 1..=8usize {
        for trial in 0..100u64 {
            let keys = KeySetup::run(&params, parties, |i| trial * 1000 + i as u64);
            let mut sum_xy = params.scalar_u64(0);
            for (i, s) in keys.secrets.iter().enumerate() {
                let mut y = params.scalar_u64(0);
                for (z, o) in keys.secrets.iter().enumerate() {
                    if z < i {
                        y = params.scalar_add(&y, o.x());
                    } else if z > i {
                        y = params.scalar_add(&y, &params.scalar_neg(o.x()));
                    }
                }
                let gy = masked_base(&params, &keys.board, s.index()).unwrap();
                ensure(gy == params.exp_g(&y), "masked base is not g^y")?;
                sum_xy = params.scalar_add(&sum_xy, &params.scalar_mul(s.x(), &y));
            }
            ensure(sum_xy.is_zero(), format!("L={parties}: sum of x*y is not 0 mod q"))?;
            ensure(
                *keys.aggregation_key.value() == keys.expected_key(&params),
                format!("L={parties}: AK differs from g^sum(s)"),
            )?;
            checked += 1;
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("{checked} setups, {:.2} s", start.elapsed().as_secs_f64()))
}

fn worked_example() -> Outcome {
    let params = GroupParams::from_u64(23, 11, 4).unwrap();
    let g = params.generator();
    let el = |v: u32| params.element(BigUint::from(v)).unwrap();
    let s = [params.scalar_u64(2), params.scalar_u64(5)];
    let x = [params.scalar_u64(3), params.scalar_u64(7)];
    let u = params.scalar_u64(3);
    let w = [1u64, 2];

    let cipher = |i: usize| {
        params.mul(
            &params.exp(&g, &params.scalar_mul(&s[i], &u)),
            &params.exp_u64(&g, w[i]),
        )
    };
    let (c1, c2) = (cipher(0), cipher(1));
    ensure(c1 == el(8), format!("C1 = {c1}, expected 8"))?;
    ensure(c2 == el(2), format!("C2 = {c2}, expected 2"))?;

    let secrets: Vec<_> = (0..2)
        .map(|i| PartySecret::from_parts(i + 1, x[i].clone(), s[i].clone()))
        .collect();
    let board = Round1Board::from_commitments(secrets.iter().map(|p| p.commitment(&params)).collect());
    let subset: Vec<_> = secrets
        .iter()
        .map(|p| subset_key(&params, p, &masked_base(&params, &board, p.index()).unwrap()))
        .collect();
    let ak = aggregation_key(&params, &subset);
    ensure(*ak.value() == el(8), format!("AK = {}, expected 8", ak.value()))?;

    let quotient = params.div(&params.mul(&c1, &c2), &params.exp(ak.value(), &u));
    ensure(quotient == el(18), format!("quotient = {quotient}, expected 18"))?;
    let table = BsgsTable::new(&params, &g, 10).unwrap();
    let sum = table.solve(&quotient).map_err(|e| e.to_string())?;
    ensure(sum == 3, format!("recovered {sum}, expected 3"))?;
    Ok("C1=8, C2=2, AK=8, quotient=18, sum=3".into())
}

fn dlog_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let params = GroupParams::generate(32, 11).unwrap();
    let g = params.generator();
    let bound = 1u64 << 12;
    let table = BsgsTable::new(&params, &g, bound).unwrap();
    let kangaroo = Kangaroo::new(&params, &g, bound, 5).unwrap();
    let mut target = params.identity();
    for k in 0..=bound {
        let oracle = exhaustive_log(&params, &target, &g, bound);
        ensure(oracle == Some(k), format!("exhaustive search gave {oracle:?} for {k}"))?;
        ensure(table.solve(&target) == Ok(k), format!("BSGS disagrees at {k}"))?;
        ensure(kangaroo.solve(&target) == Ok(k), format!("rho disagrees at {k}"))?;
        target = params.mul(&target, &g);
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "all {} exponents agree, {:.2} s",
        bound + 1,
        start.elapsed().as_secs_f64()
    ))
}

fn overhead_numbers() -> Outcome {
    let e = elements_from_uncompressed_bytes(992_000_000, 160);
    let r = overhead_report(e, 160, &[]);
    let rel = |a: u64, b: f64| (a as f64 - b).abs() / b;
    ensure(
        rel(r.bytes_uncompressed, 992e6) <= 0.02,
        format!("uncompressed {} B", r.bytes_uncompressed),
    )?;
    ensure(
        rel(r.bytes_compressed, 497e6) <= 0.02,
        format!("compressed {} B", r.bytes_compressed),
    )?;

    let params = GroupParams::generate(2048, 1).unwrap();
    let scheme = QuantizationScheme::with_defaults(4).unwrap();
    let keys = KeySetup::run(&params, 4, |i| i as u64);
    let one = quantize(&ModelVector::new(vec![0.5]), &scheme);
    let mut times: Vec<f64> = (0..5)
        .map(|r| {
            let t = Instant::now();
            let c = encrypt_model(&one, keys.secrets[0].s(), &round_id(r), &params);
            let ms = t.elapsed().as_secs_f64() * 1e3;
            assert_eq!(c.len(), 1);
            ms
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let median = times[2];
    ensure(median < 50.0, format!("single-entry encryption took {median:.2} ms"))?;
    Ok(format!(
        "e={e}: {:.1} MB uncompressed, {:.1} MB compressed; one 2048-bit entry {median:.3} ms",
        r.bytes_uncompressed as f64 / 1e6,
        r.bytes_compressed as f64 / 1e6
    ))
}

fn connectivity() -> Outcome {
    let start = Instant::now();
    let cfg = ScenarioConfig::default_scenario();
    let c = cfg.constellation();
    let horizon = 86_400.0;
    let windows = visibility_windows(&c, &cfg.ground_station, horizon, cfg.run.step_s);
    let longest = windows.iter().map(|w| w.duration()).fold(0.0, f64::max);
    ensure(!windows.is_empty(), "no visibility windows")?;
    ensure(longest < 1200.0, format!("window of {longest:.1} s"))?;
    let schedule = VisibilitySchedule::new(c.satellite_count(), windows.clone(), horizon);
    // gaps between consecutive windows of one satellite
    let gap = (0..c.satellite_count())
        .flat_map(|s| {
            schedule
                .windows_of(s)
                .windows(2)
                .map(|p| p[1].start - p[0].end)
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    ensure(gap > 7200.0, format!("largest gap only {gap:.0} s"))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "{} windows, longest {:.1} min, largest gap {:.2} h",
        windows.len(),
        longest / 60.0,
        gap / 3600.0
    ))
}

fn default_group() -> GroupParams {
    ScenarioConfig::default_scenario().group_params().unwrap()
}

fn convergence_delay(group: &GroupParams) -> Outcome {
    let mut cfg = ScenarioConfig::default_scenario();
    let first_round = |mode: Mode| -> Result<f64, String> {
        let mut c = ScenarioConfig::default_scenario();
        c.run.mode = mode;
        let mut sim = Simulation::with_group(c, group.clone()).map_err(|e| e.to_string())?;
        Ok(sim.step().map_err(|e| e.to_string())?.end_s)
    };
    let fed = first_round(Mode::FedSecure)?;
    let direct = first_round(Mode::DirectSync)?;
    ensure(
        fed < direct,
        format!("fedsecure {fed:.0} s is not below direct_sync {direct:.0} s"),
    )?;
    ensure(
        (0.3 * 3600.0..=5.0 * 3600.0).contains(&fed),
        format!("fedsecure round 1 at {:.2} h", fed / 3600.0),
    )?;

    cfg.run.max_rounds = 5;
    cfg.run.epsilon = 0.0;
    ensure(
        cfg.training.trainer.task == fedsecure::fl::Task::SyntheticClassification,
        "default task is not classification",
    )?;
    let mut sim = Simulation::with_group(cfg, group.clone()).map_err(|e| e.to_string())?;
    let initial = sim.global_loss(sim.global_model());
    let report = sim.run().map_err(|e| e.to_string())?;
    ensure(
        report.traces.len() == 5,
        format!("only {} rounds ran", report.traces.len()),
    )?;
    let mut losses = vec![initial];
    losses.extend(report.traces.iter().map(|t| t.train_loss));
    for pair in losses.windows(2) {
        ensure(pair[1] <= pair[0] + 1e-6, format!("loss rose: {losses:?}"))?;
    }
    Ok(format!(
        "round 1: fedsecure {:.2} h, direct_sync {:.2} h; losses {}",
        fed / 3600.0,
        direct / 3600.0,
        losses.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(" > ")
    ))
}

fn crypto_transparency(group: &GroupParams) -> Outcome {
    let make = |mode: Mode| {
        let mut c = ScenarioConfig::default_scenario();
        c.run.mode = mode;
        Simulation::with_group(c, group.clone()).unwrap()
    };
    let mut secure = make(Mode::FedSecure);
    let mut plain = make(Mode::PlaintextDebug);
    for round in 1..=3 {
        let a = secure.step().map_err(|e| e.to_string())?;
        let b = plain.step().map_err(|e| e.to_string())?;
        ensure(a.quantized_sum.is_some(), "missing quantized sum")?;
        ensure(
            a.quantized_sum == b.quantized_sum,
            format!("round {round}: quantized sums differ"),
        )?;
        let bits = |m: &ModelVector| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure(
            bits(secure.global_model()) == bits(plain.global_model()),
            format!("round {round}: global models differ"),
        )?;
    }
    Ok("3 rounds bit-identical".into())
}

fn metric_correctness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for trial in 0..100 {
        let (w, h) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let classes = rng.gen_range(1..=5u32);
        let mut draw = || (0..w * h).map(|_| rng.gen_range(0..classes)).collect::<Vec<u32>>();
        let (p, t) = (draw(), draw());
        let totals = ConfusionTotals::from_masks(
            &[Mask::new(w, h, p.clone()).unwrap()],
            &[Mask::new(w, h, t.clone()).unwrap()],
            classes as usize,
        )
        .unwrap();
        for c in 0..classes {
            let ps: HashSet<usize> = (0..w * h).filter(|&i| p[i] == c).collect();
            let ts: HashSet<usize> = (0..w * h).filter(|&i| t[i] == c).collect();
            let inter = ps.intersection(&ts).count();
            let union = ps.union(&ts).count();
            let (iou, dice) = if union == 0 {
                (1.0, 1.0)
            } else {
                (
                    inter as f64 / union as f64,
                    (2 * inter) as f64 / (ps.len() + ts.len()) as f64,
                )
            };
            ensure(
                totals.iou(c as usize) == iou,
                format!("trial {trial} class {c}: IoU differs"),
            )?;
            ensure(
                totals.dice(c as usize) == dice,
                format!("trial {trial} class {c}: Dice differs"),
            )?;
        }
    }
    let d = dice_from_iou(1.0 / 3.0);
    ensure((d - 0.5).abs() < 1e-15, format!("Dice(1/3) = {d}"))?;
    Ok("100 random mask pairs exact; IoU 1/3 -> Dice 1/2".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let conf = dir.path().join("scenario.conf");
    std::fs::write(&conf, DEFAULT_SCENARIO).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let mut log = Vec::new();
        let code = fedsecure::cli::run_with_output(
            [
                "fedsecure",
                "simulate",
                "--config",
                conf.to_str().unwrap(),
                "--max-rounds",
                "3",
                "--out",
                out.to_str().unwrap(),
            ],
            &mut log,
        );
        ensure(code == 0, format!("simulate exited with {code}"))?;
        files.push(std::fs::read(out.join("rounds.csv")).map_err(|e| e.to_string())?);
    }
    ensure(
        !files[0].is_empty() && files[0] == files[1],
        "rounds.csv differs between runs",
    )?;
    Ok(format!("rounds.csv identical ({} bytes)", files[0].len()))
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    // a panicking criterion is reported as FAIL; the message goes to stderr
    panic::set_hook(Box::new(|info| eprintln!("panic: {info}")));
    let group = default_group();
    let criteria: Vec<(&str, Check)> = vec![
        ("secure aggregation exactness", Box::new(secure_aggregation_exactness)),
        ("AV-net identities", Box::new(avnet_identities)),
        ("hand-verified worked example", Box::new(worked_example)),
        ("dlog solver oracle equivalence", Box::new(dlog_oracle_equivalence)),
        ("overhead numbers", Box::new(overhead_numbers)),
        ("connectivity phenomenology", Box::new(connectivity)),
        ("convergence-delay advantage", Box::new(|| convergence_delay(&group))),
        ("crypto transparency", Box::new(|| crypto_transparency(&group))),
        ("metric correctness", Box::new(metric_correctness)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
