//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

mod support;

use std::collections::BTreeMap;
use std::time::Instant;

use failsafe_qmig::contract::FailSafeError;
use failsafe_qmig::crypto::{keccak256, pq_sign, Address, KeyPair, PqKeyPair, RecoverableSignature};
use failsafe_qmig::ledger::{Amount, Asset, EventKind, Outcome, RevertReason};
use failsafe_qmig::qmig::{
    build_intent_digest, inflection_message, permitted_amount, QMigRegistry, TransferIntentSource, VerifyError,
    LATE_INTENT_MESSAGE,
};
use failsafe_qmig::scenario::{self, run_scenario, Run, RunOptions, Scenario, Service, StepResult};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use support::history::{check_history, random_history};
use support::keccak_ref::reference_keccak256;
use support::multisig::{Custody, INTERCEPT_THRESHOLD, SIGNERS, WITHDRAW_THRESHOLD};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_bundled(name: &str, disable: &[Service]) -> Result<Run, String> {
    let text = scenario::bundled(name).ok_or_else(|| format!("no bundled scenario {name}"))?;
    let s = Scenario::from_toml(text).map_err(|e| e.to_string())?;
    run_scenario(
        &s,
        &RunOptions {
            seed: None,
            disable: disable.iter().copied().collect(),
        },
    )
    .map_err(|e| e.to_string())
}

fn usdc() -> Asset {
    Asset::token("USDC")
}

fn front_run_interception() -> Check {
    let run = run_bundled("key-theft-intercept", &[])?;
    let Some(StepResult::Submitted(drain)) = run.step("drain") else {
        return Err("drain step was not submitted".into());
    };
    let record = run
        .interceptor
        .intercepts()
        .iter()
        .find(|r| r.attacker_tx == *drain)
        .ok_or("no intercept answered the drain")?;
    let block = run
        .chain
        .blocks()
        .iter()
        .find(|b| b.txs.iter().any(|t| t.id == *drain))
        .ok_or("drain never included")?;
    let pos = |id| block.txs.iter().position(|t| t.id == id);
    let (Some(i), Some(d)) = (pos(record.intercept_tx), pos(*drain)) else {
        return Err("intercept and drain landed in different blocks".into());
    };
    let (intercept_tx, drain_tx) = (&block.txs[i], &block.txs[d]);
    ensure(i < d, || format!("intercept at position {i}, drain at {d}"))?;
    ensure(drain_tx.tx.gas_price == 100 && intercept_tx.tx.gas_price == 110, || {
        format!("gas prices {} vs {}", drain_tx.tx.gas_price, intercept_tx.tx.gas_price)
    })?;
    ensure(
        drain_tx.outcome == Outcome::Reverted(RevertReason::InsufficientBalance),
        || format!("drain outcome {}", drain_tx.outcome),
    )?;
    ensure(run.report.assets_lost == 0, || {
        format!("assets lost {}", run.report.assets_lost)
    })?;

    let undefended = run_bundled("key-theft-intercept", &[Service::Fis])?;
    let hot_balance = 1000;
    ensure(undefended.report.assets_lost == hot_balance, || {
        format!("without fis lost {}", undefended.report.assets_lost)
    })?;
    Ok(format!(
        "gas 110 ahead of 100 in block {}, drain Reverted:InsufficientBalance, lost 0; without fis lost {hot_balance}",
        block.height
    ))
}

fn keccak_bit_exact() -> Check {
    let vectors: [(&[u8], &str); 2] = [
        (b"", "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"),
        (
            b"abc",
            "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45",
        ),
    ];
    for (input, expected) in vectors {
        let got = keccak256(input);
        ensure(got.0 == reference_keccak256(input), || {
            format!("{input:?} disagrees with reference")
        })?;
        ensure(got.to_string().trim_start_matches("0x") == expected, || {
            format!("{input:?} gives {got}")
        })?;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for len in 0..600 {
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        ensure(keccak256(&data).0 == reference_keccak256(&data), || {
            format!("length {len} disagrees")
        })?;
    }
    Ok("empty and \"abc\" match reference and known digests; 600 random lengths agree".into())
}

fn qmig_round_trip() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut admin = PqKeyPair::generate(&mut rng);
    let mut registry = QMigRegistry::new(Some(admin.public().clone()));
    let source_of = |key: &KeyPair| TransferIntentSource {
        from_chain_id: 1,
        from_address: key.address(),
        dest_chain_id: 2,
        dest_address: Address::for_label("destination"),
    };
    let (h0, h1) = (3, 5);
    let early = KeyPair::generate(&mut rng);
    let (early_sig, early_digest) = build_intent_digest(&source_of(&early), &early).map_err(|e| e.to_string())?;
    registry.register(early_digest, h0);
    let sig = pq_sign(&mut admin, &inflection_message(h1)).map_err(|e| e.to_string())?;
    registry
        .set_inflection_point(h1, &sig.to_bytes())
        .map_err(|e| e.to_string())?;
    let inflection = registry.inflection().ok_or("inflection not recorded")?;
    registry
        .verify_transfer_intent(&source_of(&early), &early_sig, inflection)
        .map_err(|e| format!("early intent rejected: {e}"))?;

    for late_height in [h1, h1 + 1, h1 + 50] {
        let late = KeyPair::generate(&mut rng);
        let (late_sig, late_digest) = build_intent_digest(&source_of(&late), &late).map_err(|e| e.to_string())?;
        registry.register(late_digest, late_height);
        match registry.verify_transfer_intent(&source_of(&late), &late_sig, inflection) {
            Err(e @ VerifyError::LateIntent { .. }) => {
                ensure(e.to_string() == LATE_INTENT_MESSAGE, || format!("message {e:?}"))?;
            }
            other => return Err(format!("intent at {late_height} gave {other:?}")),
        }
    }
    ensure(
        LATE_INTENT_MESSAGE == "Intent to transfer registered after the quantum inflection point!",
        || "late-intent message text changed".into(),
    )?;

    let run = run_bundled("quantum-migration-honest", &[])?;
    let outcome = run.outcome_of("bridge_erin").unwrap_or_default();
    ensure(outcome == "LateIntent", || {
        format!("on-chain late intent gave {outcome}")
    })?;
    Ok(format!(
        "registered at {h0} < {h1} verifies; at {h1}, {}, {} LateIntent with exact message",
        h1 + 1,
        h1 + 50
    ))
}

/// Permitted amount recomputed by folding the raw event log.
fn replay_permitted(run: &Run, source: &Address, asset: &Asset) -> Result<Amount, String> {
    let chain = &run.chain;
    let inflection = chain.qmig().inflection().ok_or("inflection unset")?;
    let authorized: Vec<(Address, u64)> = chain
        .qmig()
        .disclosed()
        .iter()
        .filter(|d| d.source.dest_address == *source)
        .map(|d| (d.source.from_address, d.registered_at))
        .collect();
    let contracts: Vec<Address> = chain
        .failsafe()
        .accounts()
        .filter(|a| {
            a.enrollment
                .as_ref()
                .is_some_and(|e| e.wallets.contains(source) && e.enrolled_at < inflection)
        })
        .map(|a| a.contract_address)
        .collect();
    let (mut at_inflection, mut withdrawn, mut inflows, mut now, mut locked) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for ev in chain.events() {
        let (from, to, amount) = match &ev.kind {
            EventKind::Genesis { to, asset: a, amount } if a == asset => (Address::ZERO, *to, *amount as i128),
            EventKind::Transfer {
                from,
                to,
                asset: a,
                amount,
                outcome: Outcome::Executed,
            } if a == asset => (*from, *to, *amount as i128),
            EventKind::BridgeLock {
                source: s,
                escrow,
                asset: a,
                amount,
            } if a == asset => {
                if s == source {
                    locked += *amount as i128;
                }
                (*s, *escrow, *amount as i128)
            }
            _ => continue,
        };
        let is_lock = matches!(ev.kind, EventKind::BridgeLock { .. });
        if from == *source {
            now -= amount;
            if ev.height <= inflection {
                at_inflection -= amount;
            } else if !is_lock {
                withdrawn += amount;
            }
        }
        if to == *source {
            now += amount;
            if ev.height <= inflection {
                at_inflection += amount;
            } else if authorized.iter().any(|(s, h)| *s == from && *h < inflection) || contracts.contains(&from) {
                inflows += amount;
            }
        }
    }
    let permitted = ((at_inflection - withdrawn).max(0) + inflows).min(now + locked);
    Ok(permitted as Amount)
}

fn stolen_funds_exclusion() -> Check {
    let run = run_bundled("quantum-stolen-funds-rejected", &[])?;
    let mallory = run.address("mallory").ok_or("no mallory")?;
    let library = permitted_amount(&run.chain, &mallory, &usdc()).map_err(|e| e.to_string())?;
    let oracle = replay_permitted(&run, &mallory, &usdc())?;
    ensure(library == 50 && oracle == 50, || {
        format!("permitted {library}, oracle {oracle}")
    })?;
    for step in ["bridge_loot", "bridge_51"] {
        let got = run.outcome_of(step).unwrap_or_default();
        ensure(got == "ExceedsPermitted", || format!("{step}: {got}"))?;
    }
    ensure(run.outcome_of("bridge_own").as_deref() == Some("ok"), || {
        "mallory's own 50 refused".into()
    })?;

    let carol = run.address("carol").ok_or("no carol")?;
    let inflection = run.chain.qmig().inflection().ok_or("no inflection")?;
    let pre = run
        .chain
        .balance_at(&carol, &usdc(), inflection)
        .map_err(|e| e.to_string())?;
    let carol_oracle = replay_permitted(&run, &carol, &usdc())?;
    let minted = run.bridge.dest().balance(&carol, &usdc());
    ensure(pre == 1000 && minted == pre && carol_oracle == pre, || {
        format!("carol held {pre}, oracle permits {carol_oracle}, minted {minted}")
    })?;
    Ok(format!(
        "permitted 50 (oracle 50); 950 and 51 ExceedsPermitted; honest user bridged {minted}/{pre}"
    ))
}

fn multisig_thresholds() -> Check {
    let mut custody = Custody::new(1_000_000);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let indices: Vec<usize> = (0..SIGNERS).collect();
    let mut tally: BTreeMap<(&str, usize), (u32, u32)> = BTreeMap::new();
    for _ in 0..1000 {
        let size = rng.gen_range(0..=SIGNERS);
        let subset: Vec<usize> = indices.choose_multiple(&mut rng, size).copied().collect();
        let (name, op, need) = if rng.gen_bool(0.5) {
            ("withdraw", Custody::withdraw(1), WITHDRAW_THRESHOLD)
        } else {
            ("intercept", Custody::intercept(1), INTERCEPT_THRESHOLD)
        };
        let (hot, cold) = (custody.hot_balance(), custody.contract_balance());
        let outcome = custody.execute(op, &subset);
        let executed = outcome == Outcome::Executed;
        ensure(executed == (size >= need), || {
            format!("{name} with {size} signatures: {outcome}")
        })?;
        if !executed {
            let expected = Outcome::Reverted(RevertReason::FailSafe(FailSafeError::InsufficientSignatures {
                have: size,
                need,
            }));
            ensure(outcome == expected, || format!("{name} with {size}: {outcome}"))?;
            ensure(
                (hot, cold) == (custody.hot_balance(), custody.contract_balance()),
                || "rejected operation moved funds".into(),
            )?;
        }
        let entry = tally.entry((name, size)).or_default();
        if executed {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    let w2 = tally.get(&("withdraw", 2)).copied().unwrap_or_default();
    let w3 = tally.get(&("withdraw", 3)).copied().unwrap_or_default();
    let i1 = tally.get(&("intercept", 1)).copied().unwrap_or_default();
    ensure(w2.1 > 0 && w3.0 > 0 && i1.0 > 0, || {
        "a decisive subset size was never sampled".into()
    })?;
    Ok(format!(
        "1000 subsets: withdraw with 2 failed {}/{}, with 3 succeeded {}/{}; intercept with 1 succeeded {}/{}",
        w2.1,
        w2.0 + w2.1,
        w3.0,
        w3.0 + w3.1,
        i1.0,
        i1.0 + i1.1
    ))
}

fn run_signatures(run: &Run) -> Vec<RecoverableSignature> {
    let mut sigs: Vec<RecoverableSignature> = run.intent_signatures.clone();
    for block in run.chain.blocks() {
        sigs.extend(block.txs.iter().map(|t| t.tx.signature));
    }
    sigs.extend(run.chain.mempool().entries().iter().map(|e| e.tx.signature));
    sigs
}

fn digest_hiding() -> Check {
    let (mut records, mut sigs_checked) = (0, 0);
    for (name, _) in scenario::BUNDLED {
        let run = run_bundled(name, &[])?;
        let sigs = run_signatures(&run);
        let dump = run.chain.qmig().dump();
        for record in run.chain.qmig().records() {
            let bytes = record.to_record_bytes();
            ensure(bytes.len() <= 40, || format!("{name}: record of {} bytes", bytes.len()))?;
            for sig in &sigs {
                let raw = sig.to_bytes();
                ensure(!bytes.windows(raw.len()).any(|w| w == raw), || {
                    format!("{name}: signature inside record")
                })?;
                ensure(!bytes.windows(32).any(|w| w == &raw[..32] || w == &raw[32..64]), || {
                    format!("{name}: signature half inside record")
                })?;
            }
            records += 1;
        }
        for sig in &sigs {
            let hex: String = sig.to_bytes().iter().map(|b| format!("{b:02x}")).collect();
            ensure(!dump.contains(&hex), || {
                format!("{name}: signature inside registry dump")
            })?;
        }
        sigs_checked += sigs.len();
    }
    ensure(records > 0, || "no registry records to check".into())?;
    Ok(format!(
        "{records} records of 40 bytes, none containing any of {sigs_checked} run signatures"
    ))
}

fn rebalance_convergence() -> Check {
    let run = run_bundled("rebalance-drift", &[])?;
    let hot = run.address("alice").ok_or("no alice")?;
    let contract = *run.contracts.get("alice").ok_or("alice has no contract")?;
    let split = |h: u64| -> Result<(Amount, Amount), String> {
        let at = |a: &Address| run.chain.balance_at(a, &usdc(), h).map_err(|e| e.to_string());
        Ok((at(&hot)?, at(&hot)? + at(&contract)?))
    };
    let (h_before, t_before) = split(4)?;
    ensure(h_before * 2 == t_before, || {
        format!("after inflow H={h_before} T={t_before}")
    })?;
    let (h_after, t_after) = split(5)?;
    // |H/T - 1/5| <= 1/T  <=>  |5H - T| <= 5
    let err = (5 * h_after as i128 - t_after as i128).abs();
    ensure(err <= 5, || format!("after one tick H={h_after} T={t_after}"))?;
    Ok(format!(
        "hot fraction {h_before}/{t_before} -> {h_after}/{t_after} after one tick and one block"
    ))
}

fn balance_replay() -> Check {
    let mut queries = 0;
    for seed in 0..50 {
        let history = random_history(seed, 200);
        queries += check_history(&history).map_err(|e| format!("history {seed}: {e}"))?;
    }
    Ok(format!(
        "50 histories of 200 blocks, {queries} queries agree with brute-force replay"
    ))
}

fn determinism() -> Check {
    for (name, _) in scenario::BUNDLED {
        let a = run_bundled(name, &[])?;
        let b = run_bundled(name, &[])?;
        ensure(a.event_log() == b.event_log(), || format!("{name}: event logs differ"))?;
        ensure(a.report.to_string() == b.report.to_string(), || {
            format!("{name}: reports differ")
        })?;
    }
    Ok(format!(
        "{} bundled scenarios replay byte-identically",
        scenario::BUNDLED.len()
    ))
}

fn private_tx_bypass() -> Check {
    let open = run_bundled("private-tx-bypass", &[])?;
    ensure(open.report.intercepts == 0, || {
        format!("{} intercepts", open.report.intercepts)
    })?;
    ensure(open.report.assets_lost == 1000, || {
        format!("unlisted lost {}", open.report.assets_lost)
    })?;
    let listed = run_bundled("private-tx-bypass-listed", &[])?;
    ensure(
        listed.step("drain") == Some(&StepResult::FilteredByExceptionsList),
        || format!("listed private drain gave {:?}", listed.step("drain")),
    )?;
    ensure(listed.report.assets_lost == 0, || {
        format!("listed lost {}", listed.report.assets_lost)
    })?;
    Ok("unlisted: 0 intercepts, 1000 lost; listed: FilteredByExceptionsList, 0 lost".into())
}

type Criterion = (&'static str, fn() -> Check);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("front-run interception", front_run_interception),
        ("keccak-256 bit-exactness", keccak_bit_exact),
        ("qmig round trip", qmig_round_trip),
        ("stolen-funds exclusion", stolen_funds_exclusion),
        ("multisig thresholds", multisig_thresholds),
        ("digest hiding", digest_hiding),
        ("rebalance convergence", rebalance_convergence),
        ("balance replay", balance_replay),
        ("determinism", determinism),
        ("private-tx bypass pair", private_tx_bypass),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[{:>2}] PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                println!("[{:>2}] FAIL {name} ({secs:.1}s): {detail}", i + 1);
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
