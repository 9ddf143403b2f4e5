//! Experiment harness: permutation generation, seeded experiment blocks,
//! verification suites, and CSV/JSON report emission.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{aggregate_stats, Aggregate, RunStats};
use crate::error::{Error, Result};
use crate::model::NetworkConfig;
use crate::offline::{route_offline, validate_permutation};
use crate::randomized::{
    route_randomized, LossPolicy, ParticipationSchedule, RandomizedRouter, StepProtocol,
};
use crate::rng::{derive_run_seed, derive_stream_seed, derive_uniform_group, Purpose, RandomKey, Stream};
use crate::sorting::{sort_on_pops, KeyedRecord};

/// Where the routed permutation comes from.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PermSource {
    /// Fisher-Yates over all n! permutations, keyed by the run seed.
    Uniform,
    Identity,
    Reversal,
    /// Adjacent sources aimed at destinations `j` and `j+g` of the same
    /// group: the densest possible sharing of (temporary group, final
    /// group), which is what breaks the literal five-slot step for d > g.
    Stress,
    File(PathBuf),
}

impl std::str::FromStr for PermSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PermSource::Uniform),
            "identity" => Ok(PermSource::Identity),
            "reversal" => Ok(PermSource::Reversal),
            "stress" => Ok(PermSource::Stress),
            other => match other.strip_prefix("file:") {
                Some(path) => Ok(PermSource::File(PathBuf::from(path))),
                None => Err(Error::domain(format!("unknown permutation source '{other}'"))),
            },
        }
    }
}

/// Build a permutation of `[0, n)` from the given source.
pub fn generate_permutation(
    source: PermSource,
    n: u32,
    seed: u64,
    cfg: &NetworkConfig,
) -> Result<Vec<u32>> {
    if n == 0 {
        return Err(Error::domain("cannot generate a permutation of zero elements"));
    }
    let perm = match source {
        PermSource::Identity => (0..n).collect(),
        PermSource::Reversal => (0..n).rev().collect(),
        PermSource::Uniform => {
            let mut perm: Vec<u32> = (0..n).collect();
            for i in (1..n as usize).rev() {
                let key = RandomKey::new(seed, i as u64, 1, Purpose::Color);
                let j = derive_uniform_group(&key, i as u32 + 1)? as usize;
                perm.swap(i, j);
            }
            perm
        }
        PermSource::Stress => {
            let (d, g) = (cfg.d(), cfg.g());
            if d <= g {
                return Err(Error::domain(format!(
                    "stress permutation needs d > g, got POPS({d},{g})"
                )));
            }
            // Within each group's block of destinations, order by residue
            // mod g so neighbours share both temporary and final group.
            let mut perm = Vec::with_capacity(n as usize);
            for a in 0..g {
                let mut block: Vec<u32> = (a * d..(a + 1) * d).collect();
                block.sort_unstable_by_key(|&v| (v % g, v));
                perm.extend_from_slice(&block);
            }
            perm
        }
        PermSource::File(path) => {
            let text = std::fs::read_to_string(&path)?;
            let mut perm = Vec::new();
            for tok in text.split_whitespace() {
                let v: u32 = tok.parse().map_err(|_| {
                    Error::validation(format!("'{tok}' in {} is not an index", path.display()))
                })?;
                perm.push(v);
            }
            perm
        }
    };
    validate_permutation(&perm, n)?;
    Ok(perm)
}

/// Keys for the standalone sort command, keyed by the seed.
pub fn generate_keys(n: u32, seed: u64) -> Vec<u64> {
    (0..n as u64).map(|i| RandomKey::new(seed, i, 1, Purpose::Color).digest()).collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::domain(format!("unknown output format '{other}'"))),
        }
    }
}

/// A complete description of one experiment block.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub cfg: NetworkConfig,
    pub protocol: StepProtocol,
    pub schedule: ParticipationSchedule,
    pub perm_source: PermSource,
    pub runs: u32,
    pub seed: u64,
    pub loss_policy: LossPolicy,
    pub immediate_exit: bool,
    pub format: OutputFormat,
    pub out_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(cfg: NetworkConfig, protocol: StepProtocol) -> Self {
        ExperimentSpec {
            cfg,
            protocol,
            schedule: ParticipationSchedule::fixed(),
            perm_source: PermSource::Uniform,
            runs: 1,
            seed: 0,
            loss_policy: LossPolicy::Abort,
            immediate_exit: false,
            format: OutputFormat::Csv,
            out_path: None,
        }
    }

    pub fn runs(mut self, runs: u32) -> Self {
        self.runs = runs;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn perm(mut self, source: PermSource) -> Self {
        self.perm_source = source;
        self
    }

    pub fn loss_policy(mut self, policy: LossPolicy) -> Self {
        self.loss_policy = policy;
        self
    }
}

/// One run's worth of report data; field names match the CSV header.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ReportRow {
    pub n: u32,
    pub d: u32,
    pub g: u32,
    pub protocol: String,
    pub seed_index: u32,
    pub iterations: u32,
    pub slots: u32,
    pub conflicts_s1: u64,
    pub conflicts_s2: u64,
    pub conflicts_ack: u64,
    pub conflicts_delivery: u64,
    pub wall_ms: f64,
}

/// Aggregates over an experiment block.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentAggregate {
    pub iterations: Aggregate,
    pub slots: Aggregate,
    pub total_losses: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub stats: Vec<RunStats>,
    pub aggregate: ExperimentAggregate,
}

fn row_from_stats(
    cfg: &NetworkConfig,
    protocol: StepProtocol,
    seed_index: u32,
    stats: &RunStats,
    wall_ms: f64,
) -> ReportRow {
    ReportRow {
        n: cfg.n(),
        d: cfg.d(),
        g: cfg.g(),
        protocol: protocol.name().to_string(),
        seed_index,
        iterations: stats.iterations,
        slots: stats.slots,
        conflicts_s1: stats.conflicts_slot1(),
        conflicts_s2: stats.conflicts_slot2(),
        conflicts_ack: stats.conflicts_ack(),
        conflicts_delivery: stats.conflicts_delivery(),
        wall_ms,
    }
}

/// Execute `runs` seeded runs of the randomized router. Per-run seeds are
/// derived from the block seed, so a block is reproducible as a whole.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.runs == 0 {
        return Err(Error::domain("an experiment needs at least one run"));
    }
    let mut rows = Vec::with_capacity(spec.runs as usize);
    let mut stats_all = Vec::with_capacity(spec.runs as usize);
    for idx in 0..spec.runs {
        let run_seed = derive_run_seed(spec.seed, idx as u64);
        let perm = generate_permutation(
            spec.perm_source.clone(),
            spec.cfg.n(),
            derive_stream_seed(run_seed, Stream::Permutation),
            &spec.cfg,
        )?;
        let started = Instant::now();
        let mut router = RandomizedRouter::new(
            perm,
            spec.cfg,
            spec.protocol,
            spec.schedule,
            derive_stream_seed(run_seed, Stream::Routing),
        )?
        .with_loss_policy(spec.loss_policy)
        .with_immediate_exit(spec.immediate_exit);
        let stats = router.run()?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        rows.push(row_from_stats(&spec.cfg, spec.protocol, idx, &stats, wall_ms));
        stats_all.push(stats);
    }
    let iterations =
        aggregate_stats(&rows.iter().map(|r| r.iterations as f64).collect::<Vec<_>>())?;
    let slots = aggregate_stats(&rows.iter().map(|r| r.slots as f64).collect::<Vec<_>>())?;
    let total_losses = stats_all.iter().map(|s| s.losses()).sum();
    Ok(ExperimentReport {
        rows,
        stats: stats_all,
        aggregate: ExperimentAggregate { iterations, slots, total_losses },
    })
}

pub const CSV_HEADER: &str =
    "n,d,g,protocol,seed_index,iterations,slots,conflicts_s1,conflicts_s2,conflicts_ack,conflicts_delivery,wall_ms";

/// Write rows in the fixed report schema.
pub fn emit_report(rows: &[ReportRow], format: OutputFormat, w: &mut dyn Write) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(w, "{CSV_HEADER}")?;
            for r in rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.n,
                    r.d,
                    r.g,
                    r.protocol,
                    r.seed_index,
                    r.iterations,
                    r.slots,
                    r.conflicts_s1,
                    r.conflicts_s2,
                    r.conflicts_ack,
                    r.conflicts_delivery,
                    r.wall_ms
                )?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *w, rows)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Write rows to a file path (or stdout when `path` is `None`).
pub fn emit_report_to(
    rows: &[ReportRow],
    format: OutputFormat,
    path: Option<&std::path::Path>,
) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p)?;
            emit_report(rows, format, &mut f)
        }
        None => emit_report(rows, format, &mut std::io::stdout().lock()),
    }
}

/// One named check inside a verification suite.
#[derive(Clone, Debug)]
pub struct VerifyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(VerifyCheck { name: name.into(), passed, detail: detail.into() });
    }
}

/// Run one of the named verification suites, capped at networks of
/// `size_budget` processors (default 1 Mi).
pub fn verify_suite(name: &str, size_budget: Option<u32>) -> Result<VerifyReport> {
    let budget = size_budget.unwrap_or(1 << 20);
    match name {
        "prop1" => verify_prop1(budget),
        "offline" => verify_offline(budget),
        "sorting" => verify_sorting(budget),
        "buffers" => verify_buffers(budget),
        "exactly-once" => verify_exactly_once(budget),
        other => Err(Error::domain(format!(
            "unknown suite '{other}' (have: prop1, offline, sorting, buffers, exactly-once)"
        ))),
    }
}

/// Slots 3-5 of the five-slot step never conflict when d = g, and the
/// original is deleted iff the copy lands, for every permutation and seed.
fn verify_prop1(budget: u32) -> Result<VerifyReport> {
    let mut report = VerifyReport { suite: "prop1".into(), checks: Vec::new() };
    const SEEDS_PER_CONFIG: u64 = 2000;
    for g in [2u32, 4, 8, 16, 32] {
        let cfg = NetworkConfig::new(g, g)?;
        if cfg.n() > budget {
            continue;
        }
        let mut bad = 0u64;
        for seed in 0..SEEDS_PER_CONFIG {
            let perm = generate_permutation(
                PermSource::Uniform,
                cfg.n(),
                derive_stream_seed(seed, Stream::Permutation),
                &cfg,
            )?;
            let stats = route_randomized(
                &perm,
                &cfg,
                StepProtocol::Paper5,
                ParticipationSchedule::fixed(),
                derive_stream_seed(seed, Stream::Routing),
            )?;
            if stats.conflicts_ack() != 0 || stats.conflicts_delivery() != 0 || stats.losses() != 0
            {
                bad += 1;
            }
        }
        report.push(
            format!("pops({g},{g})"),
            bad == 0,
            format!("{SEEDS_PER_CONFIG} runs, {bad} with ack/delivery conflicts or losses"),
        );
    }
    Ok(report)
}

/// Offline router: exact slot counts, conflict freedom, correct placement.
fn verify_offline(budget: u32) -> Result<VerifyReport> {
    let mut report = VerifyReport { suite: "offline".into(), checks: Vec::new() };

    // All 24 permutations of a POPS(2,2).
    let cfg22 = NetworkConfig::new(2, 2)?;
    let mut ok = 0;
    let mut total = 0;
    let mut perm: Vec<u32> = (0..4).collect();
    loop {
        total += 1;
        let (schedule, stats) = route_offline(&perm, &cfg22)?;
        if schedule.total_slots == 2 && stats.slots == 2 {
            ok += 1;
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    report.push("pops(2,2) exhaustive", ok == total, format!("{ok}/{total} in exactly 2 slots"));

    // Exhaustive single-slot routing on POPS(1,k), k <= 8.
    for k in 2..=8u32 {
        if k > budget {
            continue;
        }
        let cfg = NetworkConfig::new(1, k)?;
        let mut perm: Vec<u32> = (0..k).collect();
        let mut all_one_slot = true;
        loop {
            let (_, stats) = route_offline(&perm, &cfg)?;
            all_one_slot &= stats.slots == 1;
            if !next_permutation(&mut perm) {
                break;
            }
        }
        report.push(format!("pops(1,{k}) exhaustive"), all_one_slot, "1 slot each".to_string());
    }

    // Random permutations on mixed shapes, d > g and d < g included.
    for (d, g, runs) in [(4u32, 4u32, 1000u32), (8, 2, 1000), (2, 8, 1000)] {
        let cfg = NetworkConfig::new(d, g)?;
        if cfg.n() > budget {
            continue;
        }
        let want = 2 * d.div_ceil(g);
        let mut bad = 0;
        for seed in 0..runs {
            let perm = generate_permutation(PermSource::Uniform, cfg.n(), seed as u64, &cfg)?;
            let (_, stats) = route_offline(&perm, &cfg)?;
            if stats.slots != want {
                bad += 1;
            }
        }
        report.push(
            format!("pops({d},{g}) random"),
            bad == 0,
            format!("{runs} runs at {want} slots, {bad} off"),
        );
    }
    Ok(report)
}

/// Sorting: zero-one exhaustive at g=2 on the network, then random vectors
/// against a reference sort at g in {4, 8}, with exact slot counts.
fn verify_sorting(budget: u32) -> Result<VerifyReport> {
    let mut report = VerifyReport { suite: "sorting".into(), checks: Vec::new() };

    let cfg2 = NetworkConfig::new(2, 2)?;
    let mut ok = 0;
    for mask in 0u32..16 {
        let mut recs: Vec<KeyedRecord> = (0..4)
            .map(|i| KeyedRecord { key: ((mask >> i) & 1) as u64, payload: i as u64 })
            .collect();
        let slots = sort_on_pops(&mut recs, &cfg2)?;
        if slots == 6 && recs.windows(2).all(|w| w[0].key <= w[1].key) {
            ok += 1;
        }
    }
    report.push("g=2 zero-one exhaustive", ok == 16, format!("{ok}/16 inputs sorted"));

    for (g, want_slots) in [(4u32, 20u32), (8, 42)] {
        let cfg = NetworkConfig::new(g, g)?;
        if cfg.n() > budget {
            continue;
        }
        let runs = 10_000u64;
        let mut bad = 0;
        for seed in 0..runs {
            let keys = generate_keys(cfg.n(), derive_stream_seed(seed, Stream::SortKeys));
            let mut recs: Vec<KeyedRecord> = keys
                .iter()
                .enumerate()
                .map(|(i, &k)| KeyedRecord { key: k, payload: i as u64 })
                .collect();
            let slots = sort_on_pops(&mut recs, &cfg)?;
            let mut want: Vec<u64> = keys.clone();
            want.sort_unstable();
            let got: Vec<u64> = recs.iter().map(|r| r.key).collect();
            if slots != want_slots || got != want {
                bad += 1;
            }
        }
        report.push(
            format!("g={g} random vectors"),
            bad == 0,
            format!("{runs} vectors at {want_slots} slots, {bad} mismatches"),
        );
    }
    Ok(report)
}

/// Buffer occupancy stays at 3, and at 2 with immediate-exit modelling.
fn verify_buffers(budget: u32) -> Result<VerifyReport> {
    let mut report = VerifyReport { suite: "buffers".into(), checks: Vec::new() };
    for (d, g, protocol) in [
        (8u32, 8u32, StepProtocol::Paper5),
        (16, 4, StepProtocol::Reversal6),
        (8, 8, StepProtocol::Reversal6),
    ] {
        let cfg = NetworkConfig::new(d, g)?;
        if cfg.n() > budget {
            continue;
        }
        for immediate_exit in [false, true] {
            let cap = if immediate_exit { 2 } else { 3 };
            let mut worst = 0;
            let mut failed = 0;
            for seed in 0..50u64 {
                let perm =
                    generate_permutation(PermSource::Uniform, cfg.n(), seed.wrapping_add(17), &cfg)?;
                let mut router = RandomizedRouter::new(
                    perm,
                    cfg,
                    protocol,
                    ParticipationSchedule::fixed(),
                    seed,
                )?
                .with_immediate_exit(immediate_exit)
                .with_loss_policy(LossPolicy::RepairAndContinue);
                match router.run() {
                    Ok(stats) => {
                        worst = stats
                            .per_step
                            .iter()
                            .map(|m| m.max_buffer_occupancy)
                            .max()
                            .unwrap_or(0)
                            .max(worst);
                    }
                    Err(_) => failed += 1,
                }
            }
            report.push(
                format!(
                    "pops({d},{g}) {} exit={immediate_exit}",
                    protocol.name()
                ),
                failed == 0 && worst <= cap,
                format!("max occupancy {worst} (cap {cap}), {failed} failed runs"),
            );
        }
    }
    Ok(report)
}

/// Exactly-once delivery under the stress permutation: the reversal
/// protocol never loses or duplicates; the literal protocol must trip its
/// loss detector at least once over the seed block.
fn verify_exactly_once(budget: u32) -> Result<VerifyReport> {
    let mut report = VerifyReport { suite: "exactly-once".into(), checks: Vec::new() };
    for g in [4u32, 16] {
        let d = 4 * g;
        let cfg = NetworkConfig::new(d, g)?;
        if cfg.n() > budget {
            continue;
        }
        let perm = generate_permutation(PermSource::Stress, cfg.n(), 0, &cfg)?;

        let mut reversal_ok = true;
        for seed in 0..100u64 {
            let stats = route_randomized(
                &perm,
                &cfg,
                StepProtocol::Reversal6,
                ParticipationSchedule::fixed(),
                seed,
            )?;
            reversal_ok &= stats.losses() == 0;
        }
        report.push(
            format!("reversal6 stress d=4g g={g}"),
            reversal_ok,
            "100 seeds, zero losses or duplicates",
        );

        let mut paper5_losses = 0u64;
        for seed in 0..100u64 {
            let mut router = RandomizedRouter::new(
                perm.clone(),
                cfg,
                StepProtocol::Paper5,
                ParticipationSchedule::fixed(),
                seed,
            )?
            .with_loss_policy(LossPolicy::RepairAndContinue);
            paper5_losses += router.run()?.losses();
        }
        report.push(
            format!("paper5 stress d=4g g={g} detects loss"),
            paper5_losses > 0,
            format!("{paper5_losses} losses flagged over 100 seeds"),
        );
    }
    Ok(report)
}

/// In-place lexicographic successor; false when `perm` was the last one.
fn next_permutation(perm: &mut [u32]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let Some(i) = (0..perm.len() - 1).rev().find(|&i| perm[i] < perm[i + 1]) else {
        return false;
    };
    let j = (i + 1..perm.len()).rev().find(|&j| perm[j] > perm[i]).unwrap();
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: u32, g: u32) -> NetworkConfig {
        NetworkConfig::new(d, g).unwrap()
    }

    #[test]
    fn fixed_sources_generate_what_they_say() {
        let c = cfg(2, 2);
        assert_eq!(generate_permutation(PermSource::Identity, 4, 0, &c).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(generate_permutation(PermSource::Reversal, 4, 0, &c).unwrap(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn uniform_permutations_are_valid_and_seed_dependent() {
        let c = cfg(4, 4);
        let a = generate_permutation(PermSource::Uniform, 16, 1, &c).unwrap();
        let b = generate_permutation(PermSource::Uniform, 16, 2, &c).unwrap();
        assert_eq!(generate_permutation(PermSource::Uniform, 16, 1, &c).unwrap(), a);
        assert_ne!(a, b);
    }

    #[test]
    fn uniform_position_zero_is_unbiased() {
        // 10^5 seeds on n=16: position 0 takes each value about 6250 times;
        // 5 sigma ~ 383 with sigma = sqrt(1e5 * (1/16)(15/16)).
        let c = cfg(4, 4);
        let mut counts = [0u64; 16];
        let trials = 100_000u64;
        for seed in 0..trials {
            let p = generate_permutation(PermSource::Uniform, 16, seed, &c).unwrap();
            counts[p[0] as usize] += 1;
        }
        let expect = trials as f64 / 16.0;
        let sigma = (trials as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for (v, &cnt) in counts.iter().enumerate() {
            assert!(
                (cnt as f64 - expect).abs() < 5.0 * sigma,
                "value {v} at position 0 occurred {cnt} times"
            );
        }
    }

    #[test]
    fn stress_pairs_destinations_that_share_groups() {
        let c = cfg(16, 4); // d = 4g
        let perm = generate_permutation(PermSource::Stress, c.n(), 0, &c).unwrap();
        validate_permutation(&perm, c.n()).unwrap();
        // Every adjacent pair within a block shares final group, and pairs
        // within a residue class also share the temporary group.
        for i in 0..c.n() - 1 {
            if i % c.d() == c.d() - 1 {
                continue;
            }
            let (a, b) = (perm[i as usize], perm[i as usize + 1]);
            assert_eq!(c.group_of(a).unwrap(), c.group_of(b).unwrap());
        }
        let same_temp_and_group = (0..c.n() - 1)
            .filter(|&i| i % c.d() != c.d() - 1)
            .filter(|&i| {
                let (a, b) = (perm[i as usize], perm[i as usize + 1]);
                c.delta(a).unwrap() == c.delta(b).unwrap()
            })
            .count();
        // d/g = 4 destinations per (group, residue) class -> 3 adjacent
        // same-class pairs per class.
        assert_eq!(same_temp_and_group, (3 * c.g() * c.g()) as usize);
        assert!(generate_permutation(PermSource::Stress, 16, 0, &cfg(4, 4)).is_err());
        assert!(generate_permutation(PermSource::Stress, 16, 0, &cfg(2, 8)).is_err());
    }

    #[test]
    fn csv_layout_is_pinned() {
        let rows = vec![ReportRow {
            n: 16,
            d: 4,
            g: 4,
            protocol: "paper5".into(),
            seed_index: 0,
            iterations: 3,
            slots: 15,
            conflicts_s1: 2,
            conflicts_s2: 1,
            conflicts_ack: 0,
            conflicts_delivery: 0,
            wall_ms: 0.5,
        }];
        let mut buf = Vec::new();
        emit_report(&rows, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "n,d,g,protocol,seed_index,iterations,slots,conflicts_s1,conflicts_s2,conflicts_ack,conflicts_delivery,wall_ms\n\
             16,4,4,paper5,0,3,15,2,1,0,0,0.5\n"
        );
        // Header-only output for an empty row set.
        let mut buf = Vec::new();
        emit_report(&[], OutputFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn json_and_csv_agree_field_by_field() {
        let spec = ExperimentSpec::new(cfg(4, 4), StepProtocol::Paper5).runs(3).seed(9);
        let report = run_experiment(&spec).unwrap();
        let mut json = Vec::new();
        emit_report(&report.rows, OutputFormat::Json, &mut json).unwrap();
        let parsed: Vec<serde_json::Value> = serde_json::from_slice(&json).unwrap();
        let mut csv = Vec::new();
        emit_report(&report.rows, OutputFormat::Csv, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
        for (row, line) in parsed.iter().zip(csv.lines().skip(1)) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), header.len());
            for (name, field) in header.iter().zip(&fields) {
                let v = &row[*name];
                let text = if v.is_string() {
                    v.as_str().unwrap().to_string()
                } else {
                    v.to_string()
                };
                assert_eq!(&text, field, "field {name}");
            }
        }
        assert!(json.ends_with(b"\n"));
    }

    #[test]
    fn experiment_blocks_are_reproducible() {
        let spec = ExperimentSpec::new(cfg(4, 4), StepProtocol::Reversal6).runs(4).seed(123);
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        let strip = |rows: &[ReportRow]| {
            rows.iter().map(|r| ReportRow { wall_ms: 0.0, ..r.clone() }).collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.rows), strip(&b.rows));
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn unknown_suite_is_a_domain_error() {
        assert!(verify_suite("nope", None).is_err());
    }

    #[test]
    fn zero_runs_is_a_domain_error() {
        let spec = ExperimentSpec::new(cfg(2, 2), StepProtocol::Paper5).runs(0);
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn file_source_round_trips() {
        let dir = std::env::temp_dir().join("pops-net-test-perm");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("perm.txt");
        std::fs::write(&path, "3 0 1 2\n").unwrap();
        let c = cfg(2, 2);
        let perm = generate_permutation(PermSource::File(path.clone()), 4, 0, &c).unwrap();
        assert_eq!(perm, vec![3, 0, 1, 2]);
        std::fs::write(&path, "0 0 1 2\n").unwrap();
        assert!(generate_permutation(PermSource::File(path), 4, 0, &c).is_err());
    }
}
