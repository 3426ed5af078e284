//! Checkpointed scans: records are appended block by block to
//! `records.jsonl`, and `checkpoint.json` names the last completed `|d|`.
//! A resumed scan drops any records past the checkpoint and recomputes the
//! interrupted block.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use twosel::twist_lab::{base_rank, scan_block, ScanError, ScanSummary, TwistRecord};

use crate::{parse_curve, CmdResult, Failure, ScanArgs};

const RECORDS: &str = "records.jsonl";
const SUMMARY: &str = "summary.json";
const CHECKPOINT: &str = "checkpoint.json";

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    schema: u32,
    curve: String,
    last_abs_d: u64,
    errors: Vec<ScanError>,
}

fn abs_d(d: &num_bigint::BigInt) -> u64 {
    u64::try_from(d.magnitude()).unwrap_or(u64::MAX)
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

/// Records already on disk with `|d| ≤ last`, as raw lines and parsed.
fn load_records(path: &Path, last: u64) -> Result<(Vec<String>, Vec<TwistRecord>), Failure> {
    let mut lines = Vec::new();
    let mut records = Vec::new();
    if !path.exists() {
        return Ok((lines, records));
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let Ok(rec) = serde_json::from_str::<TwistRecord>(&line) else {
            // a torn final line from an interrupted write
            break;
        };
        if abs_d(&rec.d) > last {
            break;
        }
        lines.push(line);
        records.push(rec);
    }
    Ok((lines, records))
}

pub fn cmd_scan(args: ScanArgs) -> CmdResult {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    let model = parse_curve(&args.curve.curve)?;
    fs::create_dir_all(&args.out)?;
    let records_path = args.out.join(RECORDS);
    let checkpoint_path = args.out.join(CHECKPOINT);

    let mut start = 1;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    if args.resume && checkpoint_path.exists() {
        let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(&checkpoint_path)?)?;
        if ck.curve != model.to_string() {
            return Err(Failure::Usage(format!(
                "checkpoint is for curve {}, not {}",
                ck.curve, model
            )));
        }
        let last = ck.last_abs_d.min(args.bound);
        let (lines, kept) = load_records(&records_path, last)?;
        let mut w = BufWriter::new(File::create(&records_path)?);
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
        records = kept;
        errors = ck.errors.into_iter().filter(|e| abs_d(&e.d) <= last).collect();
        start = last + 1;
        eprintln!("resuming after |d| = {last} with {} records", records.len());
    } else {
        File::create(&records_path)?;
    }

    let r_base = base_rank(&model)?;
    let mut out = BufWriter::new(OpenOptions::new().append(true).open(&records_path)?);
    let mut lo = start;
    while lo <= args.bound {
        let hi = (((lo - 1) / args.block + 1) * args.block).min(args.bound);
        for (d, r) in scan_block(&model, r_base, lo, hi, args.timing) {
            match r {
                Ok(rec) => {
                    writeln!(out, "{}", serde_json::to_string(&rec)?)?;
                    records.push(rec);
                }
                Err(e) => errors.push(ScanError { d, message: e.to_string() }),
            }
        }
        out.flush()?;
        out.get_ref().sync_data()?;
        let ck = Checkpoint {
            schema: twosel::selmer::SCHEMA_VERSION,
            curve: model.to_string(),
            last_abs_d: hi,
            errors: errors.clone(),
        };
        write_atomic(&checkpoint_path, &(serde_json::to_string_pretty(&ck)? + "\n"))?;
        lo = hi + 1;
    }

    let summary = ScanSummary::from_records(&model, args.bound, &records, errors);
    write_atomic(&args.out.join(SUMMARY), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    println!("{}", serde_json::to_string(&summary)?);
    if !summary.gaps.is_empty() {
        eprintln!("note: ranks {:?} not attained below the bound", summary.gaps);
    }
    if summary.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} parity failures, {} errors, bound checks {:?}",
            summary.parity_failures.len(),
            summary.errors.len(),
            summary.bound_checks
        )))
    }
}
