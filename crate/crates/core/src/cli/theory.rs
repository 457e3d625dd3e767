use std::fs;
use std::path::{Path, PathBuf};

use super::prepare::load_splits;
use super::TheoryArgs;
use crate::checkpoint::{read_json, unix_now, write_json, Checkpoint, RunManifest};
use crate::config::short_hash;
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::theory::{CovarianceReport, LinearModelSpec};

/// Agreement threshold between the closed form and the oracle.
const AGREEMENT_TOLERANCE: f64 = 1e-6;

fn parse_random(arg: &str, seed: u64) -> Result<LinearModelSpec> {
    let bad = || Error::invalid(format!("expected `random:<n>,<m>,<beta>`, got `{arg}`"));
    let body = arg.strip_prefix("random:").ok_or_else(bad)?;
    let parts: Vec<&str> = body.split(',').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let n: usize = parts[0].trim().parse().map_err(|_| bad())?;
    let m: usize = parts[1].trim().parse().map_err(|_| bad())?;
    let beta: f64 = parts[2].trim().parse().map_err(|_| bad())?;
    LinearModelSpec::random(n, m, beta, &mut Rng::new(seed))
}

fn heatmap_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&r.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(super) fn run(args: &TheoryArgs) -> Result<()> {
    let started = unix_now();
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    let report = if let Some(spec_arg) = &args.spec {
        let spec = if spec_arg.starts_with("random:") {
            let spec = parse_random(spec_arg, args.seed)?;
            let p = out.join("spec.json");
            write_json(&p, &spec)?;
            files.push(p);
            spec
        } else {
            read_json(Path::new(spec_arg))?
        };
        let mut r = CovarianceReport::from_spec(&spec, AGREEMENT_TOLERANCE)?;
        r.config_hash = Some(short_hash(serde_json::to_string(&spec)?.as_bytes()));
        for (name, m) in [
            ("sigma_star", &r.sigma_star),
            ("sigma_numeric", &r.sigma_numeric),
        ] {
            if let Some(rows) = m {
                let p = out.join(format!("{name}.csv"));
                heatmap_csv(&p, rows)?;
                files.push(p);
            }
        }
        r
    } else {
        let ck = Checkpoint::load(args.checkpoint.as_deref().expect("clap requires a mode"))?;
        let data = args
            .data
            .as_deref()
            .expect("clap requires --data with --checkpoint");
        let (train, test) = load_splits(data)?;
        let all = train.concat(&test)?;
        ck.check_dataset(&all)?;
        let mut r =
            CovarianceReport::from_model(&ck.model, &all, &mut Rng::new(args.seed).fork(4))?;
        r.config_hash = Some(ck.config_hash.clone());
        for g in &r.empirical {
            let p = out.join(format!("sigma_empirical_{}.csv", g.group.replace('=', "")));
            heatmap_csv(&p, &g.sigma)?;
            files.push(p);
        }
        r
    };
    let p = out.join("covariance.json");
    write_json(&p, &report)?;
    files.push(p);
    let hash = report.config_hash.clone().unwrap_or_default();
    RunManifest::build("theory", &hash, args.seed, started, out, &files)?.write(out)?;
    match (report.agreement, report.frobenius_gap) {
        (Some(ok), Some(gap)) => super::say(format_args!(
            "block score {:.3e}; closed form vs oracle gap {gap:.3e} ({})",
            report.block_score,
            if ok { "agree" } else { "DISAGREE" }
        )),
        _ => super::say(format_args!(
            "block score {:.3e} ({})",
            report.block_score, report.provenance
        )),
    }
    Ok(())
}
