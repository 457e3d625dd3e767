use std::path::PathBuf;

use super::prepare::{load_splits, DataInfo, ScmTruth, TRUTH_FILE};
use super::{Reference, ReportArgs};
use crate::checkpoint::{read_json, unix_now, write_json, Checkpoint, RunManifest};
use crate::counterfactual::{counterfactual_predict, export_counterfactuals, Abduction};
use crate::error::{Error, Result};
use crate::metrics::{ce_table_real, chi_square_distance, EffectReport};
use crate::numerics::Rng;

pub(super) fn run(args: &ReportArgs) -> Result<()> {
    let started = unix_now();
    if args.emit_counterfactuals && args.checkpoint.is_none() {
        return Err(Error::invalid("--emit-counterfactuals needs --checkpoint"));
    }
    let info = DataInfo::load(&args.data)?;
    let (train, test) = load_splits(&args.data)?;
    let all = train.concat(&test)?;
    let conds = info.conditioners();
    let truth_path = args.data.join(TRUTH_FILE);
    let reference = args.reference.unwrap_or(if truth_path.exists() {
        Reference::Truth
    } else {
        Reference::Real
    });
    let out = &args.out;
    let mut files: Vec<PathBuf> = Vec::new();

    let (mut report, seed) = match &args.checkpoint {
        None => {
            let reference = match reference {
                Reference::Real => None,
                Reference::Truth => Some(read_json::<ScmTruth>(&truth_path)?.ce),
            };
            let mut r = EffectReport::real(&all, &train, &test, conds, reference.as_ref())?;
            r.config_hash = Some(info.config_hash.clone());
            (r, info.seed)
        }
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            ck.check_dataset(&test)?;
            let table = match reference {
                Reference::Real => ce_table_real(&all, conds)?,
                Reference::Truth => read_json::<ScmTruth>(&truth_path)?.ce_test,
            };
            let mut rng = Rng::new(ck.config.seed).fork(3);
            let r = EffectReport::model(
                &ck.model,
                &train,
                &test,
                conds,
                &table,
                Some(ck.config_hash.clone()),
                &mut rng,
            )?;
            if args.emit_counterfactuals {
                let cf = counterfactual_predict(
                    &ck.model,
                    &test.full_batch(),
                    Abduction::Mean,
                    &mut rng,
                )?;
                files.extend(export_counterfactuals(&cf, &test, out, "counterfactuals")?);
            }
            (r, ck.config.seed)
        }
    };
    if let Some(dir) = &args.generated {
        let (_, generated) = load_splits(dir)?;
        report.chi2 = Some(chi_square_distance(&generated, &test)?);
    }
    let hash = report.config_hash.clone().unwrap_or_default();
    let p = out.join("report.json");
    write_json(&p, &report)?;
    files.push(p);
    RunManifest::build("report", &hash, seed, started, out, &files)?.write(out)?;
    super::say(format_args!("{}", serde_json::to_string_pretty(&report)?));
    Ok(())
}
