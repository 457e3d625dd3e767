use std::fs;

use super::prepare::load_splits;
use super::TrainArgs;
use crate::checkpoint::{read_json, unix_now, Checkpoint, RunManifest};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{history_csv, AnyModel};

pub(super) fn run(args: &TrainArgs) -> Result<()> {
    let started = unix_now();
    let cfg: TrainConfig = read_json(&args.config)?;
    cfg.validate()?;
    let (train, _) = load_splits(&args.data)?;
    let mut model = AnyModel::init(&train, &cfg)?;
    let history = model.train(&train, &cfg)?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ck = Checkpoint::new(cfg.clone(), train.partition.clone(), model);
    let ck_path = out.join("checkpoint.json");
    ck.save(&ck_path)?;
    let hist_path = out.join("history.csv");
    fs::write(&hist_path, history_csv(&history)).map_err(|e| Error::io(&hist_path, e))?;
    RunManifest::build(
        "train",
        &ck.config_hash,
        cfg.seed,
        started,
        out,
        &[ck_path, hist_path],
    )?
    .write(out)?;
    let (first, last) = (
        history.first().map_or(f64::NAN, |l| l.total),
        history.last().map_or(f64::NAN, |l| l.total),
    );
    super::say(format_args!(
        "trained {} for {} epochs: loss {first:.4} -> {last:.4} [config {}]",
        cfg.variant, cfg.epochs, ck.config_hash
    ));
    Ok(())
}
