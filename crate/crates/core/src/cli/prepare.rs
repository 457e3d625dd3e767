use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PrepareArgs;
use crate::checkpoint::{read_json, unix_now, write_json, RunManifest};
use crate::config::short_hash;
use crate::data::{
    generate_scm, ingest_adult, split_indices, AttributePartition, ScmSpec, TabularDataset,
    ADULT_CONDITIONERS, SCM_CONDITIONERS,
};
use crate::error::{Error, Result};
use crate::metrics::{conditioning_cells, mean, CeTable};
use crate::numerics::Rng;

pub const DATA_INFO_FILE: &str = "dataset.json";
pub const TRUTH_FILE: &str = "truth.json";
/// Share of records held out as the `test` split.
pub const TEST_FRACTION: f64 = 0.2;

/// What a prepared data directory holds and how it was made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    /// `adult` or `scm`.
    pub source: String,
    pub seed: u64,
    pub records: usize,
    pub test_fraction: f64,
    pub conditioners: (String, String),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adult_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scm_spec: Option<ScmSpec>,
    /// Hash of the fields above; reports on real data carry it.
    pub config_hash: String,
}

/// Ground-truth effects of an SCM draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmTruth {
    pub te: f64,
    pub ce: CeTable,
    /// On the test split, which model reports are scored on.
    pub te_test: f64,
    pub ce_test: CeTable,
    pub config_hash: String,
}

impl DataInfo {
    fn finish(mut self) -> Self {
        self.config_hash = String::new();
        self.config_hash = short_hash(serde_json::to_string(&self).expect("serializes").as_bytes());
        self
    }

    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(DATA_INFO_FILE))
    }

    pub fn conditioners(&self) -> (&str, &str) {
        (&self.conditioners.0, &self.conditioners.1)
    }
}

fn load_scm_spec(arg: &str) -> Result<ScmSpec> {
    if arg == "default" {
        return Ok(ScmSpec::default());
    }
    read_json(Path::new(arg))
}

pub(super) fn run(args: &PrepareArgs) -> Result<()> {
    let started = unix_now();
    let out = &args.out;
    let mut rng = Rng::new(args.seed).fork(1);
    let mut files: Vec<PathBuf> = Vec::new();
    let info = if let Some(path) = &args.adult {
        let ds = ingest_adult(path, &AttributePartition::adult_default())?;
        let (train_idx, test_idx) = split_indices(ds.len(), TEST_FRACTION, &mut rng)?;
        let (train, test) = ds.split_at(&train_idx, &test_idx);
        files.extend(train.write_csv(out, "train", &[])?);
        files.extend(test.write_csv(out, "test", &[])?);
        DataInfo {
            source: "adult".into(),
            seed: args.seed,
            records: ds.len(),
            test_fraction: TEST_FRACTION,
            conditioners: (ADULT_CONDITIONERS.0.into(), ADULT_CONDITIONERS.1.into()),
            adult_file: path.file_name().map(|f| f.to_string_lossy().into_owned()),
            scm_spec: None,
            config_hash: String::new(),
        }
        .finish()
    } else {
        let mut spec = load_scm_spec(args.scm.as_deref().expect("clap requires a source"))?;
        spec.seed = args.seed;
        let sample = generate_scm(&spec, args.n)?;
        let (train_idx, test_idx) = split_indices(args.n, TEST_FRACTION, &mut rng)?;
        let (train, test) = sample.dataset.split_at(&train_idx, &test_idx);
        let extras = |idx: &[usize]| {
            let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            vec![
                ("true_effect", pick(&sample.individual_effect)),
                ("p_cf", pick(&sample.p_counterfactual)),
                ("y_cf", pick(&sample.y_counterfactual)),
            ]
        };
        files.extend(train.write_csv(out, "train", &extras(&train_idx))?);
        files.extend(test.write_csv(out, "test", &extras(&test_idx))?);
        let info = DataInfo {
            source: "scm".into(),
            seed: args.seed,
            records: args.n,
            test_fraction: TEST_FRACTION,
            conditioners: (SCM_CONDITIONERS.0.into(), SCM_CONDITIONERS.1.into()),
            adult_file: None,
            scm_spec: Some(spec),
            config_hash: String::new(),
        }
        .finish();
        let test_effect: Vec<f64> = test_idx
            .iter()
            .map(|&i| sample.individual_effect[i])
            .collect();
        let cells = conditioning_cells(&test, SCM_CONDITIONERS)?;
        let truth = ScmTruth {
            te: sample.true_te,
            ce: sample.true_ce.clone(),
            te_test: mean(&test_effect),
            ce_test: CeTable::from_effects(SCM_CONDITIONERS, &test_effect, &cells),
            config_hash: info.config_hash.clone(),
        };
        let p = out.join(TRUTH_FILE);
        write_json(&p, &truth)?;
        files.push(p);
        info
    };
    let p = out.join(DATA_INFO_FILE);
    write_json(&p, &info)?;
    files.push(p);
    let manifest = RunManifest::build(
        "prepare",
        &info.config_hash,
        args.seed,
        started,
        out,
        &files,
    )?;
    manifest.write(out)?;
    super::say(format_args!(
        "prepared {} records ({}) into {} [config {}]",
        info.records,
        info.source,
        out.display(),
        info.config_hash
    ));
    Ok(())
}

/// Reads the `train` and `test` splits of a prepared directory.
pub(super) fn load_splits(dir: &Path) -> Result<(TabularDataset, TabularDataset)> {
    let (train, _) = TabularDataset::read_csv(dir, "train")?;
    let (test, _) = TabularDataset::read_csv(dir, "test")?;
    if train.partition != test.partition {
        return Err(Error::invalid(format!(
            "{}: train and test partitions differ",
            dir.display()
        )));
    }
    Ok((train, test))
}
