//! Membership inference game against SMOTE releases.
//!
//! Each world is the real dataset with or without the target row, oversampled
//! with its own derived seed. A membership signal is computed per world and
//! the attack is scored by AUC over the test worlds.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::learner::{train_learner, LearnerConfig};
use super::metrics::{auc, groundhog_features};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::matrix::{dist, Matrix};
use crate::seed;
use crate::smote::{augment, smote_oversample, SmoteConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSelection {
    /// A specific row id (must be a minority row).
    Id(usize),
    /// The minority row farthest from the minority mean.
    PlantedOutlier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiaMode {
    /// Summary features of the synthetic rows feed a linear meta-classifier.
    SyntheticFeatures,
    /// A classifier trained on real plus synthetic rows scores the target.
    AugmentedClassifier,
    /// A classifier trained on the real rows alone scores the target.
    RealClassifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiaConfig {
    pub target: TargetSelection,
    /// Training worlds per side (only used by the meta-classifier mode).
    pub worlds_train: usize,
    /// Test worlds per side.
    pub worlds_test: usize,
    pub mode: MiaMode,
    pub smote_k: usize,
    pub learner: LearnerConfig,
    /// Null control: permute the membership labels of the test worlds before
    /// scoring (and of the training worlds in meta mode).
    pub shuffle_labels: bool,
    pub seed: u64,
}

impl MiaConfig {
    pub fn new(mode: MiaMode, seed: u64) -> Self {
        Self {
            target: TargetSelection::PlantedOutlier,
            worlds_train: 100,
            worlds_test: 50,
            mode,
            smote_k: 5,
            learner: match mode {
                MiaMode::SyntheticFeatures => LearnerConfig::linear_logistic(seed),
                _ => LearnerConfig::tree_ensemble(seed),
            },
            shuffle_labels: false,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.worlds_test < 10 || (self.mode == MiaMode::SyntheticFeatures && self.worlds_train < 10) {
            return Err(Error::InvalidParameter("at least 10 worlds per side are required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaResult {
    pub target: usize,
    pub auc: f64,
    /// Membership score per test world.
    pub scores: Vec<f64>,
    /// 1 when the test world contains the target.
    pub members: Vec<u8>,
}

/// Resolves the target row id.
pub fn select_target(real: &LabeledDataset, sel: TargetSelection) -> Result<usize> {
    let ids = real.minority_ids();
    match sel {
        TargetSelection::Id(t) => {
            if ids.binary_search(&t).is_err() {
                return Err(Error::InvalidParameter(format!("target {t} is not a minority row")));
            }
            Ok(t)
        }
        TargetSelection::PlantedOutlier => {
            let m = real.features().select_rows(&ids);
            let d = m.ncols();
            let mut mean = vec![0.0; d];
            for r in m.rows_iter() {
                mean.iter_mut().zip(r).for_each(|(a, x)| *a += x / ids.len() as f64);
            }
            let far = (0..ids.len())
                .max_by(|&a, &b| dist(m.row(a), &mean).total_cmp(&dist(m.row(b), &mean)).then(b.cmp(&a)))
                .ok_or(Error::EmptyMinority)?;
            Ok(ids[far])
        }
    }
}

/// One world: `(membership label, seed)`.
type World = (u8, u64);

fn worlds(cfg: &MiaConfig, count: usize, offset: u64) -> Vec<World> {
    (0..2 * count)
        .map(|w| {
            let member = u8::from(w < count);
            (member, seed::derive(cfg.seed, offset + w as u64))
        })
        .collect()
}

struct Game<'a> {
    with: &'a LabeledDataset,
    without: &'a LabeledDataset,
    target_row: &'a [f64],
    cfg: &'a MiaConfig,
}

impl Game<'_> {
    fn world_data(&self, member: u8) -> &LabeledDataset {
        if member == 1 {
            self.with
        } else {
            self.without
        }
    }

    fn synth(&self, (member, s): World) -> Result<LabeledDataset> {
        let smote = SmoteConfig::new(self.cfg.smote_k, seed::derive(s, 0));
        Ok(smote_oversample(self.world_data(member), &smote)?.0)
    }

    fn summary(&self, w: World) -> Result<Vec<f64>> {
        groundhog_features(self.synth(w)?.features())
    }

    fn classifier_signal(&self, w: World) -> Result<f64> {
        let data = match self.cfg.mode {
            MiaMode::AugmentedClassifier => augment(self.world_data(w.0), &self.synth(w)?)?,
            _ => self.world_data(w.0).clone(),
        };
        let learner = LearnerConfig {
            seed: seed::derive(w.1, 1),
            ..self.cfg.learner
        };
        let clf = train_learner(data.features(), data.labels(), &learner)?;
        Ok(clf.score(self.target_row))
    }
}

fn shuffled(labels: &[u8], seed: u64) -> Vec<u8> {
    let mut out = labels.to_vec();
    out.shuffle(&mut seed::rng(seed));
    out
}

pub fn mia_game(real: &LabeledDataset, cfg: &MiaConfig) -> Result<MiaResult> {
    cfg.validate()?;
    real.require_both_classes()?;
    let target = select_target(real, cfg.target)?;
    let keep: Vec<usize> = (0..real.len()).filter(|&i| i != target).collect();
    let without = real.subset(&keep);
    if without.stats().n1 <= cfg.smote_k {
        return Err(Error::TooFewMinority {
            n: without.stats().n1,
            k: cfg.smote_k,
        });
    }
    let game = Game {
        with: real,
        without: &without,
        target_row: real.features().row(target),
        cfg,
    };
    let test = worlds(cfg, cfg.worlds_test, 2 * cfg.worlds_train as u64);
    let truth: Vec<u8> = test.iter().map(|w| w.0).collect();

    let scores: Vec<f64> = match cfg.mode {
        MiaMode::SyntheticFeatures => {
            let train = worlds(cfg, cfg.worlds_train, 0);
            let train_x: Vec<Vec<f64>> = train.par_iter().map(|&w| game.summary(w)).collect::<Result<_>>()?;
            let mut train_y: Vec<u8> = train.iter().map(|w| w.0).collect();
            if cfg.shuffle_labels {
                train_y = shuffled(&train_y, seed::derive(cfg.seed, u64::MAX - 1));
            }
            let x = Matrix::from_rows(&train_x)?;
            let meta = train_learner(&x, &train_y, &cfg.learner)?;
            let test_x: Vec<Vec<f64>> = test.par_iter().map(|&w| game.summary(w)).collect::<Result<_>>()?;
            test_x.iter().map(|f| meta.score(f)).collect()
        }
        MiaMode::AugmentedClassifier | MiaMode::RealClassifier => {
            test.par_iter().map(|&w| game.classifier_signal(w)).collect::<Result<_>>()?
        }
    };
    let members = if cfg.shuffle_labels {
        shuffled(&truth, seed::derive(cfg.seed, u64::MAX))
    } else {
        truth
    };
    Ok(MiaResult {
        target,
        auc: auc(&scores, &members)?,
        scores,
        members,
    })
}
