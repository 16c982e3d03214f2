use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::adam::{adam_step, OptState};
use super::config::TrainConfig;
use super::eval::evaluate;
use crate::data::{make_training_stream, GrayImage, NamedImage, TrainingStream};
use crate::models::{build_model, Checkpoint, Model, TrainingMeta};
use crate::nn::mse_loss;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based index of the completed step.
    pub step: u64,
    pub loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based index of the completed epoch.
    pub epoch: u64,
    pub sigma: f32,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub wall_seconds: f64,
}

impl TrainLog {
    /// Two CSV sections separated by a blank line: `step,loss` and
    /// `epoch,sigma,psnr,ssim`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for r in &self.steps {
            let _ = writeln!(s, "{},{}", r.step, r.loss);
        }
        s.push_str("\nepoch,sigma,psnr,ssim\n");
        for r in &self.epochs {
            let _ = writeln!(s, "{},{},{},{}", r.epoch, r.sigma, r.psnr_db, r.ssim);
        }
        s
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::from(e).at_path(path))
    }
}

/// Owns one training run: model, optimizer state, data stream and log.
///
/// Step `i` always consumes batch `i` of the stream, so a run resumed from a
/// checkpoint continues exactly where an uninterrupted run would be.
pub struct Trainer {
    config: TrainConfig,
    model: Model,
    opt: OptState,
    stream: TrainingStream,
    step: u64,
    log: TrainLog,
}

impl Trainer {
    /// Fresh run; the model is initialized from `config.seed`.
    pub fn new(config: TrainConfig, corpus: &[GrayImage]) -> Result<Self> {
        config.validate()?;
        let model = build_model(config.model, config.seed)?;
        Trainer::with_model(config, corpus, model)
    }

    /// Fresh optimizer state around an existing model.
    pub fn with_model(config: TrainConfig, corpus: &[GrayImage], model: Model) -> Result<Self> {
        config.validate()?;
        if *model.config() != config.model {
            return Err(Error::Config("model does not match the training config".into()));
        }
        let stream = make_training_stream(corpus, config.stream_config())?;
        let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        Ok(Trainer {
            config,
            model,
            opt: OptState::new(&sizes),
            stream,
            step: 0,
            log: TrainLog::default(),
        })
    }

    /// Continues the run captured in `ckpt`.
    pub fn resume(config: TrainConfig, corpus: &[GrayImage], ckpt: Checkpoint) -> Result<Self> {
        config.validate()?;
        if *ckpt.model.config() != config.model {
            return Err(Error::Config("checkpoint model does not match the training config".into()));
        }
        if ckpt.meta.seed != config.seed {
            return Err(Error::Config(format!(
                "checkpoint was trained with seed {}, config has {}",
                ckpt.meta.seed, config.seed
            )));
        }
        let opt = ckpt
            .optimizer
            .ok_or_else(|| Error::Config("checkpoint carries no optimizer state".into()))?;
        let sizes: Vec<usize> = ckpt.model.params().iter().map(|p| p.len()).collect();
        if opt.sizes() != sizes {
            return Err(Error::Corrupt("optimizer state does not match the model".into()));
        }
        let mut stream = make_training_stream(corpus, config.stream_config())?;
        stream.seek(ckpt.meta.step);
        Ok(Trainer {
            config,
            model: ckpt.model,
            opt,
            stream,
            step: ckpt.meta.step,
            log: TrainLog::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    /// Steps completed so far.
    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.total_steps()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.opt.clone()),
            meta: TrainingMeta {
                epoch: self.step / self.config.steps_per_epoch,
                step: self.step,
                sigma_regime: Some(self.config.sigma_regime),
                seed: self.config.seed,
            },
        }
    }

    /// One forward / MSE / backward / Adam step. Returns the batch loss.
    ///
    /// A non-finite loss or gradient stops the run with
    /// [`Error::Diverged`], carrying the state from before this step.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.stream.batch_at(self.step);
        let stats_backup: Vec<_> = self
            .model
            .layers()
            .iter()
            .map(|l| l.bn.as_ref().map(|bn| (bn.running_mean.clone(), bn.running_var.clone())))
            .collect();

        let (out, cache) = self.model.forward_train(&batch.noisy)?;
        let (loss, grad) = mse_loss(&out, &batch.clean)?;
        let failure = if !loss.is_finite() {
            Some(format!("loss is {loss}"))
        } else {
            let grads = self.model.backward(&cache, &grad)?;
            let lr = self.config.lr_at(self.step);
            let adam = self.config.adam;
            let mut params = self.model.params_mut();
            match adam_step(&mut params, &grads.arrays(), &mut self.opt, lr, &adam) {
                Ok(()) => None,
                Err(Error::NonFiniteGradient { index }) => Some(format!("non-finite gradient in array {index}")),
                Err(e) => return Err(e),
            }
        };
        if let Some(reason) = failure {
            for (layer, saved) in self.model.layers_mut().iter_mut().zip(stats_backup) {
                if let (Some(bn), Some((mean, var))) = (&mut layer.bn, saved) {
                    bn.running_mean = mean;
                    bn.running_var = var;
                }
            }
            return Err(Error::Diverged {
                step: self.step + 1,
                reason,
                last_good: Box::new(self.checkpoint()),
            });
        }

        self.step += 1;
        self.stream.seek(self.step);
        self.log.steps.push(StepRecord { step: self.step, loss });
        Ok(loss)
    }

    /// Runs up to `n` more steps without evaluation or checkpoint callbacks.
    pub fn run_steps(&mut self, n: u64) -> Result<()> {
        let end = (self.step + n).min(self.config.total_steps());
        while self.step < end {
            self.train_step()?;
        }
        Ok(())
    }

    /// Trains to the configured length. At the end of every epoch the model
    /// is evaluated on `eval` (if any) and, at the configured cadence,
    /// `on_checkpoint` receives a snapshot.
    pub fn run(
        &mut self,
        eval: &[NamedImage],
        mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
    ) -> Result<()> {
        let start = Instant::now();
        let spe = self.config.steps_per_epoch;
        while !self.is_finished() {
            self.train_step()?;
            if self.step % spe == 0 {
                let epoch = self.step / spe;
                if !eval.is_empty() {
                    let sigmas = self.config.eval_sigma_list();
                    let report = evaluate(&self.model, eval, &sigmas, self.config.seed, "train-eval")?;
                    for a in report.aggregates() {
                        self.log.epochs.push(super::EpochRecord {
                            epoch,
                            sigma: a.sigma,
                            psnr_db: a.psnr_db,
                            ssim: a.ssim,
                        });
                    }
                }
                let every = self.config.checkpoint_every;
                if every > 0 && epoch % every == 0 && !self.is_finished() {
                    on_checkpoint(&self.checkpoint())?;
                }
            }
        }
        self.log.wall_seconds += start.elapsed().as_secs_f64();
        Ok(())
    }

    pub fn finish(self) -> (Checkpoint, TrainLog) {
        let ckpt = self.checkpoint();
        (ckpt, self.log)
    }
}

/// Trains from scratch and returns the final checkpoint and log.
pub fn train(config: TrainConfig, corpus: &[GrayImage], eval: &[NamedImage]) -> Result<(Checkpoint, TrainLog)> {
    let mut t = Trainer::new(config, corpus)?;
    t.run(eval, |_| Ok(()))?;
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SigmaRegime;
    use crate::models::{ModelConfig, Variant};

    fn corpus() -> Vec<GrayImage> {
        (0..2)
            .map(|i| {
                GrayImage::from_fn(20, 20, |x, y| 0.5 + 0.3 * (((x + i) as f32 * 0.4).sin() * (y as f32 * 0.3).cos()))
                    .unwrap()
            })
            .collect()
    }

    fn config(variant: Variant) -> TrainConfig {
        let mut c = TrainConfig::new(
            ModelConfig::new(variant).with_width(4).with_kernel(3),
            SigmaRegime::Single { sigma: 30.0 },
            2,
            3,
        );
        c.batch = 2;
        c.patch_size = 12;
        c.stride = 4;
        c.seed = 3;
        c
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let mut cfg = config(Variant::Win5Rb);
        cfg.learning_rate = 0.0;
        let mut t = Trainer::new(cfg, &corpus()).unwrap();
        let before: Vec<Vec<f32>> = t.model().params().iter().map(|p| p.to_vec()).collect();
        let loss = t.train_step().unwrap();
        assert!(loss.is_finite());
        let after: Vec<Vec<f32>> = t.model().params().iter().map(|p| p.to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn same_seed_same_checkpoint() {
        let a = train(config(Variant::Win5R), &corpus(), &[]).unwrap().0;
        let b = train(config(Variant::Win5R), &corpus(), &[]).unwrap().0;
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        assert_eq!(a.meta.step, 6);
        assert_eq!(a.meta.epoch, 2);
    }

    #[test]
    fn divergence_returns_last_good_state() {
        let mut cfg = config(Variant::Win5);
        cfg.learning_rate = 1e30;
        let mut t = Trainer::new(cfg, &corpus()).unwrap();
        let err = loop {
            match t.train_step() {
                Ok(_) => continue,
                Err(e) => break e,
            }
        };
        match err {
            Error::Diverged { step, last_good, .. } => {
                assert_eq!(last_good.meta.step, step - 1);
                assert!(last_good.model.params().iter().all(|p| p.iter().all(|v| v.is_finite())));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn epoch_eval_and_checkpoint_cadence() {
        let mut cfg = config(Variant::Win5Rb);
        cfg.epochs = 3;
        cfg.checkpoint_every = 1;
        let eval = vec![NamedImage {
            id: "e".into(),
            image: corpus()[0].clone(),
        }];
        let mut t = Trainer::new(cfg, &corpus()).unwrap();
        let mut seen = Vec::new();
        t.run(&eval, |c| {
            seen.push(c.meta.epoch);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2]);
        let (_, log) = t.finish();
        assert_eq!(log.steps.len(), 9);
        assert!(log.steps.windows(2).all(|w| w[0].step < w[1].step));
        assert_eq!(log.epochs.len(), 3);
        let csv = log.to_csv();
        assert!(csv.starts_with("step,loss\n1,"));
        assert!(csv.contains("\n\nepoch,sigma,psnr,ssim\n1,30,"));
    }

    #[test]
    fn resume_rejects_mismatched_config() {
        let t = Trainer::new(config(Variant::Win5R), &corpus()).unwrap();
        let ckpt = t.checkpoint();
        let mut other = config(Variant::Win5R);
        other.seed = 99;
        assert!(Trainer::resume(other, &corpus(), ckpt.clone()).is_err());
        assert!(Trainer::resume(config(Variant::Win5), &corpus(), ckpt).is_err());
    }
}
