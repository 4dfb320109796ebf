use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    CosineWarmup,
    /// Constant until 50% of training, linear decay to
    /// `swag_floor_fraction · base_lr` at 90%, flat afterwards.
    SwagLr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    #[serde(default)]
    pub kind: ScheduleKind,
    pub base_lr: f64,
    #[serde(default)]
    pub warmup_steps: usize,
    pub total_steps: usize,
    #[serde(default = "default_floor")]
    pub swag_floor_fraction: f64,
}

fn default_floor() -> f64 {
    0.1
}

impl LrSchedule {
    pub fn constant(base_lr: f64, total_steps: usize) -> Self {
        LrSchedule {
            kind: ScheduleKind::Constant,
            base_lr,
            warmup_steps: 0,
            total_steps,
            swag_floor_fraction: default_floor(),
        }
    }

    pub fn at(&self, t: usize) -> Result<f64> {
        lr_at(self, t)
    }
}

/// Learning rate at step `t`. Steps `0..total_steps` are training steps;
/// `t == total_steps` evaluates the schedule's end point.
pub fn lr_at(s: &LrSchedule, t: usize) -> Result<f64> {
    if t > s.total_steps || s.total_steps == 0 {
        return Err(Error::ScheduleRange {
            t,
            total: s.total_steps,
        });
    }
    let base = s.base_lr;
    Ok(match s.kind {
        ScheduleKind::Constant => base,
        ScheduleKind::CosineWarmup => {
            let warm = s.warmup_steps.min(s.total_steps.saturating_sub(1));
            if t < warm {
                base * (t + 1) as f64 / warm as f64
            } else {
                let progress = (t - warm) as f64 / (s.total_steps - warm) as f64;
                0.5 * base * (1.0 + (PI * progress).cos())
            }
        }
        ScheduleKind::SwagLr => {
            let frac = t as f64 / s.total_steps as f64;
            let floor = s.swag_floor_fraction;
            if frac < 0.5 {
                base
            } else if frac < 0.9 {
                base * (1.0 - (1.0 - floor) * (frac - 0.5) / 0.4)
            } else {
                base * floor
            }
        }
    })
}
