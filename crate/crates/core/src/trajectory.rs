use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::catalog::ObjectClass;
use crate::scene::{Pose, ROTATION_TOLERANCE};
use crate::Error;

/// Simulation sampling rate, which is also the integrator rate.
pub const SAMPLE_RATE_HZ: u32 = 300;

/// Samples in one 5 s run.
pub const SAMPLES_PER_RUN: usize = 1500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleRepr", into = "SampleRepr")]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Serialize, Deserialize)]
struct SampleRepr {
    t: f64,
    t3: [f64; 3],
    r9: [f64; 9],
}

impl TryFrom<SampleRepr> for TrajectorySample {
    type Error = Error;

    fn try_from(repr: SampleRepr) -> Result<Self, Error> {
        let pose = Pose::new(Vector3::from(repr.t3), Matrix3::from_row_slice(&repr.r9));
        if !repr.t.is_finite() || !pose.is_finite() {
            return Err(Error::InvalidValue("non-finite trajectory sample".into()));
        }
        if !pose.is_proper_rotation(ROTATION_TOLERANCE) {
            return Err(Error::InvalidValue(
                "trajectory rotation is not orthonormal".into(),
            ));
        }
        Ok(TrajectorySample { t: repr.t, pose })
    }
}

impl From<TrajectorySample> for SampleRepr {
    fn from(s: TrajectorySample) -> Self {
        SampleRepr {
            t: s.t,
            t3: [
                s.pose.translation.x,
                s.pose.translation.y,
                s.pose.translation.z,
            ],
            r9: s.pose.rotation_row_major(),
        }
    }
}

/// Pose time series of one object. A removed object has no samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub class: ObjectClass,
    pub removed: bool,
    pub rate_hz: u32,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn removed(class: ObjectClass) -> Self {
        Trajectory {
            class,
            removed: true,
            rate_hz: SAMPLE_RATE_HZ,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Exact subsample keeping every `stride`-th sample, starting with the
    /// first.
    pub fn downsample(&self, stride: usize) -> Trajectory {
        assert!(stride > 0 && self.rate_hz as usize % stride == 0);
        Trajectory {
            class: self.class,
            removed: self.removed,
            rate_hz: self.rate_hz / stride as u32,
            samples: self.samples.iter().step_by(stride).cloned().collect(),
        }
    }

    /// Largest distance of the center from its first sample, in meters.
    pub fn max_displacement(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        self.samples
            .iter()
            .map(|s| (s.pose.translation - first.pose.translation).norm())
            .fold(0.0, f64::max)
    }

    /// Largest rotation angle relative to the first sample, in radians.
    pub fn max_rotation(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        self.samples
            .iter()
            .map(|s| s.pose.angle_to(&first.pose))
            .fold(0.0, f64::max)
    }

    pub fn final_pose(&self) -> Option<&Pose> {
        self.samples.last().map(|s| &s.pose)
    }

    /// Checks the sample-count and spacing invariants of a full-rate run.
    pub fn check_protocol(&self) -> Result<(), Error> {
        if self.removed {
            return if self.samples.is_empty() {
                Ok(())
            } else {
                Err(Error::InvalidValue(format!(
                    "removed {} has {} samples",
                    self.class,
                    self.samples.len()
                )))
            };
        }
        if self.samples.len() != SAMPLES_PER_RUN {
            return Err(Error::InvalidValue(format!(
                "{} has {} samples, expected {SAMPLES_PER_RUN}",
                self.class,
                self.samples.len()
            )));
        }
        let dt = 1.0 / self.rate_hz as f64;
        for w in self.samples.windows(2) {
            if ((w[1].t - w[0].t) - dt).abs() > 1e-9 {
                return Err(Error::InvalidValue(format!(
                    "{} samples are not spaced at {dt} s",
                    self.class
                )));
            }
        }
        Ok(())
    }
}
