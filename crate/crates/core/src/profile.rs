//! Resolution profiles tie the camera resolution to the crop and network input size.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::geometry::CameraRig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    /// 640x480 frames, 200 rows cropped, 179200 inputs.
    Full,
    /// 320x240 frames, 100 rows cropped, 44800 inputs.
    Reduced,
}

impl Profile {
    pub fn width(self) -> usize {
        match self {
            Profile::Full => 640,
            Profile::Reduced => 320,
        }
    }

    pub fn height(self) -> usize {
        match self {
            Profile::Full => 480,
            Profile::Reduced => 240,
        }
    }

    pub fn crop_rows(self) -> usize {
        match self {
            Profile::Full => 200,
            Profile::Reduced => 100,
        }
    }

    pub fn cropped_height(self) -> usize {
        self.height() - self.crop_rows()
    }

    pub fn input_dim(self) -> usize {
        self.width() * self.cropped_height()
    }

    fn scale(self) -> f64 {
        match self {
            Profile::Full => 1.0,
            Profile::Reduced => 0.5,
        }
    }

    /// The default rig rescaled to this profile's resolution.
    pub fn rig(self) -> CameraRig {
        self.rescale(&CameraRig::default())
    }

    /// Rescales a full-resolution rig to this profile.
    pub fn rescale(self, full: &CameraRig) -> CameraRig {
        full.scaled(self.scale())
    }

    /// Default network layer sizes for this profile.
    pub fn default_layer_dims(self) -> Vec<usize> {
        match self {
            Profile::Full => vec![self.input_dim(), 1024, 256, 64, 2],
            Profile::Reduced => vec![self.input_dim(), 256, 64, 2],
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Full => "full",
            Profile::Reduced => "reduced",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Profile::Full),
            "reduced" => Ok(Profile::Reduced),
            other => Err(Error::Domain(format!(
                "unknown profile `{other}` (expected full or reduced)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims() {
        assert_eq!(Profile::Full.input_dim(), 179_200);
        assert_eq!(Profile::Reduced.input_dim(), 44_800);
        assert_eq!(Profile::Full.cropped_height(), 280);
        let rig = Profile::Reduced.rig();
        assert_eq!((rig.width, rig.height), (320, 240));
        assert_eq!(rig.fx, 250.0);
        assert!(rig.horizon_row() < Profile::Reduced.crop_rows() as f64);
        assert!(Profile::Full.rig().horizon_row() < Profile::Full.crop_rows() as f64);
    }
}
