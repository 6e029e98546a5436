use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of the tensor engine (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    const PRECISION: Precision;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    fn erf(self) -> Self;
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::F32;

    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::F64;

    fn erf(self) -> Self {
        libm::erf(self)
    }
}

/// Numeric precision selector used in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn parse(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "32" | "single" => Ok(Precision::F32),
            "f64" | "64" | "double" => Ok(Precision::F64),
            other => Err(crate::error::domain(format!("unknown precision {other:?}"))),
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}
