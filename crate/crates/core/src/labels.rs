//! Annotation vocabulary shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdClass {
    Balanced,
    Tremor,
    Bradykinesia,
    Dyskinesia,
}

impl PdClass {
    pub const ALL: [PdClass; 4] = [
        PdClass::Tremor,
        PdClass::Bradykinesia,
        PdClass::Dyskinesia,
        PdClass::Balanced,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PdClass::Balanced => "balanced",
            PdClass::Tremor => "tremor",
            PdClass::Bradykinesia => "bradykinesia",
            PdClass::Dyskinesia => "dyskinesia",
        }
    }

    /// The GP responsible for this class, if any.
    pub fn model_kind(self) -> Option<ModelKind> {
        match self {
            PdClass::Balanced => None,
            PdClass::Tremor => Some(ModelKind::Tremor),
            PdClass::Bradykinesia => Some(ModelKind::Bradykinesia),
            PdClass::Dyskinesia => Some(ModelKind::Dyskinesia),
        }
    }
}

impl fmt::Display for PdClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PdClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "balanced" => Ok(PdClass::Balanced),
            "tremor" => Ok(PdClass::Tremor),
            "bradykinesia" => Ok(PdClass::Bradykinesia),
            "dyskinesia" => Ok(PdClass::Dyskinesia),
            other => Err(Error::InvalidLabel(format!("unknown pd_class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Other,
    Sitting,
    Walking,
    Standing,
    Lying,
}

impl Activity {
    /// Report column order.
    pub const ALL: [Activity; 5] = [
        Activity::Other,
        Activity::Sitting,
        Activity::Walking,
        Activity::Standing,
        Activity::Lying,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Other => "other",
            Activity::Sitting => "sitting",
            Activity::Walking => "walking",
            Activity::Standing => "standing",
            Activity::Lying => "lying",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "other" => Ok(Activity::Other),
            "sitting" => Ok(Activity::Sitting),
            "walking" => Ok(Activity::Walking),
            "standing" => Ok(Activity::Standing),
            "lying" => Ok(Activity::Lying),
            other => Err(Error::InvalidLabel(format!("unknown activity {other:?}"))),
        }
    }
}

/// One of the three severity regressors of the layered model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tremor,
    Bradykinesia,
    Dyskinesia,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Tremor, ModelKind::Bradykinesia, ModelKind::Dyskinesia];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tremor => "tremor",
            ModelKind::Bradykinesia => "bradykinesia",
            ModelKind::Dyskinesia => "dyskinesia",
        }
    }

    pub fn class(self) -> PdClass {
        match self {
            ModelKind::Tremor => PdClass::Tremor,
            ModelKind::Bradykinesia => PdClass::Bradykinesia,
            ModelKind::Dyskinesia => PdClass::Dyskinesia,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tremor" | "tm" => Ok(ModelKind::Tremor),
            "bradykinesia" | "bk" => Ok(ModelKind::Bradykinesia),
            "dyskinesia" | "dk" => Ok(ModelKind::Dyskinesia),
            other => Err(Error::InvalidLabel(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Expert rating for one minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub window_index: u32,
    pub pd_class: PdClass,
    pub severity: u8,
    pub activity: Activity,
}

impl Annotation {
    /// Enforces balanced <=> severity 0 and severity <= 4.
    pub fn new(window_index: u32, pd_class: PdClass, severity: u8, activity: Activity) -> Result<Self, Error> {
        check_label(pd_class, severity)?;
        Ok(Annotation {
            window_index,
            pd_class,
            severity,
            activity,
        })
    }

    /// Severity on the rating scale of `kind`: the label severity when the
    /// class matches, else 0.
    pub fn severity_for(&self, kind: ModelKind) -> u8 {
        if self.pd_class == kind.class() {
            self.severity
        } else {
            0
        }
    }
}

pub(crate) fn check_label(pd_class: PdClass, severity: u8) -> Result<(), Error> {
    match (pd_class, severity) {
        (PdClass::Balanced, 0) => Ok(()),
        (PdClass::Balanced, s) => Err(Error::InvalidLabel(format!("balanced with severity {s}"))),
        (_, 1..=4) => Ok(()),
        (c, s) => Err(Error::InvalidLabel(format!("{c} with severity {s}"))),
    }
}
