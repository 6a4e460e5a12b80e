use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vertseg::data::Plane;
use vertseg::eval::Averaging;
use vertseg::network::{Architecture, Scale};

#[derive(Parser, Debug)]
#[command(name = "vertseg", version, about = "Vertebrae segmentation in CT slices with two stacked encoder-decoder networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Training configuration in TOML; replaces the scale preset.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for phantoms, splits, initialization and training streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Slice plane, or `all` for every plane.
    #[arg(long, global = true, default_value = "sagittal")]
    pub plane: PlaneArg,
    /// Network size and training preset.
    #[arg(long, global = true, default_value = "desk")]
    pub scale: ScaleArg,
    /// Directory holding the slice cache, models and reports.
    #[arg(long, global = true, default_value = "vertseg-work", value_name = "DIR")]
    pub work: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic spine phantoms as NIfTI image/mask pairs.
    Synth {
        /// Number of volumes.
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Resample, split by volume, slice and cache a dataset.
    Preprocess {
        /// Dataset root with `images/` and `masks/`.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Train/valid/test fractions; defaults to the 113/103/103 reference split.
        #[arg(long, num_args = 3, value_names = ["TRAIN", "VALID", "TEST"])]
        fractions: Option<Vec<f64>>,
    },
    /// Train one architecture on cached slices.
    Train {
        #[arg(long, default_value = "plusplus")]
        model: ModelArg,
        /// Overrides the configured number of epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from the checkpoint in the model directory.
        #[arg(long)]
        resume: bool,
    },
    /// Score a trained model on the valid and test slices.
    Evaluate {
        #[arg(long, default_value = "plusplus")]
        model: ModelArg,
        #[arg(long, default_value = "micro")]
        average: AverageArg,
        /// Binarization threshold; defaults to the training config's.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Segment one volume and write the mask on its grid.
    Predict {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, default_value = "plusplus")]
        model: ModelArg,
        /// Weights archive; defaults to the trained model in the work directory.
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train both architectures with and without augmentation and compare.
    Ablate {
        /// Seeds to repeat the comparison over; defaults to `--seed`.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "micro")]
        average: AverageArg,
    },
    /// Collect evaluation results into CSV and Markdown tables.
    Report {
        /// Also export a mask grid of this many test slices per plane.
        #[arg(long, value_name = "N")]
        qualitative: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlaneArg {
    Sagittal,
    Coronal,
    Axial,
    All,
}

impl PlaneArg {
    pub fn planes(self) -> Vec<Plane> {
        match self {
            PlaneArg::Sagittal => vec![Plane::Sagittal],
            PlaneArg::Coronal => vec![Plane::Coronal],
            PlaneArg::Axial => vec![Plane::Axial],
            PlaneArg::All => Plane::ALL.to_vec(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlaneArg::Sagittal => "sagittal",
            PlaneArg::Coronal => "coronal",
            PlaneArg::Axial => "axial",
            PlaneArg::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Full,
    Desk,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Full => Scale::Full,
            ScaleArg::Desk => Scale::Desk,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Baseline,
    Plusplus,
}

impl From<ModelArg> for Architecture {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Baseline => Architecture::Baseline,
            ModelArg::Plusplus => Architecture::PlusPlus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AverageArg {
    Micro,
    Macro,
}

impl From<AverageArg> for Averaging {
    fn from(a: AverageArg) -> Self {
        match a {
            AverageArg::Micro => Averaging::Micro,
            AverageArg::Macro => Averaging::Macro,
        }
    }
}
