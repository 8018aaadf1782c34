use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything the numerics can reject.
///
/// [`Error::is_precondition`] separates bad input (configuration, violated
/// preconditions) from failures that only show up while computing.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid has fewer points than the minimum resolution.
    GridTooSmall { n_points: usize, min: usize },
    /// Grid momentum half-range cannot hold the recoil and Bragg kicks.
    MomentumRangeTooSmall { p_max: f64, min: f64 },
    /// Grid point count must be even so that `p = 0` is a grid point.
    OddGrid { n_points: usize },
    /// A parameter is outside its admissible range.
    InvalidParameter { name: &'static str, reason: String },
    /// Gaussian width is not resolvable on the grid.
    UnresolvableWidth { sigma_p: f64, min: f64, max: f64 },
    /// A tabulated momentum profile does not span the grid.
    ProfileCoverage { table_min: f64, table_max: f64, grid_min: f64, grid_max: f64 },
    /// Momentum kick larger than half the grid range.
    KickTooLarge { q: f64, limit: f64 },
    /// A kick pushed probability off the grid.
    KickOffGrid { lost_norm: f64 },
    /// Initial state has probability behind the mirror.
    BehindMirror { probability: f64 },
    /// Momentum transfer of the grating is not a multiple of the grid spacing.
    TransferOffGrid { transfer: f64, spacing: f64 },
    /// Bin width is not a multiple of the grid spacing.
    BinOffGrid { bin_width: f64, spacing: f64 },
    /// Two objects live on different grids.
    GridMismatch,
    /// Fit needs at least four distinct phases spanning at least π.
    InsufficientPhases { distinct: usize, span: f64 },
    /// Normal equations of the fit are singular.
    DegenerateDesign,
    /// Fitted mean count is not positive.
    NonPositiveMean { n0: f64 },
    /// Every sample of the beam average was shadowed by the mirror.
    FullyShadowed,
    /// An ensemble or series was empty.
    Empty(&'static str),
    /// A state or ensemble lost its normalisation.
    Normalization { what: &'static str, value: f64 },
    /// Retardation assumption `d + w << c/Γ` does not hold.
    Retardation { extent: f64, limit: f64 },
}

impl Error {
    /// True for errors caused by the caller's input rather than by the
    /// numerics.
    pub fn is_precondition(&self) -> bool {
        !matches!(
            self,
            Error::KickOffGrid { .. }
                | Error::DegenerateDesign
                | Error::NonPositiveMean { .. }
                | Error::FullyShadowed
                | Error::Normalization { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridTooSmall { n_points, min } => {
                write!(f, "n_points too small: {n_points} < {min}")
            }
            Error::MomentumRangeTooSmall { p_max, min } => {
                write!(f, "p_max too small: {p_max} hbar*k0 < {min} hbar*k0 (aliasing)")
            }
            Error::OddGrid { n_points } => write!(f, "n_points must be even, got {n_points}"),
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::UnresolvableWidth { sigma_p, min, max } => write!(
                f,
                "momentum width {sigma_p} hbar*k0 not resolvable (allowed [{min}, {max}])"
            ),
            Error::ProfileCoverage { table_min, table_max, grid_min, grid_max } => write!(
                f,
                "tabulated profile spans [{table_min}, {table_max}] but grid needs [{grid_min}, {grid_max}]"
            ),
            Error::KickTooLarge { q, limit } => {
                write!(f, "kick {q} hbar*k0 exceeds p_max/2 = {limit}")
            }
            Error::KickOffGrid { lost_norm } => {
                write!(f, "kick pushed {lost_norm:e} of the norm off the grid")
            }
            Error::BehindMirror { probability } => {
                write!(f, "initial state has probability {probability:e} behind the mirror (z < 0)")
            }
            Error::TransferOffGrid { transfer, spacing } => write!(
                f,
                "grating transfer {transfer} hbar*k0 is not a multiple of the grid spacing {spacing}"
            ),
            Error::BinOffGrid { bin_width, spacing } => write!(
                f,
                "detector bin width {bin_width} hbar*k0 is not a multiple of the grid spacing {spacing}"
            ),
            Error::GridMismatch => write!(f, "states live on different grids"),
            Error::InsufficientPhases { distinct, span } => write!(
                f,
                "fringe fit needs >= 4 distinct phases spanning >= pi (got {distinct} spanning {span:.4} rad)"
            ),
            Error::DegenerateDesign => write!(f, "degenerate fit design matrix"),
            Error::NonPositiveMean { n0 } => write!(f, "fitted mean count {n0} is not positive"),
            Error::FullyShadowed => write!(f, "every beam sample is shadowed by the mirror"),
            Error::Empty(what) => write!(f, "empty {what}"),
            Error::Normalization { what, value } => {
                write!(f, "{what} lost normalisation (value {value})")
            }
            Error::Retardation { extent, limit } => write!(
                f,
                "mean distance plus beam width {extent} m is not << c/Gamma (limit {limit} m)"
            ),
        }
    }
}

impl core::error::Error for Error {}
