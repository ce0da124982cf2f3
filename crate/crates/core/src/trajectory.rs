/// Why a trajectory integration stopped recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Reached the requested end time.
    Completed,
    /// Stepped outside the grid (or the series' time range).
    LeftDomain,
    /// Stepped into a cell where the density is below the masking floor and
    /// the velocity is undefined.
    EnteredMaskedRegion,
}

impl Termination {
    /// Stable integer code used in CSV exports.
    pub fn code(&self) -> u8 {
        match self {
            Termination::Completed => 0,
            Termination::LeftDomain => 1,
            Termination::EnteredMaskedRegion => 2,
        }
    }
}

/// Time-stamped 2D path of one particle. Samples are stored with strictly
/// increasing `t` regardless of integration direction.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64, f64)> {
        let i = self.t.len().checked_sub(1)?;
        Some((self.t[i], self.x[i], self.y[i]))
    }
}

/// 1D counterpart used by the double-well model.
#[derive(Debug, Clone)]
pub struct Trajectory1D {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub termination: Termination,
}

impl Trajectory1D {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        let i = self.t.len().checked_sub(1)?;
        Some((self.t[i], self.y[i]))
    }
}
