//! Half-array mode matrices and the masks derived from them.

use std::fmt;

/// Maps a half-array column `[z1, z2]` to the code `2·z1 + z2`.
pub fn f_omega(col: [bool; 2]) -> u8 {
    2 * col[0] as u8 + col[1] as u8
}

pub fn f_omega_inv(code: u8) -> [bool; 2] {
    assert!(code < 4, "mode code out of range: {code}");
    [code & 2 != 0, code & 1 != 0]
}

/// A 2×2 binary matrix; `omega[i][j]` is true when half-array `i` transmits
/// (downlink) in phase `j`, false when it receives (uplink).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeMatrix {
    pub omega: [[bool; 2]; 2],
}

/// Coarse classification of a mode by how its phases use the array.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeClass {
    /// Both phases split the array between Rx and Tx.
    TwoPhaseFd,
    /// One full-duplex phase and one single-direction phase.
    Hybrid,
    /// Each phase is single-direction.
    HalfDuplex,
}

impl ModeMatrix {
    pub fn from_codes(c1: u8, c2: u8) -> Self {
        let a = f_omega_inv(c1);
        let b = f_omega_inv(c2);
        ModeMatrix {
            omega: [[a[0], b[0]], [a[1], b[1]]],
        }
    }

    pub fn column(&self, j: usize) -> [bool; 2] {
        [self.omega[0][j], self.omega[1][j]]
    }

    pub fn codes(&self) -> (u8, u8) {
        (f_omega(self.column(0)), f_omega(self.column(1)))
    }

    pub fn ones(&self) -> usize {
        self.omega.iter().flatten().filter(|&&b| b).count()
    }

    /// Constraint that both link directions get at least one phase.
    pub fn is_valid(&self) -> bool {
        (1..=3).contains(&self.ones())
    }

    /// Swaps the two phase columns.
    pub fn swapped(&self) -> Self {
        let (a, b) = self.codes();
        Self::from_codes(b, a)
    }

    pub fn class(&self) -> ModeClass {
        let fd = |c: u8| c == 1 || c == 2;
        let (a, b) = self.codes();
        match (fd(a), fd(b)) {
            (true, true) => ModeClass::TwoPhaseFd,
            (false, false) => ModeClass::HalfDuplex,
            _ => ModeClass::Hybrid,
        }
    }

    pub fn masks(&self, n: usize) -> PhaseMasks {
        derive_masks(self, n)
    }
}

impl fmt::Display for ModeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.codes();
        write!(f, "({a},{b})")
    }
}

fn in_reduced_set(c1: u8, c2: u8) -> bool {
    c1 < c2 || (c1 == c2 && c1 != 0 && c1 != 3)
}

/// The eight modes that need to be searched, in lexicographic code order.
pub fn enumerate_modes() -> Vec<ModeMatrix> {
    let mut out = Vec::with_capacity(8);
    for c1 in 0..4u8 {
        for c2 in 0..4u8 {
            if in_reduced_set(c1, c2) {
                out.push(ModeMatrix::from_codes(c1, c2));
            }
        }
    }
    out
}

/// Every mode satisfying the validity constraint (14 of the 16 matrices).
pub fn all_valid_modes() -> Vec<ModeMatrix> {
    let mut out = Vec::with_capacity(14);
    for c1 in 0..4u8 {
        for c2 in 0..4u8 {
            let m = ModeMatrix::from_codes(c1, c2);
            if m.is_valid() {
                out.push(m);
            }
        }
    }
    out
}

/// Per-phase antenna masks and direction flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseMasks {
    pub half_array_size: usize,
    /// Transmit mask per phase, length 2N.
    pub lambda: [Vec<bool>; 2],
    /// Receive mask per phase, the complement of `lambda`.
    pub lambda_bar: [Vec<bool>; 2],
    /// Both half-arrays transmit: no uplink in the phase.
    pub beta: [bool; 2],
    /// Both half-arrays receive: no downlink in the phase.
    pub chi: [bool; 2],
    /// `(half_array, phase)` pairs whose beamformer block is zero.
    pub forced_zero_dl_blocks: Vec<(usize, usize)>,
    pub ul_disabled_phase: Vec<usize>,
    pub dl_disabled_phase: Vec<usize>,
    omega: [[bool; 2]; 2],
}

impl PhaseMasks {
    pub fn ul_enabled(&self, j: usize) -> bool {
        !self.beta[j]
    }

    pub fn dl_enabled(&self, j: usize) -> bool {
        !self.chi[j]
    }

    pub fn transmits(&self, half: usize, j: usize) -> bool {
        self.omega[half][j]
    }

    /// Antenna indices that transmit in phase `j`.
    pub fn tx_antennas(&self, j: usize) -> Vec<usize> {
        (0..self.lambda[j].len()).filter(|&a| self.lambda[j][a]).collect()
    }

    pub fn rx_antennas(&self, j: usize) -> Vec<usize> {
        (0..self.lambda_bar[j].len()).filter(|&a| self.lambda_bar[j][a]).collect()
    }

    /// Antenna indices of one half-array.
    pub fn half_antennas(&self, half: usize) -> std::ops::Range<usize> {
        half * self.half_array_size..(half + 1) * self.half_array_size
    }
}

pub fn derive_masks(mode: &ModeMatrix, n: usize) -> PhaseMasks {
    let mut lambda: [Vec<bool>; 2] = [vec![false; 2 * n], vec![false; 2 * n]];
    let mut forced = Vec::new();
    for j in 0..2 {
        for i in 0..2 {
            if mode.omega[i][j] {
                for a in i * n..(i + 1) * n {
                    lambda[j][a] = true;
                }
            } else {
                forced.push((i, j));
            }
        }
    }
    let lambda_bar = [
        lambda[0].iter().map(|b| !b).collect(),
        lambda[1].iter().map(|b| !b).collect(),
    ];
    let beta = [0, 1].map(|j| mode.omega[0][j] && mode.omega[1][j]);
    let chi = [0, 1].map(|j| !mode.omega[0][j] && !mode.omega[1][j]);
    PhaseMasks {
        half_array_size: n,
        lambda,
        lambda_bar,
        beta,
        chi,
        forced_zero_dl_blocks: forced,
        ul_disabled_phase: (0..2).filter(|&j| beta[j]).collect(),
        dl_disabled_phase: (0..2).filter(|&j| chi[j]).collect(),
        omega: mode.omega,
    }
}
