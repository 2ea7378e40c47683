//! Codes shipped with the crate.

use crate::code::ParityCheckCode;

/// Alist text of a (7,4) Hamming code.
pub const HAMMING_7_4_ALIST: &str = include_str!("../codes/hamming_7_4.alist");

/// Alist text of the (96,48) quasi-cyclic irregular LDPC code expanded from [`QC_96_48_BASE`].
pub const QC_96_48_ALIST: &str = include_str!("../codes/qc_96_48.alist");

/// Circulant size of the (96,48) code.
pub const QC_96_48_LIFT: usize = 8;

/// 6 × 12 base matrix of circulant shifts (-1 = zero block).
///
/// Columns 0..6 carry the information part, column 6 is the weight-3 parity
/// column and columns 7..12 form the dual diagonal. Free of 4-cycles.
pub const QC_96_48_BASE: [[i32; 12]; 6] = [
    [2, 5, 0, -1, 4, -1, 1, 0, -1, -1, -1, -1],
    [6, 7, -1, 7, -1, 5, -1, 0, 0, -1, -1, -1],
    [4, -1, 6, 4, 7, -1, -1, -1, 0, 0, -1, -1],
    [2, 1, 1, -1, -1, 3, 0, -1, -1, 0, 0, -1],
    [-1, 0, -1, 2, 3, 4, -1, -1, -1, -1, 0, 0],
    [0, -1, 5, 6, -1, 3, 1, -1, -1, -1, -1, 0],
];

pub fn hamming_7_4() -> ParityCheckCode {
    ParityCheckCode::parse_alist(HAMMING_7_4_ALIST).expect("bundled alist is valid")
}

pub fn qc_96_48() -> ParityCheckCode {
    ParityCheckCode::parse_alist(QC_96_48_ALIST).expect("bundled alist is valid")
}
