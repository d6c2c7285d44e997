use super::dataset::{MeasAxis, Prep, QptDataset};
use crate::error::Result;
use crate::spin::ChiMatrix;

/// Pauli transfer matrix of the affine Bloch map fixed by the four outputs:
/// c = (r₊z + r₋z)/2, columns X, Y, Z = r_X − c, r_Y − c, (r₊z − r₋z)/2.
pub fn ptm_from_outputs(outputs: &[[f64; 3]; 4]) -> [[f64; 4]; 4] {
    let rp = outputs[Prep::PlusZ.index()];
    let rm = outputs[Prep::MinusZ.index()];
    let rx = outputs[Prep::X.index()];
    let ry = outputs[Prep::Y.index()];
    let mut r = [[0.0; 4]; 4];
    r[0][0] = 1.0;
    for i in 0..3 {
        let c = 0.5 * (rp[i] + rm[i]);
        r[i + 1][0] = c;
        r[i + 1][1] = rx[i] - c;
        r[i + 1][2] = ry[i] - c;
        r[i + 1][3] = 0.5 * (rp[i] - rm[i]);
    }
    r
}

/// Expectations predicted by a transfer matrix, indexed [prep][axis].
pub fn predicted_outputs(ptm: &[[f64; 4]; 4]) -> [[f64; 3]; 4] {
    let mut out = [[0.0; 3]; 4];
    for prep in Prep::ALL {
        let s = prep.bloch().as_array();
        for axis in MeasAxis::ALL {
            let i = axis.index() + 1;
            out[prep.index()][axis.index()] = ptm[i][0] + (0..3).map(|j| ptm[i][j + 1] * s[j]).sum::<f64>();
        }
    }
    out
}

/// Linear inversion to χ_meas. Hermitian and trace preserving by
/// construction, but not necessarily positive.
pub fn expectations_to_chi(dataset: &QptDataset) -> Result<ChiMatrix> {
    dataset.validate()?;
    Ok(ChiMatrix::from_ptm(&ptm_from_outputs(&dataset.outputs())))
}
