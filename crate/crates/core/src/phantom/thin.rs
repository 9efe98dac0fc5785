use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::volume::{Units, Volume};

/// Keeps each recorded count independently with probability `fraction`.
pub fn thin_dose<R: Rng + ?Sized>(pet: &Volume, fraction: f64, rng: &mut R) -> Result<Volume> {
    if pet.units() != Units::Counts {
        return Err(Error::Domain(format!(
            "dose thinning needs a counts volume, got {:?}",
            pet.units()
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    if fraction == 1.0 {
        return Ok(pet.clone());
    }
    let data = pet
        .data()
        .iter()
        .map(|&c| {
            let n = c as u64;
            if n == 0 {
                return 0.0;
            }
            Binomial::new(n, fraction).expect("valid binomial").sample(rng) as f32
        })
        .collect();
    Volume::new(pet.dims(), pet.spacing(), Units::Counts, data)
}
