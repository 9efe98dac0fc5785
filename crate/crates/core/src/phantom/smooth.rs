/// Normalized 1-D Gaussian taps for a standard deviation in voxels.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter on an x-fastest grid with edge replication.
/// `sigma` is per axis, in voxels.
pub fn gaussian_smooth(data: &[f64], dims: [usize; 3], sigma: [f64; 3]) -> Vec<f64> {
    let mut cur = data.to_vec();
    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let k = gaussian_kernel(sigma[axis]);
        if k.len() == 1 {
            continue;
        }
        let r = (k.len() / 2) as isize;
        let n = dims[axis] as isize;
        let stride = strides[axis];
        let mut out = vec![0.0; cur.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let pos = ((idx / stride) % dims[axis]) as isize;
            let base = idx - pos as usize * stride;
            *o = k
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let p = (pos + j as isize - r).clamp(0, n - 1) as usize;
                    w * cur[base + p * stride]
                })
                .sum();
        }
        cur = out;
    }
    cur
}

/// Standard deviation of filtered unit white noise away from the edges.
pub fn smoothed_noise_std(sigma: [f64; 3]) -> f64 {
    sigma
        .iter()
        .map(|&s| gaussian_kernel(s).iter().map(|w| w * w).sum::<f64>())
        .product::<f64>()
        .sqrt()
}

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (8.0 * std::f64::consts::LN_2).sqrt()
}
