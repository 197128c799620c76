//! Brute-force moments of tiny imaging systems.
//!
//! Every source emits 0, 1 or 2 photons with a tabulated pmf, every photon
//! independently lands at offset `j` with probability `p(j)` (or leaves the
//! detector), and every pixel adds an independent noise count with its own
//! tabulated pmf. The joint law of the whole image is built outcome by
//! outcome, so the moments below involve no modelling shortcuts.

use std::collections::HashMap;

use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct TinySystem {
    /// `source_pmf[k][n]` = P(source `k` emits `n` photons), `n` in {0, 1, 2}.
    pub source_pmf: Vec<[f64; 3]>,
    pub psf: Vec<f64>,
    pub noise_pmf: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Full `K x K` covariance, row-major.
    pub covariance: Vec<f64>,
}

fn add_outcome(law: &mut HashMap<Vec<u8>, f64>, image: Vec<u8>, p: f64) {
    *law.entry(image).or_insert(0.0) += p;
}

impl TinySystem {
    pub fn len(&self) -> usize {
        self.source_pmf.len()
    }

    pub fn half_width(&self) -> usize {
        self.psf.len() / 2
    }

    /// Joint distribution of the image vector.
    pub fn joint_law(&self) -> HashMap<Vec<u8>, f64> {
        let len = self.len();
        let h = self.half_width() as isize;
        let mut law: HashMap<Vec<u8>, f64> = HashMap::from([(vec![0u8; len], 1.0)]);

        for (k, pmf) in self.source_pmf.iter().enumerate() {
            // Destinations of n photons: every ordered assignment of offsets.
            let mut next = HashMap::new();
            for (image, &p_img) in &law {
                for (n, &p_n) in pmf.iter().enumerate() {
                    if p_n == 0.0 {
                        continue;
                    }
                    let mut paths: Vec<(Vec<u8>, f64)> = vec![(image.clone(), p_img * p_n)];
                    for _ in 0..n {
                        let mut grown = Vec::new();
                        for (im, p) in &paths {
                            for (idx, &w) in self.psf.iter().enumerate() {
                                if w == 0.0 {
                                    continue;
                                }
                                let dest = k as isize + idx as isize - h;
                                let mut im = im.clone();
                                if (0..len as isize).contains(&dest) {
                                    im[dest as usize] += 1;
                                }
                                grown.push((im, p * w));
                            }
                        }
                        paths = grown;
                    }
                    for (im, p) in paths {
                        add_outcome(&mut next, im, p);
                    }
                }
            }
            law = next;
        }

        for (k, pmf) in self.noise_pmf.iter().enumerate() {
            let mut next = HashMap::new();
            for (image, &p_img) in &law {
                for (c, &p_c) in pmf.iter().enumerate() {
                    if p_c == 0.0 {
                        continue;
                    }
                    let mut im = image.clone();
                    im[k] += c as u8;
                    add_outcome(&mut next, im, p_img * p_c);
                }
            }
            law = next;
        }
        law
    }

    pub fn moments(&self) -> ExactMoments {
        let len = self.len();
        let law = self.joint_law();
        let mut mean = vec![0.0; len];
        for (im, &p) in &law {
            for k in 0..len {
                mean[k] += p * im[k] as f64;
            }
        }
        let mut covariance = vec![0.0; len * len];
        for (im, &p) in &law {
            for k in 0..len {
                let dk = im[k] as f64 - mean[k];
                for l in 0..len {
                    covariance[k * len + l] += p * dk * (im[l] as f64 - mean[l]);
                }
            }
        }
        let variance = (0..len).map(|k| covariance[k * len + k]).collect();
        ExactMoments {
            mean,
            variance,
            covariance,
        }
    }
}

/// Mean and Z (variance minus mean) of a pmf on {0, 1, 2}.
pub fn pmf_mean_z(pmf: &[f64; 3]) -> (f64, f64) {
    let mean = pmf[1] + 2.0 * pmf[2];
    let second = pmf[1] + 4.0 * pmf[2];
    (mean, second - mean * mean - mean)
}

fn pmf3() -> impl Strategy<Value = [f64; 3]> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c)| {
        let t = a + b + c;
        if t == 0.0 {
            [1.0, 0.0, 0.0]
        } else {
            [a / t, b / t, c / t]
        }
    })
}

/// Random systems with `K <= 4` and `J <= 1`.
pub fn tiny_system() -> impl Strategy<Value = TinySystem> {
    (1usize..=4, 0usize..=1).prop_flat_map(|(len, h)| {
        let psf = prop::collection::vec(0.01f64..1.0, 2 * h + 1).prop_map(|w| {
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect::<Vec<_>>()
        });
        (
            prop::collection::vec(pmf3(), len),
            psf,
            prop::collection::vec(pmf3(), len),
        )
            .prop_map(|(source_pmf, psf, noise_pmf)| TinySystem {
                source_pmf,
                psf,
                noise_pmf,
            })
    })
}

fn mean_q(pmfs: &[[f64; 3]]) -> (Vec<f64>, Vec<f64>) {
    pmfs.iter()
        .map(|pmf| {
            let (m, z) = pmf_mean_z(pmf);
            (m, if m > 0.0 { z / m } else { 0.0 })
        })
        .unzip()
}

/// The same system in the library's terms: per-position mean and Mandel Q.
pub fn to_models(sys: &TinySystem) -> (zimage::ObjectModel, zimage::Psf, zimage::NoiseModel) {
    let (flux, q) = mean_q(&sys.source_pmf);
    let (noise_mean, noise_q) = mean_q(&sys.noise_pmf);
    (
        zimage::ObjectModel::new(flux, q).unwrap(),
        zimage::Psf::from_weights(sys.psf.clone()).unwrap(),
        zimage::NoiseModel::new(noise_mean, noise_q).unwrap(),
    )
}
