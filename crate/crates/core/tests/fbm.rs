use mixfbm::fbm::{fbm_covariance, sample_fbm, FbmSpec, RngStream, SamplingMethod};
use mixfbm::fraccalc::{holder_seminorm, Grid, GridPath};
use proptest::prelude::*;

fn spec(hurst: f64, dim: usize, n: usize, method: SamplingMethod) -> FbmSpec {
    FbmSpec::new(hurst, dim, Grid::new(1.0, n).unwrap(), method).unwrap()
}

fn subsample(path: &GridPath, stride: usize) -> GridPath {
    let n = path.grid().n_steps() / stride;
    let grid = Grid::new(path.grid().horizon(), n).unwrap();
    GridPath::from_fn(grid, path.dim(), {
        let mut k = 0;
        move |_, out| {
            out.copy_from_slice(path.at(k * stride));
            k += 1;
        }
    })
    .unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn same_stream_gives_identical_paths(
        seed in any::<u64>(),
        stream in any::<u64>(),
        hurst in 0.51f64..0.99,
        volterra in any::<bool>(),
    ) {
        let method = if volterra { SamplingMethod::Volterra } else { SamplingMethod::Cholesky };
        let s = spec(hurst, 2, 16, method);
        let a = sample_fbm(&s, RngStream::new(seed, stream)).unwrap();
        let b = sample_fbm(&s, RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(a.at(0), &[0.0, 0.0][..]);
    }
}

#[test]
fn holder_seminorm_separates_around_hurst() {
    let hurst = 0.7;
    let fine = 1024;
    let s = spec(hurst, 1, fine, SamplingMethod::Cholesky);
    let (mut below, mut above) = (Vec::new(), Vec::new());
    for k in 0..16 {
        let path = sample_fbm(&s, RngStream::new(11, k)).unwrap();
        let levels: Vec<GridPath> = [8, 4, 2, 1].iter().map(|&st| subsample(&path, st)).collect();
        for w in levels.windows(2) {
            below.push(holder_seminorm(&w[1], hurst - 0.05) / holder_seminorm(&w[0], hurst - 0.05));
            above.push(holder_seminorm(&w[1], hurst + 0.05) / holder_seminorm(&w[0], hurst + 0.05));
        }
    }
    let (b, a) = (median(below), median(above));
    // divergence at α > H multiplies the seminorm by at least 2^{α-H} per doubling
    let threshold = 2f64.powf(0.05);
    assert!(b < threshold, "{b}");
    assert!(a > threshold, "{a}");
}

#[test]
fn samplers_agree_in_distribution() {
    let n_paths = 4000;
    let hurst = 0.75;
    let moments = |method| {
        let s = spec(hurst, 1, 16, method);
        let paths: Vec<GridPath> = (0..n_paths).map(|k| sample_fbm(&s, RngStream::new(5, k)).unwrap()).collect();
        (1..=16)
            .map(|i| {
                let xs: Vec<f64> = paths.iter().map(|p| p.at(i)[0]).collect();
                let m = xs.iter().sum::<f64>() / n_paths as f64;
                let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
                (m, v)
            })
            .collect::<Vec<_>>()
    };
    let (c, v) = (moments(SamplingMethod::Cholesky), moments(SamplingMethod::Volterra));
    let n = n_paths as f64;
    for (i, ((mc, vc), (mv, vv))) in c.iter().zip(&v).enumerate() {
        let t = (i + 1) as f64 / 16.0;
        let var = fbm_covariance(t, t, hurst);
        // difference of two independent estimates
        let mean_se = (2.0 * var / n).sqrt();
        let var_se = var * (4.0 / (n - 1.0)).sqrt();
        assert!((mc - mv).abs() < 3.0 * mean_se, "node {}: means {mc} {mv}", i + 1);
        assert!((vc - vv).abs() < 3.0 * var_se, "node {}: variances {vc} {vv}", i + 1);
    }
}
