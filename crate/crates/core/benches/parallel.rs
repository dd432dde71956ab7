//! Compares the rayon core with the sequential fallback.
//!
//! With the default features each workload runs on the global pool and on a
//! one-thread pool; `cargo bench --no-default-features` measures the
//! sequential build under the same ids for a cross-build comparison.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixfbm::fbm::{sample_fbm, FbmSpec, RngStream, SamplingMethod};
use mixfbm::fraccalc::{holder_seminorm, Grid};
use mixfbm::mc::{run_rare_event, DeltaRule, Event, ExperimentPlan};
use mixfbm::multiscale::SystemParams;
use mixfbm::par;

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn rare_event_plan() -> ExperimentPlan {
    ExperimentPlan {
        system: "ou_sin".into(),
        system_params: SystemParams::new(),
        hurst: 0.7,
        horizon: 1.0,
        n_steps: 32,
        event: Event::EndpointExceeds { a: vec![1.0], b: 1.5 },
        epsilon_schedule: vec![0.5],
        delta_rule: DeltaRule::Ratio(0.2),
        n_samples: vec![2048],
        master_seed: 1,
        fast_substeps: None,
        budget_secs: None,
        strict: false,
    }
}

fn workloads(c: &mut Criterion, label: &str, run: &dyn Fn(&mut (dyn FnMut() + Send))) {
    let spec = FbmSpec::new(0.7, 1, Grid::new(1.0, 256).unwrap(), SamplingMethod::Cholesky).unwrap();
    sample_fbm(&spec, RngStream::new(0, 0)).unwrap(); // warm the factor cache
    let path = sample_fbm(&spec, RngStream::new(0, 1)).unwrap();
    let plan = rare_event_plan();

    let mut group = c.benchmark_group("fbm_batch");
    group.bench_function(BenchmarkId::new(label, 512), |b| {
        b.iter(|| {
            run(&mut || {
                par::map_indexed(512, |k| sample_fbm(&spec, RngStream::new(3, k as u64)).unwrap());
            })
        })
    });
    group.finish();

    let mut group = c.benchmark_group("holder_seminorm");
    group.bench_function(BenchmarkId::new(label, 256), |b| {
        b.iter(|| {
            run(&mut || {
                holder_seminorm(&path, 0.6);
            })
        })
    });
    group.finish();

    let mut group = c.benchmark_group("rare_event");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new(label, 2048), |b| {
        b.iter(|| {
            run(&mut || {
                run_rare_event(&plan).unwrap();
            })
        })
    });
    group.finish();
}

fn build_mode(c: &mut Criterion) {
    workloads(c, mode(), &|f| f());
}

#[cfg(feature = "parallel")]
fn single_thread_pool(c: &mut Criterion) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    workloads(c, "one_thread_pool", &|f| pool.install(f));
}

#[cfg(feature = "parallel")]
criterion_group!(benches, build_mode, single_thread_pool);
#[cfg(not(feature = "parallel"))]
criterion_group!(benches, build_mode);
criterion_main!(benches);
