//! Built-in test systems and the compiled-in extension point.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

use super::system::{Constants, Dims, SystemSpec};
use crate::error::{Error, Result};

/// Named numeric parameters passed to a system builder.
pub type SystemParams = BTreeMap<String, f64>;
pub type SystemBuilder = fn(&SystemParams) -> Result<SystemSpec>;

pub const BUILTIN_SYSTEMS: [&str; 3] = ["ou_sin", "linear", "double_well_bounded"];

fn extensions() -> &'static RwLock<HashMap<String, SystemBuilder>> {
    static EXT: OnceLock<RwLock<HashMap<String, SystemBuilder>>> = OnceLock::new();
    EXT.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Registers a user system under `name`; built-in names cannot be shadowed.
pub fn register_system(name: &str, builder: SystemBuilder) -> Result<()> {
    if BUILTIN_SYSTEMS.contains(&name) {
        return Err(Error::usage(format!("'{name}' is a built-in system")));
    }
    extensions().write().expect("registry poisoned").insert(name.to_owned(), builder);
    Ok(())
}

/// Builds a system by name. Every system accepts scalar `x0` and `y0`
/// overrides; other keys are system specific.
pub fn build_system(name: &str, params: &SystemParams) -> Result<SystemSpec> {
    let spec = match name {
        "ou_sin" => ou_sin(params)?,
        "linear" => linear(params)?,
        "double_well_bounded" => double_well_bounded(params)?,
        other => {
            let builder = extensions()
                .read()
                .expect("registry poisoned")
                .get(other)
                .copied()
                .ok_or_else(|| Error::usage(format!("unknown system '{other}'")))?;
            builder(params)?
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn check_keys(params: &SystemParams, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) && key != "x0" && key != "y0" {
            return Err(Error::usage(format!("unknown system parameter '{key}'")));
        }
    }
    Ok(())
}

fn get(params: &SystemParams, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// `f1 = sin y`, `f2 = -(y - x)`, `σ1 = 1`, `σ2 = √2`. The frozen fast law
/// is `N(x, 1)`, so the averaged drift is `sin(x) e^{-1/2}`.
fn ou_sin(params: &SystemParams) -> Result<SystemSpec> {
    check_keys(params, &[])?;
    let inv_sqrt_e = (-0.5f64).exp();
    Ok(SystemSpec {
        name: "ou_sin".into(),
        dims: Dims { m: 1, n: 1, d1: 1, d2: 1 },
        f1: Arc::new(|_, y, out| out[0] = y[0].sin()),
        f2: Arc::new(|x, y, out| out[0] = -(y[0] - x[0])),
        sigma1: Arc::new(|_, out| out[0] = 1.0),
        sigma2: Arc::new(|_, _, out| out[0] = std::f64::consts::SQRT_2),
        bar_f1: Some(Arc::new(move |x, out| out[0] = x[0].sin() * inv_sqrt_e)),
        constants: Constants { lipschitz: 1.0, lipschitz_sigma: 1.0, beta1: 2.0, beta2: 1.0, growth: 2.0 },
        x0: vec![get(params, "x0", 1.0)],
        y0: vec![get(params, "y0", 0.0)],
        diagnostics_only: false,
    })
}

/// `f1 = coupling * y`, `f2 = -y`, `σ1 = 1`, `σ2 = √2`; the averaged drift
/// vanishes. With `fast_channel = 0` the fast component is removed and the
/// slow path is `x0 + √ε B^H`. Unbounded `f1`, hence diagnostics only.
fn linear(params: &SystemParams) -> Result<SystemSpec> {
    check_keys(params, &["coupling", "fast_channel"])?;
    let coupling = get(params, "coupling", 1.0);
    let fast = get(params, "fast_channel", 1.0) != 0.0;
    let dims = if fast { Dims { m: 1, n: 1, d1: 1, d2: 1 } } else { Dims { m: 1, n: 0, d1: 1, d2: 0 } };
    let f1: super::system::Coupled =
        if fast { Arc::new(move |_, y, out| out[0] = coupling * y[0]) } else { Arc::new(|_, _, out| out[0] = 0.0) };
    Ok(SystemSpec {
        name: "linear".into(),
        dims,
        f1,
        f2: Arc::new(|_, y, out| out.iter_mut().zip(y).for_each(|(o, v)| *o = -v)),
        sigma1: Arc::new(|_, out| out[0] = 1.0),
        sigma2: Arc::new(|_, _, out| out.iter_mut().for_each(|o| *o = std::f64::consts::SQRT_2)),
        bar_f1: Some(Arc::new(|_, out| out[0] = 0.0)),
        constants: Constants {
            lipschitz: coupling.abs().max(1.0),
            lipschitz_sigma: 1.0,
            beta1: 2.0,
            beta2: 1.0,
            growth: 2.0,
        },
        x0: vec![get(params, "x0", 0.0)],
        y0: if fast { vec![get(params, "y0", 0.0)] } else { Vec::new() },
        diagnostics_only: true,
    })
}

/// Bounded double-well drift with `y`-modulation and state-dependent
/// slow noise: `f1 = tanh(x - x^3) + sin(y)/2`, `f2 = -(y - x)`,
/// `σ1 = 1/2 + cos(x)/4`, `σ2 = 1`. Frozen fast law `N(x, 1/2)`.
fn double_well_bounded(params: &SystemParams) -> Result<SystemSpec> {
    check_keys(params, &[])?;
    let damp = (-0.25f64).exp();
    Ok(SystemSpec {
        name: "double_well_bounded".into(),
        dims: Dims { m: 1, n: 1, d1: 1, d2: 1 },
        f1: Arc::new(|x, y, out| out[0] = (x[0] - x[0].powi(3)).tanh() + 0.5 * y[0].sin()),
        f2: Arc::new(|x, y, out| out[0] = -(y[0] - x[0])),
        sigma1: Arc::new(|x, out| out[0] = 0.5 + 0.25 * x[0].cos()),
        sigma2: Arc::new(|_, _, out| out[0] = 1.0),
        bar_f1: Some(Arc::new(move |x, out| out[0] = (x[0] - x[0].powi(3)).tanh() + 0.5 * x[0].sin() * damp)),
        // tanh(x - x^3) is not globally Lipschitz; L is the bound on the sampled box
        constants: Constants { lipschitz: 30.0, lipschitz_sigma: 0.25, beta1: 2.0, beta2: 1.0, growth: 2.0 },
        x0: vec![get(params, "x0", -0.5)],
        y0: vec![get(params, "y0", 0.0)],
        diagnostics_only: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_SYSTEMS {
            let s = build_system(name, &SystemParams::new()).unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn linear_without_fast_channel() {
        let mut p = SystemParams::new();
        p.insert("fast_channel".into(), 0.0);
        let s = build_system("linear", &p).unwrap();
        assert!(!s.has_fast_channel());
        assert_eq!(s.eval_f1(&[3.0], &[]), vec![0.0]);
    }

    #[test]
    fn unknown_names_and_keys() {
        assert!(build_system("nope", &SystemParams::new()).is_err());
        let mut p = SystemParams::new();
        p.insert("bogus".into(), 1.0);
        assert!(build_system("ou_sin", &p).is_err());
    }

    #[test]
    fn extension_point() {
        fn mine(_: &SystemParams) -> Result<SystemSpec> {
            let mut s = build_system("ou_sin", &SystemParams::new())?;
            s.name = "mine".into();
            Ok(s)
        }
        register_system("mine", mine).unwrap();
        assert_eq!(build_system("mine", &SystemParams::new()).unwrap().name, "mine");
        assert!(register_system("ou_sin", mine).is_err());
    }

    #[test]
    fn ou_constants_survive_spot_check() {
        let s = build_system("ou_sin", &SystemParams::new()).unwrap();
        let r = s.check_assumptions(500, 3.0, 1);
        assert!(r.consistent(), "{r:?}");
    }
}
