use serde::{Deserialize, Serialize};

use super::tensor::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid_config(format!(
                "invalid optimizer settings {self:?}"
            )))
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: ParamSet,
    pub v: ParamSet,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Training(format!(
            "{} gradients for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let g = grads
            .get(name)
            .filter(|g| g.len() == p.len())
            .ok_or_else(|| Error::Training(format!("gradient for {name} missing or misshapen")))?;
        if g.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!("non-finite gradient in {name}")));
        }
        let m = state.m.get_mut(name).expect("moment tensors mirror params");
        let v = state.v.get_mut(name).expect("moment tensors mirror params");
        for i in 0..p.len() {
            let gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m.data[i] / c1;
            let vh = v.data[i] / c2;
            p.data[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tensor::Tensor;

    fn single(v: f64) -> ParamSet {
        [(
            "w".to_string(),
            Tensor {
                shape: vec![1],
                data: vec![v],
            },
        )]
        .into_iter()
        .collect()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        for g in [0.3, -2.0, 1e3] {
            let mut p = single(1.0);
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &single(g), &mut st, &cfg).unwrap();
            let expected = 1.0 - cfg.learning_rate * g.signum() * g.abs() / (g.abs() + cfg.epsilon);
            assert!((p.get("w").unwrap().data[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_closed_form_over_steps() {
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..Default::default()
        };
        let grads = [0.5, -0.2, 0.1, 0.7];
        let mut p = single(0.0);
        let mut st = AdamState::new(&p);
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 0.0f64);
        for (t, &g) in grads.iter().enumerate() {
            adam_step(&mut p, &single(g), &mut st, &cfg).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            theta -= 0.01 * mh / (vh.sqrt() + 1e-8);
            assert!((p.get("w").unwrap().data[0] - theta).abs() < 1e-15);
        }
        assert_eq!(st.step, 4);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = single(0.7);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &single(0.0), &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p.get("w").unwrap().data[0], 0.7);
    }

    #[test]
    fn descends_a_quadratic() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..Default::default()
        };
        let mut p = single(1.0);
        let mut st = AdamState::new(&p);
        for _ in 0..100 {
            let w = p.get("w").unwrap().data[0];
            adam_step(&mut p, &single(2.0 * w), &mut st, &cfg).unwrap();
        }
        assert!(p.get("w").unwrap().data[0].abs() < 0.1);
    }

    #[test]
    fn rejects_bad_gradients() {
        let cfg = AdamConfig::default();
        let mut p = single(0.0);
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &single(f64::NAN), &mut st, &cfg).is_err());
        assert!(adam_step(&mut p, &ParamSet::new(), &mut st, &cfg).is_err());
        assert!(AdamConfig { beta1: 1.0, ..cfg }.validate().is_err());
    }
}
