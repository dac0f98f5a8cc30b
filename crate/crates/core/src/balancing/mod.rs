//! Application-balanced sampling weights.
//!
//! Each source `i` carries an original weight `α_i` and an application
//! `ρ(i)`. The application masses `ᾱ_A = Σ_{ρ(i)=A} α_i` are compared with
//! redistribution masses `β` fitted on a balanced dev set (see
//! [`optimize_interpolation`]); the ratio `γ = β / ᾱ` rescales each
//! source and the rescaled weights are renormalized into `λ`.

mod em;
mod sample;

use serde::{Deserialize, Serialize};

use crate::corpus::{ApplicationId, SourceSpec};
use crate::error::{Error, Result};

pub use em::{interpolation_perplexity, optimize_interpolation, EmOptions, InterpolationFit};
pub use sample::{sample_corpus, sample_lines, SampleProvenance, SampledCorpus};

/// A value per application.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerApp {
    #[serde(rename = "VA")]
    pub va: f64,
    #[serde(rename = "STT")]
    pub stt: f64,
}

impl PerApp {
    pub fn new(va: f64, stt: f64) -> Self {
        PerApp { va, stt }
    }

    pub fn get(&self, app: ApplicationId) -> f64 {
        match app {
            ApplicationId::Va => self.va,
            ApplicationId::Stt => self.stt,
        }
    }

    pub fn sum(&self) -> f64 {
        self.va + self.stt
    }
}

/// `ᾱ` per application. An application without sources gets mass 0.
pub fn application_masses(sources: &[SourceSpec]) -> PerApp {
    let mut m = PerApp::default();
    for s in sources {
        match s.application {
            ApplicationId::Va => m.va += s.alpha,
            ApplicationId::Stt => m.stt += s.alpha,
        }
    }
    m
}

/// Applications with no probability mass in `sources`.
pub fn empty_applications(sources: &[SourceSpec]) -> Vec<ApplicationId> {
    let m = application_masses(sources);
    ApplicationId::ALL
        .into_iter()
        .filter(|&a| m.get(a) == 0.0)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSolution {
    pub alpha_bar: PerApp,
    pub beta: PerApp,
    pub gamma: PerApp,
    pub source_ids: Vec<String>,
    pub lambda: Vec<f64>,
}

impl BalanceSolution {
    pub fn lambda_of(&self, id: &str) -> Option<f64> {
        self.source_ids
            .iter()
            .position(|s| s == id)
            .map(|i| self.lambda[i])
    }
}

/// Closed-form `γ_x = β_x / ᾱ_x` and `λ_i = γ_ρ(i) α_i / Σ_j γ_ρ(j) α_j`.
pub fn balanced_weights(sources: &[SourceSpec], beta: PerApp) -> Result<BalanceSolution> {
    if sources.is_empty() {
        return Err(Error::Config("no sources to balance".into()));
    }
    if beta.va < 0.0 || beta.stt < 0.0 || (beta.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "beta must be non-negative and sum to 1, got ({}, {})",
            beta.va, beta.stt
        )));
    }
    let alpha_bar = application_masses(sources);
    let ratio = |app: ApplicationId| -> Result<f64> {
        let (b, a) = (beta.get(app), alpha_bar.get(app));
        if a == 0.0 {
            if b > 0.0 {
                return Err(Error::EmptyApplication(app));
            }
            // nothing to rescale
            return Ok(0.0);
        }
        Ok(b / a)
    };
    let gamma = PerApp::new(ratio(ApplicationId::Va)?, ratio(ApplicationId::Stt)?);
    let scaled: Vec<f64> = sources
        .iter()
        .map(|s| gamma.get(s.application) * s.alpha)
        .collect();
    let norm: f64 = scaled.iter().sum();
    if norm <= 0.0 {
        return Err(Error::Config(
            "balanced weights vanish: every source has zero scaled mass".into(),
        ));
    }
    Ok(BalanceSolution {
        alpha_bar,
        beta,
        gamma,
        source_ids: sources.iter().map(|s| s.id.clone()).collect(),
        lambda: scaled.iter().map(|x| x / norm).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn src(id: &str, app: ApplicationId, alpha: f64) -> SourceSpec {
        SourceSpec {
            id: id.into(),
            path: format!("{id}.txt").into(),
            application: app,
            alpha,
        }
    }

    use ApplicationId::{Stt, Va};

    #[test]
    fn masses() {
        assert_eq!(
            application_masses(&[src("a", Va, 0.6), src("b", Stt, 0.4)]),
            PerApp::new(0.6, 0.4)
        );
        let m = application_masses(&[src("a", Va, 0.3), src("b", Va, 0.3), src("c", Stt, 0.4)]);
        assert!((m.va - 0.6).abs() < 1e-15 && m.stt == 0.4);
        let all_va = [src("a", Va, 0.5), src("b", Va, 0.5)];
        assert_eq!(application_masses(&all_va), PerApp::new(1.0, 0.0));
        assert_eq!(empty_applications(&all_va), vec![Stt]);
    }

    #[test]
    fn two_source_fixture() {
        let s = balanced_weights(&[src("a", Va, 0.6), src("b", Stt, 0.4)], PerApp::new(0.5, 0.5))
            .unwrap();
        assert!((s.gamma.va - 0.5 / 0.6).abs() < 1e-15);
        assert!((s.gamma.stt - 1.25).abs() < 1e-15);
        assert!((s.lambda[0] - 0.5).abs() < 1e-12);
        assert!((s.lambda[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_source_fixture() {
        let s = balanced_weights(
            &[src("a", Va, 0.3), src("b", Va, 0.3), src("c", Stt, 0.4)],
            PerApp::new(0.4, 0.6),
        )
        .unwrap();
        assert!((s.gamma.va - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.gamma.stt - 1.5).abs() < 1e-12);
        for (l, e) in s.lambda.iter().zip([0.2, 0.2, 0.6]) {
            assert!((l - e).abs() < 1e-12, "{l} vs {e}");
        }
        assert_eq!(s.lambda_of("c"), Some(s.lambda[2]));
    }

    #[test]
    fn identity_when_beta_equals_alpha_bar() {
        let srcs = [src("a", Va, 0.25), src("b", Stt, 0.35), src("c", Va, 0.4)];
        let s = balanced_weights(&srcs, PerApp::new(0.65, 0.35)).unwrap();
        assert!((s.gamma.va - 1.0).abs() < 1e-12 && (s.gamma.stt - 1.0).abs() < 1e-12);
        for (l, x) in s.lambda.iter().zip(&srcs) {
            assert!((l - x.alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_application_errors() {
        let all_va = [src("a", Va, 1.0)];
        assert!(matches!(
            balanced_weights(&all_va, PerApp::new(0.5, 0.5)),
            Err(Error::EmptyApplication(Stt))
        ));
        let s = balanced_weights(&all_va, PerApp::new(1.0, 0.0)).unwrap();
        assert_eq!(s.lambda, vec![1.0]);
        assert!(balanced_weights(&all_va, PerApp::new(0.7, 0.7)).is_err());
    }

    fn manifest_strategy() -> impl Strategy<Value = (Vec<SourceSpec>, f64)> {
        (
            prop::collection::vec((0.01f64..1.0, any::<bool>()), 2..10),
            0.0f64..=1.0,
        )
            .prop_filter_map("needs both applications", |(raw, beta)| {
                if raw.iter().all(|r| r.1) || raw.iter().all(|r| !r.1) {
                    return None;
                }
                let total: f64 = raw.iter().map(|r| r.0).sum();
                let srcs = raw
                    .iter()
                    .enumerate()
                    .map(|(i, &(w, va))| src(&i.to_string(), if va { Va } else { Stt }, w / total))
                    .collect();
                Some((srcs, beta))
            })
    }

    proptest! {
        #[test]
        fn closed_form_invariants((srcs, b) in manifest_strategy()) {
            let sol = balanced_weights(&srcs, PerApp::new(b, 1.0 - b)).unwrap();
            prop_assert!((sol.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert_eq!(sol.gamma.va, b / sol.alpha_bar.va);
            prop_assert_eq!(sol.gamma.stt, (1.0 - b) / sol.alpha_bar.stt);
            prop_assert!(sol.lambda.iter().all(|&l| l >= 0.0));
            for i in 0..srcs.len() {
                for j in 0..srcs.len() {
                    if srcs[i].application == srcs[j].application {
                        let lhs = sol.lambda[i] / sol.lambda[j];
                        let rhs = srcs[i].alpha / srcs[j].alpha;
                        if lhs.is_finite() {
                            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
                        }
                    }
                }
            }
        }
    }
}
