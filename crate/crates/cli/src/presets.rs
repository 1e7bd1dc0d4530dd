//! Built-in experiments. Each preset is an ordinary problem document and can
//! be written out with `preset <name> --emit` and edited.
//!
//! Problems whose objective and constraints are translation invariant start
//! from a centrally symmetric gauge (`u(theta + pi) = u(theta)`), which pins
//! the optimum to the origin.

use std::f64::consts::PI;
use std::path::PathBuf;

use shapeopt::functional::{Equality, EqualityKind, Term, TermKind};

use crate::error::{CliError, CliResult};
use crate::problem::{
    AnalysisSection, ConstraintSection, DiscretizationSection, InitialShape, ObjectiveSection, OutputSection,
    ProblemDocument,
};

pub const PRESET_NAMES: [&str; 8] =
    ["isoperimetric", "ex1", "ex2", "ex3", "ex-prime-1", "ex-prime-2", "ex-prime-3", "maxE"];

fn symmetric_start() -> InitialShape {
    InitialShape::Fourier { mean: 1.0, cos: vec![0.0, 0.0, 0.1], sin: vec![0.0, 0.0, 0.0, 0.0, 0.05] }
}

struct Builder {
    doc: ProblemDocument,
}

impl Builder {
    fn new(name: &str, description: &str, terms: Vec<Term>) -> Self {
        Self {
            doc: ProblemDocument {
                name: name.into(),
                description: description.into(),
                seed: 0,
                objective: ObjectiveSection {
                    terms,
                    source: Default::default(),
                    trace: Default::default(),
                    gradient_mode: Default::default(),
                },
                constraints: ConstraintSection::default(),
                discretization: DiscretizationSection::default(),
                initial: symmetric_start(),
                optimizer: Default::default(),
                analysis: AnalysisSection::default(),
                outputs: OutputSection { dir: PathBuf::from("out").join(name), ..Default::default() },
            },
        }
    }

    fn boxed(mut self, inner: f64, outer: f64) -> Self {
        self.doc.constraints.inner_radius = Some(inner);
        self.doc.constraints.outer_radius = Some(outer);
        self
    }

    fn equality(mut self, kind: EqualityKind, target: f64) -> Self {
        self.doc.constraints.equality = Some(Equality { kind, target });
        self
    }

    fn boxed_outer(mut self, outer: f64) -> Self {
        self.doc.constraints.outer_radius = Some(outer);
        self
    }

    fn initial(mut self, shape: InitialShape) -> Self {
        self.doc.initial = shape;
        self
    }

    fn mu_sign(mut self) -> Self {
        self.doc.analysis.report_mu_sign = true;
        self
    }

    fn probe(mut self) -> Self {
        self.doc.analysis.probe.enabled = true;
        self
    }
}

/// The fully populated document of a named preset.
pub fn preset(name: &str) -> CliResult<ProblemDocument> {
    use EqualityKind::{Area, Perimeter};
    use TermKind as K;
    let b = match name {
        "isoperimetric" => Builder::new(
            "isoperimetric",
            "minimize P subject to |Omega| = pi; the optimum is the unit disk",
            vec![Term::new(K::Perimeter, 1.0)],
        )
        .equality(Area, PI)
        .initial(InitialShape::Fourier { mean: 1.0, cos: vec![0.0, 0.0, 0.2], sin: vec![] }),
        "ex1" => Builder::new(
            "ex1",
            "minimize lambda1 + P over convex disk(0.5) ⊂ Omega ⊂ disk(2); smooth free boundary",
            vec![Term::new(K::Lambda1, 1.0), Term::new(K::Perimeter, 1.0)],
        )
        .boxed(0.5, 2.0),
        "ex2" => Builder::new(
            "ex2",
            "minimize lambda1 + P subject to |Omega| = pi; smooth optimum",
            vec![Term::new(K::Lambda1, 1.0), Term::new(K::Perimeter, 1.0)],
        )
        .equality(Area, PI),
        "ex3" => Builder::new(
            "ex3",
            "minimize lambda1 subject to P = 2 pi; the perimeter multiplier is positive",
            vec![Term::new(K::Lambda1, 1.0)],
        )
        .equality(Perimeter, 2.0 * PI)
        .mu_sign(),
        "ex-prime-1" => Builder::new(
            "ex-prime-1",
            "minimize lambda1 + 3|Omega| - P over convex disk(0.5) ⊂ Omega ⊂ disk(2); \
             polygonal free boundary",
            vec![Term::new(K::Lambda1, 1.0), Term::new(K::Area, 3.0), Term::new(K::Perimeter, -1.0)],
        )
        .boxed(0.5, 2.0)
        .probe(),
        "ex-prime-2" => Builder::new(
            "ex-prime-2",
            "minimize lambda1 - P subject to |Omega| = pi; polygonal optimum",
            vec![Term::new(K::Lambda1, 1.0), Term::new(K::Perimeter, -1.0)],
        )
        .equality(Area, PI)
        .probe(),
        "ex-prime-3" => Builder::new(
            "ex-prime-3",
            "minimize |Omega| subject to P = 4.5 over convex disk(0.5) ⊂ Omega ⊂ disk(2); \
             the perimeter multiplier is negative",
            vec![Term::new(K::Area, 1.0)],
        )
        .boxed(0.5, 2.0)
        .equality(Perimeter, 4.5)
        .mu_sign(),
        "maxE" => Builder::new(
            "maxE",
            "maximize the torsion energy E_1 subject to |Omega| = 1 over convex Omega ⊂ disk(1.2); \
             the objective is scaled to order one",
            vec![Term::new(K::Energy, -100.0)],
        )
        .equality(Area, 1.0)
        .boxed_outer(1.2)
        .initial(InitialShape::Fourier { mean: 1.9, cos: vec![0.0, 0.0, 0.2], sin: vec![] }),
        other => return Err(CliError::UnknownPreset(other.into(), PRESET_NAMES.join(", "))),
    };
    Ok(b.doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid_and_roundtrips() {
        for name in PRESET_NAMES {
            let doc = preset(name).unwrap();
            doc.validate().unwrap();
            assert_eq!(doc.name, name);
            let back = crate::problem::parse_problem(&doc.to_toml()).unwrap();
            assert_eq!(back, doc, "{name}");
        }
    }

    #[test]
    fn ex1_is_lambda1_plus_perimeter_in_a_box() {
        let d = preset("ex1").unwrap();
        let kinds: Vec<_> = d.objective.terms.iter().map(|t| (t.kind, t.coefficient)).collect();
        assert_eq!(kinds, vec![(TermKind::Lambda1, 1.0), (TermKind::Perimeter, 1.0)]);
        assert_eq!(d.constraints.inner_radius, Some(0.5));
        assert_eq!(d.constraints.outer_radius, Some(2.0));
        assert!(d.constraints.equality.is_none());
    }

    #[test]
    fn ex_prime_2_has_area_constraint() {
        let d = preset("ex-prime-2").unwrap();
        let eq = d.constraints.equality.unwrap();
        assert_eq!(eq.kind, EqualityKind::Area);
        assert!((eq.target - PI).abs() < 1e-15);
        assert!(d.objective.terms.iter().any(|t| t.kind == TermKind::Perimeter && t.coefficient < 0.0));
    }

    #[test]
    fn max_e_minimizes_negative_energy() {
        let d = preset("maxE").unwrap();
        assert_eq!(d.objective.terms[0].kind, TermKind::Energy);
        assert!(d.objective.terms[0].coefficient < 0.0);
        assert_eq!(d.constraints.equality.unwrap().kind, EqualityKind::Area);
        assert!(d.constraints.outer_radius.is_some());
    }

    #[test]
    fn perimeter_constrained_presets_report_mu_sign() {
        for name in ["ex3", "ex-prime-3"] {
            assert!(preset(name).unwrap().analysis.report_mu_sign);
        }
        assert!(matches!(preset("ex4"), Err(CliError::UnknownPreset(..))));
    }
}
