//! Flat key-value run configuration.
//!
//! The on-disk format is one `key = value` assignment per line with dotted
//! section prefixes (`kernel.variance = 2.0`) and `#` comments. Parsing is
//! strict: unknown keys and duplicate assignments are errors naming the key,
//! so a typo cannot silently fall back to a default. Command-line overrides
//! reuse the same `key=value` syntax and the same checks.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::init::{InitialDensity, MixtureComponent};
use crate::kernels::Kernel;
use crate::potentials::Potential;

/// Every key the configuration format accepts.
///
/// One file may hold keys for several subcommands; each command reads the
/// sections it needs and ignores the rest, but every key must still be one
/// of these.
pub const KNOWN_KEYS: &[&str] = &[
    "run.seed",
    "kernel.family",
    "kernel.variance",
    "kernel.dim",
    "potential.family",
    "potential.coefficients",
    "init.family",
    "init.mean",
    "init.std",
    "init.components",
    "simulate.dynamics",
    "simulate.n",
    "simulate.placement",
    "simulate.cadence",
    "simulate.snapshot_every",
    "simulate.reference",
    "integrator.scheme",
    "integrator.dt",
    "integrator.t_final",
    "reference.half_width",
    "reference.cells",
    "pde.solver",
    "pde.half_width",
    "pde.cells",
    "pde.nodes",
    "pde.dt",
    "pde.cfl",
    "pde.dt_max",
    "pde.t_final",
    "pde.cadence",
    "pde.snapshot_every",
    "experiment.n_sweep",
    "experiment.epsilons",
    "experiment.dt",
    "experiment.t_final",
    "experiment.cells",
];

/// A validated set of assignments.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown config key '{key}'")))
    }
}

impl RunConfig {
    /// Parses config text, rejecting unknown and duplicate keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            check_key(key)?;
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "duplicate config key '{key}' (line {})",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override on top of the file contents.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("override must look like key=value, got '{spec}'"))
        })?;
        let key = key.trim();
        check_key(key)?;
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Canonical text form: sorted `key = value` lines. Parsing the snapshot
    /// reproduces the config exactly.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing required config key '{key}'")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': expected a number, got '{v}'"))),
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key '{key}': expected a number, got '{v}'"))),
        }
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("key '{key}': expected an integer, got '{v}'"))
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!("key '{key}': expected an integer, got '{v}'"))
            }),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!("key '{key}': expected an integer, got '{v}'"))
            }),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|t| {
                t.trim().parse().map_err(|_| {
                    Error::Config(format!("key '{key}': expected numbers, got '{t}'"))
                })
            })
            .collect()
    }

    pub fn usize_list_opt(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| {
                        Error::Config(format!("key '{key}': expected integers, got '{t}'"))
                    })
                })
                .collect::<std::result::Result<Vec<usize>, Error>>()
                .map(Some),
        }
    }

    pub fn f64_list_opt(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.f64_list(key).map(Some),
        }
    }

    /// Builds the kernel from `kernel.family`, `kernel.variance`,
    /// `kernel.dim`.
    pub fn kernel(&self) -> Result<Kernel> {
        let family = self.str_or("kernel.family", "gaussian");
        if family != "gaussian" {
            return Err(Error::Config(format!(
                "key 'kernel.family': unknown family '{family}' (supported: gaussian)"
            )));
        }
        let variance = self.f64_or("kernel.variance", 2.0)?;
        let dim = self.usize_or("kernel.dim", 1)?;
        Kernel::gaussian(variance, dim)
    }

    /// Builds the potential from `potential.family` and
    /// `potential.coefficients`.
    ///
    /// Coefficient meaning per family: `quadratic` takes per-axis
    /// stiffnesses (one entry broadcasts), `monomial` takes
    /// `magnitude, power`, `double-well` takes `stiffness, well`.
    pub fn potential(&self) -> Result<Potential> {
        let dim = self.usize_or("kernel.dim", 1)?;
        match self.str_or("potential.family", "quadratic") {
            "quadratic" => {
                let coeffs = match self.raw("potential.coefficients") {
                    None => vec![1.0; dim],
                    Some(_) => {
                        let list = self.f64_list("potential.coefficients")?;
                        if list.len() == 1 {
                            vec![list[0]; dim]
                        } else {
                            list
                        }
                    }
                };
                Potential::quadratic(coeffs, dim)
            }
            "monomial" => {
                let list = self.f64_list("potential.coefficients")?;
                if list.len() != 2 || list[1].fract() != 0.0 || list[1] < 2.0 {
                    return Err(Error::Config(
                        "key 'potential.coefficients': monomial needs 'magnitude, power' \
                         with an integer power >= 2"
                            .into(),
                    ));
                }
                Potential::monomial(list[0], list[1] as u32, dim)
            }
            "double-well" => {
                let list = self.f64_list("potential.coefficients")?;
                if list.len() != 2 {
                    return Err(Error::Config(
                        "key 'potential.coefficients': double-well needs 'stiffness, well'"
                            .into(),
                    ));
                }
                Potential::double_well(list[0], list[1])
            }
            other => Err(Error::Config(format!(
                "key 'potential.family': unknown family '{other}' \
                 (supported: quadratic, monomial, double-well)"
            ))),
        }
    }

    /// Builds the initial density from the `init.*` keys.
    pub fn initial_density(&self) -> Result<InitialDensity> {
        match self.str_or("init.family", "gaussian") {
            "gaussian" => InitialDensity::gaussian(
                self.f64_or("init.mean", 0.0)?,
                self.f64_or("init.std", 1.0)?,
            ),
            "mixture" => {
                let raw = self.require("init.components")?;
                let mut components = Vec::new();
                for part in raw.split(';') {
                    let fields: Vec<&str> = part.split(':').map(|t| t.trim()).collect();
                    if fields.len() != 3 {
                        return Err(Error::Config(format!(
                            "key 'init.components': expected 'weight:mean:std' triples \
                             separated by ';', got '{part}'"
                        )));
                    }
                    let parse = |t: &str| -> Result<f64> {
                        t.parse().map_err(|_| {
                            Error::Config(format!(
                                "key 'init.components': expected a number, got '{t}'"
                            ))
                        })
                    };
                    components.push(MixtureComponent {
                        weight: parse(fields[0])?,
                        mean: parse(fields[1])?,
                        std: parse(fields[2])?,
                    });
                }
                InitialDensity::mixture(components)
            }
            other => Err(Error::Config(format!(
                "key 'init.family': unknown family '{other}' (supported: gaussian, mixture)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_sections_and_values() {
        let cfg = RunConfig::parse(
            "# a run\nkernel.variance = 2.0  # canonical\n\nsimulate.n = 64\n\
             potential.family = quadratic\n",
        )
        .unwrap();
        assert_eq!(cfg.f64_or("kernel.variance", 0.0).unwrap(), 2.0);
        assert_eq!(cfg.usize_or("simulate.n", 0).unwrap(), 64);
        assert_eq!(cfg.str_or("potential.family", ""), "quadratic");
        assert_eq!(cfg.f64_or("integrator.dt", 0.01).unwrap(), 0.01);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = RunConfig::parse("simulte.n = 64\n").unwrap_err();
        assert!(err.to_string().contains("simulte.n"), "{err}");
        let mut cfg = RunConfig::default();
        let err = cfg.apply_override("kernel.varince=3").unwrap_err();
        assert!(err.to_string().contains("kernel.varince"), "{err}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = RunConfig::parse("simulate.n = 64\nsimulate.n = 65\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(err.to_string().contains("simulate.n"), "{err}");
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut cfg = RunConfig::parse("simulate.n = 64\n").unwrap();
        cfg.apply_override("simulate.n = 128").unwrap();
        assert_eq!(cfg.usize_or("simulate.n", 0).unwrap(), 128);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::parse("simulate.n = 64\nkernel.variance = 2.0\n").unwrap();
        cfg.apply_override("integrator.dt=0.01").unwrap();
        let snap = cfg.snapshot();
        let again = RunConfig::parse(&snap).unwrap();
        assert_eq!(again.snapshot(), snap);
    }

    #[test]
    fn builders_construct_typed_objects() {
        let cfg = RunConfig::parse(
            "kernel.variance = 2.0\npotential.family = monomial\n\
             potential.coefficients = 1.0, 4\ninit.family = mixture\n\
             init.components = 0.5:-1:0.5; 0.5:1.5:0.7\n",
        )
        .unwrap();
        let k = cfg.kernel().unwrap();
        assert_eq!(k.dim(), 1);
        let v = cfg.potential().unwrap();
        assert!((v.value_1d(2.0) - 16.0).abs() < 1e-12);
        let init = cfg.initial_density().unwrap();
        assert!(init.density(0.2) > 0.0);
    }

    #[test]
    fn malformed_lines_and_values_error() {
        assert!(RunConfig::parse("just words\n").is_err());
        let cfg = RunConfig::parse("simulate.n = sixty\n").unwrap();
        assert!(cfg.usize_or("simulate.n", 0).is_err());
        let cfg = RunConfig::parse("potential.family = cubic\n").unwrap();
        assert!(cfg.potential().unwrap_err().to_string().contains("cubic"));
    }
}
