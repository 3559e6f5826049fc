//! `.lal` source files: `name = term ;` definitions and `name : formula ;`
//! type annotations. A definition may mention any earlier name; the loader
//! expands those references by substitution.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::formula::{parse_formula_at, Formula};
use crate::syntax::{Cursor, SyntaxError, Tok};
use crate::term::{parse_term_at, substitute, Term};

/// The prelude shipped with the crate.
pub const PRELUDE: &str = include_str!("../prelude.lal");

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("`{0}` is defined twice")]
    Duplicate(String),
    #[error("`{0}` is annotated twice")]
    DuplicateType(String),
}

#[derive(Debug, Clone, Default)]
pub struct Program {
    /// Definitions in source order, already expanded.
    defs: Vec<(String, Term)>,
    /// The same definitions as written, referring to earlier names.
    raw: Vec<(String, Term)>,
    types: BTreeMap<String, Formula>,
}

impl Program {
    pub fn parse(src: &str) -> Result<Program, LoadError> {
        let mut p = Program::default();
        p.load(src)?;
        Ok(p)
    }

    /// Appends the items of `src`; its definitions see everything loaded so far.
    pub fn load(&mut self, src: &str) -> Result<(), LoadError> {
        let mut cur = Cursor::new(src)?;
        while !cur.at_eof() {
            let name = cur.ident()?;
            match cur.bump() {
                Tok::Eq => {
                    let raw = parse_term_at(&mut cur)?;
                    cur.expect(&Tok::Semi)?;
                    if self.get(&name).is_some() {
                        return Err(LoadError::Duplicate(name));
                    }
                    let env: BTreeMap<String, Term> = self.defs.iter().cloned().collect();
                    self.defs.push((name.clone(), substitute(&raw, &env)));
                    self.raw.push((name, raw));
                }
                Tok::Colon => {
                    let ty = parse_formula_at(&mut cur)?;
                    cur.expect(&Tok::Semi)?;
                    if self.types.insert(name.clone(), ty).is_some() {
                        return Err(LoadError::DuplicateType(name));
                    }
                }
                other => {
                    return Err(cur.error(format!("expected `=` or `:` after a name, found {other}")).into())
                }
            }
        }
        Ok(())
    }

    pub fn with_prelude(src: &str) -> Result<Program, LoadError> {
        let mut p = Program::parse(PRELUDE)?;
        p.load(src)?;
        Ok(p)
    }

    pub fn get(&self, name: &str) -> Option<&Term> {
        self.defs.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn raw(&self, name: &str) -> Option<&Term> {
        self.raw.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn raw_definitions(&self) -> &[(String, Term)] {
        &self.raw
    }

    pub fn declared_type(&self, name: &str) -> Option<&Formula> {
        self.types.get(name)
    }

    pub fn definitions(&self) -> &[(String, Term)] {
        &self.defs
    }

    pub fn types(&self) -> &BTreeMap<String, Formula> {
        &self.types
    }

    /// The entry point: `main` if defined, else the last definition.
    pub fn main(&self) -> Option<(&str, &Term)> {
        self.defs.iter().find(|(n, _)| n == "main").or_else(|| self.defs.last()).map(|(n, t)| (n.as_str(), t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::alpha_eq_formula;
    use crate::stdlib;
    use crate::term::{alpha_eq, free_vars};

    #[test]
    fn prelude_matches_stdlib() {
        let p = Program::parse(PRELUDE).unwrap();
        for d in stdlib::corpus() {
            let t = p.get(d.name).unwrap_or_else(|| panic!("{} missing", d.name));
            assert!(alpha_eq(t, &d.term), "{}", d.name);
            assert!(free_vars(t).is_empty(), "{}", d.name);
        }
        for n in 0..=3 {
            let name = ["zero", "one", "two", "three"][n];
            assert!(alpha_eq(p.get(name).unwrap(), &stdlib::numeral(n)));
        }
        let int = p.declared_type("zero").unwrap();
        assert!(alpha_eq_formula(int, &stdlib::int()));
    }

    #[test]
    fn expansion_and_main() {
        let p = Program::with_prelude("x = succ one ; main = pred x ;").unwrap();
        let (name, t) = p.main().unwrap();
        assert_eq!(name, "main");
        assert!(free_vars(t).is_empty());
        let q = Program::parse("a = \\x. x ; b = a a ;").unwrap();
        assert_eq!(q.main().unwrap().0, "b");
    }

    #[test]
    fn load_errors() {
        assert!(matches!(Program::parse("a = x ; a = y ;"), Err(LoadError::Duplicate(_))));
        let e = Program::parse("a = \\x. ;").unwrap_err();
        assert!(matches!(e, LoadError::Syntax(SyntaxError { line: 1, col: 9, .. })));
        assert!(Program::parse("a b").is_err());
    }
}
