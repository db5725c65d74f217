//! Line-oriented model definition language.
//!
//! ```text
//! # Lotka-Volterra
//! species X ~ poisson(50)
//! species Y ~ poisson(100)
//! param th1
//! reaction prey_birth: X -> 2X @ mass_action(th1)
//! reaction decay: Y -> 0 @ mass_action(th3)
//! reaction tx: 0 -> R @ expr(b0*exp(-b1*(t-b2)^2)+b3)
//! prior th1 ~ log_uniform(-8, 8)
//! obs X ~ gaussian(10)
//! ```
//!
//! Declarations may appear in any order; `#` starts a comment.

use std::fmt::Write as _;

use super::expr::{parse_expr, Scope};
use super::{HazardSpec, InitSpec, Marginal, Model, Reaction};
use crate::error::{Error, Result};
use crate::observation::{Noise, ObsChannel, ObsModel};

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn expect_end(&mut self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(format!("unexpected `{}`", self.rest())))
        }
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.pos + n <= self.chars.len()
            && self.chars[self.pos..self.pos + n]
                .iter()
                .copied()
                .eq(s.chars())
        {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        if !matches!(self.chars.get(self.pos), Some(c) if c.is_alphabetic() || *c == '_') {
            return Err(self.err("expected identifier"));
        }
        while matches!(self.chars.get(self.pos), Some(c) if c.is_alphanumeric() || *c == '_') {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.chars.get(self.pos), Some(c) if c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.err(format!("expected number, found `{text}`"))
        })
    }

    fn uint(&mut self) -> Option<u32> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.chars.get(self.pos), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        self.chars[start..self.pos]
            .iter()
            .collect::<String>()
            .parse()
            .ok()
    }

    /// Consumes up to the matching close paren; returns the enclosed text and its column offset.
    fn balanced(&mut self) -> Result<(String, usize)> {
        let start = self.pos;
        let mut depth = 1;
        while let Some(&c) = self.chars.get(self.pos) {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        let inner = self.chars[start..self.pos].iter().collect();
                        self.pos += 1;
                        return Ok((inner, start));
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        self.pos = start;
        Err(self.err("unbalanced parentheses"))
    }
}

fn distribution(c: &mut Cursor) -> Result<Marginal> {
    let name = c.ident()?;
    c.expect("(")?;
    let m = if name == "shifted" {
        let offset = c.number()?;
        c.expect(",")?;
        let base = distribution(c)?;
        Marginal::Shifted {
            offset,
            base: Box::new(base),
        }
    } else {
        let mut args = Vec::new();
        if c.peek() != Some(')') {
            loop {
                args.push(c.number()?);
                if !c.eat(",") {
                    break;
                }
            }
        }
        let arity = |n: usize, c: &Cursor| {
            if args.len() == n {
                Ok(())
            } else {
                Err(c.err(format!(
                    "`{name}` takes {n} argument(s), got {}",
                    args.len()
                )))
            }
        };
        match name.as_str() {
            "uniform" => {
                arity(2, c)?;
                Marginal::Uniform {
                    low: args[0],
                    high: args[1],
                }
            }
            "log_uniform" => {
                arity(2, c)?;
                Marginal::LogUniform {
                    low: args[0],
                    high: args[1],
                }
            }
            "gamma" => {
                arity(2, c)?;
                Marginal::Gamma {
                    shape: args[0],
                    rate: args[1],
                }
            }
            "exponential" => {
                arity(1, c)?;
                Marginal::Exponential { rate: args[0] }
            }
            "poisson" => {
                arity(1, c)?;
                Marginal::Poisson { rate: args[0] }
            }
            "geometric" => {
                arity(1, c)?;
                Marginal::Geometric { p: args[0] }
            }
            "point" => {
                arity(1, c)?;
                Marginal::PointMass { value: args[0] }
            }
            other => return Err(c.err(format!("unknown distribution `{other}`"))),
        }
    };
    c.expect(")")?;
    Ok(m)
}

fn side(c: &mut Cursor, species: &[String], stop: &str) -> Result<Vec<u32>> {
    let mut coeffs = vec![0u32; species.len()];
    if c.eat("∅") || c.rest().trim_start().starts_with(stop) {
        return Ok(coeffs);
    }
    loop {
        let k = c.uint();
        if k == Some(0) {
            if coeffs.iter().all(|&n| n == 0) && c.rest().trim_start().starts_with(stop) {
                return Ok(coeffs);
            }
            return Err(c.err("zero coefficient"));
        }
        let name = c.ident()?;
        let j = species
            .iter()
            .position(|s| *s == name)
            .ok_or(Error::UnknownSpecies(name))?;
        coeffs[j] += k.unwrap_or(1);
        if !c.eat("+") {
            return Ok(coeffs);
        }
    }
}

struct Line {
    number: usize,
    keyword: String,
    cursor: Cursor,
}

/// Parses a model definition.
pub fn parse_model(source: &str) -> Result<Model> {
    if source.trim().is_empty() {
        return Err(Error::Syntax {
            line: 1,
            column: 1,
            message: "empty model".into(),
        });
    }
    let mut lines = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let text = raw.split('#').next().unwrap_or("");
        if text.trim().is_empty() {
            continue;
        }
        let mut cursor = Cursor::new(text, i + 1);
        let keyword = cursor.ident()?;
        if !matches!(
            keyword.as_str(),
            "species" | "param" | "prior" | "reaction" | "obs"
        ) {
            cursor.pos = 0;
            cursor.skip_ws();
            return Err(cursor.err(format!("unknown declaration `{keyword}`")));
        }
        lines.push(Line {
            number: i + 1,
            keyword,
            cursor,
        });
    }
    let keywords: Vec<String> = lines.iter().map(|l| l.keyword.clone()).collect();
    let of =
        |kw: &str| -> Vec<usize> { (0..keywords.len()).filter(|&i| keywords[i] == kw).collect() };

    // species and parameters first, so later declarations may refer to either
    let mut species = Vec::new();
    let mut raw_init = Vec::new();
    for i in of("species") {
        let c = &mut lines[i].cursor;
        let name = c.ident()?;
        if species.contains(&name) {
            return Err(Error::InvalidModel(format!("duplicate species `{name}`")));
        }
        species.push(name);
        raw_init.push(i);
    }
    let mut params = Vec::new();
    for i in of("param") {
        let c = &mut lines[i].cursor;
        loop {
            let name = c.ident()?;
            if params.contains(&name) {
                return Err(Error::InvalidModel(format!("duplicate parameter `{name}`")));
            }
            params.push(name);
            if !c.eat(",") {
                break;
            }
        }
        c.expect_end()?;
    }

    let mut initial = Vec::new();
    for (k, i) in raw_init.into_iter().enumerate() {
        let c = &mut lines[i].cursor;
        let init = if c.at_end() {
            InitSpec::Fixed(0)
        } else if c.eat("=") {
            if c.eat("observed") {
                InitSpec::Observed
            } else {
                let v = c.number()?;
                if v.fract() != 0.0 || v < 0.0 {
                    return Err(c.err(format!(
                        "initial count must be a non-negative integer, got {v}"
                    )));
                }
                InitSpec::Fixed(v as i64)
            }
        } else if c.eat("~") {
            let save = c.pos;
            let name = c.ident()?;
            if c.eat("+") {
                let j = species[..k]
                    .iter()
                    .position(|s| *s == name)
                    .ok_or_else(|| Error::UnknownSpecies(name.clone()))?;
                InitSpec::Offset {
                    species: j,
                    name,
                    offset: distribution(c)?,
                }
            } else {
                c.pos = save;
                InitSpec::Random(distribution(c)?)
            }
        } else {
            return Err(c.err("expected `=` or `~`"));
        };
        c.expect_end()?;
        initial.push(init);
    }

    let mut reactions: Vec<Reaction> = Vec::new();
    for i in of("reaction") {
        let line = lines[i].number;
        let c = &mut lines[i].cursor;
        let name = c.ident()?;
        if reactions.iter().any(|r| r.name == name) {
            return Err(Error::DuplicateReaction(name));
        }
        c.expect(":")?;
        let pre = side(c, &species, "->")?;
        c.expect("->")?;
        let post = side(c, &species, "@")?;
        c.expect("@")?;
        let kind = c.ident()?;
        c.expect("(")?;
        let hazard = match kind.as_str() {
            "mass_action" => {
                let p = c.ident()?;
                c.expect(")")?;
                let param = params
                    .iter()
                    .position(|q| *q == p)
                    .ok_or(Error::UndeclaredParameter(p))?;
                HazardSpec::MassAction { param }
            }
            "expr" => {
                let (text, offset) = c.balanced()?;
                let scope = Scope {
                    species: &species,
                    params: &params,
                };
                HazardSpec::Expression(
                    parse_expr(&text, &scope).map_err(|e| e.into_error(line, offset))?,
                )
            }
            other => return Err(c.err(format!("unknown hazard `{other}`"))),
        };
        c.expect_end()?;
        reactions.push(Reaction {
            name,
            pre,
            post,
            hazard,
        });
    }

    let mut priors = vec![None; params.len()];
    for i in of("prior") {
        let c = &mut lines[i].cursor;
        let name = c.ident()?;
        let k = params
            .iter()
            .position(|p| *p == name)
            .ok_or_else(|| Error::UndeclaredParameter(name.clone()))?;
        if priors[k].is_some() {
            return Err(Error::InvalidModel(format!("duplicate prior for `{name}`")));
        }
        c.expect("~")?;
        priors[k] = Some(distribution(c)?);
        c.expect_end()?;
    }

    let mut channels = Vec::new();
    for i in of("obs") {
        let c = &mut lines[i].cursor;
        let name = c.ident()?;
        let j = species
            .iter()
            .position(|s| *s == name)
            .ok_or_else(|| Error::UnknownSpecies(name.clone()))?;
        c.expect("~")?;
        let kind = c.ident()?;
        c.expect("(")?;
        let noise = match kind.as_str() {
            "gaussian" => Noise::Gaussian { sd: c.number()? },
            "poisson" => Noise::Poisson,
            other => return Err(c.err(format!("unknown noise model `{other}`"))),
        };
        c.expect(")")?;
        c.expect_end()?;
        channels.push(ObsChannel {
            species: j,
            name,
            noise,
        });
    }

    Model::new(
        species,
        initial,
        params,
        priors,
        reactions,
        ObsModel::new(channels)?,
    )
}

fn render_side(model: &Model, coeffs: &[u32]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .zip(model.species())
        .filter(|(&k, _)| k > 0)
        .map(|(&k, s)| if k == 1 { s.clone() } else { format!("{k}{s}") })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Canonical text form; `parse_model(&render_model(m))` reproduces `m`.
pub fn render_model(model: &Model) -> String {
    let mut out = String::new();
    for (s, init) in model.species().iter().zip(model.initial()) {
        let _ = writeln!(out, "species {s} {init}");
    }
    for p in model.params() {
        let _ = writeln!(out, "param {p}");
    }
    for r in model.reactions() {
        let hazard = match &r.hazard {
            HazardSpec::MassAction { param } => format!("mass_action({})", model.params()[*param]),
            HazardSpec::Expression(e) => format!("expr({e})"),
        };
        let _ = writeln!(
            out,
            "reaction {}: {} -> {} @ {hazard}",
            r.name,
            render_side(model, &r.pre),
            render_side(model, &r.post)
        );
    }
    for (p, m) in model.params().iter().zip(model.priors()) {
        if let Some(m) = m {
            let _ = writeln!(out, "prior {p} ~ {m}");
        }
    }
    for ch in model.obs_model().channels() {
        let _ = writeln!(out, "obs {} ~ {}", ch.name, ch.noise);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    const LV: &str = "
        species X ~ poisson(50)
        species Y ~ poisson(100)
        param th1, th2, th3
        reaction R1: X -> 2X @ mass_action(th1)
        reaction R2: X + Y -> 2Y @ mass_action(th2)
        reaction R3: Y -> 0 @ mass_action(th3)   # predator death
        prior th1 ~ log_uniform(-8, 8)
        prior th2 ~ log_uniform(-8, 8)
        prior th3 ~ log_uniform(-8, 8)
        obs X ~ gaussian(10)
        obs Y ~ gaussian(10)
    ";

    #[test]
    fn lotka_volterra() {
        let m = parse_model(LV).unwrap();
        assert_eq!(m.n_species(), 2);
        assert_eq!(m.n_reactions(), 3);
        assert_eq!(
            m.stoichiometry(),
            DMatrix::from_row_slice(2, 3, &[1, -1, 0, 0, 1, -1])
        );
        assert_eq!(parse_model(&render_model(&m)).unwrap(), m);
    }

    #[test]
    fn aphid() {
        let src = "
            species N = observed
            species C ~ N + geometric(0.03)
            param lambda
            param mu
            reaction birth: N -> 2N + C @ mass_action(lambda)
            reaction death: N + C -> C @ mass_action(mu)
            obs N ~ poisson()
        ";
        let m = parse_model(src).unwrap();
        assert_eq!(
            m.stoichiometry(),
            DMatrix::from_row_slice(2, 2, &[1, -1, 1, 0])
        );
        assert!(matches!(m.prior(), Err(Error::MissingPrior(p)) if p == "lambda"));
        assert_eq!(parse_model(&render_model(&m)).unwrap(), m);
    }

    #[test]
    fn errors() {
        let undeclared_species =
            "species X = 1\nparam k\nreaction r: X + Z -> X @ mass_action(k)\n";
        assert!(
            matches!(parse_model(undeclared_species), Err(Error::UnknownSpecies(s)) if s == "Z")
        );

        let dup = "species X = 1\nparam k\nreaction r: X -> 0 @ mass_action(k)\nreaction r: 0 -> X @ mass_action(k)\n";
        assert!(matches!(parse_model(dup), Err(Error::DuplicateReaction(r)) if r == "r"));

        let undeclared_param = "species X = 1\nreaction r: X -> 0 @ mass_action(k)\n";
        assert!(
            matches!(parse_model(undeclared_param), Err(Error::UndeclaredParameter(p)) if p == "k")
        );

        let undeclared_in_expr = "species X = 1\nparam a\nreaction r: 0 -> X @ expr(a*q)\n";
        assert!(
            matches!(parse_model(undeclared_in_expr), Err(Error::UndeclaredParameter(p)) if p == "q")
        );

        let bad = "species X = 1\nparam k\nreaction r X -> 0 @ mass_action(k)\n";
        assert!(matches!(
            parse_model(bad),
            Err(Error::Syntax {
                line: 3,
                column: 12,
                ..
            })
        ));

        let bad_expr = "species X = 1\nparam k\nreaction r: 0 -> X @ expr(k*(X)\n";
        assert!(matches!(
            parse_model(bad_expr),
            Err(Error::Syntax { line: 3, .. })
        ));

        let bad_expr = "species X = 1\nparam k\nreaction r: 0 -> X @ expr(k * $)\n";
        assert!(matches!(
            parse_model(bad_expr),
            Err(Error::Syntax {
                line: 3,
                column: 31,
                ..
            })
        ));

        assert!(matches!(parse_model("  \n"), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_model("specie X = 1\n"),
            Err(Error::Syntax {
                line: 1,
                column: 1,
                ..
            })
        ));
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,5}".prop_filter("reserved", |s| {
            !matches!(s.as_str(), "t" | "exp" | "log" | "sqrt")
        })
    }

    fn marginal() -> impl Strategy<Value = Marginal> {
        prop_oneof![
            (-9.0f64..0.0, 0.5f64..9.0).prop_map(|(low, high)| Marginal::LogUniform { low, high }),
            (-9.0f64..0.0, 0.5f64..9.0).prop_map(|(low, high)| Marginal::Uniform { low, high }),
            (0.1f64..30.0, 0.1f64..60.0).prop_map(|(shape, rate)| Marginal::Gamma { shape, rate }),
            (0.001f64..5.0).prop_map(|rate| Marginal::Exponential { rate }),
        ]
    }

    fn model() -> impl Strategy<Value = Model> {
        (
            proptest::collection::hash_set(ident(), 1..4),
            proptest::collection::hash_set(ident(), 1..4),
            1usize..5,
        )
            .prop_filter("names disjoint", |(s, p, _)| s.is_disjoint(p))
            .prop_flat_map(|(species, params, v)| {
                let species: Vec<String> = species.into_iter().collect();
                let params: Vec<String> = params.into_iter().collect();
                let (u, np) = (species.len(), params.len());
                (
                    Just(species),
                    Just(params),
                    proptest::collection::vec(
                        (
                            proptest::collection::vec(0u32..3, u),
                            proptest::collection::vec(0u32..3, u),
                            0..np,
                        ),
                        v,
                    ),
                    proptest::collection::vec(proptest::option::of(marginal()), np),
                    proptest::collection::vec(0i64..200, u),
                )
            })
            .prop_map(|(species, params, rs, priors, init)| {
                let reactions = rs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (pre, post, p))| Reaction {
                        name: format!("r{i}"),
                        pre,
                        post,
                        hazard: if i % 2 == 0 {
                            HazardSpec::MassAction { param: p }
                        } else {
                            let scope = Scope {
                                species: &species,
                                params: &params,
                            };
                            let src = format!("{}*({}+t)^2/2", params[p], species[0]);
                            HazardSpec::Expression(parse_expr(&src, &scope).unwrap())
                        },
                    })
                    .collect();
                let initial = init.into_iter().map(InitSpec::Fixed).collect();
                let obs = ObsModel::new(vec![ObsChannel {
                    species: 0,
                    name: species[0].clone(),
                    noise: Noise::Gaussian { sd: 2.5 },
                }])
                .unwrap();
                Model::new(species, initial, params, priors, reactions, obs).unwrap()
            })
    }

    proptest! {
        #[test]
        fn render_round_trips(m in model()) {
            let text = render_model(&m);
            prop_assert_eq!(parse_model(&text).unwrap(), m);
        }
    }
}
