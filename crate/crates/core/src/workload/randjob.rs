//! Random well-typed jobs and datasets over a small fixed schema, for
//! differential testing of the analyzer, planner and engine.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::{print_schema, ScalarType, Schema};
use crate::value::{Record, Value};

pub fn rand_schema() -> Schema {
    Schema::new(
        "R",
        &[
            ("id", ScalarType::I64),
            ("a", ScalarType::I32),
            ("b", ScalarType::I64),
            ("s", ScalarType::Str),
            ("t", ScalarType::Str),
        ],
    )
}

/// Records with heavily repeated keys and small value domains, so random
/// predicates split them in interesting ways.
pub fn random_records(seed: u64, n: usize) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tlen = rng.random_range(0..=4);
            let t: String = (0..tlen).map(|_| *b"abc".choose(&mut rng).expect("nonempty") as char).collect();
            vec![
                Value::I64(rng.random_range(0..40)),
                Value::I32(rng.random_range(-100..=100)),
                Value::I64(rng.random_range(-1000..=1000)),
                Value::Str(format!("s{}", rng.random_range(0..10))),
                Value::Str(t),
            ]
        })
        .collect()
}

/// Features beyond straight-line, branch-only, stateless map bodies.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandJobOptions {
    /// A member counter and the per-task table.
    pub stateful: bool,
    pub loops: bool,
    pub logs: bool,
}

impl RandJobOptions {
    pub fn all() -> Self {
        RandJobOptions { stateful: true, loops: true, logs: true }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Str,
}

struct Gen {
    rng: ChaCha8Rng,
    opts: RandJobOptions,
    scopes: Vec<Vec<(String, Ty)>>,
    fresh: usize,
    key_ty: Ty,
    emits: usize,
    in_loop: bool,
}

const CMP: &[&str] = &["<", "<=", ">", ">=", "==", "!="];

impl Gen {
    fn var(&mut self, ty: Ty) -> Option<String> {
        let vars: Vec<&String> = self.scopes.iter().flatten().filter(|(_, t)| *t == ty).map(|(n, _)| n).collect();
        vars.choose(&mut self.rng).map(|s| s.to_string())
    }

    /// Always typed i64: `v.a` only appears next to an i64 operand.
    fn int(&mut self, depth: u32) -> String {
        let leaf = depth == 0 || self.rng.random_ratio(1, 2);
        if leaf {
            return match self.rng.random_range(0..7) {
                0 => self.rng.random_range(-50..=50).to_string(),
                1 => "v.b".into(),
                2 => "k".into(),
                3 => "len(v.t)".into(),
                4 => "(v.a + v.b)".into(),
                _ => self.var(Ty::Int).unwrap_or_else(|| "v.b".into()),
            };
        }
        let l = self.int(depth - 1);
        match self.rng.random_range(0..3) {
            0 => format!("({l} + {})", self.int(depth - 1)),
            1 => format!("({l} - {})", self.int(depth - 1)),
            _ => format!("({l} * {})", self.rng.random_range(-3..=3)),
        }
    }

    fn string(&mut self, depth: u32) -> String {
        let leaf = depth == 0 || self.rng.random_ratio(1, 2);
        if leaf {
            return match self.rng.random_range(0..6) {
                0 => "v.s".into(),
                1 => "v.t".into(),
                2 => format!("\"{}\"", ["s1", "s5", "a", "ab", ""].choose(&mut self.rng).expect("nonempty")),
                _ => self.var(Ty::Str).unwrap_or_else(|| "v.t".into()),
            };
        }
        match self.rng.random_range(0..4) {
            0 => format!("({} ++ {})", self.string(depth - 1), self.string(depth - 1)),
            1 => format!("substr({}, 0, {})", self.string(depth - 1), self.rng.random_range(0..3)),
            2 => format!("to_str({})", self.int(depth - 1)),
            _ => format!("to_lower({})", self.string(depth - 1)),
        }
    }

    fn cond(&mut self, depth: u32) -> String {
        let op = *CMP.choose(&mut self.rng).expect("nonempty");
        if depth == 0 || self.rng.random_ratio(2, 5) {
            return match self.rng.random_range(0..9) {
                0 | 1 => format!("v.a {op} {}", self.rng.random_range(-100..=100)),
                2 => format!("{} {op} {}", self.int(1), self.int(1)),
                3 => format!("v.b {op} {}", self.rng.random_range(-1000..=1000)),
                4 => format!("v.s {op} \"s{}\"", self.rng.random_range(0..10)),
                5 => format!("{} {op} {}", self.string(1), self.string(1)),
                6 => format!("contains(v.t, \"{}\")", ["a", "b", "ab", "ca"].choose(&mut self.rng).expect("nonempty")),
                7 if self.opts.stateful && self.rng.random_ratio(1, 2) => {
                    if self.rng.random_ratio(1, 2) {
                        format!("n {op} {}", self.rng.random_range(0..20))
                    } else {
                        "table_get(v.s)".into()
                    }
                }
                _ => format!("starts_with(v.t, \"{}\")", ["a", "b", "c"].choose(&mut self.rng).expect("nonempty")),
            };
        }
        match self.rng.random_range(0..3) {
            0 => format!("!({})", self.cond(depth - 1)),
            1 => format!("({} && {})", self.cond(depth - 1), self.cond(depth - 1)),
            _ => format!("({} || {})", self.cond(depth - 1), self.cond(depth - 1)),
        }
    }

    fn emit(&mut self) -> String {
        self.emits += 1;
        let key = match self.key_ty {
            Ty::Int => match self.rng.random_range(0..3) {
                0 => "k".into(),
                1 => "v.b".into(),
                _ => self.int(1),
            },
            Ty::Str => match self.rng.random_range(0..3) {
                0 => "v.s".into(),
                1 => "v.t".into(),
                _ => self.string(1),
            },
        };
        format!("emit({key}, {});", self.int(2))
    }

    fn block(&mut self, depth: u32, out: &mut String, indent: usize) {
        let pad = "    ".repeat(indent);
        let n = self.rng.random_range(1..=4);
        for _ in 0..n {
            let roll = self.rng.random_range(0..12);
            match roll {
                0 | 1 => {
                    let ty = if self.rng.random_ratio(1, 2) { Ty::Int } else { Ty::Str };
                    let name = format!("x{}", self.fresh);
                    self.fresh += 1;
                    let e = if ty == Ty::Int { self.int(2) } else { self.string(2) };
                    out.push_str(&format!("{pad}let {name} = {e};\n"));
                    self.scopes.last_mut().expect("scope").push((name, ty));
                }
                2 => {
                    let ty = if self.rng.random_ratio(1, 2) { Ty::Int } else { Ty::Str };
                    if let Some(name) = self.var(ty) {
                        let e = if ty == Ty::Int { self.int(2) } else { self.string(2) };
                        out.push_str(&format!("{pad}{name} = {e};\n"));
                    }
                }
                3..=5 if depth > 0 => {
                    let c = self.cond(2);
                    out.push_str(&format!("{pad}if ({c}) {{\n"));
                    self.scoped(depth - 1, out, indent + 1);
                    if self.rng.random_ratio(1, 2) {
                        out.push_str(&format!("{pad}}} else {{\n"));
                        self.scoped(depth - 1, out, indent + 1);
                    }
                    out.push_str(&format!("{pad}}}\n"));
                }
                6 if self.opts.loops && depth > 0 && !self.in_loop => {
                    let i = format!("i{}", self.fresh);
                    self.fresh += 1;
                    let bound = self.rng.random_range(0..3);
                    out.push_str(&format!("{pad}let {i} = 0;\n{pad}while ({i} < {bound}) {{\n"));
                    out.push_str(&format!("{pad}    {i} = {i} + 1;\n"));
                    self.in_loop = true;
                    self.scoped(depth - 1, out, indent + 1);
                    self.in_loop = false;
                    out.push_str(&format!("{pad}}}\n"));
                }
                7 if self.opts.stateful => {
                    if self.rng.random_ratio(1, 2) {
                        out.push_str(&format!("{pad}n = n + 1;\n"));
                    } else {
                        out.push_str(&format!("{pad}table_put(v.s);\n"));
                    }
                }
                8 if self.opts.logs => out.push_str(&format!("{pad}log(v.s);\n")),
                _ => {
                    let e = self.emit();
                    out.push_str(&format!("{pad}{e}\n"));
                }
            }
        }
    }

    fn scoped(&mut self, depth: u32, out: &mut String, indent: usize) {
        self.scopes.push(Vec::new());
        self.block(depth, out, indent);
        self.scopes.pop();
    }
}

/// A random job source over [`rand_schema`].
pub fn random_job(seed: u64, opts: RandJobOptions) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        opts,
        scopes: vec![Vec::new()],
        fresh: 0,
        key_ty: Ty::Int,
        emits: 0,
        in_loop: false,
    };
    g.key_ty = if g.rng.random_ratio(1, 2) { Ty::Int } else { Ty::Str };
    let mut body = String::new();
    g.block(3, &mut body, 2);
    if g.emits == 0 {
        let e = g.emit();
        body.push_str(&format!("        {e}\n"));
    }
    let reduce = match g.rng.random_range(0..3) {
        0 => "let acc = 0; while (has_next(vals)) { acc = acc + next(vals); } emit(k, acc);",
        1 => "let c = 0; while (has_next(vals)) { let x = next(vals); c = c + 1; } emit(k, c);",
        _ => "let m = 0 - 1000000000; while (has_next(vals)) { let x = next(vals); if (x > m) { m = x; } } emit(k, m);",
    };
    let members = if opts.stateful { "    members { n: i64 = 0; }\n" } else { "" };
    format!(
        "{}job Rand{seed} on R {{\n{members}    map(k, v) {{\n{body}    }}\n    reduce(k, vals) {{ {reduce} }}\n}}\n",
        print_schema(&rand_schema())
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load_job;

    #[test]
    fn generated_jobs_typecheck() {
        for seed in 0..300 {
            let opts = if seed % 2 == 0 { RandJobOptions::default() } else { RandJobOptions::all() };
            let src = random_job(seed, opts);
            load_job(&src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(random_job(5, RandJobOptions::all()), random_job(5, RandJobOptions::all()));
        assert_eq!(random_records(5, 10), random_records(5, 10));
    }
}
