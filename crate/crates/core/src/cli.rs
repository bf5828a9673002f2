//! Command-line front end.

use std::io::Write;

use clap::{Parser, Subcommand, ValueEnum};
use rug::Integer;

use crate::classpoly::{build_pd, build_pl, ClassPolyError};
use crate::exactarith::{parse_rational, FactorBudget};
use crate::hauptmodul::Arc;
use crate::modpoly::{brandt_table, supersingular_set};
use crate::quadforms::{fundamental_unit, Discriminant};
use crate::sssearch::{self, SearchError, SearchOptions};
use crate::ssverify::{self, QuadSurd, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PRECISION: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_UNVERIFIED: i32 = 4;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_PRECONDITION: i32 = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "heegner", version, about = "Class polynomials of Heegner points and supersingular prime search")]
pub struct Cli {
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build P_D, or the product P_ℓ for p = 5, 13
    Classpoly {
        #[arg(long)]
        p: u64,
        #[arg(long = "D", allow_hyphen_values = true, conflicts_with = "ell")]
        d: Option<i64>,
        #[arg(long)]
        ell: Option<u64>,
        #[arg(long)]
        bits: Option<u32>,
    },
    /// Find supersingular primes of the curve with j_p = h
    Search {
        #[arg(long)]
        p: u64,
        #[arg(long, allow_hyphen_values = true)]
        h: String,
        /// Primes to avoid (comma separated or repeated)
        #[arg(long, value_delimiter = ',')]
        avoid: Vec<String>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long = "ell-bound", default_value_t = sssearch::DEFAULT_ELL_BOUND)]
        ell_bound: u64,
        /// j-invariant of the curve, used to verify found primes
        #[arg(long, allow_hyphen_values = true)]
        j: Option<String>,
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long = "rho-iterations")]
        rho_iterations: Option<u64>,
        #[arg(long = "effort-bound", default_value_t = ssverify::DEFAULT_EFFORT_BOUND)]
        effort_bound: u64,
    },
    /// Supersingularity of j mod q
    Verify {
        #[arg(long, allow_hyphen_values = true)]
        j: String,
        #[arg(long)]
        q: String,
        #[arg(long = "effort-bound", default_value_t = ssverify::DEFAULT_EFFORT_BOUND)]
        effort_bound: u64,
    },
    /// Brandt matrix, supersingular set, arc endpoints and unit for p
    Tables {
        #[arg(long)]
        p: u64,
    },
}

/// Runs a full command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let fmt = cli.format;
    match cli.command {
        Command::Classpoly { p, d, ell, bits } => classpoly(p, d, ell, bits, fmt, out, err),
        Command::Search {
            p,
            h,
            avoid,
            count,
            ell_bound,
            j,
            bits,
            rho_iterations,
            effort_bound,
        } => {
            let mut budget = FactorBudget::default();
            if let Some(r) = rho_iterations {
                budget.rho_iterations = r;
            }
            let args = SearchArgs { p, h, avoid, count, ell_bound, j, bits, budget, effort_bound };
            search(args, fmt, out, err)
        }
        Command::Verify { j, q, effort_bound } => verify(&j, &q, effort_bound, fmt, out, err),
        Command::Tables { p } => tables(p, fmt, out, err),
    }
}

fn usage(err: &mut dyn Write, msg: impl std::fmt::Display) -> i32 {
    let _ = writeln!(err, "error: {msg}");
    EXIT_USAGE
}

fn classpoly(
    p: u64,
    d: Option<i64>,
    ell: Option<u64>,
    bits: Option<u32>,
    fmt: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let built = match (d, ell) {
        (Some(d), None) => match Discriminant::from_value(d, p) {
            Ok(disc) => build_pd(&disc, bits),
            Err(e) => return usage(err, e),
        },
        (None, Some(ell)) => build_pl(ell, p, bits),
        _ => return usage(err, "exactly one of --D and --ell is required"),
    };
    match built {
        Ok(poly) => {
            let _ = match fmt {
                Format::Json => writeln!(out, "{}", poly.to_json()),
                Format::Text => {
                    let cs: Vec<String> = poly.coefficients.iter().map(|c| c.to_string()).collect();
                    writeln!(
                        out,
                        "p = {} D = {} degree {}\n[{}]",
                        poly.p,
                        serde_json::to_string(&poly.disc).expect("json"),
                        poly.degree(),
                        cs.join(", ")
                    )
                }
            };
            EXIT_OK
        }
        Err(e @ (ClassPolyError::PrecisionExhausted { .. } | ClassPolyError::NotIntegral { .. })) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PRECISION
        }
        Err(e @ (ClassPolyError::Form(_) | ClassPolyError::Hauptmodul(_) | ClassPolyError::ProductFormLevel(_))) => {
            usage(err, e)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

struct SearchArgs {
    p: u64,
    h: String,
    avoid: Vec<String>,
    count: usize,
    ell_bound: u64,
    j: Option<String>,
    bits: Option<u32>,
    budget: FactorBudget,
    effort_bound: u64,
}

fn search(a: SearchArgs, fmt: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(h) = parse_rational(&a.h) else {
        return usage(err, format!("cannot parse h = {:?}", a.h));
    };
    let mut sigma = Vec::new();
    for s in a.avoid.iter().filter(|s| !s.trim().is_empty()) {
        match s.trim().parse::<Integer>() {
            Ok(v) if v > 1 => sigma.push(v),
            _ => return usage(err, format!("bad prime in --avoid: {s:?}")),
        }
    }
    let j = match a.j.as_deref().map(str::parse::<QuadSurd>) {
        None => None,
        Some(Ok(j)) => Some(j),
        Some(Err(e)) => return usage(err, e),
    };
    if a.count == 0 || a.ell_bound == 0 {
        return usage(err, "--count and --ell-bound must be positive");
    }
    let opts = SearchOptions {
        ell_bound: a.ell_bound,
        count: a.count,
        budget: a.budget,
        effort_bound: a.effort_bound,
        bits: a.bits,
        j,
        ..Default::default()
    };
    match sssearch::search(a.p, &h, &sigma, &opts) {
        Ok(outcome) => {
            for c in &outcome.certificates {
                let _ = match fmt {
                    Format::Json => writeln!(out, "{}", c.to_json()),
                    Format::Text => writeln!(
                        out,
                        "ℓ = {} D = {} P(h) = {}/{} primes {}",
                        c.ell,
                        serde_json::to_string(&c.disc).expect("json"),
                        c.value.num,
                        c.value.den,
                        c.verified
                            .iter()
                            .map(|v| format!("{} ({})", v.q, v.status))
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                };
            }
            if outcome.exhausted {
                let _ = writeln!(err, "ℓ bound {} exhausted", a.ell_bound);
                EXIT_BOUND
            } else {
                EXIT_OK
            }
        }
        Err(e @ (SearchError::SupersingularAtP { .. } | SearchError::RealJCase { .. } | SearchError::OnBoundary { .. })) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PRECONDITION
        }
        Err(e @ SearchError::UnsupportedLevel(_)) => usage(err, e),
        Err(SearchError::ClassPoly(e @ (ClassPolyError::PrecisionExhausted { .. } | ClassPolyError::NotIntegral { .. }))) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PRECISION
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn verify(j: &str, q: &str, effort_bound: u64, fmt: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let j: QuadSurd = match j.parse() {
        Ok(j) => j,
        Err(e) => return usage(err, e),
    };
    let q: Integer = match q.trim().parse() {
        Ok(q) => q,
        Err(_) => return usage(err, format!("bad prime {q:?}")),
    };
    match ssverify::verify_j_mod(&j, &q, effort_bound) {
        Ok(status) => {
            let _ = match fmt {
                Format::Json => writeln!(out, "{}", serde_json::json!({ "q": q.to_string(), "status": status })),
                Format::Text => writeln!(out, "{status}"),
            };
            match status {
                Status::Supersingular => EXIT_OK,
                Status::Ordinary => EXIT_FAILURE,
                Status::UnverifiedLarge | Status::Unverified => EXIT_UNVERIFIED,
            }
        }
        Err(e) => usage(err, e),
    }
}

fn tables(p: u64, fmt: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let brandt = match brandt_table(p) {
        Ok(t) => Some(t),
        Err(_) if crate::hauptmodul::SUPPORTED_LEVELS.contains(&p) => None,
        Err(e) => return usage(err, e),
    };
    let ss = match supersingular_set(p) {
        Ok(s) => s,
        Err(e) => return usage(err, e),
    };
    let unit = fundamental_unit(p).ok();
    let arc = unit.and_then(|_| {
        let arc = Arc::new(p).ok()?;
        let forms = arc.endpoint_forms();
        let (a, b) = arc.endpoint_values(256).ok()?;
        let clean = |x: f64| if x.abs() < 1e-30 { 0.0 } else { x };
        Some((forms, clean(a.to_f64()), clean(b.to_f64())))
    });
    let note = if p == 23 { Some("theorem not proven for p=23") } else { None };
    match fmt {
        Format::Json => {
            let v = serde_json::json!({
                "p": p,
                "brandt": brandt.as_ref().map(|t| serde_json::json!({
                    "basis": t.basis,
                    "matrix": t.matrix,
                    "note": t.note,
                })),
                "supersingular": ss,
                "fundamental_unit": unit.map(|(c, d)| [c, d]),
                "arc": arc.as_ref().map(|(f, a, b)| serde_json::json!({
                    "endpoint_forms": f.iter().map(|q| [q.a, q.b, q.c]).collect::<Vec<_>>(),
                    "endpoint_values": [a, b],
                })),
                "note": note,
            });
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"));
        }
        Format::Text => {
            let _ = writeln!(out, "p = {p}");
            if let Some(t) = &brandt {
                let _ = writeln!(out, "T2 basis {:?}", t.basis);
                for row in &t.matrix {
                    let _ = writeln!(out, "  {row:?}");
                }
                if !t.note.is_empty() {
                    let _ = writeln!(out, "  {}", t.note);
                }
            }
            let _ = writeln!(out, "supersingular j_{p} mod {p}: {ss:?}");
            if let Some((c, d)) = unit {
                let _ = writeln!(out, "fundamental unit {c} + {d}√{p}");
            }
            if let Some((f, a, b)) = &arc {
                let _ = writeln!(
                    out,
                    "arc endpoints ({}, {}, {}) ({}, {}, {}) -> j_{p} = {a:.12}, {b:.12}",
                    f[0].a, f[0].b, f[0].c, f[1].a, f[1].b, f[1].c
                );
            }
            if let Some(n) = note {
                let _ = writeln!(out, "{n}");
            }
        }
    }
    EXIT_OK
}
