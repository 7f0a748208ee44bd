use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmlat::catalog::{get_singularity, get_singularity_window, Family, SingularityDef};
use cmlat::closure::{classify_ainf_extension, Engine};
use cmlat::exec::Exec;
use cmlat::lattice::{display_labels, display_name, lattice_of, match_stable_graph, render_labeled, verify, Format};
use cmlat::matfac::ChiVector;

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "cmlat", version, about = "Lattices of extension-closed subcategories")]
struct Cli {
    /// Run closures on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Ring {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    dim: u32,
    /// Last explicit index of infinite families.
    #[arg(long)]
    window: Option<usize>,
    /// Truncation degree for Ext computations.
    #[arg(long)]
    trunc: Option<u32>,
}

impl Ring {
    fn load(&self) -> Result<SingularityDef> {
        let mut def = match self.window {
            Some(w) => get_singularity_window(self.family, self.n, self.dim, w)?,
            None => get_singularity(self.family, self.n, self.dim)?,
        };
        if let Some(t) = self.trunc {
            def.trunc = t;
        }
        Ok(def)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate and render the lattice.
    Lattice {
        #[command(flatten)]
        ring: Ring,
        /// Keep only vertices containing R, with R dropped.
        #[arg(long)]
        stable: bool,
        #[arg(long, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate rules, rigidity and the golden lattice.
    Verify {
        #[command(flatten)]
        ring: Ring,
    },
    /// Print one closure.
    Ext {
        #[command(flatten)]
        ring: Ring,
        #[arg(long, value_delimiter = ',')]
        gens: Vec<String>,
    },
    /// Print χ of a module.
    Chi {
        #[command(flatten)]
        ring: Ring,
        #[arg(long)]
        module: String,
    },
    /// Summands of an extension of I_1 by I_{l_1} ⊕ … ⊕ I_{l_r}.
    ClassifyAinf {
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<usize>,
        /// `u` for a unit, `0` for zero.
        #[arg(long, value_delimiter = ',')]
        units: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.cmd {
        Cmd::Lattice {
            ring,
            stable,
            format,
            out,
        } => {
            let def = ring.load()?;
            let p = lattice_of(&def, stable, exec)?;
            let labels = if stable { Default::default() } else { display_labels(&def)? };
            let mut s = render_labeled(&p, format, &labels);
            if stable && format == Format::Text {
                if let Some(g) = match_stable_graph(&p) {
                    s.push_str(&format!("shape {g}\n"));
                }
            }
            match out {
                Some(path) => fs::write(path, s)?,
                None => print!("{s}"),
            }
            Ok(true)
        }
        Cmd::Verify { ring } => {
            let def = ring.load()?;
            let rep = verify(&def, exec)?;
            for c in &rep.checks {
                let tag = match (c.pass, c.advisory) {
                    (true, _) => "ok  ",
                    (false, true) => "note",
                    (false, false) => "FAIL",
                };
                println!("{tag} {:<15} {}", c.name, c.detail);
            }
            println!("{} {}", rep.label, if rep.pass() { "verified" } else { "FAILED" });
            Ok(rep.pass())
        }
        Cmd::Ext { ring, gens } => {
            let def = ring.load()?;
            let mut names = vec![];
            for g in &gens {
                names.extend(def.resolve_strict(g)?);
            }
            let s = def.set_from_names(&names)?;
            let c = Engine::new(&def)?.ext_closure(s)?;
            println!("{}", display_name(&def.canonical_names(&c)));
            Ok(true)
        }
        Cmd::Chi { ring, module } => {
            let def = ring.load()?;
            let mut total = ChiVector::zero(def.primes.len());
            for n in def.resolve_strict(&module)? {
                let c = def
                    .chi_of_name(&n)
                    .ok_or_else(|| format!("no chi for {n}"))?;
                total = total.add(c);
            }
            let primes: Vec<&str> = def.primes.iter().map(|p| p.label.as_str()).collect();
            println!("chi({module}) = {total} at [{}]", primes.join(", "));
            Ok(true)
        }
        Cmd::ClassifyAinf { lengths, units } => {
            if lengths.len() != units.len() || lengths.contains(&0) {
                return Err("need one positive length per unit flag".into());
            }
            let us = units
                .iter()
                .map(|u| match u.as_str() {
                    "u" | "unit" => Ok(true),
                    "0" | "zero" => Ok(false),
                    _ => Err(format!("unit flag must be u or 0, got {u}")),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            println!("{}", classify_ainf_extension(&lengths, &us).join(" + "));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cmlat: {e}");
            ExitCode::from(2)
        }
    }
}
