//! Command-line driver: reads a project file, dispatches one command, and
//! reports as text or JSON. Exit codes are stable: 0 for success, 1 for a
//! domain failure (a counterexample, type error, violation, or result
//! disagreement), 2 for usage and parse errors.

mod project;

use clap::{Args, Parser, Subcommand};
use phantomenc::encodings::{check_respectful, derive_encoding, EncodingPair};
use phantomenc::codegen::{emit_datatypes, emit_safe_signature, emit_safe_structure};
use phantomenc::phantom::FreshSupply;
use phantomenc::source::{check_pi_f_sound, eval, typecheck, SourceTerm};
use phantomenc::syntax::{parse_source_term, parse_target_term};
use phantomenc::target::{
    check_pi_f_sound_t, display_target_type, eval_t, typecheck_t, TargetInterpretation,
    TargetTerm,
};
use phantomenc::translate::{trans_expr, trans_interp, verify_preservation, TransEnv};
use project::{build_config, build_scheme, parse_project, Fragment, ProjectFile, SchemeError};
use serde_json::json;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "phantomenc",
    version,
    about = "Derive phantom-type encodings for subtyping hierarchies and check them"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Project file to read.
    file: PathBuf,
    /// Encoding scheme, overriding the project's encoding block.
    #[arg(long, value_parser = ["tree", "powerset", "embed", "width", "infinite"])]
    scheme: Option<String>,
    /// Constructor policy for derived encodings.
    #[arg(long, value_parser = ["T", "perSort"])]
    ctor: Option<String>,
    /// Calculus to operate in where a command supports both.
    #[arg(long, value_parser = ["source", "target"])]
    calculus: Option<String>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
    /// Write the report to PATH instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Small-step budget for evaluation.
    #[arg(long, value_name = "N", default_value_t = phantomenc::source::DEFAULT_FUEL)]
    fuel: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derive the encoding and print one line per sort.
    Encode(Common),
    /// Exhaustively compare the encoding against the subtype order.
    CheckRespectful(Common),
    /// Type-check the project's program block.
    Typecheck(Common),
    /// Translate the program and interpretation, verifying preservation.
    Translate(Common),
    /// Evaluate the program block (both calculi unless one is chosen).
    Run(Common),
    /// Emit the datatype lines, safe signature, and wrapper structure.
    EmitInterface(Common),
    /// Sweep the interpretation table for soundness.
    CheckSoundness(Common),
}

/// A command that produced no report: the message goes to stderr. Quiet
/// failures already emitted their report and only carry the exit code.
enum Failure {
    Usage(String),
    Domain(String),
    Quiet,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) | Failure::Quiet => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.cmd {
        Cmd::Encode(c)
        | Cmd::CheckRespectful(c)
        | Cmd::Typecheck(c)
        | Cmd::Translate(c)
        | Cmd::Run(c)
        | Cmd::EmitInterface(c)
        | Cmd::CheckSoundness(c) => c,
    };
    match dispatch(&cli.cmd, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Domain(m) => eprintln!("error: {m}"),
                Failure::Quiet => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cmd: &Cmd, common: &Common) -> Result<(), Failure> {
    let project = load(common)?;
    match cmd {
        Cmd::Encode(_) => encode(common, &project),
        Cmd::CheckRespectful(_) => check_respectful_cmd(common, &project),
        Cmd::Typecheck(_) => typecheck_cmd(common, &project),
        Cmd::Translate(_) => translate_cmd(common, &project),
        Cmd::Run(_) => run_cmd(common, &project),
        Cmd::EmitInterface(_) => emit_interface_cmd(common, &project),
        Cmd::CheckSoundness(_) => check_soundness_cmd(common, &project),
    }
}

fn load(common: &Common) -> Result<ProjectFile, Failure> {
    let text = fs::read_to_string(&common.file).map_err(|e| {
        Failure::Usage(format!("cannot read {}: {e}", common.file.display()))
    })?;
    parse_project(&text).map_err(|e| Failure::Usage(e.to_string()))
}

fn emit(common: &Common, report: String) -> Result<(), Failure> {
    match &common.out {
        Some(path) => fs::write(path, report).map_err(|e| {
            Failure::Usage(format!("cannot write {}: {e}", path.display()))
        }),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn derive(common: &Common, project: &ProjectFile) -> Result<EncodingPair, Failure> {
    let scheme = build_scheme(project, common.scheme.as_deref()).map_err(|e| match e {
        SchemeError::Usage(m) => Failure::Usage(m),
        SchemeError::Domain(m) => Failure::Domain(m),
    })?;
    let cfg = build_config(project, common.ctor.as_deref());
    derive_encoding(&project.hierarchy, &scheme, &cfg)
        .map_err(|e| Failure::Domain(e.to_string()))
}

fn translated_interp(
    common: &Common,
    project: &ProjectFile,
) -> Result<(EncodingPair, TargetInterpretation), Failure> {
    let pair = derive(common, project)?;
    let t_interp =
        trans_interp(&pair, &project.interp).map_err(|e| Failure::Domain(e.to_string()))?;
    Ok((pair, t_interp))
}

fn program<'a>(project: &'a ProjectFile, cmd: &str) -> Result<&'a Fragment, Failure> {
    project.program.as_ref().ok_or_else(|| {
        Failure::Usage(format!("the {cmd} command needs a program block"))
    })
}

fn parse_source_fragment(
    frag: &Fragment,
    project: &ProjectFile,
) -> Result<SourceTerm, Failure> {
    parse_source_term(&frag.text, &project.interp)
        .map_err(|e| Failure::Usage(e.offset(frag.line, frag.col).to_string()))
}

fn parse_target_fragment(
    frag: &Fragment,
    t_interp: &TargetInterpretation,
) -> Result<TargetTerm, Failure> {
    parse_target_term(&frag.text, t_interp)
        .map_err(|e| Failure::Usage(e.offset(frag.line, frag.col).to_string()))
}

fn calculus(common: &Common) -> &str {
    common.calculus.as_deref().unwrap_or("source")
}

fn encode(common: &Common, project: &ProjectFile) -> Result<(), Failure> {
    let pair = derive(common, project)?;
    let mut lines = Vec::new();
    for sort in project.hierarchy.sorts() {
        let conc = pair.conc(sort).expect("every sort is encoded");
        let mut supply = FreshSupply::new();
        let abst = pair
            .abst(sort, &mut supply, "a")
            .expect("every sort is encoded");
        if common.json {
            lines.push(
                json!({"sort": sort.name(), "conc": conc.to_string(), "abst": abst.to_string()})
                    .to_string(),
            );
        } else {
            lines.push(format!("sort {}: conc = {conc}; abst = {abst}", sort.name()));
        }
    }
    emit(common, lines.join("\n") + "\n")
}

fn check_respectful_cmd(common: &Common, project: &ProjectFile) -> Result<(), Failure> {
    let pair = derive(common, project)?;
    match check_respectful(&pair, &project.hierarchy) {
        Ok(()) => {
            let n = project.hierarchy.len();
            let report = if common.json {
                json!({"ok": true, "pairs": n * n}).to_string() + "\n"
            } else {
                format!("ok: {} ordered pairs match exactly when required\n", n * n)
            };
            emit(common, report)
        }
        Err(cex) => {
            let report = if common.json {
                json!({
                    "ok": false,
                    "sigma1": cex.sigma1.name(),
                    "sigma2": cex.sigma2.name(),
                    "counterexample": cex.to_string(),
                })
                .to_string()
                    + "\n"
            } else {
                format!("not respectful: {cex}\n")
            };
            emit(common, report)?;
            Err(Failure::Quiet)
        }
    }
}

fn typecheck_cmd(common: &Common, project: &ProjectFile) -> Result<(), Failure> {
    let frag = program(project, "typecheck")?;
    let (calc, outcome) = match calculus(common) {
        "target" => {
            let (_, t_interp) = translated_interp(common, project)?;
            let term = parse_target_fragment(frag, &t_interp)?;
            (
                "target",
                typecheck_t(&t_interp, &term)
                    .map(|t| t.to_string())
                    .map_err(|e| e.to_string()),
            )
        }
        _ => {
            let term = parse_source_fragment(frag, project)?;
            (
                "source",
                typecheck(&project.interp, &term)
                    .map(|t| t.typing().to_string())
                    .map_err(|e| e.to_string()),
            )
        }
    };
    match outcome {
        Ok(ty) => {
            let report = if common.json {
                json!({"calculus": calc, "ok": true, "type": ty}).to_string() + "\n"
            } else {
                format!("type: {ty}\n")
            };
            emit(common, report)
        }
        Err(msg) => {
            let report = if common.json {
                json!({"calculus": calc, "ok": false, "error": msg}).to_string() + "\n"
            } else {
                format!("type error: {msg}\n")
            };
            emit(common, report)?;
            Err(Failure::Quiet)
        }
    }
}

fn translate_cmd(common: &Common, project: &ProjectFile) -> Result<(), Failure> {
    let frag = program(project, "translate")?;
    let term = parse_source_fragment(frag, project)?;
    let (pair, t_interp) = translated_interp(common, project)?;
    let derivation =
        typecheck(&project.interp, &term).map_err(|e| Failure::Domain(e.to_string()))?;
    let translated = trans_expr(&pair, &derivation, &mut TransEnv::new())
        .map_err(|e| Failure::Domain(e.to_string()))?;
    let report = verify_preservation(&pair, &project.interp, &term)
        .map_err(|e| Failure::Domain(e.to_string()))?;
    let report_json = json!({
        "source_type": report.source_type,
        "target_type": report.target_type,
        "preserved": report.preserved,
    });
    let text = if common.json {
        let constants: Vec<_> = t_interp
            .constants()
            .map(|(name, ty)| json!({"name": name, "type": display_target_type(ty)}))
            .collect();
        let prims: Vec<_> = t_interp
            .prims()
            .map(|(name, rows)| {
                let rows: Vec<_> = rows
                    .iter()
                    .map(|(d, c)| {
                        json!({"dom": display_target_type(d), "cod": display_target_type(c)})
                    })
                    .collect();
                json!({"name": name, "rows": rows})
            })
            .collect();
        let delta: Vec<_> = t_interp
            .deltas()
            .map(|(f, c, r)| json!({"prim": f, "arg": c, "result": r}))
            .collect();
        json!({
            "program": translated.to_string(),
            "interp": {"constants": constants, "prims": prims, "delta": delta},
            "report": report_json,
        })
        .to_string()
            + "\n"
    } else {
        let mut out = format!("program: {translated}\n");
        for (name, ty) in t_interp.constants() {
            out.push_str(&format!("constant {name} : {}\n", display_target_type(ty)));
        }
        for (name, rows) in t_interp.prims() {
            let rows: Vec<String> = rows
                .iter()
                .map(|(d, c)| {
                    format!("{} -> {}", display_target_type(d), display_target_type(c))
                })
                .collect();
            out.push_str(&format!("prim {name} : {}\n", rows.join(" | ")));
        }
        for (f, c, r) in t_interp.deltas() {
            out.push_str(&format!("delta {f} {c} = {r}\n"));
        }
        out.push_str(&format!("report: {report_json}\n"));
        out
    };
    emit(common, text)?;
    if report.preserved {
        Ok(())
    } else {
        Err(Failure::Quiet)
    }
}

fn run_source(common: &Common, project: &ProjectFile) -> Result<SourceTerm, Failure> {
    let frag = program(project, "run")?;
    let term = parse_source_fragment(frag, project)?;
    typecheck(&project.interp, &term).map_err(|e| Failure::Domain(e.to_string()))?;
    eval(&project.interp, &term, common.fuel).map_err(|e| Failure::Domain(e.to_string()))
}

fn run_cmd(common: &Common, project: &ProjectFile) -> Result<(), Failure> {
    match common.calculus.as_deref() {
        Some("source") => {
            let value = run_source(common, project)?;
            let report = if common.json {
                json!({"calculus": "source", "result": value.to_string()}).to_string() + "\n"
            } else {
                format!("result: {value}\n")
            };
            emit(common, report)
        }
        Some(_) => {
            let frag = program(project, "run")?;
            let (_, t_interp) = translated_interp(common, project)?;
            let term = parse_target_fragment(frag, &t_interp)?;
            typecheck_t(&t_interp, &term).map_err(|e| Failure::Domain(e.to_string()))?;
            let value = eval_t(&t_interp, &term, common.fuel)
                .map_err(|e| Failure::Domain(e.to_string()))?;
            let report = if common.json {
                json!({"calculus": "target", "result": value.to_string()}).to_string() + "\n"
            } else {
                format!("result: {value}\n")
            };
            emit(common, report)
        }
        None => {
            // Both calculi: evaluate the source program, translate it, and
            // require the two runs to land on the same constant.
            let frag = program(project, "run")?;
            let term = parse_source_fragment(frag, project)?;
            let (pair, t_interp) = translated_interp(common, project)?;
            let derivation =
                typecheck(&project.interp, &term).map_err(|e| Failure::Domain(e.to_string()))?;
            let source_value = eval(&project.interp, &term, common.fuel)
                .map_err(|e| Failure::Domain(e.to_string()))?;
            let translated = trans_expr(&pair, &derivation, &mut TransEnv::new())
                .map_err(|e| Failure::Domain(e.to_string()))?;
            let target_value = eval_t(&t_interp, &translated, common.fuel)
                .map_err(|e| Failure::Domain(e.to_string()))?;
            let agree = match (&source_value, &target_value) {
                (SourceTerm::Const(a), TargetTerm::Const(b)) => a == b,
                _ => false,
            };
            let report = if common.json {
                json!({
                    "source": source_value.to_string(),
                    "target": target_value.to_string(),
                    "agree": agree,
                })
                .to_string()
                    + "\n"
            } else {
                format!(
                    "source result: {source_value}\ntarget result: {target_value}\nagreement: {}\n",
                    if agree { "yes" } else { "no" }
                )
            };
            emit(common, report)?;
            if agree {
                Ok(())
            } else {
                Err(Failure::Quiet)
            }
        }
    }
}

fn emit_interface_cmd(common: &Common, project: &ProjectFile) -> Result<(), Failure> {
    let spec = project.interface.as_ref().ok_or_else(|| {
        Failure::Usage("the emit-interface command needs an interface block".into())
    })?;
    let pair = derive(common, project)?;
    let datatypes = emit_datatypes(&pair, &project.hierarchy);
    let signature =
        emit_safe_signature(spec, &pair).map_err(|e| Failure::Domain(e.to_string()))?;
    let structure =
        emit_safe_structure(spec, &pair).map_err(|e| Failure::Domain(e.to_string()))?;
    let report = if common.json {
        json!({"datatypes": datatypes, "signature": signature, "structure": structure})
            .to_string()
            + "\n"
    } else {
        format!("{datatypes}\n{signature}\n{structure}")
    };
    emit(common, report)
}

fn check_soundness_cmd(common: &Common, project: &ProjectFile) -> Result<(), Failure> {
    let calc = calculus(common);
    let outcome = match calc {
        "target" => {
            let (_, t_interp) = translated_interp(common, project)?;
            check_pi_f_sound_t(&t_interp).map_err(|v| v.to_string())
        }
        _ => check_pi_f_sound(&project.interp).map_err(|v| v.to_string()),
    };
    match outcome {
        Ok(()) => {
            let report = if common.json {
                json!({"calculus": calc, "sound": true}).to_string() + "\n"
            } else {
                "ok: every typable primitive application is defined and lands in its row\n"
                    .to_string()
            };
            emit(common, report)
        }
        Err(v) => {
            let report = if common.json {
                json!({"calculus": calc, "sound": false, "violation": v}).to_string() + "\n"
            } else {
                format!("unsound: {v}\n")
            };
            emit(common, report)?;
            Err(Failure::Quiet)
        }
    }
}
