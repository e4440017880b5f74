use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use struct_dae_core::canonical::{
    global_canonical_self, global_canonical_skew, solution_basis_constant, verify_self_global_form,
    verify_skew_global_form,
};
use struct_dae_core::factor::{rank_split, smooth_inertia, sym_rank_split};
use struct_dae_core::flow::{flow_defect, fundamental_solution, hamiltonian_series, integrate_pair, integrate_reduced};
use struct_dae_core::models::{
    build_circuit, build_multibody_self, build_multibody_skew, build_optimal_control, build_stokes, CircuitParams,
    OptimalControlData,
};
use struct_dae_core::reduce::{self_adjoint_dynamic_extract, semidefinite_skew_reduce, stokes_reduce};
use struct_dae_core::structure::{classify, default_tolerance, residual};
use struct_dae_core::{Adjointness, MatrixFunction, ReducedSystem, Tag, TimeGrid};

use crate::schema::{parse_function, parse_model, FunctionJson, Model, ModelJson, PortJson, StructureName};
use crate::{
    CanonicalArgs, CheckArgs, CliError, DemoArgs, DemoName, FactorArgs, FactorMethod, FlowArgs, Output, Pipeline,
    ReduceArgs, SimulateArgs, StructureArg, TimeArgs,
};

const SEED_VAR: &str = "STRUCT_DAE_SEED";

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Model, CliError> {
    parse_model(&read(path)?).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn emit(output: &Output, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<S: Serialize>(output: &Output, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    emit(output, &text)
}

fn points(model: &Model, n: usize) -> Result<TimeGrid, CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!("need at least 2 grid points, got {n}")));
    }
    let iv = &model.pair.interval;
    Ok(TimeGrid::uniform(iv.t0(), iv.tf(), n)?)
}

fn time_grid(model: &Model, time: &TimeArgs) -> Result<TimeGrid, CliError> {
    let t0 = time.t0.unwrap_or(model.pair.interval.t0());
    let tf = time.tf.unwrap_or(model.pair.interval.tf());
    if time.steps < 1 {
        return Err(CliError::Usage("steps must be at least 1".into()));
    }
    if !(t0 < tf) {
        return Err(CliError::Usage(format!("need t0 < tf, got {t0} and {tf}")));
    }
    let grid = TimeGrid::uniform(t0, tf, time.steps + 1)?;
    model.pair.check_grid(&grid)?;
    Ok(grid)
}

fn resolve(arg: Option<StructureArg>, model: &Model) -> StructureArg {
    match (arg, model.structure) {
        (Some(s), _) => s,
        (None, Some(StructureName::SelfAdjoint)) => StructureArg::SelfAdjoint,
        (None, Some(StructureName::SkewAdjoint)) => StructureArg::SkewAdjoint,
        (None, None) => StructureArg::Auto,
    }
}

fn adjointness_name(a: Adjointness) -> &'static str {
    match a {
        Adjointness::SelfAdjoint => "self",
        Adjointness::SkewAdjoint => "skew",
    }
}

pub fn check(args: &CheckArgs) -> Result<(), CliError> {
    let model = load(&args.model)?;
    let grid = points(&model, args.grid)?;
    let tol = match args.tol {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(CliError::Usage(format!("tolerance must be positive, got {t}"))),
        None => default_tolerance(&model.pair, &grid)?,
    };
    let kinds = match resolve(args.structure, &model) {
        StructureArg::SelfAdjoint => vec![Adjointness::SelfAdjoint],
        StructureArg::SkewAdjoint => vec![Adjointness::SkewAdjoint],
        StructureArg::Auto => vec![Adjointness::SelfAdjoint, Adjointness::SkewAdjoint],
    };
    let mut reports = Vec::new();
    let mut any = false;
    for kind in kinds {
        let rep = residual(&model.pair, &grid, kind)?;
        any |= rep.passes(tol);
        reports.push(json!({
            "structure": adjointness_name(kind),
            "e_residual": rep.e_residual,
            "a_residual": rep.a_residual,
            "max_residual": rep.max_residual(),
            "passes": rep.passes(tol),
        }));
    }
    let tag = match classify(&model.pair, &grid, tol)?.value {
        Tag::SelfAdjoint => "self",
        Tag::SkewAdjoint => "skew",
        Tag::Both => "both",
        Tag::None => "none",
    };
    let mut out = json!({
        "model": model.name,
        "tolerance": tol,
        "grid_points": grid.len(),
        "classification": tag,
        "reports": reports,
        "passes": any,
    });
    if let Some(port) = &model.port {
        let r = port.report(&grid)?;
        out["port"] = json!({
            "s_symmetry": r.s_symmetry,
            "n_skew": r.n_skew,
            "dissipation_min_eig": r.dissipation_min_eig,
            "skew_residual": r.skew_residual,
        });
    }
    emit_json(&args.output, &out)?;
    if any {
        Ok(())
    } else {
        Err(CliError::Structure(format!("no requested structure holds within {tol:e}")))
    }
}

fn max_jump(f: &MatrixFunction, grid: &TimeGrid) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for w in grid.points().windows(2) {
        worst = worst.max((f.eval(w[1])? - f.eval(w[0])?).norm());
    }
    Ok(worst)
}

fn padded(block: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    out.view_mut((0, 0), block.shape()).copy_from(block);
    out
}

pub fn factor(args: &FactorArgs) -> Result<(), CliError> {
    let f = parse_function(&read(&args.model)?, &args.matrix)?;
    let (t0, tf) = match f.grid() {
        Some(g) => (g.t0(), g.tf()),
        None => (0.0, 1.0),
    };
    if args.grid < 2 {
        return Err(CliError::Usage(format!("need at least 2 grid points, got {}", args.grid)));
    }
    let grid = TimeGrid::uniform(t0, tf, args.grid)?;
    let (r, c) = f.shape();
    let method = args.method.unwrap_or_else(|| {
        let m = f.eval(t0).unwrap_or_else(|_| DMatrix::zeros(r, c));
        if r == c && (&m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm()) {
            FactorMethod::Sym
        } else {
            FactorMethod::Rank
        }
    });
    let mut recon: f64 = 0.0;
    let report = match method {
        FactorMethod::Rank => {
            let s = rank_split(&f, &grid, args.gap_tol)?;
            for &t in grid.points() {
                let lhs = s.u.eval(t)?.transpose() * f.eval(t)? * s.v.eval(t)?;
                recon = recon.max((lhs - padded(&s.sigma.eval(t)?, r, c)).norm());
            }
            json!({ "method": "rank", "rank": s.r, "continuity": { "u": max_jump(&s.u, &grid)?, "v": max_jump(&s.v, &grid)? } })
        }
        FactorMethod::Sym => {
            let s = sym_rank_split(&f, &grid, args.gap_tol)?;
            for &t in grid.points() {
                let q = s.q.eval(t)?;
                recon = recon.max((q.transpose() * f.eval(t)? * &q - padded(&s.sigma.eval(t)?, r, c)).norm());
            }
            json!({ "method": "sym", "rank": s.r, "continuity": { "q": max_jump(&s.q, &grid)? } })
        }
        FactorMethod::Inertia => {
            let s = smooth_inertia(&f, &grid)?;
            for &t in grid.points() {
                let w = s.w.eval(t)?;
                recon = recon.max((w.transpose() * f.eval(t)? * &w - s.signature()).norm());
            }
            json!({ "method": "inertia", "p": s.p, "q": s.q, "continuity": { "w": max_jump(&s.w, &grid)? } })
        }
    };
    let mut report = report;
    report["rows"] = json!(r);
    report["cols"] = json!(c);
    report["grid_points"] = json!(grid.len());
    report["reconstruction_residual"] = json!(recon);
    emit_json(&args.output, &report)
}

pub fn canonical(args: &CanonicalArgs) -> Result<(), CliError> {
    let model = load(&args.model)?;
    let grid = points(&model, args.grid)?;
    let structure = match resolve(args.structure, &model) {
        StructureArg::Auto => match classify(&model.pair, &grid, default_tolerance(&model.pair, &grid)?)?.value {
            Tag::SelfAdjoint => StructureArg::SelfAdjoint,
            Tag::SkewAdjoint => StructureArg::SkewAdjoint,
            Tag::Both | Tag::None => {
                return Err(CliError::Usage("cannot infer the structure; pass --structure".into()));
            }
        },
        s => s,
    };
    let basis = solution_basis_constant(&model.pair, &grid)?;
    let (mut report, passes, transform) = match structure {
        StructureArg::SelfAdjoint => {
            let form = global_canonical_self(&model.pair, &basis, &grid)?;
            let rep = verify_self_global_form(&form, &grid, args.tol)?;
            let record = json!({
                "e33_skew": rep.e33_skew,
                "a22_sym": rep.a22_sym,
                "a23_a32": rep.a23_a32,
                "a33": rep.a33,
                "pattern": rep.pattern,
                "algebraic": rep.algebraic,
                "max": rep.max(),
            });
            let out = json!({
                "structure": "self",
                "p": form.p,
                "d": basis.d,
                "algebraic_size": form.a33.rows(),
                "residuals": record,
            });
            (out, rep.passes(args.tol), form.transform.q)
        }
        _ => {
            let form = global_canonical_skew(&model.pair, &basis, &grid)?;
            let rep = verify_skew_global_form(&form, &grid, args.tol)?;
            let record = json!({
                "e33_sym": rep.e33_sym,
                "a33": rep.a33,
                "pattern": rep.pattern,
                "algebraic": rep.algebraic,
                "max": rep.max(),
            });
            let out = json!({
                "structure": "skew",
                "p": form.p,
                "q": form.q,
                "d": basis.d,
                "algebraic_size": form.a33.rows(),
                "residuals": record,
            });
            (out, rep.passes(args.tol), form.transform.q)
        }
    };
    report["tolerance"] = json!(args.tol);
    report["passes"] = json!(passes);
    if args.transform {
        report["transform"] = serde_json::to_value(FunctionJson::encode(&transform)).expect("plain numbers");
    }
    emit_json(&args.output, &report)?;
    if passes {
        Ok(())
    } else {
        Err(CliError::Structure(format!("canonical form residual above {:e}", args.tol)))
    }
}

fn default_pipeline(model: &Model) -> Pipeline {
    match (model.partition, model.structure) {
        (Some(_), _) => Pipeline::Stokes,
        (None, Some(StructureName::SelfAdjoint)) => Pipeline::SelfAdjoint,
        _ => Pipeline::Semidefinite,
    }
}

fn reduced(model: &Model, pipeline: Pipeline, grid: &TimeGrid) -> Result<ReducedSystem, CliError> {
    let n = model.pair.n();
    let forcing = model.forcing.clone().unwrap_or_else(|| MatrixFunction::zeros(n, 1));
    match pipeline {
        Pipeline::Semidefinite => Ok(semidefinite_skew_reduce(&model.pair, &forcing, grid)?),
        Pipeline::Stokes => {
            let [nv, np] = model
                .partition
                .ok_or_else(|| CliError::Usage("the stokes pipeline needs a `partition` field".into()))?;
            let (e, a) = model.pair.eval(grid.t0())?;
            if !model.pair.e.is_constant() {
                return Err(CliError::Usage("the stokes pipeline needs a constant mass matrix".into()));
            }
            let mass = e.view((0, 0), (nv, nv)).into_owned();
            let b = -a.view((0, nv), (nv, np)).into_owned();
            let j = model.pair.a.block(0, 0, nv, nv)?;
            let f = forcing.block(0, 0, nv, 1)?;
            Ok(stokes_reduce(&mass, &b, &j, &f, grid)?)
        }
        Pipeline::SelfAdjoint => {
            if model.forcing.is_some() {
                return Err(CliError::Usage("the self pipeline extracts the homogeneous core only".into()));
            }
            let basis = solution_basis_constant(&model.pair, grid)?;
            let form = global_canonical_self(&model.pair, &basis, grid)?;
            Ok(self_adjoint_dynamic_extract(&form, grid)?)
        }
    }
}

fn pipeline_name(p: Pipeline) -> &'static str {
    match p {
        Pipeline::Semidefinite => "semidefinite",
        Pipeline::Stokes => "stokes",
        Pipeline::SelfAdjoint => "self",
    }
}

pub fn reduce(args: &ReduceArgs) -> Result<(), CliError> {
    let model = load(&args.model)?;
    let grid = points(&model, args.grid)?;
    let sys = reduced(&model, args.pipeline, &grid)?;
    let mut recovery = Vec::new();
    for map in &sys.recovery {
        recovery.push(json!({
            "label": map.label,
            "rows": map.rows(),
            "forcing_derivative": map.derivative_order(&grid)?,
        }));
    }
    emit_json(
        &args.output,
        &json!({
            "model": model.name,
            "pipeline": pipeline_name(args.pipeline),
            "full_dim": sys.full_dim(),
            "dynamic_dim": sys.dynamic_dim,
            "certificate": sys.certificate.name(),
            "lie_defect": sys.lie_defect(&grid)?,
            "max_forcing_derivative": sys.max_forcing_derivative()?,
            "recovery": recovery,
        }),
    )
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = load(&args.model)?;
    let grid = time_grid(&model, &args.time)?;
    let n = model.pair.n();
    if args.x0.len() != n {
        return Err(CliError::Usage(format!("--x0 has {} entries for a system of size {n}", args.x0.len())));
    }
    let x0 = nalgebra::DVector::from_column_slice(&args.x0);
    let (traj, defects) = match args.pipeline {
        Some(p) => {
            let sys = reduced(&model, p, &grid)?;
            let z0 = sys.initial_state(grid.t0(), &x0)?;
            let traj = integrate_reduced(&sys, &z0, &grid)?;
            let defects = if args.with_flow {
                let d = fundamental_solution(&sys.m, &grid, &sys.certificate)?;
                Some(d.fundamental.iter().map(|phi| flow_defect(std::slice::from_ref(phi), &sys.certificate)).collect::<Vec<_>>())
            } else {
                None
            };
            (traj, defects)
        }
        None => {
            if args.with_flow {
                return Err(CliError::Usage("--with-flow needs --pipeline".into()));
            }
            let forcing = model.forcing.clone().unwrap_or_else(|| MatrixFunction::zeros(n, 1));
            (integrate_pair(&model.pair, &forcing, &x0, &grid)?, None)
        }
    };
    let energy = hamiltonian_series(&model.pair.e, &traj)?;
    let mut csv = String::from("t");
    for i in 1..=n {
        write!(csv, ",x_{i}").unwrap();
    }
    csv.push_str(",H");
    if defects.is_some() {
        csv.push_str(",flow_defect");
    }
    csv.push('\n');
    for (k, &t) in grid.points().iter().enumerate() {
        write!(csv, "{t}").unwrap();
        for v in traj.states[k].iter() {
            write!(csv, ",{v}").unwrap();
        }
        write!(csv, ",{}", energy[k]).unwrap();
        if let Some(d) = &defects {
            write!(csv, ",{}", d[k]).unwrap();
        }
        csv.push('\n');
    }
    emit(&args.output, &csv)
}

pub fn flow(args: &FlowArgs) -> Result<(), CliError> {
    let model = load(&args.model)?;
    let grid = time_grid(&model, &args.time)?;
    let pipeline = args.pipeline.unwrap_or_else(|| default_pipeline(&model));
    let sys = reduced(&model, pipeline, &grid)?;
    let d = fundamental_solution(&sys.m, &grid, &sys.certificate)?;
    let last = d.fundamental.last().expect("grid has points");
    let rows: Vec<Vec<f64>> = last.row_iter().map(|r| r.iter().copied().collect()).collect();
    emit_json(
        &args.output,
        &json!({
            "pipeline": pipeline_name(pipeline),
            "certificate": d.kind.name(),
            "dimension": sys.dynamic_dim,
            "steps": grid.len() - 1,
            "t0": grid.t0(),
            "tf": grid.tf(),
            "max_defect": d.max_defect,
            "final": rows,
        }),
    )
}

fn seed(default: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_VAR} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(default),
    }
}

fn scalar(x: f64) -> MatrixFunction {
    MatrixFunction::constant(DMatrix::from_element(1, 1, x)).expect("finite")
}

pub fn demo(args: &DemoArgs) -> Result<(), CliError> {
    if !(args.t0 < args.tf) {
        return Err(CliError::Usage(format!("need t0 < tf, got {} and {}", args.t0, args.tf)));
    }
    let interval = TimeGrid::uniform(args.t0, args.tf, 2)?;
    let out: ModelJson = match args.name {
        DemoName::Circuit => {
            let params = CircuitParams { l: args.l, c1: args.c1, c2: args.c2, rl: args.rl, rg: args.rg, rr: args.rr };
            let m = build_circuit(params)?;
            let mut j = ModelJson::from_pair("circuit", Some(StructureName::SkewAdjoint), &m.pair(&interval)?);
            j.port = Some(PortJson::encode(&m));
            j
        }
        DemoName::Stokes => {
            let s = seed(args.seed)?;
            let st = build_stokes::<f64>(args.nv, args.np, s)?;
            let m = st.model(!args.lossy)?;
            let structure = (!args.lossy).then_some(StructureName::SkewAdjoint);
            let mut j = ModelJson::from_pair("stokes", structure, &m.pair(&interval)?);
            j.partition = Some([st.nv(), st.np()]);
            j.port = Some(PortJson::encode(&m));
            j.seed = Some(s);
            j
        }
        DemoName::Multibody => {
            let i2 = DMatrix::identity(2, 2);
            let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
            match args.form {
                StructureArg::SelfAdjoint => ModelJson::from_pair(
                    "multibody",
                    Some(StructureName::SelfAdjoint),
                    &build_multibody_self(&i2, &i2, &g, &interval)?,
                ),
                StructureArg::SkewAdjoint => ModelJson::from_pair(
                    "multibody",
                    Some(StructureName::SkewAdjoint),
                    &build_multibody_skew(&i2, &i2, &g, &interval)?,
                ),
                StructureArg::Auto => return Err(CliError::Usage("--form must be self or skew".into())),
            }
        }
        DemoName::Ocp => {
            let data = OptimalControlData {
                e: MatrixFunction::poly(1, 1, vec![vec![1.0, 0.5]])?,
                a: MatrixFunction::poly(1, 1, vec![vec![0.0, 1.0]])?,
                b: scalar(1.0),
                w: scalar(1.0),
                s: scalar(0.0),
                r: scalar(1.0),
                mf: DMatrix::identity(1, 1),
            };
            ModelJson::from_pair("ocp", Some(StructureName::SelfAdjoint), &build_optimal_control(&data, &interval)?)
        }
    };
    emit_json(&args.output, &out)
}
