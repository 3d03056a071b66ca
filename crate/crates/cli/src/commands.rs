use std::io::Write;

use quasipot::equilibria::{
    detect_bifurcations, equilibria_at, trace_branches, write_bifurcations_csv, write_branches_csv,
    ContinuationSettings, Equilibrium,
};
use quasipot::gates::{analyse_gates, gate_bifurcation_scan, write_gate_reports_csv};
use quasipot::mc::{run_ensemble, summarize, write_records_csv, SimConfig};
use quasipot::model::{ModelParams, NodeStates, StateVector};
use quasipot::qp::{extract_contours, read_field, write_contours_csv, write_field};

use crate::config::{ContoursConfig, EquilibriaConfig, GateScanConfig, McConfig, QpConfig};
use crate::error::CliError;
use crate::output::OutDir;

fn write_equilibria_csv(out: impl Write, eqs: &[Equilibrium]) -> Result<(), CliError> {
    let dim = eqs.first().map_or(0, |e| e.position.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.push("stability".into());
    header.extend((1..=dim).map(|i| format!("re_lambda{i}")));
    w.write_record(&header).map_err(quasipot::Error::from)?;
    for e in eqs {
        let mut row = vec![e.label().to_string()];
        row.extend(e.position.iter().map(|v| format!("{v:.10}")));
        row.push(e.stability.name().into());
        row.extend(e.eigenvalues.iter().map(|l| format!("{:.10}", l.re)));
        w.write_record(&row).map_err(quasipot::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn equilibria(c: &EquilibriaConfig, mut out: OutDir) -> Result<(), CliError> {
    let (b0, b1) = c.beta_range;
    if !(b0 >= 0.0 && b1 >= b0) {
        return Err(CliError::Config(format!("bad beta range ({b0}, {b1})")));
    }
    let template = c.model.template()?;
    let settings = ContinuationSettings::with_step(c.step);
    if b1 == b0 {
        let tracked = equilibria_at(&template, b0, &settings)?;
        for (label, at) in &tracked.eliminated {
            out.progress(format!("{label} eliminated at beta = {at:.6}"));
        }
        write_equilibria_csv(out.create("equilibria.csv")?, &tracked.equilibria)?;
        return out.manifest("equilibria", c);
    }
    out.progress(format!("continuing equilibria over beta in [0, {b1}]"));
    let mut branches = trace_branches(&template, b1, &settings)?;
    let mut report = detect_bifurcations(&branches);
    for w in &report.warnings {
        out.progress(format!("warning: {w}"));
    }
    report.points.retain(|p| p.beta >= b0 && p.beta <= b1);
    for b in &mut branches {
        let keep = b
            .betas
            .iter()
            .position(|&x| x >= b0)
            .unwrap_or(b.betas.len());
        b.betas.drain(..keep);
        b.states.drain(..keep);
    }
    branches.retain(|b| !b.betas.is_empty());
    for p in &report.points {
        out.progress(format!(
            "{} at beta = {:.6} ({}, {})",
            p.kind.name(),
            p.beta,
            p.participants.0,
            p.participants.1
        ));
    }
    write_branches_csv(out.create("branches.csv")?, &branches)?;
    write_bifurcations_csv(out.create("bifurcations.csv")?, &report)?;
    out.json("bifurcations.json", &report)?;
    out.manifest("equilibria", c)
}

pub fn qp(c: &QpConfig, mut out: OutDir) -> Result<(), CliError> {
    let template = c.model.template()?;
    let grid = c.grid.build()?;
    out.progress(format!(
        "solving from {} at beta = {} on {}x{}",
        c.anchor, c.beta, grid.nx, grid.ny
    ));
    let (field, report) = analyse_gates(&template, c.beta, &c.anchor, &grid, &c.solver.params())?;
    out.progress(format!(
        "gate {} at height {:.6e}",
        report.gate, report.gate_height
    ));
    let levels = if c.levels.is_empty() {
        (1..=15)
            .map(|k| report.gate_height * k as f64 / 10.0)
            .collect()
    } else {
        c.levels.clone()
    };
    write_field(out.create("field.qpf")?, &field)?;
    write_contours_csv(
        out.create("contours.csv")?,
        &extract_contours(&field, &levels),
    )?;
    write_gate_reports_csv(out.create("gates.csv")?, &[&report])?;
    out.json("gates.json", &report)?;
    out.manifest("qp", c)
}

pub fn gatescan(c: &GateScanConfig, mut out: OutDir) -> Result<(), CliError> {
    let template = c.model.template()?;
    let grid = c.grid.build()?;
    out.progress(format!(
        "scanning {} against {} from {} over beta in [{}, {}]",
        c.pair.0, c.pair.1, c.anchor, c.beta_range.0, c.beta_range.1
    ));
    let scan = gate_bifurcation_scan(
        &template,
        c.beta_range,
        &c.anchor,
        (&c.pair.0, &c.pair.1),
        &grid,
        &c.settings()?,
    )?;
    for w in &scan.warnings {
        out.progress(format!("warning: {w}"));
    }
    match &scan.crossing {
        Some(x) => out.progress(format!(
            "crossing at beta = {:.5} in [{:.5}, {:.5}]",
            x.beta, x.bracket.0, x.bracket.1
        )),
        None => out.progress("no crossing"),
    }
    let reports: Vec<_> = scan.sorted_samples().iter().map(|s| &s.report).collect();
    write_gate_reports_csv(out.create("gates.csv")?, &reports)?;
    out.json("scan.json", &scan)?;
    out.manifest("gatescan", c)
}

pub fn mc(c: &McConfig, mut out: OutDir) -> Result<(), CliError> {
    let points = c.points();
    if points.is_empty() {
        return Err(CliError::Config("empty sweep".into()));
    }
    let mut table = csv::Writer::from_writer(out.create("sweep.csv")?);
    let mut header_written = false;
    for (k, &(nu, alpha, beta)) in points.iter().enumerate() {
        let mut model = c.model.clone();
        model.nu = nu;
        model.alpha = alpha;
        let net = model
            .template()?
            .with_params(ModelParams::new(nu, beta, alpha)?)?;
        let initial = if c.start == "quiescent" {
            StateVector(vec![NodeStates::new(nu).quiescent; net.dim()])
        } else {
            let tracked = equilibria_at(&net, beta, &ContinuationSettings::default())?;
            StateVector(tracked.get(&c.start)?.position.clone())
        };
        let cfg = SimConfig::new(net, &c.simulation)?;
        out.progress(format!(
            "point {}/{}: nu = {nu}, alpha = {alpha}, beta = {beta}, {} realisations",
            k + 1,
            points.len(),
            cfg.n_realisations
        ));
        let records = run_ensemble(&cfg, &initial)?;
        let s = summarize(&records)?;
        let dir = format!("point-{k:03}");
        write_records_csv(out.create(&format!("{dir}/records.csv"))?, &records)?;
        out.json(&format!("{dir}/summary.json"), &s)?;

        let n = s.first_direction.len();
        if !header_written {
            let mut h: Vec<String> = [
                "point",
                "nu",
                "alpha",
                "beta",
                "completed",
                "incomplete",
                "first_star",
                "first",
                "second_star",
                "second",
                "return_pct",
                "return_pct_ci",
            ]
            .map(String::from)
            .to_vec();
            h.extend((1..=n).map(|i| format!("first_dir{i}")));
            h.extend((1..=n).map(|i| format!("final_dir{i}")));
            h.push("modal_sequence".into());
            table.write_record(&h).map_err(quasipot::Error::from)?;
            header_written = true;
        }
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        let mut row = vec![
            k.to_string(),
            nu.to_string(),
            alpha.to_string(),
            beta.to_string(),
            s.n_completed.to_string(),
            s.n_incomplete.to_string(),
            opt(s.first_star),
            opt(s.first),
            opt(s.second_star),
            opt(s.second),
            format!("{:.4}", s.return_percentage),
            format!("{:.4}", s.return_percentage_ci),
        ];
        row.extend(s.first_direction.iter().map(|p| format!("{p:.4}")));
        row.extend(s.final_direction.iter().map(|p| format!("{p:.4}")));
        row.push(s.modal_sequence().unwrap_or("").to_string());
        table.write_record(&row).map_err(quasipot::Error::from)?;
        out.progress(format!(
            "  returns {:.2}%, first directions {:?}",
            s.return_percentage, s.first_direction
        ));
    }
    table.flush()?;
    drop(table);
    out.manifest("mc", c)
}

pub fn contours(c: &ContoursConfig, mut out: OutDir) -> Result<(), CliError> {
    let file = std::fs::File::open(&c.field)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", c.field)))?;
    let field = read_field(std::io::BufReader::new(file))?;
    let levels = if c.levels.is_empty() {
        let top = field.max_value();
        (1..=10).map(|k| top * k as f64 / 11.0).collect()
    } else {
        c.levels.clone()
    };
    write_contours_csv(
        out.create("contours.csv")?,
        &extract_contours(&field, &levels),
    )?;
    out.manifest("contours", c)
}
