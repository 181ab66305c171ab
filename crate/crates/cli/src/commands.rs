use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use gl2newform::engine::{reference_bounds, SupNorm};
use gl2newform::verify::{
    check_gl1, check_main_theorem, check_representation, check_supercuspidal, check_twist_lemmas, CheckReport,
    Tolerances, MANIFEST,
};
use gl2newform::{
    default_t_max, family, Context, ExtendedCharacter, FamilySpec, Newform, RepKind, Representation, Side,
    SupercuspidalOracle, TildeCharacter,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cache::Cache;
use crate::error::CliError;
use crate::{Common, FamilyKind, OracleArgs, OutFormat, RepArgs, ScanArgs, Suite, ValueArgs, ValueFormat, VerifyArgs};

pub const SCHEMA_VERSION: u32 = 1;

/// Split `CHAR,CHAR,...` where each `CHAR` may itself contain commas (`2^3:1,1@0/1`):
/// a new character starts at every token containing `^`.
fn split_chars(s: &str) -> Vec<String> {
    let mut out: Vec<String> = vec![];
    for tok in s.split(',') {
        match out.last_mut() {
            Some(last) if !tok.contains('^') => {
                last.push(',');
                last.push_str(tok);
            }
            _ => out.push(tok.to_string()),
        }
    }
    out
}

fn parse_char(s: &str, p: u64) -> Result<ExtendedCharacter, CliError> {
    let c: ExtendedCharacter = s.parse()?;
    if c.p() != p {
        return Err(CliError::Usage(format!("character '{s}' is at p = {}, not {p}", c.p())));
    }
    Ok(c)
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn parse_rep(args: &RepArgs, prec: u32) -> Result<Representation, CliError> {
    let p = args.p;
    if let Some(s) = &args.ps {
        let parts = split_chars(s);
        let [a, b] = parts.as_slice() else {
            return Err(CliError::Usage(format!("--ps expects two characters, got '{s}'")));
        };
        return Ok(Representation::principal_series(parse_char(a, p)?, parse_char(b, p)?)?);
    }
    if let Some(s) = &args.st {
        return Ok(Representation::steinberg(parse_char(s, p)?)?);
    }
    if let Some(s) = &args.sc {
        let (n, omega) =
            s.split_once(',').ok_or_else(|| CliError::Usage(format!("--sc expects n,OMEGA, got '{s}'")))?;
        let n: u32 = n.trim().parse().map_err(|_| CliError::Usage(format!("--sc: bad conductor '{n}'")))?;
        let omega: TildeCharacter = omega.parse()?;
        let path = args.oracle.as_ref().ok_or_else(|| CliError::Usage("a supercuspidal needs --oracle FILE".into()))?;
        let oracle = SupercuspidalOracle::from_json(&read_file(path)?, prec)?;
        if oracle.p() != p || oracle.n() != n || *oracle.omega() != omega {
            return Err(CliError::Usage(format!(
                "oracle describes p = {}, n = {}, omega = {}, not --p {p} --sc {s}",
                oracle.p(),
                oracle.n(),
                oracle.omega()
            )));
        }
        return Ok(Representation::supercuspidal(oracle)?);
    }
    Err(CliError::Usage("one of --ps, --st, --sc is required".into()))
}

fn t_max_for(common: &Common, n: u32) -> i64 {
    common.tmax.unwrap_or_else(|| default_t_max(n))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

pub fn value(common: &Common, args: &ValueArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let ctx = Context::new(common.precision_bits);
    let pi = parse_rep(&args.rep, ctx.prec())?;
    let nf = Newform::new(&ctx, pi.clone(), t_max_for(common, pi.n()))?;
    if let Some(dir) = &common.cache_dir {
        Cache::new(dir).load(&nf)?;
    }
    let g = nf.representative(args.t, args.k, args.v)?;
    let side = if args.conjugate { Side::Contragredient } else { Side::Pi };
    let w = nf.value(side, &g)?;
    let atkin_lehner = 2 * g.k > pi.n();
    let digits = (ctx.prec() as f64 * std::f64::consts::LOG10_2).floor() as usize;
    let re = w.re().to_string_radix(10, Some(digits));
    let im = w.im().to_string_radix(10, Some(digits));
    let modulus = w.abs_float().to_string_radix(10, Some(digits));
    let func = if args.conjugate { "W*" } else { "W" };
    let text = match args.format {
        ValueFormat::Text => {
            let mut s = format!(
                "representation  {pi}\nn               {}\ncoset           {g}\n{func}              {re} {} {}i\nmodulus         {modulus}\natkin_lehner    {atkin_lehner}\n",
                pi.n(),
                if im.starts_with('-') { "-" } else { "+" },
                im.trim_start_matches('-'),
            );
            if common.timing {
                s.push_str(&format!("wall_time_s     {:.3}\n", started.elapsed().as_secs_f64()));
            }
            s
        }
        ValueFormat::Json => {
            let mut v = json!({
                "schema_version": SCHEMA_VERSION,
                "representation": pi.to_string(),
                "n": pi.n(),
                "t": g.t, "k": g.k, "v": g.v,
                "function": func,
                "re": re, "im": im, "modulus": modulus,
                "atkin_lehner": atkin_lehner,
                "t_max": nf.t_max(),
            });
            if common.timing {
                v["wall_time_s"] = json!(started.elapsed().as_secs_f64());
            }
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
    };
    if let Some(dir) = &common.cache_dir {
        Cache::new(dir).store(&nf)?;
    }
    emit(None, &text)
}

/// One row of a family scan.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub p: u64,
    pub n: u32,
    pub m: u32,
    #[serde(rename = "type")]
    pub type_tag: String,
    pub chi1: String,
    pub chi2: String,
    pub h: f64,
    pub witness_t: i64,
    pub witness_k: u32,
    pub witness_v: u64,
    pub lower_ref: f64,
    pub upper_ref: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    /// `log_q(h) / n`, the exponent compared against `q^(n eps)`.
    pub h_exponent: f64,
    pub certified: bool,
    pub t_max: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

const CSV_COLUMNS: [&str; 18] = [
    "p",
    "n",
    "m",
    "type",
    "chi1",
    "chi2",
    "h",
    "witness_t",
    "witness_k",
    "witness_v",
    "lower_ref",
    "upper_ref",
    "ratio_lower",
    "ratio_upper",
    "h_exponent",
    "certified",
    "t_max",
    "wall_time_s",
];

impl ScanRow {
    fn csv_fields(&self) -> Vec<String> {
        let mut f = vec![
            self.p.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.type_tag.clone(),
            self.chi1.clone(),
            self.chi2.clone(),
            self.h.to_string(),
            self.witness_t.to_string(),
            self.witness_k.to_string(),
            self.witness_v.to_string(),
            self.lower_ref.to_string(),
            self.upper_ref.to_string(),
            self.ratio_lower.to_string(),
            self.ratio_upper.to_string(),
            self.h_exponent.to_string(),
            self.certified.to_string(),
            self.t_max.to_string(),
        ];
        if let Some(w) = self.wall_time_s {
            f.push(format!("{w:.3}"));
        }
        f
    }
}

fn chi_specs(pi: &Representation) -> (String, String) {
    match pi.kind() {
        RepKind::PrincipalSeries { chi1, chi2 } => (chi1.to_string(), chi2.to_string()),
        RepKind::Steinberg { xi } => (xi.to_string(), String::new()),
        RepKind::Supercuspidal(o) => (o.omega().to_string(), String::new()),
    }
}

/// Sup-norm with `t_max` doubled (at most three times) until certified, through the cache.
fn sup_norm_cached(ctx: &Context, pi: &Representation, t_max: i64, cache: Option<&Cache>) -> Result<SupNorm, CliError> {
    let mut t = t_max;
    let mut last = None;
    for _ in 0..4 {
        let nf = Newform::new(ctx, pi.clone(), t)?;
        if let Some(c) = cache {
            c.load(&nf)?;
        }
        let s = nf.sup_norm()?;
        if let Some(c) = cache {
            c.store(&nf)?;
        }
        if s.certified {
            return Ok(s);
        }
        last = Some(s);
        t *= 2;
    }
    Ok(last.expect("at least one attempt"))
}

pub fn scan_rows(common: &Common, args: &ScanArgs) -> Result<Vec<ScanRow>, CliError> {
    let ctx = Context::new(common.precision_bits);
    let spec = FamilySpec {
        p: args.p,
        n_max: args.nmax,
        principal_series: args.family != FamilyKind::Steinberg,
        steinberg: args.family != FamilyKind::Ps,
        a1_max: args.a1max,
        a2_max: args.a2max,
        xi_max: args.ximax,
    };
    let mut fam = family(&spec)?;
    if args.conjecture_regime {
        fam.retain(|pi| pi.m() <= pi.n().div_ceil(2));
    }
    let cache = common.cache_dir.as_deref().map(Cache::new);
    fam.par_iter()
        .map(|pi| -> Result<ScanRow, CliError> {
            let started = Instant::now();
            let s = sup_norm_cached(&ctx, pi, t_max_for(common, pi.n()), cache.as_ref())?;
            let (lower_ref, upper_ref) = reference_bounds(pi.q(), pi.n(), pi.m());
            let (chi1, chi2) = chi_specs(pi);
            let h_exponent = if pi.n() == 0 { 0.0 } else { s.h.ln() / (pi.n() as f64 * (pi.q() as f64).ln()) };
            Ok(ScanRow {
                p: pi.p(),
                n: pi.n(),
                m: pi.m(),
                type_tag: pi.type_tag().to_string(),
                chi1,
                chi2,
                h: s.h,
                witness_t: s.argmax.t,
                witness_k: s.argmax.k,
                witness_v: s.argmax.v,
                lower_ref,
                upper_ref,
                ratio_lower: s.h / lower_ref,
                ratio_upper: s.h / upper_ref,
                h_exponent,
                certified: s.certified,
                t_max: s.t_max,
                wall_time_s: common.timing.then(|| started.elapsed().as_secs_f64()),
            })
        })
        .collect()
}

/// The sandwich `(2/3) lower_ref <= h <= sqrt(2) upper_ref` over scan rows.
pub fn sandwich_report(rows: &[ScanRow], family: &str) -> CheckReport {
    let mut dev: f64 = 0.0;
    let mut witness = None;
    for r in rows {
        let d = if r.certified {
            (2.0 / 3.0 * r.lower_ref - r.h).max(r.h - std::f64::consts::SQRT_2 * r.upper_ref).max(0.0)
        } else {
            f64::INFINITY
        };
        if d > dev || witness.is_none() {
            dev = dev.max(d);
            witness = Some(format!("{} {} {}: h = {}", r.type_tag, r.chi1, r.chi2, r.h));
        }
    }
    CheckReport {
        id: "theorem.sandwich".into(),
        statement: gl2newform::verify::statement("theorem.sandwich").into(),
        family: family.into(),
        cases: rows.len() as u64,
        max_deviation: dev,
        tolerance: 0.0,
        pass: dev <= 0.0,
        witness,
    }
}

pub fn scan(common: &Common, args: &ScanArgs) -> Result<(), CliError> {
    let rows = scan_rows(common, args)?;
    let label = format!("p = {}, n <= {}, family {:?}", args.p, args.nmax, args.family).to_lowercase();
    let check = sandwich_report(&rows, &label);
    let text = match args.format {
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            let cols = if common.timing { &CSV_COLUMNS[..] } else { &CSV_COLUMNS[..CSV_COLUMNS.len() - 1] };
            w.write_record(cols).expect("in-memory csv");
            for r in &rows {
                w.write_record(r.csv_fields()).expect("in-memory csv");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
        }
        OutFormat::Json => {
            let v = json!({
                "schema_version": SCHEMA_VERSION,
                "params": {
                    "command": "scan",
                    "p": args.p,
                    "nmax": args.nmax,
                    "family": format!("{:?}", args.family).to_lowercase(),
                    "conjecture_regime": args.conjecture_regime,
                    "a1max": args.a1max,
                    "a2max": args.a2max,
                    "ximax": args.ximax,
                    "precision_bits": common.precision_bits,
                    "tmax": common.tmax,
                },
                "rows": rows,
                "checks": [check],
            });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
    };
    emit(args.out.as_deref(), &text)?;
    if check.pass || rows.is_empty() {
        Ok(())
    } else {
        eprintln!("sandwich violated: {}", check.witness.unwrap_or_default());
        Err(CliError::ChecksFailed(1))
    }
}

fn representation_reports(
    ctx: &Context,
    fam: &[Representation],
    common: &Common,
    tol: &Tolerances,
) -> Result<Vec<CheckReport>, CliError> {
    let per_rep = fam
        .par_iter()
        .map(|pi| -> Result<Vec<CheckReport>, CliError> {
            let nf = Newform::new(ctx, pi.clone(), t_max_for(common, pi.n()))?;
            Ok(check_representation(&nf, tol))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

pub fn run_suite(common: &Common, args: &VerifyArgs) -> Result<Vec<CheckReport>, CliError> {
    let mut ctx = Context::new(common.precision_bits);
    if let Some(d) = args.perturb_eps {
        ctx = ctx.with_eps_perturbation(d);
    }
    let mut tol = Tolerances::default();
    if let Some(t) = common.tolerance {
        tol.solver = t;
    }
    let want = |s: Suite| args.suite == Suite::All || args.suite == s;
    let plist = format!("{:?}", args.p);
    let mut out = vec![];
    if want(Suite::Gl1) {
        out.extend(check_gl1(&ctx, &args.p, args.amax, &tol));
        out.extend(check_twist_lemmas(&ctx, &args.p, args.amax + 1, &tol));
    }
    let mut fam = vec![];
    if want(Suite::Reps) || want(Suite::Theorem) {
        for &p in &args.p {
            fam.extend(family(&FamilySpec::all(p, args.nmax))?);
        }
    }
    let fam_label = format!("p in {plist}, n <= {}", args.nmax);
    if want(Suite::Reps) {
        let reports = representation_reports(&ctx, &fam, common, &tol)?;
        out.extend(CheckReport::merge(&reports, &fam_label));
    }
    if want(Suite::Theorem) {
        out.extend(check_main_theorem(&ctx, &fam, common.tmax, &fam_label));
    }
    if want(Suite::Supercuspidal) {
        let mut reports = vec![];
        for &p in &args.p {
            for n in 2..=args.nmax.max(2) {
                let mut omegas = vec![TildeCharacter::trivial(p)];
                if let Some(w) = gl2newform::characters::characters_of_conductor(p, n / 2).into_iter().next() {
                    omegas.push(w);
                }
                for omega in omegas {
                    reports.extend(check_supercuspidal(&ctx, p, n, &omega, 1, &tol));
                }
            }
        }
        out.extend(CheckReport::merge(
            &reports,
            &format!("synthetic oracles, p in {plist}, 2 <= n <= {}", args.nmax.max(2)),
        ));
    }
    Ok(out)
}

pub fn verify(common: &Common, args: &VerifyArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let checks = run_suite(common, args)?;
    let manifest: Vec<_> = MANIFEST.iter().map(|(id, s)| json!({"id": id, "statement": s})).collect();
    let mut params = json!({
        "command": "verify",
        "suite": format!("{:?}", args.suite).to_lowercase(),
        "p": args.p,
        "amax": args.amax,
        "nmax": args.nmax,
        "perturb_eps": args.perturb_eps,
        "precision_bits": common.precision_bits,
        "tmax": common.tmax,
        "tolerance": common.tolerance,
    });
    if common.timing {
        params["wall_time_s"] = json!(started.elapsed().as_secs_f64());
    }
    let v = json!({
        "schema_version": SCHEMA_VERSION,
        "params": params,
        "rows": [],
        "checks": checks,
        "manifest": manifest,
    });
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&v).expect("json") + "\n"))?;
    for c in &checks {
        eprintln!(
            "{} {:<34} cases={:<7} max_dev={:.3e} tol={:.0e}{}",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.cases,
            c.max_deviation,
            c.tolerance,
            if c.pass { String::new() } else { format!("  worst: {}", c.witness.clone().unwrap_or_default()) }
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        Err(CliError::ChecksFailed(failed))
    } else {
        Ok(())
    }
}

pub fn oracle(common: &Common, args: &OracleArgs) -> Result<(), CliError> {
    let ctx = Context::new(common.precision_bits);
    let (n, omega) =
        args.sc.split_once(',').ok_or_else(|| CliError::Usage(format!("--sc expects n,OMEGA, got '{}'", args.sc)))?;
    let n: u32 = n.trim().parse().map_err(|_| CliError::Usage(format!("--sc: bad conductor '{n}'")))?;
    let omega: TildeCharacter = omega.parse()?;
    let o = SupercuspidalOracle::synthetic(&ctx, args.p, n, omega, args.seed)?;
    fs::write(&args.out, o.to_json() + "\n").map_err(|e| CliError::io(&args.out, e))
}
