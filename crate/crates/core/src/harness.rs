//! Experiment configuration, sweeps over ε, t and ℓ, cross-checks, and tabular
//! reports. Every table row starts with the configuration hash.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bloch::{log_samples, taylor_residual, BlochReference, CoefficientSpectrum, DEFAULT_K};
use crate::cell::CellGrid;
use crate::domain::{inv_eps, LineDomain};
use crate::effective::{cascade_gradient_norms, solve_effective, variant_compare, EffectiveSymbol, ModeSolution, Source, Variant};
use crate::error::{Error, Result};
use crate::expansion::{assemble_h, assemble_s, error_norms, residual_spectral, ExpansionField, ExpansionKind};
use crate::field::CoefficientField;
use crate::fine::{apriori_check, energy_drift, integrate, Trajectory};
use crate::fit::{linear_fit, loglog_fit};
use crate::hyperbolic::{crosscheck_b, revamp_b, revamp_c, HyperbolicCorrectors};
use crate::impulse::{Impulse, TimeBump};
use crate::spectral::{dual_path_discrepancy, SpectralCorrectors};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cell grid size for the corrector hierarchies.
    #[serde(rename = "N")]
    pub n: usize,
    /// Fine-grid points per ε-cell.
    #[serde(rename = "M")]
    pub m: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub t0: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(rename = "L")]
    pub l: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutConfig {
    pub dir: String,
}

/// Tolerances of the executed checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed deviation of a fitted rate from its expected value.
    pub slope: f64,
    /// Largest admissible growth exponent in t.
    pub growth_max: f64,
    /// Required error reduction per unit of ℓ.
    pub summability_factor: f64,
    /// Absolute error level treated as the numerical floor.
    pub floor: f64,
    /// Structural identities (even b̄, symmetry, Fredholm means, dual path).
    pub structural: f64,
    /// Spectral vs revamped b̄.
    pub coincidence: f64,
    /// Fine solver vs Bloch reference, L² norm.
    pub fine_oracle: f64,
    /// Relative energy drift of the fine solver after the impulse.
    pub energy_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slope: 0.3,
            growth_max: 1.2,
            summability_factor: 2.0,
            floor: 1e-11,
            structural: 1e-9,
            coincidence: 1e-8,
            fine_oracle: 1e-6,
            energy_drift: 1e-8,
        }
    }
}

/// Full description of an experiment; loaded from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ell: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub variant: String,
    /// Bloch modes kept per fiber in the reference solution.
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Seed of the random impulse phases.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub field: FieldConfig,
    pub grid: GridConfig,
    pub impulse: ImpulseConfig,
    #[serde(default = "default_domain")]
    pub domain: DomainConfig,
    pub out: OutConfig,
    #[serde(default)]
    pub tol: Tolerances,
}

fn default_modes() -> usize {
    12
}

fn default_seed() -> u64 {
    1
}

fn default_domain() -> DomainConfig {
    DomainConfig { l: 8 }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ell: vec![1, 2, 3],
            eps_list: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
            t_list: vec![2.0],
            variant: "base".into(),
            modes: default_modes(),
            seed: default_seed(),
            field: FieldConfig { name: "sine".into(), params: vec![2.0, 1.0] },
            grid: GridConfig { n: 256, m: 32, dt: 1e-4 },
            impulse: ImpulseConfig { r: 4.0, t0: 0.0, width: 1.0 },
            domain: default_domain(),
            out: OutConfig { dir: "out".into() },
            tol: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form; the output
    /// directory does not enter.
    pub fn hash(&self) -> String {
        let keyed = Self { out: OutConfig { dir: String::new() }, ..self.clone() };
        let json = serde_json::to_string(&keyed).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.ell.is_empty() || self.ell.iter().any(|&l| l == 0 || l > 8) {
            return bad(format!("ell entries must lie in 1..=8, got {:?}", self.ell));
        }
        if self.eps_list.is_empty() || self.t_list.is_empty() {
            return bad("eps_list and t_list must be nonempty".into());
        }
        for &e in &self.eps_list {
            inv_eps(e)?;
        }
        if self.t_list.iter().any(|t| !t.is_finite()) {
            return bad("t_list must be finite".into());
        }
        self.variant()?;
        if !self.grid.n.is_power_of_two() || self.grid.n < 32 {
            return bad(format!("grid.N = {} must be a power of two ≥ 32", self.grid.n));
        }
        if !(self.grid.dt > 0.0) || !(self.impulse.width > 0.0) || !(self.impulse.r > 0.0) {
            return bad("grid.dt, impulse.width and impulse.R must be positive".into());
        }
        if self.domain.l == 0 || self.modes == 0 {
            return bad("domain.L and modes must be positive".into());
        }
        LineDomain::new(self.domain.l, self.eps_list[0], self.grid.m)?;
        CoefficientField::from_name(&self.field.name, &self.field.params)?;
        Ok(())
    }

    pub fn variant(&self) -> Result<Variant> {
        self.variant.parse()
    }

    pub fn max_ell(&self) -> usize {
        self.ell.iter().copied().max().unwrap_or(1)
    }
}

/// A CSV-shaped table whose first column is the configuration hash.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    hash: String,
}

impl Table {
    pub fn new(name: &str, hash: &str, columns: &[&str]) -> Self {
        let mut header = vec!["config_hash".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        Self { name: name.into(), header, rows: Vec::new(), hash: hash.into() }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len() + 1, self.header.len(), "row width for table {}", self.name);
        let mut row = vec![self.hash.clone()];
        row.extend(cells);
        self.rows.push(row);
    }
}

/// Formats a float for CSV output.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub passed: bool,
    /// Recorded but not counted towards the exit status.
    pub diagnostic: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub hash: String,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Report {
    fn new(hash: &str) -> Self {
        Self { hash: hash.into(), ..Default::default() }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().filter(|c| !c.diagnostic).all(|c| c.passed)
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, target: impl Into<String>, passed: bool) {
        self.checks.push(Check { name: name.into(), value, target: target.into(), passed, diagnostic: false });
    }

    pub fn diagnostic(&mut self, name: impl Into<String>, value: f64, target: impl Into<String>, passed: bool) {
        self.checks.push(Check { name: name.into(), value, target: target.into(), passed, diagnostic: true });
    }

    pub fn merge(&mut self, other: Report) {
        self.tables.extend(other.tables);
        self.checks.extend(other.checks);
    }

    /// Table of all checks.
    pub fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &self.hash, &["check", "value", "target", "passed", "diagnostic"]);
        for c in &self.checks {
            t.push(vec![c.name.clone(), num(c.value), c.target.clone(), c.passed.to_string(), c.diagnostic.to_string()]);
        }
        t
    }
}

/// Shared state of a run: the coefficient, impulse, and both corrector hierarchies.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub a: CoefficientField,
    pub f: Impulse,
    pub spec: CoefficientSpectrum,
    pub sc: SpectralCorrectors,
    pub hc: HyperbolicCorrectors,
}

/// Corrector orders built regardless of the requested ℓ, so that the
/// structural checks (b̄ up to order 6, symmetry up to n + m = 6) can run.
pub const MIN_BUILD_ORDER: usize = 6;

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let a = CoefficientField::from_name(&cfg.field.name, &cfg.field.params)?;
        let grid = CellGrid::new(cfg.grid.n);
        let order = cfg.max_ell().max(MIN_BUILD_ORDER);
        let (sc, hc) = rayon::join(|| SpectralCorrectors::build(&a, &grid, order), || HyperbolicCorrectors::build(&a, &grid, order));
        let f = Impulse::random_band(TimeBump::new(cfg.impulse.t0, cfg.impulse.width), cfg.domain.l as f64, cfg.impulse.r, cfg.seed);
        Ok(Self { hash: cfg.hash(), spec: CoefficientSpectrum::new(&a, DEFAULT_K), sc: sc?, hc: hc?, a, f, cfg })
    }

    pub fn reference(&self, eps: f64) -> Result<BlochReference> {
        BlochReference::new(&self.spec, eps, &self.f, DEFAULT_K, self.cfg.modes)
    }

    /// ū for the spectral expansion: the configured variant with the plain source.
    pub fn spectral_modes(&self, ell: usize, eps: f64, t: &[f64]) -> Result<ModeSolution> {
        let sym = EffectiveSymbol::new(&self.sc.b, ell, eps, self.cfg.variant()?, self.a.lambda)?;
        solve_effective(&sym, &self.f, Source::Plain, t)
    }

    /// v̄ for the hyperbolic expansion: revamped base symbol with the geometric source.
    pub fn hyperbolic_modes(&self, ell: usize, eps: f64, t: &[f64]) -> Result<ModeSolution> {
        let b = revamp_b(&self.hc.abar, ell);
        let c = revamp_c(&self.hc.abar, ell);
        let sym = EffectiveSymbol::new(&b, ell, eps, Variant::Base, self.a.lambda)?;
        solve_effective(&sym, &self.f, Source::Geometric(&c), t)
    }

    pub fn expansion(&self, kind: ExpansionKind, ell: usize, eps: f64, modes: &ModeSolution, t: f64) -> Result<ExpansionField> {
        match kind {
            ExpansionKind::Spectral => assemble_s(ell, eps, &self.sc, modes, &self.f, t, DEFAULT_K),
            ExpansionKind::Hyperbolic => assemble_h(ell, eps, &self.hc, modes, t, DEFAULT_K),
        }
    }

    fn modes_for(&self, kind: ExpansionKind, ell: usize, eps: f64, t: &[f64]) -> Result<ModeSolution> {
        match kind {
            ExpansionKind::Spectral => self.spectral_modes(ell, eps, t),
            ExpansionKind::Hyperbolic => self.hyperbolic_modes(ell, eps, t),
        }
    }

    /// Energy-norm and L² errors of an expansion against the Bloch reference at each t.
    pub fn errors(&self, kind: ExpansionKind, ell: usize, eps: f64, reference: &BlochReference, t: &[f64]) -> Result<Vec<(f64, f64)>> {
        let modes = self.modes_for(kind, ell, eps, t)?;
        t.iter()
            .map(|&t| {
                let (u, ut) = reference.solve(t)?;
                let e = error_norms(&u, &ut, &self.expansion(kind, ell, eps, &modes, t)?)?;
                Ok((e.l2, e.energy))
            })
            .collect()
    }
}

fn kind_name(k: ExpansionKind) -> &'static str {
    match k {
        ExpansionKind::Spectral => "spectral",
        ExpansionKind::Hyperbolic => "hyperbolic",
    }
}

/// Slope check that treats data entirely at the floor as passing.
fn slope_check(rep: &mut Report, name: String, x: &[f64], y: &[f64], floor: f64, lo: f64, hi: f64) {
    let fit = loglog_fit(x, y, floor);
    if fit.used < 2 {
        rep.check(format!("{name} (at floor)"), y.iter().copied().fold(0.0, f64::max), format!("≤ {:.1e}", 10.0 * floor), y.iter().all(|v| *v <= 10.0 * floor));
    } else {
        rep.check(name, fit.slope, format!("[{lo:.2}, {hi:.2}]"), fit.slope >= lo && fit.slope <= hi);
    }
}

/// b̄ⁿ table (and the hyperbolic ā^{n,m} table with revamped b̄).
pub fn run_correctors(ctx: &Context, hyperbolic: bool) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let tol = ctx.cfg.tol.structural;
    let mut t = Table::new("correctors", &ctx.hash, &["n", "bbar"]);
    for (n, b) in ctx.sc.b.iter().enumerate().skip(1) {
        t.push(vec![n.to_string(), num(*b)]);
    }
    rep.tables.push(t);
    rep.check("spectral Fredholm means", ctx.sc.compat.max_ratio(), format!("≤ {tol:.0e}"), ctx.sc.compat.max_ratio() <= tol);
    if hyperbolic {
        let sym = ctx.hc.check_symmetry(4, 2)?;
        let mut t = Table::new("hyperbolic", &ctx.hash, &["n", "m", "abar", "symmetry_residual"]);
        for e in &sym.entries {
            t.push(vec![e.n.to_string(), e.m.to_string(), num(e.value), num(e.residual)]);
        }
        rep.tables.push(t);
        let rb = revamp_b(&ctx.hc.abar, ctx.hc.ell);
        let mut t = Table::new("revamped", &ctx.hash, &["p", "bbar_revamped", "bbar_spectral", "relative_difference"]);
        for (i, d) in crosscheck_b(&ctx.sc.b, &rb).iter().enumerate() {
            t.push(vec![(i + 1).to_string(), num(rb[i + 1]), num(ctx.sc.b[i + 1]), num(*d)]);
        }
        rep.tables.push(t);
        rep.check("hyperbolic symmetry", sym.max_residual, format!("≤ {tol:.0e}"), sym.max_residual <= tol);
        rep.check("hyperbolic Fredholm means", ctx.hc.compat.max_ratio(), format!("≤ {tol:.0e}"), ctx.hc.compat.max_ratio() <= tol);
    }
    Ok(rep)
}

/// Bloch ground eigenvalue against its Taylor polynomial, per ℓ in the config.
pub fn run_bloch(ctx: &Context) -> Result<Report> {
    bloch_taylor(ctx, &ctx.cfg.ell)
}

/// Taylor residual slopes for the given truncations. The residual starts at the
/// first retained-away odd b̄, so the expected slope is ℓ + 2 for even ℓ and ℓ + 1 for odd ℓ.
pub fn bloch_taylor(ctx: &Context, ells: &[usize]) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let xis = log_samples(1e-3, 1e-1, 9);
    let mut t = Table::new("bloch_taylor", &ctx.hash, &["ell", "xi", "residual"]);
    for &ell in ells {
        let r = taylor_residual(&ctx.spec, &ctx.sc.b, ell, &xis)?;
        for (x, v) in r.xis.iter().zip(&r.residuals) {
            t.push(vec![ell.to_string(), num(*x), num(*v)]);
        }
        let want = (ell + 2 - ell % 2) as f64;
        let s = ctx.cfg.tol.slope;
        slope_check(&mut rep, format!("Taylor residual slope ell={ell}"), &r.xis, &r.residuals, 1e-15, want - s, want + s);
    }
    rep.tables.push(t);
    Ok(rep)
}

/// Fine solve at one ε: energy log, snapshot norms, a priori ratios, and the
/// comparison against the Bloch reference at each snapshot.
pub fn run_solve_fine(ctx: &Context, eps: f64, t_end: f64, snapshots: &[f64]) -> Result<(Report, Trajectory)> {
    let mut rep = Report::new(&ctx.hash);
    let domain = LineDomain::new(ctx.cfg.domain.l, eps, ctx.cfg.grid.m)?;
    let mut times: Vec<f64> = snapshots.iter().copied().filter(|t| *t <= t_end).collect();
    if !times.contains(&t_end) {
        times.push(t_end);
    }
    let stride = ((0.05 / ctx.cfg.grid.dt).round() as usize).max(1);
    let traj = integrate(&ctx.a, &domain, &ctx.f, &times, ctx.cfg.grid.dt, stride)?;
    let mut t = Table::new("energy", &ctx.hash, &["t", "energy"]);
    for (s, e) in &traj.energy_log {
        t.push(vec![num(*s), num(*e)]);
    }
    rep.tables.push(t);
    let reference = ctx.reference(eps)?;
    let apriori = apriori_check(&ctx.a, &domain, &traj, &ctx.f)?;
    let mut t = Table::new("snapshots", &ctx.hash, &["t", "l2", "bloch_l2_difference", "energy_ratio", "l2_ratio"]);
    let mut worst = 0.0f64;
    for (s, (_, er, lr)) in traj.snapshots.iter().zip(&apriori.rows) {
        let g = reference.solve(s.t)?.0.to_grid(&domain)?;
        let diff: Vec<Complex64> = g.iter().zip(&s.u).map(|(a, b)| a - b).collect();
        let d = domain.l2_norm(&diff);
        worst = worst.max(d);
        let opt = |v: &Option<f64>| v.map(num).unwrap_or_else(|| "inactive".into());
        t.push(vec![num(s.t), num(domain.l2_norm(&s.u)), num(d), opt(er), opt(lr)]);
    }
    rep.tables.push(t);
    let tol = ctx.cfg.tol.fine_oracle;
    rep.check(format!("fine vs Bloch eps={eps}"), worst, format!("≤ {tol:.0e}"), worst <= tol);
    rep.check("a priori ratios bounded", if apriori.growing { 1.0 } else { 0.0 }, "not growing", !apriori.growing);
    let drift = energy_drift(&traj.energy_log, ctx.f.f1.t1());
    rep.diagnostic("energy drift after impulse", drift, format!("≤ {:.0e}", ctx.cfg.tol.energy_drift), drift <= ctx.cfg.tol.energy_drift);
    Ok((rep, traj))
}

/// Per-mode effective solutions for every (ℓ, ε, t) of the config.
pub fn run_solve_effective(ctx: &Context) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let mut t = Table::new("effective", &ctx.hash, &["variant", "ell", "eps", "t", "xi", "re", "im", "dt_re", "dt_im"]);
    let mut worst = 0.0f64;
    for &ell in &ctx.cfg.ell {
        for &eps in &ctx.cfg.eps_list {
            let m = ctx.spectral_modes(ell, eps, &ctx.cfg.t_list)?;
            for (k, &time) in ctx.cfg.t_list.iter().enumerate() {
                worst = worst.max(m.ode_residual(time)? / ctx.f.f2_l2().max(f64::MIN_POSITIVE));
                for (i, md) in m.modes.iter().enumerate() {
                    let (u, du) = m.table[k][i];
                    t.push(vec![ctx.cfg.variant.clone(), ell.to_string(), num(eps), num(time), num(md.xi), num(u.re), num(u.im), num(du.re), num(du.im)]);
                }
            }
        }
    }
    rep.tables.push(t);
    rep.check("effective ODE residual", worst, "≤ 1e-9", worst <= 1e-9);
    Ok(rep)
}

/// One expansion against the reference: grid values and the error summary.
pub fn run_expand(ctx: &Context, kind: ExpansionKind, ell: usize, eps: f64, t: f64) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let domain = LineDomain::new(ctx.cfg.domain.l, eps, ctx.cfg.grid.m)?;
    let reference = ctx.reference(eps)?;
    let (u, ut) = reference.solve(t)?;
    let modes = ctx.modes_for(kind, ell, eps, &[t])?;
    let e = ctx.expansion(kind, ell, eps, &modes, t)?;
    let err = error_norms(&u, &ut, &e)?;
    let ug = u.to_grid(&domain)?;
    let eg = e.u.to_grid(&domain)?;
    let mut tf = Table::new("expansion_field", &ctx.hash, &["x", "u_ref_re", "u_ref_im", "approx_re", "approx_im", "diff_abs"]);
    for j in 0..domain.m() {
        tf.push(vec![num(domain.x(j)), num(ug[j].re), num(ug[j].im), num(eg[j].re), num(eg[j].im), num((ug[j] - eg[j]).norm())]);
    }
    let mut ts = Table::new("expansion_summary", &ctx.hash, &["kind", "ell", "eps", "t", "err_l2", "err_energy"]);
    ts.push(vec![kind_name(kind).into(), ell.to_string(), num(eps), num(t), num(err.l2), num(err.energy)]);
    rep.tables.push(tf);
    rep.tables.push(ts);
    if kind == ExpansionKind::Spectral {
        // The residual identity holds for the base symbol with the plain source.
        let base = solve_effective(&EffectiveSymbol::new(&ctx.sc.b, ell, eps, Variant::Base, ctx.a.lambda)?, &ctx.f, Source::Plain, &[t])?;
        let r = residual_spectral(ell, eps, &ctx.sc, &ctx.spec, &base, &ctx.f, t, DEFAULT_K)?;
        let mut tr = Table::new("expansion_residual", &ctx.hash, &["ell", "eps", "t", "psi_part", "zeta_part", "total", "source_norm"]);
        tr.push(vec![ell.to_string(), num(eps), num(t), num(r.psi_part), num(r.zeta_part), num(r.total), num(r.source_norm)]);
        rep.tables.push(tr);
    }
    Ok(rep)
}

/// Error of both expansions over the (ε, ℓ, t) sweep with rate fits in ε.
pub fn run_convergence(ctx: &Context) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let cfg = &ctx.cfg;
    let kinds = [ExpansionKind::Spectral, ExpansionKind::Hyperbolic];
    // errs[(kind, ell)][eps][t] = (l2, energy)
    let per_eps: Vec<BTreeMap<(usize, usize), Vec<(f64, f64)>>> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let reference = ctx.reference(eps)?;
            let mut out = BTreeMap::new();
            for (ki, &kind) in kinds.iter().enumerate() {
                for &ell in &cfg.ell {
                    out.insert((ki, ell), ctx.errors(kind, ell, eps, &reference, &cfg.t_list)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("convergence", &ctx.hash, &["kind", "eps", "ell", "t", "err_l2", "err_energy"]);
    let mut fits = Table::new("convergence_fit", &ctx.hash, &["kind", "ell", "t", "slope", "points_used"]);
    for (ki, &kind) in kinds.iter().enumerate() {
        for &ell in &cfg.ell {
            for (ti, &time) in cfg.t_list.iter().enumerate() {
                let y: Vec<f64> = per_eps.iter().map(|m| m[&(ki, ell)][ti].1).collect();
                for (ei, &eps) in cfg.eps_list.iter().enumerate() {
                    let (l2, en) = per_eps[ei][&(ki, ell)][ti];
                    t.push(vec![kind_name(kind).into(), num(eps), ell.to_string(), num(time), num(l2), num(en)]);
                }
                let fit = loglog_fit(&cfg.eps_list, &y, cfg.tol.floor);
                fits.push(vec![kind_name(kind).into(), ell.to_string(), num(time), num(fit.slope), fit.used.to_string()]);
                let s = cfg.tol.slope;
                slope_check(&mut rep, format!("{} energy-error rate ell={ell} t={time}", kind_name(kind)), &cfg.eps_list, &y, cfg.tol.floor, ell as f64 - s, ell as f64 + s);
            }
        }
    }
    rep.tables.push(t);
    rep.tables.push(fits);
    Ok(rep)
}

/// Naive-cascade exhibit for one ℓ: profile norms over t and the revamped
/// solution against its a priori bound.
#[derive(Clone, Debug, Serialize)]
pub struct CascadeExhibit {
    pub ell: usize,
    pub eps: f64,
    /// (t, ‖∂ₓw̄‖, ‖∂ₓ(w̄ − w̃¹)‖, ‖∂ₓū‖).
    pub rows: Vec<(f64, f64, f64, f64)>,
    /// Fitted growth exponent of ‖∂ₓ(w̄ − w̃¹)‖ over the late window.
    pub cascade_exponent: f64,
    /// Fitted growth exponent of ‖∂ₓū‖ over the late window.
    pub revamped_exponent: f64,
    /// ‖f₁‖_{L¹}‖f₂‖_{L²}·max_ξ |ξ|/√μ(ξ), which bounds ‖∂ₓū(t)‖ for every t.
    pub apriori_bound: f64,
    pub late_start: f64,
}

pub fn cascade_exhibit(b: &[f64], ell: usize, eps: f64, lambda: f64, f: &Impulse, t_list: &[f64]) -> Result<CascadeExhibit> {
    let sym = EffectiveSymbol::new(b, ell, eps, Variant::Base, lambda)?;
    let sol = solve_effective(&sym, f, Source::Plain, t_list)?;
    let rows = t_list
        .par_iter()
        .map(|&t| {
            let (full, corr) = cascade_gradient_norms(b, ell, eps, f, t)?;
            Ok((t, full, corr, sol.field(0, t)?.grad().l2_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio = f.modes.iter().map(|m| m.0.abs() / sym.mu(m.0).sqrt()).fold(0.0, f64::max);
    let late_start = f.f1.t1() + 3.0;
    let late: Vec<&(f64, f64, f64, f64)> = rows.iter().filter(|r| r.0 >= late_start).collect();
    let ts: Vec<f64> = late.iter().map(|r| r.0).collect();
    let fit = |k: usize| loglog_fit(&ts, &late.iter().map(|r| if k == 2 { r.2 } else { r.3 }).collect::<Vec<_>>(), 0.0).slope;
    Ok(CascadeExhibit { ell, eps, cascade_exponent: fit(2), revamped_exponent: fit(3), apriori_bound: f.l1_l2() * ratio, late_start, rows })
}

/// Error growth in t at the first ε of the config, with the cascade exhibit.
pub fn run_time_growth(ctx: &Context) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let cfg = &ctx.cfg;
    let eps = cfg.eps_list[0];
    let reference = ctx.reference(eps)?;
    let mut t = Table::new("growth", &ctx.hash, &["ell", "eps", "t", "err_energy"]);
    let mut fits = Table::new("growth_fit", &ctx.hash, &["ell", "intercept", "rate", "exponent"]);
    for &ell in &cfg.ell {
        let errs: Vec<f64> = ctx.errors(ExpansionKind::Spectral, ell, eps, &reference, &cfg.t_list)?.into_iter().map(|e| e.1).collect();
        for (&time, e) in cfg.t_list.iter().zip(&errs) {
            t.push(vec![ell.to_string(), num(eps), num(time), num(*e)]);
        }
        let pts: Vec<(f64, f64)> = cfg.t_list.iter().copied().zip(errs.iter().copied()).filter(|p| p.0 >= 1.0).collect();
        let (rate, intercept) = linear_fit(&pts);
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let exponent = loglog_fit(&x, &y, cfg.tol.floor).slope;
        fits.push(vec![ell.to_string(), num(intercept), num(rate), num(exponent)]);
        if y.iter().all(|v| *v <= 10.0 * cfg.tol.floor) {
            rep.check(format!("error growth ell={ell} (at floor)"), y.iter().copied().fold(0.0, f64::max), "at floor", true);
        } else {
            rep.check(format!("error growth exponent ell={ell}"), exponent, format!("≤ {:.2}", cfg.tol.growth_max), exponent <= cfg.tol.growth_max);
        }
    }
    rep.tables.push(t);
    rep.tables.push(fits);
    let mut c = Table::new("cascade", &ctx.hash, &["ell", "eps", "t", "cascade_grad", "cascade_correction_grad", "revamped_grad", "apriori_bound"]);
    for &ell in cfg.ell.iter().filter(|&&l| l >= 2) {
        let ex = cascade_exhibit(&ctx.sc.b, ell, eps, ctx.a.lambda, &ctx.f, &cfg.t_list)?;
        for r in &ex.rows {
            c.push(vec![ell.to_string(), num(eps), num(r.0), num(r.1), num(r.2), num(r.3), num(ex.apriori_bound)]);
        }
        if ex.cascade_exponent.is_finite() {
            let want = (ell - 1) as f64;
            let s = cfg.tol.slope;
            rep.diagnostic(format!("cascade growth exponent ell={ell}"), ex.cascade_exponent, format!("{want:.1} ± {s}"), (ex.cascade_exponent - want).abs() <= s);
        }
        let worst = ex.rows.iter().map(|r| r.3).fold(0.0, f64::max);
        rep.check(format!("revamped solution within a priori bound ell={ell}"), worst, format!("≤ {:.4e}", ex.apriori_bound), worst <= ex.apriori_bound * (1.0 + 1e-9));
    }
    rep.tables.push(c);
    Ok(rep)
}

/// sup over the configured times of the spectral-expansion error, per ℓ.
pub fn summability(ctx: &Context, eps: f64, ells: &[usize], t_list: &[f64]) -> Result<Vec<f64>> {
    let reference = ctx.reference(eps)?;
    let refs = t_list.par_iter().map(|&t| reference.solve(t)).collect::<Result<Vec<_>>>()?;
    ells.par_iter()
        .map(|&ell| {
            let m = ctx.spectral_modes(ell, eps, t_list)?;
            let mut sup = 0.0f64;
            for (&t, (u, ut)) in t_list.iter().zip(&refs) {
                sup = sup.max(error_norms(u, ut, &ctx.expansion(ExpansionKind::Spectral, ell, eps, &m, t)?)?.energy);
            }
            Ok(sup)
        })
        .collect()
}

/// Whether each step of ℓ reduces `sups` by `factor`, ignoring steps that start at the floor.
pub fn summable(sups: &[f64], factor: f64, floor: f64) -> (bool, f64) {
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for w in sups.windows(2) {
        if w[0] <= 10.0 * floor {
            break;
        }
        let r = w[0] / w[1];
        worst = worst.min(r);
        ok &= r >= factor || w[1] <= 10.0 * floor;
    }
    (ok, worst)
}

pub fn run_summability(ctx: &Context) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let cfg = &ctx.cfg;
    // Summability is a small-ε statement; use the finest scale of the sweep.
    let eps = cfg.eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let mut ells = cfg.ell.clone();
    ells.sort_unstable();
    let sups = summability(ctx, eps, &ells, &cfg.t_list)?;
    let mut t = Table::new("summability", &ctx.hash, &["ell", "eps", "sup_err_energy"]);
    for (l, s) in ells.iter().zip(&sups) {
        t.push(vec![l.to_string(), num(eps), num(*s)]);
    }
    rep.tables.push(t);
    let (ok, worst) = summable(&sups, cfg.tol.summability_factor, cfg.tol.floor);
    rep.check(format!("summability eps={eps}"), worst, format!("reduction ≥ {} per ℓ", cfg.tol.summability_factor), ok);
    Ok(rep)
}

/// Fine-solver energy drift on a small domain (L = 1, ε = 1/4) over [t₁, t₁ + horizon].
pub fn fine_energy_drift(a: &CoefficientField, bump: TimeBump, dt: f64, horizon: f64, seed: u64) -> Result<f64> {
    let d = LineDomain::new(1, 0.25, 32)?;
    let f = Impulse::random_band(bump, 1.0, 4.0, seed);
    let stride = ((0.05 / dt).round() as usize).max(1);
    let traj = integrate(a, &d, &f, &[bump.t1() + horizon], dt, stride)?;
    Ok(energy_drift(&traj.energy_log, bump.t1()))
}

/// Largest fine-vs-Bloch L² difference at ε = 1/16, t = 4 on the configured domain.
pub fn fine_vs_bloch(ctx: &Context, eps: f64, t: f64) -> Result<f64> {
    let domain = LineDomain::new(ctx.cfg.domain.l, eps, ctx.cfg.grid.m)?;
    let traj = integrate(&ctx.a, &domain, &ctx.f, &[t], ctx.cfg.grid.dt, 0)?;
    let g = ctx.reference(eps)?.solve(t)?.0.to_grid(&domain)?;
    let diff: Vec<Complex64> = g.iter().zip(&traj.snapshots[0].u).map(|(a, b)| a - b).collect();
    Ok(domain.l2_norm(&diff))
}

/// The full cross-check suite.
pub fn run_crosschecks(ctx: &Context) -> Result<Report> {
    let mut rep = Report::new(&ctx.hash);
    let tol = ctx.cfg.tol.clone();
    let b = &ctx.sc.b;
    let scale = b[1].abs();
    let even = [2, 4, 6].iter().map(|&n| b[n].abs() / scale).fold(0.0, f64::max);
    rep.check("even b̄ vanish (n = 2, 4, 6)", even, format!("≤ {:.0e}", tol.structural), even <= tol.structural);
    let sym = ctx.hc.check_symmetry(4, 2)?;
    rep.check("ā symmetry (n ≤ 4, m ≤ 2)", sym.max_residual, format!("≤ {:.0e}", tol.structural), sym.max_residual <= tol.structural);
    let rb = revamp_b(&ctx.hc.abar, 5);
    let d = crosscheck_b(&b[..=5], &rb).into_iter().fold(0.0, f64::max);
    rep.check("spectral vs revamped b̄ (p ≤ 5)", d, format!("≤ {:.0e}", tol.coincidence), d <= tol.coincidence);
    let mut corrupted = b[..=5].to_vec();
    corrupted[3] *= 1.01;
    let dc = crosscheck_b(&corrupted, &rb).into_iter().fold(0.0, f64::max);
    // With a constant coefficient b̄³ = 0 and the corruption is invisible.
    let detectable = b[3].abs() > 1e-12 * scale;
    rep.check("corrupted b̄³ detected", dc, format!("> {:.0e}", tol.coincidence), !detectable || dc > tol.coincidence);
    let compat = ctx.sc.compat.max_ratio().max(ctx.hc.compat.max_ratio());
    rep.check("Fredholm means", compat, format!("≤ {:.0e}", tol.structural), compat <= tol.structural);
    let dual = [0.05, 0.2, 0.5].iter().map(|&x| dual_path_discrepancy(&ctx.sc, x)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    rep.check("dual-path correctors", dual, format!("≤ {:.0e}", tol.structural), dual <= tol.structural);
    let mut gmax = 0.0f64;
    for &ell in &ctx.cfg.ell {
        for i in 0..100 {
            gmax = gmax.max(ctx.sc.gamma(ell, -3.0 + 6.0 * i as f64 / 99.0));
        }
    }
    rep.check("γ_ℓ ≤ 1 on 100 samples", gmax, "≤ 1", gmax <= 1.0 + 1e-14);
    rep.merge(bloch_taylor(ctx, &[2, 4])?);
    let fv = fine_vs_bloch(ctx, 1.0 / 16.0, 4.0)?;
    rep.check("fine vs Bloch (ε = 1/16, t = 4)", fv, format!("≤ {:.0e}", tol.fine_oracle), fv <= tol.fine_oracle);
    let drift = fine_energy_drift(&ctx.a, ctx.f.f1, 2.5e-5, 50.0, ctx.cfg.seed)?;
    rep.check("fine energy drift", drift, format!("≤ {:.0e}", tol.energy_drift), drift <= tol.energy_drift);
    let eps3: Vec<f64> = ctx.cfg.eps_list.iter().copied().filter(|e| *e >= 1.0 / 64.0).collect();
    let vc = variant_compare(b, 3, ctx.a.lambda, &eps3, &ctx.f, &ctx.cfg.t_list)?;
    for (p, q, dist) in &vc.pairs {
        let worst: Vec<f64> = dist.iter().map(|d| d.iter().copied().fold(0.0, f64::max)).collect();
        slope_check(&mut rep, format!("variant deviation {p}/{q} ell=3"), &eps3, &worst, 1e-13, 3.0 - tol.slope, f64::INFINITY);
    }
    let refs = ctx.cfg.eps_list.par_iter().map(|&e| ctx.reference(e)).collect::<Result<Vec<_>>>()?;
    for ell in 1..=3 {
        let y = ctx
            .cfg
            .eps_list
            .iter()
            .zip(&refs)
            .map(|(&e, r)| Ok(ctx.errors(ExpansionKind::Hyperbolic, ell, e, r, &[2.0])?[0].1))
            .collect::<Result<Vec<_>>>()?;
        slope_check(&mut rep, format!("hyperbolic energy-error rate ell={ell}"), &ctx.cfg.eps_list, &y, tol.floor, ell as f64 - tol.slope, ell as f64 + tol.slope);
    }
    Ok(rep)
}
