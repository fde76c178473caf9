//! Run configuration: a TOML document with `[system]`, `[bath]` / `[bath.k]`,
//! `[run]`, `[sweep]` and `[output]` tables. Unknown keys are errors.

use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64;
use toml::{Table, Value};

use crate::dynamics::{site_state, validate_density_matrix, CMatrix, MethodMode};
use crate::error::{Error, Result};
use crate::model::{spectral, BathSpec, SiteNetwork, SpectralDensityFamily, TabulatedDensity};

pub const DEFAULT_DT_PS: f64 = 0.001;
pub const DEFAULT_T_MAX_PS: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// 1-based site index.
    Site(usize),
    Matrix(CMatrix),
}

/// Values of the swept parameters; an empty axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sweep {
    pub eta: Vec<f64>,
    pub temperature: Vec<f64>,
    pub initial_site: Vec<usize>,
}

impl Sweep {
    pub fn is_empty(&self) -> bool {
        self.eta.is_empty() && self.temperature.is_empty() && self.initial_site.is_empty()
    }
}

/// One point of a sweep, with the coordinates that were swept.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub eta: Option<f64>,
    pub temperature: f64,
    pub initial_site: Option<usize>,
    /// File prefix; encodes T and every swept coordinate.
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// "fmo7" or "custom".
    pub system_label: String,
    pub network: SiteNetwork,
    /// Per-site densities at eta = 1.
    pub baths: Vec<SpectralDensityFamily>,
    pub temperature: f64,
    pub initial: InitialState,
    pub dt: f64,
    pub t_max: f64,
    pub methods: Vec<MethodMode>,
    pub sweep: Sweep,
    pub output_dir: PathBuf,
    pub cache: bool,
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

impl RunConfig {
    /// Base point followed by nothing else: what `simulate` runs.
    pub fn base_point(&self) -> SweepPoint {
        SweepPoint {
            eta: None,
            temperature: self.temperature,
            initial_site: None,
            label: format!("T{}K", format_number(self.temperature)),
        }
    }

    /// Cartesian product of the sweep axes (eta outermost), or the base point.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let etas: Vec<Option<f64>> = if self.sweep.eta.is_empty() {
            vec![None]
        } else {
            self.sweep.eta.iter().copied().map(Some).collect()
        };
        let temps = if self.sweep.temperature.is_empty() {
            vec![self.temperature]
        } else {
            self.sweep.temperature.clone()
        };
        let sites: Vec<Option<usize>> = if self.sweep.initial_site.is_empty() {
            vec![None]
        } else {
            self.sweep.initial_site.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &eta in &etas {
            for &t in &temps {
                for &site in &sites {
                    let mut label = String::new();
                    if let Some(e) = eta {
                        label.push_str(&format!("eta{e:?}_"));
                    }
                    label.push_str(&format!("T{}K", format_number(t)));
                    if let Some(s) = site {
                        label.push_str(&format!("_site{s}"));
                    }
                    out.push(SweepPoint {
                        eta,
                        temperature: t,
                        initial_site: site,
                        label,
                    });
                }
            }
        }
        out
    }

    pub fn n_sites(&self) -> usize {
        self.network.n_sites()
    }

    /// Bath specification at a sweep point.
    pub fn baths_at(&self, point: &SweepPoint) -> Result<BathSpec> {
        let eta = point.eta.unwrap_or(1.0);
        let families = self
            .baths
            .iter()
            .map(|f| scale_family(f, eta))
            .collect::<Result<Vec<_>>>()?;
        BathSpec::new(families, point.temperature)
    }

    pub fn initial_state_at(&self, point: &SweepPoint) -> Result<CMatrix> {
        match (point.initial_site, &self.initial) {
            (Some(site), _) => site_state(self.n_sites(), site - 1),
            (None, InitialState::Site(site)) => site_state(self.n_sites(), site - 1),
            (None, InitialState::Matrix(m)) => Ok(m.clone()),
        }
    }
}

/// Multiplies the overall coupling strength of a density by `eta`.
pub fn scale_family(family: &SpectralDensityFamily, eta: f64) -> Result<SpectralDensityFamily> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidInput(format!("eta must be finite and >= 0, got {eta}")));
    }
    match *family {
        SpectralDensityFamily::CubicExponential { lambda, omega_c } => SpectralDensityFamily::cubic(lambda * eta, omega_c),
        SpectralDensityFamily::FmoSmooth {
            eta: e0,
            omega_1,
            omega_2,
            c_1,
            c_2,
        } => SpectralDensityFamily::fmo_with(e0 * eta, omega_1, omega_2, c_1, c_2),
        SpectralDensityFamily::Tabulated(ref tab) => {
            let (omega, values) = tab.knots();
            Ok(SpectralDensityFamily::Tabulated(TabulatedDensity::new(
                omega.to_vec(),
                values.iter().map(|v| v * eta).collect(),
            )?))
        }
    }
}

struct Diagnostics(Vec<String>);

impl Diagnostics {
    fn push(&mut self, field: &str, msg: impl AsRef<str>) {
        self.0.push(format!("{field}: {}", msg.as_ref()));
    }

    fn number(&mut self, field: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.push(field, format!("expected a number, found {}", v.type_str()));
                None
            }
        }
    }

    fn numbers(&mut self, field: &str, v: &Value) -> Option<Vec<f64>> {
        let Value::Array(items) = v else {
            self.push(field, format!("expected an array of numbers, found {}", v.type_str()));
            return None;
        };
        items
            .iter()
            .enumerate()
            .map(|(i, x)| self.number(&format!("{field}[{i}]"), x))
            .collect()
    }

    fn matrix(&mut self, field: &str, v: &Value) -> Option<Vec<Vec<f64>>> {
        let Value::Array(rows) = v else {
            self.push(field, format!("expected an array of rows, found {}", v.type_str()));
            return None;
        };
        rows.iter()
            .enumerate()
            .map(|(i, r)| self.numbers(&format!("{field}[{i}]"), r))
            .collect()
    }

    fn positive_integer(&mut self, field: &str, v: &Value) -> Option<usize> {
        match v {
            Value::Integer(i) if *i >= 1 => Some(*i as usize),
            _ => {
                self.push(field, "expected a positive integer");
                None
            }
        }
    }

    fn table<'a>(&mut self, field: &str, v: &'a Value) -> Option<&'a Table> {
        match v {
            Value::Table(t) => Some(t),
            _ => {
                self.push(field, format!("expected a table, found {}", v.type_str()));
                None
            }
        }
    }

    fn unknown_keys(&mut self, section: &str, table: &Table, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                let path = if section.is_empty() { key.clone() } else { format!("{section}.{key}") };
                self.push(&path, format!("unknown key (expected one of: {})", allowed.join(", ")));
            }
        }
    }
}

const BATH_KEYS: [&str; 10] = [
    "family", "lambda", "omega_c", "eta", "omega_1", "omega_2", "c_1", "c_2", "omega", "values",
];

/// Bath parameters for one site: the site table layered over the shared one.
fn build_family(d: &mut Diagnostics, field: &str, shared: &Table, site: Option<&Table>) -> Option<SpectralDensityFamily> {
    let get = |key: &str| site.and_then(|t| t.get(key)).or_else(|| shared.get(key));
    let Some(family) = get("family") else {
        d.push(&format!("{field}.family"), "missing (cubic, fmo or tabulated)");
        return None;
    };
    let Value::String(family) = family else {
        d.push(&format!("{field}.family"), "expected a string");
        return None;
    };
    let allowed: &[&str] = match family.as_str() {
        "cubic" => &["family", "lambda", "omega_c"],
        "fmo" => &["family", "eta", "omega_1", "omega_2", "c_1", "c_2"],
        "tabulated" => &["family", "omega", "values"],
        other => {
            d.push(&format!("{field}.family"), format!("unknown family '{other}' (cubic, fmo or tabulated)"));
            return None;
        }
    };
    for key in BATH_KEYS {
        if !allowed.contains(&key) && get(key).is_some() {
            d.push(&format!("{field}.{key}"), format!("not a parameter of family '{family}'"));
        }
    }
    let num = |d: &mut Diagnostics, key: &str, default: Option<f64>| -> Option<f64> {
        match get(key) {
            Some(v) => d.number(&format!("{field}.{key}"), v),
            None => {
                if default.is_none() {
                    d.push(&format!("{field}.{key}"), "missing");
                }
                default
            }
        }
    };
    let built = match family.as_str() {
        "cubic" => {
            let lambda = num(d, "lambda", None);
            let omega_c = num(d, "omega_c", None);
            SpectralDensityFamily::cubic(lambda?, omega_c?)
        }
        "fmo" => {
            let eta = num(d, "eta", Some(1.0));
            let w1 = num(d, "omega_1", Some(spectral::FMO_OMEGA_1));
            let w2 = num(d, "omega_2", Some(spectral::FMO_OMEGA_2));
            let c1 = num(d, "c_1", Some(spectral::FMO_C1));
            let c2 = num(d, "c_2", Some(spectral::FMO_C2));
            SpectralDensityFamily::fmo_with(eta?, w1?, w2?, c1?, c2?)
        }
        _ => {
            let omega = get("omega").and_then(|v| d.numbers(&format!("{field}.omega"), v));
            let values = get("values").and_then(|v| d.numbers(&format!("{field}.values"), v));
            if omega.is_none() || values.is_none() {
                if get("omega").is_none() || get("values").is_none() {
                    d.push(field, "tabulated family needs 'omega' and 'values'");
                }
                return None;
            }
            TabulatedDensity::new(omega?, values?).map(SpectralDensityFamily::Tabulated)
        }
    };
    match built {
        Ok(f) => Some(f),
        Err(e) => {
            d.push(field, e.to_string());
            None
        }
    }
}

fn parse_system(d: &mut Diagnostics, root: &Table) -> Option<(String, SiteNetwork)> {
    let Some(v) = root.get("system") else {
        d.push("system", "missing section");
        return None;
    };
    let sys = d.table("system", v)?;
    d.unknown_keys("system", sys, &["preset", "energies", "couplings"]);
    if let Some(p) = sys.get("preset") {
        if sys.contains_key("energies") || sys.contains_key("couplings") {
            d.push("system", "give either 'preset' or 'energies' and 'couplings', not both");
        }
        return match p {
            Value::String(s) if s == "fmo7" => Some(("fmo7".into(), SiteNetwork::fmo7())),
            _ => {
                d.push("system.preset", "unknown preset (available: fmo7)");
                None
            }
        };
    }
    let energies = match sys.get("energies") {
        Some(v) => d.numbers("system.energies", v),
        None => {
            d.push("system.energies", "missing (or give 'preset')");
            None
        }
    };
    let n = energies.as_ref().map_or(0, Vec::len);
    let couplings = match sys.get("couplings") {
        Some(v) => d.matrix("system.couplings", v),
        // a lone site needs no coupling matrix
        None if n == 1 => Some(vec![vec![0.0]]),
        None => {
            d.push("system.couplings", "missing");
            None
        }
    };
    let (energies, rows) = (energies?, couplings?);
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        d.push("system.couplings", format!("must be a {n}x{n} matrix to match {n} site energies"));
        return None;
    }
    let v = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    match SiteNetwork::new(energies, v) {
        Ok(net) => Some(("custom".into(), net)),
        Err(e) => {
            d.push("system", e.to_string());
            None
        }
    }
}

fn parse_baths(d: &mut Diagnostics, root: &Table, n_sites: Option<usize>) -> Option<Vec<SpectralDensityFamily>> {
    let Some(v) = root.get("bath") else {
        d.push("bath", "missing section");
        return None;
    };
    let bath = d.table("bath", v)?;
    let mut shared = Table::new();
    let mut per_site: Vec<(usize, &Table)> = Vec::new();
    for (key, value) in bath {
        if let Ok(k) = key.parse::<usize>() {
            if k == 0 {
                d.push(&format!("bath.{key}"), "sites are numbered from 1");
                continue;
            }
            if let Some(t) = d.table(&format!("bath.{key}"), value) {
                d.unknown_keys(&format!("bath.{key}"), t, &BATH_KEYS);
                per_site.push((k, t));
            }
        } else if BATH_KEYS.contains(&key.as_str()) {
            shared.insert(key.clone(), value.clone());
        } else {
            d.push(
                &format!("bath.{key}"),
                format!("unknown key (expected a site number or one of: {})", BATH_KEYS.join(", ")),
            );
        }
    }
    let n = n_sites?;
    if per_site.is_empty() {
        return build_family(d, "bath", &shared, None).map(|f| vec![f; n]);
    }
    per_site.sort_by_key(|(k, _)| *k);
    if per_site.len() != n || per_site.iter().enumerate().any(|(i, (k, _))| *k != i + 1) {
        d.push(
            "bath",
            format!(
                "per-site bath list has {} entries ({}), system has {n} sites; give [bath.1] .. [bath.{n}] or none",
                per_site.len(),
                per_site.iter().map(|(k, _)| k.to_string()).collect::<Vec<_>>().join(", ")
            ),
        );
        return None;
    }
    per_site
        .iter()
        .map(|(k, t)| build_family(d, &format!("bath.{k}"), &shared, Some(t)))
        .collect()
}

fn parse_methods(d: &mut Diagnostics, v: &Value) -> Option<Vec<MethodMode>> {
    let Value::Array(items) = v else {
        d.push("run.methods", "expected an array of strings");
        return None;
    };
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match item.as_str().map(str::parse::<MethodMode>) {
            Some(Ok(m)) if !out.contains(&m) => out.push(m),
            Some(Ok(m)) => d.push(&format!("run.methods[{i}]"), format!("'{m}' listed twice")),
            _ => d.push(
                &format!("run.methods[{i}]"),
                "expected one of \"variational\", \"polaron\", \"weak\"",
            ),
        }
    }
    if out.is_empty() && !items.is_empty() {
        return None;
    }
    if items.is_empty() {
        d.push("run.methods", "must name at least one method");
        return None;
    }
    Some(out)
}

fn parse_initial_matrix(d: &mut Diagnostics, run: &Table, n: usize) -> Option<CMatrix> {
    let re = d.matrix("run.initial_state_re", run.get("initial_state_re")?)?;
    let im = match run.get("initial_state_im") {
        Some(v) => d.matrix("run.initial_state_im", v)?,
        None => vec![vec![0.0; n]; n],
    };
    let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
    if !square(&re) || !square(&im) {
        d.push("run.initial_state_re", format!("initial state must be {n}x{n}"));
        return None;
    }
    let rho = DMatrix::from_fn(n, n, |i, j| Complex64::new(re[i][j], im[i][j]));
    if let Err(e) = validate_density_matrix(&rho, n) {
        d.push("run.initial_state_re", e.to_string());
        return None;
    }
    Some(rho)
}

/// Parses and validates a configuration document, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    from_table(&root)
}

/// Validates an already parsed document (e.g. after `--override` edits).
pub fn from_table(root: &Table) -> Result<RunConfig> {
    let mut d = Diagnostics(Vec::new());
    d.unknown_keys("", root, &["system", "bath", "run", "sweep", "output"]);
    let system = parse_system(&mut d, root);
    let n_sites = system.as_ref().map(|(_, net)| net.n_sites());
    let baths = parse_baths(&mut d, root, n_sites);

    let empty = Table::new();
    let run = match root.get("run") {
        Some(v) => d.table("run", v).unwrap_or(&empty),
        None => {
            d.push("run", "missing section");
            &empty
        }
    };
    d.unknown_keys(
        "run",
        run,
        &["temperature_K", "initial_site", "initial_state_re", "initial_state_im", "dt_ps", "t_max_ps", "methods"],
    );
    let temperature = match run.get("temperature_K") {
        Some(v) => d.number("run.temperature_K", v).filter(|&t| {
            let ok = t > 0.0 && t.is_finite();
            if !ok {
                d.0.push(format!("run.temperature_K: must be positive, got {t}"));
            }
            ok
        }),
        None => {
            d.push("run.temperature_K", "missing");
            None
        }
    };
    let dt = run.get("dt_ps").map_or(Some(DEFAULT_DT_PS), |v| d.number("run.dt_ps", v));
    let t_max = run.get("t_max_ps").map_or(Some(DEFAULT_T_MAX_PS), |v| d.number("run.t_max_ps", v));
    if let (Some(dt), Some(t_max)) = (dt, t_max) {
        if let Err(e) = crate::corr::TimeGrid::new(dt, t_max) {
            d.push("run.dt_ps", e.to_string());
        }
    }
    let methods = run.get("methods").map_or(Some(MethodMode::ALL.to_vec()), |v| parse_methods(&mut d, v));
    let initial = match (run.get("initial_site"), run.get("initial_state_re"), n_sites) {
        (Some(_), Some(_), _) => {
            d.push("run", "give either 'initial_site' or 'initial_state_re', not both");
            None
        }
        (None, Some(_), Some(n)) => parse_initial_matrix(&mut d, run, n).map(InitialState::Matrix),
        (None, None, _) if run.contains_key("initial_state_im") => {
            d.push("run.initial_state_im", "needs 'initial_state_re'");
            None
        }
        (site, None, n) => {
            let s = site.map_or(Some(1), |v| d.positive_integer("run.initial_site", v));
            match (s, n) {
                (Some(s), Some(n)) if s > n => {
                    d.push("run.initial_site", format!("site {s} does not exist in a {n}-site system"));
                    None
                }
                (s, _) => s.map(InitialState::Site),
            }
        }
        _ => None,
    };

    let mut sweep = Sweep::default();
    if let Some(v) = root.get("sweep") {
        if let Some(t) = d.table("sweep", v) {
            d.unknown_keys("sweep", t, &["eta", "temperature_K", "initial_site"]);
            if let Some(v) = t.get("eta") {
                sweep.eta = d.numbers("sweep.eta", v).unwrap_or_default();
                if sweep.eta.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
                    d.push("sweep.eta", "values must be finite and >= 0");
                }
            }
            if let Some(v) = t.get("temperature_K") {
                sweep.temperature = d.numbers("sweep.temperature_K", v).unwrap_or_default();
                if sweep.temperature.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                    d.push("sweep.temperature_K", "values must be positive");
                }
            }
            if let Some(v) = t.get("initial_site") {
                match v {
                    Value::Array(items) => {
                        for (i, item) in items.iter().enumerate() {
                            if let Some(s) = d.positive_integer(&format!("sweep.initial_site[{i}]"), item) {
                                if n_sites.is_some_and(|n| s > n) {
                                    d.push(&format!("sweep.initial_site[{i}]"), format!("site {s} does not exist"));
                                }
                                sweep.initial_site.push(s);
                            }
                        }
                    }
                    _ => d.push("sweep.initial_site", "expected an array of site numbers"),
                }
            }
        }
    }

    let mut output_dir = PathBuf::from("output");
    let mut cache = true;
    if let Some(v) = root.get("output") {
        if let Some(t) = d.table("output", v) {
            d.unknown_keys("output", t, &["dir", "cache"]);
            match t.get("dir") {
                Some(Value::String(s)) => output_dir = PathBuf::from(s),
                Some(_) => d.push("output.dir", "expected a string"),
                None => {}
            }
            match t.get("cache") {
                Some(Value::Boolean(b)) => cache = *b,
                Some(_) => d.push("output.cache", "expected true or false"),
                None => {}
            }
        }
    }

    if !d.0.is_empty() {
        return Err(Error::Config(d.0));
    }
    let ((system_label, network), baths, temperature, dt, t_max, methods, initial) = (
        system.expect("no diagnostics"),
        baths.expect("no diagnostics"),
        temperature.expect("no diagnostics"),
        dt.expect("no diagnostics"),
        t_max.expect("no diagnostics"),
        methods.expect("no diagnostics"),
        initial.expect("no diagnostics"),
    );
    Ok(RunConfig {
        system_label,
        network,
        baths,
        temperature,
        initial,
        dt,
        t_max,
        methods,
        sweep,
        output_dir,
        cache,
    })
}

/// Applies `key=value` edits, where key is a dotted path such as `run.temperature_K`
/// and value is a TOML value (bare words are taken as strings).
pub fn apply_overrides(root: &mut Table, overrides: &[String]) -> Result<()> {
    let mut diags = Vec::new();
    for item in overrides {
        let Some((key, raw)) = item.split_once('=') else {
            diags.push(format!("override '{item}': expected key=value"));
            continue;
        };
        let path: Vec<&str> = key.trim().split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            diags.push(format!("override '{item}': malformed key"));
            continue;
        }
        let raw = raw.trim();
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("just inserted"),
            Err(_) => Value::String(raw.to_string()),
        };
        if let Err(part) = set_path(root, &path, value) {
            diags.push(format!("override '{item}': '{part}' is not a table"));
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(diags))
    }
}

fn set_path(table: &mut Table, path: &[&str], value: Value) -> std::result::Result<(), String> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = table;
    for part in parents {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = match entry {
            Value::Table(t) => t,
            _ => return Err(part.to_string()),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}
