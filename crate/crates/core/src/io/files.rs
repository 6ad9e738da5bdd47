//! Trajectory and curve files.
//!
//! Trajectories are CSV with a `# key=value` header (`dt` and `K` required,
//! `model`, `seed`, `burn_in` optional) and one row per step. Floats are
//! written in the shortest form that parses back to the same bits. A `.bin`
//! path selects packed little-endian f64 rows with the header in a sidecar
//! `<path>.hdr`.
//!
//! Curves are CSV with the columns `lag, value_1..value_J, stderr_1..stderr_J`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::ResponseCurve;
use crate::model::{Origin, Trajectory};

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn header_lines(traj: &Trajectory) -> String {
    let mut h = format!("# dt={:?}\n# K={}\n", traj.dt(), traj.dim());
    let o = &traj.origin;
    if !o.model.is_empty() {
        h.push_str(&format!("# model={}\n", o.model));
    }
    if let Some(seed) = o.seed {
        h.push_str(&format!("# seed={seed}\n"));
    }
    if o.burn_in > 0 {
        h.push_str(&format!("# burn_in={}\n", o.burn_in));
    }
    h
}

fn parse_header(keys: &BTreeMap<String, String>, source: &Path) -> Result<(f64, usize, Origin)> {
    let get = |k: &str| {
        keys.get(k)
            .ok_or_else(|| Error::Format(format!("{}: missing header key `{k}`", source.display())))
    };
    let bad = |k: &str, v: &str| {
        Error::Format(format!(
            "{}: bad value `{v}` for header key `{k}`",
            source.display()
        ))
    };
    let dt_s = get("dt")?;
    let dt: f64 = dt_s.parse().map_err(|_| bad("dt", dt_s))?;
    let k_s = get("K")?;
    let k: usize = k_s.parse().map_err(|_| bad("K", k_s))?;
    let seed = match keys.get("seed") {
        Some(s) => Some(s.parse().map_err(|_| bad("seed", s))?),
        None => None,
    };
    let burn_in = match keys.get("burn_in") {
        Some(s) => s.parse().map_err(|_| bad("burn_in", s))?,
        None => 0,
    };
    let origin = Origin {
        model: keys.get("model").cloned().unwrap_or_default(),
        seed,
        burn_in,
    };
    Ok((dt, k, origin))
}

fn header_entry(line: &str) -> Option<(String, String)> {
    let body = line.strip_prefix('#')?.trim();
    let (k, v) = body.split_once('=')?;
    Some((k.trim().to_string(), v.trim().to_string()))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    if is_binary(path) {
        fs::write(sidecar(path), header_lines(traj))?;
        let mut w = BufWriter::new(fs::File::create(path)?);
        for v in traj.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        return Ok(());
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(header_lines(traj).as_bytes())?;
    for row in traj.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    if is_binary(path) {
        let hdr = sidecar(path);
        let text = fs::read_to_string(&hdr)?;
        let keys = text.lines().filter_map(header_entry).collect();
        let (dt, k, origin) = parse_header(&keys, &hdr)?;
        let bytes = fs::read(path)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Format(format!(
                "{}: length is not a multiple of 8 bytes",
                path.display()
            )));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        if k == 0 || data.len() % k != 0 {
            return Err(Error::Format(format!(
                "{}: {} values do not form rows of K = {k}",
                path.display(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "{}: non-finite value in row {}",
                path.display(),
                i / k + 1
            )));
        }
        return Ok(Trajectory::new(dt, k, data)?.with_origin(origin));
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut keys = BTreeMap::new();
    let mut data = Vec::new();
    let mut width = None;
    let mut row = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if row > 0 {
                return Err(Error::Format(format!(
                    "{}:{}: header line after data",
                    path.display(),
                    lineno + 1
                )));
            }
            if let Some((k, v)) = header_entry(line) {
                keys.insert(k, v);
            }
            continue;
        }
        row += 1;
        let mut n = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "{}: row {row} (line {}): cannot parse `{field}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "{}: row {row} (line {}): non-finite value",
                    path.display(),
                    lineno + 1
                )));
            }
            data.push(v);
            n += 1;
        }
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(Error::Format(format!(
                    "{}: row {row} has {n} columns, expected {w}",
                    path.display()
                )))
            }
            _ => {}
        }
    }
    let (dt, k, origin) = parse_header(&keys, path)?;
    if let Some(w) = width {
        if w != k {
            return Err(Error::Format(format!(
                "{}: rows have {w} columns but K = {k}",
                path.display()
            )));
        }
    }
    Ok(Trajectory::new(dt, k, data)?.with_origin(origin))
}

pub fn write_curve(path: &Path, curve: &ResponseCurve) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_curve_to(&mut w, curve)?;
    w.flush()?;
    Ok(())
}

pub fn write_curve_to<W: Write>(w: &mut W, curve: &ResponseCurve) -> Result<()> {
    let j = curve.width();
    let mut head = vec!["lag".to_string()];
    head.extend((1..=j).map(|i| format!("value_{i}")));
    head.extend((1..=j).map(|i| format!("stderr_{i}")));
    writeln!(w, "{}", head.join(","))?;
    for ((lag, v), s) in curve.lags.iter().zip(&curve.values).zip(&curve.stderr) {
        let mut row = vec![format!("{lag:?}")];
        row.extend(v.iter().chain(s).map(|x| format!("{x:?}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<ResponseCurve> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty curve file", path.display())))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols.first() != Some(&"lag") || cols.len() % 2 == 0 {
        return Err(Error::Format(format!(
            "{}: header must be lag, value_1..value_J, stderr_1..stderr_J",
            path.display()
        )));
    }
    let j = (cols.len() - 1) / 2;
    let (mut lags, mut values, mut stderr) = (Vec::new(), Vec::new(), Vec::new());
    for (lineno, line) in lines {
        let nums = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                Error::Format(format!(
                    "{}:{}: cannot parse row",
                    path.display(),
                    lineno + 1
                ))
            })?;
        if nums.len() != cols.len() {
            return Err(Error::Format(format!(
                "{}:{}: {} columns, expected {}",
                path.display(),
                lineno + 1,
                nums.len(),
                cols.len()
            )));
        }
        lags.push(nums[0]);
        values.push(nums[1..=j].to_vec());
        stderr.push(nums[j + 1..].to_vec());
    }
    ResponseCurve::new(lags, values, stderr)
}
