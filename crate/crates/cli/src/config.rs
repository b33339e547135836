use crate::{Common, Failure};
use std::path::{Path, PathBuf};
use warpframe::coeffspaces::{parse_exponent, MixedNormSpec};
use warpframe::presets::{resolve_warp, Preset};
use warpframe::transform::{FreqGrid, Prototype};
use warpframe::{Domain, Warp};

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

pub fn warp(c: &Common) -> Result<Warp, Failure> {
    match (&c.warp, &c.preset) {
        (Some(w), None) => Ok(resolve_warp(w)?),
        (None, Some(p)) => Ok(Preset::parse(p)?.build()?),
        (None, None) => Err(usage("one of --warp or --preset is required")),
        (Some(_), Some(_)) => Err(usage("--warp and --preset are exclusive")),
    }
}

/// Short label used in metadata.
pub fn warp_label(c: &Common) -> String {
    c.preset.clone().or_else(|| c.warp.clone()).unwrap_or_default()
}

pub fn theta(c: &Common, d: usize) -> Result<Prototype, Failure> {
    Ok(Prototype::parse(&c.theta, d)?)
}

fn parse_ranges(s: &str, d: usize, what: &str) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part.split_once(':').ok_or_else(|| usage(format!("{what}: expected lo:hi, got '{part}'")))?;
        let a: f64 = a.trim().parse().map_err(|_| usage(format!("{what}: bad number '{a}'")))?;
        let b: f64 = b.trim().parse().map_err(|_| usage(format!("{what}: bad number '{b}'")))?;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(usage(format!("{what}: need finite lo < hi, got {a}:{b}")));
        }
        lo.push(a);
        hi.push(b);
    }
    if lo.len() == 1 && d > 1 {
        lo = vec![lo[0]; d];
        hi = vec![hi[0]; d];
    }
    if lo.len() != d {
        return Err(usage(format!("{what}: {} ranges for dimension {d}", lo.len())));
    }
    Ok((lo, hi))
}

pub fn freq_box(c: &Common, w: &Warp) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let default = match w.domain() {
        Domain::Full => "-8:8",
        _ => "0.1:16",
    };
    parse_ranges(c.freq_box.as_deref().unwrap_or(default), w.dim(), "--box")
}

pub fn time_extent(c: &Common, d: usize) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    parse_ranges(c.time_extent.as_deref().unwrap_or("-4:4"), d, "--time-extent")
}

pub fn grid(c: &Common, w: &Warp) -> Result<FreqGrid, Failure> {
    let d = w.dim();
    let n = c.n.unwrap_or(match d {
        1 => 512,
        2 => 64,
        _ => 16,
    });
    if n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let (lo, hi) = freq_box(c, w)?;
    let g = FreqGrid::new(lo, hi, vec![n; d])?;
    g.check_inside(w)?;
    Ok(g)
}

pub fn delta(c: &Common) -> Result<f64, Failure> {
    if c.delta > 0.0 && c.delta.is_finite() {
        Ok(c.delta)
    } else {
        Err(usage(format!("--delta must be positive, got {}", c.delta)))
    }
}

pub fn delta_list(c: &Common) -> Result<Vec<f64>, Failure> {
    let list = c.delta_list.clone().unwrap_or_else(|| vec![1.0, 0.5, 0.25]);
    if list.is_empty() || list.iter().any(|x| !(*x > 0.0 && x.is_finite())) || list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(usage("--delta-list must be positive and strictly decreasing"));
    }
    Ok(list)
}

pub fn mixed_norm(c: &Common) -> Result<MixedNormSpec, Failure> {
    Ok(MixedNormSpec::new(parse_exponent(&c.p)?, parse_exponent(&c.q)?)?)
}

/// κ(y, ω) = (1+|ω|)^s; `1` is s = 0.
pub fn kappa_exponent(c: &Common) -> Result<f64, Failure> {
    let k = c.kappa.trim();
    if k == "1" {
        return Ok(0.0);
    }
    let s = k.strip_prefix("poly:").ok_or_else(|| usage(format!("--kappa: expected 1 or poly:s, got '{k}'")))?;
    s.parse::<f64>().ok().filter(|s| s.is_finite()).ok_or_else(|| usage(format!("--kappa: bad exponent '{s}'")))
}

pub fn tol(c: &Common, default: f64) -> Result<f64, Failure> {
    let t = c.tol.unwrap_or(default);
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(usage(format!("--tol must be positive, got {t}")))
    }
}

pub fn input(p: &Path) -> Result<PathBuf, Failure> {
    if p.is_file() {
        Ok(p.to_path_buf())
    } else {
        Err(Failure::Io(format!("{}: no such file", p.display())))
    }
}

/// Output path with an existing parent directory.
pub fn output(c: &Common, required: bool) -> Result<Option<PathBuf>, Failure> {
    match &c.out {
        None if required => Err(usage("--out is required")),
        None => Ok(None),
        Some(p) => {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if parent.is_dir() {
                Ok(Some(p.clone()))
            } else {
                Err(Failure::Io(format!("{}: directory does not exist", parent.display())))
            }
        }
    }
}
