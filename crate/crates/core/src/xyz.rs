//! Extended-XYZ reading and writing (orthorhombic cells only).
//!
//! ```text
//! 2
//! Lattice="4 0 0 0 0 0 0 0 0" Properties=species:S:1:pos:R:3 pbc="T F F" name="A+"
//! C 0.00000000000000000e0 0.00000000000000000e0 1.00000000000000000e0
//! W 1.00000000000000000e0 1.00000000000000000e0 2.00000000000000000e0
//! ```
//!
//! Coordinates are written with 17 significant digits, so a write/read
//! round trip reproduces every f64 exactly. Open axes get a zero lattice
//! vector.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Atom, Cell, LabeledPointCloud};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits `key=value key2="quoted value"` into pairs. Keys are lowercased.
fn comment_pairs(line: &str, lineno: usize) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut chars = line.trim().chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        let value = if chars.peek() == Some(&'=') {
            chars.next();
            let mut v = String::new();
            if chars.peek() == Some(&'"') {
                chars.next();
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == '"' {
                        closed = true;
                        break;
                    }
                    v.push(c);
                }
                if !closed {
                    return Err(parse_err(lineno, format!("unterminated quote in value of {key}")));
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    v.push(c);
                    chars.next();
                }
            }
            v
        } else {
            // bare flag
            "T".to_string()
        };
        out.insert(key.to_ascii_lowercase(), value);
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "T" | "t" | "True" | "true" | "1" => Some(true),
        "F" | "f" | "False" | "false" | "0" => Some(false),
        _ => None,
    }
}

struct Columns {
    total: usize,
    species: usize,
    pos: usize,
}

fn parse_properties(spec: &str, lineno: usize) -> Result<Columns> {
    let fields: Vec<&str> = spec.split(':').collect();
    if fields.len() % 3 != 0 {
        return Err(parse_err(lineno, format!("malformed Properties '{spec}'")));
    }
    let (mut col, mut species, mut pos) = (0, None, None);
    for f in fields.chunks(3) {
        let width: usize = f[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad column count '{}' in Properties", f[2])))?;
        match (f[0].to_ascii_lowercase().as_str(), f[1], width) {
            ("species", "S", 1) => species = Some(col),
            ("pos", "R", 3) => pos = Some(col),
            ("species" | "pos", t, w) => {
                return Err(parse_err(lineno, format!("unexpected type {t}:{w} for property {}", f[0])));
            }
            _ => {}
        }
        col += width;
    }
    match (species, pos) {
        (Some(species), Some(pos)) => Ok(Columns { total: col, species, pos }),
        _ => Err(parse_err(lineno, "Properties must contain species:S:1 and pos:R:3")),
    }
}

fn parse_cell(keys: &BTreeMap<String, String>, lineno: usize) -> Result<Cell> {
    let Some(lattice) = keys.get("lattice") else {
        if let Some(pbc) = keys.get("pbc") {
            if pbc.split_whitespace().any(|f| parse_bool(f) == Some(true)) {
                return Err(parse_err(lineno, "pbc has periodic axes but no Lattice is given"));
            }
        }
        return Ok(Cell::open());
    };
    let v: Vec<f64> = lattice
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad Lattice entry '{t}'"))))
        .collect::<Result<_>>()?;
    if v.len() != 9 {
        return Err(parse_err(lineno, format!("Lattice needs 9 numbers, found {}", v.len())));
    }
    for (k, x) in v.iter().enumerate() {
        if k % 4 != 0 && *x != 0.0 {
            return Err(Error::UnsupportedLattice(format!(
                "lattice vector {} has off-axis component {x}",
                k / 3 + 1
            )));
        }
    }
    let pbc: [bool; 3] = match keys.get("pbc") {
        None => [true; 3],
        Some(s) => {
            let flags: Vec<bool> = s
                .split_whitespace()
                .map(|t| parse_bool(t).ok_or_else(|| parse_err(lineno, format!("bad pbc flag '{t}'"))))
                .collect::<Result<_>>()?;
            flags
                .try_into()
                .map_err(|f: Vec<bool>| parse_err(lineno, format!("pbc needs 3 flags, found {}", f.len())))?
        }
    };
    let mut periods = [None; 3];
    for axis in 0..3 {
        if pbc[axis] {
            let p = v[4 * axis];
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidCell(format!("periodic axis {axis} has length {p}")));
            }
            periods[axis] = Some(p);
        }
    }
    Cell::new(periods)
}

/// Parses the first frame of an extended-XYZ document.
pub fn read_xyz_str(text: &str) -> Result<LabeledPointCloud> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (l1, count) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let n: usize = count
        .trim()
        .parse()
        .map_err(|_| parse_err(l1, format!("expected atom count, found '{}'", count.trim())))?;
    let (l2, comment) = lines.next().ok_or_else(|| parse_err(2, "missing comment line"))?;
    let keys = comment_pairs(comment, l2)?;
    let cols = match keys.get("properties") {
        Some(p) => parse_properties(p, l2)?,
        None => Columns {
            total: 4,
            species: 0,
            pos: 1,
        },
    };
    let cell = parse_cell(&keys, l2)?;
    let mut atoms = Vec::with_capacity(n);
    for k in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(l2 + k + 1, format!("expected {n} atom lines, found {k}")))?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < cols.total {
            return Err(parse_err(ln, format!("expected {} columns, found {}", cols.total, tok.len())));
        }
        let mut r = [0.0f64; 3];
        for (axis, x) in r.iter_mut().enumerate() {
            let t = tok[cols.pos + axis];
            *x = t
                .parse()
                .map_err(|_| parse_err(ln, format!("bad coordinate '{t}'")))?;
            if !x.is_finite() {
                return Err(parse_err(ln, format!("non-finite coordinate '{t}'")));
            }
        }
        atoms.push(Atom::new(tok[cols.species], r));
    }
    let cloud = LabeledPointCloud::new(atoms, cell)?;
    Ok(match keys.get("name") {
        Some(name) => cloud.with_name(name.clone()),
        None => cloud,
    })
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_xyz_str(&text)
}

pub fn write_xyz_string(cloud: &LabeledPointCloud) -> String {
    let mut out = format!("{}\n", cloud.len());
    let periods = cloud.cell().periods();
    let mut header = Vec::new();
    if !cloud.cell().is_open() {
        let d = |a: usize| periods[a].map_or("0".to_string(), |p| format!("{p:?}"));
        header.push(format!(
            "Lattice=\"{} 0 0 0 {} 0 0 0 {}\"",
            d(0),
            d(1),
            d(2)
        ));
    }
    header.push("Properties=species:S:1:pos:R:3".to_string());
    let flags: Vec<&str> = cloud.cell().pbc().iter().map(|&b| if b { "T" } else { "F" }).collect();
    header.push(format!("pbc=\"{}\"", flags.join(" ")));
    if !cloud.name().is_empty() {
        header.push(format!("name=\"{}\"", cloud.name().replace('"', "'")));
    }
    out.push_str(&header.join(" "));
    out.push('\n');
    for atom in cloud.atoms() {
        let r = atom.position;
        out.push_str(&format!(
            "{} {:.16e} {:.16e} {:.16e}\n",
            atom.species, r[0], r[1], r[2]
        ));
    }
    out
}

pub fn write_xyz(path: impl AsRef<Path>, cloud: &LabeledPointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_xyz_string(cloud)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let cloud = LabeledPointCloud::new(
            vec![Atom::new("C", [0.1, -2.0 / 3.0, 1e-17]), Atom::new("W", [1.0, 7.25, -3.0])],
            Cell::periodic_x(4.1).unwrap(),
        )
        .unwrap()
        .with_name("A+");
        let text = write_xyz_string(&cloud);
        assert!(text.contains("pbc=\"T F F\""), "{text}");
        assert_eq!(read_xyz_str(&text).unwrap(), cloud);
    }

    #[test]
    fn fully_periodic_file() {
        let text = "1\nLattice=\"2 0 0 0 3 0 0 0 4\" Properties=species:S:1:pos:R:3 pbc=\"T T T\"\nSi 0 0 0\n";
        let c = read_xyz_str(text).unwrap();
        assert_eq!(c.cell().periods(), [Some(2.0), Some(3.0), Some(4.0)]);
    }

    #[test]
    fn skewed_lattice_rejected() {
        let text = "1\nLattice=\"2 0 0 1 3 0 0 0 4\" pbc=\"T T T\"\nSi 0 0 0\n";
        assert!(matches!(read_xyz_str(text), Err(Error::UnsupportedLattice(_))));
    }

    #[test]
    fn malformed_inputs_report_lines() {
        assert!(matches!(read_xyz_str(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_xyz_str("x\n\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            read_xyz_str("2\nProperties=species:S:1:pos:R:3\nC 0 0 0\nC 0 zero 0\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(matches!(read_xyz_str("2\n\nC 0 0 0\n"), Err(Error::Parse { line: 4, .. })));
        assert!(matches!(read_xyz_str("1\nname=\"open\nC 0 0 0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn extra_columns_are_skipped() {
        let text = "1\nProperties=id:I:1:species:S:1:pos:R:3:forces:R:3\n7 O 1 2 3 0 0 0\n";
        let c = read_xyz_str(text).unwrap();
        assert_eq!(c.species(0).as_str(), "O");
        assert_eq!(<[f64; 3]>::from(*c.position(0)), [1.0, 2.0, 3.0]);
    }
}
