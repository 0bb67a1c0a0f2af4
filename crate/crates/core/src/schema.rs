//! Versioned CSV schemas for every artifact the command-line tools emit.

use std::io::Write;

use crate::error::{Error, Result};

/// Column layout of one CSV artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    /// Bumped whenever `columns` change.
    pub version: u32,
    pub columns: &'static [&'static str],
}

impl Schema {
    /// FNV-1a hash of the name and column list.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.name.as_bytes());
        for c in self.columns {
            eat(b"|");
            eat(c.as_bytes());
        }
        h
    }
}

pub const SPECTRUM: Schema = Schema {
    name: "spectrum",
    version: 1,
    columns: &["omega_q1", "omega_c", "omega_q2", "level", "energy", "label", "overlap"],
};

pub const ZZ_MAP: Schema = Schema {
    name: "zz-map",
    version: 1,
    columns: &["g_12", "omega_c", "gtilde", "zeta_exact", "zeta_perturbative"],
};

pub const OVERLAP_SCAN: Schema = Schema {
    name: "overlap-scan",
    version: 1,
    columns: &["omega_c", "overlap_100_010", "overlap_101_110_011", "gtilde_cz", "overlap_closed_form", "gtilde_approx"],
};

pub const SWAP_SCAN: Schema = Schema {
    name: "swap-scan",
    version: 1,
    columns: &["omega_c", "detuning", "resonance", "gtilde_fit", "gtilde_gap", "contrast"],
};

pub const ZZ_RAMSEY: Schema = Schema {
    name: "zz-ramsey",
    version: 1,
    columns: &["omega_c", "time", "angle", "angle_static", "zeta"],
};

pub const LEAKAGE: Schema = Schema {
    name: "leakage",
    version: 1,
    columns: &["t_p", "duration", "v", "coupler_on_freq", "coupler_inset", "p_010", "p_110_011", "p_partner"],
};

pub const GATE_ERROR: Schema = Schema {
    name: "gate-error",
    version: 1,
    columns: &["t_p", "duration", "mask", "error", "coherent_error", "decoherence_error", "phi_2q"],
};

pub const CALIBRATE: Schema = Schema {
    name: "calibrate",
    version: 1,
    columns: &[
        "omega_c_off",
        "zeta_off",
        "xy_off",
        "v",
        "coupler_on_freq",
        "coupler_inset",
        "a_int",
        "target",
        "phi_2q",
        "residual",
        "swap_error",
        "duration",
    ],
};

pub const XEB_CURVE: Schema = Schema {
    name: "xeb",
    version: 1,
    columns: &["sequence", "depth", "xeb", "purity", "leakage"],
};

pub const XEB_SUMMARY: Schema = Schema {
    name: "xeb-summary",
    version: 1,
    columns: &["sequence", "quantity", "value", "lo", "hi"],
};

pub const ALL: &[Schema] =
    &[SPECTRUM, ZZ_MAP, OVERLAP_SCAN, SWAP_SCAN, ZZ_RAMSEY, LEAKAGE, GATE_ERROR, CALIBRATE, XEB_CURVE, XEB_SUMMARY];

pub fn by_name(name: &str) -> Option<&'static Schema> {
    ALL.iter().find(|s| s.name == name)
}

/// Shortest round-trip text of `x`: plain notation for moderate magnitudes,
/// exponent notation otherwise.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Rows of text cells under one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: Schema) -> Self {
        Table { schema, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.schema.columns.len() {
            return Err(Error::invalid(
                self.schema.name,
                format!("row has {} cells, schema has {}", row.len(), self.schema.columns.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_numbers(&mut self, row: &[f64]) -> Result<()> {
        self.push(row.iter().map(|&x| fmt_f64(x)).collect())
    }

    pub fn extend(&mut self, other: Table) -> Result<()> {
        if other.schema != self.schema {
            return Err(Error::invalid(self.schema.name, format!("cannot merge rows of `{}`", other.schema.name)));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.schema.columns.iter().position(|&c| c == name)
    }

    /// Numeric values of column `name`; unparsable cells become NaN.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect())
    }

    /// Header row then data, UTF-8 with `\n` line endings.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.schema.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    /// Parses CSV text whose header must match `schema` exactly.
    pub fn read_csv(schema: Schema, text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != schema.columns {
            return Err(Error::invalid(schema.name, format!("header {header:?} does not match schema")));
        }
        let mut t = Table::new(schema);
        for rec in r.records() {
            t.push(rec?.iter().map(str::to_string).collect())?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Changing any column list must come with a version bump and a new entry here.
    const FROZEN: &[(&str, u32, u64)] = &[
        ("spectrum", 1, 0x86df78af67d9b1ab),
        ("zz-map", 1, 0x34ba8fdf5fd48461),
        ("overlap-scan", 1, 0x1494243250bcf4e0),
        ("swap-scan", 1, 0xa4fdb13181b8151e),
        ("zz-ramsey", 1, 0xe6684da61bf29930),
        ("leakage", 1, 0x0a4ee742bff3f082),
        ("gate-error", 1, 0xcf203d3bd7999df2),
        ("calibrate", 1, 0x9110742517538c51),
        ("xeb", 1, 0x53a58e1509bf43d6),
        ("xeb-summary", 1, 0x08f5db427123cd86),
    ];

    #[test]
    fn schemas_are_frozen_per_version() {
        for s in ALL {
            let entry = FROZEN.iter().find(|e| e.0 == s.name && e.1 == s.version);
            let Some(&(_, _, fp)) = entry else {
                panic!("schema `{}` v{} has no frozen fingerprint ({:#x})", s.name, s.version, s.fingerprint());
            };
            assert_eq!(fp, s.fingerprint(), "schema `{}` changed without a version bump", s.name);
        }
    }

    #[test]
    fn names_are_unique() {
        for (i, a) in ALL.iter().enumerate() {
            assert!(ALL[i + 1..].iter().all(|b| b.name != a.name));
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(ZZ_MAP);
        t.push_numbers(&[0.01, 10.234, 1.5e-7, -6.2e-5, 0.0]).unwrap();
        let text = t.to_csv_string().unwrap();
        assert_eq!(text, "g_12,omega_c,gtilde,zeta_exact,zeta_perturbative\n0.01,10.234,1.5e-7,-6.2e-5,0\n");
        assert_eq!(Table::read_csv(ZZ_MAP, &text).unwrap(), t);
        assert!(Table::read_csv(LEAKAGE, &text).is_err());
    }

    #[test]
    fn wrong_width_rejected() {
        assert!(Table::new(ZZ_MAP).push_numbers(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn number_text_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
