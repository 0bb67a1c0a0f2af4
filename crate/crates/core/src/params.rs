//! Device parameters and bare-basis bookkeeping.
//!
//! Frequencies are in GHz (cycles per ns); the factor 2*pi is applied only
//! inside the propagators. The Hilbert space is three qutrits ordered
//! `|n_q1, n_c, n_q2>` with flat index `9*n_q1 + 3*n_c + n_q2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levels kept per transmon.
pub const LEVELS: usize = 3;
/// Dimension of the full three-qutrit space.
pub const DIM: usize = LEVELS * LEVELS * LEVELS;

/// One of the three circuit elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Q1,
    Coupler,
    Q2,
}

impl Element {
    pub const ALL: [Element; 3] = [Element::Q1, Element::Coupler, Element::Q2];

    /// Position in the tensor ordering.
    pub fn slot(self) -> usize {
        match self {
            Element::Q1 => 0,
            Element::Coupler => 1,
            Element::Q2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Element::Q1 => "q1",
            Element::Coupler => "coupler",
            Element::Q2 => "q2",
        }
    }

    /// The other qubit; the coupler maps to itself.
    pub fn partner(self) -> Element {
        match self {
            Element::Q1 => Element::Q2,
            Element::Q2 => Element::Q1,
            Element::Coupler => Element::Coupler,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Element {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(Element::Q1),
            "q2" => Ok(Element::Q2),
            "c" | "coupler" => Ok(Element::Coupler),
            _ => Err(Error::invalid("element", format!("unknown element `{s}`"))),
        }
    }
}

/// Occupation numbers of a bare product state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BareLabel {
    pub n_q1: u8,
    pub n_c: u8,
    pub n_q2: u8,
}

impl BareLabel {
    pub const fn new(n_q1: u8, n_c: u8, n_q2: u8) -> Self {
        BareLabel { n_q1, n_c, n_q2 }
    }

    pub fn index(self) -> usize {
        9 * self.n_q1 as usize + 3 * self.n_c as usize + self.n_q2 as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < DIM, "basis index {i} out of range");
        BareLabel::new((i / 9) as u8, ((i / 3) % 3) as u8, (i % 3) as u8)
    }

    pub fn occupation(self, e: Element) -> u8 {
        match e {
            Element::Q1 => self.n_q1,
            Element::Coupler => self.n_c,
            Element::Q2 => self.n_q2,
        }
    }

    pub fn with_occupation(mut self, e: Element, n: u8) -> Self {
        match e {
            Element::Q1 => self.n_q1 = n,
            Element::Coupler => self.n_c = n,
            Element::Q2 => self.n_q2 = n,
        }
        self
    }

    pub fn excitations(self) -> u8 {
        self.n_q1 + self.n_c + self.n_q2
    }

    /// True for the four two-qubit computational states (coupler empty).
    pub fn is_computational(self) -> bool {
        self.n_c == 0 && self.n_q1 <= 1 && self.n_q2 <= 1
    }

    pub fn all() -> impl Iterator<Item = BareLabel> {
        (0..DIM).map(BareLabel::from_index)
    }
}

impl fmt::Display for BareLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}{}{}>", self.n_q1, self.n_c, self.n_q2)
    }
}

impl FromStr for BareLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<u8> = s
            .trim()
            .trim_start_matches('|')
            .trim_end_matches('>')
            .bytes()
            .collect();
        if digits.len() != 3 || digits.iter().any(|d| !(b'0'..b'3').contains(d)) {
            return Err(Error::invalid("label", format!("cannot parse `{s}`")));
        }
        Ok(BareLabel::new(digits[0] - b'0', digits[1] - b'0', digits[2] - b'0'))
    }
}

impl Serialize for BareLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{}{}{}", self.n_q1, self.n_c, self.n_q2))
    }
}

impl<'de> Deserialize<'de> for BareLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The four computational states in the order |00>, |01>, |10>, |11> (q1 q2).
pub const COMPUTATIONAL: [BareLabel; 4] = [
    BareLabel::new(0, 0, 0),
    BareLabel::new(0, 0, 1),
    BareLabel::new(1, 0, 0),
    BareLabel::new(1, 0, 1),
];

/// Which coupling operator to use between elements.
///
/// `Full` keeps the counter-rotating terms of the capacitive coupling,
/// `-g (b_i - b_i^dag)(b_j - b_j^dag)`. `Rwa` keeps only `g (b_i^dag b_j + h.c.)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingForm {
    #[default]
    Full,
    Rwa,
}

/// Static device parameters (GHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub omega_q1: f64,
    pub omega_c: f64,
    pub omega_q2: f64,
    pub eta_q1: f64,
    pub eta_c: f64,
    pub eta_q2: f64,
    pub g_1c: f64,
    pub g_2c: f64,
    pub g_12: f64,
    #[serde(default)]
    pub coupling_form: CouplingForm,
}

impl SystemParams {
    /// The measured two-qubit device.
    pub fn device_2q() -> Self {
        SystemParams {
            omega_q1: 4.650,
            omega_c: 10.234,
            omega_q2: 4.662,
            eta_q1: -0.211,
            eta_c: -0.256,
            eta_q2: -0.212,
            g_1c: 0.262,
            g_2c: 0.262,
            g_12: 0.01491,
            coupling_form: CouplingForm::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for e in Element::ALL {
            let w = self.frequency(e);
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(&format!("omega_{}", e.name()), format!("{w} must be positive")));
            }
            let eta = self.anharmonicity(e);
            if !(eta.is_finite() && eta <= 0.0) {
                return Err(Error::invalid(
                    &format!("eta_{}", e.name()),
                    format!("{eta} must be non-positive for a transmon"),
                ));
            }
        }
        for (name, g) in [("g_1c", self.g_1c), ("g_2c", self.g_2c), ("g_12", self.g_12)] {
            if !g.is_finite() {
                return Err(Error::invalid(name, "not finite"));
            }
        }
        Ok(())
    }

    pub fn frequency(&self, e: Element) -> f64 {
        match e {
            Element::Q1 => self.omega_q1,
            Element::Coupler => self.omega_c,
            Element::Q2 => self.omega_q2,
        }
    }

    pub fn set_frequency(&mut self, e: Element, w: f64) {
        match e {
            Element::Q1 => self.omega_q1 = w,
            Element::Coupler => self.omega_c = w,
            Element::Q2 => self.omega_q2 = w,
        }
    }

    pub fn with_frequency(&self, e: Element, w: f64) -> Self {
        let mut p = self.clone();
        p.set_frequency(e, w);
        p
    }

    pub fn frequencies(&self) -> [f64; 3] {
        [self.omega_q1, self.omega_c, self.omega_q2]
    }

    pub fn anharmonicity(&self, e: Element) -> f64 {
        match e {
            Element::Q1 => self.eta_q1,
            Element::Coupler => self.eta_c,
            Element::Q2 => self.eta_q2,
        }
    }

    /// Couplings in the order (g_1c, g_2c, g_12).
    pub fn couplings(&self) -> [f64; 3] {
        [self.g_1c, self.g_2c, self.g_12]
    }

    /// Mirror image: qubit 1 and qubit 2 exchange roles.
    pub fn swapped_qubits(&self) -> Self {
        SystemParams {
            omega_q1: self.omega_q2,
            omega_q2: self.omega_q1,
            eta_q1: self.eta_q2,
            eta_q2: self.eta_q1,
            g_1c: self.g_2c,
            g_2c: self.g_1c,
            ..self.clone()
        }
    }

    /// The lower-frequency qubit.
    pub fn lower_qubit(&self) -> Element {
        if self.omega_q1 <= self.omega_q2 {
            Element::Q1
        } else {
            Element::Q2
        }
    }
}

/// The three element pairs in coupling order (1c, 2c, 12).
pub const PAIRS: [(Element, Element); 3] = [
    (Element::Q1, Element::Coupler),
    (Element::Q2, Element::Coupler),
    (Element::Q1, Element::Q2),
];
