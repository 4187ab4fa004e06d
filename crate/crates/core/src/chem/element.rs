//! Element table: symbols, masses, valence electrons and the default
//! valences used for implicit-hydrogen assignment.

/// A chemical element known to the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

struct ElementData {
    symbol: &'static str,
    number: u8,
    /// Standard atomic weight, g/mol.
    weight: f64,
    /// Mass of the most abundant isotope.
    monoisotopic: f64,
    valence_electrons: u8,
    /// Default valences for organic-subset atoms, ascending. Empty for
    /// elements that may only appear inside brackets.
    default_valences: &'static [u8],
    /// Whether a lowercase aromatic spelling is accepted.
    aromatic_ok: bool,
}

macro_rules! el {
    ($s:expr, $n:expr, $w:expr, $m:expr, $v:expr, $dv:expr, $ar:expr) => {
        ElementData {
            symbol: $s,
            number: $n,
            weight: $w,
            monoisotopic: $m,
            valence_electrons: $v,
            default_valences: $dv,
            aromatic_ok: $ar,
        }
    };
}

static TABLE: &[ElementData] = &[
    el!("H", 1, 1.008, 1.007825032, 1, &[], false),
    el!("He", 2, 4.003, 4.002603254, 2, &[], false),
    el!("Li", 3, 6.941, 7.01600455, 1, &[], false),
    el!("Be", 4, 9.012, 9.0121822, 2, &[], false),
    el!("B", 5, 10.812, 11.0093054, 3, &[3], true),
    el!("C", 6, 12.011, 12.0, 4, &[4], true),
    el!("N", 7, 14.007, 14.003074, 5, &[3], true),
    el!("O", 8, 15.999, 15.99491462, 6, &[2], true),
    el!("F", 9, 18.998, 18.99840322, 7, &[1], false),
    el!("Ne", 10, 20.18, 19.99244018, 8, &[], false),
    el!("Na", 11, 22.99, 22.98976928, 1, &[], false),
    el!("Mg", 12, 24.305, 23.9850417, 2, &[], false),
    el!("Al", 13, 26.982, 26.98153863, 3, &[], false),
    el!("Si", 14, 28.086, 27.97692653, 4, &[], true),
    el!("P", 15, 30.974, 30.97376163, 5, &[3, 5], true),
    el!("S", 16, 32.067, 31.972071, 6, &[2, 4, 6], true),
    el!("Cl", 17, 35.453, 34.96885268, 7, &[1], false),
    el!("Ar", 18, 39.948, 39.96238312, 8, &[], false),
    el!("K", 19, 39.098, 38.96370668, 1, &[], false),
    el!("Ca", 20, 40.078, 39.96259098, 2, &[], false),
    el!("Mn", 25, 54.938, 54.9380451, 7, &[], false),
    el!("Fe", 26, 55.845, 55.9349375, 8, &[], false),
    el!("Co", 27, 58.933, 58.933195, 9, &[], false),
    el!("Ni", 28, 58.693, 57.9353429, 10, &[], false),
    el!("Cu", 29, 63.546, 62.9295975, 11, &[], false),
    el!("Zn", 30, 65.39, 63.9291422, 2, &[], false),
    el!("Ga", 31, 69.723, 68.9255736, 3, &[], false),
    el!("Ge", 32, 72.61, 73.9211778, 4, &[], false),
    el!("As", 33, 74.922, 74.9215965, 5, &[], true),
    el!("Se", 34, 78.96, 79.9165213, 6, &[], true),
    el!("Br", 35, 79.904, 78.9183371, 7, &[1], false),
    el!("Kr", 36, 83.8, 83.911507, 8, &[], false),
    el!("Sr", 38, 87.62, 87.9056121, 2, &[], false),
    el!("Ag", 47, 107.868, 106.905097, 11, &[], false),
    el!("Sn", 50, 118.711, 119.9021947, 4, &[], false),
    el!("Sb", 51, 121.76, 120.9038157, 5, &[], false),
    el!("Te", 52, 127.6, 129.9062244, 6, &[], true),
    el!("I", 53, 126.904, 126.904473, 7, &[1], false),
    el!("Xe", 54, 131.29, 131.9041535, 8, &[], false),
    el!("Cs", 55, 132.905, 132.9054519, 1, &[], false),
    el!("Ba", 56, 137.328, 137.9052472, 2, &[], false),
    el!("Pt", 78, 195.078, 194.9647911, 10, &[], false),
    el!("Au", 79, 196.967, 196.9665687, 11, &[], false),
    el!("Hg", 80, 200.59, 201.970643, 2, &[], false),
    el!("Bi", 83, 208.98, 208.9803987, 5, &[], false),
];

impl Element {
    pub const H: Element = Element(0);
    pub const B: Element = Element(4);
    pub const C: Element = Element(5);
    pub const N: Element = Element(6);
    pub const O: Element = Element(7);
    pub const F: Element = Element(8);
    pub const P: Element = Element(14);
    pub const S: Element = Element(15);
    pub const CL: Element = Element(16);
    pub const BR: Element = Element(30);
    pub const I: Element = Element(37);

    /// Looks up an element by its (capitalized) symbol.
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        TABLE
            .iter()
            .position(|e| e.symbol == symbol)
            .map(|i| Element(i as u8))
    }

    fn data(self) -> &'static ElementData {
        &TABLE[self.0 as usize]
    }

    pub fn symbol(self) -> &'static str {
        self.data().symbol
    }

    pub fn atomic_number(self) -> u8 {
        self.data().number
    }

    pub fn atomic_weight(self) -> f64 {
        self.data().weight
    }

    pub fn monoisotopic_mass(self) -> f64 {
        self.data().monoisotopic
    }

    pub fn valence_electrons(self) -> u8 {
        self.data().valence_electrons
    }

    pub fn default_valences(self) -> &'static [u8] {
        self.data().default_valences
    }

    pub fn aromatic_allowed(self) -> bool {
        self.data().aromatic_ok
    }

    /// Member of the organic subset that may be written without brackets.
    pub fn is_organic_subset(self) -> bool {
        !self.default_valences().is_empty()
    }

    pub fn is_hydrogen(self) -> bool {
        self == Element::H
    }
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_table() {
        for (e, s) in [
            (Element::H, "H"),
            (Element::B, "B"),
            (Element::C, "C"),
            (Element::N, "N"),
            (Element::O, "O"),
            (Element::F, "F"),
            (Element::P, "P"),
            (Element::S, "S"),
            (Element::CL, "Cl"),
            (Element::BR, "Br"),
            (Element::I, "I"),
        ] {
            assert_eq!(e.symbol(), s);
            assert_eq!(Element::from_symbol(s), Some(e));
        }
    }

    #[test]
    fn organic_subset_membership() {
        let organic: Vec<_> = TABLE
            .iter()
            .filter(|e| !e.default_valences.is_empty())
            .map(|e| e.symbol)
            .collect();
        assert_eq!(organic, ["B", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I"]);
    }
}
