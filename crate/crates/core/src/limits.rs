//! Resource guards shared by the engines.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Largest number of ground randvars a grounding engine may create.
    pub ground_randvars: usize,
    /// Largest joint state space (as a power of two) for brute-force enumeration.
    pub brute_bits: u32,
    /// Largest table (entries) a propositional or lifted factor may hold.
    pub table_entries: usize,
    /// Largest number of parfactors in an LVE working set.
    pub lve_parfactors: usize,
    /// Largest number of nodes in one compiled circuit.
    pub circuit_nodes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            ground_randvars: 250_000,
            brute_bits: 26,
            table_entries: 1 << 22,
            lve_parfactors: 20_000,
            circuit_nodes: 200_000,
        }
    }
}
