//! Dual qutrit-chain Hamiltonians of the Z3 and hardcore SU(3) ladders.

pub mod clock;
pub mod hamiltonian;
pub mod ladder;
pub mod su3;

pub use clock::{clock_algebra, ClockAlgebra};
pub use hamiltonian::{
    build_hamiltonian, electric_hamiltonian, lambda_from_g, plaquette_operator, z3_plaquette_hamiltonian,
    Boundary, GaugeGroup, LocalHamiltonian, LocalTerm, D,
};
pub use ladder::z3_ladder_oracle;
pub use su3::{corner_element, su3_corner_table, su3_plaquette_table, CornerElement, PlaquetteTable};
