pub mod cli;
pub mod freqbound;
pub mod midcore;
pub mod pendulum;
pub mod quadrature;
pub mod quasipoly;
pub mod roots;
pub mod selfcheck;
pub mod simulate;
pub mod specfun;
