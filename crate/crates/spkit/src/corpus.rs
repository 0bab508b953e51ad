//! Reference expressions exercised by the cross-checks and the CLI.

/// Alphabet of the posets the corpus is checked against.
pub const ALPHABET: [&str; 2] = ["a", "b"];

pub const CORPUS: [&str; 20] = [
    // binary trees of a's, and the same alternated with b-chains
    "sub(x, a, istar(x, seq(a, par(x, x))))",
    "dia(sub(x, a, istar(x, seq(a, par(x, x)))), diamond(b))",
    // b over a forest of the same, iterated through a plain star
    "istar(x, seq(b, par(a, star(x))))",
    "a",
    "eps",
    "or(a, eps)",
    "star(a)",
    "seq(a, b)",
    "istar(x, par(a, x))",
    "par(star(a), b)",
    "omega(or(a, eps))",
    "ord(seq(a, b))",
    "dia(a, b)",
    "diamond(b)",
    "sub(x, seq(a, b), par(x, x))",
    "istar(x, par(a, seq(b, x)))",
    "sub(y, b, istar(x, par(y, seq(a, x))))",
    "star(par(a, b))",
    "dia(seq(a, par(a, b)), star(b))",
    "mord(or(a, par(b, b)))",
];
