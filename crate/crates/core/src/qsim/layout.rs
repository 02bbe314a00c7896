use serde::Serialize;

use super::{QsimError, Result};

/// Largest layout the dense representation accepts.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Register {
    pub name: String,
    pub width: usize,
    /// Global position of the register's most significant qubit.
    pub offset: usize,
}

impl Register {
    pub fn qubits(&self) -> Vec<usize> {
        (self.offset..self.offset + self.width).collect()
    }
}

/// Named registers laid out contiguously in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    qubits: usize,
}

impl RegisterLayout {
    pub fn new(spec: &[(&str, usize)]) -> Result<Self> {
        let mut registers: Vec<Register> = Vec::with_capacity(spec.len());
        let mut offset = 0;
        for &(name, width) in spec {
            if registers.iter().any(|r| r.name == name) {
                return Err(QsimError::DuplicateRegister(name.to_string()));
            }
            if width == 0 {
                return Err(QsimError::EmptyRegister(name.to_string()));
            }
            registers.push(Register { name: name.to_string(), width, offset });
            offset += width;
        }
        if offset > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(offset));
        }
        Ok(Self { registers, qubits: offset })
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| QsimError::UnknownRegister(name.to_string()))
    }

    /// Positions of the named registers' qubits, in the order given.
    pub fn qubits_of(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for name in names {
            out.extend(self.register(name)?.qubits());
        }
        Ok(out)
    }

    /// Qubit `bit` (0 = most significant) of register `name`.
    pub fn qubit(&self, name: &str, bit: usize) -> Result<usize> {
        let r = self.register(name)?;
        if bit >= r.width {
            return Err(QsimError::QubitOutOfRange { qubit: bit, qubits: r.width });
        }
        Ok(r.offset + bit)
    }

    /// Qubits not in `qubits`, ascending.
    pub fn complement(&self, qubits: &[usize]) -> Vec<usize> {
        (0..self.qubits).filter(|q| !qubits.contains(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_partition_the_layout() {
        let l = RegisterLayout::new(&[("K", 2), ("X", 2), ("F", 1)]).unwrap();
        assert_eq!(l.num_qubits(), 5);
        assert_eq!(l.qubits_of(&["K"]).unwrap(), vec![0, 1]);
        assert_eq!(l.qubits_of(&["F", "K"]).unwrap(), vec![4, 0, 1]);
        assert_eq!(l.qubit("X", 1).unwrap(), 3);
        assert_eq!(l.complement(&[1, 3]), vec![0, 2, 4]);
        let mut all: Vec<usize> = l.registers().iter().flat_map(|r| r.qubits()).collect();
        all.sort();
        assert_eq!(all, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn layout_errors() {
        assert_eq!(RegisterLayout::new(&[("K", 1), ("K", 1)]), Err(QsimError::DuplicateRegister("K".into())));
        assert_eq!(RegisterLayout::new(&[("K", 0)]), Err(QsimError::EmptyRegister("K".into())));
        assert_eq!(RegisterLayout::new(&[("K", 13), ("X", 12)]), Err(QsimError::TooManyQubits(25)));
        let l = RegisterLayout::new(&[("K", 2)]).unwrap();
        assert!(l.register("Z").is_err());
        assert!(l.qubit("K", 2).is_err());
    }
}
