//! Function spaces and the terminal symbols of the form language.
//!
//! A [`FunctionSpace`] ties a symbol to a domain handle and an element
//! description. Meshes are bound later, at assembly time; the symbolic layer
//! only needs the domain's identity and spatial dimension.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

static NEXT_DOMAIN: AtomicU64 = AtomicU64::new(0);
static NEXT_COEFFICIENT: AtomicU64 = AtomicU64::new(0);

/// Opaque handle to a computational domain.
///
/// Carries the spatial dimension so that shape rules (e.g. the length of a
/// gradient) can be checked at expression-construction time, before any mesh
/// exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DomainId {
    id: u64,
    dim: u8,
}

impl DomainId {
    /// Allocate a fresh domain handle of the given spatial dimension (1 or 2).
    pub fn fresh(dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only 1D and 2D domains are supported");
        DomainId {
            id: NEXT_DOMAIN.fetch_add(1, Ordering::Relaxed),
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }
}

/// Element family of a function space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementFamily {
    /// Continuous piecewise polynomials on the mesh (only degree 1 is
    /// assembled in this crate).
    Lagrange,
    /// The space R^M of spatially constant vectors; used for operator
    /// parameters such as network weights.
    Real,
}

/// A function space: domain, element family, degree and value size.
///
/// Two spaces compare equal iff all fields are equal. `degree` is ignored
/// for `Real`; `value_size` is the component count (1 for scalar fields,
/// M for an R^M parameter space).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FunctionSpace {
    pub domain: DomainId,
    pub family: ElementFamily,
    pub degree: u32,
    pub value_size: u32,
}

impl FunctionSpace {
    pub fn lagrange(domain: DomainId, degree: u32) -> Self {
        assert!(degree >= 1, "Lagrange degree must be at least 1");
        FunctionSpace {
            domain,
            family: ElementFamily::Lagrange,
            degree,
            value_size: 1,
        }
    }

    /// The parameter space R^M, spatially constant over `domain`.
    pub fn real(domain: DomainId, value_size: u32) -> Self {
        assert!(value_size >= 1, "value_size must be at least 1");
        FunctionSpace {
            domain,
            family: ElementFamily::Real,
            degree: 0,
            value_size,
        }
    }

    pub fn is_real(&self) -> bool {
        self.family == ElementFamily::Real
    }
}

/// An unknown function in a form: number 0 is the test function, number 1
/// the trial function; differentiation introduces higher numbers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Argument {
    pub space: FunctionSpace,
    pub number: u32,
}

impl Argument {
    pub fn new(space: FunctionSpace, number: u32) -> Self {
        Argument { space, number }
    }

    pub fn test(space: FunctionSpace) -> Self {
        Argument { space, number: 0 }
    }

    pub fn trial(space: FunctionSpace) -> Self {
        Argument { space, number: 1 }
    }
}

/// A known function in a form. Identity (and equality) is the unique `id`
/// allocated at construction; the label only affects printing.
#[derive(Debug, Clone)]
pub struct Coefficient {
    pub space: FunctionSpace,
    id: u64,
    label: Option<Arc<str>>,
}

impl Coefficient {
    pub fn new(space: FunctionSpace) -> Self {
        Coefficient {
            space,
            id: NEXT_COEFFICIENT.fetch_add(1, Ordering::Relaxed),
            label: None,
        }
    }

    pub fn labeled(space: FunctionSpace, label: &str) -> Self {
        Coefficient {
            space,
            id: NEXT_COEFFICIENT.fetch_add(1, Ordering::Relaxed),
            label: Some(Arc::from(label)),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Printer name: the label when present, otherwise `c<id>`.
    pub fn display_name(&self) -> String {
        match &self.label {
            Some(l) => l.to_string(),
            None => format!("c{}", self.id),
        }
    }
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Coefficient {}

impl std::hash::Hash for Coefficient {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl PartialOrd for Coefficient {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Coefficient {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_equality_is_fieldwise() {
        let dom = DomainId::fresh(2);
        let v = FunctionSpace::lagrange(dom, 1);
        assert_eq!(v, FunctionSpace::lagrange(dom, 1));
        assert_ne!(v, FunctionSpace::lagrange(dom, 2));
        assert_ne!(v, FunctionSpace::lagrange(DomainId::fresh(2), 1));
        assert_ne!(v, FunctionSpace::real(dom, 1));
    }

    #[test]
    fn coefficient_ids_are_unique_and_drive_equality() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let f = Coefficient::labeled(v, "f");
        let g = Coefficient::labeled(v, "f");
        assert_ne!(f, g);
        assert_eq!(f, f.clone());
        assert_ne!(f.id(), g.id());
    }

    #[test]
    fn coefficient_ids_are_atomic_across_threads() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let handles: Vec<_> = (0..8)
            .map(|_| {
                std::thread::spawn(move || {
                    (0..100).map(|_| Coefficient::new(v).id()).collect::<Vec<_>>()
                })
            })
            .collect();
        let mut ids: Vec<u64> = handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 800);
    }
}
