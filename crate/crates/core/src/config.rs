use crate::error::{Error, Result};
use crate::symbol::Layout;

/// Environment variable that overrides the allocation budget, in GiB.
pub const MEM_BUDGET_ENV: &str = "CONV_SPECTRA_MEM_BUDGET_GIB";

const GIB: u64 = 1 << 30;

/// Upper bound on bulk allocations (symbol fields, dense oracle matrices).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    bytes: u64,
}

impl MemoryBudget {
    pub const DEFAULT_GIB: f64 = 16.0;

    pub fn from_bytes(bytes: u64) -> Self {
        Self { bytes }
    }

    pub fn from_gib(gib: f64) -> Self {
        Self {
            bytes: (gib * GIB as f64) as u64,
        }
    }

    /// Reads [`MEM_BUDGET_ENV`], falling back to the 16 GiB default.
    pub fn from_env() -> Result<Self> {
        match std::env::var(MEM_BUDGET_ENV) {
            Ok(raw) => {
                let gib: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{MEM_BUDGET_ENV}={raw:?} is not a number")))?;
                if !(gib > 0.0 && gib.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{MEM_BUDGET_ENV} must be positive, got {gib}"
                    )));
                }
                Ok(Self::from_gib(gib))
            }
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn check(&self, requested: u64) -> Result<()> {
        if requested > self.bytes {
            Err(Error::AllocationFailure {
                requested,
                budget: self.bytes,
            })
        } else {
            Ok(())
        }
    }
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self::from_gib(Self::DEFAULT_GIB)
    }
}

/// Knobs shared by the frequency-domain paths.
#[derive(Clone, Debug, PartialEq)]
pub struct ComputeOptions {
    /// Worker threads; 0 picks the available parallelism.
    pub workers: usize,
    pub layout: Layout,
    pub memory_budget: MemoryBudget,
    /// Jacobi sweep cap per block.
    pub max_sweeps: usize,
    pub values_only: bool,
}

impl Default for ComputeOptions {
    fn default() -> Self {
        Self {
            workers: 0,
            layout: Layout::BlockContiguous,
            memory_budget: MemoryBudget::default(),
            max_sweeps: crate::svd::DEFAULT_MAX_SWEEPS,
            values_only: true,
        }
    }
}

impl ComputeOptions {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_values_only(mut self, values_only: bool) -> Self {
        self.values_only = values_only;
        self
    }

    /// Number of threads `run` will use.
    pub fn effective_workers(&self) -> usize {
        if self.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.workers
        }
    }

    /// Runs `f` on a dedicated pool sized by `workers`.
    pub fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.effective_workers())
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}
