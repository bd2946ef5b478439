use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use fsuc::milp::{export_model, import_solution, MilpModel, MilpSolution, SolveOptions};
use fsuc::scheduler::{UcError, WindowSolver};

/// Environment variable naming an external solver executable.
pub const EXTERNAL_SOLVER_ENV: &str = "FSUC_EXTERNAL_SOLVER";

/// Runs `<exe> <model.lp> <solution.txt>` per window. The executable must
/// write the solution format read by `import_solution`.
pub struct ExternalSolver {
    pub exe: PathBuf,
    pub dir: PathBuf,
    calls: AtomicUsize,
}

impl ExternalSolver {
    pub fn new(exe: PathBuf, dir: PathBuf) -> Self {
        Self { exe, dir, calls: AtomicUsize::new(0) }
    }

    pub fn from_env(dir: PathBuf) -> Option<Self> {
        std::env::var_os(EXTERNAL_SOLVER_ENV).filter(|v| !v.is_empty()).map(|exe| Self::new(exe.into(), dir))
    }
}

impl WindowSolver for ExternalSolver {
    fn solve_model(&self, start: usize, model: &MilpModel, _options: &SolveOptions) -> Result<MilpSolution, UcError> {
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        let stem = format!("call{call:05}_window{start:04}");
        let lp = self.dir.join(format!("{stem}.lp"));
        let sol = self.dir.join(format!("{stem}.sol"));
        let fail = |what: String| UcError::External(format!("{what} (model: {})", lp.display()));
        std::fs::create_dir_all(&self.dir).map_err(|e| fail(format!("cannot create {}: {e}", self.dir.display())))?;
        std::fs::write(&lp, export_model(model)).map_err(|e| fail(format!("cannot write model: {e}")))?;
        let status = Command::new(&self.exe)
            .arg(&lp)
            .arg(&sol)
            .status()
            .map_err(|e| fail(format!("cannot run {}: {e}", self.exe.display())))?;
        if !status.success() {
            return Err(fail(format!("{} exited with {status}", self.exe.display())));
        }
        let text = std::fs::read_to_string(&sol).map_err(|e| fail(format!("cannot read {}: {e}", sol.display())))?;
        let imported = import_solution(&text, model).map_err(|e| fail(format!("bad solution {}: {e}", sol.display())))?;
        if imported.objective_mismatch {
            eprintln!(
                "warning: {} reports objective {:?}, recomputed {}",
                sol.display(),
                imported.reported_objective,
                imported.solution.objective
            );
        }
        Ok(imported.solution)
    }
}
