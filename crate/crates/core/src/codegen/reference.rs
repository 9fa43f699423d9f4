//! Reference interpreter: enumerate every instance, sort by schedule time
//! and execute one at a time. Slow but independent of loop generation.

use super::exec::exec_instance;
use super::store::BufferStore;
use crate::error::Result;
use crate::schedule::Program;

pub fn run_reference(prog: &Program, store: &mut BufferStore) -> Result<()> {
    let inst = prog.timed_instances(&mut |b, idx| Ok(store.load(b, idx)?.as_i64()))?;
    let mut env = prog.param_env();
    for t in inst {
        exec_instance(prog, t.comp, &t.iter, &mut env, store, false)?;
    }
    Ok(())
}
