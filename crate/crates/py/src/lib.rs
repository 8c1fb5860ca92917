use pyo3::prelude::*;

#[pymodule]
fn holonomy_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
