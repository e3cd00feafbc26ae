use pyo3::prelude::*;

#[pymodule]
fn asf_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
