//! ASCII geometry exports: Wavefront OBJ and legacy VTK polydata.

use std::io::{self, Write};

use crate::geometry::ParametricMesh;

/// Nine significant digits.
pub fn fmt_coord(x: f64) -> String {
    format!("{x:.8e}")
}

/// Quad mesh as OBJ with 1-based face indices.
pub fn write_obj<W: Write>(mut w: W, mesh: &ParametricMesh, coords: &[[f64; 3]]) -> io::Result<()> {
    for x in coords {
        writeln!(w, "v {} {} {}", fmt_coord(x[0]), fmt_coord(x[1]), fmt_coord(x[2]))?;
    }
    for e in mesh.elements() {
        let v = e.vertices;
        writeln!(w, "f {} {} {} {}", v[0] + 1, v[1] + 1, v[2] + 1, v[3] + 1)?;
    }
    Ok(())
}

/// Quad mesh as VTK POLYDATA, with an optional per-vertex `displacement`
/// vector field.
pub fn write_vtk<W: Write>(
    mut w: W,
    mesh: &ParametricMesh,
    coords: &[[f64; 3]],
    displacement: Option<&[f64]>,
) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "shell mid-surface")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {} double", coords.len())?;
    for x in coords {
        writeln!(w, "{} {} {}", fmt_coord(x[0]), fmt_coord(x[1]), fmt_coord(x[2]))?;
    }
    let n = mesh.n_elements();
    writeln!(w, "POLYGONS {} {}", n, 5 * n)?;
    for e in mesh.elements() {
        let v = e.vertices;
        writeln!(w, "4 {} {} {} {}", v[0], v[1], v[2], v[3])?;
    }
    if let Some(u) = displacement {
        writeln!(w, "POINT_DATA {}", coords.len())?;
        writeln!(w, "VECTORS displacement double")?;
        for d in u.chunks(3) {
            writeln!(w, "{} {} {}", fmt_coord(d[0]), fmt_coord(d[1]), fmt_coord(d[2]))?;
        }
    }
    Ok(())
}
