//! Plain-text and legacy VTK mesh files.

use std::io::{self, BufRead, Write};

use super::{BoundaryEdge, BoundaryTag, Mesh, MeshError};

impl Mesh {
    /// Writes the native text format: node, element and boundary-edge blocks.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# nozzleopt mesh v1")?;
        writeln!(w, "resolution {:e}", self.resolution)?;
        writeln!(w, "nodes {}", self.nodes.len())?;
        for p in &self.nodes {
            writeln!(w, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        writeln!(w, "elements {}", self.elements.len())?;
        for t in &self.elements {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "edges {}", self.boundary.len())?;
        for b in &self.boundary {
            writeln!(w, "{} {} {}", b.nodes[0], b.nodes[1], b.tag.name())?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, MeshError> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty() && !s.starts_with('#')).unwrap_or(true));
        let mut next = || -> Result<(usize, Vec<String>), MeshError> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i, l.split_whitespace().map(str::to_owned).collect())),
                Some((i, Err(e))) => Err(MeshError::Parse { line: i, msg: e.to_string() }),
                None => Err(MeshError::Parse { line: 0, msg: "unexpected end of file".into() }),
            }
        };
        fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
            s.parse().map_err(|_| MeshError::Parse { line, msg: format!("bad number '{s}'") })
        }
        fn header(line: usize, tok: &[String], key: &str) -> Result<String, MeshError> {
            if tok.len() == 2 && tok[0] == key {
                Ok(tok[1].clone())
            } else {
                Err(MeshError::Parse { line, msg: format!("expected '{key} <value>'") })
            }
        }
        let (i, t) = next()?;
        let resolution: f64 = num(i, &header(i, &t, "resolution")?)?;
        let (i, t) = next()?;
        let n: usize = num(i, &header(i, &t, "nodes")?)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let (i, t) = next()?;
            if t.len() != 2 {
                return Err(MeshError::Parse { line: i, msg: "node needs 2 coordinates".into() });
            }
            nodes.push([num(i, &t[0])?, num(i, &t[1])?]);
        }
        let (i, t) = next()?;
        let m: usize = num(i, &header(i, &t, "elements")?)?;
        let mut elements = Vec::with_capacity(m);
        for _ in 0..m {
            let (i, t) = next()?;
            if t.len() != 3 {
                return Err(MeshError::Parse { line: i, msg: "element needs 3 nodes".into() });
            }
            elements.push([num(i, &t[0])?, num(i, &t[1])?, num(i, &t[2])?]);
        }
        let (i, t) = next()?;
        let k: usize = num(i, &header(i, &t, "edges")?)?;
        let mut boundary = Vec::with_capacity(k);
        for _ in 0..k {
            let (i, t) = next()?;
            if t.len() != 3 {
                return Err(MeshError::Parse { line: i, msg: "edge needs 2 nodes and a tag".into() });
            }
            let tag = BoundaryTag::parse(&t[2]).ok_or_else(|| MeshError::Parse { line: i, msg: format!("unknown tag '{}'", t[2]) })?;
            boundary.push(BoundaryEdge { nodes: [num(i, &t[0])?, num(i, &t[1])?], tag });
        }
        Mesh::from_parts(nodes, elements, boundary, resolution)
    }

    /// Legacy ASCII VTK unstructured grid with optional point data.
    pub fn write_vtk<W: Write>(
        &self,
        mut w: W,
        scalars: &[(&str, &[f64])],
        vectors: &[(&str, &[[f64; 2]])],
    ) -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "nozzleopt")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.nodes.len())?;
        for p in &self.nodes {
            writeln!(w, "{} {} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", self.elements.len(), 4 * self.elements.len())?;
        for t in &self.elements {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {}", self.elements.len())?;
        for _ in &self.elements {
            writeln!(w, "5")?;
        }
        if scalars.is_empty() && vectors.is_empty() {
            return Ok(());
        }
        writeln!(w, "POINT_DATA {}", self.nodes.len())?;
        for (name, data) in scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in data.iter() {
                writeln!(w, "{v}")?;
            }
        }
        for (name, data) in vectors {
            writeln!(w, "VECTORS {name} double")?;
            for v in data.iter() {
                writeln!(w, "{} {} 0", v[0], v[1])?;
            }
        }
        Ok(())
    }
}
