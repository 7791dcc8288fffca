//! Relational-similarity features: spectral embeddings of the bipartite
//! graphs, row-normalized and restricted to the patient side.
//!
//! For each graph the top-k eigenvectors of the symmetrically normalized
//! adjacency form an (M+N) x k embedding; rows are scaled to unit length so
//! that the inner product of two rows is the cosine similarity of their
//! spectral coordinates. Patients disconnected in the observation window
//! keep all-zero rows. The per-graph patient blocks are concatenated in
//! graph order into one feature vector per patient.

use std::path::Path;

use crate::cohort::fnv1a64;
use crate::eigen::{top_k_eigenpairs, EigenPairs, SolverOptions};
use crate::error::{Error, Result};
use crate::graph::{adjacency_matrix, BipartiteGraph};
use crate::sparse::{normalized_laplacian, SparseMatrix};

/// Dense embedding with one row per graph vertex (clinicians first, then
/// patients) and one column per retained eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    graph_tag: String,
    k: usize,
    rows: Vec<Vec<f64>>,
}

impl EmbeddingMatrix {
    /// Lays out eigenvectors as rows-by-vertex. `pairs` must hold `k`
    /// vectors of length `dim`.
    pub fn from_eigenpairs(graph_tag: &str, dim: usize, pairs: &EigenPairs) -> Result<Self> {
        let k = pairs.vectors.len();
        if pairs.values.len() != k {
            return Err(Error::Data(
                "eigenvalue/eigenvector count mismatch".into(),
            ));
        }
        if pairs.vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Data(format!(
                "eigenvectors must have length {dim}"
            )));
        }
        let rows = (0..dim)
            .map(|r| pairs.vectors.iter().map(|v| v[r]).collect())
            .collect();
        Ok(EmbeddingMatrix {
            graph_tag: graph_tag.to_string(),
            k,
            rows,
        })
    }

    pub fn graph_tag(&self) -> &str {
        &self.graph_tag
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

/// Scales every row with a positive norm to unit L2 length; all-zero rows
/// are left untouched.
pub fn row_normalize(mut m: EmbeddingMatrix) -> EmbeddingMatrix {
    for row in &mut m.rows {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in row {
                *x /= norm;
            }
        }
    }
    m
}

/// One patient's concatenated relational-similarity vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityFeature {
    pub patient_id: String,
    pub values: Vec<f64>,
}

/// Computes row-normalized spectral embeddings for every graph and returns
/// the concatenated patient rows, in the graphs' shared patient order.
///
/// All graphs must cover the identical patient universe. Each graph is
/// solved independently (in parallel) with a seed derived from the solver
/// seed and the graph's role tag, so results do not depend on scheduling.
pub fn extract_similarity_features(
    graphs: &[BipartiteGraph],
    k: usize,
    opts: &SolverOptions,
) -> Result<Vec<SimilarityFeature>> {
    let Some(first) = graphs.first() else {
        return Err(Error::Data(
            "extract_similarity_features: no graphs given".into(),
        ));
    };
    if k == 0 {
        return Err(Error::Data(
            "extract_similarity_features: k must be at least 1".into(),
        ));
    }
    for g in &graphs[1..] {
        if g.patients() != first.patients() {
            return Err(Error::Data(
                "graphs disagree on the patient universe".into(),
            ));
        }
    }

    let blocks: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = graphs
            .iter()
            .map(|g| scope.spawn(move || patient_embedding_rows(g, k, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("embedding worker panicked"))
            .collect()
    });

    let mut per_graph = Vec::with_capacity(graphs.len());
    for (g, b) in graphs.iter().zip(blocks) {
        match b {
            Ok(rows) => per_graph.push(rows),
            // Numerical failures keep their kind (the CLI maps it to its
            // own exit code); only the graph context is added.
            Err(Error::NoConvergence(msg)) => {
                return Err(Error::NoConvergence(format!(
                    "graph '{}': {msg}",
                    g.role().tag()
                )))
            }
            Err(Error::NonFinite(msg)) => {
                return Err(Error::NonFinite(format!(
                    "graph '{}': {msg}",
                    g.role().tag()
                )))
            }
            Err(e) => {
                return Err(Error::Data(format!(
                    "embedding for graph '{}' failed: {e}",
                    g.role().tag()
                )))
            }
        }
    }

    let patients = first.patients();
    let mut out = Vec::with_capacity(patients.len());
    for (i, pid) in patients.iter().enumerate() {
        let mut values = Vec::with_capacity(graphs.len() * k);
        for block in &per_graph {
            values.extend_from_slice(&block[i]);
        }
        out.push(SimilarityFeature {
            patient_id: pid.clone(),
            values,
        });
    }
    Ok(out)
}

/// Embedding rows for the patient side of one graph.
///
/// Isolated vertices are removed before the solve and re-inserted as zero
/// rows afterwards. Solving on the induced active subgraph keeps the
/// convention ("no visits means zero features") and, more importantly,
/// avoids an artificial kernel: with isolated vertices left in, a
/// degenerate eigenvalue would let the solver mix isolated coordinates into
/// the returned vectors, making connected patients' features depend on the
/// seed. Graphs too small to yield `k` eigenvectors are padded with zero
/// columns so the feature width never varies.
fn patient_embedding_rows(
    g: &BipartiteGraph,
    k: usize,
    opts: &SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let a = adjacency_matrix(g);
    let dim = a.dim();
    let m = g.n_clinicians();
    let degrees = a.row_sums();
    let active: Vec<usize> = (0..dim).filter(|&i| degrees[i] > 0.0).collect();
    if active.is_empty() {
        // No edges in the window at all: every patient embeds to zero.
        return Ok(vec![vec![0.0; k]; g.n_patients()]);
    }
    // The solver wants k strictly below the (active) dimension. Tiny
    // windows can leave fewer connected vertices than requested columns;
    // rather than failing, keep the feature width stable by padding the
    // missing columns with zeros.
    let k_eff = k.min(active.len() - 1);
    if k_eff < k {
        log::warn!(
            "graph '{}': only {} connected vertices; padding {} of {k} embedding columns with zeros",
            g.role().tag(),
            active.len(),
            k - k_eff
        );
    }
    let mut old_to_new = vec![usize::MAX; dim];
    for (new, &old) in active.iter().enumerate() {
        old_to_new[old] = new;
    }
    let mut trips = Vec::with_capacity(a.nnz());
    for &old in &active {
        let (cols, vals) = a.row(old);
        for (&c, &v) in cols.iter().zip(vals) {
            trips.push((old_to_new[old], old_to_new[c], v));
        }
    }
    let reduced = SparseMatrix::from_triplets(active.len(), &trips)?;
    let l = normalized_laplacian(&reduced)?;
    let solver = SolverOptions {
        seed: opts.seed ^ fnv1a64(g.role().tag().as_bytes()),
        ..*opts
    };
    let pairs = top_k_eigenpairs(&l, k_eff, &solver)?;
    let mut vectors: Vec<Vec<f64>> = pairs
        .vectors
        .into_iter()
        .map(|v| {
            let mut full = vec![0.0; dim];
            for (new, &old) in active.iter().enumerate() {
                full[old] = v[new];
            }
            full
        })
        .collect();
    let mut values = pairs.values;
    while vectors.len() < k {
        values.push(0.0);
        vectors.push(vec![0.0; dim]);
    }
    let scattered = EigenPairs { values, vectors };
    let emb = row_normalize(EmbeddingMatrix::from_eigenpairs(
        g.role().tag(),
        dim,
        &scattered,
    )?);
    Ok((m..dim).map(|r| emb.row(r).to_vec()).collect())
}

/// Writes features as CSV: `patient_id,f0,...,f{D-1}` with floats in
/// scientific notation carrying 17 significant digits, so reading the file
/// back reproduces every value bit-for-bit.
pub fn write_features_csv(path: &Path, features: &[SimilarityFeature]) -> Result<()> {
    let dim = features.first().map_or(0, |f| f.values.len());
    if features.iter().any(|f| f.values.len() != dim) {
        return Err(Error::Data(
            "feature rows have inconsistent lengths".into(),
        ));
    }
    let mut wtr = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    })?;
    let io_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut header = vec!["patient_id".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    wtr.write_record(&header).map_err(io_err)?;
    for f in features {
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature vector for patient '{}'",
                f.patient_id
            )));
        }
        let mut rec = vec![f.patient_id.clone()];
        rec.extend(f.values.iter().map(|v| format!("{v:.16e}")));
        wtr.write_record(&rec).map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a feature CSV produced by [`write_features_csv`].
pub fn read_features_csv(path: &Path) -> Result<Vec<SimilarityFeature>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
    let dim;
    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols.first() != Some(&"patient_id") {
            return Err(Error::parse(path, 1, "first column must be patient_id"));
        }
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("f{i}") {
                return Err(Error::parse(
                    path,
                    1,
                    format!("expected column 'f{i}', got '{c}'"),
                ));
            }
        }
        dim = cols.len() - 1;
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != dim + 1 {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, got {}", dim + 1, record.len()),
            ));
        }
        let patient_id = record.get(0).unwrap_or("").trim().to_string();
        if patient_id.is_empty() {
            return Err(Error::parse(path, line, "empty patient_id"));
        }
        let mut values = Vec::with_capacity(dim);
        for i in 0..dim {
            let raw = record.get(i + 1).unwrap_or("").trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad float '{raw}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, "non-finite feature value"));
            }
            values.push(v);
        }
        out.push(SimilarityFeature { patient_id, values });
    }
    Ok(out)
}
