#pragma once

#include "efa/reduced_gn.hpp"
#include "efa/types.hpp"

#include <string>
#include <vector>

namespace efa::io {

/// Text matrix format: header "# complex P R C" (P is the sensor count,
/// equal to the row count R), then one line per row with 2C comma-separated
/// fields alternating real,imag, printed with 17 significant digits so
/// doubles round-trip exactly.
void write_matrix(const std::string& path, const Matrix& m);
Matrix read_matrix(const std::string& path);

/// Mask format: header "# mask P P", then one line per row with P
/// comma-separated 0/1 fields.
void write_mask(const std::string& path, const NoiseMask& mask);
NoiseMask read_mask(const std::string& path);

/// Trace format: CSV with header iter,cost,grad_norm,mu,inner_iters,wall_ms
/// and one row per iteration, doubles at 17 significant digits.
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_trace_csv(const std::string& path);

/// Checks entries(i,j) == conj(entries(j,i)) and a real diagonal to within
/// tol times the largest magnitude; the error names the offending entry.
HermitianMatrix as_hermitian(const Matrix& m, double tol = 1e-12);

}  // namespace efa::io
