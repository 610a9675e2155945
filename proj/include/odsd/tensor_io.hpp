#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "odsd/matrix.hpp"

namespace odsd::io {

// Binary tensor container: magic "ODST", u16 version (1), u8 dtype (1 = f64),
// u8 rank (1 or 2), rank u64 dims, then row-major f64 payload. All integers
// and doubles are little-endian. Rank-2 files carry a 24-byte header.

void write_matrix(const std::filesystem::path& path, const Matrix& m);
void write_vector(const std::filesystem::path& path, std::span<const double> v);

/// Reads an ODST file of rank 1 or 2 (rank 1 becomes a single-column
/// matrix). Files that do not start with the magic are parsed as CSV: an
/// optional non-numeric header line followed by comma-separated rows.
Matrix read_matrix(const std::filesystem::path& path);

std::vector<double> read_vector(const std::filesystem::path& path);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

}  // namespace odsd::io
