#pragma once

#include "eqreg/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace eqreg {

enum class IdxDtype : std::uint8_t { kUnsignedByte = 0x08, kFloat = 0x0D };

struct IdxHeader {
  IdxDtype dtype = IdxDtype::kUnsignedByte;
  std::vector<std::uint32_t> dims;

  std::size_t header_bytes() const { return 4 + 4 * dims.size(); }
  std::size_t payload_bytes() const;
};

/// Reads magic and dims. Throws ParseError with the offending byte offset.
IdxHeader parse_idx_header(std::span<const std::uint8_t> bytes);

/// The first dimension counts samples; the rest are flattened row-major.
/// Unsigned bytes are scaled to [0, 1] by 1/255. A three-dimensional file
/// carries an image shape hint.
Dataset parse_idx(std::span<const std::uint8_t> bytes);

/// Inverse of parse_idx. Unsigned-byte output rounds x * 255 and requires
/// values in [0, 1].
std::vector<std::uint8_t> serialize_idx(const Dataset& dataset, IdxDtype dtype);

Dataset load_idx_file(const std::filesystem::path& path);

struct SyntheticSet {
  Dataset data;
  SubspaceProjector subspace;
};

/// n samples x = B c, B a seeded orthonormal dim x q frame (QR of a Gaussian
/// matrix) and c ~ coeff_scale * N(0, I).
SyntheticSet make_synthetic(Index dim, Index q, Index n, std::uint64_t seed,
                            double coeff_scale = 1.0);

/// Disjoint seeded shuffle split into (train, test).
std::pair<Dataset, Dataset> split(const Dataset& dataset, Index n_train, Index n_test,
                                  std::uint64_t seed);

}  // namespace eqreg
