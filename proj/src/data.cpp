#include "eqreg/data.hpp"

#include "eqreg/linops.hpp"
#include "eqreg/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <string>

namespace eqreg {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::size_t dtype_size(IdxDtype t) { return t == IdxDtype::kFloat ? 4 : 1; }

}  // namespace

std::size_t IdxHeader::payload_bytes() const {
  std::size_t n = dtype_size(dtype);
  for (std::uint32_t d : dims) n *= d;
  return n;
}

IdxHeader parse_idx_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4)
    throw ParseError("IDX magic needs 4 bytes, got " + std::to_string(bytes.size()), bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("bad IDX magic", bytes[0] != 0 ? 0 : 1);
  IdxHeader h;
  if (bytes[2] == 0x08) {
    h.dtype = IdxDtype::kUnsignedByte;
  } else if (bytes[2] == 0x0D) {
    h.dtype = IdxDtype::kFloat;
  } else {
    char code[8];
    std::snprintf(code, sizeof code, "0x%02X", bytes[2]);
    throw ParseError(std::string("unsupported IDX dtype ") + code, 2);
  }
  const std::size_t ndim = bytes[3];
  if (ndim == 0) throw ParseError("IDX file declares zero dimensions", 3);
  if (bytes.size() < 4 + 4 * ndim)
    throw ParseError("IDX header truncated: expected " + std::to_string(4 + 4 * ndim) +
                         " bytes, got " + std::to_string(bytes.size()),
                     bytes.size());
  for (std::size_t i = 0; i < ndim; ++i) h.dims.push_back(read_be32(bytes, 4 + 4 * i));
  return h;
}

Dataset parse_idx(std::span<const std::uint8_t> bytes) {
  const IdxHeader h = parse_idx_header(bytes);
  const std::size_t head = h.header_bytes();
  const std::size_t need = h.payload_bytes();
  if (bytes.size() - head != need)
    throw ParseError("IDX payload: expected " + std::to_string(need) + " bytes, got " +
                         std::to_string(bytes.size() - head),
                     bytes.size() < head + need ? bytes.size() : head + need);

  const auto n = static_cast<Index>(h.dims[0]);
  Index dim = 1;
  for (std::size_t i = 1; i < h.dims.size(); ++i) dim *= static_cast<Index>(h.dims[i]);
  Matrix samples(dim, n);
  const std::uint8_t* p = bytes.data() + head;
  for (Index s = 0; s < n; ++s) {
    for (Index k = 0; k < dim; ++k) {
      if (h.dtype == IdxDtype::kUnsignedByte) {
        samples(k, s) = *p++ / 255.0;
      } else {
        const std::uint32_t bits = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                                   (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
        p += 4;
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f))
          throw ParseError("non-finite IDX float", static_cast<std::size_t>(p - bytes.data() - 4));
        samples(k, s) = f;
      }
    }
  }
  std::optional<ImageShape> hint;
  if (h.dims.size() == 3) hint = ImageShape{static_cast<Index>(h.dims[1]), static_cast<Index>(h.dims[2])};
  return Dataset(std::move(samples), Provenance::kIdxFile, hint);
}

std::vector<std::uint8_t> serialize_idx(const Dataset& dataset, IdxDtype dtype) {
  std::vector<std::uint8_t> out = {0, 0, static_cast<std::uint8_t>(dtype), 0};
  std::vector<std::uint32_t> dims = {static_cast<std::uint32_t>(dataset.size())};
  if (dataset.shape_hint()) {
    dims.push_back(static_cast<std::uint32_t>(dataset.shape_hint()->rows));
    dims.push_back(static_cast<std::uint32_t>(dataset.shape_hint()->cols));
  } else {
    dims.push_back(static_cast<std::uint32_t>(dataset.dim()));
  }
  out[3] = static_cast<std::uint8_t>(dims.size());
  for (std::uint32_t d : dims) write_be32(out, d);
  const Matrix& m = dataset.samples();
  for (Index s = 0; s < m.cols(); ++s) {
    for (Index k = 0; k < m.rows(); ++k) {
      const double v = m(k, s);
      if (dtype == IdxDtype::kUnsignedByte) {
        if (v < 0.0 || v > 1.0) throw InvalidArgument("unsigned-byte IDX needs values in [0, 1]");
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      } else {
        write_be32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  return out;
}

Dataset load_idx_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_idx(bytes);
}

SyntheticSet make_synthetic(Index dim, Index q, Index n, std::uint64_t seed, double coeff_scale) {
  if (dim <= 0) throw InvalidArgument("dim must be positive");
  if (q < 0 || q > dim)
    throw InvalidArgument("q = " + std::to_string(q) + " must lie in [0, " + std::to_string(dim) + "]");
  if (n < 0) throw InvalidArgument("n must be >= 0");
  SyntheticSet out;
  Rng frame_rng(derive_seed(seed, 0));
  Matrix frame(dim, q);
  if (q > 0) {
    const Matrix g = gaussian_matrix(frame_rng, dim, q);
    Eigen::HouseholderQR<Matrix> qr(g);
    frame = qr.householderQ() * Matrix::Identity(dim, q);
  }
  Rng coeff_rng(derive_seed(seed, 1));
  const Matrix coeffs = coeff_scale * gaussian_matrix(coeff_rng, q, n);
  out.data = Dataset(frame * coeffs, Provenance::kSynthetic);
  out.subspace.basis = std::move(frame);
  out.subspace.explained_energy = 1.0;
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, Index n_train, Index n_test,
                                  std::uint64_t seed) {
  if (n_train < 0 || n_test < 0) throw InvalidArgument("split sizes must be >= 0");
  if (n_train + n_test > dataset.size())
    throw InvalidArgument("split needs " + std::to_string(n_train + n_test) + " samples, have " +
                          std::to_string(dataset.size()));
  std::vector<Index> order(static_cast<std::size_t>(dataset.size()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Index> train(order.begin(), order.begin() + n_train);
  std::vector<Index> test(order.begin() + n_train, order.begin() + n_train + n_test);
  return {dataset.subset(train), dataset.subset(test)};
}

}  // namespace eqreg
