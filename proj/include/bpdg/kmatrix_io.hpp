#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "collision.hpp"

namespace bpdg {

static_assert(std::endian::native == std::endian::little,
              "kmatrix files are little-endian; add byte swapping for this host");

/// Binary layout, little-endian:
///   char[8]  magic "BPDGKMAT"
///   uint32   version (1)
///   uint32   provenance (0 oracle, 1 monte_carlo)
///   uint64   N
///   uint64   FNV-1a 64 checksum of the payload bytes
///   double   K[N*N], row-major
inline constexpr std::array<char, 8> kmatrix_magic{'B', 'P', 'D', 'G', 'K', 'M', 'A', 'T'};
inline constexpr std::uint32_t kmatrix_version = 1;

inline std::uint64_t fnv1a64(const void* data, std::size_t bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class KMatrixFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<double> row_major(const Eigen::MatrixXd& k) {
  std::vector<double> out(static_cast<std::size_t>(k.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      out.data(), k.rows(), k.cols()) = k;
  return out;
}

inline void write_kmatrix(const std::string& path, const CollisionMatrix& cm) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw KMatrixFileError("cannot open '" + path + "' for writing");
  const std::vector<double> payload = row_major(cm.K);
  const std::uint64_t n = cm.size();
  const std::uint64_t sum = fnv1a64(payload.data(), payload.size() * sizeof(double));
  const auto prov = static_cast<std::uint32_t>(cm.provenance);
  os.write(kmatrix_magic.data(), kmatrix_magic.size());
  os.write(reinterpret_cast<const char*>(&kmatrix_version), sizeof kmatrix_version);
  os.write(reinterpret_cast<const char*>(&prov), sizeof prov);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&sum), sizeof sum);
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!os) throw KMatrixFileError("write failed for '" + path + "'");
}

/// Reads K back. gamma_int is not stored; it is set to the column sums,
/// which equal the per-cell rate integrals up to quadrature error for oracle files.
inline CollisionMatrix read_kmatrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw KMatrixFileError("cannot open '" + path + "'");
  std::array<char, 8> magic{};
  std::uint32_t version = 0;
  std::uint32_t prov = 0;
  std::uint64_t n = 0;
  std::uint64_t sum = 0;
  is.read(magic.data(), magic.size());
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  is.read(reinterpret_cast<char*>(&prov), sizeof prov);
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&sum), sizeof sum);
  if (!is || magic != kmatrix_magic) throw KMatrixFileError("'" + path + "' is not a K matrix file");
  if (version != kmatrix_version) throw KMatrixFileError("unsupported K matrix file version");
  if (prov > 1) throw KMatrixFileError("unknown provenance tag");
  if (n == 0 || n > (1u << 16)) throw KMatrixFileError("implausible matrix size");
  std::vector<double> payload(n * n);
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!is) throw KMatrixFileError("truncated K matrix file '" + path + "'");
  if (fnv1a64(payload.data(), payload.size() * sizeof(double)) != sum) {
    throw KMatrixFileError("checksum mismatch in '" + path + "'");
  }
  CollisionMatrix cm = CollisionMatrix::zeros(n, static_cast<Provenance>(prov));
  cm.K = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      payload.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  cm.update_loss();
  cm.gamma_int = cm.loss;
  return cm;
}

/// Sparse CSV listing: row, col, value for nonzero entries.
inline void write_kmatrix_csv(std::ostream& os, const CollisionMatrix& cm) {
  os << "row,col,value\n";
  os.precision(15);
  for (Eigen::Index a = 0; a < cm.K.rows(); ++a) {
    for (Eigen::Index b = 0; b < cm.K.cols(); ++b) {
      if (cm.K(a, b) != 0.0) os << a << ',' << b << ',' << cm.K(a, b) << '\n';
    }
  }
}

}  // namespace bpdg
