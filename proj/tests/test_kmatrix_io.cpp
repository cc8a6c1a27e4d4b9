#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bpdg/kmatrix_io.hpp"

using namespace bpdg;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("bpdg_" + name)).string();
}

CollisionMatrix random_matrix(std::size_t n) {
  CollisionMatrix cm = CollisionMatrix::zeros(n, Provenance::monte_carlo);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (Eigen::Index i = 0; i < cm.K.size(); ++i) cm.K.data()[i] = d(rng) < 0.3 ? d(rng) : 0.0;
  cm.update_loss();
  return cm;
}

}  // namespace

TEST(KMatrixIO, RoundTripIsBitExact) {
  const CollisionMatrix cm = random_matrix(37);
  const std::string path = temp_path("roundtrip.bin");
  write_kmatrix(path, cm);
  const CollisionMatrix back = read_kmatrix(path);
  EXPECT_EQ(back.provenance, Provenance::monte_carlo);
  ASSERT_EQ(back.size(), 37u);
  EXPECT_TRUE((back.K.array() == cm.K.array()).all());
  EXPECT_TRUE((back.loss.array() == cm.loss.array()).all());
  std::remove(path.c_str());
}

TEST(KMatrixIO, CorruptionIsDetected) {
  const CollisionMatrix cm = random_matrix(9);
  const std::string path = temp_path("corrupt.bin");
  write_kmatrix(path, cm);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40 + 8 * 5);
    const char junk = 0x55;
    f.write(&junk, 1);
  }
  EXPECT_THROW(read_kmatrix(path), KMatrixFileError);
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a matrix";
  }
  EXPECT_THROW(read_kmatrix(path), KMatrixFileError);
  EXPECT_THROW(read_kmatrix(temp_path("missing.bin")), KMatrixFileError);
  std::remove(path.c_str());
}

TEST(KMatrixIO, CsvListsNonzeros) {
  CollisionMatrix cm = CollisionMatrix::zeros(3);
  cm.K(0, 2) = 1.5;
  cm.K(2, 1) = 0.25;
  std::ostringstream os;
  write_kmatrix_csv(os, cm);
  EXPECT_EQ(os.str(), "row,col,value\n0,2,1.5\n2,1,0.25\n");
}
