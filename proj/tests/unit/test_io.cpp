#include "temb/datasets.hpp"
#include "temb/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace temb;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("temb_unit_" + name)).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string bytes_of(const TerminalIndex& index) {
  std::ostringstream out;
  save_index(index, out);
  return out.str();
}

}  // namespace

TEST_CASE("csv points") {
  auto path = temp_path("a.csv");
  write_text(path, "1, 2.5 ,3\n-4,5e-1,6\n\n");
  Matrix M = read_matrix(path);
  REQUIRE(M.rows() == 3);
  REQUIRE(M.cols() == 2);
  CHECK(M(1, 0) == 2.5);
  CHECK(M(1, 1) == 0.5);
  write_text(path, "1,2\n3\n");
  CHECK_THROWS_AS(read_matrix(path), IoError);
  write_text(path, "1,nan\n");
  CHECK_THROWS_AS(read_matrix(path), IoError);
  write_text(path, "1,2x\n");
  CHECK_THROWS_AS(read_matrix(path), IoError);
  write_text(path, "");
  CHECK_THROWS_AS(read_points(path), IoError);
}

TEST_CASE("binary points round trip") {
  auto path = temp_path("b.bin");
  Matrix M = Matrix::Random(5, 7);
  write_matrix(path, M);
  CHECK(read_matrix(path) == M);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  write_text(path, bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_matrix(path), IoError);
  CHECK_THROWS_AS(read_matrix(temp_path("missing")), IoError);
}

TEST_CASE("config round trip") {
  TerminalConfig c;
  apply_config_text(c, "eps = 0.125\n# comment\naann.backend = lsh\nap.backend = hyperplane-lsh\n"
                       "lifted = simhash\ncap_assigned = 40\nprobe_cap = none\nscale_window = off\n");
  CHECK(c.eps == 0.125);
  CHECK(c.aann.backend == AnnBackend::lsh);
  CHECK(c.ap.backend == ApBackend::hyperplane_lsh);
  CHECK(c.lifted == LiftedBackend::simhash);
  CHECK(c.cap_assigned == 40);
  CHECK(c.probe_cap == kNoCap);
  CHECK_FALSE(c.scale_window);
  TerminalConfig d;
  apply_config_text(d, config_text(c));
  CHECK(config_text(d) == config_text(c));
  CHECK_THROWS_AS(apply_config_value(d, "no_such_key", "1"), IoError);
  CHECK_THROWS_AS(apply_config_value(d, "eps", "fast"), IoError);
}

TEST_CASE("crc64 check value") {
  const char text[] = "123456789";
  CHECK(crc64(text, 9) == 0x995DC9BBDF1939FAULL);
}

TEST_CASE("index round trip") {
  PointSet all = gaussian_mixture(70, 4, 3, 4.0, 1);
  PointSet X(all.matrix().leftCols(60));
  for (bool lsh : {false, true}) {
    TerminalConfig config;
    config.eps = 0.3;
    if (lsh) apply_lsh_preset(config);
    TerminalIndex index = TerminalIndex::build(X, config, 2);
    std::string bytes = bytes_of(index);
    std::istringstream in(bytes);
    TerminalIndex back = load_index(in);
    CHECK(bytes_of(back) == bytes);
    for (std::size_t i = 60; i < 70; ++i) {
      Rng a(i), b(i);
      CHECK(index.embed(all.col(i), a).z == back.embed(all.col(i), b).z);
    }
  }
}

TEST_CASE("corrupt index is rejected") {
  PointSet X = uniform_cube(30, 3, 3);
  TerminalConfig config;
  config.eps = 0.3;
  std::string bytes = bytes_of(TerminalIndex::build(X, config, 4));
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  std::istringstream a(flipped);
  CHECK_THROWS_AS(load_index(a), IoError);
  std::istringstream b(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(load_index(b), IoError);
  std::istringstream c("TEMBxxxx");
  CHECK_THROWS_AS(load_index(c), IoError);
}
