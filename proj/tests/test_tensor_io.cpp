#include <cidl/errors.hpp>
#include <cidl/tensor_io.hpp>

#include <doctest.h>
#include <test_support.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>

using namespace cidl;
using namespace cidl::testing;

namespace {

std::vector<std::byte> bytes(std::initializer_list<int> raw) {
  std::vector<std::byte> out;
  for (const int b : raw)
    out.push_back(static_cast<std::byte>(b));
  return out;
}

std::vector<std::byte> header(int version, int dtype, std::initializer_list<std::uint64_t> dims) {
  std::vector<std::byte> out = bytes({'C', 'I', 'D', 'L', 'T', 'N', 'S', 'R'});
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::byte>((version >> (8 * i)) & 0xff));
  out.push_back(static_cast<std::byte>(dtype));
  out.push_back(static_cast<std::byte>(dims.size()));
  for (const std::uint64_t d : dims)
    for (int i = 0; i < 8; ++i)
      out.push_back(static_cast<std::byte>((d >> (8 * i)) & 0xff));
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "cidl_tensor_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

} // namespace

TEST_CASE("float64 round trip is bit exact") {
  Gen g(1);
  Tensor t;
  t.dims = {3, 4, 5};
  const MatrixXd v = gaussian_matrix(g, 60, 1) * 1e3;
  t.values.assign(v.data(), v.data() + 60);
  t.values[7] = -0.0;
  t.values[8] = 5e-324;

  const Tensor back = decode_tensor(encode_tensor(t));
  CHECK(back.dims == t.dims);
  CHECK(back.stored == DType::float64);
  REQUIRE(back.values.size() == 60);
  CHECK(std::memcmp(back.values.data(), t.values.data(), 60 * sizeof(double)) == 0);

  const auto path = scratch("round_trip.bin");
  write_tensor(path, t);
  const Tensor from_disk = read_tensor(path);
  CHECK(std::memcmp(from_disk.values.data(), t.values.data(), 60 * sizeof(double)) == 0);
  CHECK(std::filesystem::file_size(path) == 14 + 3 * 8 + 60 * 8);
}

TEST_CASE("hand-made float32 fixture") {
  std::vector<std::byte> file = header(1, 1, {2, 2});
  const auto payload = bytes({0x00, 0x00, 0x80, 0x3f,    // 1.0
                              0x00, 0x00, 0x00, 0xc0,    // -2.0
                              0x00, 0x00, 0x00, 0x3f,    // 0.5
                              0x00, 0x00, 0x40, 0x40});  // 3.0
  file.insert(file.end(), payload.begin(), payload.end());
  const Tensor t = decode_tensor(file);
  CHECK(t.stored == DType::float32);
  CHECK(t.dims == std::vector<std::uint64_t>{2, 2});
  CHECK(t.values == std::vector<double>{1.0, -2.0, 0.5, 3.0});

  // Re-encoding produces the same bytes.
  CHECK(encode_tensor(t, DType::float32) == file);

  // Dictionaries must be non-negative.
  CHECK_THROWS_AS(dictionary_from_tensor(t), ValidationError);
  Tensor positive = t;
  positive.values[1] = 2.0;
  const Dictionary phi = dictionary_from_tensor(positive);
  CHECK(phi.traces()(0, 1) == 2.0);
  CHECK(phi.traces()(1, 0) == 0.5);
}

TEST_CASE("malformed files are rejected") {
  std::vector<std::byte> short_payload = header(1, 2, {10});
  short_payload.resize(short_payload.size() + 9 * 8);
  CHECK_THROWS_AS(decode_tensor(short_payload), TruncatedPayloadError);

  std::vector<std::byte> bad_magic = header(1, 2, {1});
  bad_magic.resize(bad_magic.size() + 8);
  bad_magic[0] = std::byte{'X'};
  CHECK_THROWS_AS(decode_tensor(bad_magic), BadMagicError);

  std::vector<std::byte> bad_version = header(2, 2, {1});
  bad_version.resize(bad_version.size() + 8);
  CHECK_THROWS_AS(decode_tensor(bad_version), UnsupportedVersionError);

  std::vector<std::byte> bad_dtype = header(1, 3, {1});
  bad_dtype.resize(bad_dtype.size() + 8);
  CHECK_THROWS_AS(decode_tensor(bad_dtype), DtypeError);

  std::vector<std::byte> trailing = header(1, 2, {1});
  trailing.resize(trailing.size() + 9);
  CHECK_THROWS_AS(decode_tensor(trailing), TensorFormatError);

  CHECK_THROWS_AS(decode_tensor(bytes({'C', 'I', 'D'})), TruncatedPayloadError);
  std::vector<std::byte> cut_dims = header(1, 2, {4, 4});
  cut_dims.resize(cut_dims.size() - 3);
  CHECK_THROWS_AS(decode_tensor(cut_dims), TruncatedPayloadError);

  const auto path = scratch("short.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(short_payload.data()),
              static_cast<std::streamsize>(short_payload.size()));
  }
  try {
    read_tensor(path);
    FAIL("expected a truncated payload error");
  } catch (const TruncatedPayloadError& e) {
    CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
  }
  CHECK_THROWS_AS(read_tensor(scratch("missing.bin")), IoError);

  Tensor inconsistent;
  inconsistent.dims = {2, 2};
  inconsistent.values = {1.0};
  CHECK_THROWS_AS(encode_tensor(inconsistent), DimensionError);
}

TEST_CASE("domain conversions") {
  Gen g(2);
  const DataCube cube(uniform_matrix(g, 6, 12), 3, 4);
  const Tensor movie = to_tensor(cube);
  CHECK(movie.dims == std::vector<std::uint64_t>{6, 3, 4});
  // (t, i, j) with pixel i * ny + j.
  CHECK(movie.values[(2 * 3 + 1) * 4 + 3] == cube.samples()(2, 1 * 4 + 3));
  CHECK(datacube_from_tensor(movie).samples() == cube.samples());

  const Dictionary phi(uniform_matrix(g, 6, 3));
  CHECK(dictionary_from_tensor(decode_tensor(encode_tensor(to_tensor(phi)))).traces() ==
        phi.traces());

  const CoefficientMaps a(sparse_nonneg(g, 3, 12, 0.5), 3, 4);
  const Tensor maps = to_tensor(a);
  CHECK(maps.dims == std::vector<std::uint64_t>{3, 4, 3});
  CHECK(maps.values[(1 * 4 + 2) * 3 + 2] == a.matrix()(2, 1 * 4 + 2));
  CHECK(coefficients_from_tensor(maps).matrix() == a.matrix());

  const WeightMaps lam(uniform_matrix(g, 3, 12, 0.1, 2.0), 3, 4);
  CHECK(weights_from_tensor(to_tensor(lam)).matrix() == lam.matrix());

  CHECK_THROWS_AS(datacube_from_tensor(to_tensor(phi)), DimensionError);
  CHECK_THROWS_AS(dictionary_from_tensor(movie), DimensionError);
  CHECK_THROWS_AS(coefficients_from_tensor(to_tensor(phi)), DimensionError);
}
