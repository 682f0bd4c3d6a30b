#include <cidl/errors.hpp>
#include <cidl/tensor_io.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace cidl {

namespace {

constexpr char kMagic[8] = {'C', 'I', 'D', 'L', 'T', 'N', 'S', 'R'};
constexpr std::size_t kFixedHeader = 8 + 4 + 1 + 1;

template <class U>
void put_le(std::vector<std::byte>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b)
    out.push_back(static_cast<std::byte>((value >> (8 * b)) & 0xFF));
}

template <class U>
U get_le(std::span<const std::byte> in, std::size_t offset) {
  U value = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b)
    value |= static_cast<U>(std::to_integer<std::uint8_t>(in[offset + b])) << (8 * b);
  return value;
}

std::size_t scalar_size(DType d) { return d == DType::float32 ? 4 : 8; }

void require_rank(const Tensor& t, std::size_t ndim, const char* what) {
  if (t.dims.size() != ndim)
    throw DimensionError(std::string(what) + ": expected a rank-" + std::to_string(ndim) +
                         " tensor, got rank " + std::to_string(t.dims.size()));
}

Index as_index(std::uint64_t d) {
  if (d > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()))
    throw DimensionError("tensor dimension too large");
  return static_cast<Index>(d);
}

} // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims)
    n *= d;
  return n;
}

std::vector<std::byte> encode_tensor(const Tensor& tensor, DType dtype) {
  if (tensor.dims.size() > 255)
    throw ValidationError("tensor rank exceeds 255");
  if (tensor.values.size() != tensor.element_count())
    throw DimensionError("tensor values do not match its dimensions");
  std::vector<std::byte> out;
  out.reserve(kFixedHeader + 8 * tensor.dims.size() + scalar_size(dtype) * tensor.values.size());
  for (char c : kMagic)
    out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, kTensorVersion);
  out.push_back(static_cast<std::byte>(dtype));
  out.push_back(static_cast<std::byte>(tensor.dims.size()));
  for (auto d : tensor.dims)
    put_le<std::uint64_t>(out, d);
  for (double v : tensor.values) {
    if (dtype == DType::float64)
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    else
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < kFixedHeader)
    throw TruncatedPayloadError("tensor header is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw BadMagicError("not a tensor file (bad magic)");
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kTensorVersion)
    throw UnsupportedVersionError("unsupported tensor format version " + std::to_string(version));
  const auto code = std::to_integer<std::uint8_t>(bytes[12]);
  if (code != 1 && code != 2)
    throw DtypeError("unknown tensor dtype code " + std::to_string(code));
  Tensor t;
  t.stored = static_cast<DType>(code);
  const std::size_t ndim = std::to_integer<std::uint8_t>(bytes[13]);
  if (bytes.size() < kFixedHeader + 8 * ndim)
    throw TruncatedPayloadError("tensor dimension list is truncated");
  for (std::size_t d = 0; d < ndim; ++d)
    t.dims.push_back(get_le<std::uint64_t>(bytes, kFixedHeader + 8 * d));

  const std::size_t width = scalar_size(t.stored);
  const std::size_t offset = kFixedHeader + 8 * ndim;
  const std::uint64_t count = t.element_count();
  const std::uint64_t payload = bytes.size() - offset;
  if (count > payload / width || count * width > payload)
    throw TruncatedPayloadError("tensor payload is truncated: header claims " +
                                std::to_string(count) + " elements, file holds " +
                                std::to_string(payload / width));
  if (payload != count * width)
    throw TensorFormatError("tensor payload has trailing bytes");

  t.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = offset + i * width;
    if (t.stored == DType::float64)
      t.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, at));
    else
      t.values[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, at)));
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor, DType dtype) {
  const auto bytes = encode_tensor(tensor, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(std::as_bytes(std::span(raw)));
  } catch (const TruncatedPayloadError& e) {
    throw TruncatedPayloadError(path.string() + ": " + e.what());
  } catch (const BadMagicError& e) {
    throw BadMagicError(path.string() + ": " + e.what());
  } catch (const UnsupportedVersionError& e) {
    throw UnsupportedVersionError(path.string() + ": " + e.what());
  } catch (const DtypeError& e) {
    throw DtypeError(path.string() + ": " + e.what());
  } catch (const TensorFormatError& e) {
    throw TensorFormatError(path.string() + ": " + e.what());
  }
}

Tensor to_tensor(const DataCube& cube) {
  Tensor t;
  const Index frames = cube.frames();
  const Index pixels = cube.pixels();
  t.dims = {static_cast<std::uint64_t>(frames), static_cast<std::uint64_t>(cube.nx()),
            static_cast<std::uint64_t>(cube.ny())};
  t.values.resize(static_cast<std::size_t>(frames * pixels));
  for (Index f = 0; f < frames; ++f)
    for (Index p = 0; p < pixels; ++p)
      t.values[static_cast<std::size_t>(f * pixels + p)] = cube.samples()(f, p);
  return t;
}

Tensor to_tensor(const Dictionary& phi) {
  Tensor t;
  const Index frames = phi.frames();
  const Index atoms = phi.atoms();
  t.dims = {static_cast<std::uint64_t>(frames), static_cast<std::uint64_t>(atoms)};
  t.values.resize(static_cast<std::size_t>(frames * atoms));
  for (Index f = 0; f < frames; ++f)
    for (Index k = 0; k < atoms; ++k)
      t.values[static_cast<std::size_t>(f * atoms + k)] = phi.traces()(f, k);
  return t;
}

namespace {

// Pixel-major K x P storage is already (Nx, Ny, K) row-major.
Tensor maps_tensor(const MatrixXd& m, Index nx, Index ny) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(nx), static_cast<std::uint64_t>(ny),
            static_cast<std::uint64_t>(m.rows())};
  t.values.assign(m.data(), m.data() + m.size());
  return t;
}

MatrixXd maps_matrix(const Tensor& t, const char* what) {
  require_rank(t, 3, what);
  const Index nx = as_index(t.dims[0]);
  const Index ny = as_index(t.dims[1]);
  const Index atoms = as_index(t.dims[2]);
  return Eigen::Map<const MatrixXd>(t.values.data(), atoms, nx * ny);
}

} // namespace

Tensor to_tensor(const CoefficientMaps& a) { return maps_tensor(a.matrix(), a.nx(), a.ny()); }
Tensor to_tensor(const WeightMaps& lam) { return maps_tensor(lam.matrix(), lam.nx(), lam.ny()); }

DataCube datacube_from_tensor(const Tensor& t) {
  require_rank(t, 3, "movie");
  const Index frames = as_index(t.dims[0]);
  const Index nx = as_index(t.dims[1]);
  const Index ny = as_index(t.dims[2]);
  const Index pixels = nx * ny;
  MatrixXd samples(frames, pixels);
  for (Index f = 0; f < frames; ++f)
    for (Index p = 0; p < pixels; ++p)
      samples(f, p) = t.values[static_cast<std::size_t>(f * pixels + p)];
  return DataCube(std::move(samples), nx, ny);
}

Dictionary dictionary_from_tensor(const Tensor& t) {
  require_rank(t, 2, "dictionary");
  const Index frames = as_index(t.dims[0]);
  const Index atoms = as_index(t.dims[1]);
  MatrixXd phi(frames, atoms);
  for (Index f = 0; f < frames; ++f)
    for (Index k = 0; k < atoms; ++k)
      phi(f, k) = t.values[static_cast<std::size_t>(f * atoms + k)];
  return Dictionary(std::move(phi));
}

CoefficientMaps coefficients_from_tensor(const Tensor& t) {
  MatrixXd m = maps_matrix(t, "coefficient maps");
  return CoefficientMaps(std::move(m), as_index(t.dims[0]), as_index(t.dims[1]));
}

WeightMaps weights_from_tensor(const Tensor& t) {
  MatrixXd m = maps_matrix(t, "weight maps");
  return WeightMaps(std::move(m), as_index(t.dims[0]), as_index(t.dims[1]));
}

} // namespace cidl
