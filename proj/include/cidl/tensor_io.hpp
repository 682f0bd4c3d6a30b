#pragma once

#include <cidl/core_model.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cidl {

/*
  TensorFile layout (all integers little-endian):

    offset  size       field
    0       8          magic "CIDLTNSR"
    8       4          format version, u32 = 1
    12      1          dtype code, u8: 1 = float32, 2 = float64
    13      1          ndim, u8
    14      8 * ndim   dimensions, u64 each
    ...                payload, row-major (last index fastest) scalars

  The payload holds exactly product(dims) scalars.
*/

enum class DType : std::uint8_t { float32 = 1, float64 = 2 };

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
  /// Scalar type found on disk; values are always widened to double.
  DType stored = DType::float64;

  std::uint64_t element_count() const;
};

inline constexpr std::uint32_t kTensorVersion = 1;

std::vector<std::byte> encode_tensor(const Tensor& tensor, DType dtype = DType::float64);
Tensor decode_tensor(std::span<const std::byte> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor,
                  DType dtype = DType::float64);
Tensor read_tensor(const std::filesystem::path& path);

// Domain conversions. Movies are (T, Nx, Ny), dictionaries (T, K) and
// coefficient/weight maps (Nx, Ny, K).
Tensor to_tensor(const DataCube& cube);
Tensor to_tensor(const Dictionary& phi);
Tensor to_tensor(const CoefficientMaps& a);
Tensor to_tensor(const WeightMaps& lam);

DataCube datacube_from_tensor(const Tensor& t);
Dictionary dictionary_from_tensor(const Tensor& t);
CoefficientMaps coefficients_from_tensor(const Tensor& t);
WeightMaps weights_from_tensor(const Tensor& t);

} // namespace cidl
