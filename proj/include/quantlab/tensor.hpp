#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "quantlab/errors.hpp"

namespace quantlab {

// Payload precision of a tensor dump. Values are held as doubles in memory
// either way; the tag records which width round-trips the payload bit-exactly.
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

// Immutable 2-D activation matrix: rows = tokens/samples, cols = channels.
// Row-major storage. Construction rejects non-finite values, so everything
// downstream may assume finiteness. All transformations produce new tensors.
class ActivationTensor {
public:
  ActivationTensor(std::size_t rows, std::size_t cols,
                   std::vector<double> values, DType dtype = DType::f64);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  DType dtype() const { return dtype_; }

  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  const std::vector<double>& values() const { return values_; }

  // Rounds every value through IEEE float and tags the result f32. This is
  // the only way a tensor acquires the f32 tag after construction.
  ActivationTensor narrowed_to_f32() const;

  bool same_shape(const ActivationTensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

private:
  std::size_t rows_;
  std::size_t cols_;
  DType dtype_;
  std::vector<double> values_;
};

// --- dump file I/O -----------------------------------------------------
//
// Byte layout (bit-exact):
//   4 bytes  magic "QLT1"
//   1 byte   dtype (0 = f32, 1 = f64)
//   8 bytes  rows, little-endian unsigned
//   8 bytes  cols, little-endian unsigned
//   payload  rows*cols raw little-endian values
//
// Any framework can emit this with a few lines of export script.

inline constexpr char kDumpMagic[4] = {'Q', 'L', 'T', '1'};
inline constexpr std::size_t kDumpHeaderBytes = 4 + 1 + 8 + 8;

// Loads a dump. f64 payloads are narrowed to f32 only when narrow_to_f32 is
// set; otherwise the payload precision is preserved.
ActivationTensor load_dump(const std::string& path, bool narrow_to_f32 = false);

// Writes the tensor using its own dtype tag.
void save_dump(const ActivationTensor& t, const std::string& path);

}  // namespace quantlab
