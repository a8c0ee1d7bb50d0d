#include "quantlab/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace quantlab {

namespace {

void check_finite(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteValue("non-finite value at flat index " + std::to_string(i), i);
    }
  }
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

ActivationTensor::ActivationTensor(std::size_t rows, std::size_t cols,
                                   std::vector<double> values, DType dtype)
    : rows_(rows), cols_(cols), dtype_(dtype), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) {
    throw InvalidArgument("tensor shape must be at least 1x1");
  }
  if (values_.size() != rows_ * cols_) {
    throw ShapeMismatch("value count " + std::to_string(values_.size()) +
                        " does not match shape " + std::to_string(rows_) + "x" +
                        std::to_string(cols_));
  }
  check_finite(values_);
}

ActivationTensor ActivationTensor::narrowed_to_f32() const {
  std::vector<double> narrowed(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    narrowed[i] = static_cast<double>(static_cast<float>(values_[i]));
  }
  return ActivationTensor(rows_, cols_, std::move(narrowed), DType::f32);
}

ActivationTensor load_dump(const std::string& path, bool narrow_to_f32) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open dump file: " + path);

  unsigned char header[kDumpHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kDumpHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kDumpHeaderBytes)) {
    throw MalformedHeader("dump file shorter than header: " + path);
  }
  if (std::memcmp(header, kDumpMagic, 4) != 0) {
    throw MalformedHeader("bad magic in dump file: " + path);
  }
  const unsigned char dtype_byte = header[4];
  if (dtype_byte > 1) {
    throw MalformedHeader("unknown dtype byte " + std::to_string(int(dtype_byte)));
  }
  const DType dtype = static_cast<DType>(dtype_byte);
  const std::uint64_t rows = get_u64_le(header + 5);
  const std::uint64_t cols = get_u64_le(header + 13);
  if (rows == 0 || cols == 0) {
    throw ShapeMismatch("dump declares empty shape " + std::to_string(rows) +
                        "x" + std::to_string(cols));
  }
  if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / cols) {
    throw ShapeMismatch("dump shape overflows");
  }
  const std::uint64_t count = rows * cols;
  const std::size_t width = dtype == DType::f32 ? 4 : 8;

  // Validate the payload length against the actual file size before
  // allocating anything, so a corrupt header cannot demand absurd memory.
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  if (count > (std::numeric_limits<std::uint64_t>::max() - kDumpHeaderBytes) / width ||
      file_size != kDumpHeaderBytes + count * width) {
    throw ShapeMismatch("payload length does not match declared shape in " + path);
  }
  in.seekg(kDumpHeaderBytes, std::ios::beg);

  std::string payload(count * width, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size())) {
    throw IoFailure("read failed: " + path);
  }

  std::vector<double> values(count);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
  if (dtype == DType::f32) {
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= std::uint32_t(p[i * 4 + b]) << (8 * b);
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  } else {
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t bits = get_u64_le(p + i * 8);
      values[i] = std::bit_cast<double>(bits);
    }
  }

  ActivationTensor t(rows, cols, std::move(values), dtype);
  if (narrow_to_f32 && dtype == DType::f64) return t.narrowed_to_f32();
  return t;
}

void save_dump(const ActivationTensor& t, const std::string& path) {
  std::string out;
  const std::size_t width = t.dtype() == DType::f32 ? 4 : 8;
  out.reserve(kDumpHeaderBytes + t.size() * width);
  out.append(kDumpMagic, 4);
  out.push_back(static_cast<char>(t.dtype()));
  put_u64_le(out, t.rows());
  put_u64_le(out, t.cols());

  if (t.dtype() == DType::f32) {
    for (double v : t.values()) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  } else {
    for (double v : t.values()) {
      put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw IoFailure("write failed: " + path);
}

}  // namespace quantlab
