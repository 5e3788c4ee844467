#include "f2f/tensor.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "f2f/errors.hpp"

namespace f2f {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("zero-sized dimension in shape " + shape_to_string(shape));
    if (d > std::numeric_limits<std::size_t>::max() / n)
      throw DimensionError("shape overflow in " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size())
    throw DimensionError("data size " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
  if (checked_numel(new_shape) != data_.size())
    throw DimensionError("reshape " + shape_to_string(shape_) + " -> " +
                         shape_to_string(new_shape) + " changes element count");
  return Tensor(std::move(new_shape), data_);
}

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_)) {}

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape,
                             std::vector<std::complex<double>> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size())
    throw DimensionError("data size " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
}

ComplexTensor ComplexTensor::reshaped(std::vector<std::size_t> new_shape) const {
  if (checked_numel(new_shape) != data_.size())
    throw DimensionError("reshape " + shape_to_string(shape_) + " -> " +
                         shape_to_string(new_shape) + " changes element count");
  return ComplexTensor(std::move(new_shape), data_);
}

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

Tensor complex_to_stacked(const ComplexTensor& x, std::size_t channel_axis) {
  if (channel_axis >= x.rank())
    throw DimensionError("channel axis " + std::to_string(channel_axis) +
                         " out of range for shape " + shape_to_string(x.shape()));
  const std::size_t c = x.dim(channel_axis);
  std::vector<std::size_t> out_shape = x.shape();
  out_shape[channel_axis] = 2 * c;
  Tensor out(out_shape);

  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < channel_axis; ++i) pre *= x.dim(i);
  for (std::size_t i = channel_axis + 1; i < x.rank(); ++i) post *= x.dim(i);

  for (std::size_t p = 0; p < pre; ++p)
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t q = 0; q < post; ++q) {
        const std::complex<double> v = x[(p * c + a) * post + q];
        out[(p * 2 * c + a) * post + q] = v.real();
        out[(p * 2 * c + c + a) * post + q] = v.imag();
      }
  return out;
}

ComplexTensor stacked_to_complex(const Tensor& x, std::size_t channel_axis) {
  if (channel_axis >= x.rank())
    throw DimensionError("channel axis " + std::to_string(channel_axis) +
                         " out of range for shape " + shape_to_string(x.shape()));
  const std::size_t c2 = x.dim(channel_axis);
  if (c2 % 2 != 0)
    throw DimensionError("stacked channel axis must be even, got " +
                         std::to_string(c2));
  const std::size_t c = c2 / 2;
  std::vector<std::size_t> out_shape = x.shape();
  out_shape[channel_axis] = c;
  ComplexTensor out(out_shape);

  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < channel_axis; ++i) pre *= x.dim(i);
  for (std::size_t i = channel_axis + 1; i < x.rank(); ++i) post *= x.dim(i);

  for (std::size_t p = 0; p < pre; ++p)
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t q = 0; q < post; ++q)
        out[(p * c + a) * post + q] = {x[(p * 2 * c + a) * post + q],
                                       x[(p * 2 * c + c + a) * post + q]};
  return out;
}

// --- F2FT I/O ---
// Fields are written verbatim for the little-endian hosts this project
// targets; readers validate magic, version and dtype with distinct errors.

namespace {

constexpr char kMagic[4] = {'F', '2', 'F', 'T'};
constexpr std::uint8_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) throw IoError("short write while emitting tensor data");
}

void write_header(std::ostream& out, F2ftDtype dtype,
                  const std::vector<std::size_t>& shape) {
  write_bytes(out, kMagic, 4);
  write_bytes(out, &kVersion, 1);
  const auto dt = static_cast<std::uint8_t>(dtype);
  write_bytes(out, &dt, 1);
  if (shape.size() > 255)
    throw DimensionError("tensor rank exceeds format limit of 255");
  const auto rank = static_cast<std::uint8_t>(shape.size());
  write_bytes(out, &rank, 1);
  for (std::size_t d : shape) {
    const std::uint64_t d64 = d;
    write_bytes(out, &d64, 8);
  }
}

void read_bytes(std::istream& in, void* p, std::size_t n,
                const std::string& origin, const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw FormatError(FormatDefect::Truncated,
                      origin + ": truncated while reading " + what);
}

}  // namespace

void write_f2ft(std::ostream& out, const Tensor& t) {
  write_header(out, F2ftDtype::Real, t.shape());
  write_bytes(out, t.data(), t.numel() * sizeof(double));
}

void write_f2ft(std::ostream& out, const ComplexTensor& t) {
  write_header(out, F2ftDtype::Complex, t.shape());
  write_bytes(out, t.data(), t.numel() * sizeof(std::complex<double>));
}

void write_f2ft_file(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_f2ft(out, t);
}

void write_f2ft_file(const std::string& path, const ComplexTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_f2ft(out, t);
}

F2ftAny read_f2ft(std::istream& in, const std::string& origin) {
  char magic[4];
  read_bytes(in, magic, 4, origin, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(FormatDefect::BadMagic, origin + ": not a tensor file");
  std::uint8_t version = 0;
  read_bytes(in, &version, 1, origin, "version");
  if (version != kVersion)
    throw FormatError(FormatDefect::BadVersion,
                      origin + ": unsupported version " + std::to_string(version));
  std::uint8_t dtype = 0;
  read_bytes(in, &dtype, 1, origin, "dtype");
  if (dtype != static_cast<std::uint8_t>(F2ftDtype::Real) &&
      dtype != static_cast<std::uint8_t>(F2ftDtype::Complex))
    throw FormatError(FormatDefect::BadDtype,
                      origin + ": unknown dtype " + std::to_string(dtype));
  std::uint8_t rank = 0;
  read_bytes(in, &rank, 1, origin, "rank");
  std::vector<std::size_t> shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    std::uint64_t d = 0;
    read_bytes(in, &d, 8, origin, "dims");
    if (d == 0)
      throw FormatError(FormatDefect::BadHeader,
                        origin + ": zero-sized dimension");
    shape[i] = static_cast<std::size_t>(d);
  }

  F2ftAny any;
  any.dtype = static_cast<F2ftDtype>(dtype);
  if (any.dtype == F2ftDtype::Real) {
    Tensor t(shape);
    read_bytes(in, t.data(), t.numel() * sizeof(double), origin, "payload");
    any.real = std::move(t);
  } else {
    ComplexTensor t(shape);
    read_bytes(in, t.data(), t.numel() * sizeof(std::complex<double>), origin,
               "payload");
    any.complex = std::move(t);
  }
  return any;
}

F2ftAny read_f2ft_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_f2ft(in, path);
}

Tensor read_f2ft_real(const std::string& path) {
  F2ftAny any = read_f2ft_file(path);
  if (any.dtype != F2ftDtype::Real)
    throw FormatError(FormatDefect::BadDtype, path + ": expected a real tensor");
  return std::move(any.real);
}

ComplexTensor read_f2ft_complex(const std::string& path) {
  F2ftAny any = read_f2ft_file(path);
  if (any.dtype != F2ftDtype::Complex)
    throw FormatError(FormatDefect::BadDtype,
                      path + ": expected a complex tensor");
  return std::move(any.complex);
}

}  // namespace f2f
