#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace f2f {

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Dense row-major f64 array. Shape is fixed at construction; reshaped()
// returns a new tensor with the same element count.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  Tensor reshaped(std::vector<std::size_t> new_shape) const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Dense row-major complex<f64> array; memory layout is interleaved (re, im)
// pairs per the std::complex guarantee.
class ComplexTensor {
 public:
  ComplexTensor() = default;
  explicit ComplexTensor(std::vector<std::size_t> shape);
  ComplexTensor(std::vector<std::size_t> shape,
                std::vector<std::complex<double>> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t numel() const { return data_.size(); }

  std::complex<double>* data() { return data_.data(); }
  const std::complex<double>* data() const { return data_.data(); }
  std::complex<double>& operator[](std::size_t i) { return data_[i]; }
  const std::complex<double>& operator[](std::size_t i) const {
    return data_[i];
  }

  ComplexTensor reshaped(std::vector<std::size_t> new_shape) const;
  bool same_shape(const ComplexTensor& other) const {
    return shape_ == other.shape_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<std::complex<double>> data_;
};

// Row-major strides for a shape.
std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape);

// Stacked-real form: the channel axis is doubled, real parts first, then
// imaginary parts. The round trip is bit-exact.
Tensor complex_to_stacked(const ComplexTensor& x, std::size_t channel_axis);
ComplexTensor stacked_to_complex(const Tensor& x, std::size_t channel_axis);

// --- F2FT tensor file format (little-endian) ---
// magic "F2FT", version u8=1, dtype u8 (1 real f64, 2 complex f64
// interleaved), rank u8, rank x u64 dims, raw row-major payload.

enum class F2ftDtype : std::uint8_t { Real = 1, Complex = 2 };

void write_f2ft(std::ostream& out, const Tensor& t);
void write_f2ft(std::ostream& out, const ComplexTensor& t);
void write_f2ft_file(const std::string& path, const Tensor& t);
void write_f2ft_file(const std::string& path, const ComplexTensor& t);

struct F2ftAny {
  F2ftDtype dtype;
  Tensor real;           // set when dtype == Real
  ComplexTensor complex; // set when dtype == Complex
};

F2ftAny read_f2ft(std::istream& in, const std::string& origin);
F2ftAny read_f2ft_file(const std::string& path);
Tensor read_f2ft_real(const std::string& path);
ComplexTensor read_f2ft_complex(const std::string& path);

}  // namespace f2f
