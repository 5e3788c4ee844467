#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "f2f/tensor.hpp"

namespace f2f {

// Named trainable tensors with matching gradient buffers. Iteration follows
// insertion order, which fixes the optimizer update order and the checkpoint
// entry order.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;  // same shape as value
  };

  // returns the new entry; grad starts zeroed
  Entry& add(const std::string& name, Tensor value);

  bool has(const std::string& name) const;
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void zero_grads();

  // merges another set's entries after this set's own (names must stay unique)
  void adopt(ParamSet&& other);

 private:
  std::vector<Entry> entries_;
};

std::size_t param_count(const ParamSet& params);

// --- F2FC checkpoint container ---
// magic "F2FC", version u8=1, entry count u32, then per entry
// {name length u16, UTF-8 name, embedded F2FT tensor}.

struct NamedTensor {
  std::string name;
  Tensor value;
};

void write_f2fc(std::ostream& out, const std::vector<NamedTensor>& entries);
void write_f2fc_file(const std::string& path,
                     const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_f2fc(std::istream& in, const std::string& origin);
std::vector<NamedTensor> read_f2fc_file(const std::string& path);

}  // namespace f2f
