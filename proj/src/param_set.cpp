#include "f2f/param_set.hpp"

#include <cstring>
#include <fstream>

#include "f2f/errors.hpp"

namespace f2f {

ParamSet::Entry& ParamSet::add(const std::string& name, Tensor value) {
  if (has(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor grad(value.shape());
  entries_.push_back(Entry{name, std::move(value), std::move(grad)});
  return entries_.back();
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

ParamSet::Entry& ParamSet::at(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e;
  throw ConfigError("unknown parameter name: " + name);
}

const ParamSet::Entry& ParamSet::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw ConfigError("unknown parameter name: " + name);
}

void ParamSet::zero_grads() {
  for (auto& e : entries_)
    for (std::size_t i = 0; i < e.grad.numel(); ++i) e.grad[i] = 0.0;
}

void ParamSet::adopt(ParamSet&& other) {
  for (auto& e : other.entries_) {
    if (has(e.name)) throw ConfigError("duplicate parameter name: " + e.name);
    entries_.push_back(std::move(e));
  }
  other.entries_.clear();
}

std::size_t param_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& e : params.entries()) n += e.value.numel();
  return n;
}

namespace {

constexpr char kMagic[4] = {'F', '2', 'F', 'C'};
constexpr std::uint8_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) throw IoError("short write while emitting checkpoint data");
}

void read_bytes(std::istream& in, void* p, std::size_t n,
                const std::string& origin, const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw FormatError(FormatDefect::Truncated,
                      origin + ": truncated while reading " + what);
}

}  // namespace

void write_f2fc(std::ostream& out, const std::vector<NamedTensor>& entries) {
  write_bytes(out, kMagic, 4);
  write_bytes(out, &kVersion, 1);
  if (entries.size() > 0xffffffffu)
    throw IoError("checkpoint entry count exceeds format limit");
  const std::uint32_t count = static_cast<std::uint32_t>(entries.size());
  write_bytes(out, &count, 4);
  for (const auto& e : entries) {
    if (e.name.size() > 0xffffu)
      throw IoError("checkpoint entry name too long: " + e.name);
    const std::uint16_t len = static_cast<std::uint16_t>(e.name.size());
    write_bytes(out, &len, 2);
    write_bytes(out, e.name.data(), e.name.size());
    write_f2ft(out, e.value);
  }
}

void write_f2fc_file(const std::string& path,
                     const std::vector<NamedTensor>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_f2fc(out, entries);
}

std::vector<NamedTensor> read_f2fc(std::istream& in, const std::string& origin) {
  char magic[4];
  read_bytes(in, magic, 4, origin, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(FormatDefect::BadMagic, origin + ": not a checkpoint file");
  std::uint8_t version = 0;
  read_bytes(in, &version, 1, origin, "version");
  if (version != kVersion)
    throw FormatError(FormatDefect::BadVersion,
                      origin + ": unsupported version " + std::to_string(version));
  std::uint32_t count = 0;
  read_bytes(in, &count, 4, origin, "entry count");

  std::vector<NamedTensor> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t len = 0;
    read_bytes(in, &len, 2, origin, "entry name length");
    std::string name(len, '\0');
    if (len) read_bytes(in, name.data(), len, origin, "entry name");
    F2ftAny any = read_f2ft(in, origin + ":" + name);
    if (any.dtype != F2ftDtype::Real)
      throw FormatError(FormatDefect::BadDtype,
                        origin + ": checkpoint entry " + name + " is not real-valued");
    entries.push_back(NamedTensor{std::move(name), std::move(any.real)});
  }
  return entries;
}

std::vector<NamedTensor> read_f2fc_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_f2fc(in, path);
}

}  // namespace f2f
