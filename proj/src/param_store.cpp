#include "geoflow/param_store.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "geoflow/errors.hpp"

namespace geoflow {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'T', 'E', 'N', 'S', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f32(std::ostream& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (tensors_.count(name)) throw InvalidInput("ParamStore: duplicate tensor name " + name);
  names_.push_back(name);
  return tensors_.emplace(name, std::move(t)).first->second;
}

bool ParamStore::has(std::string_view name) const {
  return tensors_.count(std::string(name)) != 0;
}

Tensor& ParamStore::at(std::string_view name) {
  auto it = tensors_.find(std::string(name));
  if (it == tensors_.end()) throw InvalidInput("ParamStore: unknown tensor " + std::string(name));
  return it->second;
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = tensors_.find(std::string(name));
  if (it == tensors_.end()) throw InvalidInput("ParamStore: unknown tensor " + std::string(name));
  return it->second;
}

std::size_t ParamStore::total_parameters() const {
  std::size_t n = 0;
  for (const auto& name : names_) n += tensors_.at(name).size();
  return n;
}

bool ParamStore::finite() const {
  for (const auto& name : names_) {
    if (!tensors_.at(name).finite()) return false;
  }
  return true;
}

void ParamStore::zero_all() {
  for (const auto& name : names_) tensors_.at(name).fill(0.0);
}

void ParamStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("ParamStore::save: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, names_.size());
  for (const auto& name : names_) {
    const Tensor& t = tensors_.at(name);
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, t.shape.size());
    for (std::size_t d : t.shape) write_u64(out, d);
    write_u64(out, 0);  // dtype 0 = f32
  }
  for (const auto& name : names_) {
    for (double x : tensors_.at(name).v) write_f32(out, static_cast<float>(x));
  }
  if (!out) throw NumericFailure("ParamStore::save: write failed for " + path.string());
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("ParamStore::load: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw InvalidInput("ParamStore::load: bad magic in " + path.string());
  std::uint64_t count = read_u64(in);
  ParamStore store;
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
  };
  std::vector<Entry> entries(count);
  for (auto& e : entries) {
    std::uint64_t len = read_u64(in);
    e.name.resize(len);
    in.read(e.name.data(), static_cast<std::streamsize>(len));
    std::uint64_t rank = read_u64(in);
    e.shape.resize(rank);
    for (auto& d : e.shape) d = read_u64(in);
    std::uint64_t dtype = read_u64(in);
    if (dtype != 0) throw InvalidInput("ParamStore::load: unsupported dtype");
  }
  for (auto& e : entries) {
    Tensor t = Tensor::zeros(e.shape);
    for (double& x : t.v) x = static_cast<double>(read_f32(in));
    store.add(e.name, std::move(t));
  }
  if (!in) throw InvalidInput("ParamStore::load: truncated file " + path.string());
  return store;
}

}  // namespace geoflow
