#include "mage/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mage {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'G', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

// Checkpoint integers are little-endian on disk. The byte-wise writer keeps
// the format well-defined regardless of host endianness.
template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  write_le<std::uint64_t>(os, bits);
}

double read_f64(std::istream& is) {
  std::uint64_t bits = read_le<std::uint64_t>(is);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

}  // namespace

Parameter& ParameterStore::create(const std::string& name, Tensor init) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  return *params_.back();
}

Parameter& ParameterStore::create_zeros(const std::string& name, std::vector<Index> shape) {
  return create(name, Tensor::zeros(std::move(shape)));
}

Parameter& ParameterStore::create_uniform(const std::string& name, std::vector<Index> shape,
                                          Index fan_in, Index fan_out, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return create(name, std::move(t));
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Index ParameterStore::value_count() const {
  Index n = 0;
  for (auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->grad.set_zero();
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (auto& p : params_)
    for (Index i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
  return std::sqrt(sq);
}

void ParameterStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(os, kVersion);
  write_le<std::uint64_t>(os, params_.size());
  for (const auto& p : params_) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    os.put(static_cast<char>(kDtypeF64));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.rank()));
    for (Index e : p->value.shape()) write_le<std::uint64_t>(os, e);
    for (Index i = 0; i < p->value.size(); ++i) write_f64(os, p->value[i]);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void ParameterStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a MAGECKPT checkpoint: " + path);
  const auto version = read_le<std::uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_le<std::uint64_t>(is);
  if (count != params_.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                             std::to_string(params_.size()));
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto name_len = read_le<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto dtype = static_cast<std::uint8_t>(is.get());
    if (dtype != kDtypeF64)
      throw std::runtime_error("checkpoint parameter '" + name + "' has unsupported dtype tag " +
                               std::to_string(dtype));
    const auto rank = read_le<std::uint32_t>(is);
    std::vector<Index> shape(rank);
    for (auto& e : shape) e = static_cast<Index>(read_le<std::uint64_t>(is));
    Parameter* p = find(name);
    if (!p) throw std::runtime_error("checkpoint parameter '" + name + "' not present in model");
    if (p->value.shape() != shape)
      throw std::runtime_error("shape mismatch for parameter '" + name + "': checkpoint " +
                               shape_str(shape) + ", model " + p->value.shape_str());
    for (Index i = 0; i < p->value.size(); ++i) p->value[i] = read_f64(is);
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  }
}

}  // namespace mage
