#include "pmdm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pmdm {

namespace {

// The build targets little-endian hosts; serialize by raw copy.
template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error(std::string("checkpoint: truncated ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write("PMDM", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, store.count());
  for (const std::string& name : store.names()) {
    const Tensor t = store.get(name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put<std::uint64_t>(os, e);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(ParamStore& store, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PMDM", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = take<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  const auto count = take<std::uint64_t>(is, "entry count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw std::runtime_error("checkpoint: truncated name");
    const auto rank = take<std::uint32_t>(is, "rank");
    Shape shape(rank);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(take<std::uint64_t>(is, "shape"));
      n *= shape[d];
    }
    std::vector<double> values(n);
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(n * sizeof(double))))
      throw std::runtime_error("checkpoint: truncated values for '" + name +
                               "'");
    if (!store.contains(name))
      throw std::runtime_error("checkpoint: unexpected parameter '" + name +
                               "'");
    if (store.get(name).shape() != shape)
      throw std::runtime_error("checkpoint: shape mismatch for '" + name +
                               "': file " + shape_str(shape) + ", model " +
                               shape_str(store.get(name).shape()));
    store.load_values(name, values);
  }
}

}  // namespace pmdm
