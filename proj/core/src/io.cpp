#include "dusnet/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace dus {
namespace {

constexpr std::array<char, 4> kDmrtMagic{'D', 'M', 'R', 'T'};
constexpr std::array<char, 4> kDuscMagic{'D', 'U', 'S', 'C'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint32_t kMaxDims = 8;
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::size_t kMaxElements = std::size_t{1} << 32;

// --- little-endian primitives -------------------------------------------

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void write_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 8);
}

void read_exact(std::istream& is, void* dst, std::size_t n, const char* what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
}

std::uint8_t read_u8(std::istream& is, const char* what) {
  unsigned char b = 0;
  read_exact(is, &b, 1, what);
  return b;
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  read_exact(is, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint64_t read_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  read_exact(is, b, 8, what);
  return get_u64(b);
}

void expect_magic(std::istream& is, const std::array<char, 4>& magic) {
  char got[4] = {0, 0, 0, 0};
  is.read(got, 4);
  const std::string expected(magic.begin(), magic.end());
  if (is.gcount() != 4 || std::memcmp(got, magic.data(), 4) != 0) {
    throw FormatError("bad magic: expected \"" + expected + "\"");
  }
}

void write_f64s(std::ostream& os, std::span<const double> values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void read_f64s(std::istream& is, std::span<double> values, const char* what) {
  std::vector<unsigned char> bytes(values.size() * 8);
  read_exact(is, bytes.data(), bytes.size(), what);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<double>(get_u64(&bytes[8 * i]));
}

std::size_t element_size(DmrtType t) {
  switch (t) {
    case DmrtType::mask:
      return 1;
    case DmrtType::complex:
      return 16;
    case DmrtType::real:
      return 8;
  }
  throw FormatError("unknown DMRT dtype");
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw InvalidArgument(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

// --- DMRT conversions -------------------------------------------------------

template <class Grid>
DmrtArray complex_array(const Grid& g) {
  const Shape3T& s = g.shape();
  DmrtArray a{{checked_u32(s.h, "h"), checked_u32(s.w, "w"), checked_u32(s.t, "t")}, DmrtType::complex, {}};
  a.payload.reserve(g.size() * 16);
  for (const cplx& c : g.data()) {
    put_u64(a.payload, std::bit_cast<std::uint64_t>(c.real()));
    put_u64(a.payload, std::bit_cast<std::uint64_t>(c.imag()));
  }
  return a;
}

Shape3T shape_of(const DmrtArray& a, const char* what) {
  if (a.dims.size() != 3) {
    throw FormatError(std::string(what) + " expects 3 dims, file has " + std::to_string(a.dims.size()));
  }
  return Shape3T{a.dims[0], a.dims[1], a.dims[2]};
}

template <class Grid>
Grid grid_from(const DmrtArray& a, const char* what) {
  if (a.type != DmrtType::complex) throw FormatError(std::string(what) + " expects complex dtype 1");
  const Shape3T s = shape_of(a, what);
  std::vector<cplx> data(s.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = cplx(std::bit_cast<double>(get_u64(&a.payload[16 * i])),
                   std::bit_cast<double>(get_u64(&a.payload[16 * i + 8])));
  }
  return Grid(s, std::move(data));
}

void write_file(const std::filesystem::path& path, const DmrtArray& a) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_dmrt(os, a);
  if (!os) throw FormatError("write failed for " + path.string());
}

DmrtArray read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return read_dmrt(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_dmrt(std::ostream& os, const DmrtArray& a) {
  std::size_t count = 1;
  for (std::uint32_t d : a.dims) count *= d;
  if (a.payload.size() != count * element_size(a.type)) {
    throw InvalidArgument("DMRT payload length does not match dims");
  }
  os.write(kDmrtMagic.data(), 4);
  write_u32(os, kDmrtVersion);
  write_u32(os, checked_u32(a.dims.size(), "ndims"));
  for (std::uint32_t d : a.dims) write_u32(os, d);
  write_u8(os, static_cast<std::uint8_t>(a.type));
  os.write(reinterpret_cast<const char*>(a.payload.data()), static_cast<std::streamsize>(a.payload.size()));
}

DmrtArray read_dmrt(std::istream& is) {
  expect_magic(is, kDmrtMagic);
  const std::uint32_t version = read_u32(is, "version");
  if (version != kDmrtVersion) {
    throw FormatError("unsupported DMRT version " + std::to_string(version) + ", expected " +
                      std::to_string(kDmrtVersion));
  }
  const std::uint32_t ndims = read_u32(is, "ndims");
  if (ndims == 0 || ndims > kMaxDims) throw FormatError("invalid DMRT ndims " + std::to_string(ndims));
  DmrtArray a;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    const std::uint32_t d = read_u32(is, "dims");
    if (d == 0) throw FormatError("DMRT dimension " + std::to_string(i) + " is zero");
    a.dims.push_back(d);
    if (count > kMaxElements / d) throw FormatError("DMRT dims describe more than 2^32 elements");
    count *= d;
  }
  const std::uint8_t dtype = read_u8(is, "dtype");
  if (dtype != 0 && dtype != 1 && dtype != 3) throw FormatError("unknown DMRT dtype " + std::to_string(dtype));
  a.type = static_cast<DmrtType>(dtype);
  a.payload.resize(count * element_size(a.type));
  read_exact(is, a.payload.data(), a.payload.size(), "payload");
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after DMRT payload");
  return a;
}

void save_dmrt(const std::filesystem::path& path, const DynVolume& v) { write_file(path, complex_array(v)); }
void save_dmrt(const std::filesystem::path& path, const KSpace& k) { write_file(path, complex_array(k)); }

void save_dmrt(const std::filesystem::path& path, const SamplingMask& m) {
  const Shape3T& s = m.shape();
  DmrtArray a{{checked_u32(s.h, "h"), checked_u32(s.w, "w"), checked_u32(s.t, "t")}, DmrtType::mask, {}};
  a.payload.assign(m.support().begin(), m.support().end());
  write_file(path, a);
}

void save_dmrt(const std::filesystem::path& path, const ChannelTensor& c) {
  const Shape3T& s = c.shape();
  DmrtArray a{{checked_u32(c.channels(), "channels"), checked_u32(s.h, "h"), checked_u32(s.w, "w"),
               checked_u32(s.t, "t")},
              DmrtType::real,
              {}};
  a.payload.reserve(c.size() * 8);
  for (double v : c.data()) put_u64(a.payload, std::bit_cast<std::uint64_t>(v));
  write_file(path, a);
}

DynVolume load_volume(const std::filesystem::path& path) {
  return grid_from<DynVolume>(read_file(path), "volume");
}

KSpace load_kspace(const std::filesystem::path& path) { return grid_from<KSpace>(read_file(path), "k-space"); }

SamplingMask load_mask(const std::filesystem::path& path) {
  const DmrtArray a = read_file(path);
  if (a.type != DmrtType::mask) throw FormatError(path.string() + ": mask expects dtype 0");
  const Shape3T s = shape_of(a, "mask");
  std::vector<std::uint8_t> support(a.payload.begin(), a.payload.end());
  try {
    return SamplingMask(s, std::move(support));
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ChannelTensor load_channels(const std::filesystem::path& path) {
  const DmrtArray a = read_file(path);
  if (a.type != DmrtType::real) throw FormatError(path.string() + ": channel tensor expects dtype 3");
  if (a.dims.size() != 4) throw FormatError(path.string() + ": channel tensor expects 4 dims");
  const Shape3T s{a.dims[1], a.dims[2], a.dims[3]};
  std::vector<double> data(static_cast<std::size_t>(a.dims[0]) * s.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::bit_cast<double>(get_u64(&a.payload[8 * i]));
  return ChannelTensor(a.dims[0], s, std::move(data));
}

// --- DUSC ---------------------------------------------------------------------

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  ckpt.params.validate(ckpt.config);
  const NetworkConfig& cfg = ckpt.config;
  os.write(kDuscMagic.data(), 4);
  write_u32(os, kDuscVersion);
  write_u32(os, checked_u32(cfg.n_phases, "n_phases"));
  write_u32(os, checked_u32(cfg.nc, "nc"));
  write_u8(os, cfg.dc_mode == DcMode::closed_form ? 0 : 1);
  write_u32(os, checked_u32(cfg.f_depth, "f_depth"));
  write_u32(os, checked_u32(cfg.fhat_depth, "fhat_depth"));

  const auto views = parameter_views(ckpt.params);
  write_u32(os, checked_u32(views.size(), "tensor count"));
  for (const ConstParamView& v : views) {
    write_u32(os, checked_u32(v.name.size(), "name length"));
    os.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    write_u32(os, checked_u32(v.dims.size(), "ndims"));
    for (std::size_t d : v.dims) write_u32(os, checked_u32(d, "dim"));
    write_f64s(os, v.values);
  }
  write_u64(os, ckpt.meta.step);
  write_u64(os, ckpt.meta.seed);
}

Checkpoint read_checkpoint(std::istream& is) {
  expect_magic(is, kDuscMagic);
  const std::uint32_t version = read_u32(is, "version");
  if (version != kDuscVersion) {
    throw FormatError("unsupported DUSC version " + std::to_string(version) + ", expected " +
                      std::to_string(kDuscVersion));
  }
  Checkpoint ckpt;
  NetworkConfig& cfg = ckpt.config;
  cfg.n_phases = read_u32(is, "n_phases");
  cfg.nc = read_u32(is, "nc");
  const std::uint8_t mode = read_u8(is, "dc_mode");
  if (mode > 1) throw FormatError("unknown dc_mode " + std::to_string(mode));
  cfg.dc_mode = mode == 0 ? DcMode::closed_form : DcMode::cg;
  cfg.f_depth = read_u32(is, "f_depth");
  cfg.fhat_depth = read_u32(is, "fhat_depth");
  if (cfg.n_phases > 1024 || cfg.nc > 4096 || cfg.f_depth > 64 || cfg.fhat_depth > 64) {
    throw FormatError("checkpoint config out of range");
  }
  try {
    cfg.validate();
    ckpt.params = zeros_like(init_network(cfg, 0));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid checkpoint config: ") + e.what());
  }

  auto views = parameter_views(ckpt.params);
  std::map<std::string, ParamView*> by_name;
  for (ParamView& v : views) by_name.emplace(v.name, &v);

  const std::uint32_t count = read_u32(is, "tensor count");
  if (count != views.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, config implies " +
                      std::to_string(views.size()));
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = read_u32(is, "tensor name length");
    if (len == 0 || len > kMaxNameLength) throw FormatError("invalid tensor name length");
    std::string name(len, '\0');
    read_exact(is, name.data(), len, "tensor name");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("unexpected or duplicate tensor '" + name + "'");
    ParamView& v = *it->second;
    by_name.erase(it);
    const std::uint32_t ndims = read_u32(is, "tensor ndims");
    if (ndims != v.dims.size()) throw FormatError("tensor '" + name + "' has wrong rank");
    for (std::size_t d = 0; d < ndims; ++d) {
      if (read_u32(is, "tensor dims") != v.dims[d]) throw FormatError("tensor '" + name + "' has wrong shape");
    }
    read_f64s(is, v.values, "tensor payload");
  }
  ckpt.meta.step = read_u64(is, "step");
  ckpt.meta.seed = read_u64(is, "seed");
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after DUSC metadata");
  try {
    ckpt.params.validate(cfg);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid checkpoint parameters: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
  if (!os) throw FormatError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return read_checkpoint(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dus
