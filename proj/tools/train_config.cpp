#include "train_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "dusnet/errors.hpp"

namespace dus::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw InvalidArgument("config: bad value '" + value + "' for " + key);
  return out;
}

Shape3T parse_optional_shape(const std::string& value) {
  if (value == "0x0x0" || value == "none") return Shape3T{0, 0, 0};
  return parse_shape(value);
}

}  // namespace

TrainSetup parse_train_config(std::istream& is) {
  TrainSetup s;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<std::size_t>(k, v); };
  };
  auto real = [](double& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<double>(k, v); };
  };
  auto u64 = [](std::uint64_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<std::uint64_t>(k, v); };
  };

  const std::map<std::string, Setter> setters = {
      {"n_phases", size(s.net.n_phases)},
      {"nc", size(s.net.nc)},
      {"f_depth", size(s.net.f_depth)},
      {"fhat_depth", size(s.net.fhat_depth)},
      {"dc_mode",
       [&s](const std::string& k, const std::string& v) {
         if (v == "closed_form") {
           s.net.dc_mode = DcMode::closed_form;
         } else if (v == "cg") {
           s.net.dc_mode = DcMode::cg;
         } else {
           throw InvalidArgument("config: bad value '" + v + "' for " + k);
         }
       }},
      {"init_mu", real(s.net.init_mu)},
      {"init_eta", real(s.net.init_eta)},
      {"lr0", real(s.train.lr0)},
      {"decay", real(s.train.decay)},
      {"decay_steps", size(s.train.decay_steps)},
      {"epochs", size(s.train.epochs)},
      {"batch", size(s.train.batch)},
      {"seed", u64(s.train.seed)},
      {"zeta", real(s.train.zeta)},
      {"noise_sigma", real(s.train.noise_sigma)},
      {"n_train", size(s.n_train)},
      {"shape", [&s](const std::string&, const std::string& v) { s.shape = parse_shape(v); }},
      {"ellipses", size(s.ellipses)},
      {"motion", real(s.motion)},
      {"data_seed", u64(s.data_seed)},
      {"data",
       [&s](const std::string&, const std::string& v) {
         s.data_files.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
           if (!trim(item).empty()) s.data_files.push_back(trim(item));
         }
       }},
      {"patch", [&s](const std::string&, const std::string& v) { s.patch = parse_optional_shape(v); }},
      {"patch_stride", [&s](const std::string&, const std::string& v) { s.patch_stride = parse_shape(v); }},
      {"pattern",
       [&s](const std::string& k, const std::string& v) {
         if (v != "radial" && v != "vds") throw InvalidArgument("config: bad value '" + v + "' for " + k);
         s.pattern = v;
       }},
      {"spokes", size(s.spokes)},
      {"accel", real(s.accel)},
      {"center_lines", size(s.center_lines)},
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw InvalidArgument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(key, value);
  }
  s.net.validate();
  s.train.validate();
  if (s.data_files.empty() && s.n_train == 0) throw InvalidArgument("config: n_train must be positive");
  return s;
}

TrainSetup load_train_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config " + path);
  return parse_train_config(is);
}

}  // namespace dus::cli
