#include "convolve/config_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>
#include <toml.hpp>

#include "convolve/errors.hpp"

namespace convolve {

namespace {

Json from_toml(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json out = Json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = from_toml(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    Json out = Json::array();
    for (const auto& v : *a) out.push_back(from_toml(v));
    return out;
  }
  if (const auto* s = node.as_string()) return Json(s->get());
  if (const auto* i = node.as_integer()) return Json(i->get());
  if (const auto* f = node.as_floating_point()) return Json(f->get());
  if (const auto* b = node.as_boolean()) return Json(b->get());
  throw ConfigError("config: dates and times are not supported values");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string type_name(const Json& v) { return v.type_name(); }

}  // namespace

Json parse_toml(std::string_view text, std::string_view source) {
  try {
    return from_toml(toml::parse(text, source));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
}

Json load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".json") {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  return parse_toml(text, path.string());
}

std::string canonical_json(const Json& config) { return config.dump(); }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string config_hash(const Json& config) { return sha256_hex(canonical_json(config)); }

ConfigReader::ConfigReader(const Json& table) : table_(table) {
  if (!table_.is_object()) throw ConfigError("config: expected a table");
}

bool ConfigReader::has(const std::string& key) const { return table_.contains(key); }

const Json* ConfigReader::find(const std::string& key) {
  if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) seen_.push_back(key);
  auto it = table_.find(key);
  return it == table_.end() ? nullptr : &*it;
}

double ConfigReader::number(const std::string& key, std::optional<double> fallback) {
  const Json* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key + ": missing required number");
  }
  if (!v->is_number()) throw ConfigError(key + ": expected a number, got " + type_name(*v));
  return v->get<double>();
}

std::optional<double> ConfigReader::optional_number(const std::string& key) {
  if (!table_.contains(key)) {
    find(key);
    return std::nullopt;
  }
  return number(key);
}

std::int64_t ConfigReader::integer(const std::string& key, std::optional<std::int64_t> fallback) {
  const Json* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key + ": missing required integer");
  }
  if (v->is_number_integer()) return v->get<std::int64_t>();
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  throw ConfigError(key + ": expected an integer, got " + v->dump());
}

std::uint64_t ConfigReader::seed(const std::string& key, std::uint64_t fallback) {
  const Json* v = find(key);
  if (!v) return fallback;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer() && v->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v->get<std::int64_t>());
  throw ConfigError(key + ": expected a nonnegative integer");
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  const Json* v = find(key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(key + ": expected true or false");
  return v->get<bool>();
}

std::string ConfigReader::string(const std::string& key, std::optional<std::string> fallback) {
  const Json* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key + ": missing required string");
  }
  if (!v->is_string()) throw ConfigError(key + ": expected a string, got " + type_name(*v));
  return v->get<std::string>();
}

std::vector<double> ConfigReader::numbers(const std::string& key, std::optional<std::vector<double>> fallback) {
  const Json* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key + ": missing required value");
  }
  std::vector<double> out;
  auto take = [&](const Json& x) {
    if (!x.is_number()) throw ConfigError(key + ": expected numbers, got " + type_name(x));
    out.push_back(x.get<double>());
  };
  if (v->is_array()) {
    for (const Json& x : *v) take(x);
  } else {
    take(*v);
  }
  return out;
}

std::vector<std::int64_t> ConfigReader::integers(const std::string& key,
                                                 std::optional<std::vector<std::int64_t>> fallback) {
  const Json* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key + ": missing required value");
  }
  std::vector<std::int64_t> out;
  auto take = [&](const Json& x) {
    if (!x.is_number_integer()) throw ConfigError(key + ": expected integers, got " + x.dump());
    out.push_back(x.get<std::int64_t>());
  };
  if (v->is_array()) {
    for (const Json& x : *v) take(x);
  } else {
    take(*v);
  }
  return out;
}

std::vector<std::string> ConfigReader::strings(const std::string& key,
                                               std::optional<std::vector<std::string>> fallback) {
  const Json* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key + ": missing required value");
  }
  std::vector<std::string> out;
  auto take = [&](const Json& x) {
    if (!x.is_string()) throw ConfigError(key + ": expected strings, got " + type_name(x));
    out.push_back(x.get<std::string>());
  };
  if (v->is_array()) {
    for (const Json& x : *v) take(x);
  } else {
    take(*v);
  }
  return out;
}

const Json& ConfigReader::raw(const std::string& key) {
  const Json* v = find(key);
  if (!v) throw ConfigError(key + ": missing required value");
  return *v;
}

void ConfigReader::finish() const {
  for (auto it = table_.begin(); it != table_.end(); ++it) {
    if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
      throw ConfigError(it.key() + ": unknown key");
    }
  }
}

}  // namespace convolve
