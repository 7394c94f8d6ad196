#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace convolve {

using Json = nlohmann::json;

/// Reads a TOML (.toml) or JSON (.json) config into one JSON tree.
/// Files with another extension are parsed as TOML.
Json load_config(const std::filesystem::path& path);
Json parse_toml(std::string_view text, std::string_view source = "config");

// Keys sorted, no whitespace: the form that is hashed.
std::string canonical_json(const Json& config);
std::string sha256_hex(std::string_view data);
std::string config_hash(const Json& config);

/**
 * Typed access to one config table. Every key that is read is recorded so
 * finish() can reject unknown keys. Messages start with the key name.
 */
class ConfigReader {
 public:
  explicit ConfigReader(const Json& table);

  bool has(const std::string& key) const;
  double number(const std::string& key, std::optional<double> fallback = std::nullopt);
  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt);
  std::uint64_t seed(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt);
  std::optional<double> optional_number(const std::string& key);

  // Scalars are promoted to one-element lists.
  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt);
  std::vector<std::int64_t> integers(const std::string& key,
                                     std::optional<std::vector<std::int64_t>> fallback = std::nullopt);
  std::vector<std::string> strings(const std::string& key,
                                   std::optional<std::vector<std::string>> fallback = std::nullopt);
  const Json& raw(const std::string& key);

  // Throws ConfigError for keys that were never read.
  void finish() const;

 private:
  const Json& table_;
  std::vector<std::string> seen_;
  const Json* find(const std::string& key);
};

}  // namespace convolve
