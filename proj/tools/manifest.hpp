#pragma once

#include <chrono>
#include <filesystem>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace catparc::cli {

std::string sha256_file(const std::filesystem::path& path);

/// manifest.json written next to the outputs of one command. Outputs are
/// listed with their digests so reruns can be compared.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_options(nlohmann::json options) { options_ = std::move(options); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void warn(std::string message);
  void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  /// Starts or stops a named timer; times are wall-clock seconds.
  void start(const std::string& phase);
  void stop(const std::string& phase);

  const std::vector<std::string>& warnings() const { return warnings_; }
  void write(const std::filesystem::path& dir) const;

 private:
  using Clock = std::chrono::steady_clock;
  std::string command_;
  nlohmann::json options_ = nlohmann::json::object();
  std::optional<std::uint64_t> seed_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::vector<std::string> warnings_;
  std::map<std::string, Clock::time_point> running_;
  std::map<std::string, double> timings_;
  nlohmann::json extra_ = nlohmann::json::object();
};

}  // namespace catparc::cli
