#include "manifest.hpp"

#include <array>
#include <fstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include "catparc/error.hpp"

namespace catparc::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest initialisation failed");
  }
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) hex += fmt::format("{:02x}", digest[k]);
  return hex;
}

RunManifest::RunManifest(std::string command) : command_(std::move(command)) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_[path.string()] = sha256_file(path);
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

void RunManifest::warn(std::string message) { warnings_.push_back(std::move(message)); }

void RunManifest::start(const std::string& phase) { running_[phase] = Clock::now(); }

void RunManifest::stop(const std::string& phase) {
  const auto it = running_.find(phase);
  if (it == running_.end()) return;
  timings_[phase] += std::chrono::duration<double>(Clock::now() - it->second).count();
  running_.erase(it);
}

void RunManifest::write(const std::filesystem::path& dir) const {
  nlohmann::json j;
  j["command"] = command_;
  j["options"] = options_;
  j["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
  j["inputs"] = nlohmann::json::object();
  for (const auto& [path, digest] : inputs_) j["inputs"][path] = {{"sha256", digest}};
  j["outputs"] = nlohmann::json::object();
  for (const auto& path : outputs_)
    j["outputs"][path.filename().string()] = {{"sha256", sha256_file(path)}};
  j["versions"] = {
      {"catparc", CATPARC_VERSION},
      {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
      {"boost", fmt::format("{}.{}.{}", BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100)},
      {"fmt", FMT_VERSION},
      {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                    NLOHMANN_JSON_VERSION_PATCH)},
      {"openssl", OpenSSL_version(OPENSSL_VERSION)},
      {"compiler", __VERSION__}};
  j["timings_seconds"] = timings_;
  j["warnings"] = warnings_;
  for (const auto& [key, value] : extra_.items()) j[key] = value;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError(fmt::format("cannot write {}", (dir / "manifest.json").string()));
  out << j.dump(2) << '\n';
}

}  // namespace catparc::cli
